//! Sixteen-setting two-photon tomography: a Bell state recovered from
//! simulated counts, and the QOM-A pair, which comes back mixed and close
//! to separable.

use polartomo::metrics::{concurrence, entanglement_of_formation, purity};
use polartomo::qmat::{c, fidelity};
use polartomo::simlab::{parse_filters, simulate_counts, simulate_state_counts};
use polartomo::tomo::{mle_reconstruct, MleOptions, TomoMode, TomographyProblem};
use polartomo::{DensityMatrix, Protocol, SourceSpec};

fn summarize(name: &str, rho: &DensityMatrix) -> polartomo::Result<()> {
    println!(
        "{name}: purity {:.4}  concurrence {:.4}  EoF {:.4}",
        purity(rho),
        concurrence(rho)?,
        entanglement_of_formation(rho)?
    );
    Ok(())
}

fn main() -> polartomo::Result<()> {
    let proto = Protocol::Two.settings();

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = DensityMatrix::pure(&[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)])?;
    let records = simulate_state_counts(&bell, &proto, 4.0e4, 0.0, 1.0, 3, true)?;
    let problem = TomographyProblem::from_records(&records, TomoMode::TwoPhoton)?;
    let (rho, diag) = mle_reconstruct(&problem, &MleOptions::default())?;
    summarize("Bell state", &rho)?;
    println!(
        "  fidelity to target {:.5}, log-likelihood {:.3}, {} iterations, converged {}",
        fidelity(&bell, &rho)?,
        diag.log_likelihood,
        diag.iterations,
        diag.converged
    );

    let spec = SourceSpec::qom_a();
    let records = simulate_counts(&spec, &proto, &parse_filters("LP1550@arm1")?, 60.0, 5)?;
    let problem = TomographyProblem::from_records(&records, TomoMode::TwoPhoton)?;
    let (rho, _) = mle_reconstruct(&problem, &MleOptions::default())?;
    summarize("QOM-A pair", &rho)?;
    println!("{}", rho.matrix());
    Ok(())
}
