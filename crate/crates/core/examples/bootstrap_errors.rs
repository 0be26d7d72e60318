//! Metric uncertainties from a Poisson bootstrap of the counts, and how they
//! shrink with longer integration.

use polartomo::metrics::MetricsReport;
use polartomo::simlab::{parse_filters, simulate_counts};
use polartomo::tomo::{bootstrap_uncertainty, mle_reconstruct, BootstrapMetric, MleOptions, TomoMode, TomographyProblem};
use polartomo::{Protocol, SourceSpec};

fn main() -> polartomo::Result<()> {
    let spec = SourceSpec::qom_b();
    let filters = parse_filters("LP1550@arm1")?;
    let opts = MleOptions::default();
    let metrics = BootstrapMetric::defaults_for(4);
    for integration_s in [5.0, 50.0] {
        let records = simulate_counts(&spec, &Protocol::Two.settings(), &filters, integration_s, 21)?;
        let problem = TomographyProblem::from_records(&records, TomoMode::TwoPhoton)?;
        let (rho, _) = mle_reconstruct(&problem, &opts)?;
        let m = MetricsReport::from_state(&rho)?;
        let boot = bootstrap_uncertainty(&problem, &metrics, 30, 8, &opts, true)?;
        println!("{integration_s} s per setting ({} resamples used):", boot.used);
        println!(
            "  purity      {:.4} ± {:.4}",
            m.purity.value,
            boot.std_of(BootstrapMetric::Purity).unwrap()
        );
        println!(
            "  concurrence {:.4} ± {:.4}",
            m.concurrence.unwrap().value,
            boot.std_of(BootstrapMetric::Concurrence).unwrap()
        );
        println!(
            "  EoF         {:.4} ± {:.4}",
            m.eof.unwrap().value,
            boot.std_of(BootstrapMetric::EntanglementOfFormation).unwrap()
        );
    }
    Ok(())
}
