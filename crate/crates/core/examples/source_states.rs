//! Loads the two reproduction recipes and reports the model states they
//! describe: reduced purities, degrees of polarization and entanglement.

use std::path::Path;

use polartomo::io::read_spec;
use polartomo::metrics::{degree_of_polarization, entanglement_of_formation, purity, stokes_from_rho};
use polartomo::qmat::partial_trace;
use polartomo::source::build_two_photon_state;
use polartomo::Arm;

fn main() -> polartomo::Result<()> {
    let recipes = Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes");
    for name in ["qom-a.spec", "qom-b.spec"] {
        let spec = read_spec(&recipes.join(name))?;
        let rho = build_two_photon_state(&spec)?;
        let signal = partial_trace(&rho, Arm::One)?;
        let idler = partial_trace(&rho, Arm::Two)?;
        println!("{name}");
        println!(
            "  signal {:.1} nm, idler {:.1} nm",
            spec.signal_peak.center_nm, spec.idler_peak.center_nm
        );
        for (what, r) in [("signal", &signal), ("idler", &idler)] {
            let s = stokes_from_rho(r)?;
            println!(
                "  {what:<6} purity {:.3}  DoP {:.3}  S = ({:+.3}, {:+.3}, {:+.3})",
                purity(r),
                degree_of_polarization(&s)?,
                s.s1,
                s.s2,
                s.s3
            );
        }
        println!(
            "  pair   purity {:.3}  EoF {:.3}",
            purity(&rho),
            entanglement_of_formation(&rho)?
        );
        println!("  two-photon density matrix:\n{}", rho.matrix());
    }
    Ok(())
}
