//! Prints the single- and two-photon waveplate tables and checks that each
//! setting projects onto the state its label names.

use polartomo::polopt::{canonical_state, projector_from_setting, protocol_single, protocol_table, Protocol};
use polartomo::PolLabel;

fn main() {
    println!("single-photon settings (HWP, QWP in degrees):");
    for (label, setting) in protocol_single() {
        let p = projector_from_setting(&setting);
        let overlap = p.inner(&canonical_state(label)).norm();
        println!(
            "  {label}: hwp {:>6.1}  qwp {:>6.1}  |<label|projector>| = {overlap:.12}",
            setting.hwp_deg, setting.qwp_deg
        );
    }

    println!("\ntwo-photon table as written by `polartomo simulate`:");
    print!("{}", protocol_table(&Protocol::Two.settings()));

    let worst = Protocol::Two
        .settings()
        .iter()
        .flat_map(|s| {
            let (a, b) = s.label.split_once('-').expect("arm1-arm2 label");
            let la: PolLabel = a.parse().unwrap();
            let lb: PolLabel = b.parse().unwrap();
            [
                projector_from_setting(&s.arm1.unwrap()).inner(&canonical_state(la)).norm(),
                projector_from_setting(&s.arm2.unwrap()).inner(&canonical_state(lb)).norm(),
            ]
        })
        .fold(1.0f64, f64::min);
    println!("\nworst overlap over all 16 two-photon settings: {worst:.15}");
}
