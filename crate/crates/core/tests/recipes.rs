use std::path::Path;

use polartomo::io::read_spec;
use polartomo::metrics::purity;
use polartomo::qmat::partial_trace;
use polartomo::source::build_two_photon_state;
use polartomo::{Arm, SourceSpec};

fn load(name: &str) -> SourceSpec {
    read_spec(&Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes").join(name)).unwrap()
}

fn assert_close(file: &SourceSpec, preset: &SourceSpec) {
    assert_eq!(file.signal_pol, preset.signal_pol);
    assert_eq!(file.idler_mode1, preset.idler_mode1);
    assert_eq!(file.idler_mode2, preset.idler_mode2);
    assert_eq!(file.idler_weight1, preset.idler_weight1);
    assert_eq!(file.signal_peak, preset.signal_peak);
    assert!((file.idler_peak.center_nm - preset.idler_peak.center_nm).abs() < 0.05);
    assert!((file.idler_peak.fwhm_nm - preset.idler_peak.fwhm_nm).abs() < 0.01);
}

#[test]
fn recipes_match_presets() {
    assert_close(&load("qom-a.spec"), &SourceSpec::qom_a());
    assert_close(&load("qom-b.spec"), &SourceSpec::qom_b());
}

#[test]
fn recipe_idler_purities() {
    for (name, target) in [("qom-a.spec", 0.80), ("qom-b.spec", 0.72)] {
        let rho = build_two_photon_state(&load(name)).unwrap();
        let p = purity(&partial_trace(&rho, Arm::Two).unwrap());
        assert!((p - target).abs() < 0.005, "{name}: {p}");
    }
}

#[test]
fn spec_toml_roundtrip() {
    let spec = SourceSpec::qom_b();
    assert_eq!(SourceSpec::from_toml_str(&spec.to_toml_string()).unwrap(), spec);
}
