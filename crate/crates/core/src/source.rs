//! Photon-pair source model.
//!
//! The signal photon is emitted into the resonant mode with a fixed
//! polarization `|P_s⟩`. The idler is shared between two orthogonal low-Q
//! modes `|P₁⟩`, `|P₂⟩` with populations `w₁`, `w₂ = 1 - w₁`; the
//! superposition decoheres over the signal lifetime, so by default the idler
//! is an incoherent mixture. The pair state is written in source order,
//! signal ⊗ idler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polopt::{canonical_state, JonesVector, PolLabel};
use crate::qmat::{tensor_product, CMatrix, DensityMatrix};

/// `2·sqrt(2·ln 2)`: FWHM of a unit-σ Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

const CONJUGATE_TOL_NM: f64 = 0.5;
const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Gaussian spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

impl SpectralPeak {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Result<Self> {
        let p = SpectralPeak { center_nm, fwhm_nm };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_nm > 0.0 && self.center_nm.is_finite()) {
            return Err(Error::input(format!(
                "peak center must be positive, got {}",
                self.center_nm
            )));
        }
        if !(self.fwhm_nm >= 0.0 && self.fwhm_nm.is_finite()) {
            return Err(Error::input(format!(
                "peak fwhm must be non-negative, got {}",
                self.fwhm_nm
            )));
        }
        Ok(())
    }

    pub fn sigma_nm(&self) -> f64 {
        self.fwhm_nm / FWHM_PER_SIGMA
    }
}

/// Idler wavelength from energy conservation, `1/λi = 1/λp - 1/λs`.
pub fn conjugate_wavelength(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    if !(pump_nm > 0.0) || !pump_nm.is_finite() || !signal_nm.is_finite() {
        return Err(Error::input("wavelengths must be positive and finite"));
    }
    if signal_nm <= pump_nm {
        return Err(Error::input(format!(
            "signal {signal_nm} nm is not longer than pump {pump_nm} nm; no physical idler"
        )));
    }
    Ok(pump_nm * signal_nm / (signal_nm - pump_nm))
}

fn default_coherence() -> f64 {
    0.0
}

/// Complete description of a photon-pair source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub pump_nm: f64,
    pub pair_rate_hz: f64,
    pub signal_peak: SpectralPeak,
    pub signal_pol: JonesVector,
    pub idler_peak: SpectralPeak,
    pub idler_mode1: JonesVector,
    pub idler_mode2: JonesVector,
    /// Population of `idler_mode1`; `idler_mode2` carries the rest.
    pub idler_weight1: f64,
    /// Detection efficiencies of arm 1 and arm 2.
    pub arm_efficiency: [f64; 2],
    /// Flat accidental coincidence rate added to every setting.
    pub background_rate_hz: f64,
    /// Residual coherence between the idler modes, 0 (fully mixed) to 1.
    #[serde(default = "default_coherence")]
    pub idler_coherence: f64,
}

impl SourceSpec {
    pub fn idler_weight2(&self) -> f64 {
        1.0 - self.idler_weight1
    }

    /// Checks every invariant; the message names the one that fails.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::input(m));
        if !(self.pump_nm > 0.0 && self.pump_nm.is_finite()) {
            return bad(format!("pump_nm must be positive, got {}", self.pump_nm));
        }
        self.signal_peak
            .validate()
            .map_err(|e| Error::input(format!("signal_peak: {e}")))?;
        self.idler_peak
            .validate()
            .map_err(|e| Error::input(format!("idler_peak: {e}")))?;
        let expected = conjugate_wavelength(self.pump_nm, self.signal_peak.center_nm)
            .map_err(|e| Error::input(format!("energy conservation: {e}")))?;
        if (expected - self.idler_peak.center_nm).abs() > CONJUGATE_TOL_NM {
            return bad(format!(
                "energy conservation: idler center {} nm but pump/signal imply {expected:.2} nm",
                self.idler_peak.center_nm
            ));
        }
        let overlap = self.idler_mode1.inner(&self.idler_mode2).norm();
        if overlap > ORTHOGONALITY_TOL {
            return bad(format!(
                "idler modes must be orthogonal, |<P1|P2>| = {overlap:e}"
            ));
        }
        if !(0.0..=1.0).contains(&self.idler_weight1) {
            return bad(format!("idler_weight1 must lie in [0, 1], got {}", self.idler_weight1));
        }
        if !(0.0..=1.0).contains(&self.idler_coherence) {
            return bad(format!(
                "idler_coherence must lie in [0, 1], got {}",
                self.idler_coherence
            ));
        }
        for (i, eta) in self.arm_efficiency.iter().enumerate() {
            if !(0.0..=1.0).contains(eta) {
                return bad(format!("arm_efficiency[{i}] must lie in [0, 1], got {eta}"));
            }
        }
        if !(self.pair_rate_hz >= 0.0 && self.pair_rate_hz.is_finite()) {
            return bad(format!("pair_rate_hz must be non-negative, got {}", self.pair_rate_hz));
        }
        if !(self.background_rate_hz >= 0.0 && self.background_rate_hz.is_finite()) {
            return bad(format!(
                "background_rate_hz must be non-negative, got {}",
                self.background_rate_hz
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SourceSpec =
            toml::from_str(text).map_err(|e| Error::input(format!("source spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("source spec is always representable")
    }

    pub fn signal_state(&self) -> DensityMatrix {
        DensityMatrix::pure(&self.signal_pol.as_array()).expect("normalized")
    }

    /// Reduced idler state `w₁|P₁⟩⟨P₁| + w₂|P₂⟩⟨P₂|` plus any residual coherence.
    pub fn idler_state(&self) -> Result<DensityMatrix> {
        let w1 = self.idler_weight1;
        let w2 = self.idler_weight2();
        let p1 = self.idler_mode1.as_array();
        let p2 = self.idler_mode2.as_array();
        let mut m = &CMatrix::outer(&p1).scale_real(w1) + &CMatrix::outer(&p2).scale_real(w2);
        if self.idler_coherence > 0.0 {
            let k = self.idler_coherence * (w1 * w2).sqrt();
            let mut cross = CMatrix::zeros(2, 2);
            for i in 0..2 {
                for j in 0..2 {
                    cross[(i, j)] = p1[i] * p2[j].conj() + p2[i] * p1[j].conj();
                }
            }
            m = &m + &cross.scale_real(k);
        }
        DensityMatrix::new(m.hermitian_part())
    }

    /// Two-photon polarization state, signal ⊗ idler.
    pub fn two_photon_state(&self) -> Result<DensityMatrix> {
        build_two_photon_state(self)
    }

    /// MD-qBIC scenario: signal at 1527.7 nm, horizontally polarized.
    ///
    /// Idler modes and weights are calibration choices tuned to an idler
    /// purity near 0.80, not measured quantities.
    pub fn qom_a() -> Self {
        Self::preset(1527.7, 6.0, PolLabel::H, (PolLabel::H, PolLabel::V), 0.887)
    }

    /// ED-qBIC scenario: signal at 1484.0 nm, diagonally polarized, idler
    /// purity near 0.72.
    pub fn qom_b() -> Self {
        Self::preset(1484.0, 6.0, PolLabel::D, (PolLabel::D, PolLabel::A), 0.8317)
    }

    fn preset(
        signal_nm: f64,
        signal_fwhm_nm: f64,
        signal: PolLabel,
        idler_modes: (PolLabel, PolLabel),
        w1: f64,
    ) -> Self {
        let pump_nm = 788.4;
        let idler_nm = conjugate_wavelength(pump_nm, signal_nm).expect("valid preset");
        // equal frequency bandwidths
        let idler_fwhm = signal_fwhm_nm * (idler_nm / signal_nm).powi(2);
        SourceSpec {
            pump_nm,
            pair_rate_hz: 2.0e4,
            signal_peak: SpectralPeak {
                center_nm: signal_nm,
                fwhm_nm: signal_fwhm_nm,
            },
            signal_pol: canonical_state(signal),
            idler_peak: SpectralPeak {
                center_nm: idler_nm,
                fwhm_nm: idler_fwhm,
            },
            idler_mode1: canonical_state(idler_modes.0),
            idler_mode2: canonical_state(idler_modes.1),
            idler_weight1: w1,
            arm_efficiency: [0.2, 0.15],
            background_rate_hz: 0.0,
            idler_coherence: 0.0,
        }
    }
}

/// `|P_s⟩⟨P_s| ⊗ ρ_idler`, separable by construction.
pub fn build_two_photon_state(spec: &SourceSpec) -> Result<DensityMatrix> {
    spec.validate()?;
    tensor_product(&spec.signal_state(), &spec.idler_state()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{entanglement_of_formation, purity};
    use crate::qmat::{c, partial_trace, Arm};
    use proptest::prelude::*;

    fn spec_with(signal: PolLabel, modes: (PolLabel, PolLabel), w1: f64) -> SourceSpec {
        let mut s = SourceSpec::qom_a();
        s.signal_pol = canonical_state(signal);
        s.idler_mode1 = canonical_state(modes.0);
        s.idler_mode2 = canonical_state(modes.1);
        s.idler_weight1 = w1;
        s
    }

    #[test]
    fn conjugate_wavelength_examples() {
        let a = conjugate_wavelength(788.4, 1527.7).unwrap();
        assert!((a - 1629.2).abs() <= 0.1, "{a}");
        let b = conjugate_wavelength(788.4, 1484.0).unwrap();
        assert!((b - 1682.0).abs() <= 0.1, "{b}");
        assert_eq!(conjugate_wavelength(800.0, 1600.0).unwrap(), 1600.0);
        assert!(conjugate_wavelength(788.4, 788.4).is_err());
        assert!(conjugate_wavelength(788.4, 500.0).is_err());
    }

    #[test]
    fn pure_product_state() {
        let s = spec_with(PolLabel::H, (PolLabel::V, PolLabel::H), 1.0);
        let rho = build_two_photon_state(&s).unwrap();
        let expect = CMatrix::diag_real(&[0.0, 1.0, 0.0, 0.0]);
        assert!(rho.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn balanced_idler_mixture() {
        let s = spec_with(PolLabel::H, (PolLabel::H, PolLabel::V), 0.5);
        let rho = build_two_photon_state(&s).unwrap();
        let expect = CMatrix::diag_real(&[0.5, 0.5, 0.0, 0.0]);
        assert!(rho.matrix().max_abs_diff(&expect) < 1e-15);
        assert!((purity(&rho) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn qom_a_idler_purity_scale() {
        let rho = build_two_photon_state(&SourceSpec::qom_a()).unwrap();
        let idler = partial_trace(&rho, Arm::Two).unwrap();
        let p = 0.887f64;
        let expect = p * p + (1.0 - p) * (1.0 - p);
        assert!((purity(&idler) - expect).abs() < 1e-12);
        assert!((expect - 0.80).abs() < 0.005);
    }

    #[test]
    fn presets_validate() {
        SourceSpec::qom_a().validate().unwrap();
        let b = SourceSpec::qom_b();
        b.validate().unwrap();
        let idler = b.idler_state().unwrap();
        assert!((purity(&idler) - 0.72).abs() < 0.001);
    }

    #[test]
    fn rejects_broken_invariants() {
        let mut s = SourceSpec::qom_a();
        s.idler_mode2 = canonical_state(PolLabel::D);
        let err = build_two_photon_state(&s).unwrap_err().to_string();
        assert!(err.contains("orthogonal"), "{err}");

        let mut s = SourceSpec::qom_a();
        s.idler_peak.center_nm = 1600.0;
        assert!(s.validate().unwrap_err().to_string().contains("energy conservation"));

        let mut s = SourceSpec::qom_a();
        s.arm_efficiency[1] = 1.5;
        assert!(s.validate().unwrap_err().to_string().contains("arm_efficiency"));
    }

    #[test]
    fn coherence_restores_superposition() {
        let mut s = spec_with(PolLabel::H, (PolLabel::H, PolLabel::V), 0.5);
        s.idler_coherence = 1.0;
        let idler = s.idler_state().unwrap();
        assert!((purity(&idler) - 1.0).abs() < 1e-12);
        assert!((idler.matrix()[(0, 1)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn toml_round_trip() {
        let s = SourceSpec::qom_b();
        let text = s.to_toml_string();
        assert!(text.contains("idler_weight1"));
        let back = SourceSpec::from_toml_str(&text).unwrap();
        assert_eq!(back, s);
    }

    fn arb_jones() -> impl Strategy<Value = JonesVector> {
        (0.0f64..std::f64::consts::PI, -3.2f64..3.2).prop_map(|(theta, phase)| {
            let (s, co) = (theta / 2.0).sin_cos();
            JonesVector::new(c(co, 0.0), num_complex::Complex64::from_polar(s, phase)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn reduced_states_and_separability(ps in arb_jones(), p1 in arb_jones(), w1 in 0.0f64..1.0) {
            let mut s = SourceSpec::qom_a();
            s.signal_pol = ps;
            s.idler_mode1 = p1;
            s.idler_mode2 = p1.orthogonal();
            s.idler_weight1 = w1;
            let rho = build_two_photon_state(&s).unwrap();
            let sig = partial_trace(&rho, Arm::One).unwrap();
            prop_assert!(sig.matrix().max_abs_diff(s.signal_state().matrix()) < 1e-12);
            prop_assert!((purity(&sig) - 1.0).abs() < 1e-12);
            let idl = partial_trace(&rho, Arm::Two).unwrap();
            let w2 = 1.0 - w1;
            prop_assert!((purity(&idl) - (w1 * w1 + w2 * w2)).abs() < 1e-12);
            prop_assert!(purity(&idl) >= 0.5 - 1e-12);
            prop_assert!(entanglement_of_formation(&rho).unwrap() < 1e-9);
        }

        #[test]
        fn conjugation_is_an_involution(signal in 800.0f64..3000.0) {
            let idler = conjugate_wavelength(788.4, signal).unwrap();
            let back = conjugate_wavelength(788.4, idler).unwrap();
            prop_assert!((back - signal).abs() < 1e-9);
        }
    }
}
