//! State metrics: purity, Stokes parameters, degree of polarization,
//! concurrence and entanglement of formation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polopt::CIRCULAR_SIGN;
use crate::qmat::{c, hermitian_eigen, sqrt_psd, CMatrix, DensityMatrix};

const RADICAND_CLAMP: f64 = 1e-12;

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    m.trace_product(m).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.s0, self.s1, self.s2, self.s3]
    }

    pub fn polarized_norm(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }
}

/// Stokes parameters from the six analysis probabilities.
pub fn stokes_from_probs(p_h: f64, p_v: f64, p_d: f64, p_a: f64, p_r: f64, p_l: f64) -> StokesVector {
    StokesVector {
        s0: p_h + p_v,
        s1: p_h - p_v,
        s2: p_d - p_a,
        s3: p_l - p_r,
    }
}

fn pauli_x() -> CMatrix {
    CMatrix::from_rows([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

fn pauli_y() -> CMatrix {
    CMatrix::from_rows([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]])
}

fn pauli_z() -> CMatrix {
    CMatrix::diag_real(&[1.0, -1.0])
}

/// Stokes operators `(I, S1, S2, S3)` in the H/V basis, with the circular
/// component signed so that `S3 = P_L - P_R`.
pub fn stokes_operators() -> [CMatrix; 4] {
    [
        CMatrix::identity(2),
        pauli_z(),
        pauli_x(),
        pauli_y().scale_real(-CIRCULAR_SIGN),
    ]
}

/// `s_k = Tr(ρ S_k)`.
pub fn stokes_from_rho(rho: &DensityMatrix) -> Result<StokesVector> {
    if rho.dim() != 2 {
        return Err(Error::Dimension(format!(
            "Stokes parameters need a single-photon state, got dim {}",
            rho.dim()
        )));
    }
    let [s0, s1, s2, s3] = stokes_operators().map(|op| rho.matrix().trace_product(&op).re);
    Ok(StokesVector { s0, s1, s2, s3 })
}

/// `sqrt(S1² + S2² + S3²) / S0`.
pub fn degree_of_polarization(s: &StokesVector) -> Result<f64> {
    if !(s.s0 > 0.0) {
        return Err(Error::input(format!("S0 must be positive, got {}", s.s0)));
    }
    Ok(s.polarized_norm() / s.s0)
}

/// Wootters concurrence of a two-qubit state.
///
/// The square roots of the eigenvalues of `ρ ρ̃` are computed from the
/// Hermitian `sqrt(ρ) ρ̃ sqrt(ρ)`, which has the same spectrum.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!(
            "concurrence needs a two-photon state, got dim {}",
            rho.dim()
        )));
    }
    let yy = pauli_y().kron(&pauli_y());
    let m = rho.matrix();
    let tilde = &(&yy * &m.conj()) * &yy;
    let s = sqrt_psd(m)?;
    let r = (&(&s * &tilde) * &s).hermitian_part();
    let eig = hermitian_eigen(&r)?;
    let mut lam = Vec::with_capacity(4);
    for &mu in &eig.values {
        let mu = if mu < 0.0 && mu > -RADICAND_CLAMP { 0.0 } else { mu };
        lam.push(mu.max(0.0).sqrt());
    }
    // eigenvalues arrive descending, and sqrt preserves order
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).clamp(0.0, 1.0))
}

/// Binary entropy in bits, zero at both ends.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `h((1 + sqrt(1 - C²)) / 2)`.
pub fn eof_from_concurrence(conc: f64) -> f64 {
    let conc = conc.clamp(0.0, 1.0);
    let mut rad = 1.0 - conc * conc;
    if rad < 0.0 && rad > -RADICAND_CLAMP {
        rad = 0.0;
    }
    binary_entropy((1.0 + rad.max(0.0).sqrt()) / 2.0)
}

pub fn entanglement_of_formation(rho: &DensityMatrix) -> Result<f64> {
    Ok(eof_from_concurrence(concurrence(rho)?))
}

/// A metric value with an optional bootstrap standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

impl From<f64> for Estimate {
    fn from(value: f64) -> Self {
        Estimate { value, std: None }
    }
}

/// Metrics of one reconstructed state. Single-photon states get Stokes and
/// DoP, two-photon states get concurrence and EoF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dim: usize,
    pub purity: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dop: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stokes: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concurrence: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eof: Option<Estimate>,
    /// Describes how the `std` fields were produced, when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty_method: Option<String>,
}

impl MetricsReport {
    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        let mut report = MetricsReport {
            dim: rho.dim(),
            purity: purity(rho).into(),
            dop: None,
            stokes: None,
            concurrence: None,
            eof: None,
            uncertainty_method: None,
        };
        if rho.dim() == 2 {
            let s = stokes_from_rho(rho)?;
            report.dop = Some(degree_of_polarization(&s)?.into());
            report.stokes = Some(s.as_array());
        } else {
            let conc = concurrence(rho)?;
            report.concurrence = Some(conc.into());
            report.eof = Some(eof_from_concurrence(conc).into());
        }
        Ok(report)
    }
}
