//! Jones calculus for the projection optics in front of each detector.
//!
//! Each analyzed arm is a quarter-wave plate, then a half-wave plate, then a
//! polarizing beamsplitter whose transmitted (H) port feeds the detector. The
//! state a setting projects onto is the H port propagated backwards through
//! the plates.
//!
//! Handedness: `R = (1, -i)/√2` in the H/V basis. [`CIRCULAR_SIGN`] is the only
//! place this is fixed; the waveplate retardance and the Stokes `S3` sign
//! are both derived from it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{c, CMatrix, C64};

/// Sign of the imaginary V amplitude of right-circular light.
pub const CIRCULAR_SIGN: f64 = -1.0;

const NORM_TOL: f64 = 1e-10;

/// Normalized two-component polarization state `α|H⟩ + β|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JonesRecord", into = "JonesRecord")]
pub struct JonesVector {
    alpha: C64,
    beta: C64,
}

impl JonesVector {
    /// Rejects amplitudes whose squared norm is not one within `1e-10`.
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOL {
            return Err(Error::input(format!(
                "Jones vector not normalized (|α|²+|β|² = {n})"
            )));
        }
        Ok(JonesVector { alpha, beta })
    }

    pub fn normalized(alpha: C64, beta: C64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::input("Jones vector has zero norm"));
        }
        Ok(JonesVector {
            alpha: alpha / n,
            beta: beta / n,
        })
    }

    /// Linear polarization at `angle_deg` from horizontal.
    pub fn linear(angle_deg: f64) -> Self {
        let (s, co) = angle_deg.to_radians().sin_cos();
        JonesVector {
            alpha: c(co, 0.0),
            beta: c(s, 0.0),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn as_array(&self) -> [C64; 2] {
        [self.alpha, self.beta]
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &JonesVector) -> C64 {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }

    /// The orthogonal state `(-β*, α*)`.
    pub fn orthogonal(&self) -> Self {
        JonesVector {
            alpha: -self.beta.conj(),
            beta: self.alpha.conj(),
        }
    }

    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.as_array())
    }

    pub fn transformed(&self, m: &CMatrix) -> Result<Self> {
        let out = m.apply(&self.as_array());
        Self::normalized(out[0], out[1])
    }
}

#[derive(Serialize, Deserialize)]
struct JonesRecord {
    alpha: [f64; 2],
    beta: [f64; 2],
}

impl From<JonesVector> for JonesRecord {
    fn from(j: JonesVector) -> Self {
        JonesRecord {
            alpha: [j.alpha.re, j.alpha.im],
            beta: [j.beta.re, j.beta.im],
        }
    }
}

impl TryFrom<JonesRecord> for JonesVector {
    type Error = Error;
    fn try_from(r: JonesRecord) -> Result<Self> {
        JonesVector::new(c(r.alpha[0], r.alpha[1]), c(r.beta[0], r.beta[1]))
    }
}

/// The six analysis states of polarization tomography.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolLabel {
    pub const ALL: [PolLabel; 6] = [
        PolLabel::H,
        PolLabel::V,
        PolLabel::D,
        PolLabel::A,
        PolLabel::R,
        PolLabel::L,
    ];

    pub fn orthogonal(self) -> PolLabel {
        use PolLabel::*;
        match self {
            H => V,
            V => H,
            D => A,
            A => D,
            R => L,
            L => R,
        }
    }
}

impl fmt::Display for PolLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PolLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" => Ok(PolLabel::H),
            "V" => Ok(PolLabel::V),
            "D" => Ok(PolLabel::D),
            "A" => Ok(PolLabel::A),
            "R" => Ok(PolLabel::R),
            "L" => Ok(PolLabel::L),
            other => Err(Error::input(format!("unknown polarization label {other:?}"))),
        }
    }
}

pub fn canonical_state(label: PolLabel) -> JonesVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (alpha, beta) = match label {
        PolLabel::H => (c(1.0, 0.0), c(0.0, 0.0)),
        PolLabel::V => (c(0.0, 0.0), c(1.0, 0.0)),
        PolLabel::D => (c(s, 0.0), c(s, 0.0)),
        PolLabel::A => (c(s, 0.0), c(-s, 0.0)),
        PolLabel::R => (c(s, 0.0), c(0.0, CIRCULAR_SIGN * s)),
        PolLabel::L => (c(s, 0.0), c(0.0, -CIRCULAR_SIGN * s)),
    };
    JonesVector { alpha, beta }
}

/// `R(θ) diag(1, slow_phase) R(-θ)`: fast axis at `theta_deg`, slow axis
/// multiplied by `slow_phase`.
fn retarder(theta_deg: f64, slow_phase: C64) -> CMatrix {
    let (s, co) = theta_deg.to_radians().sin_cos();
    let one = c(1.0, 0.0);
    // R(θ) = [[cos, -sin], [sin, cos]]
    let a = one * (co * co) + slow_phase * (s * s);
    let b = (one - slow_phase) * (co * s);
    let d = one * (s * s) + slow_phase * (co * co);
    CMatrix::from_rows([[a, b], [b, d]])
}

/// Jones matrix of an ideal half-wave plate with its fast axis at `theta_deg`.
pub fn hwp_jones(theta_deg: f64) -> CMatrix {
    retarder(theta_deg, c(-1.0, 0.0))
}

/// Jones matrix of an ideal quarter-wave plate with its fast axis at `theta_deg`.
pub fn qwp_jones(theta_deg: f64) -> CMatrix {
    retarder(theta_deg, c(0.0, -CIRCULAR_SIGN))
}

/// Maps an angle onto the waveplate period, `(-90°, 90°]`.
pub fn canonical_angle(deg: f64) -> f64 {
    let mut a = deg % 180.0;
    if a <= -90.0 {
        a += 180.0;
    } else if a > 90.0 {
        a -= 180.0;
    }
    a
}

/// Waveplate angles of one analyzer arm, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    pub hwp_deg: f64,
    pub qwp_deg: f64,
}

impl WaveplateSetting {
    pub fn new(hwp_deg: f64, qwp_deg: f64) -> Result<Self> {
        if !hwp_deg.is_finite() || !qwp_deg.is_finite() {
            return Err(Error::input("waveplate angles must be finite"));
        }
        Ok(WaveplateSetting {
            hwp_deg: canonical_angle(hwp_deg),
            qwp_deg: canonical_angle(qwp_deg),
        })
    }

    /// Combined plate transfer matrix (QWP first, then HWP).
    pub fn jones(&self) -> CMatrix {
        &hwp_jones(self.hwp_deg) * &qwp_jones(self.qwp_deg)
    }
}

/// Analyzer settings for both arms. An unconfigured arm has no polarization
/// optics and acts as the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSetting {
    pub label: String,
    pub arm1: Option<WaveplateSetting>,
    pub arm2: Option<WaveplateSetting>,
}

impl ProjectionSetting {
    pub fn new(
        label: impl Into<String>,
        arm1: Option<WaveplateSetting>,
        arm2: Option<WaveplateSetting>,
    ) -> Result<Self> {
        if arm1.is_none() && arm2.is_none() {
            return Err(Error::input("projection setting configures neither arm"));
        }
        Ok(ProjectionSetting {
            label: label.into(),
            arm1,
            arm2,
        })
    }

    /// Heralded setting: analyzer in arm 2 only.
    pub fn heralded(label: impl Into<String>, arm2: WaveplateSetting) -> Self {
        ProjectionSetting {
            label: label.into(),
            arm1: None,
            arm2: Some(arm2),
        }
    }

    pub fn arm_projector(&self, arm: crate::qmat::Arm) -> Option<JonesVector> {
        match arm {
            crate::qmat::Arm::One => self.arm1.as_ref().map(projector_from_setting),
            crate::qmat::Arm::Two => self.arm2.as_ref().map(projector_from_setting),
        }
    }
}

/// State transmitted to the detector: `(HWP·QWP)† |H⟩`.
pub fn projector_from_setting(s: &WaveplateSetting) -> JonesVector {
    let back = s.jones().adjoint();
    let v = back.apply(&[c(1.0, 0.0), c(0.0, 0.0)]);
    // unitary, so the norm is already one up to rounding
    JonesVector::normalized(v[0], v[1]).expect("unitary preserves norm")
}

const fn row(label: PolLabel, hwp: f64, qwp: f64) -> (PolLabel, WaveplateSetting) {
    (
        label,
        WaveplateSetting {
            hwp_deg: hwp,
            qwp_deg: qwp,
        },
    )
}

const SINGLE_ROWS: [(PolLabel, WaveplateSetting); 6] = [
    row(PolLabel::H, 0.0, 0.0),
    row(PolLabel::V, 45.0, 0.0),
    row(PolLabel::D, 22.5, 45.0),
    row(PolLabel::A, -22.5, 45.0),
    row(PolLabel::R, 0.0, -45.0),
    row(PolLabel::L, 0.0, 45.0),
];

const TWO_PHOTON_LABELS: [(PolLabel, PolLabel); 16] = {
    use PolLabel::*;
    [
        (H, H),
        (H, V),
        (V, H),
        (V, V),
        (H, D),
        (H, R),
        (V, A),
        (V, L),
        (D, H),
        (R, H),
        (A, V),
        (L, V),
        (D, D),
        (R, R),
        (D, R),
        (R, D),
    ]
};

/// Six-setting single-photon protocol.
pub fn protocol_single() -> Vec<(PolLabel, WaveplateSetting)> {
    SINGLE_ROWS.to_vec()
}

pub fn single_setting(label: PolLabel) -> WaveplateSetting {
    SINGLE_ROWS
        .iter()
        .find(|(l, _)| *l == label)
        .map(|(_, s)| *s)
        .expect("every label has a row")
}

/// Six-setting protocol applied to arm 2 while arm 1 heralds.
pub fn protocol_heralded() -> Vec<ProjectionSetting> {
    SINGLE_ROWS
        .iter()
        .map(|(l, s)| ProjectionSetting::heralded(l.to_string(), *s))
        .collect()
}

/// Six-setting protocol on the `measured` arm; the other arm heralds.
pub fn protocol_heralded_arm(measured: crate::qmat::Arm) -> Vec<ProjectionSetting> {
    match measured {
        crate::qmat::Arm::Two => protocol_heralded(),
        crate::qmat::Arm::One => SINGLE_ROWS
            .iter()
            .map(|(l, s)| ProjectionSetting {
                label: l.to_string(),
                arm1: Some(*s),
                arm2: None,
            })
            .collect(),
    }
}

/// Sixteen-setting two-photon protocol, labels `arm1-arm2`.
pub fn protocol_two() -> Vec<ProjectionSetting> {
    TWO_PHOTON_LABELS
        .iter()
        .map(|&(a, b)| ProjectionSetting {
            label: format!("{a}-{b}"),
            arm1: Some(single_setting(a)),
            arm2: Some(single_setting(b)),
        })
        .collect()
}

/// Which tomography protocol to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Single,
    Two,
}

impl Protocol {
    pub fn settings(self) -> Vec<ProjectionSetting> {
        match self {
            Protocol::Single => protocol_heralded(),
            Protocol::Two => protocol_two(),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Protocol::Single),
            "two" => Ok(Protocol::Two),
            other => Err(Error::input(format!(
                "protocol must be 'single' or 'two', got {other:?}"
            ))),
        }
    }
}

fn fmt_angle(s: Option<&WaveplateSetting>, hwp: bool) -> String {
    match s {
        Some(w) if hwp => w.hwp_deg.to_string(),
        Some(w) => w.qwp_deg.to_string(),
        None => String::new(),
    }
}

/// `label,hwp1_deg,qwp1_deg,hwp2_deg,qwp2_deg` table; unconfigured arms
/// leave their columns empty.
pub fn protocol_table(settings: &[ProjectionSetting]) -> String {
    let mut out = String::from("label,hwp1_deg,qwp1_deg,hwp2_deg,qwp2_deg\n");
    for s in settings {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.label,
            fmt_angle(s.arm1.as_ref(), true),
            fmt_angle(s.arm1.as_ref(), false),
            fmt_angle(s.arm2.as_ref(), true),
            fmt_angle(s.arm2.as_ref(), false),
        ));
    }
    out
}
