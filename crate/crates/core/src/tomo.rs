//! Density-matrix reconstruction from projection counts.
//!
//! Two estimators share one [`TomographyProblem`]:
//!
//! - [`linear_reconstruct`] inverts the measured rates directly. For a
//!   single photon measured in all six analysis states this is the Stokes
//!   inversion; otherwise it is a least-squares fit over the Pauli basis.
//!   The result can be unphysical under noise.
//! - [`mle_reconstruct`] maximizes the Poisson likelihood of the counts over
//!   physical states, parameterized as `ρ = T†T / Tr(T†T)` with `T` lower
//!   triangular, so positivity holds by construction. The overall count
//!   rate (and optionally a flat background) is profiled out exactly.
//!
//! Uncertainties come from a Poisson bootstrap ([`bootstrap_uncertainty`]).

use rayon::prelude::*;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{lstsq, rank, RealMatrix};
use crate::metrics::{concurrence, degree_of_polarization, eof_from_concurrence, purity, stokes_from_rho, stokes_operators};
use crate::polopt::{canonical_state, JonesVector, PolLabel};
use crate::qmat::{c, Arm, CMatrix, DensityMatrix, C64};
use crate::simlab::{poisson_sample, record_rng, CountRecord};
use crate::simplex::{minimize, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomoMode {
    /// Analyzer in one arm only, the other arm heralds; reconstructs a 2x2 state.
    HeraldedSingle,
    /// Analyzers in both arms; reconstructs a 4x4 state in arm order.
    TwoPhoton,
}

impl TomoMode {
    pub fn dim(self) -> usize {
        match self {
            TomoMode::HeraldedSingle => 2,
            TomoMode::TwoPhoton => 4,
        }
    }

    fn min_records(self) -> usize {
        match self {
            TomoMode::HeraldedSingle => 6,
            TomoMode::TwoPhoton => 16,
        }
    }
}

/// One record with its measurement operator resolved.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub label: String,
    /// Projector onto the analyzed state(s), `dim x dim`.
    pub operator: CMatrix,
    /// Analyzed single-photon states, one per configured arm.
    pub states: Vec<JonesVector>,
    pub counts: u64,
    pub integration_s: f64,
}

#[derive(Debug, Clone)]
pub struct TomographyProblem {
    pub mode: TomoMode,
    pub measurements: Vec<Measurement>,
    /// Known accidental coincidence rate (1/s), held fixed during MLE.
    pub background_rate_hz: Option<f64>,
}

impl TomographyProblem {
    /// Resolves projectors for every record and checks that the set is
    /// informationally complete for `mode`.
    pub fn from_records(records: &[CountRecord], mode: TomoMode) -> Result<Self> {
        if records.len() < mode.min_records() {
            return Err(Error::Incomplete(format!(
                "{:?} needs at least {} records, got {}",
                mode,
                mode.min_records(),
                records.len()
            )));
        }
        let measurements = records
            .iter()
            .map(|r| {
                r.validate()?;
                let p1 = r.setting.arm_projector(Arm::One);
                let p2 = r.setting.arm_projector(Arm::Two);
                let (operator, states) = match (mode, p1, p2) {
                    (TomoMode::HeraldedSingle, None, Some(p)) | (TomoMode::HeraldedSingle, Some(p), None) => {
                        (p.projector(), vec![p])
                    }
                    (TomoMode::TwoPhoton, Some(a), Some(b)) => (a.projector().kron(&b.projector()), vec![a, b]),
                    _ => {
                        return Err(Error::input(format!(
                            "record {:?} does not match {:?} arm configuration",
                            r.label, mode
                        )))
                    }
                };
                Ok(Measurement {
                    label: r.label.clone(),
                    operator,
                    states,
                    counts: r.coincidences,
                    integration_s: r.integration_s,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let problem = TomographyProblem {
            mode,
            measurements,
            background_rate_hz: None,
        };
        problem.check_complete()?;
        Ok(problem)
    }

    /// Chooses the mode from which arms the records configure.
    pub fn infer(records: &[CountRecord]) -> Result<Self> {
        let both = records.iter().all(|r| r.setting.arm1.is_some() && r.setting.arm2.is_some());
        let one = records
            .iter()
            .all(|r| r.setting.arm1.is_some() != r.setting.arm2.is_some());
        let mode = match (both, one) {
            (true, _) if !records.is_empty() => TomoMode::TwoPhoton,
            (_, true) if !records.is_empty() => TomoMode::HeraldedSingle,
            _ => {
                return Err(Error::input(
                    "records mix single-arm and two-arm settings; cannot infer tomography mode",
                ))
            }
        };
        Self::from_records(records, mode)
    }

    pub fn with_background(mut self, rate_hz: f64) -> Self {
        self.background_rate_hz = Some(rate_hz);
        self
    }

    pub fn dim(&self) -> usize {
        self.mode.dim()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.measurements.iter().map(|m| m.counts).collect()
    }

    /// Same settings with different counts.
    pub fn with_counts(&self, counts: &[u64]) -> Result<Self> {
        if counts.len() != self.measurements.len() {
            return Err(Error::Dimension("one count per measurement required".into()));
        }
        let mut p = self.clone();
        for (m, &n) in p.measurements.iter_mut().zip(counts) {
            m.counts = n;
        }
        Ok(p)
    }

    /// Rows `Tr(M_ν B_k)` over the Pauli-product basis.
    fn design_matrix(&self) -> RealMatrix {
        let basis = pauli_basis(self.dim());
        let rows: Vec<Vec<f64>> = self
            .measurements
            .iter()
            .map(|m| basis.iter().map(|b| m.operator.trace_product(b).re).collect())
            .collect();
        RealMatrix::from_rows(&rows).expect("rectangular by construction")
    }

    pub fn check_complete(&self) -> Result<()> {
        let d2 = self.dim() * self.dim();
        let r = rank(&self.design_matrix(), 1e-9);
        if r < d2 {
            return Err(Error::Incomplete(format!(
                "measurement operators span {r} of {d2} state parameters"
            )));
        }
        Ok(())
    }

    fn rates(&self) -> Vec<f64> {
        let b = self.background_rate_hz.unwrap_or(0.0);
        self.measurements
            .iter()
            .map(|m| m.counts as f64 / m.integration_s - b)
            .collect()
    }
}

/// Hermitian Pauli products: `I, Z, X, Y` for one qubit, all 16 ordered
/// pairs for two.
pub fn pauli_basis(dim: usize) -> Vec<CMatrix> {
    let single = stokes_operators().to_vec();
    match dim {
        2 => single,
        4 => single
            .iter()
            .flat_map(|a| single.iter().map(move |b| a.kron(b)))
            .collect(),
        _ => panic!("unsupported dimension {dim}"),
    }
}

fn label_of(state: &JonesVector) -> Option<PolLabel> {
    PolLabel::ALL
        .into_iter()
        .find(|&l| canonical_state(l).inner(state).norm() > 1.0 - 1e-9)
}

/// Direct inversion of the measured rates; Hermitian with unit trace but
/// not necessarily positive.
pub fn linear_reconstruct(problem: &TomographyProblem) -> Result<CMatrix> {
    if problem.measurements.iter().all(|m| m.counts == 0) {
        return Err(Error::input("all counts are zero"));
    }
    if problem.mode == TomoMode::HeraldedSingle {
        if let Some(m) = stokes_inversion(problem)? {
            return Ok(m);
        }
    }
    let a = problem.design_matrix();
    let x = lstsq(&a, &problem.rates())?;
    let basis = pauli_basis(problem.dim());
    let mut m = CMatrix::zeros(problem.dim(), problem.dim());
    for (xk, b) in x.iter().zip(&basis) {
        m = &m + &b.scale_real(*xk);
    }
    let tr = m.trace().re;
    if !(tr > 0.0) {
        return Err(Error::input("degenerate counts: reconstructed trace is not positive"));
    }
    Ok(m.scale_real(1.0 / tr).hermitian_part())
}

/// `ρ = ½(I + S1 σ1 + S2 σ2 + S3 σ3)` with each Stokes component taken from
/// the normalized rates of its orthogonal pair. `None` unless all six
/// analysis states were measured.
fn stokes_inversion(problem: &TomographyProblem) -> Result<Option<CMatrix>> {
    let rates = problem.rates();
    let mut by_label = [None; 6];
    for (m, r) in problem.measurements.iter().zip(&rates) {
        if let Some(l) = label_of(&m.states[0]) {
            let idx = PolLabel::ALL.iter().position(|&x| x == l).expect("label");
            by_label[idx].get_or_insert(r.max(0.0));
        }
    }
    if by_label.iter().any(Option::is_none) {
        return Ok(None);
    }
    let r = by_label.map(|v| v.expect("checked"));
    let pair = |a: f64, b: f64| -> Result<f64> {
        if a + b <= 0.0 {
            return Err(Error::input("degenerate counts: an analysis pair has no counts"));
        }
        Ok((a - b) / (a + b))
    };
    // H, V, D, A, R, L; S3 = P_L - P_R
    let s1 = pair(r[0], r[1])?;
    let s2 = pair(r[2], r[3])?;
    let s3 = pair(r[5], r[4])?;
    let ops = stokes_operators();
    let m = &(&ops[0] + &ops[1].scale_real(s1)) + &(&ops[2].scale_real(s2) + &ops[3].scale_real(s3));
    Ok(Some(m.scale_real(0.5)))
}

/// Real parameters of a lower-triangular `T`: the `dim` real diagonal
/// entries first, then real/imaginary pairs of the strictly lower part in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyParams {
    pub t: Vec<f64>,
}

impl CholeskyParams {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("Cholesky parameters must be finite"));
        }
        if t.iter().all(|&v| v == 0.0) {
            return Err(Error::input("all-zero Cholesky parameters have no normalization"));
        }
        Ok(CholeskyParams { t })
    }

    fn lower(&self, dim: usize) -> CMatrix {
        let mut tm = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            tm[(i, i)] = c(self.t[i], 0.0);
        }
        let mut k = dim;
        for i in 0..dim {
            for j in 0..i {
                tm[(i, j)] = c(self.t[k], self.t[k + 1]);
                k += 2;
            }
        }
        tm
    }
}

/// `T†T / Tr(T†T)`.
pub fn rho_from_params(p: &CholeskyParams, dim: usize) -> Result<DensityMatrix> {
    if p.t.len() != dim * dim {
        return Err(Error::Dimension(format!(
            "{} parameters for dimension {dim}",
            p.t.len()
        )));
    }
    let p = CholeskyParams::new(p.t.clone())?;
    let tm = p.lower(dim);
    let m = &tm.adjoint() * &tm;
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr).hermitian_part())
}

/// Unnormalized `T†T` straight into `out`, skipping validation; the hot
/// path of the likelihood.
fn gram_from_params(t: &[f64], dim: usize, tm: &mut [C64; 16], out: &mut [C64; 16]) -> f64 {
    for z in tm.iter_mut() {
        *z = c(0.0, 0.0);
    }
    for i in 0..dim {
        tm[i * dim + i] = c(t[i], 0.0);
    }
    let mut k = dim;
    for i in 0..dim {
        for j in 0..i {
            tm[i * dim + j] = c(t[k], t[k + 1]);
            k += 2;
        }
    }
    let mut tr = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = c(0.0, 0.0);
            // (T†T)_ij = Σ_k conj(T_ki) T_kj, T lower so k ≥ max(i, j)
            for kk in i.max(j)..dim {
                acc += tm[kk * dim + i].conj() * tm[kk * dim + j];
            }
            out[i * dim + j] = acc;
        }
        tr += out[i * dim + i].re;
    }
    tr
}

/// Parameters reproducing `rho` (after a tiny regularization to keep the
/// factorization full rank).
pub fn params_from_rho(rho: &DensityMatrix) -> CholeskyParams {
    let n = rho.dim();
    // T†T = ρ with T lower  ⇔  J ρ J = L L† with T = J L† J
    let mut a = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = rho.matrix()[(n - 1 - i, n - 1 - j)];
        }
        a[(i, i)] += c(1e-10, 0.0);
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l[(j, k)].norm_sqr()).sum();
        let d = (a[(j, j)].re - s).max(1e-30).sqrt();
        l[(j, j)] = c(d, 0.0);
        for i in (j + 1)..n {
            let s: C64 = (0..j).map(|k| l[(i, k)] * l[(j, k)].conj()).sum();
            l[(i, j)] = (a[(i, j)] - s) / d;
        }
    }
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        t[i] = l[(n - 1 - i, n - 1 - i)].re;
    }
    let mut k = n;
    for i in 0..n {
        for j in 0..i {
            // T_ij = conj(L_{n-1-j, n-1-i})
            let z = l[(n - 1 - j, n - 1 - i)].conj();
            t[k] = z.re;
            t[k + 1] = z.im;
            k += 2;
        }
    }
    CholeskyParams { t }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once a restart cycle improves the log-likelihood by less than this.
    pub tolerance: f64,
    /// Extra starts jittered around the linear estimate.
    pub restarts: usize,
    /// Sub-seed of the jittered starts.
    pub seed: u64,
    /// Fit a flat background rate instead of holding it at the problem's
    /// declared value (or zero). With a minimal complete protocol the
    /// background trades off against scale and purity, so the fitted value
    /// is only determined up to that ridge.
    pub fit_background: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iterations: 50_000,
            tolerance: 1e-10,
            restarts: 4,
            seed: 0x5eed,
            fit_background: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleDiagnostics {
    /// Poisson log-likelihood relative to the saturated model (≤ 0).
    pub log_likelihood: f64,
    /// Simplex iterations of the winning start.
    pub iterations: usize,
    pub converged: bool,
    /// Fitted coincidence rate for a unit-probability projection, 1/s.
    pub scale_hz: f64,
    pub background_hz: f64,
    pub starts: usize,
    /// Best log-likelihood after each iteration of the winning start.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

struct Likelihood<'a> {
    problem: &'a TomographyProblem,
    dim: usize,
    n_rho: usize,
    fit_background: bool,
    fixed_background: f64,
}

impl<'a> Likelihood<'a> {
    fn new(problem: &'a TomographyProblem, fit_background: bool) -> Self {
        let dim = problem.dim();
        Likelihood {
            problem,
            dim,
            n_rho: dim * dim,
            fit_background,
            fixed_background: problem.background_rate_hz.unwrap_or(0.0),
        }
    }

    fn background(&self, x: &[f64]) -> f64 {
        if self.fit_background {
            x[self.n_rho] * x[self.n_rho]
        } else {
            self.fixed_background
        }
    }

    /// Projection probabilities, or `None` for an all-zero `T`.
    fn probabilities(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut tm = [c(0.0, 0.0); 16];
        let mut g = [c(0.0, 0.0); 16];
        let tr = gram_from_params(&x[..self.n_rho], self.dim, &mut tm, &mut g);
        if !(tr > 0.0) || !tr.is_finite() {
            return None;
        }
        let d = self.dim;
        Some(
            self.problem
                .measurements
                .iter()
                .map(|m| {
                    let mut acc = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            acc += (m.operator[(i, j)] * g[j * d + i]).re;
                        }
                    }
                    (acc / tr).max(0.0)
                })
                .collect(),
        )
    }

    /// Returns `(log-likelihood, scale)` with the scale maximized exactly.
    fn evaluate(&self, x: &[f64]) -> (f64, f64) {
        let Some(p) = self.probabilities(x) else {
            return (f64::NEG_INFINITY, 0.0);
        };
        let b = self.background(x);
        let ms = &self.problem.measurements;
        let a: Vec<f64> = ms.iter().zip(&p).map(|(m, p)| m.integration_s * p).collect();
        let cst: Vec<f64> = ms.iter().map(|m| m.integration_s * b).collect();
        let n: Vec<f64> = ms.iter().map(|m| m.counts as f64).collect();
        let scale = optimal_scale(&n, &a, &cst);
        let ll = n
            .iter()
            .zip(a.iter().zip(&cst))
            .map(|(&n, (&a, &c))| {
                let lam = scale * a + c;
                if n > 0.0 {
                    n * (lam.max(1e-300) / n).ln() - lam + n
                } else {
                    -lam
                }
            })
            .sum();
        (ll, scale)
    }
}

/// Maximizer over `s ≥ 0` of `Σ n ln(s·a + c) - (s·a + c)`.
fn optimal_scale(n: &[f64], a: &[f64], c: &[f64]) -> f64 {
    let sum_a: f64 = a.iter().sum();
    if sum_a <= 0.0 {
        return 0.0;
    }
    if c.iter().all(|&v| v == 0.0) {
        return n.iter().sum::<f64>() / sum_a;
    }
    // derivative g(s) = Σ n a / (s a + c) - Σ a is decreasing in s
    let g = |s: f64| -> f64 {
        n.iter()
            .zip(a.iter().zip(c))
            .map(|(&n, (&a, &c))| {
                let d = s * a + c;
                if n > 0.0 {
                    n * a / d.max(1e-300)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            - sum_a
    };
    if g(0.0) <= 0.0 {
        return 0.0;
    }
    let mut hi = n.iter().sum::<f64>() / sum_a + 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum-likelihood physical state for the problem's counts.
///
/// Non-convergence within the iteration cap is reported in the
/// diagnostics; the best state found is still returned.
pub fn mle_reconstruct(problem: &TomographyProblem, opts: &MleOptions) -> Result<(DensityMatrix, MleDiagnostics)> {
    let dim = problem.dim();
    let linear = linear_reconstruct(problem)?;
    let init_rho = DensityMatrix::project_psd(&linear)
        .or_else(|_| DensityMatrix::maximally_mixed(dim))?;
    let mut x0 = params_from_rho(&init_rho).t;
    let lik = Likelihood::new(problem, opts.fit_background);
    if opts.fit_background {
        let guess = problem.background_rate_hz.unwrap_or(0.0).max(0.0).sqrt();
        x0.push(guess);
    }
    let simplex = SimplexOptions {
        max_iterations: opts.max_iterations,
        cycle_tolerance: opts.tolerance,
        initial_step: 0.1,
    };
    let objective = |x: &[f64]| -> f64 {
        let (ll, _) = lik.evaluate(x);
        if ll.is_finite() {
            -ll
        } else {
            f64::MAX
        }
    };

    let mut starts = vec![x0.clone()];
    let mut rng = record_rng(opts.seed, u64::MAX);
    let spread = (x0.iter().map(|v| v * v).sum::<f64>() / x0.len() as f64).sqrt().max(1e-3);
    let jitter = Normal::new(0.0, 0.2 * spread).expect("positive sigma");
    for _ in 0..opts.restarts {
        starts.push(x0.iter().map(|v| v + jitter.sample(&mut rng)).collect());
    }

    let mut best: Option<crate::simplex::SimplexResult> = None;
    for s in &starts {
        let r = minimize(objective, s, &simplex);
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    let (ll, scale) = lik.evaluate(&best.x);
    let rho = rho_from_params(&CholeskyParams::new(best.x[..dim * dim].to_vec())?, dim)?;
    let diagnostics = MleDiagnostics {
        log_likelihood: ll,
        iterations: best.iterations,
        converged: best.converged,
        scale_hz: scale,
        background_hz: lik.background(&best.x),
        starts: starts.len(),
        trace: best.trace.iter().map(|v| -v).collect(),
    };
    Ok((rho, diagnostics))
}

/// Which statistics the bootstrap reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapMetric {
    Purity,
    DegreeOfPolarization,
    Concurrence,
    EntanglementOfFormation,
}

impl BootstrapMetric {
    /// Metrics that make sense for a state of this dimension.
    pub fn defaults_for(dim: usize) -> Vec<BootstrapMetric> {
        if dim == 2 {
            vec![BootstrapMetric::Purity, BootstrapMetric::DegreeOfPolarization]
        } else {
            vec![
                BootstrapMetric::Purity,
                BootstrapMetric::Concurrence,
                BootstrapMetric::EntanglementOfFormation,
            ]
        }
    }

    pub fn evaluate(self, rho: &DensityMatrix) -> Result<f64> {
        match self {
            BootstrapMetric::Purity => Ok(purity(rho)),
            BootstrapMetric::DegreeOfPolarization => degree_of_polarization(&stokes_from_rho(rho)?),
            BootstrapMetric::Concurrence => concurrence(rho),
            BootstrapMetric::EntanglementOfFormation => Ok(eof_from_concurrence(concurrence(rho)?)),
        }
    }
}

pub const BOOTSTRAP_METHOD: &str = "parametric Poisson bootstrap of the counts, MLE per resample";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    /// `(metric, sample standard deviation)` in request order.
    pub stds: Vec<(BootstrapMetric, f64)>,
    pub used: usize,
    pub failed: usize,
    pub method: String,
}

impl BootstrapReport {
    pub fn std_of(&self, metric: BootstrapMetric) -> Option<f64> {
        self.stds.iter().find(|(m, _)| *m == metric).map(|(_, s)| *s)
    }
}

/// Poisson-resamples every record around its observed count, reruns the MLE
/// and reports the sample standard deviation of each metric. Resamples
/// that do not converge are dropped and counted.
pub fn bootstrap_uncertainty(
    problem: &TomographyProblem,
    metrics: &[BootstrapMetric],
    n_resamples: usize,
    seed: u64,
    opts: &MleOptions,
    parallel: bool,
) -> Result<BootstrapReport> {
    if n_resamples < 2 {
        return Err(Error::input("bootstrap needs at least 2 resamples"));
    }
    let observed = problem.counts();
    let one = |k: usize| -> Option<Vec<f64>> {
        let mut rng = record_rng(seed, k as u64);
        let counts: Vec<u64> = observed.iter().map(|&n| poisson_sample(n as f64, &mut rng)).collect();
        let p = problem.with_counts(&counts).ok()?;
        let (rho, diag) = mle_reconstruct(&p, opts).ok()?;
        if !diag.converged {
            return None;
        }
        metrics.iter().map(|m| m.evaluate(&rho).ok()).collect()
    };
    let samples: Vec<Option<Vec<f64>>> = if parallel {
        (0..n_resamples).into_par_iter().map(one).collect()
    } else {
        (0..n_resamples).map(one).collect()
    };
    let ok: Vec<Vec<f64>> = samples.iter().flatten().cloned().collect();
    let failed = n_resamples - ok.len();
    if ok.len() < 2 {
        return Err(Error::NonConvergence(format!(
            "only {} of {n_resamples} bootstrap resamples converged",
            ok.len()
        )));
    }
    let stds = metrics
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let vals: Vec<f64> = ok.iter().map(|v| v[i]).collect();
            (m, sample_std(&vals))
        })
        .collect();
    Ok(BootstrapReport {
        stds,
        used: ok.len(),
        failed,
        method: BOOTSTRAP_METHOD.to_string(),
    })
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polopt::{protocol_heralded, protocol_two, ProjectionSetting};
    use crate::qmat::{fidelity, partial_trace, tensor_product};
    use crate::simlab::{projection_probability, simulate_state_counts};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn label_state(l: PolLabel) -> DensityMatrix {
        DensityMatrix::pure(&canonical_state(l).as_array()).unwrap()
    }

    fn bell() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap()
    }

    fn embed(single: &DensityMatrix) -> DensityMatrix {
        // heralded arm 1 traced over: any arm-1 state works
        tensor_product(&label_state(PolLabel::V), single).unwrap()
    }

    /// Records carrying exact expected counts (rounded) for a given state.
    fn exact_records(rho_arm: &DensityMatrix, protocol: &[ProjectionSetting], scale: f64) -> Vec<CountRecord> {
        protocol
            .iter()
            .map(|s| CountRecord {
                label: s.label.clone(),
                setting: s.clone(),
                integration_s: 1.0,
                coincidences: (scale * projection_probability(rho_arm, s).unwrap()).round() as u64,
                singles_arm1: None,
                singles_arm2: None,
            })
            .collect()
    }

    fn heralded_problem(counts: [u64; 6]) -> TomographyProblem {
        let recs: Vec<CountRecord> = protocol_heralded()
            .into_iter()
            .zip(counts)
            .map(|(s, n)| CountRecord {
                label: s.label.clone(),
                setting: s,
                integration_s: 1.0,
                coincidences: n,
                singles_arm1: None,
                singles_arm2: None,
            })
            .collect();
        TomographyProblem::from_records(&recs, TomoMode::HeraldedSingle).unwrap()
    }

    fn random_params(dim: usize, rng: &mut ChaCha8Rng) -> CholeskyParams {
        CholeskyParams::new((0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn rho_from_params_examples() {
        let eye = CholeskyParams::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let rho = rho_from_params(&eye, 2).unwrap();
        assert!(rho.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).unwrap().matrix()) < 1e-15);
        let h = CholeskyParams::new(vec![0.7, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(rho_from_params(&h, 2).unwrap(), label_state(PolLabel::H));
        assert!(CholeskyParams::new(vec![0.0; 4]).is_err());
        assert!(rho_from_params(&eye, 4).is_err());
    }

    #[test]
    fn rho_from_params_always_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dim in [2, 4] {
            for _ in 0..1000 {
                let rho = rho_from_params(&random_params(dim, &mut rng), dim).unwrap();
                let min = *rho.eigen().values.last().unwrap();
                assert!(min >= -1e-12, "{min}");
            }
        }
    }

    #[test]
    fn params_invert_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for dim in [2, 4] {
            for _ in 0..50 {
                let rho = rho_from_params(&random_params(dim, &mut rng), dim).unwrap();
                let back = rho_from_params(&params_from_rho(&rho), dim).unwrap();
                assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-8);
            }
        }
    }

    #[test]
    fn gram_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = random_params(4, &mut rng);
        let mut tm = [c(0.0, 0.0); 16];
        let mut g = [c(0.0, 0.0); 16];
        let tr = gram_from_params(&p.t, 4, &mut tm, &mut g);
        let rho = rho_from_params(&p, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((g[i * 4 + j] / tr - rho.matrix()[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_examples_single() {
        let h = linear_reconstruct(&heralded_problem([1000, 0, 500, 500, 500, 500])).unwrap();
        assert!(h.max_abs_diff(label_state(PolLabel::H).matrix()) < 1e-15);
        let u = linear_reconstruct(&heralded_problem([700; 6])).unwrap();
        assert!(u.max_abs_diff(DensityMatrix::maximally_mixed(2).unwrap().matrix()) < 1e-15);
        let p = heralded_problem([0; 6]);
        assert!(linear_reconstruct(&p).is_err());
    }

    #[test]
    fn linear_bell_from_exact_probabilities() {
        // Bell projection probabilities are 0, 1/4 or 1/2: counts are exact
        let recs = exact_records(&bell(), &protocol_two(), 1e9);
        let p = TomographyProblem::from_records(&recs, TomoMode::TwoPhoton).unwrap();
        let rho = linear_reconstruct(&p).unwrap();
        assert!(rho.max_abs_diff(bell().matrix()) < 1e-10);
    }

    #[test]
    fn incomplete_sets_rejected() {
        let recs = exact_records(&embed(&label_state(PolLabel::H)), &protocol_heralded()[..5], 1000.0);
        assert!(matches!(
            TomographyProblem::from_records(&recs, TomoMode::HeraldedSingle),
            Err(Error::Incomplete(_))
        ));
        // six records, but only H/V/D/A: rank 3
        let proto = protocol_heralded();
        let six: Vec<ProjectionSetting> = [0, 1, 2, 3, 0, 2].iter().map(|&i| proto[i].clone()).collect();
        let recs = exact_records(&embed(&label_state(PolLabel::H)), &six, 1000.0);
        assert!(matches!(
            TomographyProblem::from_records(&recs, TomoMode::HeraldedSingle),
            Err(Error::Incomplete(_))
        ));
        // two-photon records cannot be read as heralded
        let recs = exact_records(&bell(), &protocol_two(), 1000.0);
        assert!(TomographyProblem::from_records(&recs, TomoMode::HeraldedSingle).is_err());
        assert_eq!(TomographyProblem::infer(&recs).unwrap().mode, TomoMode::TwoPhoton);
    }

    #[test]
    fn mle_exact_h_fixed_point() {
        let p = heralded_problem([100_000, 0, 50_000, 50_000, 50_000, 50_000]);
        let (rho, diag) = mle_reconstruct(&p, &MleOptions::default()).unwrap();
        assert!(diag.converged);
        assert!(fidelity(&rho, &label_state(PolLabel::H)).unwrap() >= 0.9999);
    }

    #[test]
    fn mle_equal_counts_is_maximally_mixed() {
        let (rho, _) = mle_reconstruct(&heralded_problem([5000; 6]), &MleOptions::default()).unwrap();
        assert!(rho.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).unwrap().matrix()) < 1e-6);
    }

    #[test]
    fn mle_bell_roundtrip() {
        let recs = simulate_state_counts(&bell(), &protocol_two(), 1e5, 0.0, 1.0, 3, false).unwrap();
        let p = TomographyProblem::from_records(&recs, TomoMode::TwoPhoton).unwrap();
        let (rho, diag) = mle_reconstruct(&p, &MleOptions::default()).unwrap();
        let f = fidelity(&rho, &bell()).unwrap();
        assert!(f >= 0.99, "{f}");
        assert!(diag.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(diag.log_likelihood <= 0.0);
    }

    #[test]
    fn linear_and_mle_agree_on_exact_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..3 {
            let rho = rho_from_params(&random_params(4, &mut rng), 4).unwrap();
            let proto = protocol_two();
            let recs = exact_records(&rho, &proto, 1e12);
            let p = TomographyProblem::from_records(&recs, TomoMode::TwoPhoton).unwrap();
            let lin = DensityMatrix::project_psd(&linear_reconstruct(&p).unwrap()).unwrap();
            let (mle, _) = mle_reconstruct(&p, &MleOptions::default()).unwrap();
            let f = fidelity(&lin, &mle).unwrap();
            assert!(f >= 1.0 - 1e-6, "{f}");
        }
    }

    #[test]
    fn heralded_reconstruction_is_reduced_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rho2 = rho_from_params(&random_params(4, &mut rng), 4).unwrap();
        let recs = exact_records(&rho2, &protocol_heralded(), 1e12);
        let p = TomographyProblem::from_records(&recs, TomoMode::HeraldedSingle).unwrap();
        let (rho, _) = mle_reconstruct(&p, &MleOptions::default()).unwrap();
        let reduced = partial_trace(&rho2, Arm::Two).unwrap();
        assert!(fidelity(&rho, &reduced).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn background_is_profiled_and_fitted() {
        let proto = protocol_heralded();
        let rho = embed(&label_state(PolLabel::D));
        let recs = simulate_state_counts(&rho, &proto, 2e5, 2e4, 1.0, 8, false).unwrap();
        let p = TomographyProblem::from_records(&recs, TomoMode::HeraldedSingle).unwrap();
        // ignoring the background shrinks purity
        let (naive, _) = mle_reconstruct(&p, &MleOptions::default()).unwrap();
        let known = p.clone().with_background(2e4);
        let (fixed, d_fixed) = mle_reconstruct(&known, &MleOptions::default()).unwrap();
        let fit = MleOptions { fit_background: true, ..Default::default() };
        let (fitted, d_fit) = mle_reconstruct(&p, &fit).unwrap();
        assert!(purity(&naive) < 0.9);
        assert!(purity(&fixed) > 0.99);
        assert_eq!(d_fixed.background_hz, 2e4);
        // N, b and |S| trade off along a flat ridge: the fit must match the
        // known-background likelihood and stay between the two extremes
        let (_, d_naive) = mle_reconstruct(&p, &MleOptions::default()).unwrap();
        assert!(d_fit.log_likelihood >= d_fixed.log_likelihood - 1e-6);
        assert!(d_fit.log_likelihood >= d_naive.log_likelihood - 1e-6);
        assert!(purity(&fitted) >= purity(&naive) - 1e-6);
        assert!(d_fit.background_hz >= 0.0);
    }

    #[test]
    fn optimal_scale_matches_closed_form() {
        let n = [10.0, 20.0, 5.0];
        let a = [1.0, 2.0, 0.5];
        assert!((optimal_scale(&n, &a, &[0.0; 3]) - 35.0 / 3.5).abs() < 1e-12);
        // with background the stationarity condition holds
        let c = [1.0, 1.0, 1.0];
        let s = optimal_scale(&n, &a, &c);
        let g: f64 = n.iter().zip(a.iter().zip(&c)).map(|(n, (a, c))| n * a / (s * a + c)).sum::<f64>() - 3.5;
        assert!(g.abs() < 1e-9);
    }

    #[test]
    fn bootstrap_behaviour() {
        let opts = MleOptions { restarts: 1, ..Default::default() };
        let metrics = BootstrapMetric::defaults_for(2);
        let exact = |scale: f64| {
            let rho = embed(&DensityMatrix::new(CMatrix::diag_real(&[0.8, 0.2])).unwrap());
            let recs = exact_records(&rho, &protocol_heralded(), scale);
            TomographyProblem::from_records(&recs, TomoMode::HeraldedSingle).unwrap()
        };
        let huge = bootstrap_uncertainty(&exact(1e12), &metrics, 8, 1, &opts, true).unwrap();
        assert!(huge.stds.iter().all(|(_, s)| *s <= 1e-3), "{:?}", huge.stds);

        let big = bootstrap_uncertainty(&exact(1e5), &metrics, 30, 2, &opts, true).unwrap();
        let small = bootstrap_uncertainty(&exact(1e3), &metrics, 30, 2, &opts, true).unwrap();
        let pb = big.std_of(BootstrapMetric::Purity).unwrap();
        let ps = small.std_of(BootstrapMetric::Purity).unwrap();
        assert!(ps > pb, "{ps} vs {pb}");

        let again = bootstrap_uncertainty(&exact(1e3), &metrics, 30, 2, &opts, false).unwrap();
        assert_eq!(again, small);
        assert!(bootstrap_uncertainty(&exact(1e3), &metrics, 1, 2, &opts, false).is_err());
    }
}
