//! Fiber-assisted pair spectroscopy.
//!
//! A dispersive fiber in arm 1 delays each photon by an amount that depends
//! on its wavelength, so the coincidence delay histogram is a spectrum in
//! disguise. A monotone calibration polynomial maps delay (ns) to
//! wavelength (nm); timing jitter of the detectors sets the resolution.

use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{lstsq, RealMatrix};
use crate::simlab::{record_rng, route_probabilities, FilterSpec};
use crate::source::{SourceSpec, SpectralPeak, FWHM_PER_SIGMA};

const MIN_SLOPE_NM_PER_NS: f64 = 1e-6;
const MONOTONE_SAMPLES: usize = 1000;
const BISECTION_TOL_NS: f64 = 1e-6;
const EVENTS_PER_CHUNK: usize = 1 << 16;

/// Monotone polynomial delay → wavelength map over `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRecord", into = "CurveRecord")]
pub struct CalibrationCurve {
    coefficients: Vec<f64>,
    t_min: f64,
    t_max: f64,
}

#[derive(Serialize, Deserialize)]
struct CurveRecord {
    /// Ascending degree, wavelength in nm for delay in ns.
    coefficients: Vec<f64>,
    domain_ns: [f64; 2],
}

impl From<CalibrationCurve> for CurveRecord {
    fn from(c: CalibrationCurve) -> Self {
        CurveRecord {
            coefficients: c.coefficients,
            domain_ns: [c.t_min, c.t_max],
        }
    }
}

impl TryFrom<CurveRecord> for CalibrationCurve {
    type Error = Error;
    fn try_from(r: CurveRecord) -> Result<Self> {
        CalibrationCurve::new(r.coefficients, r.domain_ns[0], r.domain_ns[1])
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

impl CalibrationCurve {
    /// Fails unless the derivative keeps one sign with magnitude at least
    /// `1e-6` nm/ns over the whole domain.
    pub fn new(coefficients: Vec<f64>, t_min: f64, t_max: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("calibration needs finite coefficients"));
        }
        if !(t_min.is_finite() && t_max.is_finite() && t_max > t_min) {
            return Err(Error::input(format!("bad calibration domain [{t_min}, {t_max}]")));
        }
        let curve = CalibrationCurve {
            coefficients,
            t_min,
            t_max,
        };
        curve.check_monotone()?;
        Ok(curve)
    }

    /// `λ = λ0 + t / dispersion`, with `dispersion` in ps/nm.
    pub fn linear(lambda0_nm: f64, ps_per_nm: f64, t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(vec![lambda0_nm, 1000.0 / ps_per_nm], t_min, t_max)
    }

    fn check_monotone(&self) -> Result<()> {
        let mut sign = 0.0;
        for k in 0..=MONOTONE_SAMPLES {
            let t = self.t_min + (self.t_max - self.t_min) * k as f64 / MONOTONE_SAMPLES as f64;
            let d = self.slope_at(t);
            if d.abs() < MIN_SLOPE_NM_PER_NS {
                return Err(Error::NonMonotone(format!(
                    "slope {d:e} nm/ns at t = {t:.4} ns is below {MIN_SLOPE_NM_PER_NS:e}"
                )));
            }
            if sign == 0.0 {
                sign = d.signum();
            } else if d.signum() != sign {
                return Err(Error::NonMonotone(format!(
                    "slope changes sign near t = {t:.4} ns"
                )));
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn wavelength_at(&self, t_ns: f64) -> f64 {
        horner(&self.coefficients, t_ns)
    }

    /// `dλ/dt` in nm/ns.
    pub fn slope_at(&self, t_ns: f64) -> f64 {
        let deriv: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| k as f64 * a)
            .collect();
        horner(&deriv, t_ns)
    }

    fn increasing(&self) -> bool {
        self.slope_at(self.t_min) > 0.0
    }

    /// `(min, max)` wavelength covered by the domain.
    pub fn wavelength_range(&self) -> (f64, f64) {
        let a = self.wavelength_at(self.t_min);
        let b = self.wavelength_at(self.t_max);
        (a.min(b), a.max(b))
    }

    /// Delay of a photon at `lambda_nm`, by bisection; `None` outside the
    /// curve's range.
    pub fn delay_for(&self, lambda_nm: f64) -> Option<f64> {
        let (lo_l, hi_l) = self.wavelength_range();
        if !(lambda_nm >= lo_l && lambda_nm <= hi_l) {
            return None;
        }
        let inc = self.increasing();
        let (mut lo, mut hi) = (self.t_min, self.t_max);
        while hi - lo > BISECTION_TOL_NS {
            let mid = 0.5 * (lo + hi);
            let below = self.wavelength_at(mid) < lambda_nm;
            if below == inc {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub curve: CalibrationCurve,
    pub residual_rms_nm: f64,
}

/// Least-squares polynomial through `(delay_ns, wavelength_nm)` points,
/// verified monotone over the range of the delays.
pub fn fit_calibration(points: &[(f64, f64)], degree: usize) -> Result<CalibrationFit> {
    if points.len() < degree + 1 {
        return Err(Error::input(format!(
            "degree {degree} fit needs at least {} points, got {}",
            degree + 1,
            points.len()
        )));
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    if ts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::input("calibration delays must be distinct"));
    }
    let (t_min, t_max) = (ts[0], ts[ts.len() - 1]);
    // fit in u = (t - mid) / half for conditioning
    let mid = 0.5 * (t_min + t_max);
    let half = 0.5 * (t_max - t_min);
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|&(t, _)| {
            let u = (t - mid) / half;
            (0..=degree).map(|k| u.powi(k as i32)).collect()
        })
        .collect();
    let b: Vec<f64> = points.iter().map(|p| p.1).collect();
    let scaled = lstsq(&RealMatrix::from_rows(&rows)?, &b)?;
    let coefficients = unscale_polynomial(&scaled, mid, half);
    let curve = CalibrationCurve::new(coefficients, t_min, t_max)?;
    let ss: f64 = points
        .iter()
        .map(|&(t, l)| (curve.wavelength_at(t) - l).powi(2))
        .sum();
    Ok(CalibrationFit {
        curve,
        residual_rms_nm: (ss / points.len() as f64).sqrt(),
    })
}

/// Coefficients in `t` of `Σ a_k ((t - mid)/half)^k`.
fn unscale_polynomial(a: &[f64], mid: f64, half: f64) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (k, &ak) in a.iter().enumerate() {
        // ((t - mid)/half)^k = half^-k Σ_j C(k, j) t^j (-mid)^(k-j)
        let mut binom = 1.0;
        for (j, o) in out.iter_mut().enumerate().take(k + 1) {
            *o += ak * binom * (-mid).powi((k - j) as i32) / half.powi(k as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

/// Delay histogram with strictly increasing edges in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHistogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
}

impl TimeHistogram {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if bin_edges.is_empty() && counts.is_empty() {
            return Ok(TimeHistogram { bin_edges, counts });
        }
        if counts.len() + 1 != bin_edges.len() {
            return Err(Error::input(format!(
                "{} edges need {} counts, got {}",
                bin_edges.len(),
                bin_edges.len().saturating_sub(1),
                counts.len()
            )));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("histogram edges must be finite and strictly increasing"));
        }
        Ok(TimeHistogram { bin_edges, counts })
    }

    /// Zero-count histogram of `bin_ns`-wide bins covering `[start, stop]`.
    pub fn uniform(start: f64, stop: f64, bin_ns: f64) -> Result<Self> {
        if !(bin_ns > 0.0) || !(stop > start) {
            return Err(Error::input("histogram needs positive bin width and span"));
        }
        let n = ((stop - start) / bin_ns).ceil() as usize;
        let edges = (0..=n).map(|k| start + k as f64 * bin_ns).collect();
        Self::new(edges, vec![0; n])
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Bin containing `t`, for uniform bins.
    fn bin_of(&self, t: f64) -> Option<usize> {
        let first = *self.bin_edges.first()?;
        let last = *self.bin_edges.last()?;
        if !(t >= first && t < last) {
            return None;
        }
        let width = (last - first) / self.counts.len() as f64;
        let k = ((t - first) / width) as usize;
        Some(k.min(self.counts.len() - 1))
    }

    /// Centers of the bins, ns.
    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySimConfig {
    /// Combined timing jitter of both detectors, standard deviation in ps.
    pub jitter_ps: f64,
    pub n_events: usize,
    pub bin_ps: f64,
    pub seed: u64,
    /// Filters deciding which photon travels through the fiber arm.
    pub filters: Vec<FilterSpec>,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySimulation {
    pub histogram: TimeHistogram,
    /// Events whose wavelength lies outside the calibration range.
    pub dropped_out_of_domain: u64,
    /// Events whose jittered delay fell outside the histogram.
    pub dropped_out_of_range: u64,
}

/// Histogram of coincidence delays for photons dispersed in arm 1.
///
/// For each event the arm-1 photon is the signal or the idler in proportion
/// to their coincident routing probabilities; its wavelength is drawn from
/// the Gaussian peak, mapped to a delay through the curve, and jittered.
pub fn simulate_delay_histogram(
    spec: &SourceSpec,
    curve: &CalibrationCurve,
    cfg: &DelaySimConfig,
) -> Result<DelaySimulation> {
    spec.validate()?;
    if cfg.n_events == 0 {
        return Err(Error::input("need at least one event"));
    }
    if !(cfg.jitter_ps >= 0.0 && cfg.jitter_ps.is_finite()) {
        return Err(Error::input("jitter must be non-negative"));
    }
    if !(cfg.bin_ps > 0.0 && cfg.bin_ps.is_finite()) {
        return Err(Error::input("bin width must be positive"));
    }
    let routes = route_probabilities(spec, &cfg.filters);
    let coincident = routes.coincident();
    if coincident <= 0.0 {
        return Err(Error::input("filters leave no coincidences to histogram"));
    }
    let p_signal_in_fiber = routes.signal1_idler2 / coincident;
    let (t_min, t_max) = curve.domain();
    let template = TimeHistogram::uniform(t_min, t_max, cfg.bin_ps * 1e-3)?;
    let jitter_ns = cfg.jitter_ps * 1e-3;
    let n_chunks = cfg.n_events.div_ceil(EVENTS_PER_CHUNK);

    let chunk = |k: usize| -> (Vec<u64>, u64, u64) {
        let mut rng = record_rng(cfg.seed, k as u64);
        let n = EVENTS_PER_CHUNK.min(cfg.n_events - k * EVENTS_PER_CHUNK);
        let mut counts = vec![0u64; template.counts.len()];
        let (mut out_domain, mut out_range) = (0, 0);
        let unit = Uniform::new(0.0, 1.0).expect("valid range");
        let draw = |peak: &SpectralPeak, rng: &mut _| -> f64 {
            let s = peak.sigma_nm();
            if s > 0.0 {
                Normal::new(peak.center_nm, s).expect("positive sigma").sample(rng)
            } else {
                peak.center_nm
            }
        };
        for _ in 0..n {
            let peak = if unit.sample(&mut rng) < p_signal_in_fiber {
                &spec.signal_peak
            } else {
                &spec.idler_peak
            };
            let lambda = draw(peak, &mut rng);
            let Some(mut t) = curve.delay_for(lambda) else {
                out_domain += 1;
                continue;
            };
            if jitter_ns > 0.0 {
                t += Normal::new(0.0, jitter_ns).expect("positive sigma").sample(&mut rng);
            }
            match template.bin_of(t) {
                Some(b) => counts[b] += 1,
                None => out_range += 1,
            }
        }
        (counts, out_domain, out_range)
    };

    let parts: Vec<(Vec<u64>, u64, u64)> = if cfg.parallel {
        (0..n_chunks).into_par_iter().map(chunk).collect()
    } else {
        (0..n_chunks).map(chunk).collect()
    };
    let mut counts = vec![0u64; template.counts.len()];
    let (mut out_domain, mut out_range) = (0, 0);
    for (c, d, r) in parts {
        for (acc, v) in counts.iter_mut().zip(c) {
            *acc += v;
        }
        out_domain += d;
        out_range += r;
    }
    Ok(DelaySimulation {
        histogram: TimeHistogram::new(template.bin_edges, counts)?,
        dropped_out_of_domain: out_domain,
        dropped_out_of_range: out_range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub counts: u64,
}

impl SpectrumBin {
    pub fn center_nm(&self) -> f64 {
        0.5 * (self.lo_nm + self.hi_nm)
    }

    pub fn width_nm(&self) -> f64 {
        self.hi_nm - self.lo_nm
    }
}

/// Wavelength-binned counts, ascending in wavelength.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Spectrum {
    pub bins: Vec<SpectrumBin>,
}

impl Spectrum {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.counts).sum()
    }

    /// Count-weighted centroids of the `k` strongest peaks, ascending.
    ///
    /// Repeatedly takes the fullest remaining bin and averages over bins
    /// within `half_window_nm` of it; bins within `2·half_window_nm` of a
    /// found peak are excluded from later searches.
    pub fn peaks(&self, k: usize, half_window_nm: f64) -> Vec<f64> {
        let mut taken = vec![false; self.bins.len()];
        let mut found = Vec::new();
        while found.len() < k {
            let Some((imax, top)) = self
                .bins
                .iter()
                .enumerate()
                .filter(|(i, b)| !taken[*i] && b.counts > 0)
                .max_by_key(|(_, b)| b.counts)
            else {
                break;
            };
            let center = top.center_nm();
            let (mut w, mut s) = (0.0, 0.0);
            for b in &self.bins {
                if (b.center_nm() - center).abs() <= half_window_nm {
                    w += b.counts as f64;
                    s += b.counts as f64 * b.center_nm();
                }
            }
            found.push(s / w);
            for (i, b) in self.bins.iter().enumerate() {
                if (b.center_nm() - center).abs() <= 2.0 * half_window_nm {
                    taken[i] = true;
                }
            }
            taken[imax] = true;
        }
        found.sort_by(f64::total_cmp);
        found
    }
}

/// Maps histogram edges through the curve; counts carry over bin for bin.
pub fn invert_histogram(hist: &TimeHistogram, curve: &CalibrationCurve) -> Result<Spectrum> {
    if hist.is_empty() {
        return Ok(Spectrum::default());
    }
    let (t_min, t_max) = curve.domain();
    let slack = 1e-9 * (t_max - t_min);
    let first = hist.bin_edges[0];
    let last = *hist.bin_edges.last().expect("nonempty");
    if first < t_min - slack || last > t_max + slack {
        return Err(Error::input(format!(
            "histogram spans [{first}, {last}] ns outside the calibration domain [{t_min}, {t_max}] ns"
        )));
    }
    let mut bins: Vec<SpectrumBin> = hist
        .bin_edges
        .windows(2)
        .zip(&hist.counts)
        .map(|(w, &counts)| {
            let a = curve.wavelength_at(w[0]);
            let b = curve.wavelength_at(w[1]);
            SpectrumBin {
                lo_nm: a.min(b),
                hi_nm: a.max(b),
                counts,
            }
        })
        .collect();
    if !curve.increasing() {
        bins.reverse();
    }
    Ok(Spectrum { bins })
}

/// Wavelength resolution at `lambda_nm`: jitter FWHM times `|dλ/dt|`.
pub fn resolution_estimate(curve: &CalibrationCurve, jitter_ps: f64, lambda_nm: f64) -> Result<f64> {
    if !(jitter_ps >= 0.0) {
        return Err(Error::input("jitter must be non-negative"));
    }
    let t = curve
        .delay_for(lambda_nm)
        .ok_or_else(|| Error::input(format!("{lambda_nm} nm is outside the calibration range")))?;
    let slope = curve.slope_at(t).abs();
    if slope < MIN_SLOPE_NM_PER_NS {
        return Err(Error::input(format!("zero local slope at {lambda_nm} nm")));
    }
    Ok(FWHM_PER_SIGMA * jitter_ps * 1e-3 * slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::Placement;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use rand::Rng;

    fn dispersion_curve() -> CalibrationCurve {
        // 51 ps/nm: 17 ps/(nm km) over 3 km
        CalibrationCurve::linear(1400.0, 51.0, 0.0, 20.0).unwrap()
    }

    fn cubic(t: f64) -> f64 {
        1450.0 + 18.0 * t + 0.05 * t * t + 0.002 * t * t * t
    }

    fn config(jitter_ps: f64, n_events: usize, filters: Vec<FilterSpec>) -> DelaySimConfig {
        DelaySimConfig {
            jitter_ps,
            n_events,
            bin_ps: 20.0,
            seed: 12,
            filters,
            parallel: true,
        }
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<(f64, f64)> = (0..8).map(|k| (k as f64, 1500.0 + 20.0 * k as f64)).collect();
        let fit = fit_calibration(&pts, 1).unwrap();
        let c = fit.curve.coefficients();
        assert!((c[0] - 1500.0).abs() < 1e-9 && (c[1] - 20.0).abs() < 1e-9, "{c:?}");
        assert!(fit.residual_rms_nm < 1e-9);
    }

    #[test]
    fn exact_cubic_fit() {
        let pts: Vec<(f64, f64)> = (0..12).map(|k| (1.5 * k as f64, cubic(1.5 * k as f64))).collect();
        let fit = fit_calibration(&pts, 3).unwrap();
        assert!(fit.residual_rms_nm <= 1e-9, "{}", fit.residual_rms_nm);
    }

    #[test]
    fn noisy_cubic_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let t = 0.4 * k as f64;
                let noise: f64 = rng.sample(StandardNormal);
                (t, cubic(t) + 0.5 * noise)
            })
            .collect();
        let fit = fit_calibration(&pts, 3).unwrap();
        assert!(fit.residual_rms_nm <= 1.0, "{}", fit.residual_rms_nm);
    }

    #[test]
    fn non_monotone_fit_rejected() {
        let pts: Vec<(f64, f64)> = (0..9).map(|k| {
            let t = k as f64 - 4.0;
            (t, 1500.0 + t * t)
        }).collect();
        assert!(matches!(fit_calibration(&pts, 2), Err(Error::NonMonotone(_))));
        assert!(fit_calibration(&pts[..2], 3).is_err());
        assert!(fit_calibration(&[(1.0, 1500.0), (1.0, 1510.0)], 1).is_err());
    }

    #[test]
    fn bisection_inverts_curve() {
        let c = CalibrationCurve::new(vec![1450.0, 18.0, 0.05, 0.002], 0.0, 20.0).unwrap();
        for t in [0.3, 5.0, 12.7, 19.9] {
            let back = c.delay_for(c.wavelength_at(t)).unwrap();
            assert!((back - t).abs() < 1e-6);
        }
        assert!(c.delay_for(1000.0).is_none());
        let dec = CalibrationCurve::new(vec![1800.0, -19.6], 0.0, 20.0).unwrap();
        assert!((dec.delay_for(1604.0).unwrap() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn delta_peak_fills_single_bin() {
        let mut spec = SourceSpec::qom_a();
        spec.signal_peak.fwhm_nm = 0.0;
        // idler kept out of arm 1, so arm 1 always holds the signal
        let filters = vec![FilterSpec::longpass(1550.0, Placement::Arm2).unwrap()];
        let curve = dispersion_curve();
        let sim = simulate_delay_histogram(&spec, &curve, &config(0.0, 5000, filters)).unwrap();
        let t = curve.delay_for(1527.7).unwrap();
        let nonzero: Vec<usize> = sim.histogram.counts().iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| i).collect();
        assert_eq!(nonzero.len(), 1);
        let b = nonzero[0];
        let e = sim.histogram.bin_edges();
        assert!(e[b] <= t && t < e[b + 1]);
        assert_eq!(sim.histogram.total(), 5000);
    }

    #[test]
    fn two_clusters_separated_by_dispersion() {
        let mut spec = SourceSpec::qom_a();
        spec.signal_peak.fwhm_nm = 0.0;
        spec.idler_peak.fwhm_nm = 0.0;
        let curve = dispersion_curve();
        let sim = simulate_delay_histogram(&spec, &curve, &config(0.0, 4000, vec![])).unwrap();
        let centers = sim.histogram.centers();
        let filled: Vec<f64> = sim.histogram.counts().iter().zip(&centers).filter(|(&c, _)| c > 0).map(|(_, &t)| t).collect();
        assert_eq!(filled.len(), 2);
        let sep = filled[1] - filled[0];
        let expect = (1629.2 - 1527.7) * 0.051;
        assert!((sep - expect).abs() <= 0.02 + 1e-9, "{sep} vs {expect}");
        assert!((expect - 5.18).abs() < 0.01);
    }

    #[test]
    fn jitter_sets_cluster_width() {
        let mut spec = SourceSpec::qom_a();
        spec.signal_peak.fwhm_nm = 0.0;
        let filters = vec![FilterSpec::longpass(1550.0, Placement::Arm2).unwrap()];
        let curve = dispersion_curve();
        let mut cfg = config(50.0, 400_000, filters);
        cfg.bin_ps = 2.0;
        let sim = simulate_delay_histogram(&spec, &curve, &cfg).unwrap();
        let h = &sim.histogram;
        let centers = h.centers();
        let n = h.total() as f64;
        let mean = h.counts().iter().zip(&centers).map(|(&c, &t)| c as f64 * t).sum::<f64>() / n;
        let var = h.counts().iter().zip(&centers).map(|(&c, &t)| c as f64 * (t - mean).powi(2)).sum::<f64>() / n;
        let fwhm_ps = FWHM_PER_SIGMA * var.sqrt() * 1e3;
        assert!((fwhm_ps - 117.7).abs() < 2.0, "{fwhm_ps}");
    }

    #[test]
    fn simulation_deterministic_across_parallelism() {
        let spec = SourceSpec::qom_a();
        let curve = dispersion_curve();
        let mut cfg = config(50.0, 200_000, vec![]);
        let a = simulate_delay_histogram(&spec, &curve, &cfg).unwrap();
        cfg.parallel = false;
        let b = simulate_delay_histogram(&spec, &curve, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn events_outside_domain_are_dropped() {
        let spec = SourceSpec::qom_a();
        // covers 1400..1596 nm: the idler at 1629 nm falls outside
        let curve = CalibrationCurve::linear(1400.0, 51.0, 0.0, 10.0).unwrap();
        let sim = simulate_delay_histogram(&spec, &curve, &config(0.0, 10_000, vec![])).unwrap();
        assert!(sim.dropped_out_of_domain > 4000);
        assert_eq!(sim.histogram.total() + sim.dropped_out_of_domain + sim.dropped_out_of_range, 10_000);
    }

    #[test]
    fn inversion_relabels_and_conserves() {
        let curve = CalibrationCurve::linear(0.0, 1000.0, 0.0, 10.0).unwrap();
        let hist = TimeHistogram::new(vec![1.0, 2.0, 3.0, 4.0], vec![5, 0, 7]).unwrap();
        let s = invert_histogram(&hist, &curve).unwrap();
        assert_eq!(s.total(), 12);
        assert_eq!(s.bins[0], SpectrumBin { lo_nm: 1.0, hi_nm: 2.0, counts: 5 });
        assert_eq!(s.bins[2].counts, 7);

        let empty = TimeHistogram::new(vec![], vec![]).unwrap();
        assert!(invert_histogram(&empty, &curve).unwrap().bins.is_empty());

        let outside = TimeHistogram::new(vec![9.0, 11.0], vec![1]).unwrap();
        assert!(invert_histogram(&outside, &curve).is_err());
    }

    #[test]
    fn roundtrip_recovers_peaks() {
        let spec = SourceSpec::qom_a();
        let curve = dispersion_curve();
        let sim = simulate_delay_histogram(&spec, &curve, &config(50.0, 200_000, vec![])).unwrap();
        let spectrum = invert_histogram(&sim.histogram, &curve).unwrap();
        assert_eq!(spectrum.total(), sim.histogram.total());
        let peaks = spectrum.peaks(2, 15.0);
        let bin = spectrum.bins[0].width_nm();
        let res = resolution_estimate(&curve, 50.0, 1527.7).unwrap();
        let tol = bin.max(res);
        assert!((peaks[0] - 1527.7).abs() <= tol, "{peaks:?}");
        assert!((peaks[1] - 1629.2).abs() <= tol, "{peaks:?}");
        let partner = crate::source::conjugate_wavelength(788.4, peaks[0]).unwrap();
        assert!((partner - peaks[1]).abs() <= 2.0 * res);
    }

    #[test]
    fn resolution_examples() {
        let curve = dispersion_curve();
        let r = resolution_estimate(&curve, 50.0, 1527.7).unwrap();
        assert!((r - 2.31).abs() < 0.01 && r < 3.0, "{r}");
        assert_eq!(resolution_estimate(&curve, 0.0, 1527.7).unwrap(), 0.0);
        let r2 = resolution_estimate(&curve, 100.0, 1527.7).unwrap();
        assert!((r2 - 2.0 * r).abs() < 1e-12);
        assert!(resolution_estimate(&curve, 50.0, 2000.0).is_err());
    }

    #[test]
    fn histogram_validation() {
        assert!(TimeHistogram::new(vec![0.0, 1.0], vec![1, 2]).is_err());
        assert!(TimeHistogram::new(vec![1.0, 0.0], vec![1]).is_err());
        assert!(CalibrationCurve::new(vec![1500.0, 0.0], 0.0, 1.0).is_err());
    }
}
