//! Coincidence counting through the beamsplitter setup.
//!
//! Each photon of a pair independently takes either output of the 50:50
//! splitter. Spectral filters before the splitter or in one arm gate which
//! of the four routings survive; only routings that put one photon in each
//! arm produce coincidences. The analyzer optics then project the state,
//! written in arm order (arm 1 ⊗ arm 2), which is the source state or its
//! swap depending on the routing.
//!
//! Counts are Poisson draws from a ChaCha stream selected by the record
//! index, so records can be generated in any order or in parallel.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polopt::ProjectionSetting;
use crate::qmat::{partial_trace, Arm, CMatrix, DensityMatrix};
use crate::source::SourceSpec;

/// Where a filter sits in the optical path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    BeforeSplitter,
    Arm1,
    Arm2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterKind {
    Longpass { cut_on_nm: f64 },
    Bandpass { center_nm: f64, fwhm_nm: f64 },
}

/// Ideal step-edge spectral filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub placement: Placement,
}

impl FilterSpec {
    pub fn longpass(cut_on_nm: f64, placement: Placement) -> Result<Self> {
        let f = FilterSpec {
            kind: FilterKind::Longpass { cut_on_nm },
            placement,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn bandpass(center_nm: f64, fwhm_nm: f64, placement: Placement) -> Result<Self> {
        let f = FilterSpec {
            kind: FilterKind::Bandpass { center_nm, fwhm_nm },
            placement,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FilterKind::Longpass { cut_on_nm } if !(cut_on_nm > 0.0 && cut_on_nm.is_finite()) => {
                Err(Error::input(format!("longpass cut-on must be positive, got {cut_on_nm}")))
            }
            FilterKind::Bandpass { center_nm, fwhm_nm }
                if !(center_nm > 0.0 && center_nm.is_finite() && fwhm_nm > 0.0 && fwhm_nm.is_finite()) =>
            {
                Err(Error::input(format!(
                    "bandpass needs positive center and fwhm, got {center_nm}/{fwhm_nm}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Parses `LP1550@arm1`, `BP1475/50@arm2` or `LP1250` (before the splitter).
impl FromStr for FilterSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, place) = match s.split_once('@') {
            Some((b, p)) => (b, p),
            None => (s, "before"),
        };
        let placement = match place.to_ascii_lowercase().as_str() {
            "before" | "before_splitter" => Placement::BeforeSplitter,
            "arm1" => Placement::Arm1,
            "arm2" => Placement::Arm2,
            other => return Err(Error::input(format!("unknown filter placement {other:?}"))),
        };
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::input(format!("bad number {t:?} in filter {s:?}")))
        };
        let upper = body.to_ascii_uppercase();
        if let Some(rest) = upper.strip_prefix("LP") {
            FilterSpec::longpass(num(rest)?, placement)
        } else if let Some(rest) = upper.strip_prefix("BP") {
            let (center, width) = rest
                .split_once('/')
                .ok_or_else(|| Error::input(format!("bandpass {s:?} needs center/fwhm")))?;
            FilterSpec::bandpass(num(center)?, num(width)?, placement)
        } else {
            Err(Error::input(format!("filter {s:?} must start with LP or BP")))
        }
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FilterKind::Longpass { cut_on_nm } => write!(f, "LP{cut_on_nm}")?,
            FilterKind::Bandpass { center_nm, fwhm_nm } => write!(f, "BP{center_nm}/{fwhm_nm}")?,
        }
        match self.placement {
            Placement::BeforeSplitter => write!(f, "@before"),
            Placement::Arm1 => write!(f, "@arm1"),
            Placement::Arm2 => write!(f, "@arm2"),
        }
    }
}

/// Comma-separated list of filters; empty input means no filters.
pub fn parse_filters(s: &str) -> Result<Vec<FilterSpec>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

/// 1 inside the passband, 0 outside.
pub fn filter_transmission(lambda_nm: f64, f: &FilterSpec) -> f64 {
    let pass = match f.kind {
        FilterKind::Longpass { cut_on_nm } => lambda_nm >= cut_on_nm,
        FilterKind::Bandpass { center_nm, fwhm_nm } => (lambda_nm - center_nm).abs() <= fwhm_nm / 2.0,
    };
    if pass {
        1.0
    } else {
        0.0
    }
}

/// Probability that a photon at `lambda_nm` ends up detectable in `arm`:
/// half from the splitter, times every filter on the way.
pub fn arm_transmission(lambda_nm: f64, arm: Arm, filters: &[FilterSpec]) -> f64 {
    let wanted = match arm {
        Arm::One => Placement::Arm1,
        Arm::Two => Placement::Arm2,
    };
    0.5 * filters
        .iter()
        .filter(|f| f.placement == Placement::BeforeSplitter || f.placement == wanted)
        .map(|f| filter_transmission(lambda_nm, f))
        .product::<f64>()
}

/// Joint probabilities of the four splitter routings, filter losses included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteProbabilities {
    pub signal1_idler2: f64,
    pub idler1_signal2: f64,
    pub both_arm1: f64,
    pub both_arm2: f64,
}

impl RouteProbabilities {
    pub fn total(&self) -> f64 {
        self.signal1_idler2 + self.idler1_signal2 + self.both_arm1 + self.both_arm2
    }

    /// Probability that the pair yields a coincidence.
    pub fn coincident(&self) -> f64 {
        self.signal1_idler2 + self.idler1_signal2
    }
}

/// Routing evaluated at the peak centers.
pub fn route_probabilities(spec: &SourceSpec, filters: &[FilterSpec]) -> RouteProbabilities {
    let s = spec.signal_peak.center_nm;
    let i = spec.idler_peak.center_nm;
    let t = |l, a| arm_transmission(l, a, filters);
    RouteProbabilities {
        signal1_idler2: t(s, Arm::One) * t(i, Arm::Two),
        idler1_signal2: t(i, Arm::One) * t(s, Arm::Two),
        both_arm1: t(s, Arm::One) * t(i, Arm::One),
        both_arm2: t(s, Arm::Two) * t(i, Arm::Two),
    }
}

fn arm_operator(setting: &ProjectionSetting, arm: Arm) -> CMatrix {
    setting
        .arm_projector(arm)
        .map_or_else(|| CMatrix::identity(2), |j| j.projector())
}

/// Two-photon measurement operator `Π₁ ⊗ Π₂` of a setting.
pub fn measurement_operator(setting: &ProjectionSetting) -> CMatrix {
    arm_operator(setting, Arm::One).kron(&arm_operator(setting, Arm::Two))
}

/// `Tr[(Π₁ ⊗ Π₂) ρ]` for a state in arm order.
pub fn projection_probability(rho_arm_order: &DensityMatrix, setting: &ProjectionSetting) -> Result<f64> {
    if rho_arm_order.dim() != 4 {
        return Err(Error::Dimension("projection needs a two-photon state".into()));
    }
    Ok(measurement_operator(setting)
        .trace_product(rho_arm_order.matrix())
        .re
        .clamp(0.0, 1.0))
}

/// How accidental coincidences are modeled.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AccidentalModel {
    /// The source's `background_rate_hz` for every setting.
    #[default]
    Flat,
    /// `R₁·R₂·τ` from the expected singles rates and window `τ`.
    FromSingles { window_ns: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub accidentals: AccidentalModel,
    /// Also draw singles counts for each record.
    pub record_singles: bool,
    pub parallel: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            accidentals: AccidentalModel::Flat,
            record_singles: false,
            parallel: true,
        }
    }
}

/// Expected rates for one setting, in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub coincidences: f64,
    pub singles_arm1: f64,
    pub singles_arm2: f64,
}

fn source_states(spec: &SourceSpec) -> Result<(DensityMatrix, DensityMatrix, DensityMatrix)> {
    let rho = spec.two_photon_state()?;
    let swapped = rho.swap_subsystems()?;
    let idler = partial_trace(&rho, Arm::Two)?;
    Ok((rho, swapped, idler))
}

fn rates_for(
    spec: &SourceSpec,
    states: &(DensityMatrix, DensityMatrix, DensityMatrix),
    routes: &RouteProbabilities,
    setting: &ProjectionSetting,
    filters: &[FilterSpec],
    accidentals: AccidentalModel,
) -> Result<ExpectedRates> {
    let (rho, swapped, idler) = states;
    let [eta1, eta2] = spec.arm_efficiency;
    let p_proj_direct = projection_probability(rho, setting)?;
    let p_proj_swapped = projection_probability(swapped, setting)?;
    let true_rate = spec.pair_rate_hz
        * eta1
        * eta2
        * (routes.signal1_idler2 * p_proj_direct + routes.idler1_signal2 * p_proj_swapped);

    let signal = spec.signal_state();
    let singles = |arm: Arm, eta: f64| {
        let op = arm_operator(setting, arm);
        let ps = op.trace_product(signal.matrix()).re;
        let pi = op.trace_product(idler.matrix()).re;
        spec.pair_rate_hz
            * eta
            * (arm_transmission(spec.signal_peak.center_nm, arm, filters) * ps
                + arm_transmission(spec.idler_peak.center_nm, arm, filters) * pi)
    };
    let singles_arm1 = singles(Arm::One, eta1);
    let singles_arm2 = singles(Arm::Two, eta2);
    let accidental = match accidentals {
        AccidentalModel::Flat => spec.background_rate_hz,
        AccidentalModel::FromSingles { window_ns } => singles_arm1 * singles_arm2 * window_ns * 1e-9,
    };
    Ok(ExpectedRates {
        coincidences: true_rate + accidental,
        singles_arm1,
        singles_arm2,
    })
}

/// Expected coincidence rate (1/s) for one setting with the flat background.
pub fn expected_coincidence_rate(
    spec: &SourceSpec,
    setting: &ProjectionSetting,
    filters: &[FilterSpec],
) -> Result<f64> {
    Ok(expected_rates(spec, setting, filters, AccidentalModel::Flat)?.coincidences)
}

pub fn expected_rates(
    spec: &SourceSpec,
    setting: &ProjectionSetting,
    filters: &[FilterSpec],
    accidentals: AccidentalModel,
) -> Result<ExpectedRates> {
    spec.validate()?;
    let states = source_states(spec)?;
    let routes = route_probabilities(spec, filters);
    rates_for(spec, &states, &routes, setting, filters, accidentals)
}

/// One projection setting with its integration time and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub label: String,
    pub setting: ProjectionSetting,
    pub integration_s: f64,
    pub coincidences: u64,
    pub singles_arm1: Option<u64>,
    pub singles_arm2: Option<u64>,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.integration_s > 0.0 && self.integration_s.is_finite()) {
            return Err(Error::input(format!(
                "record {:?}: integration time must be positive",
                self.label
            )));
        }
        Ok(())
    }
}

/// Poisson draw; a zero mean gives zero counts.
pub fn poisson_sample<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// The random stream owned by record `index` under `seed`.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mean coincidence count and optional mean singles `(arm1, arm2)`.
pub type RecordMeans = (f64, Option<(f64, f64)>);

/// Draws Poisson counts for precomputed mean coincidence (and optional
/// singles) counts, one independent stream per record.
pub fn simulate_from_means(
    settings: &[ProjectionSetting],
    means: &[RecordMeans],
    integration_s: f64,
    seed: u64,
    parallel: bool,
) -> Result<Vec<CountRecord>> {
    if !(integration_s > 0.0 && integration_s.is_finite()) {
        return Err(Error::input(format!(
            "integration time must be positive, got {integration_s}"
        )));
    }
    if settings.len() != means.len() {
        return Err(Error::Dimension("one mean per setting required".into()));
    }
    let draw = |(idx, (setting, &(mean, singles))): (usize, (&ProjectionSetting, &RecordMeans))| {
        let mut rng = record_rng(seed, idx as u64);
        let coincidences = poisson_sample(mean, &mut rng);
        let (s1, s2) = match singles {
            Some((m1, m2)) => (
                Some(poisson_sample(m1, &mut rng)),
                Some(poisson_sample(m2, &mut rng)),
            ),
            None => (None, None),
        };
        CountRecord {
            label: setting.label.clone(),
            setting: setting.clone(),
            integration_s,
            coincidences,
            singles_arm1: s1,
            singles_arm2: s2,
        }
    };
    let records = if parallel {
        settings.par_iter().zip(means.par_iter()).enumerate().map(draw).collect()
    } else {
        settings.iter().zip(means.iter()).enumerate().map(draw).collect()
    };
    Ok(records)
}

/// Simulated counts for a source through the given protocol and filters.
pub fn simulate_counts(
    spec: &SourceSpec,
    protocol: &[ProjectionSetting],
    filters: &[FilterSpec],
    integration_s: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    simulate_counts_with(spec, protocol, filters, integration_s, seed, &SimOptions::default())
}

pub fn simulate_counts_with(
    spec: &SourceSpec,
    protocol: &[ProjectionSetting],
    filters: &[FilterSpec],
    integration_s: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<CountRecord>> {
    spec.validate()?;
    for f in filters {
        f.validate()?;
    }
    let states = source_states(spec)?;
    let routes = route_probabilities(spec, filters);
    let means = protocol
        .iter()
        .map(|s| {
            let r = rates_for(spec, &states, &routes, s, filters, opts.accidentals)?;
            let singles = opts
                .record_singles
                .then_some((r.singles_arm1 * integration_s, r.singles_arm2 * integration_s));
            Ok((r.coincidences * integration_s, singles))
        })
        .collect::<Result<Vec<_>>>()?;
    simulate_from_means(protocol, &means, integration_s, seed, opts.parallel)
}

/// Counts for an arbitrary arm-ordered state: mean `scale·P + background`
/// per record, both in counts per integration window.
pub fn simulate_state_counts(
    rho_arm_order: &DensityMatrix,
    protocol: &[ProjectionSetting],
    scale_counts: f64,
    background_counts: f64,
    integration_s: f64,
    seed: u64,
    parallel: bool,
) -> Result<Vec<CountRecord>> {
    let means = protocol
        .iter()
        .map(|s| Ok((scale_counts * projection_probability(rho_arm_order, s)? + background_counts, None)))
        .collect::<Result<Vec<_>>>()?;
    simulate_from_means(protocol, &means, integration_s, seed, parallel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polopt::{canonical_state, protocol_heralded, protocol_two, single_setting, PolLabel};
    use crate::qmat::{c, tensor_product};

    fn label_state(l: PolLabel) -> DensityMatrix {
        DensityMatrix::pure(&canonical_state(l).as_array()).unwrap()
    }

    fn heralded(l: PolLabel) -> ProjectionSetting {
        ProjectionSetting::heralded(l.to_string(), single_setting(l))
    }

    fn bell() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap()
    }

    #[test]
    fn filter_examples() {
        let lp: FilterSpec = "LP1550@arm1".parse().unwrap();
        assert_eq!(filter_transmission(1629.2, &lp), 1.0);
        assert_eq!(filter_transmission(1527.7, &lp), 0.0);
        let bp: FilterSpec = "BP1475/50@arm2".parse().unwrap();
        assert_eq!(filter_transmission(1484.0, &bp), 1.0);
        assert_eq!(filter_transmission(1682.0, &bp), 0.0);
        assert_eq!(bp.placement, Placement::Arm2);
        assert_eq!("LP1250".parse::<FilterSpec>().unwrap().placement, Placement::BeforeSplitter);
        assert!("XX12".parse::<FilterSpec>().is_err());
        assert!("BP1475/0@arm1".parse::<FilterSpec>().is_err());
        assert_eq!(lp.to_string().parse::<FilterSpec>().unwrap(), lp);
        assert_eq!(parse_filters(" LP1250, LP1400 ,").unwrap().len(), 2);
    }

    #[test]
    fn routes_sum_to_one_without_filters() {
        let r = route_probabilities(&SourceSpec::qom_a(), &[]);
        assert_eq!(r.total(), 1.0);
        assert_eq!(r.signal1_idler2, 0.25);
    }

    #[test]
    fn herald_filter_routes_quarter_of_pairs() {
        // enumerate the four routings by hand: LP1550 in arm 1 blocks the
        // 1527.7 nm signal there, so only idler->1 with signal->2 survives
        let spec = SourceSpec::qom_a();
        let lp = [FilterSpec::longpass(1550.0, Placement::Arm1).unwrap()];
        let mut survive = 0.0;
        for (sig_arm, idl_arm) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let pass = |lambda: f64, arm| if arm == 1 { (lambda >= 1550.0) as u8 as f64 } else { 1.0 };
            if sig_arm != idl_arm {
                survive += 0.25 * pass(1527.7, sig_arm) * pass(1629.2, idl_arm);
            }
        }
        let r = route_probabilities(&spec, &lp);
        assert_eq!(survive, 0.25);
        assert_eq!(r.idler1_signal2, survive);
        assert_eq!(r.signal1_idler2, 0.0);
        assert_eq!(r.coincident(), 0.25);
    }

    #[test]
    fn aligned_and_orthogonal_heralded_projection() {
        let hh = tensor_product(&label_state(PolLabel::H), &label_state(PolLabel::H)).unwrap();
        assert!((projection_probability(&hh, &heralded(PolLabel::H)).unwrap() - 1.0).abs() < 1e-12);
        assert!(projection_probability(&hh, &heralded(PolLabel::V)).unwrap() < 1e-12);

        let mut spec = SourceSpec::qom_a();
        spec.idler_weight1 = 1.0;
        spec.background_rate_hz = 0.7;
        let rate = expected_coincidence_rate(&spec, &heralded(PolLabel::V), &[]).unwrap();
        assert!((rate - 0.7).abs() < 1e-12);
        let rate_h = expected_coincidence_rate(&spec, &heralded(PolLabel::H), &[]).unwrap();
        let expect = spec.pair_rate_hz * 0.2 * 0.15 * 0.5 + 0.7;
        assert!((rate_h - expect).abs() < 1e-9);
    }

    #[test]
    fn orthonormal_pairs_sum_to_one() {
        let rho = bell();
        for (a, b) in [(PolLabel::H, PolLabel::V), (PolLabel::D, PolLabel::A), (PolLabel::R, PolLabel::L)] {
            let p = projection_probability(&rho, &heralded(a)).unwrap()
                + projection_probability(&rho, &heralded(b)).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heralded_signal_sees_signal_state() {
        // LP1550 in arm 1: arm 2 always holds the signal
        let mut spec = SourceSpec::qom_a();
        spec.signal_pol = canonical_state(PolLabel::D);
        let lp = [FilterSpec::longpass(1550.0, Placement::Arm1).unwrap()];
        let d = expected_coincidence_rate(&spec, &heralded(PolLabel::D), &lp).unwrap();
        let a = expected_coincidence_rate(&spec, &heralded(PolLabel::A), &lp).unwrap();
        assert!(a.abs() < 1e-9);
        assert!((d - spec.pair_rate_hz * 0.2 * 0.15 * 0.25).abs() < 1e-9);
    }

    #[test]
    fn zero_rates_give_zero_counts() {
        let mut spec = SourceSpec::qom_a();
        spec.pair_rate_hz = 0.0;
        let recs = simulate_counts(&spec, &protocol_two(), &[], 10.0, 1).unwrap();
        assert_eq!(recs.len(), 16);
        assert!(recs.iter().all(|r| r.coincidences == 0));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let spec = SourceSpec::qom_b();
        let run = |parallel| {
            let opts = SimOptions { parallel, record_singles: true, ..Default::default() };
            simulate_counts_with(&spec, &protocol_heralded(), &[], 30.0, 99, &opts).unwrap()
        };
        let a = run(true);
        assert_eq!(a, run(true));
        assert_eq!(a, run(false));
        assert!(a.iter().all(|r| r.singles_arm1.is_some()));
        let other = simulate_counts(&spec, &protocol_heralded(), &[], 30.0, 100).unwrap();
        assert_ne!(a.iter().map(|r| r.coincidences).collect::<Vec<_>>(),
                   other.iter().map(|r| r.coincidences).collect::<Vec<_>>());
    }

    #[test]
    fn bell_hh_mean_over_seeds() {
        let proto = protocol_two();
        let scale = 1e5;
        let n_seeds = 200;
        let sum: f64 = (0..n_seeds)
            .map(|seed| {
                let recs = simulate_state_counts(&bell(), &proto, scale, 0.0, 1.0, seed, false).unwrap();
                recs[0].coincidences as f64
            })
            .sum();
        let mean = sum / n_seeds as f64;
        let expect = 0.5 * scale;
        let sigma_of_mean = (expect / n_seeds as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * sigma_of_mean, "{mean}");
    }

    #[test]
    fn monte_carlo_mean_converges() {
        let spec = SourceSpec::qom_a();
        let proto = [heralded(PolLabel::H)];
        let rate = expected_coincidence_rate(&spec, &proto[0], &[]).unwrap();
        let t = 200.0 / rate; // about 200 counts per window
        let reps = 10_000u64;
        let total: u64 = (0..reps)
            .map(|seed| simulate_counts_with(&spec, &proto, &[], t, seed, &SimOptions { parallel: false, ..Default::default() }).unwrap()[0].coincidences)
            .sum();
        let mean = total as f64 / reps as f64;
        assert!((mean / (rate * t) - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn accidentals_from_singles() {
        let spec = SourceSpec::qom_a();
        let s = heralded(PolLabel::V);
        let flat = expected_rates(&spec, &s, &[], AccidentalModel::Flat).unwrap();
        let window = expected_rates(&spec, &s, &[], AccidentalModel::FromSingles { window_ns: 2.0 }).unwrap();
        let acc = flat.singles_arm1 * flat.singles_arm2 * 2e-9;
        assert!(acc > 0.0);
        assert!((window.coincidences - (flat.coincidences - spec.background_rate_hz + acc)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_integration() {
        assert!(simulate_counts(&SourceSpec::qom_a(), &protocol_two(), &[], 0.0, 1).is_err());
    }
}
