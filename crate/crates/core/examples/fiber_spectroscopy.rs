//! Fiber-assisted pair spectroscopy: fit a calibration from noisy points,
//! simulate the delay histogram of the QOM-A pair through a 3 km fiber,
//! and invert it back into a spectrum.

use polartomo::fiberspec::{
    fit_calibration, invert_histogram, resolution_estimate, simulate_delay_histogram, DelaySimConfig,
};
use polartomo::source::conjugate_wavelength;
use polartomo::SourceSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> polartomo::Result<()> {
    // 17 ps/(nm km) over 3 km, with a little curvature
    let truth = |t: f64| 1400.0 + t / 0.051 + 0.02 * t * t - 0.0004 * t * t * t;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<(f64, f64)> = (0..=40)
        .map(|k| {
            let t = 0.5 * k as f64;
            let noise: f64 = rng.sample(StandardNormal);
            (t, truth(t) + 0.3 * noise)
        })
        .collect();
    let fit = fit_calibration(&points, 3)?;
    println!(
        "calibration coefficients {:.5?}, residual rms {:.3} nm",
        fit.curve.coefficients(),
        fit.residual_rms_nm
    );

    let spec = SourceSpec::qom_a();
    let cfg = DelaySimConfig {
        jitter_ps: 50.0,
        n_events: 1_000_000,
        bin_ps: 20.0,
        seed: 17,
        filters: vec![],
        parallel: true,
    };
    let sim = simulate_delay_histogram(&spec, &fit.curve, &cfg)?;
    println!(
        "{} events histogrammed, {} outside the calibration range",
        sim.histogram.total(),
        sim.dropped_out_of_domain
    );

    let spectrum = invert_histogram(&sim.histogram, &fit.curve)?;
    let peaks = spectrum.peaks(2, 15.0);
    println!("recovered peaks {peaks:.2?} nm");
    for &p in &peaks {
        println!("  resolution at {p:.1} nm: {:.2} nm", resolution_estimate(&fit.curve, 50.0, p)?);
    }
    println!(
        "energy-conservation partner of the first peak: {:.2} nm",
        conjugate_wavelength(spec.pump_nm, peaks[0])?
    );

    let max = spectrum.bins.iter().map(|b| b.counts).max().unwrap_or(1);
    for b in spectrum.bins.iter().step_by(8).filter(|b| b.counts > max / 50) {
        println!("{:8.1} nm {}", b.center_nm(), "#".repeat((60 * b.counts / max) as usize));
    }
    Ok(())
}
