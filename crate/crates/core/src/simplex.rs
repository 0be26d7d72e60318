//! Nelder–Mead simplex minimization with dimension-adaptive coefficients
//! (Gao & Han), restarted from the incumbent until a full cycle stops
//! improving.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Cap on simplex iterations summed over all restart cycles.
    pub max_iterations: usize,
    /// A cycle that improves the objective by less than this ends the search.
    pub cycle_tolerance: f64,
    /// Initial simplex edge, relative to `max(1, |x|∞)`.
    pub initial_step: f64,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after every iteration.
    pub trace: Vec<f64>,
}

pub fn minimize<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let mut best_x = x0.to_vec();
    let mut best = f(&best_x);
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut step = opts.initial_step;

    while iterations < opts.max_iterations {
        let budget = opts.max_iterations - iterations;
        let (x, value, used) = run_simplex(&f, &best_x, step, budget, opts.cycle_tolerance, &mut trace, best);
        iterations += used;
        let improvement = best - value;
        if value < best {
            best = value;
            best_x = x;
        }
        if improvement < opts.cycle_tolerance {
            converged = used < budget;
            break;
        }
        // later cycles refine around the incumbent
        step = (step * 0.5).max(opts.initial_step * 1e-3);
    }
    SimplexResult {
        x: best_x,
        value: best,
        iterations,
        converged,
        trace,
    }
}

fn run_simplex<F>(
    f: &F,
    x0: &[f64],
    step: f64,
    budget: usize,
    ftol: f64,
    trace: &mut Vec<f64>,
    incumbent: f64,
) -> (Vec<f64>, f64, usize)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n as f64;
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let delta = 1.0 - 1.0 / nf;

    let scale = x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step * scale;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    let mut it = 0;
    while it < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let pts_sorted: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
        let vals_sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        pts = pts_sorted;
        vals = vals_sorted;

        let spread = vals[n] - vals[0];
        let diam = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= 0.1 * ftol || diam <= 1e-12 * scale {
            break;
        }
        it += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(alpha * beta);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let outside = fr < vals[n];
            let xc = if outside { along(alpha * gamma) } else { along(-gamma) };
            let fc = f(&xc);
            if (outside && fc <= fr) || (!outside && fc < vals[n]) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = pts[0]
                        .iter()
                        .zip(&pts[i])
                        .map(|(b, x)| b + delta * (x - b))
                        .collect();
                    vals[i] = f(&p);
                    pts[i] = p;
                }
            }
        }
        let cur = vals.iter().copied().fold(f64::INFINITY, f64::min);
        trace.push(cur.min(incumbent));
    }
    let (ib, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty simplex");
    (pts[ib].clone(), vals[ib], it)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iterations: 20_000,
            cycle_tolerance: 1e-14,
            initial_step: 0.5,
        };
        let r = minimize(f, &[-1.2, 1.0], &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn quadratic_in_many_dimensions() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2)).sum();
        let opts = SimplexOptions {
            max_iterations: 50_000,
            cycle_tolerance: 1e-14,
            initial_step: 0.2,
        };
        let r = minimize(f, &[0.0; 16], &opts);
        assert!(r.value < 1e-10, "{}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
