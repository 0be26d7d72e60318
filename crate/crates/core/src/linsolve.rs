//! Real least squares by Householder QR, for the small overdetermined systems
//! in linear tomography and calibration fitting.

use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Clone, Debug)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(RealMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder QR factorization, `R` stored in the upper triangle.
struct Qr {
    r: RealMatrix,
    // Householder vectors, one per column
    reflectors: Vec<Vec<f64>>,
}

fn householder(a: &RealMatrix) -> Qr {
    let mut r = a.clone();
    let (m, n) = (r.rows, r.cols);
    let mut reflectors = Vec::with_capacity(n.min(m));
    for k in 0..n.min(m) {
        let norm: f64 = (k..m).map(|i| r.at(i, k).powi(2)).sum::<f64>().sqrt();
        let mut v: Vec<f64> = (k..m).map(|i| r.at(i, k)).collect();
        if norm == 0.0 {
            reflectors.push(vec![0.0; m - k]);
            continue;
        }
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * r.at(i, j)).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    *r.at_mut(i, j) -= f * v[i - k];
                }
            }
        }
        reflectors.push(v);
    }
    Qr { r, reflectors }
}

/// Numerical rank: count of `|R_kk|` above `rel_tol · max|R_kk|`.
pub fn rank(a: &RealMatrix, rel_tol: f64) -> usize {
    let qr = householder(a);
    let diag: Vec<f64> = (0..a.cols.min(a.rows)).map(|k| qr.r.at(k, k).abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    diag.iter().filter(|&&d| d > rel_tol * max).count()
}

/// Minimizes `|A x - b|₂`. Fails when `A` has fewer rows than columns or is
/// numerically rank deficient.
pub fn lstsq(a: &RealMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(Error::Dimension(format!("{m} rows but {} right-hand sides", b.len())));
    }
    if m < n {
        return Err(Error::input(format!(
            "underdetermined system: {m} equations for {n} unknowns"
        )));
    }
    let qr = householder(a);
    let max_diag = (0..n).map(|k| qr.r.at(k, k).abs()).fold(0.0, f64::max);
    if (0..n).any(|k| qr.r.at(k, k).abs() <= 1e-12 * max_diag) || max_diag == 0.0 {
        return Err(Error::input("rank-deficient least-squares system"));
    }
    let mut y = b.to_vec();
    for (k, v) in qr.reflectors.iter().enumerate() {
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * y[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..m {
            y[i] -= f * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| qr.r.at(k, j) * x[j]).sum();
        x[k] = (y[k] - s) / qr.r.at(k, k);
    }
    Ok(x)
}
