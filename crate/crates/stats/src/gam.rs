//! Univariate penalized cubic B-spline regression with the smoothing
//! parameter picked by generalized cross-validation over a grid.

use nalgebra::{DMatrix, DVector};

use crate::{Result, StatsError};

const DEGREE: usize = 3;
pub const MIN_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct GamConfig {
    pub n_splines: usize,
    pub lambda_grid: Vec<f64>,
}

/// `logspace(-3, 3, 11)`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..11).map(|i| 10f64.powf(-3.0 + 0.6 * i as f64)).collect()
}

impl Default for GamConfig {
    fn default() -> Self {
        GamConfig {
            n_splines: 5,
            lambda_grid: default_lambda_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamFit {
    /// Full knot vector, boundary knots extended past the data range.
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
    pub gcv: f64,
    /// 1 - RSS/TSS.
    pub pseudo_r2: f64,
    pub sigma2: f64,
    pub x_range: (f64, f64),
    pub n: usize,
    /// Posterior covariance of the coefficients.
    cov: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Uniform knots: `n_splines - 3` intervals over `[lo, hi]` plus three
/// extra knots on each side.
fn knot_vector(lo: f64, hi: f64, n_splines: usize) -> Vec<f64> {
    let intervals = n_splines - DEGREE;
    let h = (hi - lo) / intervals as f64;
    (0..n_splines + DEGREE + 1)
        .map(|j| lo + (j as f64 - DEGREE as f64) * h)
        .collect()
}

/// All basis values at `x` by the Cox-de Boor recursion. `x` is clamped to
/// the data range.
fn basis(knots: &[f64], x: f64) -> Vec<f64> {
    let n_basis = knots.len() - DEGREE - 1;
    let (lo, hi) = (knots[DEGREE], knots[n_basis]);
    let x = x.clamp(lo, hi);
    // Index of the interval holding x; the right end belongs to the last one.
    let mut span = DEGREE;
    while span + 1 < n_basis && x >= knots[span + 1] {
        span += 1;
    }
    let mut n = vec![0.0; DEGREE + 1];
    n[0] = 1.0;
    let mut left = vec![0.0; DEGREE + 1];
    let mut right = vec![0.0; DEGREE + 1];
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    let mut out = vec![0.0; n_basis];
    for (r, v) in n.into_iter().enumerate() {
        out[span - DEGREE + r] = v;
    }
    out
}

fn second_difference(k: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(k - 2, k);
    for i in 0..k - 2 {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    d
}

struct Candidate {
    lambda: f64,
    coef: DVector<f64>,
    inv: DMatrix<f64>,
    rss: f64,
    edf: f64,
    gcv: f64,
}

fn solve(b: &DMatrix<f64>, y: &DVector<f64>, d: &DMatrix<f64>, lambda: f64) -> Result<Candidate> {
    let n = b.nrows();
    // Least squares on the stacked system [B; sqrt(lambda) D].
    let k = b.ncols();
    let mut m = DMatrix::zeros(n + d.nrows(), k);
    m.view_mut((0, 0), (n, k)).copy_from(b);
    m.view_mut((n, 0), (d.nrows(), k)).copy_from(&(d * lambda.sqrt()));
    let mut rhs = DVector::zeros(n + d.nrows());
    rhs.rows_mut(0, n).copy_from(y);
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(StatsError::Singular { what: "spline system".into() }),
    };
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= smax * 1e-13) {
        return Err(StatsError::Singular { what: "spline system".into() });
    }
    let sinv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    let coef = vt.transpose() * &sinv * (u.transpose() * rhs);
    let inv = vt.transpose() * &sinv * &sinv * &vt;
    let fitted = b * &coef;
    let rss = (y - fitted).norm_squared();
    let edf = (&inv * (b.transpose() * b)).trace();
    let gcv = n as f64 * rss / (n as f64 - edf).powi(2);
    Ok(Candidate {
        lambda,
        coef,
        inv,
        rss,
        edf,
        gcv,
    })
}

pub fn fit_gam(x: &[f64], y: &[f64], config: &GamConfig) -> Result<GamFit> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < MIN_POINTS.max(config.n_splines + 1) {
        return Err(StatsError::TooFewPoints {
            n,
            min: MIN_POINTS.max(config.n_splines + 1),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { what: "GAM input".into() });
    }
    if config.n_splines < DEGREE + 1 || config.lambda_grid.is_empty() {
        return Err(StatsError::Empty("spline configuration".into()));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * hi.abs().max(1.0)) {
        return Err(StatsError::DegenerateRange { min: lo, max: hi });
    }
    let knots = knot_vector(lo, hi, config.n_splines);
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| basis(&knots, v)).collect();
    let b = DMatrix::from_fn(n, config.n_splines, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let d = second_difference(config.n_splines);

    let mut best: Option<Candidate> = None;
    for &lambda in &config.lambda_grid {
        let c = solve(&b, &yv, &d, lambda)?;
        if best.as_ref().is_none_or(|bst| c.gcv < bst.gcv) {
            best = Some(c);
        }
    }
    let best = best.expect("non-empty grid");
    let mean = yv.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let pseudo_r2 = if tss > 0.0 { (1.0 - best.rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let sigma2 = best.rss / (n as f64 - best.edf);
    Ok(GamFit {
        knots,
        coefficients: best.coef.iter().copied().collect(),
        lambda: best.lambda,
        edf: best.edf,
        gcv: best.gcv,
        pseudo_r2,
        sigma2,
        x_range: (lo, hi),
        n,
        cov: best.inv * sigma2,
    })
}

impl GamFit {
    pub fn predict(&self, x: f64) -> f64 {
        basis(&self.knots, x)
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }

    /// Standard error of the fitted curve at `x`.
    pub fn se(&self, x: f64) -> f64 {
        let b = DVector::from_vec(basis(&self.knots, x));
        (b.transpose() * &self.cov * &b)[(0, 0)].max(0.0).sqrt()
    }

    /// The fitted curve on `points` evenly spaced x values with a 95%
    /// interval.
    pub fn curve(&self, points: usize) -> Vec<CurvePoint> {
        let (lo, hi) = self.x_range;
        let steps = points.max(2) - 1;
        (0..=steps)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / steps as f64;
                let (y, se) = (self.predict(x), self.se(x));
                CurvePoint {
                    x,
                    y,
                    lower: y - 1.959963984540054 * se,
                    upper: y + 1.959963984540054 * se,
                }
            })
            .collect()
    }
}
