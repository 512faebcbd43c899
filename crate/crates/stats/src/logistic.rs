//! Logistic regression with random intercepts.
//!
//! For fixed variance components the fixed effects and the group
//! intercepts are found together by penalized Newton steps. The marginal
//! likelihood uses the Laplace approximation and each log standard
//! deviation is chosen by golden-section search on it.

use nalgebra::{DMatrix, DVector};

use crate::concordance::concordance;
use crate::{Result, StatsError};

const MAX_NEWTON: usize = 100;
const LOG_SD_RANGE: (f64, f64) = (-7.0, 2.5);
const SEPARATION_COEF: f64 = 25.0;

/// A grouping factor: a level index per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFactor {
    pub name: String,
    pub levels: Vec<String>,
    pub index: Vec<usize>,
}

impl GroupFactor {
    pub fn from_labels<S: AsRef<str>>(name: &str, labels: &[S]) -> GroupFactor {
        let mut levels: Vec<String> = Vec::new();
        let mut lookup = std::collections::HashMap::new();
        let index = labels
            .iter()
            .map(|l| {
                *lookup.entry(l.as_ref().to_string()).or_insert_with(|| {
                    levels.push(l.as_ref().to_string());
                    levels.len() - 1
                })
            })
            .collect();
        GroupFactor {
            name: name.to_string(),
            levels,
            index,
        }
    }
}

/// Predictor columns (an intercept is added), outcome and grouping factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticData {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub outcome: Vec<bool>,
    pub groups: Vec<GroupFactor>,
}

impl LogisticData {
    pub fn n_obs(&self) -> usize {
        self.outcome.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_obs();
        if n == 0 {
            return Err(StatsError::Empty("logistic fit".into()));
        }
        if self.names.len() != self.columns.len() {
            return Err(StatsError::LengthMismatch {
                left: self.names.len(),
                right: self.columns.len(),
            });
        }
        for col in &self.columns {
            if col.len() != n {
                return Err(StatsError::LengthMismatch { left: col.len(), right: n });
            }
        }
        for g in &self.groups {
            if g.index.len() != n {
                return Err(StatsError::LengthMismatch {
                    left: g.index.len(),
                    right: n,
                });
            }
        }
        for (name, col) in self.names.iter().zip(&self.columns) {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite { what: name.clone() });
            }
        }
        let pos = self.outcome.iter().filter(|&&o| o).count();
        if pos == 0 || pos == n {
            return Err(StatsError::SingleClass { n });
        }
        for (name, col) in self.names.iter().zip(&self.columns) {
            if separates(col, &self.outcome) {
                return Err(StatsError::Separation { predictor: name.clone() });
            }
        }
        Ok(())
    }
}

/// True when a threshold on `x` splits the outcome classes perfectly.
fn separates(x: &[f64], y: &[bool]) -> bool {
    let (mut lo1, mut hi1, mut lo0, mut hi0) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (&v, &o) in x.iter().zip(y) {
        if o {
            lo1 = lo1.min(v);
            hi1 = hi1.max(v);
        } else {
            lo0 = lo0.min(v);
            hi0 = hi0.max(v);
        }
    }
    hi0 < lo1 || hi1 < lo0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

impl Coefficient {
    /// Wald z statistic.
    pub fn z(&self) -> f64 {
        self.estimate / self.se
    }

    /// Two-sided p < .05 by the Wald test.
    pub fn significant(&self) -> bool {
        self.z().abs() > 1.959963984540054
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: Vec<Coefficient>,
    /// Standard deviation of each factor's intercepts.
    pub group_sd: Vec<(String, f64)>,
    pub log_lik: f64,
    pub aic: f64,
    pub c: f64,
    pub n_obs: usize,
    /// Conditional fitted probabilities.
    pub fitted: Vec<f64>,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

struct Problem<'a> {
    x: DMatrix<f64>,
    y: &'a [bool],
    groups: &'a [GroupFactor],
    offsets: Vec<usize>,
    q: usize,
}

struct Inner {
    v: DVector<f64>,
    log_lik: f64,
    laplace: f64,
    cov: DMatrix<f64>,
    fitted: Vec<f64>,
}

fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Problem<'_> {
    fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Random-intercept columns of observation `i`.
    fn z_cols(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().zip(&self.offsets).map(move |(g, off)| off + g.index[i])
    }

    fn eta(&self, v: &DVector<f64>) -> Vec<f64> {
        let p = self.p();
        (0..self.y.len())
            .map(|i| {
                let fixed: f64 = (0..p).map(|j| self.x[(i, j)] * v[j]).sum();
                fixed + self.z_cols(i).map(|c| v[p + c]).sum::<f64>()
            })
            .collect()
    }

    fn log_lik(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .zip(self.y)
            .map(|(&e, &o)| if o { e } else { 0.0 } - log1pexp(e))
            .sum()
    }

    fn precision(&self, sds: &[f64]) -> Vec<f64> {
        let mut prec = vec![0.0; self.q];
        for (k, g) in self.groups.iter().enumerate() {
            for l in 0..g.levels.len() {
                prec[self.offsets[k] + l] = 1.0 / (sds[k] * sds[k]);
            }
        }
        prec
    }

    fn objective(&self, v: &DVector<f64>, prec: &[f64]) -> (f64, f64) {
        let ll = self.log_lik(&self.eta(v));
        let p = self.p();
        let pen: f64 = (0..self.q).map(|c| 0.5 * prec[c] * v[p + c] * v[p + c]).sum();
        (ll - pen, ll)
    }

    /// Gradient and negative Hessian of the penalized log-likelihood.
    fn derivatives(&self, v: &DVector<f64>, prec: &[f64]) -> (DVector<f64>, DMatrix<f64>, Vec<f64>) {
        let (p, q) = (self.p(), self.q);
        let d = p + q;
        let eta = self.eta(v);
        let mut grad = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        let mut mu = Vec::with_capacity(eta.len());
        let mut cols = Vec::with_capacity(self.groups.len());
        for (i, &e) in eta.iter().enumerate() {
            let m = sigmoid(e);
            mu.push(m);
            let r = if self.y[i] { 1.0 } else { 0.0 } - m;
            let w = m * (1.0 - m);
            cols.clear();
            cols.extend(self.z_cols(i).map(|c| p + c));
            for a in 0..p {
                let xa = self.x[(i, a)];
                grad[a] += xa * r;
                for b in a..p {
                    h[(a, b)] += w * xa * self.x[(i, b)];
                }
                for &c in &cols {
                    h[(a, c)] += w * xa;
                }
            }
            for (ci, &c) in cols.iter().enumerate() {
                grad[c] += r;
                for &c2 in &cols[ci..] {
                    let (lo, hi) = if c <= c2 { (c, c2) } else { (c2, c) };
                    h[(lo, hi)] += w;
                }
            }
        }
        for c in 0..q {
            grad[p + c] -= prec[c] * v[p + c];
            h[(p + c, p + c)] += prec[c];
        }
        h.fill_lower_triangle_with_upper_triangle();
        (grad, h, mu)
    }

    fn newton(&self, start: &DVector<f64>, sds: &[f64]) -> Result<Inner> {
        let prec = self.precision(sds);
        let mut v = start.clone();
        let (mut f, _) = self.objective(&v, &prec);
        let mut trace = vec![f];
        for _ in 0..MAX_NEWTON {
            let (grad, h, _) = self.derivatives(&v, &prec);
            let chol = h.clone().cholesky().ok_or_else(|| StatsError::Singular {
                what: "penalized Hessian".into(),
            })?;
            let step = chol.solve(&grad);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let cand = &v + &step * t;
                let (fc, _) = self.objective(&cand, &prec);
                if fc.is_finite() && fc >= f - 1e-12 * f.abs().max(1.0) {
                    accepted = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, fc)) = accepted else {
                return Err(StatsError::NonConvergence {
                    iterations: trace.len(),
                    trace,
                });
            };
            let change = (&cand - &v).amax();
            v = cand;
            let df = fc - f;
            f = fc;
            trace.push(f);
            if change < 1e-9 || (df.abs() < 1e-12 * f.abs().max(1.0) && change < 1e-6) {
                return Ok(self.finish(v, &prec, sds));
            }
        }
        Err(StatsError::NonConvergence {
            iterations: MAX_NEWTON,
            trace,
        })
    }

    fn finish(&self, v: DVector<f64>, prec: &[f64], sds: &[f64]) -> Inner {
        let (p, q) = (self.p(), self.q);
        let (_, h, mu) = self.derivatives(&v, prec);
        let (f, ll) = self.objective(&v, prec);
        let cov = h
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .unwrap_or_else(|| DMatrix::from_element(p + q, p + q, f64::NAN));
        let laplace = if q == 0 {
            ll
        } else {
            // log det of I + S Z'WZ S with S = diag(sd).
            let mut m = h.view((p, p), (q, q)).into_owned();
            let mut scale = vec![0.0; q];
            for (k, g) in self.groups.iter().enumerate() {
                for l in 0..g.levels.len() {
                    scale[self.offsets[k] + l] = sds[k];
                }
            }
            for a in 0..q {
                for b in 0..q {
                    m[(a, b)] *= scale[a] * scale[b];
                }
            }
            let logdet = m
                .cholesky()
                .map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
                .unwrap_or(f64::INFINITY);
            f - 0.5 * logdet
        };
        Inner {
            v,
            log_lik: ll,
            laplace,
            cov,
            fitted: mu,
        }
    }
}

fn golden<F: FnMut(f64) -> f64>(mut f: F, (mut a, mut b): (f64, f64), tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Fits the model. With no grouping factors this is plain maximum
/// likelihood logistic regression.
pub fn fit_logistic(data: &LogisticData) -> Result<FitResult> {
    data.validate()?;
    let n = data.n_obs();
    let p = data.columns.len() + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { data.columns[j - 1][i] });
    let mut offsets = Vec::new();
    let mut q = 0;
    for g in &data.groups {
        offsets.push(q);
        q += g.levels.len();
    }
    let prob = Problem {
        x,
        y: &data.outcome,
        groups: &data.groups,
        offsets,
        q,
    };

    let mut start = DVector::zeros(p + q);
    let rate = data.outcome.iter().filter(|&&o| o).count() as f64 / n as f64;
    start[0] = (rate / (1.0 - rate)).ln();

    let mut sds = vec![0.5; data.groups.len()];
    let mut best = prob.newton(&start, &sds)?;
    let sweeps = if data.groups.len() > 1 { 3 } else { 1 };
    for _ in 0..sweeps {
        for k in 0..data.groups.len() {
            let mut failure = None;
            let warm = best.v.clone();
            let log_sd = golden(
                |ls| {
                    let mut trial = sds.clone();
                    trial[k] = ls.exp();
                    match prob.newton(&warm, &trial) {
                        Ok(inner) => -inner.laplace,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::INFINITY
                        }
                    }
                },
                LOG_SD_RANGE,
                1e-4,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            sds[k] = log_sd.exp();
            best = prob.newton(&warm, &sds)?;
        }
    }

    let names = std::iter::once("Intercept".to_string()).chain(data.names.iter().cloned());
    let coefficients: Vec<Coefficient> = names
        .enumerate()
        .map(|(j, name)| Coefficient {
            name,
            estimate: best.v[j],
            se: best.cov[(j, j)].sqrt(),
        })
        .collect();
    if let Some(worst) = coefficients
        .iter()
        .skip(1)
        .filter(|c| c.estimate.abs() > SEPARATION_COEF)
        .max_by(|a, b| a.estimate.abs().total_cmp(&b.estimate.abs()))
    {
        return Err(StatsError::Separation {
            predictor: worst.name.clone(),
        });
    }
    let log_lik = if q == 0 { best.log_lik } else { best.laplace };
    let k = (p + data.groups.len()) as f64;
    let c = concordance(&best.fitted, &data.outcome)?;
    Ok(FitResult {
        coefficients,
        group_sd: data.groups.iter().map(|g| g.name.clone()).zip(sds).collect(),
        log_lik,
        aic: 2.0 * k - 2.0 * log_lik,
        c,
        n_obs: n,
        fitted: best.fitted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preferred {
    First,
    Second,
    Neither,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// AIC of the first fit minus AIC of the second.
    pub delta_aic: f64,
    /// C of the first fit minus C of the second.
    pub delta_c: f64,
    pub by_aic: Preferred,
    pub by_c: Preferred,
}

fn prefer(delta: f64, lower_is_better: bool) -> Preferred {
    if delta == 0.0 {
        Preferred::Neither
    } else if (delta < 0.0) == lower_is_better {
        Preferred::First
    } else {
        Preferred::Second
    }
}

pub fn compare_models(a: &FitResult, b: &FitResult) -> Result<Comparison> {
    if a.n_obs != b.n_obs {
        return Err(StatsError::MismatchedObservations { a: a.n_obs, b: b.n_obs });
    }
    let delta_aic = a.aic - b.aic;
    let delta_c = a.c - b.c;
    Ok(Comparison {
        delta_aic,
        delta_c,
        by_aic: prefer(delta_aic, true),
        by_c: prefer(delta_c, false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LogisticData {
        // Overlapping classes on one predictor.
        let x = vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, -0.2, 0.7];
        let y = vec![false, false, true, false, false, true, false, true, true, true, false, true];
        LogisticData {
            names: vec!["x".into()],
            columns: vec![x],
            outcome: y,
            groups: vec![],
        }
    }

    #[test]
    fn score_equations_hold() {
        let d = toy();
        let fit = fit_logistic(&d).unwrap();
        let (b0, b1) = (fit.coefficients[0].estimate, fit.coefficients[1].estimate);
        // At the MLE the residuals are orthogonal to every column.
        let (mut g0, mut g1) = (0.0, 0.0);
        for (xi, &yi) in d.columns[0].iter().zip(&d.outcome) {
            let r = if yi { 1.0 } else { 0.0 } - sigmoid(b0 + b1 * xi);
            g0 += r;
            g1 += r * xi;
        }
        assert!(g0.abs() < 1e-8 && g1.abs() < 1e-8);
        assert!((fit.aic - (4.0 - 2.0 * fit.log_lik)).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_matches_closed_form() {
        let mut d = toy();
        d.names.clear();
        d.columns.clear();
        let fit = fit_logistic(&d).unwrap();
        let rate = 6.0 / 12.0f64;
        assert!((fit.coefficients[0].estimate - (rate / (1.0 - rate)).ln()).abs() < 1e-9);
        assert!((fit.log_lik - 12.0 * 0.5f64.ln()).abs() < 1e-9);
        // SE of the logit of a proportion.
        assert!((fit.coefficients[0].se - (1.0 / (12.0 * rate * (1.0 - rate))).sqrt()).abs() < 1e-9);
        assert_eq!(fit.c, 0.5);
    }

    #[test]
    fn separation_is_named() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let y: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
        let noise: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let d = LogisticData {
            names: vec!["noise".into(), "x".into()],
            columns: vec![noise, x],
            outcome: y,
            groups: vec![],
        };
        match fit_logistic(&d) {
            Err(StatsError::Separation { predictor }) => assert_eq!(predictor, "x"),
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn single_class_rejected() {
        let mut d = toy();
        d.outcome = vec![true; 12];
        assert!(matches!(fit_logistic(&d), Err(StatsError::SingleClass { n: 12 })));
    }

    #[test]
    fn group_factor_levels() {
        let g = GroupFactor::from_labels("speaker", &["b", "a", "b", "c"]);
        assert_eq!(g.levels, ["b", "a", "c"]);
        assert_eq!(g.index, [0, 1, 0, 2]);
    }

    #[test]
    fn comparison() {
        let fit = fit_logistic(&toy()).unwrap();
        let same = compare_models(&fit, &fit).unwrap();
        assert_eq!(same.delta_aic, 0.0);
        assert_eq!(same.by_aic, Preferred::Neither);
        let mut worse = fit.clone();
        worse.aic += 114.0;
        worse.c -= 0.01;
        let cmp = compare_models(&fit, &worse).unwrap();
        assert_eq!((cmp.by_aic, cmp.by_c), (Preferred::First, Preferred::First));
        let mut other = fit.clone();
        other.n_obs += 1;
        assert!(compare_models(&fit, &other).is_err());
    }
}
