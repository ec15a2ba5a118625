//! Location/scatter estimation and robust outlier detection.
//!
//! The robust estimator is the Minimum Covariance Determinant: the mean and
//! covariance of the `h` observations whose covariance matrix has the smallest
//! determinant. The search follows FAST-MCD (random elemental starts improved
//! by concentration steps); small problems are enumerated exhaustively.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Default cutoff quantile for reweighting and outlier flagging.
pub const DEFAULT_QUANTILE: f64 = 0.975;

/// Subset counts up to this size are searched exhaustively in `Auto` mode.
pub const EXHAUSTIVE_LIMIT: u128 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Classical,
    McdRaw,
    McdReweighted,
}

/// Details of the raw MCD solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawMcd {
    /// Sorted indices of the optimal h-subset.
    pub subset: Vec<usize>,
    /// Determinant of the (unscaled) h-subset covariance.
    pub determinant: f64,
    pub consistency_factor: f64,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEstimate {
    pub center: DVector<f64>,
    pub scatter: DMatrix<f64>,
    pub method: EstimateMethod,
    pub h: Option<usize>,
    /// Observations that carry weight in the final estimate.
    pub support: Option<Vec<bool>>,
    pub seed: Option<u64>,
    pub raw: Option<RawMcd>,
}

impl ScatterEstimate {
    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

fn check_data(z: &DMatrix<f64>) -> Result<()> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("data contain non-finite values".into()));
    }
    let (n, p) = z.shape();
    if p == 0 {
        return Err(Error::InvalidData("data have no columns".into()));
    }
    if n <= p {
        return Err(Error::RankDeficient(format!(
            "{n} observations cannot support a {p}-dimensional scatter estimate"
        )));
    }
    Ok(())
}

/// Arithmetic mean and sample covariance (denominator `n − 1`).
pub fn classical_estimate(z: &DMatrix<f64>) -> Result<ScatterEstimate> {
    check_data(z)?;
    Ok(sample_moments(z))
}

/// Mean and covariance without the `n > p` requirement; the scatter may be
/// singular.
pub(crate) fn sample_moments(z: &DMatrix<f64>) -> ScatterEstimate {
    let all: Vec<usize> = (0..z.nrows()).collect();
    let (center, scatter) = subset_moments(z, &all);
    ScatterEstimate {
        center,
        scatter,
        method: EstimateMethod::Classical,
        h: None,
        support: None,
        seed: None,
        raw: None,
    }
}

/// How the MCD search explores h-subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetSearch {
    /// Exhaustive when the number of h-subsets is at most [`EXHAUSTIVE_LIMIT`].
    Auto,
    Sampling,
    Exhaustive,
}

#[derive(Debug, Clone)]
pub struct McdOptions {
    /// Fraction of observations in the h-subset, in `[0.5, 1]`.
    pub alpha: f64,
    pub seed: u64,
    pub reweight: bool,
    pub search: SubsetSearch,
    pub starts: usize,
    pub initial_steps: usize,
    pub refine: usize,
    pub max_steps: usize,
    pub tolerance: f64,
}

impl Default for McdOptions {
    fn default() -> Self {
        McdOptions {
            alpha: 0.75,
            seed: 0,
            reweight: true,
            search: SubsetSearch::Auto,
            starts: 500,
            initial_steps: 2,
            refine: 10,
            max_steps: 100,
            tolerance: 1e-9,
        }
    }
}

impl McdOptions {
    pub fn new(alpha: f64, seed: u64) -> Self {
        McdOptions {
            alpha,
            seed,
            ..Default::default()
        }
    }
}

/// `h = ⌊alpha·n⌋` clamped to `[⌊(n+p+1)/2⌋, n]`.
pub fn subset_size(n: usize, p: usize, alpha: f64) -> usize {
    let lower = (n + p).div_ceil(2);
    ((alpha * n as f64).floor() as usize).clamp(lower.min(n), n)
}

pub fn mcd_estimate(z: &DMatrix<f64>, opts: &McdOptions) -> Result<ScatterEstimate> {
    check_data(z)?;
    if !(0.5..=1.0).contains(&opts.alpha) {
        return Err(Error::Config(format!("alpha must lie in [0.5, 1], got {}", opts.alpha)));
    }
    let (n, p) = z.shape();
    let h = subset_size(n, p, opts.alpha);
    if h == n {
        // the only h-subset is the whole sample
        let mut est = classical_estimate(z)?;
        est.method = EstimateMethod::McdRaw;
        est.h = Some(n);
        est.support = Some(vec![true; n]);
        est.seed = Some(opts.seed);
        est.raw = Some(RawMcd {
            subset: (0..n).collect(),
            determinant: est.scatter.determinant(),
            consistency_factor: 1.0,
            exhaustive: true,
        });
        return Ok(est);
    }

    let exhaustive = match opts.search {
        SubsetSearch::Exhaustive => true,
        SubsetSearch::Sampling => false,
        SubsetSearch::Auto => binomial_at_most(n, h, EXHAUSTIVE_LIMIT),
    };
    let best = if exhaustive {
        exhaustive_search(z, h)
    } else {
        fast_mcd_search(z, h, opts)
    };
    let Some(best) = best else {
        return Err(Error::DegenerateData(format!(
            "every {h}-subset of the {n} observations has a singular covariance"
        )));
    };

    let (center, cov) = subset_moments(z, &best.subset);
    let factor = consistency_factor(p, h as f64 / n as f64);
    let raw_scatter = &cov * factor;
    let raw = RawMcd {
        subset: best.subset,
        determinant: best.log_det.exp(),
        consistency_factor: factor,
        exhaustive,
    };
    let mut support = vec![false; n];
    for &i in &raw.subset {
        support[i] = true;
    }
    let raw_est = ScatterEstimate {
        center,
        scatter: raw_scatter,
        method: EstimateMethod::McdRaw,
        h: Some(h),
        support: Some(support),
        seed: Some(opts.seed),
        raw: Some(raw),
    };
    if !opts.reweight {
        return Ok(raw_est);
    }
    reweight(z, raw_est)
}

fn reweight(z: &DMatrix<f64>, raw: ScatterEstimate) -> Result<ScatterEstimate> {
    let (n, p) = z.shape();
    let d = mahalanobis_distances(z, &raw)?;
    let cutoff = chi_squared_quantile(p, DEFAULT_QUANTILE).sqrt();
    let kept: Vec<usize> = (0..n).filter(|&i| d[i] <= cutoff).collect();
    if kept.len() <= p {
        return Err(Error::RankDeficient(format!(
            "only {} observations survive reweighting in dimension {p}",
            kept.len()
        )));
    }
    let (center, cov) = subset_moments(z, &kept);
    let factor = consistency_factor(p, DEFAULT_QUANTILE);
    let mut support = vec![false; n];
    for &i in &kept {
        support[i] = true;
    }
    Ok(ScatterEstimate {
        center,
        scatter: cov * factor,
        method: EstimateMethod::McdReweighted,
        support: Some(support),
        ..raw
    })
}

/// `q / F_{χ²_{p+2}}(χ²_{p}⁻¹(q))`: makes a covariance computed from the
/// central fraction `q` of a normal sample consistent.
pub fn consistency_factor(p: usize, q: f64) -> f64 {
    if q >= 1.0 {
        return 1.0;
    }
    let quantile = chi_squared_quantile(p, q);
    let wider = ChiSquared::new((p + 2) as f64).expect("positive degrees of freedom");
    q / wider.cdf(quantile)
}

/// Quantile of the chi-squared distribution; `+∞` at `level >= 1`.
pub fn chi_squared_quantile(df: usize, level: f64) -> f64 {
    if level >= 1.0 {
        return f64::INFINITY;
    }
    if level <= 0.0 {
        return 0.0;
    }
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(level)
}

/// Mean and covariance (denominator `m − 1`) of the listed rows.
pub(crate) fn subset_moments(z: &DMatrix<f64>, rows: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let p = z.ncols();
    let m = rows.len() as f64;
    let mut center = DVector::<f64>::zeros(p);
    for &i in rows {
        center += z.row(i).transpose();
    }
    center /= m;
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for &i in rows {
        let d = z.row(i).transpose() - &center;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= m - 1.0;
    (center, cov)
}

/// Log-determinant of a symmetric matrix, `None` when it is numerically
/// singular.
pub(crate) fn log_det(cov: &DMatrix<f64>) -> Option<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max.is_nan() || max <= 0.0 || min <= max * 1e-12 {
        return None;
    }
    Some(eig.eigenvalues.iter().map(|v| v.ln()).sum())
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub(crate) subset: Vec<usize>,
    pub(crate) log_det: f64,
}

/// Squared distances of every row from `center` under `cov`.
fn squared_distances(
    z: &DMatrix<f64>,
    center: &DVector<f64>,
    chol: &Cholesky<f64, Dyn>,
) -> Vec<f64> {
    let l = chol.l();
    (0..z.nrows())
        .map(|i| {
            let d = z.row(i).transpose() - center;
            let y = l
                .solve_lower_triangular(&d)
                .expect("Cholesky factor is nonsingular");
            y.norm_squared()
        })
        .collect()
}

fn closest(d2: &[f64], h: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d2.len()).collect();
    order.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
    let mut subset = order[..h].to_vec();
    subset.sort_unstable();
    subset
}

/// One concentration step: the `h` observations closest to the current
/// subset's mean under its covariance. Returns `None` if the current subset
/// is singular.
pub(crate) fn concentration_step(z: &DMatrix<f64>, subset: &[usize], h: usize) -> Option<Candidate> {
    let (center, cov) = subset_moments(z, subset);
    log_det(&cov)?;
    let chol = Cholesky::new(cov)?;
    let d2 = squared_distances(z, &center, &chol);
    let next = closest(&d2, h);
    let (_, next_cov) = subset_moments(z, &next);
    Some(Candidate {
        log_det: log_det(&next_cov).unwrap_or(f64::NEG_INFINITY),
        subset: next,
    })
}

/// Runs concentration steps until the subset is stable, the determinant
/// stops decreasing by more than `tol` (relative), or `max_steps` is hit.
fn concentrate(z: &DMatrix<f64>, start: Candidate, h: usize, max_steps: usize, tol: f64) -> Candidate {
    let mut cur = start;
    for _ in 0..max_steps {
        if cur.log_det == f64::NEG_INFINITY {
            break;
        }
        let Some(next) = concentration_step(z, &cur.subset, h) else {
            break;
        };
        let same = next.subset == cur.subset;
        let rel = 1.0 - (next.log_det - cur.log_det).exp();
        let improved = next.log_det <= cur.log_det;
        if improved {
            cur = next;
        }
        if same || !improved || rel.abs() < tol {
            break;
        }
    }
    cur
}

fn fast_mcd_search(z: &DMatrix<f64>, h: usize, opts: &McdOptions) -> Option<Candidate> {
    let p = z.ncols();
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds: Vec<u64> = (0..opts.starts).map(|_| master.random()).collect();

    let mut started: Vec<(usize, Candidate)> = seeds
        .par_iter()
        .enumerate()
        .filter_map(|(idx, &s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let init = elemental_start(z, h, p, &mut rng)?;
            let mut cand = init;
            for _ in 0..opts.initial_steps {
                if cand.log_det == f64::NEG_INFINITY {
                    break;
                }
                match concentration_step(z, &cand.subset, h) {
                    Some(next) => cand = next,
                    None => break,
                }
            }
            Some((idx, cand))
        })
        .collect();
    if started.is_empty() {
        return None;
    }
    started.sort_by(|a, b| a.1.log_det.total_cmp(&b.1.log_det).then(a.0.cmp(&b.0)));
    started.dedup_by(|a, b| a.1.subset == b.1.subset);
    started.truncate(opts.refine);

    let mut refined: Vec<(usize, Candidate)> = started
        .into_par_iter()
        .map(|(idx, c)| (idx, concentrate(z, c, h, opts.max_steps, opts.tolerance)))
        .collect();
    refined.sort_by(|a, b| a.1.log_det.total_cmp(&b.1.log_det).then(a.0.cmp(&b.0)));
    let best = refined.into_iter().next().map(|(_, c)| c)?;
    best.log_det.is_finite().then_some(best)
}

/// A random `(p+1)`-subset, grown with further random observations while
/// its covariance is singular, then mapped to its `h` closest observations.
fn elemental_start(z: &DMatrix<f64>, h: usize, p: usize, rng: &mut ChaCha8Rng) -> Option<Candidate> {
    let n = z.nrows();
    let mut order: Vec<usize> = sample(rng, n, p + 1).into_vec();
    let mut rest: Vec<usize> = (0..n).filter(|i| !order.contains(i)).collect();
    rest.shuffle(rng);
    let mut rest = rest.into_iter();
    loop {
        let (center, cov) = subset_moments(z, &order);
        if log_det(&cov).is_some() {
            let chol = Cholesky::new(cov)?;
            let d2 = squared_distances(z, &center, &chol);
            let subset = closest(&d2, h);
            let (_, c) = subset_moments(z, &subset);
            return Some(Candidate {
                log_det: log_det(&c).unwrap_or(f64::NEG_INFINITY),
                subset,
            });
        }
        if order.len() >= h {
            order.sort_unstable();
            return Some(Candidate {
                subset: order,
                log_det: f64::NEG_INFINITY,
            });
        }
        order.push(rest.next()?);
    }
}

fn exhaustive_search(z: &DMatrix<f64>, h: usize) -> Option<Candidate> {
    let n = z.nrows();
    let mut best: Option<Candidate> = None;
    let mut degenerate = false;
    for_each_combination(n, h, |subset| {
        let (_, cov) = subset_moments(z, subset);
        match log_det(&cov) {
            None => degenerate = true,
            Some(ld) => {
                if best.as_ref().is_none_or(|b| ld < b.log_det) {
                    best = Some(Candidate {
                        subset: subset.to_vec(),
                        log_det: ld,
                    });
                }
            }
        }
    });
    if degenerate {
        return None;
    }
    best
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[pos] += 1;
        for i in pos + 1..k {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

fn binomial_at_most(n: usize, k: usize, limit: u128) -> bool {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > limit {
            return false;
        }
    }
    true
}

/// `d_i = √((z_i − t)ᵀ C⁻¹ (z_i − t))`.
pub fn mahalanobis_distances(z: &DMatrix<f64>, est: &ScatterEstimate) -> Result<Vec<f64>> {
    if z.ncols() != est.dim() {
        return Err(Error::dim(est.dim(), z.ncols()));
    }
    if log_det(&est.scatter).is_none() {
        return Err(Error::RankDeficient("scatter matrix is singular".into()));
    }
    let chol = Cholesky::new(est.scatter.clone())
        .ok_or_else(|| Error::RankDeficient("scatter matrix is not positive definite".into()))?;
    Ok(squared_distances(z, &est.center, &chol)
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierReport {
    pub distances: Vec<f64>,
    pub cutoff: f64,
    pub flags: Vec<bool>,
    pub quantile_level: f64,
    pub df: usize,
    #[serde(skip)]
    pub estimate: ScatterEstimate,
}

impl OutlierReport {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Flags rows whose robust distance exceeds `√χ²_{p, quantile_level}`.
pub fn detect_outliers(z: &DMatrix<f64>, opts: &McdOptions, quantile_level: f64) -> Result<OutlierReport> {
    if !(quantile_level > 0.5 && quantile_level <= 1.0) {
        return Err(Error::Config(format!(
            "quantile level must lie in (0.5, 1], got {quantile_level}"
        )));
    }
    let estimate = mcd_estimate(z, opts)?;
    let distances = mahalanobis_distances(z, &estimate)?;
    let df = z.ncols();
    let cutoff = chi_squared_quantile(df, quantile_level).sqrt();
    let flags = distances.iter().map(|d| *d > cutoff).collect();
    Ok(OutlierReport {
        distances,
        cutoff,
        flags,
        quantile_level,
        df,
        estimate,
    })
}
