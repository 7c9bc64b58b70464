//! Sample-quality measurements: histogram TV and KS distances against grid
//! oracles, effective sample size, kernel density estimates, mode
//! occupancy, and posterior summary statistics.

use std::collections::BTreeMap;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::SampleRun;
use crate::targets::{GridOracle, Marginal, Target};

pub const DEFAULT_BINS: usize = 200;
pub const MIN_ESS_LEN: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("no samples")]
    Empty,
    #[error("need at least {need} samples, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("regions {0:?} and {1:?} overlap")]
    Overlap(String, String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Cell-uniform CDF of an oracle marginal, evaluated in `O(log n)`.
#[derive(Debug, Clone)]
pub struct OracleCdf {
    lo: f64,
    h: f64,
    cum: Vec<f64>,
}

impl OracleCdf {
    pub fn new(m: &Marginal) -> Self {
        let h = m.axis.step();
        let total: f64 = m.mass.iter().sum();
        let mut cum = Vec::with_capacity(m.mass.len() + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for v in &m.mass {
            acc += v / total;
            cum.push(acc);
        }
        Self { lo: m.axis.min - 0.5 * h, h, cum }
    }

    /// Support `[lo, hi]` of the cell-uniform law.
    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.lo + self.h * (self.cum.len() - 1) as f64)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.h;
        if u <= 0.0 {
            return 0.0;
        }
        let cells = self.cum.len() - 1;
        if u >= cells as f64 {
            return 1.0;
        }
        let i = u.floor() as usize;
        let f = u - i as f64;
        self.cum[i] + f * (self.cum[i + 1] - self.cum[i])
    }
}

/// Histogram TV distance between samples and an oracle marginal, with
/// `bins` equal bins over the oracle's cell range plus one bin for
/// everything outside it.
pub fn tv_distance_hist(samples: &[f64], oracle: &Marginal, bins: usize) -> Result<f64, DiagnosticsError> {
    if samples.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    if bins == 0 {
        return Err(DiagnosticsError::Invalid("bins must be positive".into()));
    }
    let cdf = OracleCdf::new(oracle);
    let (lo, hi) = cdf.range();
    let counts = histogram(samples, lo, hi, bins);
    let n = samples.len() as f64;
    let w = (hi - lo) / bins as f64;
    let mut tv = 0.0;
    for (b, c) in counts[..bins].iter().enumerate() {
        let q = cdf.eval(lo + (b + 1) as f64 * w) - cdf.eval(lo + b as f64 * w);
        tv += (*c as f64 / n - q).abs();
    }
    tv += counts[bins] as f64 / n;
    Ok((0.5 * tv).clamp(0.0, 1.0))
}

/// Histogram TV distance between two samples over `[lo, hi)` with an
/// outside bin.
pub fn tv_distance_samples(a: &[f64], b: &[f64], lo: f64, hi: f64, bins: usize) -> Result<f64, DiagnosticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    if bins == 0 || !(hi > lo) {
        return Err(DiagnosticsError::Invalid(format!("bad histogram [{lo}, {hi}) with {bins} bins")));
    }
    let (ca, cb) = (histogram(a, lo, hi, bins), histogram(b, lo, hi, bins));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let tv: f64 = ca.iter().zip(&cb).map(|(x, y)| (*x as f64 / na - *y as f64 / nb).abs()).sum();
    Ok((0.5 * tv).clamp(0.0, 1.0))
}

/// Counts over `bins` equal bins of `[lo, hi]`; the last slot counts
/// values outside (including non-finite values).
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins + 1];
    let w = (hi - lo) / bins as f64;
    for &x in samples {
        if x >= lo && x <= hi {
            let b = (((x - lo) / w) as usize).min(bins - 1);
            counts[b] += 1;
        } else {
            counts[bins] += 1;
        }
    }
    counts
}

/// One-sample Kolmogorov–Smirnov statistic against a CDF.
pub fn ks_to_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, DiagnosticsError> {
    if samples.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    Ok(d.clamp(0.0, 1.0))
}

pub fn ks_to_oracle(samples: &[f64], oracle: &Marginal) -> Result<f64, DiagnosticsError> {
    let cdf = OracleCdf::new(oracle);
    ks_to_cdf(samples, |x| cdf.eval(x))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, DiagnosticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Effective sample size; `constant` marks a zero-variance series, for
/// which `ess` is reported as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub ess: f64,
    pub constant: bool,
}

/// Autocorrelations `ρ_0..ρ_{n-1}` by FFT.
pub fn autocorrelation(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|x| Complex::new(x - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return vec![1.0; n.min(1)];
    }
    buf[..n].iter().map(|z| z.re / c0).collect()
}

/// `N / (1 + 2Σρ_k)` with Geyer's initial positive sequence: pair sums
/// `ρ_{2k} + ρ_{2k+1}` are accumulated while positive, and forced to be
/// non-increasing.
pub fn ess(series: &[f64]) -> Result<Ess, DiagnosticsError> {
    let n = series.len();
    if n < MIN_ESS_LEN {
        return Err(DiagnosticsError::TooFew { need: MIN_ESS_LEN, got: n });
    }
    let first = series[0];
    if series.iter().all(|v| *v == first) {
        return Ok(Ess { ess: 1.0, constant: true });
    }
    let rho = autocorrelation(series);
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut pair = rho[2 * k] + rho[2 * k + 1];
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        prev = pair;
        sum += pair;
        k += 1;
    }
    // Σ_{k≥0} Γ_k = ρ_0 + 2Σ_{t≥1} ρ_t with τ = 2Σ Γ_k − 1
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Ok(Ess { ess: (n as f64 / tau).min(n as f64 * 1.2), constant: false })
}

/// A density curve evaluated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoid-rule mass on the grid.
    pub fn mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Grid points of interior local maxima at least `min_rel` times the
    /// global maximum.
    pub fn local_maxima(&self, min_rel: f64) -> Vec<f64> {
        let top = self.density.iter().cloned().fold(0.0, f64::max);
        let d = &self.density;
        (1..d.len().saturating_sub(1))
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] >= min_rel * top)
            .map(|i| self.grid[i])
            .collect()
    }
}

/// Silverman's rule `0.9·min(sd, IQR/1.34)·n^{-1/5}`; falls back to the
/// non-zero one of the two spreads, then to 1.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let i = pos.floor() as usize;
        let j = (i + 1).min(s.len() - 1);
        s[i] + (pos - i as f64) * (s[j] - s[i])
    };
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => 1.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian-kernel density estimate on `grid`.
pub fn kde(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve, DiagnosticsError> {
    if samples.len() < 2 {
        return Err(DiagnosticsError::TooFew { need: 2, got: samples.len() });
    }
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(samples));
    if !(h > 0.0 && h.is_finite()) {
        return Err(DiagnosticsError::Invalid(format!("bandwidth {h}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    // kernel contributions beyond 8h are below 1e-14
    let reach = 8.0 * h;
    let eval = |g: f64| {
        let lo = sorted.partition_point(|x| *x < g - reach);
        let hi = sorted.partition_point(|x| *x <= g + reach);
        sorted[lo..hi].iter().map(|x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>() * norm
    };
    #[cfg(feature = "parallel")]
    let density = {
        use rayon::prelude::*;
        grid.par_iter().map(|g| eval(*g)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let density = grid.iter().map(|g| eval(*g)).collect();
    Ok(DensityCurve { grid: grid.to_vec(), density, bandwidth: h })
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Half-open interval `[lo, hi)` on one coordinate; a missing end is
/// unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub coord: usize,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl Interval {
    fn contains(&self, x: f64) -> bool {
        self.lo.is_none_or(|l| x >= l) && self.hi.is_none_or(|h| x < h)
    }
}

/// A labelled box (an intersection of coordinate intervals); one interval
/// gives a half-space or slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRegion {
    pub label: String,
    pub intervals: Vec<Interval>,
}

impl ModeRegion {
    pub fn new(label: impl Into<String>, intervals: Vec<Interval>) -> Self {
        Self { label: label.into(), intervals }
    }

    /// `{x : lo ≤ x_coord < hi}`.
    pub fn slab(label: impl Into<String>, coord: usize, lo: Option<f64>, hi: Option<f64>) -> Self {
        Self::new(label, vec![Interval { coord, lo, hi }])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.intervals.iter().all(|iv| x.get(iv.coord).is_some_and(|v| iv.contains(*v)))
    }

    fn bounds(&self, coord: usize) -> (f64, f64) {
        self.intervals.iter().filter(|iv| iv.coord == coord).fold((f64::NEG_INFINITY, f64::INFINITY), |(l, h), iv| {
            (l.max(iv.lo.unwrap_or(f64::NEG_INFINITY)), h.min(iv.hi.unwrap_or(f64::INFINITY)))
        })
    }

    fn overlaps(&self, other: &ModeRegion) -> bool {
        let coords: std::collections::BTreeSet<usize> =
            self.intervals.iter().chain(&other.intervals).map(|iv| iv.coord).collect();
        coords.into_iter().all(|c| {
            let (a, b) = (self.bounds(c), other.bounds(c));
            a.0.max(b.0) < a.1.min(b.1)
        })
    }
}

/// Unit-width regions around each state index of a finite target.
pub fn finite_state_regions(labels: &[&str]) -> Vec<ModeRegion> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| ModeRegion::slab(*l, 0, Some(i as f64 - 0.5), Some(i as f64 + 0.5)))
        .collect()
}

/// Fraction of rows falling in each region.
pub fn mode_fraction<'a>(
    rows: impl IntoIterator<Item = &'a [f64]>,
    regions: &[ModeRegion],
) -> Result<BTreeMap<String, f64>, DiagnosticsError> {
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if a.overlaps(b) {
                return Err(DiagnosticsError::Overlap(a.label.clone(), b.label.clone()));
            }
        }
    }
    let mut counts = vec![0usize; regions.len()];
    let mut n = 0usize;
    for row in rows {
        n += 1;
        if let Some(k) = regions.iter().position(|r| r.contains(row)) {
            counts[k] += 1;
        }
    }
    if n == 0 {
        return Err(DiagnosticsError::Empty);
    }
    Ok(regions.iter().zip(counts).map(|(r, c)| (r.label.clone(), c as f64 / n as f64)).collect())
}

/// Posterior summary statistics of a set of draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub logpost_at_mean: f64,
    pub avg_logpost: f64,
    pub sum_per_param_sd: f64,
    pub highest_logpost: f64,
}

pub fn summary_table(run: &SampleRun, target: &dyn Target) -> Result<Summary, DiagnosticsError> {
    let n = run.len();
    if n == 0 {
        return Err(DiagnosticsError::Empty);
    }
    let d = run.dim;
    let mut mean = vec![0.0; d];
    for row in run.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let mut var = vec![0.0; d];
    let mut total = 0.0;
    let mut best = f64::NEG_INFINITY;
    for row in run.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2) / n as f64;
        }
        let lp = target.log_density(row);
        total += lp;
        best = best.max(lp);
    }
    Ok(Summary {
        logpost_at_mean: target.log_density(&mean),
        avg_logpost: total / n as f64,
        sum_per_param_sd: var.iter().map(|v| v.sqrt()).sum(),
        highest_logpost: best,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub tv_to_oracle: BTreeMap<String, f64>,
    pub ks_to_oracle: BTreeMap<String, f64>,
    pub ess: BTreeMap<String, f64>,
    /// Parameters whose series was constant.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_series: Vec<String>,
    pub mode_fractions: BTreeMap<String, f64>,
    pub summary: Option<Summary>,
}

/// Computes every diagnostic available for `run`: oracle distances only
/// when an oracle is given, mode fractions only for non-empty `regions`.
pub fn build_report(
    run: &SampleRun,
    target: &dyn Target,
    oracle: Option<&GridOracle>,
    regions: &[ModeRegion],
    bins: usize,
) -> Result<DiagnosticsReport, DiagnosticsError> {
    if run.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let mut report = DiagnosticsReport::default();
    for (i, name) in run.param_names.iter().enumerate() {
        let col = run.column(i);
        if col.len() >= MIN_ESS_LEN {
            let e = ess(&col)?;
            report.ess.insert(name.clone(), e.ess);
            if e.constant {
                report.constant_series.push(name.clone());
            }
        }
        if let Some(o) = oracle {
            if i < o.axes.len() {
                let m = o.marginal(i);
                report.tv_to_oracle.insert(name.clone(), tv_distance_hist(&col, &m, bins)?);
                report.ks_to_oracle.insert(name.clone(), ks_to_oracle(&col, &m)?);
            }
        }
    }
    if !regions.is_empty() {
        report.mode_fractions = mode_fraction(run.rows(), regions)?;
    }
    report.summary = Some(summary_table(run, target)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::targets::{build_grid_oracle, GridAxis, StandardGaussian};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = stream(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    fn gaussian_marginal() -> Marginal {
        build_grid_oracle(&StandardGaussian::new(1), &[GridAxis::new(-6.0, 6.0, 1201)], 1 << 20).unwrap().marginal(0)
    }

    #[test]
    fn tv_against_own_oracle_is_small() {
        let m = gaussian_marginal();
        let o = build_grid_oracle(&StandardGaussian::new(1), &[GridAxis::new(-6.0, 6.0, 1201)], 1 << 20).unwrap();
        let draws: Vec<f64> = o.sample(&mut stream(1, 0), 1_000_000).into_iter().map(|v| v[0]).collect();
        assert!(tv_distance_hist(&draws, &m, DEFAULT_BINS).unwrap() <= 0.02);
        assert!(ks_to_oracle(&draws, &m).unwrap() <= 0.005);
    }

    #[test]
    fn tv_outside_support_is_one() {
        let m = gaussian_marginal();
        assert_eq!(tv_distance_hist(&[100.0, 200.0], &m, DEFAULT_BINS).unwrap(), 1.0);
        assert!(tv_distance_hist(&[], &m, 10).is_err());
    }

    #[test]
    fn tv_two_sample_identity_and_symmetry() {
        let a = normals(1000, 1);
        let b = normals(1000, 2);
        assert_eq!(tv_distance_samples(&a, &a, -4.0, 4.0, 50).unwrap(), 0.0);
        let ab = tv_distance_samples(&a, &b, -4.0, 4.0, 50).unwrap();
        assert_eq!(ab, tv_distance_samples(&b, &a, -4.0, 4.0, 50).unwrap());
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&a, &b).unwrap(), ks_two_sample(&b, &a).unwrap());
    }

    #[test]
    fn ks_of_uniform_grid() {
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_to_cdf(&u, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn ess_iid_and_constant() {
        let x = normals(100_000, 3);
        let e = ess(&x).unwrap();
        assert!((0.9..=1.1).contains(&(e.ess / 1e5)), "{}", e.ess);
        let c = ess(&[2.0; 50]).unwrap();
        assert!(c.constant && c.ess == 1.0);
        assert!(ess(&[1.0; 5]).is_err());
    }

    #[test]
    fn ess_ar1() {
        let rho: f64 = 0.5;
        let z = normals(100_000, 4);
        let mut x = vec![0.0; z.len()];
        for t in 1..z.len() {
            x[t] = rho * x[t - 1] + (1.0 - rho * rho).sqrt() * z[t];
        }
        let e = ess(&x).unwrap().ess / x.len() as f64;
        assert!((e - 1.0 / 3.0).abs() < 0.05, "{e}");
    }

    #[test]
    fn kde_bump_and_consistency() {
        let grid = linspace(-5.0, 5.0, 1001);
        let c = kde(&[0.0, 0.0, 0.0], &grid, Some(0.5)).unwrap();
        let peak = 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((c.density[500] - peak).abs() < 1e-12);
        assert!((c.mass() - 1.0).abs() < 1e-3);
        let x = normals(100_000, 5);
        let c = kde(&x, &linspace(-6.0, 6.0, 601), None).unwrap();
        assert!((c.mass() - 1.0).abs() < 1e-3);
        let worst = c
            .grid
            .iter()
            .zip(&c.density)
            .map(|(g, d)| (d - (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.02, "{worst}");
        assert!(kde(&[1.0], &grid, None).is_err());
    }

    #[test]
    fn kde_finds_two_modes() {
        let mut r = stream(6, 0);
        let x: Vec<f64> = (0..20_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                if r.random::<bool>() {
                    0.5 + 0.1 * z
                } else {
                    2.0 + 0.2 * z
                }
            })
            .collect();
        let modes = kde(&x, &linspace(-0.5, 3.5, 401), None).unwrap().local_maxima(0.05);
        assert_eq!(modes.len(), 2);
        assert!((modes[0] - 0.5).abs() < 0.05 && (modes[1] - 2.0).abs() < 0.1);
    }

    #[test]
    fn mode_fractions() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0], vec![0.0], vec![3.0], vec![3.0]];
        let regions = finite_state_regions(&["a", "b", "c", "d"]);
        let f = mode_fraction(rows.iter().map(|r| r.as_slice()), &regions).unwrap();
        assert_eq!(f["a"], 0.5);
        assert_eq!(f["d"], 0.5);
        assert_eq!(f["b"], 0.0);
        let overlapping = [ModeRegion::slab("x", 0, None, Some(1.0)), ModeRegion::slab("y", 0, Some(0.0), None)];
        assert!(mode_fraction(rows.iter().map(|r| r.as_slice()), &overlapping).is_err());
        let halves = [ModeRegion::slab("lo", 0, None, Some(1.0)), ModeRegion::slab("hi", 0, Some(1.0), None)];
        let f = mode_fraction(rows.iter().map(|r| r.as_slice()), &halves).unwrap();
        assert_eq!((f["lo"], f["hi"]), (0.5, 0.5));
        // boxes disjoint in a second coordinate
        let boxes = [
            ModeRegion::new("p", vec![Interval { coord: 0, lo: None, hi: Some(1.0) }]),
            ModeRegion::new(
                "q",
                vec![Interval { coord: 0, lo: None, hi: None }, Interval { coord: 1, lo: Some(5.0), hi: None }],
            ),
        ];
        assert!(mode_fraction(std::iter::empty::<&[f64]>(), &boxes).is_err());
    }

    fn run_of(rows: &[Vec<f64>]) -> SampleRun {
        let t = StandardGaussian::new(rows[0].len());
        let mut run = crate::kernels::run_chain(
            &crate::kernels::KernelSpec::RwmGauss { scale: 1.0, scales: None, adapt_target: None },
            &t,
            &rows[0],
            &crate::kernels::RunSettings::new(0, 0, 1, 0),
        )
        .unwrap();
        run.draws = rows.concat();
        run
    }

    #[test]
    fn summary_statistics() {
        let t = StandardGaussian::new(1);
        let s = summary_table(&run_of(&[vec![0.7]]), &t).unwrap();
        assert_eq!(s.avg_logpost, s.logpost_at_mean);
        assert_eq!(s.avg_logpost, s.highest_logpost);
        let s = summary_table(&run_of(&[vec![2.0], vec![2.0], vec![2.0]]), &t).unwrap();
        assert_eq!(s.sum_per_param_sd, 0.0);
        let x = normals(100_000, 7);
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        let s = summary_table(&run_of(&rows), &t).unwrap();
        assert!((s.sum_per_param_sd - 1.0).abs() < 0.01);
    }

    #[test]
    fn report_has_every_marginal() {
        let t = StandardGaussian::new(2);
        let o = build_grid_oracle(&t, &[GridAxis::new(-5.0, 5.0, 101), GridAxis::new(-5.0, 5.0, 101)], 1 << 20).unwrap();
        let rows = o.sample(&mut stream(8, 0), 2000);
        let run = run_of(&rows);
        let r = build_report(&run, &t, Some(&o), &[], DEFAULT_BINS).unwrap();
        assert_eq!(r.tv_to_oracle.len(), 2);
        assert_eq!(r.ks_to_oracle.len(), 2);
        assert!(r.ess.values().all(|e| *e > 0.0 && *e <= 2000.0 * 1.2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ess_of_shuffled_ar1_is_near_n(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let n = 100_000;
            let z = normals(n, seed);
            let mut x = vec![0.0; n];
            for t in 1..n {
                x[t] = 0.9 * x[t - 1] + z[t];
            }
            x.shuffle(&mut stream(seed, 1));
            let e = ess(&x).unwrap().ess;
            prop_assert!(e <= n as f64 * 1.2 && (e / n as f64 - 1.0).abs() < 0.1, "{}", e);
        }
    }

    proptest! {

        #[test]
        fn distances_in_unit_interval(a in proptest::collection::vec(-10.0..10.0f64, 1..50),
                                      b in proptest::collection::vec(-10.0..10.0f64, 1..50)) {
            let tv = tv_distance_samples(&a, &b, -5.0, 5.0, 20).unwrap();
            let ks = ks_two_sample(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&tv) && (0.0..=1.0).contains(&ks));
            prop_assert_eq!(ks, ks_two_sample(&b, &a).unwrap());
            prop_assert_eq!(tv_distance_samples(&a, &a, -5.0, 5.0, 20).unwrap(), 0.0);
        }
    }
}
