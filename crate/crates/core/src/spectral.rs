//! Exact analysis of finite-state kernels: stationary laws, spectral gaps,
//! conductance, and the kernel matrices of the two-bit Gibbs example and of
//! a discretized circle.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::targets::{make_circle_bimodal, Target};

/// Row sums must equal 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Detailed-balance threshold of [`reversibility_check`].
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Largest state count for exhaustive cut enumeration.
pub const MAX_EXHAUSTIVE_STATES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("row {row} sums to {sum}, not 1")]
    RowSum { row: usize, sum: f64 },
    #[error("entry ({row},{col}) = {value} is outside [0, 1]")]
    Entry { row: usize, col: usize, value: f64 },
    #[error("chain is reducible; closed classes: {classes:?}")]
    Reducible { classes: Vec<Vec<String>> },
    #[error("chain is periodic with period {period}")]
    Periodic { period: usize },
    #[error("kernel is not reversible (max violation {violation:e}); use general_gap for the non-reversible bound")]
    NotReversible { violation: f64 },
    #[error("parameter a = {0} is outside (0, 1/2)")]
    ParameterRange(f64),
    #[error("{n} states is above the exhaustive cut limit of {max}")]
    TooManyStates { n: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0}")]
    Invalid(String),
}

/// A row-stochastic matrix with state labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub labels: Vec<String>,
    pub p: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn new(labels: Vec<String>, p: DMatrix<f64>) -> Result<Self, SpectralError> {
        validate_stochastic(&p)?;
        if labels.len() != p.nrows() {
            return Err(SpectralError::Dimension(format!("{} labels for {} states", labels.len(), p.nrows())));
        }
        Ok(Self { labels, p })
    }

    pub fn unlabeled(p: DMatrix<f64>) -> Result<Self, SpectralError> {
        let labels = (0..p.nrows()).map(|i| i.to_string()).collect();
        Self::new(labels, p)
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }
}

pub fn validate_stochastic(p: &DMatrix<f64>) -> Result<(), SpectralError> {
    if p.nrows() != p.ncols() {
        return Err(SpectralError::NotSquare { rows: p.nrows(), cols: p.ncols() });
    }
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let v = p[(i, j)];
            if !(-ROW_SUM_TOL..=1.0 + ROW_SUM_TOL).contains(&v) {
                return Err(SpectralError::Entry { row: i, col: j, value: v });
            }
        }
        let sum = p.row(i).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(SpectralError::RowSum { row: i, sum });
        }
    }
    Ok(())
}

/// The kernels of the two-bit example at `π = (a, ½−a, ½−a, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsMatrices {
    /// Update `θ1 | θ2`.
    pub p1: DMatrix<f64>,
    /// Update `θ2 | θ1`.
    pub p2: DMatrix<f64>,
    /// Systematic scan `P1·P2`.
    pub p_sys: DMatrix<f64>,
    /// Random scan `½P1 + ½P2`.
    pub p_rs: DMatrix<f64>,
    /// Teleport swapping `(0,0) ↔ (1,1)`.
    pub t: DMatrix<f64>,
}

pub fn build_gibbs_matrices(a: f64) -> Result<GibbsMatrices, SpectralError> {
    if !(a > 0.0 && a < 0.5) {
        return Err(SpectralError::ParameterRange(a));
    }
    let b = 0.5 - a;
    Ok(gibbs_matrices_for(&[a, b, b, a]))
}

/// Gibbs and teleport matrices for any positive target on `{0,1}²`, state
/// index `2·θ1 + θ2`, teleport class `{(0,0), (1,1)}`.
pub fn gibbs_matrices_for(probs: &[f64; 4]) -> GibbsMatrices {
    let mut p1 = DMatrix::zeros(4, 4);
    let mut p2 = DMatrix::zeros(4, 4);
    for s in 0..4usize {
        // θ1 is bit 2, θ2 is bit 1
        for (mat, mask) in [(&mut p1, 2usize), (&mut p2, 1usize)] {
            let (s0, s1) = (s & !mask, s | mask);
            let z = probs[s0] + probs[s1];
            mat[(s, s0)] = probs[s0] / z;
            mat[(s, s1)] = probs[s1] / z;
        }
    }
    let t = teleport_matrix(probs, &[vec![0, 3], vec![1], vec![2]]);
    GibbsMatrices { p_sys: &p1 * &p2, p_rs: (&p1 + &p2) * 0.5, p1, p2, t }
}

/// `T(x, y) = π(y) / π(K(x))` for `y ∈ K(x)`; states outside every class
/// stay put.
pub fn teleport_matrix(probs: &[f64], classes: &[Vec<usize>]) -> DMatrix<f64> {
    let n = probs.len();
    let mut t = DMatrix::identity(n, n);
    for c in classes {
        let z: f64 = c.iter().map(|&j| probs[j]).sum();
        if z <= 0.0 {
            continue;
        }
        for &i in c {
            t[(i, i)] = 0.0;
            for &j in c {
                t[(i, j)] = probs[j] / z;
            }
        }
    }
    t
}

/// `½(P·T + T·P)`.
pub fn envelope(p: &DMatrix<f64>, t: &DMatrix<f64>) -> DMatrix<f64> {
    (p * t + t * p) * 0.5
}

/// `(1−ε)P + εT`.
pub fn mixture(p: &DMatrix<f64>, t: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    p * (1.0 - eps) + t * eps
}

fn support_graph(p: &DMatrix<f64>) -> DiGraph<(), ()> {
    let n = p.nrows();
    let mut g = DiGraph::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    g
}

/// Closed communicating classes (as state index lists) if there is more
/// than one communicating class, otherwise `None`.
pub fn closed_classes(p: &DMatrix<f64>) -> Option<Vec<Vec<usize>>> {
    let g = support_graph(p);
    let sccs = kosaraju_scc(&g);
    if sccs.len() <= 1 {
        return None;
    }
    let mut comp = vec![0; p.nrows()];
    for (c, nodes) in sccs.iter().enumerate() {
        for n in nodes {
            comp[n.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, nodes)| {
            nodes.iter().all(|n| (0..p.ncols()).all(|j| p[(n.index(), j)] <= 0.0 || comp[j] == *c))
        })
        .map(|(_, nodes)| {
            let mut v: Vec<usize> = nodes.iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    closed.sort();
    Some(closed)
}

/// Period of an irreducible chain: gcd of `level(u) + 1 − level(v)` over
/// all edges, with BFS levels from state 0.
pub fn period(p: &DMatrix<f64>) -> usize {
    let n = p.nrows();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if p[(u, v)] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let mut g = 0;
    for u in 0..n {
        for v in 0..n {
            if p[(u, v)] > 0.0 && level[u] != usize::MAX && level[v] != usize::MAX {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g.max(1)
}

/// Left fixed point `πP = π`, after checking irreducibility and
/// aperiodicity.
pub fn stationary_distribution(m: &TransitionMatrix) -> Result<Vec<f64>, SpectralError> {
    let p = &m.p;
    if let Some(classes) = closed_classes(p) {
        let named = classes.iter().map(|c| c.iter().map(|&i| m.labels[i].clone()).collect()).collect();
        return Err(SpectralError::Reducible { classes: named });
    }
    let d = period(p);
    if d > 1 {
        return Err(SpectralError::Periodic { period: d });
    }
    stationary_unchecked(p)
}

/// Solves `(Pᵀ − I)π = 0` with the last equation replaced by `Σπ = 1`.
pub fn stationary_unchecked(p: &DMatrix<f64>) -> Result<Vec<f64>, SpectralError> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a.lu().solve(&rhs).ok_or_else(|| SpectralError::Invalid("singular stationary system".into()))?;
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

/// `‖πP − π‖_∞`.
pub fn stationarity_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let v = DVector::from_column_slice(pi);
    let r = p.transpose() * &v - &v;
    r.amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversibilityCheck {
    pub reversible: bool,
    pub max_violation: f64,
}

/// `max |π(x)P(x,y) − π(y)P(y,x)|`.
pub fn reversibility_check(p: &DMatrix<f64>, pi: &[f64]) -> Result<ReversibilityCheck, SpectralError> {
    let n = p.nrows();
    if pi.len() != n || p.ncols() != n {
        return Err(SpectralError::Dimension(format!("pi has {} entries for a {}x{} matrix", pi.len(), n, p.ncols())));
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs());
        }
    }
    Ok(ReversibilityCheck { reversible: worst <= REVERSIBILITY_TOL, max_violation: worst })
}

/// Eigenvalues of a `π`-reversible `P`, in decreasing order, from the
/// symmetric matrix `D^{1/2} P D^{-1/2}`.
pub fn reversible_eigenvalues(p: &DMatrix<f64>, pi: &[f64]) -> Result<Vec<f64>, SpectralError> {
    let check = reversibility_check(p, pi)?;
    if !check.reversible {
        return Err(SpectralError::NotReversible { violation: check.max_violation });
    }
    let n = p.nrows();
    let sq: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let mut s = DMatrix::from_fn(n, n, |i, j| {
        if sq[i] == 0.0 || sq[j] == 0.0 {
            if i == j {
                p[(i, j)]
            } else {
                0.0
            }
        } else {
            sq[i] * p[(i, j)] / sq[j]
        }
    });
    let st = s.transpose();
    s = (s + st) * 0.5;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// `γ = 1 − |λ₂|` for a reversible kernel, `λ₂` the second largest
/// eigenvalue in absolute value.
pub fn spectral_gap(p: &DMatrix<f64>, pi: &[f64]) -> Result<f64, SpectralError> {
    let ev = reversible_eigenvalues(p, pi)?;
    Ok(gap_from_eigenvalues(&ev))
}

fn gap_from_eigenvalues(ev: &[f64]) -> f64 {
    if ev.len() < 2 {
        return 1.0;
    }
    // ev is sorted; ev[0] is the unit eigenvalue
    let second = ev[1..].iter().map(|v| v.abs()).fold(0.0, f64::max);
    (1.0 - second).clamp(0.0, 1.0)
}

/// `1 − |λ₂|` from the complex spectrum; valid for non-reversible kernels,
/// where it is a rate statement rather than an `L²` gap.
pub fn general_gap(p: &DMatrix<f64>) -> f64 {
    let mut moduli: Vec<f64> = p.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    if moduli.len() < 2 {
        return 1.0;
    }
    (1.0 - moduli[1]).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conductance {
    pub h: f64,
    /// Minimizing set `S` (state indices).
    pub cut: Vec<usize>,
    /// `false` when only sampled cuts were examined (then `h` is an upper
    /// bound).
    pub exhaustive: bool,
}

/// Exhaustive conductance `min_{0 < π(S) ≤ ½} Q(S, Sᶜ) / π(S)`.
pub fn conductance(p: &DMatrix<f64>, pi: &[f64]) -> Result<Conductance, SpectralError> {
    let n = p.nrows();
    if n > MAX_EXHAUSTIVE_STATES {
        return Err(SpectralError::TooManyStates { n, max: MAX_EXHAUSTIVE_STATES });
    }
    if pi.len() != n {
        return Err(SpectralError::Dimension(format!("pi has {} entries for {} states", pi.len(), n)));
    }
    // Gray-code walk over subsets with incremental flow updates
    let mut in_s = vec![false; n];
    let mut mass = 0.0;
    let mut flow = 0.0;
    let mut best = (f64::INFINITY, 0u64);
    let mut code: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let bit = k.trailing_zeros() as usize;
        code ^= 1 << bit;
        // flow contributions of `bit` with the rest of S
        let out: f64 = (0..n).filter(|&y| y != bit && !in_s[y]).map(|y| pi[bit] * p[(bit, y)]).sum();
        let inn: f64 = (0..n).filter(|&x| x != bit && in_s[x]).map(|x| pi[x] * p[(x, bit)]).sum();
        if in_s[bit] {
            in_s[bit] = false;
            mass -= pi[bit];
            // bit leaves S: its out-flow to Sᶜ goes, S→bit flow appears
            flow = flow - out + inn;
        } else {
            in_s[bit] = true;
            mass += pi[bit];
            flow = flow + out - inn;
        }
        if mass > 0.0 && mass <= 0.5 + 1e-12 {
            let ratio = flow.max(0.0) / mass;
            if ratio < best.0 {
                best = (ratio, code);
            }
        }
    }
    let cut = (0..n).filter(|i| best.1 >> i & 1 == 1).collect();
    Ok(Conductance { h: best.0, cut, exhaustive: true })
}

fn cut_ratio(p: &DMatrix<f64>, pi: &[f64], in_s: &[bool]) -> Option<f64> {
    let mass: f64 = pi.iter().zip(in_s).filter(|(_, s)| **s).map(|(v, _)| v).sum();
    if !(mass > 0.0 && mass <= 0.5 + 1e-12) {
        return None;
    }
    let n = pi.len();
    let mut flow = 0.0;
    for x in (0..n).filter(|&x| in_s[x]) {
        for y in (0..n).filter(|&y| !in_s[y]) {
            flow += pi[x] * p[(x, y)];
        }
    }
    Some(flow / mass)
}

/// Upper bound on the conductance from sweep cuts of the second
/// eigenvector plus `samples` random subsets. Always flagged
/// non-exhaustive.
pub fn conductance_sampled<R: Rng + ?Sized>(
    p: &DMatrix<f64>,
    pi: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Conductance, SpectralError> {
    let n = p.nrows();
    let mut best = (f64::INFINITY, vec![false; n]);
    let consider = |set: Vec<bool>, best: &mut (f64, Vec<bool>)| {
        for s in [set.clone(), set.iter().map(|v| !v).collect()] {
            if let Some(r) = cut_ratio(p, pi, &s) {
                if r < best.0 {
                    *best = (r, s);
                }
            }
        }
    };
    if let Ok(true) = reversibility_check(p, pi).map(|c| c.reversible) {
        let sq: Vec<f64> = pi.iter().map(|v| v.sqrt().max(1e-300)).collect();
        let s = DMatrix::from_fn(n, n, |i, j| sq[i] * p[(i, j)] / sq[j]);
        let s = (&s + s.transpose()) * 0.5;
        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
        if n > 1 {
            let v = eig.eigenvectors.column(order[1]);
            let f: Vec<f64> = (0..n).map(|i| v[i] / sq[i]).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|a, b| f[*a].total_cmp(&f[*b]));
            let mut set = vec![false; n];
            for &i in &idx[..n - 1] {
                set[i] = true;
                consider(set.clone(), &mut best);
            }
        }
    }
    for _ in 0..samples {
        consider((0..n).map(|_| rng.random::<bool>()).collect(), &mut best);
    }
    let cut = (0..n).filter(|&i| best.1[i]).collect();
    Ok(Conductance { h: best.0, cut, exhaustive: false })
}

/// Restricted chain on `a`: moves leaving `a` are replaced by holding.
pub fn restricted_chain(p: &DMatrix<f64>, a: &[usize]) -> DMatrix<f64> {
    let k = a.len();
    let mut r = DMatrix::from_fn(k, k, |i, j| p[(a[i], a[j])]);
    for i in 0..k {
        let inside: f64 = r.row(i).sum();
        r[(i, i)] += 1.0 - inside;
    }
    r
}

/// Aggregated chain `P_H(i, j) = Q(A_i, A_j) / (2π(A_i))` for `i ≠ j`.
pub fn aggregated_chain(p: &DMatrix<f64>, pi: &[f64], partition: &[Vec<usize>]) -> DMatrix<f64> {
    let m = partition.len();
    let mut h = DMatrix::zeros(m, m);
    for (i, ai) in partition.iter().enumerate() {
        let mass: f64 = ai.iter().map(|&x| pi[x]).sum();
        for (j, aj) in partition.iter().enumerate() {
            if i != j {
                let q: f64 = ai.iter().map(|&x| aj.iter().map(|&y| pi[x] * p[(x, y)]).sum::<f64>()).sum();
                h[(i, j)] = q / (2.0 * mass);
            }
        }
        let off: f64 = h.row(i).sum();
        h[(i, i)] = 1.0 - off;
    }
    h
}

/// Both sides of the state-decomposition inequality
/// `γ(P) ≥ ½ γ(P_H) min_i γ(P_{A_i})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub gap: f64,
    pub bound: f64,
    pub gap_aggregated: f64,
    pub min_restricted_gap: f64,
}

pub fn state_decomposition(
    p: &DMatrix<f64>,
    pi: &[f64],
    partition: &[Vec<usize>],
) -> Result<DecompositionCheck, SpectralError> {
    let gap = spectral_gap(p, pi)?;
    let pi_h: Vec<f64> = partition.iter().map(|a| a.iter().map(|&x| pi[x]).sum()).collect();
    let gap_aggregated = spectral_gap(&aggregated_chain(p, pi, partition), &pi_h)?;
    let mut min_restricted_gap = f64::INFINITY;
    for (a, mass) in partition.iter().zip(&pi_h) {
        let local: Vec<f64> = a.iter().map(|&x| pi[x] / mass).collect();
        min_restricted_gap = min_restricted_gap.min(spectral_gap(&restricted_chain(p, a), &local)?);
    }
    Ok(DecompositionCheck { gap, bound: 0.5 * gap_aggregated * min_restricted_gap, gap_aggregated, min_restricted_gap })
}

/// One row of the two-bit gap curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCurveRow {
    pub a: f64,
    pub gamma_rs: f64,
    pub gamma_env_rs: f64,
    /// `1 − |λ₂|` of `½(P_sys T + T P_sys)`, which is not reversible.
    pub gamma_env_sys: f64,
    pub env_sys_violation: f64,
}

pub fn gap_curve(a_grid: &[f64]) -> Result<Vec<GapCurveRow>, SpectralError> {
    a_grid
        .iter()
        .map(|&a| {
            let m = build_gibbs_matrices(a)?;
            let b = 0.5 - a;
            let pi = [a, b, b, a];
            let env_sys = envelope(&m.p_sys, &m.t);
            Ok(GapCurveRow {
                a,
                gamma_rs: spectral_gap(&m.p_rs, &pi)?,
                gamma_env_rs: spectral_gap(&envelope(&m.p_rs, &m.t), &pi)?,
                gamma_env_sys: general_gap(&env_sys),
                env_sys_violation: reversibility_check(&env_sys, &pi)?.max_violation,
            })
        })
        .collect()
}

/// Writes the curve with header `a,gamma_rs,gamma_env_rs,gamma_env_sys`.
pub fn write_gap_curve_csv<W: std::io::Write>(rows: &[GapCurveRow], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["a", "gamma_rs", "gamma_env_rs", "gamma_env_sys"])?;
    for r in rows {
        wr.write_record(&[r.a.to_string(), r.gamma_rs.to_string(), r.gamma_env_rs.to_string(), r.gamma_env_sys.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// `a ∈ {start, start+step, …} ≤ end`, rounded to 10 decimals.
pub fn a_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10).collect()
}

/// The circle target discretized into `cells` equal cells, with a `δ`-ball
/// random walk (uniform over the `delta_cells` neighbours on each side,
/// Metropolis acceptance) and the antipodal teleport.
#[derive(Debug, Clone)]
pub struct CircleChains {
    pub pi: Vec<f64>,
    pub rwm: DMatrix<f64>,
    pub teleport: DMatrix<f64>,
}

impl CircleChains {
    pub fn envelope(&self) -> DMatrix<f64> {
        envelope(&self.rwm, &self.teleport)
    }
}

pub fn circle_chains(l: f64, nu: f64, cells: usize, delta_cells: usize) -> Result<CircleChains, SpectralError> {
    if !cells.is_multiple_of(2) || cells < 4 {
        return Err(SpectralError::Invalid(format!("cell count {cells} must be even and at least 4")));
    }
    if delta_cells == 0 || 2 * delta_cells >= cells {
        return Err(SpectralError::Invalid(format!("delta of {delta_cells} cells does not fit {cells} cells")));
    }
    let target = make_circle_bimodal(l, nu).map_err(|e| SpectralError::Invalid(e.to_string()))?;
    let h = 4.0 * l / cells as f64;
    let logp: Vec<f64> = (0..cells).map(|i| target.log_density(&[-2.0 * l + (i as f64 + 0.5) * h])).collect();
    let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = w.iter().sum();
    let pi: Vec<f64> = w.iter().map(|v| v / z).collect();

    let q = 1.0 / (2 * delta_cells) as f64;
    let mut rwm = DMatrix::zeros(cells, cells);
    for i in 0..cells {
        let mut stay = 1.0;
        for k in 1..=delta_cells {
            for j in [(i + k) % cells, (i + cells - k) % cells] {
                let a = q * (logp[j] - logp[i]).min(0.0).exp();
                rwm[(i, j)] += a;
                stay -= a;
            }
        }
        rwm[(i, i)] += stay;
    }
    let classes: Vec<Vec<usize>> = (0..cells / 2).map(|i| vec![i, i + cells / 2]).collect();
    let teleport = teleport_matrix(&pi, &classes);
    Ok(CircleChains { pi, rwm, teleport })
}
