//! Grid-integration oracles.
//!
//! The log-density is evaluated on a tensor grid of nodes and normalised by
//! a Riemann sum, giving a reference posterior against which sampler output
//! is compared.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, Target, TargetError};

pub const DEFAULT_CELL_CAP: usize = 4_000_000;

/// `count` equally spaced nodes from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min < self.max && self.count >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracle {
    pub axes: Vec<GridAxis>,
    /// Row-major (last axis fastest) unnormalised log-density at the nodes.
    pub log_post: Vec<f64>,
    /// `log` of the Riemann-sum normalising constant.
    pub normalizer: f64,
}

/// One-dimensional marginal of an oracle: probability mass per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub axis: GridAxis,
    pub mass: Vec<f64>,
}

impl Marginal {
    pub fn density(&self) -> Vec<f64> {
        let h = self.axis.step();
        self.mass.iter().map(|m| m / h).collect()
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(i, m)| m * self.axis.node(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.mass.iter().enumerate().map(|(i, m)| m * (self.axis.node(i) - mu).powi(2)).sum()
    }

    /// CDF treating each node's mass as uniform over its cell
    /// `[node − h/2, node + h/2]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.axis.step();
        let mut acc = 0.0;
        for (i, m) in self.mass.iter().enumerate() {
            let lo = self.axis.node(i) - 0.5 * h;
            if x >= lo + h {
                acc += m;
            } else if x > lo {
                acc += m * (x - lo) / h;
                break;
            } else {
                break;
            }
        }
        acc.min(1.0)
    }

    /// Indices of strict interior local maxima whose mass is at least
    /// `min_rel` times the global maximum.
    pub fn local_maxima(&self, min_rel: f64) -> Vec<usize> {
        let top = self.mass.iter().cloned().fold(0.0, f64::max);
        (1..self.mass.len().saturating_sub(1))
            .filter(|&i| {
                self.mass[i] > self.mass[i - 1] && self.mass[i] >= self.mass[i + 1] && self.mass[i] >= min_rel * top
            })
            .collect()
    }
}

pub fn build_grid_oracle(target: &dyn Target, axes: &[GridAxis], cap: usize) -> Result<GridOracle, TargetError> {
    if axes.len() != target.dim() {
        return Err(TargetError::AxisCount { got: axes.len(), want: target.dim() });
    }
    if let Some(axis) = axes.iter().position(|a| !a.is_valid()) {
        return Err(TargetError::UnboundedAxis { axis });
    }
    let cells = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.count)).unwrap_or(usize::MAX);
    if cells > cap {
        return Err(TargetError::CellCapExceeded { cells, cap });
    }
    let eval = |flat: usize| {
        let mut x = vec![0.0; axes.len()];
        let mut rem = flat;
        for (d, a) in axes.iter().enumerate().rev() {
            x[d] = a.node(rem % a.count);
            rem /= a.count;
        }
        target.log_density(&x)
    };
    #[cfg(feature = "parallel")]
    let log_post: Vec<f64> = {
        use rayon::prelude::*;
        (0..cells).into_par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let log_post: Vec<f64> = (0..cells).map(eval).collect();

    let log_vol: f64 = axes.iter().map(|a| a.step().ln()).sum();
    let normalizer = log_sum_exp(&log_post) + log_vol;
    Ok(GridOracle { axes: axes.to_vec(), log_post, normalizer })
}

impl GridOracle {
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step()).product()
    }

    /// Probability mass of every node (sums to 1).
    pub fn masses(&self) -> Vec<f64> {
        let lv = self.cell_volume().ln();
        self.log_post.iter().map(|lp| (lp - self.normalizer + lv).exp()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    pub fn marginal(&self, axis: usize) -> Marginal {
        let masses = self.masses();
        let a = self.axes[axis];
        let inner: usize = self.axes[axis + 1..].iter().map(|a| a.count).product();
        let mut mass = vec![0.0; a.count];
        for (flat, m) in masses.iter().enumerate() {
            mass[(flat / inner) % a.count] += m;
        }
        Marginal { axis: a, mass }
    }

    /// `n` draws: a node chosen by mass, then jittered uniformly within
    /// its cell (clamped to the grid).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        let mut cdf = self.masses();
        let mut acc = 0.0;
        for c in cdf.iter_mut() {
            acc += *c;
            *c = acc;
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let mut flat = cdf.partition_point(|c| *c < u).min(cdf.len() - 1);
                let mut x = vec![0.0; self.axes.len()];
                for (d, a) in self.axes.iter().enumerate().rev() {
                    let h = a.step();
                    let v = a.node(flat % a.count) + (rng.random::<f64>() - 0.5) * h;
                    x[d] = v.clamp(a.min, a.max);
                    flat /= a.count;
                }
                x
            })
            .collect()
    }

    /// Header JSON (length-prefixed) followed by the log-density values as
    /// little-endian `f64`.
    pub fn to_bytes(&self, description: &str) -> Vec<u8> {
        let header = serde_json::json!({
            "format": "iamcmc-grid-oracle",
            "version": 1,
            "target": description,
            "axes": self.axes,
            "normalizer": self.normalizer,
            "values": self.log_post.len(),
        })
        .to_string();
        let mut out = Vec::with_capacity(8 + header.len() + 8 * self.log_post.len());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for v in &self.log_post {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String), TargetError> {
        let bad = |m: &str| TargetError::OracleFormat(m.to_string());
        let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("truncated header length"))?.try_into().unwrap();
        let hlen = u64::from_le_bytes(len_bytes) as usize;
        let header = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: serde_json::Value = serde_json::from_slice(header).map_err(|e| bad(&e.to_string()))?;
        if header["format"] != "iamcmc-grid-oracle" {
            return Err(bad("not a grid oracle file"));
        }
        let axes: Vec<GridAxis> = serde_json::from_value(header["axes"].clone()).map_err(|e| bad(&e.to_string()))?;
        let normalizer = header["normalizer"].as_f64().ok_or_else(|| bad("missing normalizer"))?;
        let count = header["values"].as_u64().ok_or_else(|| bad("missing value count"))? as usize;
        let body = &bytes[8 + hlen..];
        if body.len() != 8 * count || axes.iter().map(|a| a.count).product::<usize>() != count {
            return Err(bad("value count does not match axes"));
        }
        let log_post = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let desc = header["target"].as_str().unwrap_or("").to_string();
        Ok((GridOracle { axes, log_post, normalizer }, desc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{BoxUniform, StandardGaussian};

    #[test]
    fn uniform_target_gives_equal_masses() {
        let t = BoxUniform::cube(2, -1.0, 1.0);
        let o = build_grid_oracle(&t, &[GridAxis::new(-1.0, 1.0, 11), GridAxis::new(-1.0, 1.0, 7)], DEFAULT_CELL_CAP)
            .unwrap();
        let m = o.masses();
        assert!(m.iter().all(|v| (v - m[0]).abs() < 1e-15));
        assert!((o.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let o = build_grid_oracle(&StandardGaussian::new(1), &[GridAxis::new(-8.0, 8.0, 4001)], DEFAULT_CELL_CAP)
            .unwrap();
        let m = o.marginal(0);
        assert!(m.mean().abs() < 1e-3);
        assert!((m.variance() - 1.0).abs() < 1e-3);
        // Riemann normaliser of a normalised density is log 1
        assert!(o.normalizer.abs() < 1e-6);
        assert!((o.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let t = StandardGaussian::new(1);
        assert!(matches!(
            build_grid_oracle(&t, &[GridAxis::new(f64::NEG_INFINITY, 1.0, 5)], DEFAULT_CELL_CAP),
            Err(TargetError::UnboundedAxis { axis: 0 })
        ));
        assert!(matches!(
            build_grid_oracle(&t, &[GridAxis::new(-1.0, 1.0, 100)], 50),
            Err(TargetError::CellCapExceeded { .. })
        ));
        assert!(build_grid_oracle(&t, &[GridAxis::new(0.0, 1.0, 5); 2], DEFAULT_CELL_CAP).is_err());
    }

    #[test]
    fn bytes_roundtrip_is_exact() {
        let o = build_grid_oracle(&StandardGaussian::new(1), &[GridAxis::new(-8.0, 8.0, 401)], DEFAULT_CELL_CAP)
            .unwrap();
        let (back, desc) = GridOracle::from_bytes(&o.to_bytes("gauss")).unwrap();
        assert_eq!(desc, "gauss");
        assert_eq!(back.normalizer.to_bits(), o.normalizer.to_bits());
        assert!(back.log_post.iter().zip(&o.log_post).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(GridOracle::from_bytes(&[1, 2, 3]).is_err());
    }

    #[test]
    fn marginal_cdf_is_monotone_and_complete() {
        let o = build_grid_oracle(&StandardGaussian::new(1), &[GridAxis::new(-8.0, 8.0, 801)], DEFAULT_CELL_CAP)
            .unwrap();
        let m = o.marginal(0);
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((m.cdf(9.0) - 1.0).abs() < 1e-9);
        assert_eq!(m.cdf(-9.0), 0.0);
    }
}
