//! Data series: single-column CSV loading and seeded synthetic generators.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TargetError;
use crate::rng;

/// Reads a single-column CSV. A first row that does not parse as a number
/// is treated as a header.
pub fn read_series<R: Read>(reader: R) -> Result<Vec<f64>, TargetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| TargetError::Data(e.to_string()))?;
        if rec.len() != 1 {
            return Err(TargetError::Data(format!("line {}: expected one column, found {}", i + 1, rec.len())));
        }
        let field = &rec[0];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(TargetError::NonFiniteData { index: out.len() }),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(TargetError::Data(format!("line {}: cannot parse {field:?}", i + 1))),
        }
    }
    Ok(out)
}

pub fn read_series_file(path: &Path) -> Result<Vec<f64>, TargetError> {
    let f = std::fs::File::open(path).map_err(|e| TargetError::Data(format!("{}: {e}", path.display())))?;
    read_series(f)
}

/// `y_t = ε_t + θ ε_{t−1}`, `ε ~ N(0, σ²)`, with a burn-in innovation `ε_0`.
pub fn simulate_ma1(theta: f64, sigma: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 0x4d41);
    let mut prev: f64 = sigma * r.sample::<f64, _>(StandardNormal);
    (0..len)
        .map(|_| {
            let e = sigma * r.sample::<f64, _>(StandardNormal);
            let y = e + theta * prev;
            prev = e;
            y
        })
        .collect()
}

/// Draws from `p·N(μ1, σ1²) + (1−p)·N(μ2, σ2²)`.
pub fn simulate_mixture(params: [f64; 5], len: usize, seed: u64) -> Vec<f64> {
    let [m1, m2, s1, s2, p] = params;
    let mut r = rng::stream(seed, 0x4d49);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            if r.random::<f64>() < p {
                m1 + s1 * z
            } else {
                m2 + s2 * z
            }
        })
        .collect()
}

/// Draws from `N(mean, 1)`.
pub fn simulate_gaussian(mean: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 0x4347);
    (0..len).map(|_| mean + r.sample::<f64, _>(StandardNormal)).collect()
}
