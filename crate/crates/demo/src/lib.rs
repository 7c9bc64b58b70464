//! WebAssembly bindings for the browser demo. Each call returns a JSON
//! string with the numbers and a ready-made SVG chart.

use iamcmc::equivalence::{EquivalenceStructure, TeleportConfig};
use iamcmc::experiments::{circle_gap_curve, circle_gap_plot, gap_plot};
use iamcmc::kernels::{run_chain, GibbsScan, KernelSpec, RunSettings};
use iamcmc::plot::{LinePlot, Series, PALETTE};
use iamcmc::spectral::{a_grid, gap_curve};
use iamcmc::targets::{four_state_symmetric, FOUR_STATE_LABELS};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest chain the page will run in one call.
pub const MAX_DRAWS: usize = 2_000_000;
const TRACE_POINTS: usize = 2_000;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Gap curve of the two-bit Gibbs kernels and their teleport envelopes.
pub fn gibbs_gaps_json(a_start: f64, a_end: f64, a_step: f64) -> Result<String, String> {
    if !(a_step > 0.0) || a_end < a_start {
        return Err("need a_step > 0 and a_end >= a_start".into());
    }
    let rows = gap_curve(&a_grid(a_start, a_end, a_step)).map_err(|e| e.to_string())?;
    Ok(json!({ "rows": rows, "svg": gap_plot(&rows) }).to_string())
}

/// Exact gaps of the discretized circle RWM and its envelope over `L`.
pub fn circle_gaps_json(l_values: &[f64], nu: f64, cells: usize, delta_cells: usize) -> Result<String, String> {
    if l_values.is_empty() {
        return Err("no L values".into());
    }
    if cells > 1000 {
        return Err("at most 1000 cells".into());
    }
    let rows = circle_gap_curve(l_values, nu, cells, delta_cells).map_err(|e| e.to_string())?;
    Ok(json!({ "rows": rows, "svg": circle_gap_plot(&rows) }).to_string())
}

/// Systematic Gibbs and its teleport envelope on the symmetric four-state
/// target with corner mass `a`: state visit fractions and a running
/// fraction of `(1,1)`.
pub fn four_state_json(a: f64, n: usize, seed: u64) -> Result<String, String> {
    if n == 0 || n > MAX_DRAWS {
        return Err(format!("n must be in 1..={MAX_DRAWS}"));
    }
    let target = four_state_symmetric(a).map_err(|e| e.to_string())?;
    let gibbs = KernelSpec::GibbsFinite { scan: GibbsScan::Systematic };
    let ia = KernelSpec::envelope(
        gibbs.clone(),
        EquivalenceStructure::StatePartition { classes: vec![vec![0, 3], vec![1], vec![2]] },
        TeleportConfig::default(),
    );
    let every = n.div_ceil(TRACE_POINTS);
    let mut plot = LinePlot::new("running fraction of visits to (1,1)", "iteration", "fraction");
    let mut kernels = serde_json::Map::new();
    for (k, (name, spec)) in [("gibbs", &gibbs), ("ia_gibbs", &ia)].into_iter().enumerate() {
        let run = run_chain(spec, &target, &[0.0], &RunSettings::new(n, 0, 1, seed).with_stream(k as u64)).map_err(|e| e.to_string())?;
        let mut counts = [0usize; 4];
        let (mut xs, mut ys) = (vec![], vec![]);
        for (i, &s) in run.draws.iter().enumerate() {
            counts[s as usize] += 1;
            if (i + 1) % every == 0 || i + 1 == n {
                xs.push((i + 1) as f64);
                ys.push(counts[3] as f64 / (i + 1) as f64);
            }
        }
        let fractions: serde_json::Map<String, serde_json::Value> =
            FOUR_STATE_LABELS.iter().zip(counts).map(|(l, c)| (l.to_string(), json!(c as f64 / n as f64))).collect();
        kernels.insert(name.into(), json!({ "fractions": fractions }));
        plot = plot.with(Series::new(name, xs, ys, PALETTE[k]));
    }
    Ok(json!({ "kernels": kernels, "svg": plot.to_svg() }).to_string())
}

#[wasm_bindgen]
pub fn gibbs_gaps(a_start: f64, a_end: f64, a_step: f64) -> Result<String, JsError> {
    gibbs_gaps_json(a_start, a_end, a_step).map_err(err)
}

#[wasm_bindgen]
pub fn circle_gaps(l_values: Vec<f64>, nu: f64, cells: usize, delta_cells: usize) -> Result<String, JsError> {
    circle_gaps_json(&l_values, nu, cells, delta_cells).map_err(err)
}

#[wasm_bindgen]
pub fn four_state(a: f64, n: usize, seed: u64) -> Result<String, JsError> {
    four_state_json(a, n, seed).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn gibbs_gaps_rows_and_svg() {
        let v = parse(&gibbs_gaps_json(0.05, 0.49, 0.01).unwrap());
        assert_eq!(v["rows"].as_array().unwrap().len(), 45);
        assert!(v["svg"].as_str().unwrap().starts_with("<svg"));
        assert!(gibbs_gaps_json(0.3, 0.2, 0.01).is_err());
        assert!(gibbs_gaps_json(0.3, 0.7, 0.1).is_err());
    }

    #[test]
    fn circle_gaps_rows() {
        let v = parse(&circle_gaps_json(&[2.0, 4.0], 2.0, 80, 2).unwrap());
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0]["gamma_rwm"].as_f64().unwrap() > rows[1]["gamma_rwm"].as_f64().unwrap());
        assert!(circle_gaps_json(&[], 2.0, 80, 2).is_err());
    }

    #[test]
    fn four_state_envelope_balances_corners() {
        let v = parse(&four_state_json(0.45, 20_000, 1).unwrap());
        let f = v["kernels"]["ia_gibbs"]["fractions"]["(1,1)"].as_f64().unwrap();
        assert!((f - 0.45).abs() < 0.03, "{f}");
        assert!(four_state_json(0.45, 0, 1).is_err());
        assert!(four_state_json(0.7, 10, 1).is_err());
    }
}
