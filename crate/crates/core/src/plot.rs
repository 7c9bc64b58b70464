//! Minimal SVG line charts for reports.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 48.0;

/// Colours cycled over sampler series; reference curves are drawn gray.
pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
pub const REFERENCE_GRAY: &str = "#b0b0b0";

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub color: String,
    pub width: f64,
}

impl Series {
    pub fn new(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>, color: &str) -> Self {
        Self { name: name.into(), x, y, color: color.into(), width: 1.5 }
    }

    /// A gray, wider curve for oracle or exact references.
    pub fn reference(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { width: 3.0, ..Self::new(name, x, y, REFERENCE_GRAY) }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Dashed vertical markers.
    pub vlines: Vec<f64>,
    pub log_y: bool,
}

impl LinePlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), ..Default::default() }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn ty(&self, y: f64) -> f64 {
        if self.log_y {
            y.max(1e-300).log10()
        } else {
            y
        }
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for (&x, &y) in s.x.iter().zip(&s.y) {
                let y = self.ty(y);
                if x.is_finite() && y.is_finite() {
                    xr = (xr.0.min(x), xr.1.max(x));
                    yr = (yr.0.min(y), yr.1.max(y));
                }
            }
        }
        let fix = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 <= 0.0 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                r
            }
        };
        (fix(xr), fix(yr))
    }

    pub fn to_svg(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, esc(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let ylab = if self.log_y { format!("1e{}", fmt_tick(fy)) } else { fmt_tick(fy) };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                px(fx),
                HEIGHT - MARGIN_B + 16.0,
                fmt_tick(fx)
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN_L - 4.0, py(fy) + 4.0, ylab);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 10.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            esc(&self.y_label)
        );
        for v in &self.vlines {
            if *v >= x0 && *v <= x1 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{0:.1}" x2="{0:.1}" y1="{MARGIN_T}" y2="{1:.1}" stroke="black" stroke-dasharray="4 3"/>"#,
                    px(*v),
                    MARGIN_T + ph
                );
            }
        }
        for (k, ser) in self.series.iter().enumerate() {
            let pts: Vec<String> = ser
                .x
                .iter()
                .zip(&ser.y)
                .filter_map(|(&x, &y)| {
                    let y = self.ty(y);
                    (x.is_finite() && y.is_finite()).then(|| format!("{:.2},{:.2}", px(x), py(y)))
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="{}" points="{}"/>"#,
                ser.color,
                ser.width,
                pts.join(" ")
            );
            let ly = MARGIN_T + 14.0 + 14.0 * k as f64;
            let lx = WIDTH - MARGIN_R - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{}" stroke-width="{}"/><text x="{}" y="{}">{}</text>"#,
                lx + 18.0,
                ser.color,
                ser.width,
                lx + 22.0,
                ly + 4.0,
                esc(&ser.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let t = format!("{v:.3}");
        t.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_legend() {
        let p = LinePlot::new("gap <a>", "a", "gamma")
            .with(Series::new("rs", vec![0.1, 0.2, 0.3], vec![0.9, 0.5, 0.1], PALETTE[0]))
            .with(Series::reference("oracle", vec![0.1, 0.3], vec![0.5, 0.5]));
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("gap &lt;a&gt;"));
        assert!(svg.contains(REFERENCE_GRAY));
    }

    #[test]
    fn degenerate_ranges_and_nan() {
        let p = LinePlot::new("t", "x", "y").with(Series::new("c", vec![1.0, 1.0, f64::NAN], vec![2.0, 2.0, 1.0], PALETTE[1]));
        let svg = p.to_svg();
        assert!(!svg.contains("NaN"));
        let empty = LinePlot::new("t", "x", "y").to_svg();
        assert!(empty.contains("</svg>"));
    }

    #[test]
    fn log_axis_skips_nonpositive() {
        let mut p = LinePlot::new("t", "x", "y").with(Series::new("c", vec![1.0, 2.0], vec![1e-3, 1e-1], PALETTE[0]));
        p.log_y = true;
        assert!(p.to_svg().contains("1e-3"));
    }
}
