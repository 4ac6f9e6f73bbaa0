//! Minimal static SVG: axes, polylines and labels. The data files are the
//! real output; these are for a quick look.

use std::fmt::Write;

use atdev::export::{BarData, HeatMapData, HeatScale, OverlayBundle};
use atdev::{EffectCurve, EffectMatrix};

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polylines(out: &mut String, panel: &Panel, curves: &[&EffectCurve], ylim: (f64, f64)) {
    let xlim = range(curves.iter().flat_map(|c| c.grid.iter().copied()));
    let _ = write!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#888"/>"##,
        panel.x0, panel.y0, panel.w, panel.h
    );
    for (i, c) in curves.iter().enumerate() {
        let pts: Vec<String> = c
            .grid
            .iter()
            .zip(&c.values)
            .map(|(x, y)| {
                let px = panel.x0 + (x - xlim.0) / (xlim.1 - xlim.0) * panel.w;
                let py = panel.y0 + panel.h - (y - ylim.0) / (ylim.1 - ylim.0) * panel.h;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            pts.join(" ")
        );
    }
}

fn document(w: f64, h: f64, body: &str) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">{body}</svg>
"#
    )
}

pub fn overlay(b: &OverlayBundle) -> String {
    let panel = Panel {
        x0: 50.0,
        y0: 30.0,
        w: 360.0,
        h: 240.0,
    };
    let curves: Vec<&EffectCurve> = b.curves.iter().collect();
    let ylim = range(b.curves.iter().flat_map(|c| c.values.iter().copied()));
    let mut body = String::new();
    let _ = write!(body, r#"<text x="50" y="18">{} ({})</text>"#, escape(&b.name), escape(&b.group));
    polylines(&mut body, &panel, &curves, ylim);
    for (i, c) in b.curves.iter().enumerate() {
        let _ = write!(
            body,
            r#"<text x="420" y="{}" fill="{}">{}</text>"#,
            45 + 15 * i,
            COLORS[i % COLORS.len()],
            c.kind.as_str()
        );
    }
    let _ = write!(body, r#"<text x="45" y="{:.0}" text-anchor="end">{:.3}</text>"#, panel.y0 + 4.0, ylim.1);
    let _ = write!(body, r#"<text x="45" y="{:.0}" text-anchor="end">{:.3}</text>"#, panel.y0 + panel.h, ylim.0);
    document(500.0, 290.0, &body)
}

/// Small multiples with a shared y-range; row `k`, column `j`.
pub fn matrix(m: &EffectMatrix) -> String {
    let p = m.p();
    let cell = 120.0;
    let pad = 30.0;
    let ylim = range(
        (0..p)
            .flat_map(|k| (0..p).map(move |j| (k, j)))
            .filter_map(|(k, j)| m.cell(k, j))
            .flat_map(|c| c.values.iter().copied()),
    );
    let mut body = String::new();
    for j in 0..p {
        let _ = write!(
            body,
            r#"<text x="{:.0}" y="18" text-anchor="middle">{}</text>"#,
            pad + cell * (j as f64 + 0.5),
            escape(&m.names[j])
        );
    }
    for k in 0..p {
        let _ = write!(
            body,
            r#"<text x="4" y="{:.0}">{}</text>"#,
            pad + cell * (k as f64 + 0.5),
            escape(&m.names[k])
        );
        for j in 0..p {
            if let Some(c) = m.cell(k, j) {
                let panel = Panel {
                    x0: pad + cell * j as f64 + 4.0,
                    y0: pad + cell * k as f64 + 4.0,
                    w: cell - 8.0,
                    h: cell - 8.0,
                };
                polylines(&mut body, &panel, &[c], ylim);
            }
        }
    }
    let size = pad + cell * p as f64 + 10.0;
    document(size, size, &body)
}

pub fn heatmap(h: &HeatMapData) -> String {
    let p = h.names.len();
    let cell = 50.0;
    let pad = 40.0;
    let mut body = String::new();
    for (k, row) in h.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let b = h.brightness[k][j].clamp(0.0, 1.0);
            let fill = match h.scale {
                HeatScale::Signed if *v < 0.0 => format!("rgb(255,{0},{0})", (255.0 * (1.0 - b)) as u8),
                HeatScale::Signed => format!("rgb({0},{0},255)", (255.0 * (1.0 - b)) as u8),
                HeatScale::Nonnegative => {
                    let g = (255.0 * b) as u8;
                    format!("rgb({g},{g},{g})")
                }
            };
            let (x, y) = (pad + cell * j as f64, pad + cell * k as f64);
            let _ = write!(
                body,
                r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#444"/><text x="{:.0}" y="{:.0}" text-anchor="middle" fill="#f80">{v:.2}</text>"##,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    for (i, n) in h.names.iter().enumerate() {
        let c = pad + cell * (i as f64 + 0.5);
        let _ = write!(body, r#"<text x="{c:.0}" y="{:.0}" text-anchor="middle">{}</text>"#, pad - 8.0, escape(n));
        let _ = write!(body, r#"<text x="4" y="{:.0}">{}</text>"#, c + 4.0, escape(n));
    }
    let size = pad + cell * p as f64 + 10.0;
    document(size, size, &body)
}

pub fn bars(b: &BarData) -> String {
    let n = b.values.len();
    let (w, h, pad) = (40.0, 200.0, 40.0);
    let max = b.values.iter().copied().fold(0.0_f64, f64::max).max(1e-12);
    let mut body = String::new();
    let _ = write!(body, r#"<text x="{pad}" y="16">{}</text>"#, escape(&b.label));
    for (i, (name, v)) in b.names.iter().zip(&b.values).enumerate() {
        let bh = (v.max(0.0) / max) * h;
        let x = pad + w * i as f64;
        let _ = write!(
            body,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{bh:.1}" fill="#1f77b4"/><text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.3}</text>"##,
            x + 4.0,
            pad + h - bh,
            w - 8.0,
            x + w / 2.0,
            pad + h + 14.0,
            escape(name),
            x + w / 2.0,
            pad + h - bh - 4.0
        );
    }
    document(pad * 2.0 + w * n as f64, h + pad + 30.0, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use atdev::CurveKind;

    fn curve(kind: CurveKind) -> EffectCurve {
        EffectCurve {
            kind,
            j: 0,
            k: None,
            grid: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 1.0, 0.5],
            counts: vec![1, 1, 1],
            centered: false,
        }
    }

    #[test]
    fn overlay_has_one_polyline_per_curve() {
        let b = OverlayBundle {
            name: "x<1>".into(),
            j: 0,
            group: "pd_marginal_ale".into(),
            meta: atdev::export::RunMeta {
                bins: 3,
                gradient_method: "analytic".into(),
                dependence_method: "linear".into(),
                centered: false,
            },
            curves: vec![curve(CurveKind::PD), curve(CurveKind::ALE)],
        };
        let s = overlay(&b);
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("x&lt;1&gt;"));
    }

    #[test]
    fn bars_scale_to_the_largest_value() {
        let b = BarData {
            label: "dgsm".into(),
            names: vec!["a".into(), "b".into()],
            values: vec![1.0, 2.0],
            standard_errors: None,
        };
        let s = bars(&b);
        assert!(s.contains(r#"height="200.0""#));
        assert!(s.contains(r#"height="100.0""#));
    }
}
