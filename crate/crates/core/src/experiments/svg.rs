use std::fmt::Write;

const CELL_W: f64 = 64.0;
const CELL_H: f64 = 32.0;
const MARGIN_L: f64 = 90.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

// Light yellow → orange → dark red; monotone in lightness.
const RAMP: [(f64, f64, f64); 3] = [(255.0, 247.0, 188.0), (254.0, 153.0, 41.0), (153.0, 52.0, 4.0)];

fn color(t: f64) -> String {
    if !t.is_finite() {
        return "#cccccc".into();
    }
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let u = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG grid: one coloured cell per entry with its value
/// printed inside. The first row is drawn at the bottom.
pub fn render_heatmap_svg(
    values: &[Vec<f64>],
    row_labels: &[String],
    col_labels: &[String],
    row_title: &str,
    col_title: &str,
    title: &str,
) -> String {
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let width = MARGIN_L + cols as f64 * CELL_W + 20.0;
    let height = MARGIN_T + rows as f64 * CELL_H + MARGIN_B;

    let mut s = String::new();
    let _ = writeln!(s, r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"##);
    let _ = writeln!(s, r##"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"##, width / 2.0, escape(title));
    for (i, row) in values.iter().enumerate() {
        let y = MARGIN_T + (rows - 1 - i) as f64 * CELL_H;
        for (j, &v) in row.iter().enumerate() {
            let x = MARGIN_L + j as f64 * CELL_W;
            let t = (v - lo) / span;
            let ink = if t > 0.6 { "#ffffff" } else { "#000000" };
            let _ = writeln!(s, r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="#ffffff"/>"##, color(t));
            let label = if v.is_finite() { format!("{v:.1}") } else { "–".into() };
            let _ = writeln!(
                s,
                r##"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{label}</text>"##,
                x + CELL_W / 2.0,
                y + CELL_H / 2.0 + 4.0
            );
        }
        if let Some(l) = row_labels.get(i) {
            let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="end">{}</text>"##, MARGIN_L - 6.0, y + CELL_H / 2.0 + 4.0, escape(l));
        }
    }
    let base = MARGIN_T + rows as f64 * CELL_H;
    for (j, l) in col_labels.iter().enumerate() {
        let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle">{}</text>"##, MARGIN_L + (j as f64 + 0.5) * CELL_W, base + 16.0, escape(l));
    }
    let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle">{}</text>"##, MARGIN_L + cols as f64 * CELL_W / 2.0, base + 40.0, escape(col_title));
    let _ = writeln!(
        s,
        r##"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"##,
        MARGIN_T + rows as f64 * CELL_H / 2.0,
        MARGIN_T + rows as f64 * CELL_H / 2.0,
        escape(row_title)
    );
    s.push_str("</svg>\n");
    s
}
