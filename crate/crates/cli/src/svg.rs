//! Small deterministic SVG plots. Coordinates are printed with fixed
//! precision so equal inputs give byte-identical files.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 50.0;

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) {
    let _ = writeln!(s, r#"<path d="M{M} {M} V{:.2} H{:.2}" stroke="black" fill="none"/>"#, H - M, W - M);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<text x="{M}" y="{}" text-anchor="start">{:.4e}</text>"#, H - M + 14.0, x_range.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.4e}</text>"#, W - M, H - M + 14.0, x_range.1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.4e}</text>"#, M - 4.0, H - M, y_range.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.4e}</text>"#, M - 4.0, M + 4.0, y_range.1);
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Histogram of the finite entries of `values`.
pub fn histogram(values: &[f64], bins: usize, title: &str, x_label: &str) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = range(finite.iter().copied());
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for v in &finite {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut s = open(title);
    axes(&mut s, x_label, "count", (lo, hi), (0.0, top));
    let bw = (W - 2.0 * M) / bins as f64;
    for (i, &c) in counts.iter().enumerate() {
        let h = (H - 2.0 * M) * c as f64 / top;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab5" stroke="white"/>"##,
            M + i as f64 * bw,
            H - M - h,
            bw,
            h
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Heat map of `log10` values on a `rows x cols` table. Missing entries are grey.
pub fn heatmap(table: &[Vec<Option<f64>>], row_labels: &[f64], col_labels: &[f64], title: &str, row_name: &str, col_name: &str) -> String {
    let logs = table.iter().flatten().filter_map(|v| v.filter(|x| *x > 0.0).map(f64::log10));
    let (lo, hi) = range(logs);
    let (nr, nc) = (table.len().max(1), table.first().map_or(1, Vec::len).max(1));
    let (cw, ch) = ((W - 2.0 * M) / nc as f64, (H - 2.0 * M) / nr as f64);
    let mut s = open(title);
    for (i, row) in table.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let fill = match v.filter(|x| *x > 0.0) {
                Some(x) => {
                    let u = (x.log10() - lo) / (hi - lo);
                    let r = (255.0 * u).round() as u8;
                    let b = (255.0 * (1.0 - u)).round() as u8;
                    format!("#{r:02x}40{b:02x}")
                }
                None => "#bbbbbb".to_string(),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                M + j as f64 * cw,
                H - M - (i + 1) as f64 * ch,
                cw,
                ch
            );
        }
    }
    for (i, l) in row_labels.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{l}</text>"#, M - 4.0, H - M - (i as f64 + 0.5) * ch + 4.0);
    }
    for (j, l) in col_labels.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{l}</text>"#, M + (j as f64 + 0.5) * cw, H - M + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(col_name));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(row_name)
    );
    let _ = writeln!(s, r#"<text x="{}" y="36" text-anchor="end">log10 range [{lo:.3}, {hi:.3}]</text>"#, W - M);
    s.push_str("</svg>\n");
    s
}

/// Polylines sharing one pair of axes.
pub fn time_series(series: &[(String, Vec<(f64, f64)>)], title: &str, x_label: &str, y_label: &str) -> String {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let (x0, x1) = range(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (y0, y1) = range(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let mut s = open(title);
    axes(&mut s, x_label, y_label, (x0, x1), (y0, y1));
    for (n, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            let px = M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
            let py = H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
            let _ = write!(d, "{}{px:.2} {py:.2}", if i == 0 { "M" } else { " L" });
        }
        let _ = writeln!(s, r#"<path d="{d}" stroke="{color}" fill="none"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, W - M - 100.0, M + 14.0 * n as f64, escape(label));
    }
    s.push_str("</svg>\n");
    s
}
