//! CSV, JSON and SVG writers.

use std::fmt::Write as _;

use isoconquer_core::RatioTable;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::report::{Cell, Report, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

/// Six significant digits, shortest decimal form.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".into()
    } else {
        format!("{rounded}")
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Num(v) => sig6(*v),
        Cell::Bool(v) => v.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

/// Header row, then one row per record; LF line endings.
pub fn to_csv(table: &Table) -> String {
    let mut out = table.header.join(",");
    out.push('\n');
    for row in &table.rows {
        let line: Vec<String> = row.iter().map(cell_text).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub checks: Vec<isoconquer_core::experiments::Check>,
    pub results: Report,
}

pub fn to_json(output: &RunOutput) -> String {
    let mut s = serde_json::to_string_pretty(output).expect("results serialize");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> serde_json::Result<RunOutput> {
    serde_json::from_str(text)
}

/// Static heat grid: rows are `n`, columns `m`, colour by `log(ratio)`.
pub fn to_svg(table: &RatioTable, title: &str) -> String {
    const CELL_W: usize = 72;
    const CELL_H: usize = 32;
    const LEFT: usize = 70;
    const TOP: usize = 60;
    let width = LEFT + CELL_W * table.m_values.len().max(1) + 20;
    let height = TOP + CELL_H * table.n_values.len().max(1) + 30;
    let max_log = table
        .cells
        .iter()
        .map(|c| c.ratio.ln().abs())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<text x="10" y="{}">n \ m</text>"#, TOP - 10);
    for (j, m) in table.m_values.iter().enumerate() {
        let x = LEFT + j * CELL_W + CELL_W / 2;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{m}</text>"#, TOP - 10);
    }
    for (i, n) in table.n_values.iter().enumerate() {
        let y = TOP + i * CELL_H;
        let _ = writeln!(s, r#"<text x="10" y="{}">{n}</text>"#, y + CELL_H / 2 + 4);
        for (j, m) in table.m_values.iter().enumerate() {
            let Some(c) = table.cell(*n, *m) else { continue };
            let x = LEFT + j * CELL_W;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="white"/>"#,
                colour(c.ratio.ln() / max_log)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x + CELL_W / 2,
                y + CELL_H / 2 + 4,
                sig6(c.ratio)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Diverging blue (below 1) to red (above 1); `v` in `[-1, 1]`.
fn colour(v: f64) -> String {
    let v = if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |t: f64| (255.0 * (1.0 - 0.75 * t)).round() as u8;
    let (r, g, b) = if v >= 0.0 {
        (255, fade(v), fade(v))
    } else {
        (fade(-v), fade(-v), 255)
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use isoconquer_core::RatioCell;

    fn cell(n: usize, m: usize, ratio: f64) -> RatioCell {
        RatioCell {
            n,
            m,
            ratio,
            mc_se: 0.05,
            mse_global: 1.0,
            mse_pooled: 1.0 / ratio,
            flagged_replicates: 0,
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.67), "1.67");
        assert_eq!(sig6(2.881234567), "2.88123");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(123456789.0), "123457000");
    }

    #[test]
    fn empty_grid_gives_header_only() {
        let t = RatioTable {
            n_values: vec![],
            m_values: vec![],
            cells: vec![],
        };
        assert_eq!(to_csv(&Report::RatioTable(t).table()), "n,m,ratio,mc_se\n");
    }

    #[test]
    fn one_cell_one_row() {
        let t = RatioTable {
            n_values: vec![50],
            m_values: vec![5],
            cells: vec![cell(50, 5, 1.67)],
        };
        let csv = to_csv(&Report::RatioTable(t.clone()).table());
        assert_eq!(csv, "n,m,ratio,mc_se\n50,5,1.67,0.05\n");
        assert!(!csv.contains('\r'));
        let svg = to_svg(&t, "left <panel>");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(">1.67<") && svg.contains("left &lt;panel&gt;"));
    }

    #[test]
    fn colours_diverge_around_one() {
        assert_eq!(colour(0.0), "#ffffff");
        assert_eq!(colour(1.0), "#ff4040");
        assert_eq!(colour(-1.0), "#4040ff");
        assert_eq!(colour(f64::NAN), "#ffffff");
    }

    #[test]
    fn text_cells_are_quoted() {
        assert_eq!(cell_text(&Cell::Text("a,b".into())), "\"a,b\"");
        assert_eq!(cell_text(&Cell::Text("q\"".into())), "\"q\"\"\"");
    }
}
