use std::fmt::Write as _;
use std::io::Write;

use super::grid::GridReport;
use crate::error::{Error, Result};
use crate::goldfix::Hyperparams;
use crate::numfmt::sig;

const DIGITS: usize = 9;

/// The grid pair closest to the derived hyperparameters, rounded as the
/// grid axes list them.
pub const DERIVED_PAIR: (f64, f64) = (0.016, 0.874);

fn num(x: f64) -> String {
    sig(x, DIGITS)
}

/// Render the report as CSV text.
///
/// Leading `#` lines document the ranking conventions and where the derived
/// pair placed. Then the detail table (`eta,alpha,fold,accuracy`), the
/// summary table (`eta,alpha,mean,std`) and, if held-out accuracies were
/// recorded, `eta,alpha,fold,test_accuracy`. Reals carry 9 significant
/// digits.
pub fn render_csv(report: &GridReport) -> Result<String> {
    if report.cells.is_empty() {
        return Err(Error::format("refusing to emit an empty report"));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# top10: ten highest means; ties at the cutoff go to lower eta, then lower alpha"
    );
    let _ = writeln!(s, "# best: every cell attaining the maximum mean");
    let (de, da) = DERIVED_PAIR;
    match report.rank_of(de, da) {
        Some(r) => {
            let _ = writeln!(
                s,
                "# derived pair eta={} alpha={}: rank {} of {}",
                num(de),
                num(da),
                r,
                report.cells.len()
            );
        }
        None => {
            let _ = writeln!(
                s,
                "# derived pair eta={} alpha={}: not in grid",
                num(de),
                num(da)
            );
        }
    }
    let h = Hyperparams::derived();
    let _ = writeln!(
        s,
        "# closed form: eta={} alpha={}",
        num(h.eta),
        num(h.alpha)
    );
    let pairs = |v: &[(f64, f64)]| {
        v.iter()
            .map(|&(e, a)| format!("{}/{}", num(e), num(a)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "# best pairs: {}", pairs(&report.best));
    let _ = writeln!(s, "# top10 pairs: {}", pairs(&report.top10));
    if let Some(src) = &report.test_source {
        let _ = writeln!(s, "# test_accuracy measured on: {src}");
    }

    s.push_str("eta,alpha,fold,accuracy\n");
    for c in &report.cells {
        for (f, acc) in c.fold_accuracies.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", num(c.eta), num(c.alpha), f, num(*acc));
        }
    }
    s.push_str("eta,alpha,mean,std\n");
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(c.eta),
            num(c.alpha),
            num(c.mean),
            num(c.std)
        );
    }
    if report.cells.iter().any(|c| !c.test_accuracies.is_empty()) {
        s.push_str("eta,alpha,fold,test_accuracy\n");
        for c in &report.cells {
            for (f, acc) in c.test_accuracies.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{}", num(c.eta), num(c.alpha), f, num(*acc));
            }
        }
    }
    Ok(s)
}

/// Write [`render_csv`] output; returns the byte count.
pub fn emit_csv<W: Write>(report: &GridReport, mut out: W) -> Result<usize> {
    let text = render_csv(report)?;
    out.write_all(text.as_bytes())?;
    Ok(text.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub eta: f64,
    pub alpha: f64,
    pub fold: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub eta: f64,
    pub alpha: f64,
    pub mean: f64,
    pub std: f64,
}

/// The tables of a CSV written by [`emit_csv`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedCsv {
    pub accuracy: Vec<CsvRow>,
    pub summary: Vec<SummaryRow>,
    pub test_accuracy: Vec<CsvRow>,
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    #[derive(Clone, Copy)]
    enum Section {
        None,
        Accuracy,
        Summary,
        Test,
    }
    let mut parsed = ParsedCsv::default();
    let mut section = Section::None;
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        match line {
            "eta,alpha,fold,accuracy" => section = Section::Accuracy,
            "eta,alpha,mean,std" => section = Section::Summary,
            "eta,alpha,fold,test_accuracy" => section = Section::Test,
            _ => {
                let fields: Vec<&str> = line.split(',').collect();
                let bad = || Error::format(format!("line {}: malformed row {line:?}", n + 1));
                if fields.len() != 4 {
                    return Err(bad());
                }
                let real = |i: usize| fields[i].parse::<f64>().map_err(|_| bad());
                match section {
                    Section::None => return Err(bad()),
                    Section::Summary => parsed.summary.push(SummaryRow {
                        eta: real(0)?,
                        alpha: real(1)?,
                        mean: real(2)?,
                        std: real(3)?,
                    }),
                    Section::Accuracy | Section::Test => {
                        let row = CsvRow {
                            eta: real(0)?,
                            alpha: real(1)?,
                            fold: fields[2].parse().map_err(|_| bad())?,
                            value: real(3)?,
                        };
                        if matches!(section, Section::Accuracy) {
                            parsed.accuracy.push(row);
                        } else {
                            parsed.test_accuracy.push(row);
                        }
                    }
                }
            }
        }
    }
    Ok(parsed)
}

const CELL_W: usize = 64;
const CELL_H: usize = 36;
const LEFT: usize = 80;
const TOP: usize = 40;
const BOTTOM: usize = 50;

/// Render the report as an SVG heatmap: one rectangle per cell, learning
/// rates down the side and momentum weights along the bottom. Lightness is
/// linear in mean accuracy over the report's range; top-10 cells get a
/// green outline and the best cells a blue one.
pub fn render_heatmap(report: &GridReport) -> Result<String> {
    if report.cells.is_empty() || !report.is_grid_complete() {
        return Err(Error::format("heatmap needs a complete (eta, alpha) grid"));
    }
    let (ne, na) = (report.etas.len(), report.alphas.len());
    let lo = report
        .cells
        .iter()
        .map(|c| c.mean)
        .fold(f64::INFINITY, f64::min);
    let hi = report
        .cells
        .iter()
        .map(|c| c.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = LEFT + na * CELL_W + 20;
    let height = TOP + ne * CELL_H + BOTTOM;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">mean validation accuracy (lighter is higher)</text>"#,
        LEFT + na * CELL_W / 2
    );
    for (i, c) in report.cells.iter().enumerate() {
        let (e, a) = (i / na, i % na);
        let t = if hi > lo {
            (c.mean - lo) / (hi - lo)
        } else {
            1.0
        };
        let g = (255.0 * t).round() as u8;
        let pair = (c.eta, c.alpha);
        let stroke = if report.best.contains(&pair) {
            r##" stroke="#0000ff" stroke-width="3""##
        } else if report.top10.contains(&pair) {
            r##" stroke="#00a000" stroke-width="3""##
        } else {
            ""
        };
        let (x, y) = (LEFT + a * CELL_W, TOP + e * CELL_H);
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="rgb({g},{g},{g})"{stroke}/>"#
        );
        let ink = if g > 127 { "#000000" } else { "#ffffff" };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{}</text>"#,
            x + CELL_W / 2,
            y + CELL_H / 2 + 4,
            sig(c.mean, 3)
        );
    }
    for (e, &eta) in report.etas.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6,
            TOP + e * CELL_H + CELL_H / 2 + 4,
            sig(eta, DIGITS)
        );
    }
    for (a, &alpha) in report.alphas.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + a * CELL_W + CELL_W / 2,
            TOP + ne * CELL_H + 16,
            sig(alpha, DIGITS)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">momentum weight (alpha)</text>"#,
        LEFT + na * CELL_W / 2,
        TOP + ne * CELL_H + 38
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">learning rate (eta)</text>"#,
        TOP + ne * CELL_H / 2,
        TOP + ne * CELL_H / 2
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_heatmap<W: Write>(report: &GridReport, mut out: W) -> Result<usize> {
    let text = render_heatmap(report)?;
    out.write_all(text.as_bytes())?;
    Ok(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::default_grid;
    use crate::harness::grid::{rank, CellResult};

    fn full_report(mean: impl Fn(usize) -> f64) -> GridReport {
        let g = default_grid();
        let mut cells = vec![];
        for &e in g.etas() {
            for &a in g.alphas() {
                let m = mean(cells.len());
                cells.push(CellResult::new(e, a, vec![m, m], vec![]));
            }
        }
        rank(&GridReport::new(
            g.etas().to_vec(),
            g.alphas().to_vec(),
            cells,
        ))
    }

    #[test]
    fn one_cell_one_fold() {
        let r = rank(&GridReport::new(
            vec![0.1],
            vec![0.5],
            vec![CellResult::new(0.1, 0.5, vec![0.75], vec![])],
        ));
        let csv = render_csv(&r).unwrap();
        let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            body,
            vec![
                "eta,alpha,fold,accuracy",
                "0.1,0.5,0,0.75",
                "eta,alpha,mean,std",
                "0.1,0.5,0.75,0"
            ]
        );
        assert!(csv.contains("not in grid"));
    }

    #[test]
    fn empty_report_is_refused() {
        let r = GridReport::new(vec![], vec![], vec![]);
        assert!(matches!(emit_csv(&r, Vec::new()), Err(Error::Format(_))));
        assert!(matches!(
            emit_heatmap(&r, Vec::new()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let r = full_report(|i| 1.0 / (i as f64 + 3.0));
        let mut buf = Vec::new();
        let n = emit_csv(&r, &mut buf).unwrap();
        assert_eq!(n, buf.len());
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# derived pair eta=0.016 alpha=0.874: rank 38 of 60"));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.summary.len(), 60);
        assert_eq!(parsed.accuracy.len(), 120);
        for (row, cell) in parsed.summary.iter().zip(&r.cells) {
            assert!((row.mean - cell.mean).abs() <= 1e-9);
            assert_eq!((row.eta, row.alpha), (cell.eta, cell.alpha));
        }
    }

    #[test]
    fn heatmap_cells_and_strokes() {
        let r = full_report(|i| {
            if i == 7 || i == 13 {
                0.99
            } else {
                0.5 + i as f64 * 1e-3
            }
        });
        let svg = render_heatmap(&r).unwrap();
        assert_eq!(svg.matches("<rect").count(), 60);
        assert_eq!(svg.matches("#0000ff").count(), 2);
        assert_eq!(svg.matches("#00a000").count(), 8);
        assert_eq!(svg.matches("rgb(255,255,255)").count(), 2);
        assert!(svg.contains(">0.874<") && svg.contains(">0.0001<"));
    }

    #[test]
    fn uniform_heatmap() {
        let svg = render_heatmap(&full_report(|_| 0.5)).unwrap();
        assert_eq!(svg.matches("rgb(255,255,255)").count(), 60);
    }

    #[test]
    fn incomplete_grid_is_refused() {
        let mut r = full_report(|_| 0.5);
        r.cells.pop();
        assert!(matches!(render_heatmap(&r), Err(Error::Format(_))));
    }
}
