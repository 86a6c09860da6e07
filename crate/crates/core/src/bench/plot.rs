//! Deterministic SVG line charts for metrics directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick_label(v: f64, span: f64) -> String {
    let decimals = if span >= 10.0 {
        0
    } else if span >= 1.0 {
        2
    } else {
        (-span.log10()).ceil() as usize + 2
    };
    format!("{v:.decimals$}")
}

impl LineChart {
    pub fn to_svg(&self) -> String {
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let (x0, x1) = bounds(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.0)),
        );
        let (y0, y1) = bounds(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.1)),
        );
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            svg,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        for i in 0..=TICKS {
            let t = i as f64 / TICKS as f64;
            let xv = x0 + t * (x1 - x0);
            let yv = y0 + t * (y1 - y0);
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                svg,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/>"##,
                MARGIN_TOP,
                MARGIN_TOP + plot_h
            );
            let _ = writeln!(
                svg,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                MARGIN_TOP + plot_h + 18.0,
                tick_label(xv, x1 - x0)
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN_LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##,
                MARGIN_LEFT + plot_w
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                py + 4.0,
                tick_label(yv, y1 - y0)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let points: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                points.join(" ")
            );
            let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
            let lx = WIDTH - MARGIN_RIGHT + 14.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
                lx + 22.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 28.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// A parsed metrics table: column name to values.
struct Table {
    path: PathBuf,
    columns: BTreeMap<String, Vec<String>>,
    rows: usize,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut columns: BTreeMap<String, Vec<String>> =
            headers.iter().map(|h| (h.clone(), Vec::new())).collect();
        let mut rows = 0;
        for record in reader.records() {
            let record = record?;
            for (h, v) in headers.iter().zip(record.iter()) {
                columns
                    .get_mut(h)
                    .expect("header present")
                    .push(v.to_string());
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::NoMetrics(format!("{} has no rows", path.display())));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn strings(&self, column: &str) -> Result<&[String]> {
        self.columns
            .get(column)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Schema {
                path: self.path.clone(),
                column: column.to_string(),
            })
    }

    fn numbers(&self, column: &str) -> Result<Vec<f64>> {
        self.strings(column)?
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    path: self.path.clone(),
                    line: i as u64 + 2,
                    message: format!("column `{column}`: `{v}` is not a number"),
                })
            })
            .collect()
    }
}

fn round_series(table: &Table, label: &str, column: &str) -> Result<Series> {
    let x = table.numbers("round")?;
    let y = table.numbers(column)?;
    Ok(Series {
        label: label.to_string(),
        points: x.into_iter().zip(y).collect(),
    })
}

/// Groups summary rows by `group_col`, plotting `y_col` against `x_col`.
fn grouped_series(
    table: &Table,
    group_col: &str,
    x_col: &str,
    y_col: &str,
    label: &str,
) -> Result<Vec<Series>> {
    let groups = table.numbers(group_col)?;
    let xs = table.numbers(x_col)?;
    let ys = table.numbers(y_col)?;
    let mut by_group: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for i in 0..table.rows {
        by_group
            .entry(groups[i] as u64)
            .or_default()
            .push((xs[i], ys[i]));
    }
    Ok(by_group
        .into_iter()
        .map(|(g, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                label: format!("{label}{g}"),
                points,
            }
        })
        .collect())
}

fn poc1_charts(dir: &Path) -> Result<Vec<(PathBuf, LineChart)>> {
    let table = Table::read(&dir.join("summary.csv"))?;
    let mut out = Vec::new();
    for (x_col, group_col, group_label, x_label, name) in [
        (
            "n_devices",
            "qubits",
            "q=",
            "devices n",
            "delay_vs_devices.svg",
        ),
        (
            "qubits",
            "n_devices",
            "n=",
            "qubits q",
            "delay_vs_qubits.svg",
        ),
    ] {
        let mut series = grouped_series(
            &table,
            group_col,
            x_col,
            "modeled_delay_s",
            &format!("modeled {group_label}"),
        )?;
        series.extend(grouped_series(
            &table,
            group_col,
            x_col,
            "round_wall_clock_s",
            &format!("measured {group_label}"),
        )?);
        out.push((
            dir.join(name),
            LineChart {
                title: format!("Round delay vs {x_label}"),
                x_label: x_label.to_string(),
                y_label: "seconds per round".into(),
                series,
            },
        ));
    }
    Ok(out)
}

fn poc2_charts(dir: &Path) -> Result<Vec<(PathBuf, LineChart)>> {
    let mut runs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_stem().is_some_and(|s| s != "summary")
        })
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(Error::NoMetrics(format!(
            "no run CSVs in {}",
            dir.display()
        )));
    }
    let tables = runs
        .iter()
        .map(|p| Table::read(p))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (column, title, name) in [
        ("mean_train_loss", "Train loss", "train_loss.svg"),
        ("test_loss", "Test loss", "test_loss.svg"),
    ] {
        let series = runs
            .iter()
            .zip(&tables)
            .map(|(path, table)| {
                let label = path.file_stem().unwrap_or_default().to_string_lossy();
                round_series(table, &label, column)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((
            dir.join(name),
            LineChart {
                title: format!("{title} by layers and encoding"),
                x_label: "round".into(),
                y_label: column.into(),
                series,
            },
        ));
    }
    Ok(out)
}

fn single_run_chart(path: &Path) -> Result<(PathBuf, LineChart)> {
    let table = Table::read(path)?;
    let series = vec![
        round_series(&table, "train", "mean_train_loss")?,
        round_series(&table, "test", "test_loss")?,
    ];
    Ok((
        path.with_file_name("loss.svg"),
        LineChart {
            title: "Loss per round".into(),
            x_label: "round".into(),
            y_label: "loss".into(),
            series,
        },
    ))
}

/// Renders every chart the metrics under `dir` support: `metrics.csv` gives
/// `loss.svg`; `poc1/summary.csv` gives delay vs devices and vs qubits;
/// `poc2/*.csv` give train and test loss per round. Nothing is written unless
/// every chart renders.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut charts = Vec::new();
    let single = dir.join("metrics.csv");
    if single.is_file() {
        charts.push(single_run_chart(&single)?);
    }
    let poc1 = dir.join("poc1");
    if poc1.join("summary.csv").is_file() {
        charts.extend(poc1_charts(&poc1)?);
    }
    let poc2 = dir.join("poc2");
    if poc2.is_dir() {
        charts.extend(poc2_charts(&poc2)?);
    }
    if charts.is_empty() {
        return Err(Error::NoMetrics(format!(
            "nothing to plot under {}",
            dir.display()
        )));
    }
    let rendered: Vec<(PathBuf, String)> =
        charts.into_iter().map(|(p, c)| (p, c.to_svg())).collect();
    for (path, svg) in &rendered {
        fs::write(path, svg).map_err(|e| Error::output(path, e))?;
    }
    Ok(rendered.into_iter().map(|(p, _)| p).collect())
}
