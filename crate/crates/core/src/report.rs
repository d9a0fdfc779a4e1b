//! Grouped bar plots and the final analysis report.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{scorecards_csv, ScoreCard, Verdict};
use crate::prompt::RenderedPrompt;
use crate::tables::{ConfigCsv, FeaturesCsv, TableError, CONFIG_HEADER, FEATURES_HEADER};

pub const SKY_BLUE: &str = "#87CEEB";
pub const ORANGE: &str = "#FFA500";
pub const PURPLE: &str = "#800080";

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 500.0;
const PADDING: f64 = 0.10;

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub color: String,
    pub values: Vec<f64>,
}

/// Categories along the x axis, one bar per series in each group.
#[derive(Clone, Debug, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub x_label: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
}

/// Pixel geometry of one bar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarRect {
    pub group: usize,
    pub series: usize,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Error)]
pub enum ChartError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("CSV header matches neither the features nor the configuration table")]
    UnknownShape,
    #[error("series `{series}` has {found} values for {expected} categories")]
    Ragged {
        series: String,
        found: usize,
        expected: usize,
    },
}

impl BarChart {
    pub fn from_features(csv: &FeaturesCsv) -> Self {
        BarChart {
            title: "Algorithm performance".into(),
            x_label: "algorithm".into(),
            categories: csv.rows.iter().map(|r| r.algorithm.clone()).collect(),
            series: vec![
                Series {
                    name: "best-performance".into(),
                    color: SKY_BLUE.into(),
                    values: csv.rows.iter().map(|r| r.best_performance).collect(),
                },
                Series {
                    name: "average-performance".into(),
                    color: ORANGE.into(),
                    values: csv.rows.iter().map(|r| r.average_performance).collect(),
                },
            ],
        }
    }

    pub fn from_config(csv: &ConfigCsv) -> Self {
        BarChart {
            title: "Clustering configuration".into(),
            x_label: "configuration".into(),
            categories: csv.rows.iter().map(|r| r.configuration.clone()).collect(),
            series: vec![
                Series {
                    name: "cluster-size".into(),
                    color: SKY_BLUE.into(),
                    values: csv.rows.iter().map(|r| r.cluster_size).collect(),
                },
                Series {
                    name: "volume-size".into(),
                    color: ORANGE.into(),
                    values: csv.rows.iter().map(|r| r.volume_size).collect(),
                },
                Series {
                    name: "cluster-number".into(),
                    color: PURPLE.into(),
                    values: csv.rows.iter().map(|r| r.cluster_number).collect(),
                },
            ],
        }
    }

    /// Chooses the chart by the CSV header.
    pub fn from_csv(text: &str) -> Result<Self, ChartError> {
        let header: Vec<String> = text
            .lines()
            .next()
            .unwrap_or("")
            .split(',')
            .map(|h| h.trim().to_string())
            .collect();
        let has = |cols: &[&str]| cols.iter().any(|c| header.iter().any(|h| h == c));
        if has(&FEATURES_HEADER[1..]) {
            Ok(Self::from_features(&FeaturesCsv::parse(text)?))
        } else if has(&CONFIG_HEADER[1..]) {
            Ok(Self::from_config(&ConfigCsv::parse(text)?))
        } else if text.trim().is_empty() {
            Err(TableError::Empty.into())
        } else {
            Err(ChartError::UnknownShape)
        }
    }

    /// Value range of the y axis: always includes 0, extended below for negatives.
    fn y_range(&self) -> (f64, f64) {
        let values = self.series.iter().flat_map(|s| s.values.iter().copied());
        let (lo, hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi == lo {
            (lo, lo + 1.0)
        } else {
            (lo, hi)
        }
    }

    fn plot_area(&self) -> (f64, f64, f64, f64) {
        let left = SVG_WIDTH * PADDING;
        let top = SVG_HEIGHT * PADDING;
        (left, top, SVG_WIDTH - 2.0 * left, SVG_HEIGHT - 2.0 * top)
    }

    fn check(&self) -> Result<(), ChartError> {
        for s in &self.series {
            if s.values.len() != self.categories.len() {
                return Err(ChartError::Ragged {
                    series: s.name.clone(),
                    found: s.values.len(),
                    expected: self.categories.len(),
                });
            }
        }
        Ok(())
    }

    /// Bar geometry; heights are linear in the values.
    pub fn layout(&self) -> Vec<BarRect> {
        let (left, top, width, height) = self.plot_area();
        let (lo, hi) = self.y_range();
        let scale = height / (hi - lo);
        let zero_y = top + hi * scale;
        let groups = self.categories.len().max(1) as f64;
        let group_w = width / groups;
        let bar_w = group_w * 0.8 / self.series.len().max(1) as f64;
        let mut out = Vec::new();
        for g in 0..self.categories.len() {
            for (s, series) in self.series.iter().enumerate() {
                let v = series.values[g];
                let h = v.abs() * scale;
                out.push(BarRect {
                    group: g,
                    series: s,
                    x: left + g as f64 * group_w + group_w * 0.1 + s as f64 * bar_w,
                    y: if v >= 0.0 { zero_y - h } else { zero_y },
                    width: bar_w,
                    height: h,
                });
            }
        }
        out
    }

    pub fn to_svg(&self) -> Result<String, ChartError> {
        self.check()?;
        let (left, top, width, height) = self.plot_area();
        let (lo, hi) = self.y_range();
        let zero_y = top + hi * height / (hi - lo);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">"
        );
        let _ = writeln!(svg, "  <title>{}</title>", esc(&self.title));
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
            SVG_WIDTH / 2.0,
            top / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            svg,
            "  <line class=\"axis\" x1=\"{left:.1}\" y1=\"{top:.1}\" x2=\"{left:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            top + height
        );
        let _ = writeln!(
            svg,
            "  <line class=\"axis\" x1=\"{left:.1}\" y1=\"{zero_y:.3}\" x2=\"{:.1}\" y2=\"{zero_y:.3}\" stroke=\"black\"/>",
            left + width
        );
        for (value, label) in [(hi, hi), (lo, lo)] {
            let y = top + (hi - value) * height / (hi - lo);
            let _ = writeln!(
                svg,
                "  <text class=\"tick\" x=\"{:.1}\" y=\"{y:.3}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                left - 6.0,
                fmt_value(label)
            );
        }

        for bar in self.layout() {
            let series = &self.series[bar.series];
            let value = series.values[bar.group];
            let _ = writeln!(
                svg,
                "  <rect class=\"bar\" data-series=\"{}\" x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\"/>",
                esc(&series.name),
                bar.x,
                bar.y,
                bar.width,
                bar.height,
                series.color
            );
            let label_y = if value >= 0.0 { bar.y - 4.0 } else { bar.y + bar.height + 12.0 };
            let _ = writeln!(
                svg,
                "  <text class=\"value\" x=\"{:.3}\" y=\"{label_y:.3}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
                bar.x + bar.width / 2.0,
                fmt_value(value)
            );
        }

        let group_w = width / self.categories.len().max(1) as f64;
        for (g, category) in self.categories.iter().enumerate() {
            let _ = writeln!(
                svg,
                "  <text class=\"category\" x=\"{:.3}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
                left + (g as f64 + 0.5) * group_w,
                top + height + 18.0,
                esc(category)
            );
        }
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            left + width / 2.0,
            top + height + 38.0,
            esc(&self.x_label)
        );

        let _ = writeln!(svg, "  <g class=\"legend\">");
        for (i, s) in self.series.iter().enumerate() {
            let x = left + width - 150.0;
            let y = top + 4.0 + i as f64 * 18.0;
            let _ = writeln!(
                svg,
                "    <rect class=\"legend-swatch\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>",
                s.color
            );
            let _ = writeln!(
                svg,
                "    <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
                x + 18.0,
                y + 10.0,
                esc(&s.name)
            );
        }
        let _ = writeln!(svg, "  </g>");
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a grouped bar plot for either Task C table.
pub fn render_grouped_bar(csv: &str) -> Result<String, ChartError> {
    BarChart::from_csv(csv)?.to_svg()
}

/// One prompt/answer exchange shown in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: RenderedPrompt,
    pub reply: Option<String>,
    pub verdict: Option<Verdict>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportArtifacts {
    pub task_a: Vec<Exchange>,
    pub task_b: Vec<Exchange>,
    pub task_c: Vec<Exchange>,
    /// (caption, SVG document)
    pub plots: Vec<(String, String)>,
    pub scorecards: Vec<ScoreCard>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Html,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub format: ReportFormat,
    pub sections: Vec<String>,
    pub text: String,
}

fn fence_for(content: &str) -> String {
    let mut longest = 0;
    let mut run = 0;
    for c in content.chars() {
        if c == '`' {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    "`".repeat((longest + 1).max(3))
}

fn md_code(out: &mut String, content: &str) {
    let fence = fence_for(content);
    let _ = write!(out, "{fence}text\n{content}");
    if !content.ends_with('\n') {
        out.push('\n');
    }
    let _ = writeln!(out, "{fence}\n");
}

fn html_code(out: &mut String, content: &str) {
    let _ = writeln!(out, "<pre>{}</pre>", esc(content));
}

fn write_exchange(out: &mut String, format: ReportFormat, n: usize, ex: &Exchange) {
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "### Prompt {} ({})\n", n, ex.prompt.task.as_str());
            md_code(out, &ex.prompt.wire_text());
            if let Some(reply) = &ex.reply {
                out.push_str("Reply:\n\n");
                md_code(out, reply);
            }
            if let Some(v) = &ex.verdict {
                let _ = writeln!(out, "Parsed verdict: `{v}`\n");
            }
        }
        ReportFormat::Html => {
            let _ = writeln!(out, "<h3>Prompt {} ({})</h3>", n, ex.prompt.task.as_str());
            html_code(out, &ex.prompt.wire_text());
            if let Some(reply) = &ex.reply {
                out.push_str("<p>Reply:</p>\n");
                html_code(out, reply);
            }
            if let Some(v) = &ex.verdict {
                let _ = writeln!(out, "<p>Parsed verdict: <code>{}</code></p>", esc(&v.to_string()));
            }
        }
    }
}

/// Assembles a self-contained report: task A, B, C sections, then scorecards.
pub fn assemble_report(artifacts: &ReportArtifacts, format: ReportFormat) -> Report {
    let mut sections = Vec::new();
    let mut body = String::new();
    let heading = |body: &mut String, title: &str| match format {
        ReportFormat::Markdown => {
            let _ = writeln!(body, "## {title}\n");
        }
        ReportFormat::Html => {
            let _ = writeln!(body, "<h2>{}</h2>", esc(title));
        }
    };

    for (title, exchanges) in [
        ("Task A: winner determination", &artifacts.task_a),
        ("Task B: clustering parameters", &artifacts.task_b),
    ] {
        if exchanges.is_empty() {
            continue;
        }
        sections.push(title.to_string());
        heading(&mut body, title);
        for (i, ex) in exchanges.iter().enumerate() {
            write_exchange(&mut body, format, i + 1, ex);
        }
    }

    if !artifacts.task_c.is_empty() || !artifacts.plots.is_empty() {
        let title = "Task C: summary plots";
        sections.push(title.to_string());
        heading(&mut body, title);
        for (i, ex) in artifacts.task_c.iter().enumerate() {
            write_exchange(&mut body, format, i + 1, ex);
        }
        for (caption, svg) in &artifacts.plots {
            match format {
                ReportFormat::Markdown => {
                    let _ = writeln!(body, "**{caption}**\n\n{svg}");
                }
                ReportFormat::Html => {
                    let _ = writeln!(body, "<figure>\n{svg}<figcaption>{}</figcaption>\n</figure>", esc(caption));
                }
            }
        }
    }

    if !artifacts.scorecards.is_empty() {
        let title = "Appendix: scorecards";
        sections.push(title.to_string());
        heading(&mut body, title);
        let csv = scorecards_csv(&artifacts.scorecards);
        match format {
            ReportFormat::Markdown => {
                body.push_str("| task | prompt type | model | system score | human score |\n");
                body.push_str("|---|---|---|---|---|\n");
                for line in csv.lines().skip(1) {
                    let _ = writeln!(body, "| {} |", line.split(',').collect::<Vec<_>>().join(" | "));
                }
                body.push('\n');
            }
            ReportFormat::Html => {
                body.push_str("<table>\n<tr><th>task</th><th>prompt type</th><th>model</th><th>system score</th><th>human score</th></tr>\n");
                for line in csv.lines().skip(1) {
                    body.push_str("<tr>");
                    for cell in line.split(',') {
                        let _ = write!(body, "<td>{}</td>", esc(cell));
                    }
                    body.push_str("</tr>\n");
                }
                body.push_str("</table>\n");
            }
        }
    }

    let text = match format {
        ReportFormat::Markdown => format!("# Search trajectory network analysis\n\n{body}"),
        ReportFormat::Html => format!(
            "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Search trajectory network analysis</title>\n</head>\n<body>\n<h1>Search trajectory network analysis</h1>\n{body}</body>\n</html>\n"
        ),
    };
    Report {
        format,
        sections,
        text,
    }
}
