//! Rendering of evaluation results: a markdown report, flat CSV tables and
//! self-drawn SVG bar charts.
//!
//! Nothing here computes statistics; every number comes from a bundle field.
//! Proportions are printed with four decimals, rounding half to even.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::TriageLevel;
use crate::ingest::{Issue, StudySummary};
use crate::metrics::{CcsOutcome, EvaluationBundle, MetricName, MetricValue};
use crate::pool::{AgreementStats, PooledAdvice};
use crate::refine::RefineOutcome;
use crate::Rational;

pub const METRICS_CSV: &str = "metrics.csv";
pub const CCS_CSV: &str = "ccs.csv";
pub const SENSITIVITY_CSV: &str = "sensitivity.csv";
pub const REPORT_MD: &str = "report.md";

/// Prefix of the one line excluded from golden comparisons.
pub const TIMESTAMP_PREFIX: &str = "Generated: ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("UnknownMetric: `{0}` (known: {known})", known = chart_selectors().join(", "))]
    UnknownMetric(String),
}

/// Pilot refinement result carried into the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub pilot_items: usize,
    pub retained: Vec<String>,
    pub iterations: usize,
    pub excluded: BTreeMap<String, String>,
}

impl RefinementSummary {
    pub fn from_outcome(outcome: &RefineOutcome) -> Self {
        let mut excluded = BTreeMap::new();
        for round in &outcome.iterations {
            for stats in round {
                if stats.excluded != crate::refine::Exclusion::No {
                    excluded.insert(stats.vignette_id.clone(), stats.excluded.to_string());
                }
            }
        }
        Self {
            pilot_items: outcome.iterations.first().map_or(0, Vec::len),
            retained: outcome.retained.clone(),
            iterations: outcome.iterations.len(),
            excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyInfo {
    pub summary: StudySummary,
    pub apps: Vec<String>,
    pub inputters: Vec<String>,
    pub warnings: Vec<Issue>,
}

/// Everything a report is rendered from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool_version: String,
    /// Not part of golden comparisons.
    pub generated_at: String,
    pub study: StudyInfo,
    pub refinement: Option<RefinementSummary>,
    pub evaluation: EvaluationBundle,
}

/// Four decimals, half to even, computed on the exact value.
pub fn format_rational(value: Rational) -> String {
    let scaled = value.abs() * Rational::from_integer(10_000);
    let (floor, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem * 2;
    let mut units = floor;
    if twice > *scaled.denom() || (twice == *scaled.denom() && floor.is_odd()) {
        units += 1;
    }
    let sign = if value.is_negative() && !units.is_zero() {
        "-"
    } else {
        ""
    };
    format!("{sign}{}.{:04}", units / 10_000, units % 10_000)
}

/// Four decimals, half to even on the exact binary value.
pub fn format_float(value: f64) -> String {
    let s = format!("{value:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn format_metric(value: MetricValue) -> String {
    match value {
        MetricValue::Value(v) => format_rational(v),
        MetricValue::Undefined(reason) => format!("n/a ({})", reason.as_str()),
    }
}

fn csv_cells(value: MetricValue) -> (String, &'static str) {
    match value {
        MetricValue::Value(v) => (format_rational(v), ""),
        MetricValue::Undefined(reason) => (String::new(), reason.as_str()),
    }
}

fn kappa_cell(kappa: Option<Rational>) -> String {
    kappa.map_or_else(|| "n/a (single category)".to_string(), format_rational)
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Markdown report: study summary, agreement, metrics, CCS, sensitivity.
pub fn render_markdown(bundle: &ReportBundle) -> String {
    let eval = &bundle.evaluation;
    let info = &bundle.study;
    let mut out = String::new();

    let _ = writeln!(out, "# Symptom checker triage evaluation\n");
    let _ = writeln!(out, "{TIMESTAMP_PREFIX}{}", bundle.generated_at);
    let _ = writeln!(out, "Tool version: {}\n", bundle.tool_version);

    let _ = writeln!(out, "## Study summary\n");
    let _ = writeln!(out, "- Vignettes: {}", info.summary.n_vignettes);
    let _ = writeln!(out, "- Advice records: {}", info.summary.n_records);
    let _ = writeln!(out, "- Apps: {} ({})", info.apps.len(), info.apps.join(", "));
    let _ = writeln!(
        out,
        "- Inputters: {} ({})",
        info.inputters.len(),
        info.inputters.join(", ")
    );
    let _ = writeln!(out, "- Tie-broken pooled pairs: {}\n", format_rational(eval.tie_rate));
    let _ = writeln!(out, "| Gold level | Vignettes |\n|---|---:|");
    for level in TriageLevel::ALL.iter().rev() {
        let n = info.summary.gold_levels.get(level).copied().unwrap_or(0);
        let _ = writeln!(out, "| {} | {n} |", level.as_str());
    }
    let _ = writeln!(out, "\n| Stratum | Vignettes |\n|---|---:|");
    for (stratum, n) in &info.summary.strata {
        let _ = writeln!(out, "| {} | {n} |", md_escape(stratum));
    }
    if !info.warnings.is_empty() {
        let _ = writeln!(out, "\nValidation warnings:\n");
        for w in &info.warnings {
            let _ = writeln!(out, "- {}: {}", w.code, md_escape(&w.message));
        }
    }
    if let Some(refinement) = &bundle.refinement {
        let _ = writeln!(
            out,
            "\nPilot refinement kept {} of {} vignettes after {} round(s).",
            refinement.retained.len(),
            refinement.pilot_items,
            refinement.iterations
        );
        for (id, reason) in &refinement.excluded {
            let _ = writeln!(out, "- excluded {}: {reason}", md_escape(id));
        }
    }

    let _ = writeln!(out, "\n## Inter-rater agreement\n");
    let _ = writeln!(
        out,
        "| App | Fleiss' kappa | Percent agreement | Items | Raters |\n|---|---:|---:|---:|---:|"
    );
    for a in sorted_agreement(&eval.agreement) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            md_escape(&a.app_id),
            kappa_cell(a.fleiss_kappa),
            format_rational(a.percent_agreement),
            a.n_items,
            a.n_raters
        );
    }

    let _ = writeln!(out, "\n## Metrics (default mapping)\n");
    let _ = write!(out, "| App | Cases |");
    for metric in MetricName::ALL {
        let _ = write!(out, " {} |", metric.label());
    }
    let _ = write!(out, "\n|---|---:|");
    for _ in MetricName::ALL {
        let _ = write!(out, "---:|");
    }
    out.push('\n');
    for app in eval.metrics() {
        let _ = write!(out, "| {} | {} |", md_escape(&app.app_id), app.n_cases);
        for metric in MetricName::ALL {
            let _ = write!(out, " {} |", format_metric(app.get(metric)));
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "\nAbstentions count as incorrect for accuracy, are excluded from safety and overtriage inclination, and are measured by comprehensiveness."
    );

    let _ = writeln!(out, "\n## Capability comparison score\n");
    match &eval.ccs {
        CcsOutcome::Table(table) => {
            let _ = writeln!(
                out,
                "Computed on the {} vignettes every app answered; coverage {} ({}/{}).\n",
                table.common_item_ids.len(),
                format_rational(table.coverage),
                table.common_item_ids.len(),
                table.n_total_items
            );
            let _ = writeln!(out, "| App | CCS |\n|---|---:|");
            for (app, score) in &table.scores {
                let _ = writeln!(out, "| {} | {} |", md_escape(app), format_rational(*score));
            }
        }
        CcsOutcome::Skipped(reason) => {
            let _ = writeln!(out, "Not computed: {}", md_escape(reason));
        }
    }

    let _ = writeln!(out, "\n## Sensitivity analysis\n");
    let _ = writeln!(out, "| Variant | Mapping |\n|---|---|");
    for vm in eval.per_variant() {
        let _ = writeln!(
            out,
            "| {} | {} |",
            md_escape(&vm.variant.name),
            md_escape(&vm.variant.describe())
        );
    }
    let _ = writeln!(
        out,
        "\n| Variant | App | Metric | Default | Variant value | Delta |\n|---|---|---|---:|---:|---:|"
    );
    for d in &eval.sensitivity.deltas {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            md_escape(&d.variant),
            md_escape(&d.app_id),
            d.metric,
            format_metric(d.default_value),
            format_metric(d.variant_value),
            d.delta.map_or_else(|| "n/a".to_string(), format_rational)
        );
    }
    out
}

fn sorted_agreement(stats: &[AgreementStats]) -> Vec<&AgreementStats> {
    let mut sorted: Vec<&AgreementStats> = stats.iter().collect();
    sorted.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    sorted
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells).expect("in-memory write");
    }

    fn finish(self) -> String {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("csv output is utf-8")
    }
}

/// `metrics.csv`: one row per variant × app × metric.
pub fn metrics_csv(eval: &EvaluationBundle) -> String {
    let mut t = Table::new(&["variant", "app_id", "metric", "value", "undefined_reason"]);
    for vm in eval.per_variant() {
        for app in &vm.apps {
            for metric in MetricName::ALL {
                let (value, reason) = csv_cells(app.get(metric));
                t.row([
                    vm.variant.name.as_str(),
                    app.app_id.as_str(),
                    metric.as_str(),
                    &value,
                    reason,
                ]);
            }
        }
    }
    t.finish()
}

pub fn ccs_csv(eval: &EvaluationBundle) -> String {
    let mut t = Table::new(&["app_id", "ccs", "n_common_items", "n_total_items", "coverage", "note"]);
    match &eval.ccs {
        CcsOutcome::Table(table) => {
            let common = table.common_item_ids.len().to_string();
            let total = table.n_total_items.to_string();
            let coverage = format_rational(table.coverage);
            for (app, score) in &table.scores {
                t.row([app.as_str(), &format_rational(*score), &common, &total, &coverage, ""]);
            }
        }
        CcsOutcome::Skipped(reason) => {
            for app in eval.metrics() {
                t.row([app.app_id.as_str(), "", "", "", "", reason]);
            }
        }
    }
    t.finish()
}

pub fn sensitivity_csv(eval: &EvaluationBundle) -> String {
    let mut t = Table::new(&[
        "variant",
        "app_id",
        "metric",
        "default_value",
        "variant_value",
        "delta",
        "undefined_reason",
    ]);
    for d in &eval.sensitivity.deltas {
        let (default_value, r1) = csv_cells(d.default_value);
        let (variant_value, r2) = csv_cells(d.variant_value);
        let reason = if r1.is_empty() { r2 } else { r1 };
        let delta = d.delta.map(format_rational).unwrap_or_default();
        t.row([
            d.variant.as_str(),
            d.app_id.as_str(),
            d.metric.as_str(),
            &default_value,
            &variant_value,
            &delta,
            reason,
        ]);
    }
    t.finish()
}

/// `pooled.csv`; votes are `inputter=level` pairs joined by `;`.
pub fn pooled_csv(pooled: &[PooledAdvice]) -> String {
    let mut t = Table::new(&["vignette_id", "app_id", "pooled_level", "tie_broken", "votes"]);
    for p in pooled {
        let votes = p
            .votes
            .iter()
            .map(|(who, advice)| format!("{who}={advice}"))
            .collect::<Vec<_>>()
            .join(";");
        t.row([
            p.vignette_id.as_str(),
            p.app_id.as_str(),
            p.level.as_str(),
            if p.tie_broken { "true" } else { "false" },
            &votes,
        ]);
    }
    t.finish()
}

/// `agreement.csv`; undefined kappa is an empty cell.
pub fn agreement_csv(stats: &[AgreementStats]) -> String {
    let mut t = Table::new(&["app_id", "fleiss_kappa", "percent_agreement", "n_items", "n_raters"]);
    for a in sorted_agreement(stats) {
        t.row([
            a.app_id.as_str(),
            &a.fleiss_kappa.map(format_rational).unwrap_or_default(),
            &format_rational(a.percent_agreement),
            &a.n_items.to_string(),
            &a.n_raters.to_string(),
        ]);
    }
    t.finish()
}

/// `item_stats.csv`: the full per-round refinement audit trail.
pub fn item_stats_csv(outcome: &RefineOutcome) -> String {
    let mut t = Table::new(&[
        "vignette_id",
        "iteration",
        "difficulty",
        "item_total_r",
        "excluded_reason",
    ]);
    for round in &outcome.iterations {
        for s in round {
            t.row([
                s.vignette_id.as_str(),
                &s.iteration.to_string(),
                &format_rational(s.difficulty),
                &s.item_total_r.map(format_float).unwrap_or_default(),
                s.excluded.as_str(),
            ]);
        }
    }
    t.finish()
}

pub fn retained_csv(outcome: &RefineOutcome) -> String {
    let mut t = Table::new(&["vignette_id"]);
    for id in &outcome.retained {
        t.row([id.as_str()]);
    }
    t.finish()
}

/// The metric-suite CSV files, keyed by file name.
pub fn emit_csv(bundle: &ReportBundle) -> BTreeMap<&'static str, String> {
    let eval = &bundle.evaluation;
    BTreeMap::from([
        (METRICS_CSV, metrics_csv(eval)),
        (CCS_CSV, ccs_csv(eval)),
        (SENSITIVITY_CSV, sensitivity_csv(eval)),
    ])
}

/// Chart selectors accepted by [`emit_svg_chart`].
pub fn chart_selectors() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = MetricName::ALL.iter().map(|m| m.as_str()).collect();
    names.extend(["ccs", "fleiss_kappa", "percent_agreement"]);
    names
}

/// Metrics charted by default.
pub const DEFAULT_CHARTS: [&str; 6] = [
    "accuracy",
    "safety",
    "overtriage_inclination",
    "comprehensiveness",
    "ccs",
    "fleiss_kappa",
];

/// One bar group per app; one bar per series inside each group.
struct ChartData {
    title: String,
    series: Vec<String>,
    groups: Vec<(String, Vec<Option<f64>>)>,
}

fn to_f64(v: Rational) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

fn chart_data(eval: &EvaluationBundle, selector: &str) -> Result<ChartData, ReportError> {
    if let Ok(metric) = selector.parse::<MetricName>() {
        let variants = eval.per_variant();
        let series = variants.iter().map(|v| v.variant.name.clone()).collect();
        let groups = eval
            .metrics()
            .iter()
            .enumerate()
            .map(|(i, app)| {
                let values = variants
                    .iter()
                    .map(|vm| vm.apps[i].get(metric).value().map(to_f64))
                    .collect();
                (app.app_id.clone(), values)
            })
            .collect();
        return Ok(ChartData {
            title: metric.label().to_string(),
            series,
            groups,
        });
    }
    let single = |title: &str, groups: Vec<(String, Vec<Option<f64>>)>| ChartData {
        title: title.to_string(),
        series: vec!["default".to_string()],
        groups,
    };
    match selector {
        "ccs" => {
            let groups = eval
                .metrics()
                .iter()
                .map(|app| {
                    let v = eval
                        .ccs
                        .table()
                        .and_then(|t| t.scores.get(&app.app_id))
                        .copied()
                        .map(to_f64);
                    (app.app_id.clone(), vec![v])
                })
                .collect();
            Ok(single("Capability comparison score", groups))
        }
        "fleiss_kappa" | "percent_agreement" => {
            let kappa = selector == "fleiss_kappa";
            let groups = sorted_agreement(&eval.agreement)
                .into_iter()
                .map(|a| {
                    let v = if kappa {
                        a.fleiss_kappa
                    } else {
                        Some(a.percent_agreement)
                    };
                    (a.app_id.clone(), vec![v.map(to_f64)])
                })
                .collect();
            Ok(single(
                if kappa { "Fleiss' kappa" } else { "Percent agreement" },
                groups,
            ))
        }
        other => Err(ReportError::UnknownMetric(other.to_string())),
    }
}

const CHART_WIDTH: f64 = 720.0;
const CHART_HEIGHT: f64 = 420.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_BOTTOM: f64 = 60.0;
const MARGIN_LEFT: f64 = 60.0;
const PALETTE: [&str; 6] = ["#3b6ea5", "#e07b39", "#5a9e4b", "#b8463f", "#7d5ba6", "#8c6d46"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bar chart of one metric across apps (and mapping variants, for
/// per-app metrics). Coordinates depend on the data alone.
pub fn emit_svg_chart(bundle: &ReportBundle, selector: &str) -> Result<String, ReportError> {
    let data = chart_data(&bundle.evaluation, selector)?;
    let y_min = if data
        .groups
        .iter()
        .flat_map(|(_, v)| v.iter().flatten())
        .any(|&v| v < 0.0)
    {
        -1.0
    } else {
        0.0
    };
    let y_max = 1.0;
    let plot_w = CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_of = |v: f64| MARGIN_TOP + (y_max - v) / (y_max - y_min) * plot_h;
    let baseline = y_of(0.0);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {CHART_WIDTH} {CHART_HEIGHT}" width="{CHART_WIDTH}" height="{CHART_HEIGHT}" font-family="sans-serif">"#
    );
    svg.push('\n');
    let _ = writeln!(
        svg,
        r#"<rect width="{CHART_WIDTH}" height="{CHART_HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16" font-weight="bold">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        xml_escape(&data.title)
    );

    // Gridlines every 0.25.
    let steps = ((y_max - y_min) / 0.25).round() as i32;
    for i in 0..=steps {
        let v = y_min + f64::from(i) * 0.25;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{v:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN_LEFT:.2}" y1="{baseline:.2}" x2="{:.2}" y2="{baseline:.2}" stroke="#333333"/>"##,
        MARGIN_LEFT + plot_w
    );

    let n_groups = data.groups.len().max(1) as f64;
    let group_w = plot_w / n_groups;
    let n_series = data.series.len().max(1) as f64;
    let bar_w = group_w * 0.8 / n_series;
    for (g, (app, values)) in data.groups.iter().enumerate() {
        let group_x = MARGIN_LEFT + g as f64 * group_w;
        for (s, value) in values.iter().enumerate() {
            let x = group_x + group_w * 0.1 + s as f64 * bar_w;
            let color = PALETTE[s % PALETTE.len()];
            match value {
                Some(v) => {
                    let top = y_of(v.max(0.0));
                    let height = (y_of(v.min(0.0)) - top).abs();
                    let _ = writeln!(
                        svg,
                        r#"<rect class="bar" x="{x:.2}" y="{top:.2}" width="{bar_w:.2}" height="{height:.2}" fill="{color}"><title>{}: {}</title></rect>"#,
                        xml_escape(app),
                        format_float(*v)
                    );
                    let _ = writeln!(
                        svg,
                        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
                        x + bar_w / 2.0,
                        top - 4.0,
                        format_float(*v)
                    );
                }
                None => {
                    let _ = writeln!(
                        svg,
                        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">n/a</text>"#,
                        x + bar_w / 2.0,
                        baseline - 4.0
                    );
                }
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            group_x + group_w / 2.0,
            MARGIN_TOP + plot_h + 20.0,
            xml_escape(app)
        );
    }

    for (s, name) in data.series.iter().enumerate() {
        let y = MARGIN_TOP + s as f64 * 20.0;
        let x = CHART_WIDTH - MARGIN_RIGHT + 16.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{y:.2}" width="12" height="12" fill="{}"/>"#,
            PALETTE[s % PALETTE.len()]
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            x + 18.0,
            y + 10.0,
            xml_escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
