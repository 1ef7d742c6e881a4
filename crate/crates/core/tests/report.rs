mod common;

use common::*;
use triagebench_core::domain::{MappingConfig, Study, TriageLevel};
use triagebench_core::ingest::ValidatedStudy;
use triagebench_core::metrics::{evaluate_all, MetricName};
use triagebench_core::report::{
    chart_selectors, emit_csv, emit_svg_chart, format_rational, metrics_csv, render_markdown, ReportBundle,
    ReportError, StudyInfo, METRICS_CSV, TIMESTAMP_PREFIX,
};

fn bundle_for(study: Study, variants: &[&str]) -> ReportBundle {
    let variants: Vec<_> = variants.iter().map(|n| study.mapping.variant(n).unwrap()).collect();
    let study: ValidatedStudy = validated(study);
    let evaluation = evaluate_all(&study, &variants).unwrap();
    ReportBundle {
        tool_version: "test".to_string(),
        generated_at: "2000-01-01T00:00:00Z".to_string(),
        study: StudyInfo {
            summary: study.report().summary.clone(),
            apps: study.apps.clone(),
            inputters: study.inputters.clone(),
            warnings: study.report().warnings.clone(),
        },
        refinement: None,
        evaluation,
    }
}

/// Three apps correct on 3, 2 and 1 of three vignettes.
fn three_app_study() -> Study {
    let golds = [TriageLevel::Emergency, TriageLevel::NonEmergency, TriageLevel::SelfCare];
    let vignettes: Vec<_> = golds
        .iter()
        .enumerate()
        .map(|(i, g)| vignette(&format!("v{i}"), *g))
        .collect();
    let mut records = Vec::new();
    for (a, app) in ["alpha", "beta", "gamma"].iter().enumerate() {
        for (i, v) in vignettes.iter().enumerate() {
            let advice = if i < 3 - a {
                v.gold
            } else {
                TriageLevel::from_code((v.gold.code() + 1) % 3).unwrap()
            };
            for who in ["r1", "r2"] {
                records.push(record(&v.id, app, who, advice.as_str()));
            }
        }
    }
    Study::new(vignettes, records, MappingConfig::identity(["alpha", "beta", "gamma"]))
}

#[test]
fn rendering_is_deterministic_apart_from_timestamp() {
    let a = bundle_for(crafted_sensitivity_study(), &["urgent_as_emergency"]);
    let mut b = bundle_for(crafted_sensitivity_study(), &["urgent_as_emergency"]);
    assert_eq!(render_markdown(&a), render_markdown(&a));
    assert_eq!(emit_csv(&a), emit_csv(&b));
    b.generated_at = "2030-12-31T23:59:59Z".to_string();
    let strip = |s: String| {
        s.lines()
            .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_ne!(render_markdown(&a), render_markdown(&b));
    assert_eq!(strip(render_markdown(&a)), strip(render_markdown(&b)));
    for sel in chart_selectors() {
        assert_eq!(emit_svg_chart(&a, sel).unwrap(), emit_svg_chart(&b, sel).unwrap());
    }
}

#[test]
fn every_metric_is_reported() {
    let bundle = bundle_for(crafted_sensitivity_study(), &["urgent_as_emergency"]);
    let md = render_markdown(&bundle);
    for metric in MetricName::ALL {
        assert!(md.contains(metric.label()), "markdown lacks {}", metric.label());
    }
    for heading in [
        "Inter-rater agreement",
        "Capability comparison score",
        "Sensitivity analysis",
    ] {
        assert!(md.contains(heading), "markdown lacks {heading}");
    }
    let csv = &emit_csv(&bundle)[METRICS_CSV];
    assert_eq!(csv, &metrics_csv(&bundle.evaluation));
    for metric in MetricName::ALL {
        for variant in ["default", "urgent_as_emergency"] {
            for app in ["appA", "appB"] {
                let prefix = format!("{variant},{app},{},", metric.as_str());
                assert_eq!(csv.lines().filter(|l| l.starts_with(&prefix)).count(), 1, "{prefix}");
            }
        }
    }
    assert!(csv.contains("default,appA,accuracy,0.6667,"));
}

#[test]
fn svg_bars_are_proportional_to_values() {
    let bundle = bundle_for(three_app_study(), &[]);
    let values: Vec<f64> = bundle
        .evaluation
        .metrics()
        .iter()
        .map(|m| *m.accuracy.numer() as f64 / *m.accuracy.denom() as f64)
        .collect();
    assert_eq!(values.len(), 3);
    let svg = emit_svg_chart(&bundle, "accuracy").unwrap();
    let heights: Vec<f64> = svg
        .lines()
        .filter(|l| l.contains(r#"class="bar""#))
        .map(|l| {
            let start = l.find(r#"height=""#).unwrap() + 8;
            l[start..start + l[start..].find('"').unwrap()].parse().unwrap()
        })
        .collect();
    assert_eq!(heights.len(), 3);
    let scale = heights[0] / values[0];
    for (h, v) in heights.iter().zip(&values) {
        assert!((h - v * scale).abs() < 0.01, "{heights:?} vs {values:?}");
    }
    assert!(heights[0] > heights[1] && heights[1] > heights[2]);
}

#[test]
fn unknown_chart_metric_is_rejected() {
    let bundle = bundle_for(three_app_study(), &[]);
    assert_eq!(
        emit_svg_chart(&bundle, "frobnication"),
        Err(ReportError::UnknownMetric("frobnication".to_string()))
    );
}

#[test]
fn rational_rendering_rounds_half_to_even() {
    assert_eq!(format_rational(rat(1, 3)), "0.3333");
    assert_eq!(format_rational(rat(2, 3)), "0.6667");
    assert_eq!(format_rational(rat(1, 20000)), "0.0000");
    assert_eq!(format_rational(rat(3, 20000)), "0.0002");
    assert_eq!(format_rational(rat(-1, 20000)), "0.0000");
    assert_eq!(format_rational(rat(-1, 3)), "-0.3333");
}
