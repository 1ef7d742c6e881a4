use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};

use triagebench_core::domain::{Variant, DEFAULT_VARIANT};
use triagebench_core::ingest::{
    read_study, serialize_study, validate_study, Issue, ValidatedStudy, ValidationReport, RECORDS_FILE, VIGNETTES_FILE,
};
use triagebench_core::metrics::{evaluate_all, sensitivity_analysis, EvaluationBundle};
use triagebench_core::pool::{agreement_stats, pool_study};
use triagebench_core::refine::{refine_set, required_sample_size, RefineOutcome, ScoreMatrix};
use triagebench_core::report::{
    self, emit_csv, emit_svg_chart, render_markdown, RefinementSummary, ReportBundle, StudyInfo, DEFAULT_CHARTS,
    REPORT_MD,
};
use triagebench_core::sim::{simulate_study, SimSpec};

use crate::config::{Resolved, RunConfig};
use crate::{Cli, Command};

pub const EXIT_DATA: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

pub const EVALUATION_JSON: &str = "evaluation.json";
const DEFAULT_OUT: &str = "triagebench-out";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_DATA,
        error: error.into(),
    }
}

type Outcome<T = ()> = Result<T, Failure>;

struct Context {
    paths: Resolved,
    out: PathBuf,
    variant_names: Vec<String>,
    seed: Option<u64>,
    refine: bool,
}

impl Context {
    fn new(cli: &Cli) -> Outcome<Self> {
        let (config, base) = match &cli.config {
            Some(path) => {
                let config = RunConfig::load(path).map_err(usage)?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, base)
            }
            None => (RunConfig::default(), PathBuf::from(".")),
        };
        let paths = config.resolve(&base);
        let out = cli
            .out
            .clone()
            .or_else(|| paths.config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let variant_names = if cli.variants.is_empty() {
            paths.config.variants.clone()
        } else {
            cli.variants.clone()
        };
        Ok(Self {
            seed: cli.seed.or(paths.config.seed),
            refine: paths.config.refine && !cli.no_refine,
            paths,
            out,
            variant_names,
        })
    }

    fn write(&self, name: &str, body: &str) -> Outcome {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))
            .map_err(data)?;
        let path = self.out.join(name);
        fs::write(&path, body)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(data)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    /// Replaces the default file names in issue locations with real paths.
    fn locate(&self, issue: &Issue, records: &Path) -> String {
        let location = if let Some(rest) = issue.location.strip_prefix(VIGNETTES_FILE) {
            format!("{}{rest}", self.paths.vignettes.display())
        } else if let Some(rest) = issue.location.strip_prefix(RECORDS_FILE) {
            format!("{}{rest}", records.display())
        } else {
            issue.location.clone()
        };
        format!("{location}: {}: {}", issue.code, issue.message)
    }

    fn print_report(&self, report: &ValidationReport, records: &Path, to_stdout: bool) {
        let emit = |line: String| {
            if to_stdout {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
        };
        for issue in &report.errors {
            emit(format!("error: {}", self.locate(issue, records)));
        }
        for issue in &report.warnings {
            emit(format!("warning: {}", self.locate(issue, records)));
        }
    }

    fn load(&self, records: &Path) -> Outcome<ValidatedStudy> {
        let study = read_study(&self.paths.vignettes, records, &self.paths.mapping).map_err(data)?;
        match ValidatedStudy::new(study) {
            Ok(valid) => {
                self.print_report(valid.report(), records, false);
                Ok(valid)
            }
            Err(report) => {
                self.print_report(&report, records, false);
                Err(data(anyhow!("validation failed with {} error(s)", report.errors.len())))
            }
        }
    }

    fn load_main(&self) -> Outcome<ValidatedStudy> {
        self.load(&self.paths.records)
    }

    fn variants(&self, study: &ValidatedStudy) -> Outcome<Vec<Variant>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for name in &self.variant_names {
            if !seen.insert(name.as_str()) || name == DEFAULT_VARIANT {
                continue;
            }
            let variant = study.mapping.variant(name).ok_or_else(|| {
                let known: Vec<&str> = study.mapping.variants.keys().map(String::as_str).collect();
                usage(anyhow!(
                    "unknown variant `{name}`; the mapping declares: {}",
                    if known.is_empty() {
                        "none".to_string()
                    } else {
                        known.join(", ")
                    }
                ))
            })?;
            out.push(variant);
        }
        Ok(out)
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let ctx = Context::new(cli)?;
    match cli.command {
        Command::Validate => validate(&ctx),
        Command::Refine => refine(&ctx).map(|_| ()),
        Command::Pool => {
            let study = ctx.load_main()?;
            pool(&ctx, &study)
        }
        Command::Evaluate => {
            let study = ctx.load_main()?;
            evaluate(&ctx, &study, None).map(|_| ())
        }
        Command::Sensitivity => sensitivity(&ctx),
        Command::Simulate => simulate(&ctx),
        Command::Report => {
            let path = ctx.out.join(EVALUATION_JSON);
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading {} (run `evaluate` first)", path.display()))
                .map_err(data)?;
            let bundle: ReportBundle = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(data)?;
            report(&ctx, bundle)
        }
        Command::All => all(&ctx),
    }
}

fn validate(ctx: &Context) -> Outcome {
    let study = read_study(&ctx.paths.vignettes, &ctx.paths.records, &ctx.paths.mapping).map_err(data)?;
    let report = validate_study(&study);
    let s = &report.summary;
    println!("vignettes: {}  records: {}", s.n_vignettes, s.n_records);
    for (level, n) in &s.gold_levels {
        println!("  gold {level}: {n}");
    }
    for (stratum, n) in &s.strata {
        println!("  stratum {stratum}: {n}");
    }
    for (app, n) in &s.records_per_app {
        println!("  app {app}: {n} records");
    }
    for (inputter, n) in &s.records_per_inputter {
        println!("  inputter {inputter}: {n} records");
    }
    ctx.print_report(&report, &ctx.paths.records, true);
    println!("{} error(s), {} warning(s)", report.errors.len(), report.warnings.len());
    if report.is_valid() {
        Ok(())
    } else {
        Err(data(anyhow!("validation failed with {} error(s)", report.errors.len())))
    }
}

fn refine(ctx: &Context) -> Outcome<RefineOutcome> {
    let pilot = ctx.load(&ctx.paths.pilot_records)?;
    let pooled = pool_study(&pilot, &Variant::default_variant()).map_err(data)?;
    let order: Vec<String> = pilot.vignettes.iter().map(|v| v.id.clone()).collect();
    let matrix = ScoreMatrix::from_pooled(&pooled, &pilot.gold_by_id(), &order).map_err(data)?;
    let outcome = refine_set(&matrix).map_err(data)?;
    ctx.write("item_stats.csv", &report::item_stats_csv(&outcome))?;
    ctx.write("retained_vignettes.csv", &report::retained_csv(&outcome))?;
    println!(
        "refinement (pooled majority-vote scores): kept {} of {} vignettes after {} round(s)",
        outcome.retained.len(),
        order.len(),
        outcome.iterations.len()
    );

    if let Some(p) = ctx.paths.config.power {
        let size = required_sample_size(p.p0, p.p1, p.alpha, p.power).map_err(usage)?;
        ctx.write(
            "power_analysis.csv",
            &format!(
                "p0,p1,alpha,power,per_group,recommended_set_size\n{},{},{},{},{},{}\n",
                p.p0, p.p1, p.alpha, p.power, size.per_group, size.recommended_set_size
            ),
        )?;
        println!(
            "power analysis: {} per group, recommended set size {}",
            size.per_group, size.recommended_set_size
        );
    }
    Ok(outcome)
}

fn pool(ctx: &Context, study: &ValidatedStudy) -> Outcome {
    let default = Variant::default_variant();
    let pooled = pool_study(study, &default).map_err(data)?;
    let agreement = agreement_stats(study, &default).map_err(data)?;
    ctx.write("pooled.csv", &report::pooled_csv(&pooled))?;
    ctx.write("agreement.csv", &report::agreement_csv(&agreement))?;
    Ok(())
}

fn bundle_for(
    study: &ValidatedStudy,
    evaluation: EvaluationBundle,
    refinement: Option<RefinementSummary>,
) -> ReportBundle {
    ReportBundle {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at: String::new(),
        study: StudyInfo {
            summary: study.report().summary.clone(),
            apps: study.apps.clone(),
            inputters: study.inputters.clone(),
            warnings: study.report().warnings.clone(),
        },
        refinement,
        evaluation,
    }
}

fn evaluate(ctx: &Context, study: &ValidatedStudy, refinement: Option<RefinementSummary>) -> Outcome<ReportBundle> {
    let variants = ctx.variants(study)?;
    let evaluation = evaluate_all(study, &variants).map_err(data)?;
    let bundle = bundle_for(study, evaluation, refinement);
    for (name, body) in emit_csv(&bundle) {
        ctx.write(name, &body)?;
    }
    let json = serde_json::to_string_pretty(&bundle)
        .context("serializing evaluation")
        .map_err(data)?;
    ctx.write(EVALUATION_JSON, &(json + "\n"))?;
    Ok(bundle)
}

fn sensitivity(ctx: &Context) -> Outcome {
    let study = ctx.load_main()?;
    let variants = ctx.variants(&study)?;
    let report = sensitivity_analysis(&study, &variants).map_err(data)?;
    let evaluation = EvaluationBundle {
        pooled: vec![],
        tie_rate: Default::default(),
        agreement: vec![],
        ccs: triagebench_core::metrics::CcsOutcome::Skipped("not computed by `sensitivity`".into()),
        sensitivity: report,
    };
    ctx.write("sensitivity.csv", &report::sensitivity_csv(&evaluation))?;
    for vm in evaluation.per_variant() {
        println!("variant {}: {}", vm.variant.name, vm.variant.describe());
    }
    Ok(())
}

fn simulate(ctx: &Context) -> Outcome {
    let path = ctx
        .paths
        .sim_spec
        .as_ref()
        .ok_or_else(|| usage(anyhow!("`simulate` needs `sim_spec` in the run configuration")))?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    let mut spec = SimSpec::from_toml(&text)
        .with_context(|| path.display().to_string())
        .map_err(usage)?;
    if let Some(seed) = ctx.seed {
        spec.seed = seed;
    }
    let study = simulate_study(&spec).map_err(usage)?;
    let files = serialize_study(&study).map_err(data)?;
    files.write_to(&ctx.out).map_err(data)?;
    println!(
        "simulated {} vignettes, {} apps, {} records (seed {}) into {}",
        study.vignettes.len(),
        study.apps.len(),
        study.records.len(),
        spec.seed,
        ctx.out.display()
    );
    Ok(())
}

fn report(ctx: &Context, mut bundle: ReportBundle) -> Outcome {
    bundle.generated_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    ctx.write(REPORT_MD, &render_markdown(&bundle))?;
    for (name, body) in emit_csv(&bundle) {
        ctx.write(name, &body)?;
    }
    for metric in DEFAULT_CHARTS {
        let svg = emit_svg_chart(&bundle, metric).map_err(data)?;
        ctx.write(&format!("chart_{metric}.svg"), &svg)?;
    }
    Ok(())
}

fn all(ctx: &Context) -> Outcome {
    let mut study = ctx.load_main()?;
    let mut refinement = None;
    if ctx.refine {
        let outcome = refine(ctx)?;
        let keep: BTreeSet<String> = outcome.retained.iter().cloned().collect();
        study = match study.restrict_to(&keep) {
            Ok(s) => s,
            Err(report) => {
                ctx.print_report(&report, &ctx.paths.records, false);
                return Err(data(anyhow!("refined study failed validation")));
            }
        };
        refinement = Some(RefinementSummary::from_outcome(&outcome));
    }
    pool(ctx, &study)?;
    let bundle = evaluate(ctx, &study, refinement)?;
    report(ctx, bundle)
}
