use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use osm_core::analysis::ParetoCertificate;
use osm_core::strategy::{exhaustive_best_response_with, AuditMode, DEFAULT_SCHOOL_CAP};
use osm_core::testsupport::{generate_instance, InstanceSpec};
use osm_core::{
    analyze_matching, enumerate_rank_minimal, matching_rank, parse_transform_spec,
    preference_index, priority_violations, tiebreak_select, CostRealization, MechanismOptions,
    SchoolChoiceProblem, StudentId, TieBreakCriterion, TieBreakPolicy, UtilityTransform,
};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::format::{
    cost_value, ids_value, load_csv_instance, load_instance, matching_value, parse_matching,
    read_text, render_instance, CapacityArg,
};

pub const EXIT_PROFITABLE_MISREPORT: u8 = 10;

#[derive(Debug, Parser)]
#[command(
    name = "osm",
    version,
    about = "Cost-minimizing school-choice matching"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the mechanism on an instance.
    Solve(SolveArgs),
    /// Report metrics and certificates for a given matching.
    Analyze(AnalyzeArgs),
    /// Search one student's misreports for a lower expected cost.
    Audit(AuditArgs),
    /// Write a random instance.
    Gen(GenArgs),
    /// List every feasible matching of minimum rank.
    EnumerateRankMinimal(RankMinimalArgs),
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Instance document, or a ranked-list CSV with --from-csv.
    pub instance: PathBuf,
    /// Read the instance as `student,choice1,choice2,...` rows.
    #[arg(long)]
    pub from_csv: bool,
    /// CSV capacities: `N` for every school or `id=N` for one.
    #[arg(long = "capacity", requires = "from_csv")]
    pub capacities: Vec<CapacityArg>,
}

impl InstanceArgs {
    fn load(&self) -> CliResult<SchoolChoiceProblem> {
        if self.from_csv {
            load_csv_instance(&self.instance, &self.capacities)
        } else {
            load_instance(&self.instance)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RealizationArg {
    Auto,
    Scalar,
    RankCounts,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[arg(long, default_value = "linear:a=1,b=-1")]
    pub transform: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated criteria applied in order: `variance`, `violations`.
    #[arg(long, value_delimiter = ',')]
    pub tiebreak: Option<Vec<String>>,
    /// Emit every optimum.
    #[arg(long)]
    pub all: bool,
    #[arg(long, default_value_t = osm_core::mechanism::DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
    #[arg(long, value_enum, default_value_t = RealizationArg::Auto)]
    pub realization: RealizationArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    /// A result document or a `{student: school}` object.
    pub matching: PathBuf,
    #[arg(long, default_value = "linear:a=1,b=-1")]
    pub transform: String,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[arg(long)]
    pub student: String,
    #[arg(long, default_value = "linear:a=1,b=-1")]
    pub transform: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model the final pick with these tie-break criteria.
    #[arg(long, value_delimiter = ',')]
    pub tiebreak: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub students: usize,
    #[arg(long)]
    pub schools: usize,
    #[arg(long, default_value_t = 1)]
    pub cap_min: u32,
    #[arg(long, default_value_t = 1)]
    pub cap_max: u32,
    #[arg(long, default_value_t = 0.0)]
    pub ties: f64,
    #[arg(long, default_value_t = 0.0)]
    pub incomplete: f64,
    #[arg(long, default_value_t = 0.0)]
    pub skew: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankMinimalArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[arg(long, default_value_t = osm_core::mechanism::DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
}

/// What a command prints and the code it exits with.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub code: u8,
}

impl Output {
    fn json(value: &Value, code: u8) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("plain data");
        text.push('\n');
        Output { text, code }
    }
}

pub fn run(cli: Cli) -> CliResult<Output> {
    match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Analyze(args) => analyze(&args),
        Command::Audit(args) => audit(&args),
        Command::Gen(args) => gen(&args),
        Command::EnumerateRankMinimal(args) => rank_minimal(&args),
    }
}

fn transform(spec: &str) -> CliResult<UtilityTransform> {
    parse_transform_spec(spec).map_err(|e| CliError::Transform(e.to_string()))
}

fn policy(names: &[String], seed: u64) -> CliResult<TieBreakPolicy> {
    let criteria = names
        .iter()
        .map(|n| match n.trim() {
            "variance" => Ok(TieBreakCriterion::MinVariance),
            "violations" | "stability" => Ok(TieBreakCriterion::FewestViolatedStudents),
            other => Err(CliError::input(format!(
                "unknown tie-break criterion `{other}` (expected variance or violations)"
            ))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TieBreakPolicy::new(criteria, seed)?)
}

/// Kernel size guard, overridable through `OSM_MAX_SEATS`.
fn max_seats() -> CliResult<usize> {
    match std::env::var("OSM_MAX_SEATS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("OSM_MAX_SEATS: `{v}` is not a seat count"))),
        Err(_) => Ok(osm_core::mechanism::DEFAULT_MAX_SEATS),
    }
}

fn write_or_print(out: Option<&Path>, output: Output) -> CliResult<Output> {
    match out {
        Some(path) => {
            std::fs::write(path, &output.text)
                .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
            Ok(Output {
                text: String::new(),
                code: output.code,
            })
        }
        None => Ok(output),
    }
}

fn solve(args: &SolveArgs) -> CliResult<Output> {
    let problem = args.input.load()?;
    let f = transform(&args.transform)?;
    let options = MechanismOptions {
        enumeration_cap: args.cap,
        max_seats: max_seats()?,
        realization: match args.realization {
            RealizationArg::Auto => CostRealization::Auto,
            RealizationArg::Scalar => CostRealization::Scalar,
            RealizationArg::RankCounts => CostRealization::RankCounts,
        },
    };
    let outcome = osm_core::run_mechanism_with(&problem, &f, args.seed, &options)?;
    let matching = match &args.tiebreak {
        Some(names) => tiebreak_select(&problem, &outcome.optima, &policy(names, args.seed)?)?,
        None => outcome.matching.clone(),
    };
    let violations = priority_violations(&problem, &matching)?;
    let trace = &outcome.trace;
    let mut doc = json!({
        "matching": matching_value(&problem, &matching),
        "transform": outcome.transform.to_string(),
        "cost": cost_value(&outcome.cost),
        "preference_index": preference_index(&problem, &matching)?,
        "rank": matching_rank(&problem, &matching)?,
        "violated_students": ids_value(&violations.violated_students),
        "optima_count": outcome.optima.len(),
        "exhaustive": outcome.optima.exhaustive,
        "seed": args.seed,
        "trace": {
            "dimension": trace.dimension,
            "iterations": trace.iterations,
            "cover_lines": trace.cover_lines,
            "realization": trace.realization,
            "fallback": trace.fallback,
        },
    });
    if let Some(names) = &args.tiebreak {
        doc["tiebreak"] = json!(names);
    }
    if args.all {
        doc["optima"] = Value::Array(
            outcome
                .optima
                .matchings
                .iter()
                .map(|m| matching_value(&problem, m))
                .collect(),
        );
    }
    write_or_print(args.out.as_deref(), Output::json(&doc, 0))
}

fn analyze(args: &AnalyzeArgs) -> CliResult<Output> {
    let problem = args.input.load()?;
    let f = transform(&args.transform)?;
    let text = read_text(&args.matching)?;
    let matching = parse_matching(&problem, &text, &args.matching.display().to_string())?;
    let report = analyze_matching(&problem, &matching, &f)?;
    let pareto = match &report.pareto {
        Some(ParetoCertificate::Efficient) => json!("efficient"),
        Some(ParetoCertificate::DominatedBy(other)) => {
            json!({ "dominated_by": matching_value(&problem, other) })
        }
        None => json!("skipped"),
    };
    let pairs: Vec<Value> = report
        .violations
        .pairs
        .iter()
        .map(|p| json!({ "occupant": p.occupant.as_str(), "violated": p.violated.as_str(), "school": p.school.as_str() }))
        .collect();
    let doc = json!({
        "matching": matching_value(&problem, &matching),
        "transform": f.resolved_for(&problem).to_string(),
        "cost": cost_value(&report.cost),
        "preference_index": report.preference_index,
        "rank": report.rank,
        "rank_signature": report.rank_signature,
        "violated_students": ids_value(&report.violations.violated_students),
        "violation_pairs": pairs,
        "pareto": pareto,
        "rank_minimal": report.rank_minimal.map_or(json!("skipped"), Value::Bool),
    });
    let skipped = report.pareto.is_none() || report.rank_minimal.is_none();
    Ok(Output::json(&doc, if skipped { 4 } else { 0 }))
}

fn distribution(map: &std::collections::BTreeMap<u32, osm_core::BigRational>) -> Value {
    let mut out = Map::new();
    for (rank, p) in map {
        out.insert(rank.to_string(), cost_value(p));
    }
    Value::Object(out)
}

fn audit(args: &AuditArgs) -> CliResult<Output> {
    let problem = args.input.load()?;
    let f = transform(&args.transform)?;
    let mode = match &args.tiebreak {
        Some(names) => AuditMode::TieBreak(policy(names, args.seed)?),
        None => AuditMode::Uniform,
    };
    let student = StudentId::from(args.student.as_str());
    let report = exhaustive_best_response_with(
        &problem,
        &student,
        &f,
        DEFAULT_SCHOOL_CAP,
        args.seed,
        &mode,
    )?;
    let misreport = report
        .best_misreport
        .as_ref()
        .map_or(Value::Null, |p| ids_value(p.ranked_schools()));
    let doc = json!({
        "student": report.student.as_str(),
        "transform": f.resolved_for(&problem).to_string(),
        "truthful_expected_cost": cost_value(&report.truthful_expected_cost),
        "best_misreport": misreport,
        "misreport_expected_cost": cost_value(&report.misreport_expected_cost),
        "profitable": report.found_profitable_misreport(),
        "receivable_truthful": ids_value(&report.receivable_truthful),
        "receivable_after": ids_value(&report.receivable_after),
        "truthful_rank_distribution": distribution(&report.truthful_rank_distribution),
        "misreport_rank_distribution": distribution(&report.misreport_rank_distribution),
        "reports_evaluated": report.reports_evaluated,
        "seed": report.seed,
    });
    let code = if report.found_profitable_misreport() {
        EXIT_PROFITABLE_MISREPORT
    } else {
        0
    };
    Ok(Output::json(&doc, code))
}

fn gen(args: &GenArgs) -> CliResult<Output> {
    let spec = InstanceSpec {
        students: args.students,
        schools: args.schools,
        cap_min: args.cap_min,
        cap_max: args.cap_max,
        tie_prob: args.ties,
        incomplete_prob: args.incomplete,
        skew: args.skew,
        seed: args.seed,
    };
    let problem = generate_instance(&spec)?;
    write_or_print(
        args.out.as_deref(),
        Output {
            text: render_instance(&problem),
            code: 0,
        },
    )
}

fn rank_minimal(args: &RankMinimalArgs) -> CliResult<Output> {
    let problem = args.input.load()?;
    let set = enumerate_rank_minimal(&problem, args.cap)?;
    let doc = json!({
        "rank": set.rank,
        "count": set.matchings.len(),
        "exhaustive": set.exhaustive,
        "matchings": set.matchings.iter().map(|m| matching_value(&problem, m)).collect::<Vec<_>>(),
    });
    Ok(Output::json(&doc, 0))
}
