use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::{parse_scenarios, run_falsify, run_sweep, HarnessError, Report, Scenario, Stage, XPolicy, VERSION};
use crate::bounds::BoundId;
use crate::expr;
use crate::hclass::{
    check_dominates_identity, check_h_concave, check_h_convex, check_nonnegative, check_submultiplicative,
    check_superadditive, check_supermultiplicative, CertificateReport, HSpec, Property, Sampling,
};
use crate::means::{audit_prop1, audit_prop2, audit_prop3, MeanKind, MeanValue, Proposition, PropositionAudit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "ostrowski", version, about = "Ostrowski-type bounds for h-convex functions")]
struct Cli {
    /// Output format; `bound` defaults to text, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate bounds at a single point.
    Bound(ProblemArgs),
    /// Evaluate bounds over the scenario's x policy.
    Sweep(ProblemArgs),
    /// Search for points where a bound fails.
    Falsify(FalsifyArgs),
    /// Audit the mean inequalities.
    Audit(AuditArgs),
    /// Arithmetic, generalized logarithmic and identric means.
    Means(MeansArgs),
    /// Check a property of h (or of g with respect to h) by sampling.
    CheckH(CheckArgs),
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Scenario file, one JSON object per line.
    #[arg(long, conflicts_with_all = ["f", "a", "b", "h"])]
    scenario: Option<PathBuf>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Evaluation point (`bound`) or x policy (`sweep`: fixed:<x>, grid:<n>, midpoint, endpoints).
    #[arg(long, allow_negative_numbers = true)]
    x: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long = "M", visible_alias = "m")]
    m: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    /// Bounds to evaluate, e.g. `--thm 2 --thm classical`.
    #[arg(long = "thm", visible_alias = "bound", value_delimiter = ',')]
    thm: Vec<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    check_budget: Option<usize>,
}

#[derive(Debug, Args)]
struct FalsifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    target: String,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Which propositions (1, 2, 3); all by default.
    #[arg(long, value_delimiter = ',')]
    prop: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 2.0)]
    b: f64,
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    n: i32,
    /// Exponent of h for P1 and P2 (default 0.5) and the Hölder exponent for P3 (default 2).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 1000)]
    check_budget: usize,
}

#[derive(Debug, Args)]
struct MeansArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    /// Exponent of the generalized logarithmic mean.
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    h: String,
    #[arg(long)]
    property: String,
    /// Function for h-convex, h-concave, nonnegative.
    #[arg(long)]
    g: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Domain J for superadditive and multiplicative checks.
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long, default_value_t = 1000)]
    budget: usize,
}

/// Output text plus the exit code it implies.
struct Outcome {
    text: String,
    code: i32,
}

fn input_error(message: impl std::fmt::Display) -> HarnessError {
    HarnessError::new(Stage::Scenario, message)
}

impl ProblemArgs {
    fn scenarios(&self, seed: u64, single_point: bool) -> Result<Vec<Scenario>, HarnessError> {
        let mut scenarios = match &self.scenario {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| input_error(format!("reading {}: {e}", path.display())))?;
                parse_scenarios(&text)?
            }
            None => {
                let need = |v: Option<f64>, name: &str| v.ok_or_else(|| input_error(format!("--{name} is required")));
                let f = self.f.clone().ok_or_else(|| input_error("--f is required"))?;
                let h = self.h.clone().unwrap_or_else(|| "t".to_owned());
                vec![Scenario::new(f, need(self.a, "a")?, need(self.b, "b")?, h)]
            }
        };
        for s in &mut scenarios {
            if self.scenario.is_none() {
                s.seed = seed;
            }
            if let Some(x) = &self.x {
                s.x = if single_point {
                    XPolicy::Fixed(x.parse().map_err(|_| input_error(format!("bad --x `{x}`")))?)
                } else {
                    x.parse().map_err(input_error)?
                };
            } else if single_point && self.scenario.is_none() {
                s.x = XPolicy::Midpoint;
            }
            s.m = self.m.or(s.m);
            s.p = self.p.or(s.p);
            s.q = self.q.or(s.q);
            s.s = self.s.or(s.s);
            s.n = self.n.or(s.n);
            if let Some(b) = self.budget {
                s.budget = b;
            }
            if let Some(b) = self.check_budget {
                s.check_budget = b;
            }
            if !self.thm.is_empty() {
                s.bounds = self
                    .thm
                    .iter()
                    .map(|t| t.parse::<BoundId>().map_err(input_error))
                    .collect::<Result<_, _>>()?;
            }
        }
        Ok(scenarios)
    }
}

fn render_reports(reports: &[Report], format: Format) -> Result<String, HarnessError> {
    match format {
        Format::Json if reports.len() == 1 => reports[0].to_json(),
        Format::Json => serde_json::to_string_pretty(reports).map_err(|e| HarnessError::new(Stage::Output, e)),
        Format::Csv => Ok(reports.iter().map(Report::to_csv).collect::<Vec<_>>().join("\n")),
        Format::Text => Ok(reports.iter().map(Report::to_text).collect::<Vec<_>>().join("\n")),
    }
}

fn reports_outcome(reports: Vec<Report>, format: Format) -> Result<Outcome, HarnessError> {
    let code = if reports.iter().any(Report::has_violation) {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        text: render_reports(&reports, format)?,
        code,
    })
}

/// `%g`-style rendering with six significant digits.
fn short(v: f64) -> String {
    if v == f64::INFINITY {
        return "inf".into();
    }
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn bound_text(report: &Report) -> String {
    let mut out = String::new();
    for row in &report.rows {
        for (id, e) in &row.bounds {
            let verdict = match (e.holds, e.applicable) {
                (true, true) => "holds",
                (false, true) => "violated",
                (true, false) => "holds (hypotheses not certified)",
                (false, false) => "violated (hypotheses not certified)",
            };
            let _ = writeln!(out, "{id}: x={} lhs={}, rhs={}, {verdict}", short(row.x), short(row.lhs), short(e.rhs));
        }
    }
    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

#[derive(Serialize)]
struct AuditOutput<'a> {
    seed: u64,
    version: &'a str,
    audits: &'a [PropositionAudit],
}

fn audit(args: &AuditArgs, seed: u64, format: Format) -> Result<Outcome, HarnessError> {
    let props: Vec<Proposition> = if args.prop.is_empty() {
        vec![Proposition::P1, Proposition::P2, Proposition::P3]
    } else {
        args.prop.iter().map(|p| p.parse().map_err(input_error)).collect::<Result<_, _>>()?
    };
    let sampling = Sampling::new(args.check_budget, seed);
    let mut audits = Vec::new();
    for prop in props {
        let result = match prop {
            Proposition::P1 => audit_prop1(args.a, args.b, args.n, args.p.unwrap_or(0.5), sampling),
            Proposition::P2 => audit_prop2(args.a, args.b, args.p.unwrap_or(0.5), args.q, args.n, sampling),
            Proposition::P3 => audit_prop3(args.a, args.b, args.p.unwrap_or(2.0), sampling),
        };
        audits.push(result.map_err(|e| HarnessError::new(Stage::Instance, format!("{prop}: {e}")))?);
    }
    let violated = audits.iter().any(|a| {
        a.verdict_printed == crate::means::AuditVerdict::Violated
            || a.verdict_derived == crate::means::AuditVerdict::Violated
    });
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&AuditOutput {
            seed,
            version: VERSION,
            audits: &audits,
        })
        .map_err(|e| HarnessError::new(Stage::Output, e))?,
        Format::Csv => {
            let mut out = String::from(
                "proposition,lhs,lhs_as_printed,rhs_as_printed,rhs_from_theorem,verdict_printed,verdict_derived,applicable\n",
            );
            for a in &audits {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:?},{:?},{}",
                    a.proposition,
                    a.lhs,
                    a.lhs_as_printed,
                    a.rhs_as_printed,
                    a.rhs_from_theorem,
                    a.verdict_printed,
                    a.verdict_derived,
                    a.applicable
                );
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            for a in &audits {
                let _ = writeln!(
                    out,
                    "{}: printed {} <= {} {:?}; derived {} <= {} {:?}; hypotheses {}",
                    a.proposition,
                    short(a.lhs_as_printed),
                    short(a.rhs_as_printed),
                    a.verdict_printed,
                    short(a.lhs),
                    short(a.rhs_from_theorem),
                    a.verdict_derived,
                    if a.applicable { "certified" } else { "not certified" }
                );
            }
            out
        }
    };
    Ok(Outcome {
        text,
        code: if violated { EXIT_VIOLATION } else { EXIT_OK },
    })
}

fn means(args: &MeansArgs, format: Format) -> Result<Outcome, HarnessError> {
    let mut kinds = vec![MeanKind::Arithmetic];
    if let Some(p) = args.p {
        kinds.push(MeanKind::GeneralizedLog { p });
    }
    kinds.push(MeanKind::Identric);
    let values = kinds
        .into_iter()
        .map(|k| MeanValue::compute(k, args.a, args.b).map_err(|e| HarnessError::new(Stage::Instance, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&values).map_err(|e| HarnessError::new(Stage::Output, e))?,
        Format::Csv => {
            let mut out = String::from("kind,a,b,value\n");
            for v in &values {
                let _ = writeln!(out, "{},{},{},{}", v.kind, v.a, v.b, v.value);
            }
            out
        }
        Format::Text => values.iter().map(|v| format!("{}({}, {}) = {}\n", v.kind, v.a, v.b, v.value)).collect(),
    };
    Ok(Outcome { text, code: EXIT_OK })
}

fn check_h(args: &CheckArgs, seed: u64, format: Format) -> Result<Outcome, HarnessError> {
    let h: HSpec = args.h.parse().map_err(|e| HarnessError::new(Stage::Parse, e))?;
    let property: Property = args.property.parse().map_err(input_error)?;
    let sampling = Sampling::new(args.budget, seed);
    let domain = |e| HarnessError::new(Stage::Evaluate, e);
    let interval = || -> Result<(f64, f64), HarnessError> {
        match (args.a, args.b) {
            (Some(a), Some(b)) if a < b => Ok((a, b)),
            _ => Err(input_error(format!("{property} needs --a < --b"))),
        }
    };
    let g = || -> Result<expr::Expr, HarnessError> {
        let src = args.g.as_deref().ok_or_else(|| input_error(format!("{property} needs --g")))?;
        expr::parse(src).map_err(|e| HarnessError::new(Stage::Parse, e))
    };
    if !(args.lo >= 0.0 && args.lo < args.hi) {
        return Err(input_error("need 0 <= --lo < --hi"));
    }
    let report: CertificateReport = match property {
        Property::HConvex | Property::HConcave => {
            let (a, b) = interval()?;
            let g = g()?;
            let run = if property == Property::HConvex { check_h_convex } else { check_h_concave };
            run(|u: f64| g.eval(u), &h, a, b, sampling).map_err(domain)?
        }
        Property::Nonnegative => {
            let (a, b) = interval()?;
            let g = g()?;
            check_nonnegative(|u: f64| g.eval(u), a, b, sampling).map_err(domain)?
        }
        Property::Superadditive => check_superadditive(&h, args.lo, args.hi, sampling).map_err(domain)?,
        Property::Supermultiplicative => check_supermultiplicative(&h, args.lo, args.hi, sampling).map_err(domain)?,
        Property::Submultiplicative => check_submultiplicative(&h, args.lo, args.hi, sampling).map_err(domain)?,
        Property::DominatesIdentity => check_dominates_identity(&h, sampling).map_err(domain)?,
        Property::BoundedBy => return Err(input_error("bounded-by is checked as part of `bound`, not check-h")),
    };
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&report).map_err(|e| HarnessError::new(Stage::Output, e))?,
        Format::Csv => format!(
            "property,subject,verdict,samples,seed\n{},\"{}\",{:?},{},{}\n",
            report.property,
            report.subject.replace('"', "\"\""),
            report.verdict,
            report.samples,
            report.seed
        ),
        Format::Text => format!("{}: {} -> {:?}\n", report.property, report.subject, report.verdict),
    };
    Ok(Outcome {
        text,
        code: if report.holds() { EXIT_OK } else { EXIT_VIOLATION },
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome, HarnessError> {
    let format = |default| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Bound(args) => {
            let scenarios = args.scenarios(cli.seed, true)?;
            let reports = scenarios.iter().map(run_sweep).collect::<Result<Vec<_>, _>>()?;
            match format(Format::Text) {
                Format::Text => {
                    let code = if reports.iter().any(Report::has_violation) { EXIT_VIOLATION } else { EXIT_OK };
                    Ok(Outcome {
                        text: reports.iter().map(bound_text).collect(),
                        code,
                    })
                }
                f => reports_outcome(reports, f),
            }
        }
        Command::Sweep(args) => {
            let scenarios = args.scenarios(cli.seed, false)?;
            let reports = scenarios.iter().map(run_sweep).collect::<Result<Vec<_>, _>>()?;
            reports_outcome(reports, format(Format::Json))
        }
        Command::Falsify(args) => {
            let target: BoundId = args.target.parse().map_err(input_error)?;
            let scenarios = args.problem.scenarios(cli.seed, false)?;
            let reports = scenarios
                .iter()
                .map(|s| run_falsify(s, target))
                .collect::<Result<Vec<_>, _>>()?;
            reports_outcome(reports, format(Format::Json))
        }
        Command::Audit(args) => audit(args, cli.seed, format(Format::Json)),
        Command::Means(args) => means(args, format(Format::Json)),
        Command::CheckH(args) => check_h(args, cli.seed, format(Format::Json)),
    }
}

/// Runs the command line and returns the process exit code: 0 when every
/// requested inequality holds, 1 when a violation was found, 2 on bad input.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => {
            let body = serde_json::json!({ "error": e });
            eprintln!("{body}");
            return EXIT_INPUT;
        }
    };
    let mut text = outcome.text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string()),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("{}", serde_json::json!({ "error": HarnessError::new(Stage::Output, e) }));
        return EXIT_INPUT;
    }
    outcome.code
}
