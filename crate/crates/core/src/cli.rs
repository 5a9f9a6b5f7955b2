//! Command-line front end: rate queries, estimator sweeps, slope fits and the
//! verification suites.
//!
//! Every command returns an [`Output`] holding the text to emit and the exit
//! code (0 ok, 1 error, 2 open case). Output files start with `#` lines that
//! embed the resolved configuration.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::axiom_suite::{run_suite, to_json_lines, Suite, SuiteConfig, SuiteSummary};
use crate::block_estimator::{sweep, EstimateRow, EstimatorConfig, ParamSpace};
use crate::error::{Error, Result};
use crate::finite_widths::Direction;
use crate::hyperbolic_index::Budget;
use crate::rate_table::{
    fit_rate, predict_bernstein, predict_entropy, predict_limiting, predict_weyl, FitOptions, LimitTarget,
    RateExponent, RateFit, RateKind,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_OPEN: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "snlab",
    version,
    about = "Widths of hyperbolic-cross sequence space embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted rate exponents.
    Rates(RatesArgs),
    /// Upper and lower bounds over a range of levels J.
    Estimate(EstimateArgs),
    /// Fit the slope of an estimate CSV and compare it with the prediction.
    Fit(FitArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Weyl,
    Bernstein,
    Entropy,
}

impl From<KindArg> for RateKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Weyl => RateKind::Weyl,
            KindArg::Bernstein => RateKind::Bernstein,
            KindArg::Entropy => RateKind::Entropy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetArg {
    Linf,
    L1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Upper,
    Lower,
}

/// Parameters kept as strings so decimal input stays exact.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ParamArgs {
    #[arg(long)]
    pub p1: Option<String>,
    #[arg(long)]
    pub p2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<ParamSpace> {
        let need = |v: &Option<String>, name: &str| {
            v.clone()
                .ok_or_else(|| Error::InvalidParameter(format!("--{name} is required")))
        };
        ParamSpace::parse(
            &need(&self.p1, "p1")?,
            &need(&self.p2, "p2")?,
            &need(&self.t, "t")?,
            self.d,
        )
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct RatesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Weyl)]
    pub kind: KindArg,
    /// Limiting target; uses --p instead of --p1/--p2.
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 3)]
    pub j_min: u32,
    #[arg(long, default_value_t = 8)]
    pub j_max: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frames tried per block by the witness search.
    #[arg(long, default_value_t = 24)]
    pub trials: usize,
    /// Highest level with witness lower bounds.
    #[arg(long, default_value_t = 6)]
    pub witness_max: u32,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV written by `estimate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the parameters recorded in the input header.
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Weyl)]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value_t = DirectionArg::Upper)]
    pub direction: DirectionArg,
    #[arg(long, default_value_t = 0.15)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.25)]
    pub discard: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Diagonal-operator trials.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 200)]
    pub matrix_trials: usize,
    /// Flip one weight sign to check that failures are reported.
    #[arg(long)]
    pub fault: bool,
    /// Where to write the JSON-lines records.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Text to print and the process exit code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub text: String,
    pub code: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, code: EXIT_OK }
    }
}

fn header(command: &str, config: &impl Serialize, budget: Budget) -> Result<String> {
    let mut value = serde_json::to_value(config).map_err(json_err)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("budget".into(), budget.0.into());
    }
    Ok(format!(
        "# snlab {command}\n# config {}\n",
        serde_json::to_string(&value).map_err(json_err)?
    ))
}

fn json_err(e: serde_json::Error) -> Error {
    Error::InvalidParameter(e.to_string())
}

#[derive(Serialize)]
struct RatesReport<'a> {
    config: &'a RatesArgs,
    #[serde(flatten)]
    rate: RateExponent,
}

pub fn cmd_rates(args: &RatesArgs) -> Result<Output> {
    let rate = match args.target {
        Some(target) => {
            let p = args
                .p
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("--p is required with --target".into()))?;
            let t = args
                .params
                .t
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("--t is required".into()))?;
            let target = match target {
                TargetArg::Linf => LimitTarget::Linf,
                TargetArg::L1 => LimitTarget::L1,
            };
            predict_limiting(p.parse()?, t.parse()?, args.params.d, target)?
        }
        None => {
            let params = args.params.resolve()?;
            match args.kind {
                KindArg::Weyl => predict_weyl(&params)?,
                KindArg::Bernstein => predict_bernstein(&params)?,
                KindArg::Entropy => predict_entropy(&params)?,
            }
        }
    };
    let text = serde_json::to_string_pretty(&RatesReport { config: args, rate }).map_err(json_err)? + "\n";
    Ok(Output {
        text,
        code: if rate.open { EXIT_OPEN } else { EXIT_OK },
    })
}

fn estimator_config(args: &EstimateArgs, budget: Budget) -> EstimatorConfig {
    EstimatorConfig {
        budget,
        lambda: args.lambda,
        beta: args.beta,
        eps: args.eps,
        trials: args.trials,
        seed: args.seed,
    }
}

/// Sorted estimate rows for `args`.
pub fn estimate_rows(args: &EstimateArgs, budget: Budget) -> Result<Vec<EstimateRow>> {
    let params = args.params.resolve()?;
    sweep(
        &params,
        args.j_min,
        args.j_max,
        &estimator_config(args, budget),
        args.witness_max,
    )
}

pub const CSV_COLUMNS: [&str; 7] = [
    "J",
    "regime",
    "total_rank",
    "value",
    "direction",
    "certified",
    "case_id",
];

pub fn rows_to_csv(rows: &[EstimateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.j.to_string(),
            r.regime.to_string(),
            r.total_rank.to_string(),
            r.value.to_string(),
            r.direction.to_string(),
            r.certified.to_string(),
            r.case_id.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

pub fn cmd_estimate(args: &EstimateArgs, budget: Budget) -> Result<Output> {
    let rows = estimate_rows(args, budget)?;
    let text = match args.format {
        Format::Csv => header("estimate", args, budget)? + &rows_to_csv(&rows)?,
        Format::Json => {
            let mut config = serde_json::to_value(args).map_err(json_err)?;
            config["budget"] = budget.0.into();
            serde_json::to_string_pretty(&serde_json::json!({ "config": config, "rows": rows })).map_err(json_err)?
                + "\n"
        }
    };
    Ok(Output::ok(text))
}

/// A parsed estimate CSV: the embedded config, if any, and `(J, total_rank, value, direction)` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateCsv {
    pub config: Option<serde_json::Value>,
    pub rows: Vec<(u32, u128, f64, Direction)>,
}

pub fn parse_estimate_csv(text: &str) -> Result<EstimateCsv> {
    let config = text
        .lines()
        .filter_map(|l| l.strip_prefix("# config "))
        .next()
        .map(|c| {
            serde_json::from_str(c).map_err(|e| Error::Parse {
                line: 0,
                msg: e.to_string(),
            })
        })
        .transpose()?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or(Error::Parse {
            line: 1,
            msg: format!("missing column {name}"),
        })
    };
    let (cj, cn, cv, cd) = (col("J")?, col("total_rank")?, col("value")?, col("direction")?);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let field = |c: usize| {
            rec.get(c).ok_or(Error::Parse {
                line,
                msg: "short row".into(),
            })
        };
        let bad = |msg: String| Error::Parse { line, msg };
        let direction = match field(cd)? {
            "upper" => Direction::Upper,
            "lower" => Direction::Lower,
            other => return Err(bad(format!("unknown direction {other}"))),
        };
        rows.push((
            field(cj)?.parse().map_err(|e| bad(format!("J: {e}")))?,
            field(cn)?.parse().map_err(|e| bad(format!("total_rank: {e}")))?,
            field(cv)?.parse().map_err(|e| bad(format!("value: {e}")))?,
            direction,
        ));
    }
    Ok(EstimateCsv { config, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fit: RateFit,
    pub predicted: RateExponent,
    /// `|slope - predicted n_power|`; absent for open cases.
    pub deviation: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

fn config_param(config: &Option<serde_json::Value>, key: &str) -> Option<String> {
    config.as_ref()?.get(key).and_then(|v| match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

pub fn fit_report(args: &FitArgs, text: &str) -> Result<FitReport> {
    let parsed = parse_estimate_csv(text)?;
    let want = match args.direction {
        DirectionArg::Upper => Direction::Upper,
        DirectionArg::Lower => Direction::Lower,
    };
    let samples: Vec<(f64, f64)> = parsed
        .rows
        .iter()
        .filter(|r| r.3 == want)
        .map(|r| (r.1 as f64, r.2))
        .collect();
    if samples.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least 4 {want} rows, got {}",
            samples.len()
        )));
    }
    let pick = |own: &Option<String>, key: &str| own.clone().or_else(|| config_param(&parsed.config, key));
    let d = parsed
        .config
        .as_ref()
        .and_then(|c| c.get("d"))
        .and_then(|v| v.as_u64())
        .map_or(args.params.d, |v| v as usize);
    let params = ParamArgs {
        p1: pick(&args.params.p1, "p1"),
        p2: pick(&args.params.p2, "p2"),
        t: pick(&args.params.t, "t"),
        d,
    }
    .resolve()?;
    let predicted = match args.kind {
        KindArg::Weyl => predict_weyl(&params)?,
        KindArg::Bernstein => predict_bernstein(&params)?,
        KindArg::Entropy => predict_entropy(&params)?,
    };
    let fit = fit_rate(
        &samples,
        params.d,
        &FitOptions {
            discard_fraction: args.discard,
            ..Default::default()
        },
    )?;
    let deviation = predicted.n_power.map(|p| (fit.slope - p).abs());
    Ok(FitReport {
        fit,
        predicted,
        deviation,
        tol: args.tol,
        pass: deviation.is_some_and(|d| d <= args.tol),
    })
}

/// Exit code 1 when the slope misses the tolerance, 2 when the case is open.
pub fn cmd_fit(args: &FitArgs) -> Result<Output> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", args.input.display())))?;
    let report = fit_report(args, &text)?;
    let code = if report.predicted.open {
        EXIT_OPEN
    } else if report.pass {
        EXIT_OK
    } else {
        EXIT_ERROR
    };
    let body =
        serde_json::to_string_pretty(&serde_json::json!({ "config": args, "report": report })).map_err(json_err)?;
    Ok(Output {
        text: body + "\n",
        code,
    })
}

/// Prints summary counts; exit code 1 on any failed record.
pub fn cmd_verify(args: &VerifyArgs) -> Result<Output> {
    let suite: Suite = args.suite.parse()?;
    let config = SuiteConfig {
        seed: args.seed,
        trials: args.trials,
        matrix_trials: args.matrix_trials,
        fault: args.fault,
    };
    let records = run_suite(suite, &config)?;
    if let Some(path) = &args.out {
        let body = header("verify", args, Budget::from_env())? + &to_json_lines(&records)?;
        fs::write(path, body).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    }
    let summary = SuiteSummary::from_records(&records);
    let mut text = format!(
        "suite {suite}: {} checks, {} failures\n",
        summary.total, summary.failures
    );
    for (name, (pass, fail)) in &summary.by_name {
        text.push_str(&format!("  {name:<20} {pass:>7} pass {fail:>5} fail\n"));
    }
    for r in records.iter().filter(|r| !r.pass).take(5) {
        text.push_str(&format!("  FAIL {}: {} > {}\n", r.name, r.left, r.right));
    }
    Ok(Output {
        text,
        code: if summary.failures == 0 { EXIT_OK } else { EXIT_ERROR },
    })
}

/// Exit code for an error: 2 for open cases, 1 otherwise.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::UncoveredCase(_) => EXIT_OPEN,
        _ => EXIT_ERROR,
    }
}

/// Runs a parsed command, writing to `--out` when given. Returns the text for stdout.
pub fn run(cli: &Cli) -> Result<Output> {
    let budget = Budget::from_env();
    let (out, path) = match &cli.command {
        Command::Rates(a) => (cmd_rates(a)?, a.out.clone()),
        Command::Estimate(a) => (cmd_estimate(a, budget)?, a.out.clone()),
        Command::Fit(a) => (cmd_fit(a)?, a.out.clone()),
        Command::Verify(a) => return cmd_verify(a),
    };
    match path {
        Some(p) => {
            fs::write(&p, &out.text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", p.display())))?;
            Ok(Output {
                text: String::new(),
                code: out.code,
            })
        }
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("snlab").chain(args.iter().copied())).unwrap()
    }

    fn estimate(args: &[&str]) -> EstimateArgs {
        match parse(args).command {
            Command::Estimate(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn rates_examples() {
        let out = run(&parse(&[
            "rates", "--kind", "weyl", "--p1", "2", "--p2", "2", "--t", "1", "--d", "2",
        ]))
        .unwrap();
        assert_eq!(out.code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out.text).unwrap();
        assert_eq!(v["n_power"], -1.0);
        assert_eq!(v["log_power"], 1.0);
        let out = run(&parse(&[
            "rates",
            "--kind",
            "bernstein",
            "--p1",
            "4",
            "--p2",
            "2",
            "--t",
            "0.2",
        ]))
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.text).unwrap();
        assert!((v["n_power"].as_f64().unwrap() + 0.4).abs() < 1e-15);
        let out = run(&parse(&[
            "rates", "--kind", "weyl", "--target", "linf", "--p", "4", "--t", "0.6",
        ]))
        .unwrap();
        assert_eq!(out.code, EXIT_OPEN);
        let err = run(&parse(&["rates", "--p1", "2", "--p2", "4", "--t", "0.1"])).unwrap_err();
        assert_eq!(error_code(&err), EXIT_ERROR);
    }

    #[test]
    fn estimate_examples() {
        let args = estimate(&[
            "estimate", "--p1", "2", "--p2", "2", "--t", "1", "--j-min", "3", "--j-max", "8",
        ]);
        let out = cmd_estimate(&args, Budget::default()).unwrap();
        assert!(out.text.starts_with("# snlab estimate\n# config {"));
        let parsed = parse_estimate_csv(&out.text).unwrap();
        let upper: Vec<_> = parsed.rows.iter().filter(|r| r.3 == Direction::Upper).collect();
        assert_eq!(upper.len(), 6);
        for r in upper {
            assert!((r.2 - 2f64.powi(-(r.0 as i32))).abs() <= 1e-12 * r.2);
        }
        assert_eq!(parsed.config.unwrap()["p1"], "2");
        let again = cmd_estimate(&args, Budget::default()).unwrap();
        assert_eq!(again, out);

        let args = estimate(&[
            "estimate", "--p1", "4", "--p2", "2", "--t", "0.2", "--j-min", "3", "--j-max", "6",
        ]);
        let rows = estimate_rows(&args, Budget::default()).unwrap();
        assert!(rows.iter().any(|r| r.direction == Direction::Upper));
        assert!(rows.iter().any(|r| r.direction == Direction::Lower));

        let args = estimate(&["estimate", "--p1", "2", "--p2", "3", "--t", "-0.5"]);
        assert_eq!(
            error_code(&cmd_estimate(&args, Budget::default()).unwrap_err()),
            EXIT_ERROR
        );

        let args = estimate(&["estimate", "--p1", "2", "--p2", "2", "--t", "1", "--j-max", "12"]);
        let err = cmd_estimate(&args, Budget(1000)).unwrap_err();
        assert!(err.to_string().contains("J = "), "{err}");

        let json = estimate(&["estimate", "--p1", "2", "--p2", "2", "--t", "1", "--format", "json"]);
        let v: serde_json::Value = serde_json::from_str(&cmd_estimate(&json, Budget::default()).unwrap().text).unwrap();
        assert_eq!(v["config"]["budget"], Budget::default().0);
        assert_eq!(v["rows"][0]["J"], 3);
    }

    fn fit_args(extra: &[&str]) -> FitArgs {
        let mut args = vec!["fit", "--input", "unused.csv"];
        args.extend_from_slice(extra);
        match parse(&args).command {
            Command::Fit(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn fit_examples() {
        let args = estimate(&[
            "estimate", "--p1", "2", "--p2", "2", "--t", "1", "--j-min", "4", "--j-max", "12",
        ]);
        let csv = cmd_estimate(&args, Budget::default()).unwrap().text;
        let report = fit_report(&fit_args(&[]), &csv).unwrap();
        assert!(report.pass, "{report:?}");

        // Exact rate n^{-1} (log n)^{1}.
        let mut synthetic = String::from("J,regime,total_rank,value,direction,certified,case_id\n");
        for j in 0..10 {
            let n = 10f64 * 2f64.powi(j);
            synthetic.push_str(&format!("{j},projection,{n},{},upper,certified,weyl-i\n", n.ln() / n));
        }
        let report = fit_report(&fit_args(&["--p1", "2", "--p2", "2", "--t", "1"]), &synthetic).unwrap();
        assert!(report.deviation.unwrap() < 1e-6);

        let short = synthetic.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(fit_report(&fit_args(&["--p1", "2", "--p2", "2", "--t", "1"]), &short).is_err());
        let broken = synthetic.replace("upper", "sideways");
        assert!(matches!(parse_estimate_csv(&broken), Err(Error::Parse { .. })));
    }

    #[test]
    fn verify_examples() {
        let v = |extra: &[&str]| {
            let mut a = vec!["verify", "--trials", "60", "--matrix-trials", "20"];
            a.extend_from_slice(extra);
            run(&parse(&a)).unwrap()
        };
        assert_eq!(v(&[]).code, EXIT_OK);
        let norms = v(&["--suite", "norms"]);
        assert!(norms.text.contains("norm-identity") && !norms.text.contains("axiom"));
        assert_eq!(v(&["--suite", "axioms", "--fault"]).code, EXIT_ERROR);
    }
}
