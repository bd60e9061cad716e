//! Command-line front end of `murspin`.
//!
//! [`run`] parses the arguments, executes one subcommand and returns the
//! process exit code: 0 on success, 1 when a computed invariant fails and 2
//! on invalid arguments.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use murspin::infoloss::{device_loss_by_states, device_loss_closed, mixed_state_bias, noisy_decomposition, visibility};
use murspin::minimize::{analytic_solution, bound_check, outer_search, LossReport, SearchOptions};
use murspin::orthogonal::{cloning_device_loss, cloning_loss_by_eigenstates, ordering_report, CloningSpec, OrderingOptions, OrderingReport};
use murspin::output::format_float;
use murspin::qcoeff::{q_closed_form, q_table, AngleGrid, LambdaWeights, QTable};
use murspin::spin::CMatrix;
use murspin::{tol, Direction, Error, SpinValue};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest allowed disagreement between the analytic and numerical optimum.
pub const ANALYTIC_AGREEMENT: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(name = "murspin", version, about = "Entropic measurement uncertainty of spin components")]
struct Cli {
    #[command(flatten)]
    config: CliConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct CliConfig {
    /// Convergence tolerance of the optimizer: final bracket width and stationarity
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = positive)]
    tolerance: f64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    /// Seed of the random multistart (used only when the start grid is too large)
    #[arg(long, global = true, default_value_t = SearchOptions::default().seed)]
    seed: u64,
    /// Write the result to this file instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for the parallel parts
    #[arg(long, global = true, env = "MURSPIN_THREADS")]
    threads: Option<usize>,
    /// Report entropies in nats instead of bits
    #[arg(long, global = true)]
    nats: bool,
}

fn positive(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

#[derive(Args, Debug)]
struct MeasurementArgs {
    /// Spin as a fraction or decimal, e.g. 3/2 or 1.5
    #[arg(long)]
    spin: SpinValue,
    /// cos θ₁ for spin 1 and 3/2
    #[arg(long, conflicts_with = "cosines")]
    a: Option<f64>,
    /// Free cosines c₁ > … > c_F > 0, or the full grid from 1 down to -1
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    cosines: Option<Vec<f64>>,
    /// Mixture weights λ_l for l = s, s-1, …, -s
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
}

impl MeasurementArgs {
    fn has_grid(&self) -> bool {
        self.a.is_some() || self.cosines.is_some()
    }

    /// The unbiased grid unless `--a` or `--cosines` is given.
    fn grid(&self) -> murspin::Result<AngleGrid> {
        let s = self.spin;
        match (&self.a, &self.cosines) {
            (Some(a), _) => AngleGrid::from_a(s, *a),
            (None, Some(c)) if c.len() == s.dim() + 1 => AngleGrid::new(s, c.clone()),
            (None, Some(c)) => AngleGrid::from_free(s, c),
            (None, None) => Ok(AngleGrid::unbiased(s)),
        }
    }

    /// `δ_{l,s}` unless `--lambdas` is given.
    fn lambdas(&self) -> murspin::Result<LambdaWeights> {
        match &self.lambdas {
            Some(w) => LambdaWeights::new(self.spin, w.clone()),
            None => Ok(LambdaWeights::delta(self.spin, self.spin.at(0))),
        }
    }
}

#[derive(Args, Debug)]
struct DirectionArg {
    /// Measured direction as three components (normalized on input)
    #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true, default_value = "0,0,1")]
    direction: Vec<f64>,
}

impl DirectionArg {
    fn direction(&self) -> murspin::Result<Direction> {
        let [x, y, z] = self.direction[..] else {
            return Err(Error::Domain(format!("direction needs 3 components, got {}", self.direction.len())));
        };
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("direction must be a nonzero finite vector".into()));
        }
        Direction::new([x / norm, y / norm, z / norm])
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transition table q(m|l,h) with its structural residuals
    Qtable(MeasurementArgs),
    /// Minimum information loss of all spin components
    Minloss {
        #[arg(long)]
        spin: SpinValue,
    },
    /// Device information loss of one covariant measurement
    Loss {
        #[command(flatten)]
        measurement: MeasurementArgs,
        #[command(flatten)]
        direction: DirectionArg,
    },
    /// Visibility and noise of a marginal
    Decomposition {
        #[command(flatten)]
        measurement: MeasurementArgs,
        #[command(flatten)]
        direction: DirectionArg,
    },
    /// Cloning-based joint measurement of two or three orthogonal components
    Cloning {
        #[arg(long)]
        spin: SpinValue,
        /// Number of orthogonal components
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(2..=3))]
        components: u32,
    },
    /// Ordering of the information losses and their bounds
    Ordering {
        #[arg(long)]
        max_spin: SpinValue,
        /// Largest spin for which I_s[A∞] is computed numerically
        #[arg(long, default_value = "2")]
        numeric_cap: SpinValue,
        /// Directory receiving one `s,value` CSV per quantity
        #[arg(long)]
        plot_dir: Option<PathBuf>,
    },
    /// Relative entropy between the uniform distribution and the marginal on the mixed state
    Bias {
        /// Uses the optimal measurement unless a grid or weights are given
        #[command(flatten)]
        measurement: MeasurementArgs,
    },
}

enum Failure {
    Usage(String),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpin(_)
            | Error::InvalidIndex { .. }
            | Error::NonUnitDirection(_)
            | Error::InvalidGrid(_)
            | Error::InvalidWeights(_)
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Invariant(e.to_string()),
        }
    }
}

/// Rendered output plus the invariant failures found while computing it.
struct Outcome {
    body: String,
    failures: Vec<String>,
}

struct Ctx {
    format: OutputFormat,
    /// multiplier from bits to the reporting unit
    unit: f64,
    unit_name: &'static str,
    search: SearchOptions,
}

impl Ctx {
    fn e(&self, bits: f64) -> f64 {
        bits * self.unit
    }
}

/// Runs the command line `args` (including the program name), writing
/// results to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let cfg = &cli.config;
    let ctx = Ctx {
        format: cfg.format,
        unit: if cfg.nats { std::f64::consts::LN_2 } else { 1.0 },
        unit_name: if cfg.nats { "nats" } else { "bits" },
        search: SearchOptions { tol: cfg.tolerance, seed: cfg.seed, ..SearchOptions::default() },
    };
    let result = match cfg.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command, &ctx)),
            Err(e) => Err(Failure::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli.command, &ctx),
    };
    deliver(result, cfg.output.as_deref(), out, err)
}

/// Writes the outcome and maps it to the exit code.
fn deliver(result: Result<Outcome, Failure>, output: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let outcome = match result {
        Ok(o) => o,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
        Err(Failure::Invariant(msg)) => {
            let _ = writeln!(err, "invariant failure: {msg}");
            return EXIT_INVARIANT;
        }
    };
    let written = match output {
        Some(path) => fs::write(path, &outcome.body).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => out.write_all(outcome.body.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    if outcome.failures.is_empty() {
        EXIT_OK
    } else {
        for f in &outcome.failures {
            let _ = writeln!(err, "invariant failure: {f}");
        }
        EXIT_INVARIANT
    }
}

fn execute(command: &Command, ctx: &Ctx) -> Result<Outcome, Failure> {
    match command {
        Command::Qtable(m) => cmd_qtable(m, ctx),
        Command::Minloss { spin } => cmd_minloss(*spin, ctx),
        Command::Loss { measurement, direction } => cmd_loss(measurement, &direction.direction()?, ctx),
        Command::Decomposition { measurement, direction } => cmd_decomposition(measurement, &direction.direction()?, ctx),
        Command::Cloning { spin, components } => cmd_cloning(*spin, *components, ctx),
        Command::Ordering { max_spin, numeric_cap, plot_dir } => cmd_ordering(*max_spin, *numeric_cap, plot_dir.as_deref(), ctx),
        Command::Bias { measurement } => cmd_bias(measurement, ctx),
    }
}

fn json_body(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn csv_body(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn labels(s: SpinValue) -> Vec<String> {
    s.indices().map(|m| m.to_string()).collect()
}

fn fmt_matrix(out: &mut String, row_labels: &[String], col_labels: &[String], rows: &[Vec<f64>]) {
    let _ = write!(out, "{:>8}", "");
    for c in col_labels {
        let _ = write!(out, " {c:>20}");
    }
    out.push('\n');
    for (label, row) in row_labels.iter().zip(rows) {
        let _ = write!(out, "{label:>8}");
        for v in row {
            let _ = write!(out, " {v:>20.16}");
        }
        out.push('\n');
    }
}

fn cmd_qtable(args: &MeasurementArgs, ctx: &Ctx) -> Result<Outcome, Failure> {
    let s = args.spin;
    let grid = args.grid()?;
    let table = q_table(s, &grid)?;
    let residuals = table.residuals();
    let mixed = args.lambdas.as_ref().map(|_| args.lambdas().and_then(|l| table.mixed(&l))).transpose()?;
    let closed = closed_form_deviation(&table)?;
    let mut failures = Vec::new();
    if !residuals.passes(tol::STRUCTURAL) {
        failures.push(format!(
            "q-table residuals: min entry {:e}, max violation {:e}",
            residuals.min_entry,
            residuals.max_violation()
        ));
    }
    if let Some(d) = closed.filter(|&d| d > tol::STRUCTURAL) {
        failures.push(format!("q-table differs from the closed form by {d:e}"));
    }
    let n = s.dim();
    let lab = labels(s);
    let body = match ctx.format {
        OutputFormat::Json => {
            let table_json: Value = serde_json::from_str(&table.to_json()?).map_err(Error::from)?;
            json_body(&json!({
                "table": table_json,
                "residuals": residuals,
                "max_residual": residuals.max_violation(),
                "closed_form_deviation": closed,
                "mixed": mixed,
            }))
        }
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv output is UTF-8")
        }
        OutputFormat::Table => {
            let mut o = String::new();
            let _ = writeln!(o, "spin {s}, cosines [{}]", grid.cosines().iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(", "));
            for (mp, m) in lab.iter().enumerate() {
                let _ = writeln!(o, "\nq(m = {m} | l, h)   rows l, columns h");
                let rows: Vec<Vec<f64>> = (0..n).map(|l| (0..n).map(|h| table.at(mp, l, h)).collect()).collect();
                fmt_matrix(&mut o, &lab, &lab, &rows);
            }
            if let Some(w) = &mixed {
                let _ = writeln!(o, "\nΣ_l λ_l q(m | l, h)   rows m, columns h");
                fmt_matrix(&mut o, &lab, &lab, w);
            }
            let _ = writeln!(o, "\nresiduals");
            let _ = writeln!(o, "  min entry          {:.3e}", residuals.min_entry);
            let _ = writeln!(o, "  normalization      {:.3e}", residuals.normalization);
            let _ = writeln!(o, "  sum rule           {:.3e}", residuals.sum_rule);
            let _ = writeln!(o, "  swap l <-> h       {:.3e}", residuals.swap);
            let _ = writeln!(o, "  (l,h) -> (-l,-h)   {:.3e}", residuals.reflect_labels);
            let _ = writeln!(o, "  (m,h) -> (-m,-h)   {:.3e}", residuals.reflect_outcome);
            if let Some(d) = closed {
                let _ = writeln!(o, "  vs closed form     {d:.3e}");
            }
            o
        }
    };
    Ok(Outcome { body, failures })
}

/// Largest deviation from the closed-form table, where one exists.
fn closed_form_deviation(table: &QTable) -> murspin::Result<Option<f64>> {
    let s = table.spin();
    let a = match s.twice() {
        1 => 0.5,
        2 | 3 => table.grid().free()[0],
        _ => return Ok(None),
    };
    let mut worst: f64 = 0.0;
    for m in s.indices() {
        for l in s.indices() {
            for h in s.indices() {
                worst = worst.max((table.get(m, l, h) - q_closed_form(s, a, m, l, h)?).abs());
            }
        }
    }
    Ok(Some(worst))
}

fn report_json(r: &LossReport, ctx: &Ctx) -> murspin::Result<Value> {
    let mut v: Value = serde_json::from_str(&r.to_json()?)?;
    v["info_loss"] = json!(ctx.e(r.info_loss));
    Ok(v)
}

fn cmd_minloss(s: SpinValue, ctx: &Ctx) -> Result<Outcome, Failure> {
    let numeric = outer_search(s, &ctx.search)?;
    let analytic = analytic_solution(s).ok();
    let check = bound_check(&numeric)?;
    let mut failures = Vec::new();
    if !check.passed {
        failures.push(format!("bound check failed: {check:?}"));
    }
    let mut compared: Vec<(&str, f64, f64)> = Vec::new();
    if let Some(a) = &analytic {
        compared.push(("K_s", a.k_value, numeric.k_value));
        compared.push(("I_s", ctx.e(a.info_loss), ctx.e(numeric.info_loss)));
        for (i, (x, y)) in a.grid_opt.free().iter().zip(numeric.grid_opt.free()).enumerate() {
            compared.push((["a0", "c2", "c3"][i.min(2)], *x, *y));
        }
        for (name, x, y) in &compared {
            if (x - y).abs() > ANALYTIC_AGREEMENT {
                failures.push(format!("{name}: analytic {x} and numeric {y} differ by more than {ANALYTIC_AGREEMENT:e}"));
            }
        }
    }
    let body = match ctx.format {
        OutputFormat::Json => json_body(&json!({
            "unit": ctx.unit_name,
            "numeric": report_json(&numeric, ctx)?,
            "analytic": analytic.as_ref().map(|a| report_json(a, ctx)).transpose()?,
            "bound_check": check,
        })),
        OutputFormat::Csv => {
            let a = analytic.as_ref();
            let cell = |v: Option<f64>| v.map(format_float).unwrap_or_default();
            let mut rows = vec![
                vec!["K_s".into(), format_float(numeric.k_value), cell(a.map(|a| a.k_value))],
                vec![format!("I_s[{}]", ctx.unit_name), format_float(ctx.e(numeric.info_loss)), cell(a.map(|a| ctx.e(a.info_loss)))],
                vec!["slackness_residual".into(), format_float(numeric.slackness_residual), cell(a.map(|a| a.slackness_residual))],
            ];
            for (i, c) in numeric.grid_opt.free().iter().enumerate() {
                rows.push(vec![format!("c{}", i + 1), format_float(*c), cell(a.map(|a| a.grid_opt.free()[i]))]);
            }
            for (p, m) in s.indices().enumerate() {
                rows.push(vec![format!("lambda({m})"), format_float(numeric.lambdas_opt.weights()[p]), cell(a.map(|a| a.lambdas_opt.weights()[p]))]);
            }
            csv_body(&["quantity", "numeric", "analytic"], &rows)
        }
        OutputFormat::Table => {
            let mut o = numeric.to_string();
            if ctx.unit != 1.0 {
                let _ = writeln!(o, "I_s [{}]            {:.15}", ctx.unit_name, ctx.e(numeric.info_loss));
            }
            if !compared.is_empty() {
                let _ = writeln!(o, "\n{:<8} {:>22} {:>22} {:>12}", "quantity", "analytic", "numeric", "delta");
                for (name, x, y) in &compared {
                    let _ = writeln!(o, "{name:<8} {x:>22.16} {y:>22.16} {:>12.3e}", (x - y).abs());
                }
            }
            o
        }
    };
    Ok(Outcome { body, failures })
}

fn cmd_loss(args: &MeasurementArgs, n: &Direction, ctx: &Ctx) -> Result<Outcome, Failure> {
    let table = q_table(args.spin, &args.grid()?)?;
    let lambdas = args.lambdas()?;
    let eta = visibility(&table, &lambdas)?;
    let closed = device_loss_closed(&table, &lambdas)?;
    let by_states = device_loss_by_states(&table, &lambdas, n)?;
    let mut failures = Vec::new();
    if (closed - by_states).abs() > 1e-9 {
        failures.push(format!("closed-form loss {closed} and state maximum {by_states} disagree"));
    }
    let pairs = [
        ("visibility", eta),
        ("device_loss", ctx.e(closed)),
        ("device_loss_by_states", ctx.e(by_states)),
    ];
    let body = render_pairs(args.spin, &[], &pairs, ctx);
    Ok(Outcome { body, failures })
}

fn render_pairs(s: SpinValue, labels: &[(&str, String)], pairs: &[(&str, f64)], ctx: &Ctx) -> String {
    match ctx.format {
        OutputFormat::Json => {
            let mut m = serde_json::Map::new();
            m.insert("s".into(), json!(s.to_string()));
            m.insert("unit".into(), json!(ctx.unit_name));
            for (k, v) in labels {
                m.insert((*k).into(), json!(v));
            }
            for (k, v) in pairs {
                m.insert((*k).into(), json!(v));
            }
            json_body(&Value::Object(m))
        }
        OutputFormat::Csv => {
            let mut rows = vec![vec!["s".to_string(), s.to_string()]];
            rows.extend(labels.iter().map(|(k, v)| vec![k.to_string(), v.clone()]));
            rows.extend(pairs.iter().map(|(k, v)| vec![k.to_string(), format_float(*v)]));
            csv_body(&["quantity", "value"], &rows)
        }
        OutputFormat::Table => {
            let mut o = format!("{:<28} {s}\n", "spin");
            for (k, v) in labels {
                let _ = writeln!(o, "{k:<28} {v}");
            }
            for (k, v) in pairs {
                let _ = writeln!(o, "{k:<28} {v:.16}");
            }
            let _ = writeln!(o, "{:<28} {}", "unit", ctx.unit_name);
            o
        }
    }
}

fn matrix_json(m: &CMatrix) -> Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    json!(rows)
}

fn cmd_decomposition(args: &MeasurementArgs, n: &Direction, ctx: &Ctx) -> Result<Outcome, Failure> {
    let s = args.spin;
    let table = q_table(s, &args.grid()?)?;
    let d = noisy_decomposition(&table, &args.lambdas()?, n)?;
    let mut failures = Vec::new();
    if d.reconstruction_residual > tol::STRUCTURAL {
        failures.push(format!("reconstruction residual {:e}", d.reconstruction_residual));
    }
    let lab = labels(s);
    let body = match ctx.format {
        OutputFormat::Json => json_body(&json!({
            "s": s.to_string(),
            "visibility": d.visibility,
            "reconstruction_residual": d.reconstruction_residual,
            "noise": lab.iter().zip(&d.noise).map(|(m, e)| json!({"m": m, "matrix": matrix_json(e)})).collect::<Vec<_>>(),
        })),
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            for (m, e) in lab.iter().zip(&d.noise) {
                for i in 0..e.nrows() {
                    for j in 0..e.ncols() {
                        rows.push(vec![m.clone(), lab[i].clone(), lab[j].clone(), format_float(e[(i, j)].re), format_float(e[(i, j)].im)]);
                    }
                }
            }
            let mut text = format!("# visibility {}\n", format_float(d.visibility));
            text.push_str(&csv_body(&["m", "row", "col", "re", "im"], &rows));
            text
        }
        OutputFormat::Table => {
            let mut o = format!("spin {s}\nvisibility             {:.16}\nreconstruction error   {:.3e}\n", d.visibility, d.reconstruction_residual);
            for (m, e) in lab.iter().zip(&d.noise) {
                let _ = writeln!(o, "\nnoise N({m}), real part");
                let rows: Vec<Vec<f64>> = (0..e.nrows()).map(|i| (0..e.ncols()).map(|j| e[(i, j)].re).collect()).collect();
                fmt_matrix(&mut o, &lab, &lab, &rows);
                let imag = (0..e.nrows()).flat_map(|i| (0..e.ncols()).map(move |j| (i, j))).map(|(i, j)| e[(i, j)].im.abs()).fold(0.0, f64::max);
                if imag > 0.0 {
                    let _ = writeln!(o, "  max |imaginary part| {imag:.3e}");
                }
            }
            o
        }
    };
    Ok(Outcome { body, failures })
}

fn cmd_cloning(s: SpinValue, r: u32, ctx: &Ctx) -> Result<Outcome, Failure> {
    let spec = CloningSpec::new(s, r)?;
    let closed = cloning_device_loss(&spec);
    let oracle = cloning_loss_by_eigenstates(&spec)?;
    let mut failures = Vec::new();
    if (closed - oracle).abs() > tol::STRUCTURAL {
        failures.push(format!("closed-form cloning loss {closed} and eigenstate maximum {oracle} disagree"));
    }
    let (num, den) = spec.visibility_fraction();
    let pairs = [
        ("clone_weight", spec.weight()),
        ("visibility", spec.visibility()),
        ("device_loss", ctx.e(closed)),
        ("device_loss_by_eigenstates", ctx.e(oracle)),
    ];
    let body = render_pairs(s, &[("components", r.to_string()), ("visibility_exact", format!("{num}/{den}"))], &pairs, ctx);
    Ok(Outcome { body, failures })
}

fn scaled(report: &OrderingReport, unit: f64) -> OrderingReport {
    let mut r = report.clone();
    for row in &mut r.rows {
        row.value *= unit;
    }
    for c in &mut r.checks {
        c.lhs *= unit;
        c.rhs *= unit;
        c.margin *= unit;
    }
    r
}

fn cmd_ordering(max_s: SpinValue, numeric_cap: SpinValue, plot_dir: Option<&Path>, ctx: &Ctx) -> Result<Outcome, Failure> {
    let opts = OrderingOptions { numeric_cap, search: ctx.search.clone(), ..OrderingOptions::default() };
    let report = scaled(&ordering_report(max_s, &opts)?, ctx.unit);
    let failures: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.statement)).collect();
    if let Some(dir) = plot_dir {
        fs::create_dir_all(dir).map_err(Error::from)?;
        for q in report.quantities() {
            fs::write(dir.join(format!("{q}.csv")), report.plot_csv(&q)?).map_err(Error::from)?;
        }
        fs::write(dir.join("checks.csv"), report.checks_csv()?).map_err(Error::from)?;
    }
    let body = match ctx.format {
        OutputFormat::Json => {
            let mut v: Value = serde_json::from_str(&report.to_json()?).map_err(Error::from)?;
            v["unit"] = json!(ctx.unit_name);
            v["all_passed"] = json!(report.all_passed());
            json_body(&v)
        }
        OutputFormat::Csv => format!("{}\n{}", report.rows_csv()?, report.checks_csv()?),
        OutputFormat::Table => {
            let passed = report.checks.iter().filter(|c| c.passed).count();
            format!("values in {}\n{report}\n{passed}/{} checks passed\n", ctx.unit_name, report.checks.len())
        }
    };
    Ok(Outcome { body, failures })
}

fn cmd_bias(args: &MeasurementArgs, ctx: &Ctx) -> Result<Outcome, Failure> {
    let s = args.spin;
    let (table, lambdas, source) = if args.has_grid() || args.lambdas.is_some() {
        (q_table(s, &args.grid()?)?, args.lambdas()?, "given")
    } else {
        let (report, source) = match analytic_solution(s) {
            Ok(r) => (r, "analytic optimum"),
            Err(_) => (outer_search(s, &ctx.search)?, "numerical optimum"),
        };
        (q_table(s, &report.grid_opt)?, report.lambdas_opt, source)
    };
    let bias = mixed_state_bias(&table, &lambdas)?;
    let free = table.grid().free().to_vec();
    let body = match ctx.format {
        OutputFormat::Json => json_body(&json!({
            "s": s.to_string(),
            "unit": ctx.unit_name,
            "measurement": source,
            "free_cosines": free,
            "lambdas": lambdas.weights(),
            "bias": ctx.e(bias),
        })),
        OutputFormat::Csv => {
            let mut rows = vec![vec!["s".to_string(), s.to_string()], vec![format!("bias[{}]", ctx.unit_name), format_float(ctx.e(bias))]];
            rows.extend(free.iter().enumerate().map(|(i, c)| vec![format!("c{}", i + 1), format_float(*c)]));
            csv_body(&["quantity", "value"], &rows)
        }
        OutputFormat::Table => {
            let mut o = format!("spin          {s}\nmeasurement   {source}\n");
            if !free.is_empty() {
                let _ = writeln!(o, "free cosines  {free:?}");
            }
            let _ = writeln!(o, "bias          {:.16} {}", ctx.e(bias), ctx.unit_name);
            o
        }
    };
    Ok(Outcome { body, failures: Vec::new() })
}
