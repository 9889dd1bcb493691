//! Command-line front end: classify, table, invariant, sweep, verify.
//!
//! Every command renders into a string so the binary and the tests share
//! one code path. Exit codes: 0 ok, 2 no reliable answer (indeterminate,
//! unstable, too large, unsupported), 3 gap assumption violated, 4 schema.

use crate::class::{symmetry_class, verify_class};
use crate::clifford::{abs_index_group, check_graded_rep, stable_reduce, GroupTag};
use crate::linalg;
use crate::model::{self, LatticeModel, ModelError, ModelFile};
use crate::pairing::{self, InvariantResult, PairingError, PairingOptions};
use crate::symmetry::{self, classify, SymmetrySpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INDETERMINATE: i32 = 2;
pub const EXIT_GAP: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;

/// Golden rendering of the periodic table, regenerated by `tenfold table`.
pub const GOLDEN_TABLE_TEXT: &str = include_str!("../data/table.txt");
pub const GOLDEN_TABLE_JSON: &str = include_str!("../data/table.json");

#[derive(Parser, Debug)]
#[command(name = "tenfold", version, about = "Tenfold-way classification and lattice index invariants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clifford class and index group per dimension for a symmetry spec.
    Classify(ClassifyArgs),
    /// The periodic table for d = 0..3.
    Table(OutputArgs),
    /// Index invariant of a model over an L schedule.
    Invariant(RunArgs),
    /// Invariant over a parameter grid or over disorder seeds.
    Sweep(SweepArgs),
    /// Structural checks without computing indices.
    Verify(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    /// Model file or bare symmetry JSON such as {"T":-1}.
    #[arg(long, conflicts_with_all = ["builtin", "symmetry"])]
    pub model: Option<PathBuf>,
    #[arg(long, conflicts_with = "symmetry")]
    pub builtin: Option<String>,
    /// Inline symmetry JSON.
    #[arg(long)]
    pub symmetry: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// JSON model file.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub builtin: Option<String>,
    /// Builtin parameter, `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Fermi level, overriding the model's.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Largest box radius; the schedule is the three radii ending here
    /// (step 2, or 1 in d = 3).
    #[arg(long = "L", conflicts_with = "schedule")]
    pub l: Option<usize>,
    /// Explicit comma-separated, strictly increasing radii.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    /// Absolute on-site disorder amplitude.
    #[arg(long = "disorder-sigma")]
    pub disorder_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Position offset x0, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offset: Option<Vec<f64>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Grid axis `name=start:stop:count`; one or two.
    #[arg(long = "grid", value_parser = parse_axis)]
    pub grid: Vec<Axis>,
    /// Number of disorder seeds starting at `--seed`.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=start:stop:count, got '{s}'"))?;
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:count, got '{v}'"));
    }
    let a: f64 = parts[0].parse().map_err(|_| format!("bad start '{}'", parts[0]))?;
    let b: f64 = parts[1].parse().map_err(|_| format!("bad stop '{}'", parts[1]))?;
    let n: usize = parts[2].parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
    if n == 0 {
        return Err("count must be positive".into());
    }
    let values = if n == 1 { vec![a] } else { (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect() };
    Ok(Axis { name: k.trim().to_string(), values })
}

/// Rendered result of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    fn schema(msg: impl Into<String>) -> Self {
        CliError { code: "schema", message: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        exit_for(self.code)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError { code: e.code(), message: e.to_string() }
    }
}

impl From<PairingError> for CliError {
    fn from(e: PairingError) -> Self {
        CliError { code: e.code(), message: e.to_string() }
    }
}

impl From<symmetry::SymmetryError> for CliError {
    fn from(e: symmetry::SymmetryError) -> Self {
        CliError::schema(e.to_string())
    }
}

/// Exit code of an error code string.
pub fn exit_for(code: &str) -> i32 {
    match code {
        "mu_in_spectrum" | "disorder_closes_gap" => EXIT_GAP,
        "schema" | "flux_with_antilinear_symmetry" | "io" => EXIT_SCHEMA,
        _ => EXIT_INDETERMINATE,
    }
}

/// Parses arguments and runs; clap errors map to exit code 4 (help and
/// version requests to 0).
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            }
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let (output, res) = match &cli.command {
        Command::Classify(a) => (&a.output, cmd_classify(a)),
        Command::Table(o) => (o, cmd_table(o.format)),
        Command::Invariant(a) => (&a.output, cmd_invariant(a)),
        Command::Sweep(a) => (&a.run.output, cmd_sweep(a)),
        Command::Verify(a) => (&a.output, cmd_verify(a)),
    };
    let (code, body, stderr) = match res {
        Ok(r) => (r.code, r.body, r.stderr),
        Err(e) => {
            let body = match output.format {
                Format::Json => to_json(&json!({"error": {"code": e.code, "message": e.message}})),
                _ => String::new(),
            };
            (e.exit_code(), body, format!("error[{}]: {}\n", e.code, e.message))
        }
    };
    match &output.out {
        Some(path) if !body.is_empty() => match std::fs::write(path, &body) {
            Ok(()) => Outcome { code, stdout: String::new(), stderr },
            Err(e) => Outcome { code: EXIT_SCHEMA, stdout: String::new(), stderr: format!("{stderr}error[io]: {}: {e}\n", path.display()) },
        },
        _ => Outcome { code, stdout: body, stderr },
    }
}

struct Rendered {
    code: i32,
    body: String,
    stderr: String,
}

impl Rendered {
    fn ok(body: String) -> Self {
        Rendered { code: EXIT_OK, body, stderr: String::new() }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// classify and table

#[derive(Clone, Debug, Serialize)]
pub struct ClassRow {
    pub symmetry: String,
    pub cartan: String,
    pub class: String,
    pub groups: Vec<String>,
}

pub fn class_row(spec: &SymmetrySpec) -> Result<ClassRow, symmetry::SymmetryError> {
    let cl = classify(spec)?;
    let n = stable_reduce(cl).stable_class();
    Ok(ClassRow {
        symmetry: spec.to_string(),
        cartan: spec.cartan().to_string(),
        class: cl.to_string(),
        groups: (0..4).map(|d| abs_index_group(cl.field, n, d).symbol().to_string()).collect(),
    })
}

/// `"Cℓ_{4,0}; d=0:(2)Z d=1:0 d=2:Z2 d=3:Z2"`.
pub fn class_line(row: &ClassRow) -> String {
    let cells: Vec<String> = row.groups.iter().enumerate().map(|(d, g)| format!("d={d}:{g}")).collect();
    format!("{}; {}", row.class, cells.join(" "))
}

fn spec_from_value(v: &Value) -> Result<SymmetrySpec, CliError> {
    let sym = if v.get("dimension").is_some() {
        let f: ModelFile = serde_json::from_value(v.clone()).map_err(|e| CliError::schema(e.to_string()))?;
        f.symmetry
    } else {
        serde_json::from_value::<model::SymmetryFile>(v.clone()).map_err(|e| CliError::schema(e.to_string()))?
    };
    let spec = sym.spec();
    spec.validate()?;
    Ok(spec)
}

fn cmd_classify(a: &ClassifyArgs) -> Result<Rendered, CliError> {
    let spec = if let Some(path) = &a.model {
        let text = read(path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::schema(e.to_string()))?;
        spec_from_value(&v)?
    } else if let Some(s) = &a.symmetry {
        let v: Value = serde_json::from_str(s).map_err(|e| CliError::schema(e.to_string()))?;
        spec_from_value(&v)?
    } else if let Some(name) = &a.builtin {
        model::builtin(name, &BTreeMap::new())?.spec
    } else {
        return Err(CliError::schema("classify needs --model, --builtin or --symmetry"));
    };
    let row = class_row(&spec)?;
    Ok(Rendered::ok(match a.output.format {
        Format::Json => to_json(&row),
        Format::Text => format!("{}\n", class_line(&row)),
        Format::Csv => format!("symmetry,cartan,class,d0,d1,d2,d3\n{}\n", csv_row(&row)),
    }))
}

fn csv_row(r: &ClassRow) -> String {
    format!("\"{}\",{},{},{}", r.symmetry, r.cartan, r.class, r.groups.join(","))
}

/// The 10 x 4 table, always recomputed from `classify` and the group map.
pub fn table_rows() -> Vec<ClassRow> {
    SymmetrySpec::all().iter().map(|s| class_row(s).expect("table specs are valid")).collect()
}

pub fn render_table(format: Format) -> String {
    let rows = table_rows();
    match format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut s = String::from("symmetry,cartan,class,d0,d1,d2,d3\n");
            for r in &rows {
                s.push_str(&csv_row(r));
                s.push('\n');
            }
            s
        }
        Format::Text => {
            let mut lines = vec![format!("{:<12} {:<6} {:<10} {:<5} {:<5} {:<5} {}", "symmetry", "cartan", "class", "d=0", "d=1", "d=2", "d=3")];
            for r in &rows {
                let mut line = format!("{:<12} {:<6} {:<10}", r.symmetry, r.cartan, r.class);
                for g in &r.groups {
                    let _ = write!(line, " {g:<5}");
                }
                lines.push(line.trim_end().to_string());
            }
            lines.join("\n") + "\n"
        }
    }
}

fn cmd_table(format: Format) -> Result<Rendered, CliError> {
    Ok(Rendered::ok(render_table(format)))
}

// ---------------------------------------------------------------------------
// model loading

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError { code: "io", message: format!("{}: {e}", path.display()) })
}

/// Model from the arguments, with `--mu` and `--param` applied.
pub fn load_model(a: &ModelArgs) -> Result<LatticeModel, CliError> {
    let mut m = if let Some(path) = &a.model {
        if !a.params.is_empty() {
            return Err(CliError::schema("--param applies to builtins only"));
        }
        model::build(&ModelFile::from_json(&read(path)?)?)?
    } else if let Some(name) = &a.builtin {
        let given: BTreeMap<String, f64> = a.params.iter().cloned().collect();
        model::builtin(name, &given)?
    } else {
        return Err(CliError::schema("one of --model or --builtin is required"));
    };
    if let Some(mu) = a.mu {
        m.mu = mu;
    }
    Ok(m)
}

/// Schedule from `--L` / `--schedule`, else the model default.
pub fn schedule_for(a: &RunArgs, m: &LatticeModel) -> Result<Vec<usize>, CliError> {
    let s = match (&a.schedule, a.l) {
        (Some(s), _) => s.clone(),
        (None, Some(l)) => {
            let step = if m.d == 3 { 1 } else { 2 };
            (0..3).rev().filter_map(|k| l.checked_sub(k * step)).collect()
        }
        (None, None) => pairing::model_schedule(m),
    };
    if s.is_empty() {
        return Err(CliError::schema("empty L schedule"));
    }
    if a.schedule.is_some() && s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::schema("L schedule must be strictly increasing"));
    }
    Ok(s)
}

fn options(a: &RunArgs) -> PairingOptions {
    PairingOptions { offset: a.offset.clone(), ..PairingOptions::default() }
}

fn with_disorder(m: &LatticeModel, sigma: Option<f64>, seed: u64) -> Result<LatticeModel, CliError> {
    match sigma {
        None => Ok(m.clone()),
        Some(s) if !(s >= 0.0) => Err(CliError::schema("disorder sigma must be non-negative")),
        Some(s) => {
            let gap = model::bulk_gap_at(m, m.mu, model::default_nk(m.d));
            Ok(model::add_disorder(m, s, seed, gap)?)
        }
    }
}

// ---------------------------------------------------------------------------
// invariant

pub fn compute(a: &RunArgs) -> Result<InvariantResult, CliError> {
    let m = load_model(&a.model)?;
    let schedule = schedule_for(a, &m)?;
    let m = with_disorder(&m, a.disorder_sigma, a.seed)?;
    Ok(pairing::invariant(&m, &schedule, &options(a))?)
}

fn invariant_code(r: &InvariantResult) -> i32 {
    if r.stable || r.group == GroupTag::Zero {
        EXIT_OK
    } else {
        EXIT_INDETERMINATE
    }
}

fn fmt_opt(v: Option<i64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "?".into())
}

pub fn render_invariant(r: &InvariantResult, format: Format) -> String {
    match format {
        Format::Json => to_json(r),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{} {} ({}) {} d={}", r.model, r.symmetry, r.cartan, r.class, r.d);
            let _ = writeln!(
                s,
                "group {} value {} stable {} route {}",
                r.group.symbol(),
                fmt_opt(r.value),
                if r.stable { "yes" } else { "no" },
                serde_json::to_value(r.route).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            );
            for lv in &r.levels {
                let _ = write!(s, "  L={:<3} dim={:<6} value={:<3} {}", lv.l, lv.dim, fmt_opt(lv.value), lv.status);
                if let Some(k) = &lv.kernel {
                    let _ = write!(s, " kernel={}", k.dim);
                    if k.ratio_gap.is_finite() {
                        let _ = write!(s, " ratio={:.2e}", k.ratio_gap);
                    }
                }
                if let Some(c) = lv.cross_check {
                    let _ = write!(s, " check={c}");
                }
                if let Some(ch) = &lv.chern {
                    let _ = write!(s, " chern={:.4}", ch.value);
                }
                s.push('\n');
            }
            s
        }
        Format::Csv => {
            let mut s = String::from("l,dim,value,status,kernel_dim,ratio_gap,cross_check,chern\n");
            for lv in &r.levels {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    lv.l,
                    lv.dim,
                    lv.value.map(|v| v.to_string()).unwrap_or_default(),
                    lv.status,
                    lv.kernel.as_ref().map(|k| k.dim.to_string()).unwrap_or_default(),
                    lv.kernel.as_ref().filter(|k| k.ratio_gap.is_finite()).map(|k| format!("{:e}", k.ratio_gap)).unwrap_or_default(),
                    lv.cross_check.map(|v| v.to_string()).unwrap_or_default(),
                    lv.chern.as_ref().map(|c| format!("{}", c.value)).unwrap_or_default(),
                );
            }
            s
        }
    }
}

fn cmd_invariant(a: &RunArgs) -> Result<Rendered, CliError> {
    let r = compute(a)?;
    let stderr = r.warnings.iter().map(|w| format!("warning: {w}\n")).collect();
    Ok(Rendered { code: invariant_code(&r), body: render_invariant(&r, a.output.format), stderr })
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub value: Option<i64>,
    pub stable: bool,
    pub bulk_gap: f64,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Transition {
    /// Grid indices of the two points whose values differ.
    pub between: [usize; 2],
    pub from: i64,
    pub to: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub model: String,
    pub axes: Vec<Axis>,
    pub schedule: Vec<usize>,
    pub points: Vec<SweepPoint>,
    pub transitions: Vec<Transition>,
    /// Points where the bulk gap has a local minimum along an axis.
    pub gap_minima: Vec<usize>,
}

fn point_params(axes: &[Axis], idx: usize) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut k = idx;
    for ax in axes.iter().rev() {
        out.insert(ax.name.clone(), ax.values[k % ax.values.len()]);
        k /= ax.values.len();
    }
    out
}

/// Grid neighbours along each axis, as index pairs `(i, j)` with `i < j`;
/// indeterminate points are skipped so a transition spans the unresolved
/// stretch between two resolved values.
fn neighbour_pairs(axes: &[Axis], points: &[SweepPoint]) -> Vec<(usize, usize)> {
    let dims: Vec<usize> = axes.iter().map(|a| a.values.len()).collect();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let total: usize = dims.iter().product::<usize>().max(1);
    let mut out = Vec::new();
    for (ax, &stride) in strides.iter().enumerate() {
        for start in 0..total {
            if (start / stride) % dims[ax] != 0 {
                continue;
            }
            let line: Vec<usize> = (0..dims[ax]).map(|k| start + k * stride).filter(|&i| points[i].value.is_some()).collect();
            out.extend(line.windows(2).map(|w| (w[0], w[1])));
        }
    }
    out
}

fn gap_minima(axes: &[Axis], points: &[SweepPoint]) -> Vec<usize> {
    let dims: Vec<usize> = axes.iter().map(|a| a.values.len()).collect();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut any = false;
        for (ax, &stride) in strides.iter().enumerate() {
            let pos = (i / stride) % dims[ax];
            if pos == 0 || pos + 1 == dims[ax] {
                continue;
            }
            if p.bulk_gap < points[i - stride].bulk_gap && p.bulk_gap <= points[i + stride].bulk_gap {
                any = true;
            }
        }
        if any {
            out.push(i);
        }
    }
    out
}

/// Runs `f` over `0..n` on a pool of scoped threads; results keep index order.
fn pool_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, jobs: usize, f: F) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().expect("slot") = Some(v);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot").expect("filled")).collect()
}

pub fn sweep(a: &SweepArgs) -> Result<SweepResult, CliError> {
    if a.grid.len() > 2 {
        return Err(CliError::schema("at most two grid axes"));
    }
    if a.grid.is_empty() && a.seeds.is_none() {
        return Err(CliError::schema("sweep needs --grid or --seeds"));
    }
    if a.seeds.is_some() && a.run.disorder_sigma.is_none() {
        return Err(CliError::schema("--seeds needs --disorder-sigma"));
    }
    for ax in &a.grid {
        if ax.name != "mu" && a.run.model.model.is_some() {
            return Err(CliError::schema(format!("model files only sweep mu, not '{}'", ax.name)));
        }
    }
    let base = load_model(&a.run.model)?;
    let schedule = schedule_for(&a.run, &base)?;
    let seeds: Vec<u64> = match a.seeds {
        Some(n) => (0..n).map(|k| a.run.seed + k).collect(),
        None => vec![a.run.seed],
    };
    let grid_n: usize = a.grid.iter().map(|x| x.values.len()).product();
    let n = grid_n * seeds.len();
    let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let opts = options(&a.run);
    let points = pool_map(n, jobs, |i| {
        let (gi, si) = (i / seeds.len(), i % seeds.len());
        let params = point_params(&a.grid, gi);
        let seed = if a.seeds.is_some() { Some(seeds[si]) } else { None };
        let built = (|| -> Result<LatticeModel, CliError> {
            let mut margs = a.run.model.clone();
            for (k, v) in &params {
                if k == "mu" {
                    margs.mu = Some(*v);
                } else {
                    margs.params.retain(|(n, _)| n != k);
                    margs.params.push((k.clone(), *v));
                }
            }
            let m = load_model(&margs)?;
            with_disorder(&m, a.run.disorder_sigma, seeds[si])
        })();
        let mut p = SweepPoint { params, seed, value: None, stable: false, bulk_gap: 0.0, status: "ok".into() };
        match built {
            Err(e) => p.status = e.code.to_string(),
            Ok(m) => {
                p.bulk_gap = model::bulk_gap_at(&m, m.mu, model::default_nk(m.d));
                match pairing::invariant(&m, &schedule, &opts) {
                    Ok(r) => {
                        p.value = r.value;
                        p.stable = r.stable;
                        if r.value.is_none() {
                            p.status = "indeterminate".into();
                        }
                    }
                    Err(e) => p.status = e.code().to_string(),
                }
            }
        }
        p
    });
    let (transitions, minima) = if a.seeds.is_none() {
        let t = neighbour_pairs(&a.grid, &points)
            .into_iter()
            .filter_map(|(i, j)| {
                let (u, v) = (points[i].value?, points[j].value?);
                (u != v).then_some(Transition { between: [i, j], from: u, to: v })
            })
            .collect();
        (t, gap_minima(&a.grid, &points))
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(SweepResult { model: base.name.clone(), axes: a.grid.clone(), schedule, points, transitions, gap_minima: minima })
}

pub fn render_sweep(r: &SweepResult, format: Format) -> String {
    match format {
        Format::Json => to_json(r),
        Format::Csv | Format::Text => {
            let names: Vec<String> = r.axes.iter().map(|a| a.name.clone()).collect();
            let mut s = names.iter().map(|n| format!("{n},")).collect::<String>();
            s.push_str("seed,value,stable,bulk_gap,status\n");
            for p in &r.points {
                for n in &names {
                    let _ = write!(s, "{},", p.params[n]);
                }
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    p.seed.map(|v| v.to_string()).unwrap_or_default(),
                    p.value.map(|v| v.to_string()).unwrap_or_default(),
                    p.stable,
                    p.bulk_gap,
                    p.status
                );
            }
            if format == Format::Text {
                for t in &r.transitions {
                    let _ = writeln!(s, "# transition {} -> {} between points {} and {}", t.from, t.to, t.between[0], t.between[1]);
                }
            }
            s
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<Rendered, CliError> {
    let r = sweep(a)?;
    Ok(Rendered::ok(render_sweep(&r, a.run.output.format)))
}

// ---------------------------------------------------------------------------
// verify

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub model: String,
    pub symmetry: String,
    pub class: String,
    pub l: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub warnings: Vec<String>,
}

fn check(name: &str, residual: f64, tol: f64) -> Check {
    Check { name: name.into(), pass: residual < tol, residual, detail: None }
}

/// Largest box dimension on which `verify` builds the class generators.
pub const CLASS_CHECK_DIM: usize = 256;

/// Radius used by `verify`: the first of the schedule.
pub fn verify(a: &RunArgs) -> Result<VerifyReport, CliError> {
    let m = load_model(&a.model)?;
    let l = schedule_for(a, &m)?[0].max(m.range());
    let m = with_disorder(&m, a.disorder_sigma, a.seed)?;
    let ht = model::truncate(&m, l)?;
    let mut checks = Vec::new();
    checks.push(check("hermiticity", ht.hermiticity_residual(), 1e-10));
    let comp = symmetry::verify_compatibility(&ht, &m.ops)?;
    for (g, r) in &comp.residuals {
        checks.push(check(&format!("compatibility_{g}"), *r, comp.tolerance));
    }
    // the class construction multiplies the dimension by up to 16; the
    // Dirac relations are site-local, so both run on a small box
    let mut lc = l;
    while lc > m.range() && m.truncate_dim(lc) > CLASS_CHECK_DIM {
        lc -= 1;
    }
    if m.spec.realization != symmetry::Realization::SpatialInvolution {
        let hc = model::truncate(&m, lc)?;
        let f = model::fermi_open(&hc, m.mu);
        match symmetry_class(&hc, &f, &m.ops) {
            Ok(data) => {
                let rep = verify_class(&data);
                let mut c = check("class_relations", rep.relations.max_residual, crate::class::DEFAULT_CLASS_TOL);
                c.pass = rep.is_valid();
                c.detail = Some(format!("L={lc}: {} (expected stable class of {})", rep.class, rep.expected));
                checks.push(c);
            }
            Err(e) => checks.push(Check { name: "class_relations".into(), pass: false, residual: f64::INFINITY, detail: Some(e.to_string()) }),
        }
    }
    let d = m.d;
    let x0 = a.offset.clone().unwrap_or_else(|| pairing::default_offset(d));
    let dirac = pairing::dirac(d, lc, 1, &x0)?;
    for (name, rep) in [("exterior_left", &dirac.exterior.left), ("exterior_right", &dirac.exterior.right)] {
        let r = check_graded_rep(rep).map(|r| r.max_residual).unwrap_or(f64::INFINITY);
        checks.push(check(name, r, 1e-12));
    }
    let dop = dirac.operator();
    let g = dirac.grading();
    checks.push(check("dirac_odd", linalg::anticomm_res(dop.as_ref(), g.as_ref()), 1e-12));
    let mut rho_res: f64 = 0.0;
    for j in 0..d {
        rho_res = rho_res.max(linalg::anticomm_res(dop.as_ref(), dirac.rho(j).as_ref()));
    }
    checks.push(check("dirac_rho_graded_commute", rho_res, 1e-12));
    let sq = &dop * &dop;
    let r2: Vec<f64> = (0..dirac.base_dim()).flat_map(|i| {
        let v: f64 = (0..d).map(|j| dirac.positions[j][i].powi(2)).sum();
        std::iter::repeat_n(v, 1 << d)
    }).collect();
    checks.push(check("dirac_square", linalg::max_abs((&sq - &linalg::diag_real(&r2)).as_ref()), 1e-10));
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        model: m.name.clone(),
        symmetry: m.spec.to_string(),
        class: classify(&m.spec)?.to_string(),
        l,
        checks,
        pass,
        warnings: m.warnings.clone(),
    })
}

fn cmd_verify(a: &RunArgs) -> Result<Rendered, CliError> {
    let r = verify(a)?;
    let body = match a.output.format {
        Format::Json => to_json(&r),
        Format::Text | Format::Csv => {
            let mut s = String::from("check,pass,residual\n");
            for c in &r.checks {
                let _ = writeln!(s, "{},{},{:e}", c.name, c.pass, c.residual);
            }
            s
        }
    };
    let stderr = r.warnings.iter().map(|w| format!("warning: {w}\n")).collect();
    Ok(Rendered { code: if r.pass { EXIT_OK } else { EXIT_GAP }, body, stderr })
}
