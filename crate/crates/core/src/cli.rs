//! The `msgflow` command line.
//!
//! Exit codes: 0 success, 1 other failure (I/O, validation differences),
//! 2 unparsable input or arguments, 3 clock synchronization infeasible, 4 seed not resolved.

use crate::{
    analysis::{analyze, AnalysisDocument, AnalyzeOptions, DocumentError, SyncMode},
    diag::DiagnosticKind,
    flow::{build_flow, export_flow, Direction, FlowEdgeKind, FlowFormat, LatencyRow, SeedSelector},
    sim::{builtin, builtin_names, simulate, write_output, GroundTruth, ScenarioConfig, TruthError},
    timeline::{self, ExecutorUtilization, DEFAULT_LANE_HEIGHT},
    trace::{load_bundle, HostId, Timestamp},
    validate::{validate, ValidateOptions},
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::{
    collections::BTreeMap,
    io::Write,
    path::{Path, PathBuf},
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SYNC: i32 = 3;
pub const EXIT_SEED: i32 = 4;

const MAX_PRINTED_DIAGNOSTICS: usize = 20;

#[derive(Parser, Debug)]
#[command(name = "msgflow", version, about = "Reconstruct message flows from publish-subscribe traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write per-host traces plus ground truth.
    Simulate(SimulateArgs),
    /// Build the execution database, align clocks and infer links.
    Analyze(AnalyzeArgs),
    /// Build the message flow graph around one seed.
    Flow(FlowArgs),
    /// Render executor state lanes.
    Executor(ExecutorArgs),
    /// Summarize an analysis document.
    Metrics(MetricsArgs),
    /// Compare an analysis document with simulator ground truth.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Builtin scenario name or path to a scenario JSON file.
    #[arg(long, value_name = "NAME|PATH")]
    scenario: String,
    /// Random seed; overrides the seed stored in a scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving `<host>.jsonl` files and `ground_truth.json`.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Trace files, one per host.
    #[arg(value_name = "TRACE")]
    traces: Vec<PathBuf>,
    /// Output document path (standard output if omitted).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Clock alignment: `pairs` estimates offsets from matched messages,
    /// `assume-synchronized` uses zero offsets.
    #[arg(long, default_value = "pairs", value_name = "MODE")]
    sync_mode: SyncMode,
    /// Host whose clock is the reference (default: smallest host id).
    #[arg(long, value_name = "HOST")]
    reference_host: Option<String>,
    /// Assumed lower bound on one-way network delay, in nanoseconds.
    #[arg(long, default_value_t = 0, value_name = "NS")]
    min_one_way_delay: i64,
}

#[derive(Args, Debug)]
#[group(id = "seed", required = true, multiple = false)]
struct SeedArgs {
    /// Seed on the publication of TOPIC with source timestamp TS.
    #[arg(long, value_name = "TOPIC@TS", group = "seed")]
    publication: Option<String>,
    /// Seed on the K-th (0-based) callback of OWNER (`<node><topic>`, `<node>/timer/<i>` or `key:host/pid/0xhandle`).
    #[arg(long, num_args = 2, value_names = ["OWNER", "K"], group = "seed")]
    callback: Option<Vec<String>>,
    /// Seed on the callback of OWNER running at TS.
    #[arg(long, num_args = 2, value_names = ["OWNER", "TS"], group = "seed")]
    callback_at: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct FlowArgs {
    /// Analysis document.
    document: PathBuf,
    #[command(flatten)]
    seed: SeedArgs,
    /// forward, backward or both.
    #[arg(long, default_value = "both")]
    direction: Direction,
    /// dot, json or svg-timeline.
    #[arg(long, default_value = "dot")]
    format: String,
    /// Horizontal scale of svg-timeline output.
    #[arg(long, default_value_t = 10.0, value_name = "PX")]
    px_per_ms: f64,
    /// Lane height of svg-timeline output.
    #[arg(long, default_value_t = DEFAULT_LANE_HEIGHT, value_name = "PX")]
    lane_height: u32,
    /// Graph output path (standard output if omitted; the latency table then goes to standard error).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct WindowArgs {
    /// Window start in reference-clock nanoseconds (default: first executor event).
    #[arg(long, value_name = "NS")]
    from: Option<Timestamp>,
    /// Window end in reference-clock nanoseconds (default: last executor event).
    #[arg(long, value_name = "NS")]
    to: Option<Timestamp>,
}

#[derive(Args, Debug)]
struct ExecutorArgs {
    /// Analysis document.
    document: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// svg or json.
    #[arg(long, default_value = "svg")]
    format: String,
    /// Horizontal scale of svg output.
    #[arg(long, default_value_t = 1.0, value_name = "PX")]
    px_per_ms: f64,
    /// Lane height of svg output.
    #[arg(long, default_value_t = DEFAULT_LANE_HEIGHT, value_name = "PX")]
    lane_height: u32,
    /// Output path (standard output if omitted).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Analysis document.
    document: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Output path (standard output if omitted).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Analysis document.
    document: PathBuf,
    /// Ground truth written by `simulate`.
    ground_truth: PathBuf,
    /// Allowed absolute latency difference per flow leaf, in nanoseconds.
    #[arg(long, default_value_t = 0, value_name = "NS")]
    latency_tolerance_ns: i64,
    /// Compare links only.
    #[arg(long)]
    skip_flows: bool,
    /// Report output path (standard output if omitted).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

type CmdResult = Result<i32, Failure>;

struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn emit(&mut self, output: Option<&Path>, text: &str) -> Result<(), Failure> {
        match output {
            Some(p) => std::fs::write(p, text).map_err(|e| Failure::new(EXIT_OTHER, format!("failed to write {}: {e}", p.display()))),
            None => self
                .stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::new(EXIT_OTHER, format!("failed to write output: {e}"))),
        }
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.stderr, "{text}");
    }
}

/// Runs the command line given by `args` (including the program name).
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { stdout, stderr };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, &mut io),
        Command::Analyze(a) => cmd_analyze(a, &mut io),
        Command::Flow(a) => cmd_flow(a, &mut io),
        Command::Executor(a) => cmd_executor(a, &mut io),
        Command::Metrics(a) => cmd_metrics(a, &mut io),
        Command::Validate(a) => cmd_validate(a, &mut io),
    };
    let _ = io.stdout.flush();
    match result {
        Ok(code) => code,
        Err(f) => {
            io.note(&format!("error: {}", f.message));
            f.code
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(EXIT_OTHER, format!("failed to read {}: {e}", path.display())))
}

fn load_document(path: &Path) -> Result<AnalysisDocument, Failure> {
    AnalysisDocument::from_json(&read_text(path)?).map_err(|e| match e {
        DocumentError::Malformed(_) | DocumentError::Version { .. } => Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())),
    })
}

fn cmd_simulate(a: SimulateArgs, io: &mut Io) -> CmdResult {
    let cfg = match builtin(&a.scenario, a.seed.unwrap_or(0)) {
        Some(cfg) => cfg,
        None => {
            let path = Path::new(&a.scenario);
            if !path.exists() {
                return Err(Failure::new(
                    EXIT_PARSE,
                    format!("unknown scenario `{}` (builtins: {})", a.scenario, builtin_names().join(", ")),
                ));
            }
            let mut cfg = ScenarioConfig::from_json(&read_text(path)?).map_err(|e| Failure::new(EXIT_PARSE, e.to_string()))?;
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            cfg
        }
    };
    let out = simulate(&cfg).map_err(|e| Failure::new(EXIT_PARSE, e.to_string()))?;
    for w in &out.warnings {
        io.note(&format!("warning: {w}"));
    }
    let written = write_output(&out, &a.out_dir)
        .map_err(|e| Failure::new(EXIT_OTHER, format!("failed to write to {}: {e}", a.out_dir.display())))?;
    io.note(&format!(
        "simulated {} (seed {}): {} events on {} hosts",
        cfg.name,
        cfg.seed,
        out.bundle.event_count(),
        out.bundle.traces().len()
    ));
    for p in written {
        let _ = writeln!(io.stdout, "{}", p.display());
    }
    Ok(EXIT_OK)
}

fn cmd_analyze(a: AnalyzeArgs, io: &mut Io) -> CmdResult {
    if a.traces.is_empty() {
        return Err(Failure::new(EXIT_PARSE, "no trace files given"));
    }
    let bundle = load_bundle(&a.traces).map_err(|e| Failure::new(if e.is_parse() { EXIT_PARSE } else { EXIT_OTHER }, e.to_string()))?;
    if bundle.event_count() == 0 {
        return Err(Failure::new(EXIT_PARSE, "trace files contain no events"));
    }
    let reference = match a.reference_host {
        Some(r) => Some(HostId::new(&r).ok_or_else(|| Failure::new(EXIT_PARSE, format!("invalid host id `{r}`")))?),
        None => None,
    };
    let opts = AnalyzeOptions { sync_mode: a.sync_mode, reference, min_one_way_delay_ns: a.min_one_way_delay };
    let doc = analyze(&bundle, &opts).map_err(|e| Failure::new(EXIT_SYNC, e.to_string()))?;
    for d in doc.diagnostics.iter().take(MAX_PRINTED_DIAGNOSTICS) {
        io.note(&format!("diagnostic: {d}"));
    }
    if doc.diagnostics.len() > MAX_PRINTED_DIAGNOSTICS {
        io.note(&format!("... and {} more diagnostics", doc.diagnostics.len() - MAX_PRINTED_DIAGNOSTICS));
    }
    for m in &doc.clock {
        io.note(&format!("clock: {} offset {} ns relative to {}", m.host, m.offset, m.reference));
    }
    let (t, d, i) = doc.links.counts();
    io.note(&format!("links: {t} transport, {d} direct, {i} indirect"));
    io.emit(a.output.as_deref(), &(doc.to_json() + "\n"))?;
    Ok(EXIT_OK)
}

fn parse_seed(s: SeedArgs) -> Result<SeedSelector, Failure> {
    let ts = |v: &str| v.parse::<Timestamp>().map_err(|_| Failure::new(EXIT_PARSE, format!("invalid timestamp `{v}`")));
    if let Some(p) = s.publication {
        let (topic, t) = p
            .rsplit_once('@')
            .ok_or_else(|| Failure::new(EXIT_PARSE, format!("expected TOPIC@TS, got `{p}`")))?;
        return Ok(SeedSelector::Publication { topic: topic.to_string(), source_timestamp: ts(t)? });
    }
    if let Some(v) = s.callback {
        let index = v[1].parse().map_err(|_| Failure::new(EXIT_PARSE, format!("invalid callback index `{}`", v[1])))?;
        return Ok(SeedSelector::Callback { owner: v[0].clone(), index });
    }
    let v = s.callback_at.expect("clap enforces one seed");
    Ok(SeedSelector::CallbackAt { owner: v[0].clone(), ts: ts(&v[1])? })
}

fn latency_table(rows: &[LatencyRow]) -> String {
    let mut out = format!("{:>14}  {:<70}  breakdown\n", "latency_ns", "leaf");
    for r in rows {
        let breakdown: Vec<String> = FlowEdgeKind::ALL
            .iter()
            .filter_map(|k| r.breakdown.get(k).map(|v| format!("{k}={v}")))
            .chain(std::iter::once(format!("gaps={}", r.gaps_ns)))
            .collect();
        out += &format!("{:>14}  {:<70}  {}\n", r.latency_ns, r.leaf, breakdown.join(" "));
    }
    out
}

fn cmd_flow(a: FlowArgs, io: &mut Io) -> CmdResult {
    let format = FlowFormat::parse(&a.format, a.px_per_ms, a.lane_height).map_err(|e| Failure::new(EXIT_PARSE, e))?;
    let seed = parse_seed(a.seed)?;
    let doc = load_document(&a.document)?;
    let graph = build_flow(&doc, &seed, a.direction).map_err(|e| Failure::new(EXIT_SEED, e.to_string()))?;
    let text = export_flow(&graph, format).map_err(|e| Failure::new(EXIT_OTHER, format!("flow graph rejected: {e}")))?;
    let rows = graph.latencies().map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    for n in &graph.notes {
        io.note(&format!("note: {n}"));
    }
    io.emit(a.output.as_deref(), &text)?;
    let table = latency_table(&rows);
    if a.output.is_some() {
        let _ = io.stdout.write_all(table.as_bytes());
    } else {
        let _ = io.stderr.write_all(table.as_bytes());
    }
    Ok(EXIT_OK)
}

fn window(doc: &AnalysisDocument, w: WindowArgs) -> Result<(Timestamp, Timestamp), Failure> {
    let full = timeline::full_window(&doc.ir).unwrap_or((0, 0));
    let win = (w.from.unwrap_or(full.0), w.to.unwrap_or(full.1));
    if win.0 > win.1 {
        return Err(Failure::new(EXIT_PARSE, format!("window start {} is after end {}", win.0, win.1)));
    }
    Ok(win)
}

fn cmd_executor(a: ExecutorArgs, io: &mut Io) -> CmdResult {
    if a.format != "svg" && a.format != "json" {
        return Err(Failure::new(EXIT_PARSE, format!("unknown executor format `{}` (svg, json)", a.format)));
    }
    let doc = load_document(&a.document)?;
    let win = window(&doc, a.window)?;
    let lanes = timeline::build_timeline(&doc.ir, win).map_err(|e| Failure::new(EXIT_PARSE, e.to_string()))?;
    let text = if a.format == "svg" {
        timeline::to_svg(&lanes, win, a.px_per_ms, a.lane_height)
    } else {
        timeline::to_json(&lanes, win)
    };
    io.emit(a.output.as_deref(), &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Metrics {
    metrics_version: u32,
    hosts: Vec<String>,
    objects: BTreeMap<&'static str, usize>,
    instances: BTreeMap<&'static str, usize>,
    links: BTreeMap<&'static str, usize>,
    diagnostics: BTreeMap<DiagnosticKind, usize>,
    clock: Vec<crate::clock::ClockMapping>,
    window: (Timestamp, Timestamp),
    utilization: Vec<ExecutorUtilization>,
}

fn cmd_metrics(a: MetricsArgs, io: &mut Io) -> CmdResult {
    let doc = load_document(&a.document)?;
    let win = window(&doc, a.window)?;
    let lanes = timeline::build_timeline(&doc.ir, win).map_err(|e| Failure::new(EXIT_PARSE, e.to_string()))?;
    let ir = &doc.ir;
    let mut diagnostics = BTreeMap::new();
    for d in &doc.diagnostics {
        *diagnostics.entry(d.kind).or_default() += 1;
    }
    let (t, d, i) = doc.links.counts();
    let m = Metrics {
        metrics_version: 1,
        hosts: ir.hosts.iter().map(|h| h.to_string()).collect(),
        objects: BTreeMap::from([
            ("nodes", ir.nodes.len()),
            ("publishers", ir.publishers.len()),
            ("subscriptions", ir.subscriptions.len()),
            ("timers", ir.timers.len()),
        ]),
        instances: BTreeMap::from([
            ("publications", ir.publications.len()),
            ("callbacks", ir.callbacks.len()),
            ("executor_intervals", ir.executor_intervals.len()),
        ]),
        links: BTreeMap::from([("transport", t), ("direct", d), ("indirect", i)]),
        diagnostics,
        clock: doc.clock.clone(),
        window: win,
        utilization: timeline::utilization(&lanes, win).unwrap_or_default(),
    };
    io.emit(a.output.as_deref(), &(serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n"))?;
    Ok(EXIT_OK)
}

fn cmd_validate(a: ValidateArgs, io: &mut Io) -> CmdResult {
    let doc = load_document(&a.document)?;
    let truth = GroundTruth::from_json(&read_text(&a.ground_truth)?).map_err(|e| match e {
        TruthError::Malformed(_) | TruthError::Version { .. } => Failure::new(EXIT_PARSE, format!("{}: {e}", a.ground_truth.display())),
    })?;
    let opts = ValidateOptions { latency_tolerance_ns: a.latency_tolerance_ns, check_flows: !a.skip_flows };
    let report = validate(&doc, &truth, &opts).map_err(|e| Failure::new(EXIT_PARSE, e.to_string()))?;
    let _ = io.stderr.write_all(report.summary().as_bytes());
    io.emit(a.output.as_deref(), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    Ok(if report.ok { EXIT_OK } else { EXIT_OTHER })
}
