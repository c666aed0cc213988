//! The `propsim` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 I/O
//! failure, 3 runtime failure (transport, worker or verification mismatch).

pub mod bench;
pub mod exec;
pub mod report;
pub mod spec;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use propsim::io::{owned_tuples, read_metrics, write_vectors_with, Manifest, OutputMode};
use propsim::model::{n_pr_for, predict_2way, predict_3way, suggest, StepTimes, SuggestRequest};
use propsim::schedule::dump_schedule;
use propsim::verify::{oracle_2way, oracle_3way, SyntheticKind, SyntheticSpec};
use propsim::{Arity, Checksum128, DecompGrid, Element, Error, OpCounts, Precision, RankCoords, TupleId};

use crate::bench::{ScaleMode, ScaleSpec};
use crate::exec::execute_threads;
use crate::report::PerfReport;
use crate::spec::{RunArgs, RunSpec};

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "propsim", version, about = "Exhaustive 2-way and 3-way proportional similarity metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Write a synthetic vector file.
    Generate(GenerateArgs),
    /// Compute all metrics.
    Run(RunCmd),
    /// Repeat a recorded run and check its checksum, outputs and (optionally) an oracle.
    Verify(VerifyArgs),
    /// Map output file positions back to vector tuples.
    Index(IndexArgs),
    /// Choose a decomposition for a machine.
    Suggest(SuggestArgs),
    /// Evaluate the per-rank run-time model.
    Model(ModelArgs),
    /// Kernel and scaling benchmarks.
    Bench(BenchArgs),
    /// Print the work schedule, one task per line.
    DumpSchedule(ScheduleArgs),
    #[command(hide = true)]
    Worker(WorkerArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value = "random-exact")]
    pub synthetic: SyntheticKind,
    #[arg(long = "num-field")]
    pub num_field: usize,
    #[arg(long = "num-vector")]
    pub num_vector: usize,
    #[arg(long, default_value = "double")]
    pub precision: Precision,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 11)]
    pub bits: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunCmd {
    #[command(flatten)]
    pub run: RunArgs,
    /// Print only key=value lines.
    #[arg(long)]
    pub machine: bool,
    /// Also write the key=value report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Manifest written by a previous run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also compare every value against the serial reference.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    /// Take the configuration from a run manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long = "num-way", default_value_t = 2)]
    pub num_way: usize,
    #[arg(long = "num-vector")]
    pub num_vector: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub npf: usize,
    #[arg(long, default_value_t = 1)]
    pub npv: usize,
    #[arg(long, default_value_t = 1)]
    pub npr: usize,
    #[arg(long = "num-stage", default_value_t = 1)]
    pub num_stage: usize,
    #[arg(long = "stage", value_delimiter = ',')]
    pub stage: Vec<usize>,
    #[arg(long)]
    pub rank: usize,
    /// One position; default lists the whole file.
    #[arg(long)]
    pub position: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SuggestArgs {
    #[arg(long = "num-proc")]
    pub num_proc: usize,
    #[arg(long = "num-vector")]
    pub num_vector: usize,
    #[arg(long = "num-field")]
    pub num_field: usize,
    #[arg(long = "num-way", default_value_t = 2)]
    pub num_way: usize,
    /// Blocks (2-way) or slices (3-way) per rank.
    #[arg(long)]
    pub load: usize,
    #[arg(long = "memory-bytes", default_value_t = 1 << 30)]
    pub memory_bytes: u64,
    #[arg(long, default_value = "double")]
    pub precision: Precision,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long = "num-way", default_value_t = 2)]
    pub num_way: usize,
    #[arg(long)]
    pub load: usize,
    #[arg(long = "t-g", default_value_t = 0.0)]
    pub t_g: f64,
    #[arg(long = "t-c", default_value_t = 0.0)]
    pub t_c: f64,
    #[arg(long = "t-tv", default_value_t = 0.0)]
    pub t_tv: f64,
    #[arg(long = "t-tm", default_value_t = 0.0)]
    pub t_tm: f64,
    #[arg(long = "t-cpu", default_value_t = 0.0)]
    pub t_cpu: f64,
    /// Vectors per slab (3-way).
    #[arg(long)]
    pub nvp: Option<usize>,
    #[arg(long = "num-stage", default_value_t = 1)]
    pub num_stage: usize,
    /// Also report the replication for this many vector-axis ranks.
    #[arg(long)]
    pub npv: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "128,256")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "32,64")]
    pub tiles: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub workers: Vec<usize>,
    #[arg(long = "num-way", default_value_t = 2)]
    pub num_way: usize,
    #[arg(long = "num-field", default_value_t = 256)]
    pub num_field: usize,
    /// Vectors per worker in the weak sweep.
    #[arg(long = "weak-vectors", default_value_t = 48)]
    pub weak_vectors: usize,
    /// Total vectors in the strong sweep; must divide by every worker count.
    #[arg(long = "strong-vectors", default_value_t = 840)]
    pub strong_vectors: usize,
    #[arg(long = "no-kernels")]
    pub no_kernels: bool,
    #[arg(long = "no-scaling")]
    pub no_scaling: bool,
    /// Write kernels.csv and scaling.csv here.
    #[arg(long = "csv-dir")]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    #[arg(long = "num-way", default_value_t = 2)]
    pub num_way: usize,
    #[arg(long, default_value_t = 1)]
    pub npf: usize,
    #[arg(long, default_value_t = 1)]
    pub npv: usize,
    #[arg(long, default_value_t = 1)]
    pub npr: usize,
    #[arg(long = "num-stage", default_value_t = 1)]
    pub num_stage: usize,
}

#[derive(Args, Debug)]
pub struct WorkerArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long = "socket-dir")]
    pub socket_dir: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn mismatch(message: String) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        message,
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Dimension(_)
        | Error::InvalidTuple(_)
        | Error::RankOutOfRange { .. }
        | Error::InvalidElement { .. }
        | Error::PositionOutOfRange { .. } => EXIT_VALIDATION,
        Error::Io(_) | Error::SizeMismatch { .. } => EXIT_IO,
        Error::Worker { source, .. } => match exit_code(source) {
            EXIT_IO => EXIT_IO,
            _ => EXIT_RUNTIME,
        },
        _ => EXIT_RUNTIME,
    }
}

type CliResult = Result<(), CliError>;

/// Parses `args` and runs the command, writing to `out`. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn dispatch(cmd: Cmd, out: &mut dyn Write) -> CliResult {
    match cmd {
        Cmd::Generate(a) => cmd_generate(&a, out),
        Cmd::Run(a) => cmd_run(&a, out),
        Cmd::Verify(a) => cmd_verify(&a, out),
        Cmd::Index(a) => cmd_index(&a, out),
        Cmd::Suggest(a) => cmd_suggest(&a, out),
        Cmd::Model(a) => cmd_model(&a, out),
        Cmd::Bench(a) => cmd_bench(&a, out),
        Cmd::DumpSchedule(a) => cmd_dump_schedule(&a, out),
        Cmd::Worker(a) => Ok(exec::worker(&a.config, a.rank, &a.socket_dir, &a.result)?),
    }
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> CliResult {
    let spec = SyntheticSpec {
        kind: a.synthetic,
        seed: a.seed,
        n_f: a.num_field,
        n_v: a.num_vector,
        precision: a.precision,
        bits: if a.synthetic == SyntheticKind::Analytic { 2 } else { a.bits },
    };
    let g = spec.generator()?;
    match a.precision {
        Precision::Single => write_vectors_with::<f32>(&a.out, a.num_field, a.num_vector, |q, i| g.value(q, i))?,
        Precision::Double => write_vectors_with::<f64>(&a.out, a.num_field, a.num_vector, |q, i| g.value(q, i))?,
    }
    let bytes = (a.num_field * a.num_vector * a.precision.element_size()) as u64;
    writeln!(out, "wrote {} ({bytes} bytes)", a.out.display())?;
    Ok(())
}

/// Runs a command-line run and returns its report.
pub fn run_report(args: &RunArgs) -> Result<PerfReport, CliError> {
    let spec = args.to_spec()?;
    let summary = exec::run(&spec)?;
    Ok(PerfReport::new(&spec, &summary))
}

fn cmd_run(a: &RunCmd, out: &mut dyn Write) -> CliResult {
    let report = run_report(&a.run)?;
    let kv = report.to_key_values();
    if let Some(p) = &a.report {
        std::fs::write(p, &kv)?;
    }
    if let Some(dir) = &a.run.output_dir {
        std::fs::write(dir.join("report.txt"), &kv)?;
    }
    if a.machine {
        write!(out, "{kv}")?;
    } else {
        write!(out, "{}", report.to_text())?;
    }
    Ok(())
}

/// Outcome of `verify`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub recorded: Option<Checksum128>,
    pub recomputed: Checksum128,
    pub values_checked: usize,
    pub oracle_checked: usize,
    pub failures: Vec<String>,
}

fn verify_typed<T: Element>(spec: &RunSpec, recorded: Option<Checksum128>, oracle: bool) -> Result<VerifyReport, CliError> {
    let mut rep = VerifyReport {
        recorded,
        ..Default::default()
    };
    let r = execute_threads::<T>(&spec.as_read_only(), true)?;
    rep.recomputed = r.checksum;
    if let Some(c) = recorded {
        if c != r.checksum {
            rep.failures.push(format!("checksum {} differs from recorded {c}", r.checksum));
        }
    }
    let records = r.records();
    if let Some(o) = &spec.config.output {
        let idx = spec.index_config();
        for rank in 0..spec.config.grid.n_p() {
            let ids = owned_tuples(rank, &idx)?;
            let vals = read_metrics(o, rank, spec.precision)?;
            if ids.len() != vals.len() {
                rep.failures.push(format!("rank {rank} file has {} values, expected {}", vals.len(), ids.len()));
                continue;
            }
            for (id, v) in ids.iter().zip(vals) {
                let want = records
                    .binary_search_by_key(id, |x| x.id)
                    .map(|p| records[p].value.to_f64())
                    .map_err(|_| mismatch(format!("tuple {id} missing from recomputation")))?;
                let ok = match o.mode {
                    OutputMode::Full => want.to_bits() == v.to_bits(),
                    OutputMode::Byte => (want.clamp(0.0, 1.0) - v).abs() <= 1.0 / 510.0 + 1e-12,
                };
                if !ok {
                    rep.failures.push(format!("rank {rank} tuple {id}: file {v}, recomputed {want}"));
                }
                rep.values_checked += 1;
            }
        }
    }
    if oracle {
        let c = &spec.config;
        let all = spec
            .source()?
            .load::<T>(c.n_f, c.n_v, &DecompGrid::single(), RankCoords { p_f: 0, p_v: 0, p_r: 0 })?;
        let mut ops = OpCounts::default();
        let mut want = match c.arity {
            Arity::Two => oracle_2way(all.view(), &mut ops),
            Arity::Three => oracle_3way(all.view(), &mut ops),
        };
        let stages = c.stage_list();
        want.retain(|rec| match rec.id {
            TupleId::Triple([i, j, k]) => propsim::schedule::owns_triple(i, j, k, c.n_v, &c.grid)
                .map(|o| stages.contains(&o.stage))
                .unwrap_or(false),
            TupleId::Pair(_) => true,
        });
        if want.len() != records.len() {
            rep.failures
                .push(format!("{} metrics computed, reference has {}", records.len(), want.len()));
        }
        for (a, b) in records.iter().zip(&want) {
            if a.id != b.id || a.value.bits_u64() != b.value.bits_u64() {
                rep.failures.push(format!("{}={} differs from reference {}={}", a.id, a.value.to_f64(), b.id, b.value.to_f64()));
            }
            rep.oracle_checked += 1;
        }
    }
    Ok(rep)
}

/// Repeats the run described by `manifest` and checks it.
pub fn verify_manifest(manifest: &Manifest, oracle: bool) -> Result<VerifyReport, CliError> {
    let spec = RunSpec::from_manifest(manifest)?;
    let recorded = match manifest.get("checksum") {
        Some(c) => Some(c.parse::<Checksum128>()?),
        None => None,
    };
    match spec.precision {
        Precision::Single => verify_typed::<f32>(&spec, recorded, oracle),
        Precision::Double => verify_typed::<f64>(&spec, recorded, oracle),
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CliResult {
    let rep = verify_manifest(&Manifest::read(&a.manifest)?, a.oracle)?;
    writeln!(out, "checksum={}", rep.recomputed)?;
    if let Some(c) = rep.recorded {
        writeln!(out, "recorded_checksum={c}")?;
    }
    writeln!(out, "values_checked={}", rep.values_checked)?;
    if a.oracle {
        writeln!(out, "oracle_checked={}", rep.oracle_checked)?;
    }
    for f in rep.failures.iter().take(20) {
        writeln!(out, "mismatch: {f}")?;
    }
    if rep.failures.is_empty() {
        writeln!(out, "verify=ok")?;
        Ok(())
    } else {
        writeln!(out, "verify=failed")?;
        Err(mismatch(format!("{} mismatches", rep.failures.len())))
    }
}

fn cmd_index(a: &IndexArgs, out: &mut dyn Write) -> CliResult {
    let (idx, values) = match &a.manifest {
        Some(p) => {
            let spec = RunSpec::from_manifest(&Manifest::read(p)?)?;
            let values = match &spec.config.output {
                Some(o) => Some(read_metrics(o, a.rank, spec.precision)?),
                None => None,
            };
            (spec.index_config(), values)
        }
        None => {
            let n_v = a
                .num_vector
                .ok_or_else(|| Error::Config("give --manifest or --num-vector".into()))?;
            let grid = DecompGrid::new(a.npf, a.npv, a.npr, a.num_stage)?;
            let arity = Arity::from_k(a.num_way)?;
            grid.validate(grid.n_pf, n_v, arity)?;
            let stages = (!a.stage.is_empty()).then(|| a.stage.clone());
            (
                propsim::io::IndexConfig {
                    arity,
                    n_v,
                    grid,
                    stages,
                },
                None,
            )
        }
    };
    let ids = owned_tuples(a.rank, &idx)?;
    let show = |p: usize, out: &mut dyn Write| -> std::io::Result<()> {
        let id = ids[p];
        let joined: Vec<String> = id.indices().iter().map(ToString::to_string).collect();
        match &values {
            Some(v) => writeln!(out, "{p}\t{}\t{}", joined.join("\t"), v[p]),
            None => writeln!(out, "{p}\t{}", joined.join("\t")),
        }
    };
    if let Some(v) = &values {
        if v.len() != ids.len() {
            return Err(Error::Config(format!("rank {} file holds {} values, expected {}", a.rank, v.len(), ids.len())).into());
        }
    }
    match a.position {
        Some(p) => {
            if p >= ids.len() {
                return Err(Error::PositionOutOfRange {
                    rank: a.rank,
                    position: p,
                    owned: ids.len(),
                }
                .into());
            }
            show(p, out)?;
        }
        None => {
            for p in 0..ids.len() {
                show(p, out)?;
            }
        }
    }
    Ok(())
}

fn cmd_suggest(a: &SuggestArgs, out: &mut dyn Write) -> CliResult {
    let req = SuggestRequest {
        n_p: a.num_proc,
        n_v: a.num_vector,
        n_f: a.num_field,
        arity: Arity::from_k(a.num_way)?,
        load: a.load,
        memory_bytes: a.memory_bytes,
        precision: a.precision,
    };
    let g = suggest(&req)?;
    writeln!(out, "npf={}\nnpv={}\nnpr={}\nnum_proc={}", g.n_pf, g.n_pv, g.n_pr, g.n_p())?;
    writeln!(out, "flags=--npf {} --npv {} --npr {}", g.n_pf, g.n_pv, g.n_pr)?;
    Ok(())
}

/// Evaluates the model for `a`; also returns `n_pr` when `--npv` is given.
pub fn model_eval(a: &ModelArgs) -> Result<(f64, Option<usize>), CliError> {
    let t = StepTimes {
        t_g: a.t_g,
        t_c: a.t_c,
        t_tv: a.t_tv,
        t_tm: a.t_tm,
        t_cpu: a.t_cpu,
    };
    let arity = Arity::from_k(a.num_way)?;
    let secs = match arity {
        Arity::Two => predict_2way(&t, a.load)?,
        Arity::Three => {
            let nvp = a
                .nvp
                .ok_or_else(|| Error::Config("3-way prediction needs --nvp".into()))?;
            predict_3way(&t, a.load, nvp, a.num_stage)?
        }
    };
    let n_pr = match a.npv {
        Some(npv) => Some(n_pr_for(arity, npv, a.load)?),
        None => None,
    };
    Ok((secs, n_pr))
}

fn cmd_model(a: &ModelArgs, out: &mut dyn Write) -> CliResult {
    let (secs, n_pr) = model_eval(a)?;
    writeln!(out, "predicted_secs={secs}")?;
    if let Some(n) = n_pr {
        writeln!(out, "npr={n}")?;
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult {
    if let Some(d) = &a.csv_dir {
        std::fs::create_dir_all(d)?;
    }
    if !a.no_kernels {
        let rows = bench::kernel_sweep(&a.sizes, &a.tiles, a.reps)?;
        writeln!(out, "{}", bench::kernel_table(&rows))?;
        if let Some(d) = &a.csv_dir {
            std::fs::write(d.join("kernels.csv"), bench::kernel_csv(&rows))?;
        }
    }
    if !a.no_scaling {
        let arity = Arity::from_k(a.num_way)?;
        let mut all = Vec::new();
        for (mode, n_v) in [(ScaleMode::Weak, a.weak_vectors), (ScaleMode::Strong, a.strong_vectors)] {
            let spec = ScaleSpec {
                arity,
                n_f: a.num_field,
                n_v,
                workers: a.workers.clone(),
                reps: a.reps,
            };
            let rows = bench::scaling(mode, &spec)?;
            if mode == ScaleMode::Weak {
                writeln!(out, "weak scaling aggregate rate monotone: {}", bench::is_monotone(&rows))?;
            }
            all.extend(rows);
        }
        writeln!(out, "{}", bench::scaling_table(&all))?;
        if let Some(d) = &a.csv_dir {
            std::fs::write(d.join("scaling.csv"), bench::scaling_csv(&all))?;
        }
    }
    Ok(())
}

fn cmd_dump_schedule(a: &ScheduleArgs, out: &mut dyn Write) -> CliResult {
    let grid = DecompGrid::new(a.npf, a.npv, a.npr, a.num_stage)?;
    write!(out, "{}", dump_schedule(&grid, Arity::from_k(a.num_way)?)?)?;
    Ok(())
}
