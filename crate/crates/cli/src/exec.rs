//! Running a [`RunSpec`] on threads or on one process per rank.

use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use propsim::engine::{Comm, PhaseTraffic, SocketTransport, Tag, TrafficStats, PHASE_USER};
use propsim::io::Manifest;
use propsim::run::{execute, run_rank, RankOutput, RunResult};
use propsim::{Checksum128, Element, Error, OpCounts, Precision, Result};

use crate::spec::{RunSpec, TransportKind};

/// Timings of one rank.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RankTimes {
    pub load: Duration,
    pub compute: Duration,
    pub output: Duration,
}

/// Precision-independent outcome of a run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub checksum: Checksum128,
    pub metric_count: usize,
    pub ops: OpCounts,
    pub traffic: TrafficStats,
    pub elapsed: Duration,
    pub ranks: Vec<RankTimes>,
}

impl RunSummary {
    fn from_result<T: Element>(r: &RunResult<T>) -> Self {
        RunSummary {
            checksum: r.checksum,
            metric_count: r.metric_count,
            ops: r.ops,
            traffic: r.traffic.clone(),
            elapsed: r.elapsed,
            ranks: r.outputs.iter().map(times_of).collect(),
        }
    }
}

fn times_of<T>(o: &RankOutput<T>) -> RankTimes {
    RankTimes {
        load: o.load_time,
        compute: o.compute_time,
        output: o.output_time,
    }
}

/// Runs in this process on one thread per rank, keeping records if asked.
pub fn execute_threads<T: Element>(spec: &RunSpec, keep_records: bool) -> Result<RunResult<T>> {
    let mut cfg = spec.config.clone();
    cfg.keep_records = keep_records;
    execute::<T>(&cfg, &spec.source()?)
}

/// Runs `spec` with its configured transport and writes the manifest if the
/// run has an output directory.
pub fn run(spec: &RunSpec) -> Result<RunSummary> {
    if let Some(out) = &spec.config.output {
        std::fs::create_dir_all(&out.dir)?;
    }
    let summary = match spec.transport {
        TransportKind::Threads => match spec.precision {
            Precision::Single => RunSummary::from_result(&execute_threads::<f32>(spec, false)?),
            Precision::Double => RunSummary::from_result(&execute_threads::<f64>(spec, false)?),
        },
        TransportKind::Processes => run_processes(spec)?,
    };
    if let Some(out) = &spec.config.output {
        let mut m = spec.to_manifest();
        m.set("checksum", summary.checksum).set("metric_count", summary.metric_count);
        m.write(&out.manifest_path())?;
    }
    Ok(summary)
}

/// Program that runs worker ranks. Tests may point this elsewhere.
fn worker_exe() -> Result<PathBuf> {
    match std::env::var_os("PROPSIM_WORKER_EXE") {
        Some(p) => Ok(PathBuf::from(p)),
        None => Ok(std::env::current_exe()?),
    }
}

fn kill_all(children: &mut [Option<Child>]) {
    for c in children.iter_mut().flatten() {
        let _ = c.kill();
        let _ = c.wait();
    }
}

fn run_processes(spec: &RunSpec) -> Result<RunSummary> {
    let start = Instant::now();
    let n_p = spec.config.grid.n_p();
    let dir = tempfile::Builder::new().prefix("propsim-").tempdir()?;
    let config_path = dir.path().join("run.txt");
    spec.to_manifest().write(&config_path)?;
    let exe = worker_exe()?;
    let mut children: Vec<Option<Child>> = Vec::with_capacity(n_p);
    for rank in 0..n_p {
        let child = Command::new(&exe)
            .arg("worker")
            .arg("--config")
            .arg(&config_path)
            .arg("--rank")
            .arg(rank.to_string())
            .arg("--socket-dir")
            .arg(dir.path())
            .arg("--result")
            .arg(result_path(dir.path(), rank))
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn();
        match child {
            Ok(c) => children.push(Some(c)),
            Err(e) => {
                kill_all(&mut children);
                return Err(Error::Worker {
                    rank,
                    source: Box::new(Error::Io(e)),
                });
            }
        }
    }
    // Wait for everyone; the first failure takes the rest down.
    let mut failure: Option<Error> = None;
    let mut remaining = n_p;
    while remaining > 0 {
        for rank in 0..n_p {
            let Some(child) = children[rank].as_mut() else { continue };
            let Some(status) = child.try_wait()? else { continue };
            let mut child = children[rank].take().expect("child present");
            remaining -= 1;
            if !status.success() && failure.is_none() {
                let mut msg = String::new();
                if let Some(mut e) = child.stderr.take() {
                    use std::io::Read;
                    let _ = e.read_to_string(&mut msg);
                }
                let msg = msg.trim().to_string();
                failure = Some(Error::Worker {
                    rank,
                    source: Box::new(Error::Transport(if msg.is_empty() {
                        format!("worker exited with {status}")
                    } else {
                        msg
                    })),
                });
                kill_all(&mut children);
                remaining = 0;
                break;
            }
        }
        if remaining > 0 {
            thread::sleep(Duration::from_millis(5));
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let mut summary = RunSummary {
        checksum: Checksum128::default(),
        metric_count: 0,
        ops: OpCounts::default(),
        traffic: TrafficStats::default(),
        elapsed: Duration::ZERO,
        ranks: Vec::with_capacity(n_p),
    };
    for rank in 0..n_p {
        let m = Manifest::read(&result_path(dir.path(), rank))?;
        merge_result(&mut summary, &m)?;
    }
    summary.elapsed = start.elapsed();
    Ok(summary)
}

fn result_path(dir: &Path, rank: usize) -> PathBuf {
    dir.join(format!("result_{rank}.txt"))
}

fn num<T: std::str::FromStr>(m: &Manifest, key: &str) -> Result<T> {
    let v = m.require(key)?;
    v.parse()
        .map_err(|_| Error::Transport(format!("worker result {key}={v} is malformed")))
}

fn merge_result(s: &mut RunSummary, m: &Manifest) -> Result<()> {
    s.checksum = s.checksum.combine(num(m, "checksum")?);
    s.metric_count += num::<usize>(m, "metric_count")?;
    s.ops += OpCounts {
        adds: num(m, "adds")?,
        mins: num(m, "mins")?,
        muls: num(m, "muls")?,
    };
    let mut t = TrafficStats::default();
    for (k, _) in m.entries.iter().filter(|(k, _)| k.starts_with("traffic.") && k.ends_with(".messages")) {
        let phase: u32 = k["traffic.".len()..k.len() - ".messages".len()]
            .parse()
            .map_err(|_| Error::Transport(format!("bad traffic key {k}")))?;
        let p = |f: &str| num::<u64>(m, &format!("traffic.{phase}.{f}"));
        t.phases.insert(
            phase,
            PhaseTraffic {
                messages: p("messages")?,
                bytes: p("bytes")?,
                elements: p("elements")?,
            },
        );
    }
    s.traffic.merge(&t);
    let secs = |k: &str| num::<f64>(m, k).map(Duration::from_secs_f64);
    s.ranks.push(RankTimes {
        load: secs("load_secs")?,
        compute: secs("compute_secs")?,
        output: secs("output_secs")?,
    });
    Ok(())
}

/// Body of the hidden `worker` subcommand: one rank of a process run.
pub fn worker(config: &Path, rank: usize, socket_dir: &Path, result: &Path) -> Result<()> {
    let spec = RunSpec::from_manifest(&Manifest::read(config)?)?;
    let grid = spec.config.grid;
    let coords = grid.coords_of_rank(rank)?;
    let transport = SocketTransport::bind(socket_dir, rank, grid.n_p(), spec.config.engine.timeout)?;
    let mut comm = Comm::new(
        Box::new(transport),
        spec.config.engine.clone(),
        Arc::new(AtomicBool::new(false)),
    );
    let source = spec.source()?;
    let mut cfg = spec.config.clone();
    cfg.keep_records = false;
    let m = match spec.precision {
        Precision::Single => result_manifest(&run_rank::<f32>(&cfg, &source, coords, &mut comm)?),
        Precision::Double => result_manifest(&run_rank::<f64>(&cfg, &source, coords, &mut comm)?),
    };
    // No rank may drop its socket while a peer could still send to it.
    barrier(&mut comm)?;
    m.write(result)
}

fn barrier(comm: &mut Comm) -> Result<()> {
    let tag = Tag::new(PHASE_USER, u32::MAX);
    if comm.rank() == 0 {
        for r in 1..comm.n_p() {
            comm.recv_bytes(r, tag)?;
        }
        for r in 1..comm.n_p() {
            comm.send_bytes(r, tag, Vec::new(), 0)?;
        }
    } else {
        comm.send_bytes(0, tag, Vec::new(), 0)?;
        comm.recv_bytes(0, tag)?;
    }
    Ok(())
}

fn result_manifest<T>(o: &RankOutput<T>) -> Manifest {
    let mut m = Manifest::default();
    m.set("checksum", o.checksum)
        .set("metric_count", o.metric_count)
        .set("adds", o.ops.adds)
        .set("mins", o.ops.mins)
        .set("muls", o.ops.muls)
        .set("load_secs", o.load_time.as_secs_f64())
        .set("compute_secs", o.compute_time.as_secs_f64())
        .set("output_secs", o.output_time.as_secs_f64());
    for (phase, p) in &o.traffic.phases {
        m.set(&format!("traffic.{phase}.messages"), p.messages)
            .set(&format!("traffic.{phase}.bytes"), p.bytes)
            .set(&format!("traffic.{phase}.elements"), p.elements);
    }
    m
}
