//! Message-passing runtime.
//!
//! One worker per rank. Workers share nothing; every piece of data that
//! crosses ranks goes through a [`Transport`] as an immutable byte payload
//! tagged with `(phase, step)`. [`Comm`] adds tag matching, timeouts, traffic
//! accounting and optional delay injection on top of a transport.

mod memory;
mod socket;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

pub use memory::{memory_transports, MemoryTransport};
pub use socket::{decode_header, encode_frame, SocketTransport, FRAME_HEADER_BYTES};

use crate::element::{decode_slice, encode_slice, Element};
use crate::error::{Error, Result};
use crate::grid::{DecompGrid, RankCoords};
use crate::verify::mix64;

/// Vector blocks exchanged between slabs.
pub const PHASE_VECTORS: u32 = 1;
/// Column sums shipped alongside vector blocks.
pub const PHASE_SUMS: u32 = 2;
/// Field-axis reductions.
pub const PHASE_REDUCE: u32 = 3;
/// Free for tests and ad hoc exchanges.
pub const PHASE_USER: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag {
    pub phase: u32,
    pub step: u32,
}

impl Tag {
    pub fn new(phase: u32, step: u32) -> Self {
        Tag { phase, step }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub source: usize,
    pub dest: usize,
    pub tag: Tag,
    pub payload: Vec<u8>,
}

/// Reliable point-to-point delivery, ordered per `(source, dest)` pair.
pub trait Transport: Send {
    fn rank(&self) -> usize;
    fn n_p(&self) -> usize;
    /// Queues `msg` without waiting for the receiver.
    fn send(&mut self, msg: Message) -> Result<()>;
    /// Next arrived message, or `None` if nothing arrives within `wait`.
    fn poll(&mut self, wait: Duration) -> Result<Option<Message>>;
}

/// Messages, bytes and vector elements sent in one phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseTraffic {
    pub messages: u64,
    pub bytes: u64,
    pub elements: u64,
}

impl std::ops::AddAssign for PhaseTraffic {
    fn add_assign(&mut self, rhs: Self) {
        self.messages += rhs.messages;
        self.bytes += rhs.bytes;
        self.elements += rhs.elements;
    }
}

/// Traffic sent by one rank (or summed over ranks).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrafficStats {
    pub phases: BTreeMap<u32, PhaseTraffic>,
    /// Elements sent per `(phase, step)` tag.
    pub steps: BTreeMap<Tag, u64>,
}

impl TrafficStats {
    pub fn phase(&self, phase: u32) -> PhaseTraffic {
        self.phases.get(&phase).copied().unwrap_or_default()
    }

    pub fn total(&self) -> PhaseTraffic {
        let mut t = PhaseTraffic::default();
        for p in self.phases.values() {
            t += *p;
        }
        t
    }

    pub fn merge(&mut self, other: &TrafficStats) {
        for (k, v) in &other.phases {
            *self.phases.entry(*k).or_default() += *v;
        }
        for (k, v) in &other.steps {
            *self.steps.entry(*k).or_default() += *v;
        }
    }

    fn record(&mut self, tag: Tag, bytes: usize, elements: usize) {
        let p = self.phases.entry(tag.phase).or_default();
        p.messages += 1;
        p.bytes += bytes as u64;
        p.elements += elements as u64;
        *self.steps.entry(tag).or_default() += elements as u64;
    }
}

/// Random sender-side delays, reproducible from a seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DelaySpec {
    pub seed: u64,
    pub max: Duration,
}

/// Per-run engine settings.
#[derive(Clone, Debug)]
pub struct EngineOptions {
    /// How long a receive may wait before the run is declared deadlocked.
    pub timeout: Duration,
    pub delay: Option<DelaySpec>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            timeout: Duration::from_secs(30),
            delay: None,
        }
    }
}

const POLL_SLICE: Duration = Duration::from_millis(20);

/// A rank's endpoint: tag matching, timeouts and accounting over a transport.
pub struct Comm {
    transport: Box<dyn Transport>,
    pending: HashMap<(usize, Tag), VecDeque<Vec<u8>>>,
    abort: Arc<AtomicBool>,
    options: EngineOptions,
    traffic: TrafficStats,
    sends: u64,
    reduce_step: u32,
}

impl Comm {
    pub fn new(transport: Box<dyn Transport>, options: EngineOptions, abort: Arc<AtomicBool>) -> Self {
        Comm {
            transport,
            pending: HashMap::new(),
            abort,
            options,
            traffic: TrafficStats::default(),
            sends: 0,
            reduce_step: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.transport.rank()
    }

    pub fn n_p(&self) -> usize {
        self.transport.n_p()
    }

    pub fn traffic(&self) -> &TrafficStats {
        &self.traffic
    }

    pub fn into_traffic(self) -> TrafficStats {
        self.traffic
    }

    /// Sends raw bytes, counting `elements` vector elements for the traffic stats.
    pub fn send_bytes(&mut self, dest: usize, tag: Tag, payload: Vec<u8>, elements: usize) -> Result<()> {
        if dest >= self.n_p() {
            return Err(Error::RankOutOfRange {
                rank: dest,
                n_p: self.n_p(),
            });
        }
        if let Some(d) = self.options.delay {
            let h = mix64(d.seed ^ mix64(self.rank() as u64) ^ mix64(self.sends.wrapping_add(1) << 20));
            let micros = d.max.as_micros().max(1) as u64;
            thread::sleep(Duration::from_micros(h % micros));
        }
        self.sends += 1;
        self.traffic.record(tag, payload.len(), elements);
        let source = self.rank();
        self.transport.send(Message {
            source,
            dest,
            tag,
            payload,
        })
    }

    pub fn send<T: Element>(&mut self, dest: usize, tag: Tag, data: &[T]) -> Result<()> {
        self.send_bytes(dest, tag, encode_slice(data), data.len())
    }

    /// Waits for the message from `source` with `tag`, buffering others.
    pub fn recv_bytes(&mut self, source: usize, tag: Tag) -> Result<Vec<u8>> {
        let key = (source, tag);
        if let Some(p) = self.pending.get_mut(&key).and_then(VecDeque::pop_front) {
            return Ok(p);
        }
        let start = Instant::now();
        loop {
            if self.abort.load(Ordering::SeqCst) {
                return Err(Error::Aborted);
            }
            let waited = start.elapsed();
            if waited >= self.options.timeout {
                return Err(Error::Timeout {
                    rank: self.rank(),
                    source_rank: source,
                    phase: tag.phase,
                    step: tag.step,
                    secs: waited.as_secs_f64(),
                });
            }
            let slice = POLL_SLICE.min(self.options.timeout - waited);
            if let Some(m) = self.transport.poll(slice)? {
                if m.source == source && m.tag == tag {
                    return Ok(m.payload);
                }
                self.pending.entry((m.source, m.tag)).or_default().push_back(m.payload);
            }
        }
    }

    pub fn recv<T: Element>(&mut self, source: usize, tag: Tag) -> Result<Vec<T>> {
        let bytes = self.recv_bytes(source, tag)?;
        if bytes.len() % T::PRECISION.element_size() != 0 {
            return Err(Error::Transport(format!(
                "payload of {} bytes from rank {source} is not a whole number of elements",
                bytes.len()
            )));
        }
        Ok(decode_slice(&bytes))
    }

    /// Sends `data` to `dest` and receives the same-tagged payload from `source`.
    pub fn exchange<T: Element>(&mut self, dest: usize, source: usize, tag: Tag, data: &[T]) -> Result<Vec<T>> {
        self.send(dest, tag, data)?;
        self.recv(source, tag)
    }

    /// Messages received but not yet claimed.
    pub fn pending_count(&self) -> usize {
        self.pending.values().map(VecDeque::len).sum()
    }
}

/// Elementwise sum of `partial` over the ranks sharing `(p_v, p_r)` with `c`.
///
/// Every member sends its partial to every other member and folds all of
/// them in ascending `p_f` order, so all members hold the identical result.
pub fn reduce_field_axis<T: Element>(
    comm: &mut Comm,
    grid: &DecompGrid,
    c: RankCoords,
    partial: Vec<T>,
) -> Result<Vec<T>> {
    if grid.n_pf == 1 {
        return Ok(partial);
    }
    if grid.rank_of_coords(c)? != comm.rank() {
        return Err(Error::config(format!(
            "rank {} does not sit at coordinates {c}",
            comm.rank()
        )));
    }
    let tag = Tag::new(PHASE_REDUCE, comm.reduce_step);
    comm.reduce_step += 1;
    let group: Vec<usize> = grid.field_group(c).collect();
    let me = comm.rank();
    for &r in &group {
        if r != me {
            comm.send_bytes(r, tag, encode_slice(&partial), 0)?;
        }
    }
    let mut acc: Option<Vec<T>> = None;
    for &r in &group {
        let part = if r == me {
            partial.clone()
        } else {
            let p: Vec<T> = comm.recv(r, tag)?;
            if p.len() != partial.len() {
                return Err(Error::dim(format!(
                    "rank {r} contributed {} values to a reduction of {}",
                    p.len(),
                    partial.len()
                )));
            }
            p
        };
        acc = Some(match acc {
            None => part,
            Some(mut a) => {
                for (x, y) in a.iter_mut().zip(part) {
                    *x = *x + y;
                }
                a
            }
        });
    }
    Ok(acc.expect("group is nonempty"))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

/// Runs `body` once per rank, each on its own thread with its own transport.
///
/// With a single rank the body runs inline. If any rank fails the others are
/// told to abort; the error returned is the lowest-ranked genuine failure.
pub fn spawn<R, F>(
    grid: &DecompGrid,
    transports: Vec<Box<dyn Transport>>,
    options: &EngineOptions,
    body: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(RankCoords, &mut Comm) -> Result<R> + Sync,
{
    let n_p = grid.n_p();
    if transports.len() != n_p {
        return Err(Error::config(format!(
            "{} transports for {n_p} ranks",
            transports.len()
        )));
    }
    for (r, t) in transports.iter().enumerate() {
        if t.rank() != r || t.n_p() != n_p {
            return Err(Error::config(format!("transport {r} is wired for rank {}", t.rank())));
        }
    }
    let abort = Arc::new(AtomicBool::new(false));
    let run_one = |rank: usize, t: Box<dyn Transport>| -> Result<R> {
        let coords = grid.coords_of_rank(rank)?;
        let mut comm = Comm::new(t, options.clone(), abort.clone());
        let out = catch_unwind(AssertUnwindSafe(|| body(coords, &mut comm)));
        let res = match out {
            Ok(Ok(r)) => Ok(r),
            Ok(Err(Error::Aborted)) => Err(Error::Aborted),
            Ok(Err(e)) => Err(Error::Worker {
                rank,
                source: Box::new(e),
            }),
            Err(p) => Err(Error::WorkerPanic {
                rank,
                message: panic_message(p),
            }),
        };
        if res.is_err() {
            abort.store(true, Ordering::SeqCst);
        }
        res
    };

    let results: Vec<Result<R>> = if n_p == 1 {
        let t = transports.into_iter().next().expect("one transport");
        vec![run_one(0, t)]
    } else {
        thread::scope(|s| {
            let handles: Vec<_> = transports
                .into_iter()
                .enumerate()
                .map(|(rank, t)| {
                    let run_one = &run_one;
                    thread::Builder::new()
                        .name(format!("rank-{rank}"))
                        .spawn_scoped(s, move || run_one(rank, t))
                })
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(rank, h)| match h {
                    Ok(h) => h.join().unwrap_or_else(|p| {
                        Err(Error::WorkerPanic {
                            rank,
                            message: panic_message(p),
                        })
                    }),
                    Err(e) => Err(Error::Worker {
                        rank,
                        source: Box::new(Error::Io(e)),
                    }),
                })
                .collect()
        })
    };

    let mut out = Vec::with_capacity(n_p);
    let mut first_err: Option<Error> = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(Error::Aborted) => {
                if first_err.is_none() {
                    first_err = Some(Error::Aborted);
                }
            }
            Err(e) => {
                if matches!(first_err, None | Some(Error::Aborted)) {
                    first_err = Some(e);
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Which transport the threads of a run talk through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ThreadTransport {
    Memory,
    /// Unix domain sockets in the given directory.
    Socket(std::path::PathBuf),
}

/// Builds one transport per rank of `grid`.
pub fn make_transports(grid: &DecompGrid, kind: &ThreadTransport, timeout: Duration) -> Result<Vec<Box<dyn Transport>>> {
    let n_p = grid.n_p();
    Ok(match kind {
        ThreadTransport::Memory => memory_transports(n_p)
            .into_iter()
            .map(|t| Box::new(t) as Box<dyn Transport>)
            .collect(),
        ThreadTransport::Socket(dir) => {
            let mut v: Vec<Box<dyn Transport>> = Vec::with_capacity(n_p);
            for r in 0..n_p {
                v.push(Box::new(SocketTransport::bind(dir, r, n_p, timeout)?));
            }
            v
        }
    })
}
