//! Run configuration and the per-rank driver shared by both arities.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::block::VectorBlock;
use crate::element::Element;
use crate::engine::{make_transports, spawn, Comm, EngineOptions, ThreadTransport, TrafficStats};
use crate::error::{Error, Result};
use crate::grid::{DecompGrid, RankCoords};
use crate::io::{read_slice, write_metrics, MetricOutputSpec, VectorFileSpec};
use crate::metrics2::rank_2way;
use crate::metrics3::rank_3way;
use crate::mingemm::{DenseMatrix, Kernel, OpCounts};
use crate::tuple::{Arity, MetricRecord};
use crate::verify::{Checksum128, Generator};

/// Where the input vectors come from.
#[derive(Clone, Debug)]
pub enum VectorSource {
    /// Synthetic values generated at global coordinates.
    Synthetic(Generator),
    /// A matrix already in memory, `n_f x n_v`.
    Dense(Arc<DenseMatrix<f64>>),
    File(VectorFileSpec),
}

impl VectorSource {
    /// The block of rank `c`: its field rows of its slab's columns.
    pub fn load<T: Element>(&self, n_f: usize, n_v: usize, grid: &DecompGrid, c: RankCoords) -> Result<VectorBlock<T>> {
        let (n_fp, n_vp) = (n_f / grid.n_pf, n_v / grid.n_pv);
        let (f0, v0) = (c.p_f * n_fp, c.p_v * n_vp);
        match self {
            VectorSource::Synthetic(g) => VectorBlock::from_fn(f0, n_fp, v0, n_vp, |q, i| g.value(q, i)),
            VectorSource::Dense(m) => {
                if m.rows() != n_f || m.cols() != n_v {
                    return Err(Error::dim(format!(
                        "input is {}x{}, configuration says {n_f}x{n_v}",
                        m.rows(),
                        m.cols()
                    )));
                }
                VectorBlock::from_fn(f0, n_fp, v0, n_vp, |q, i| T::from_f64(m.get(q, i)))
            }
            VectorSource::File(spec) => {
                if spec.n_f != n_f || spec.n_v != n_v {
                    return Err(Error::dim("input file dimensions differ from the configuration"));
                }
                read_slice(spec, c, grid)
            }
        }
    }
}

/// Everything a run needs besides its input.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub arity: Arity,
    pub n_f: usize,
    pub n_v: usize,
    pub grid: DecompGrid,
    pub kernel: Kernel,
    /// 3-way stages to compute; `None` means all.
    pub stages: Option<Vec<usize>>,
    pub engine: EngineOptions,
    pub transport: ThreadTransport,
    pub output: Option<MetricOutputSpec>,
    /// Keep metric records in memory after the run. Checksums are computed
    /// either way.
    pub keep_records: bool,
}

impl RunConfig {
    pub fn new(arity: Arity, n_f: usize, n_v: usize, grid: DecompGrid) -> Self {
        RunConfig {
            arity,
            n_f,
            n_v,
            grid,
            kernel: Kernel::default(),
            stages: None,
            engine: EngineOptions::default(),
            transport: ThreadTransport::Memory,
            output: None,
            keep_records: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate(self.n_f, self.n_v, self.arity)?;
        if let Some(stages) = &self.stages {
            if self.arity == Arity::Two {
                return Err(Error::config("stage selection applies to 3-way runs only"));
            }
            if stages.is_empty() {
                return Err(Error::config("stage selection is empty"));
            }
            for &s in stages {
                if s >= self.grid.n_st {
                    return Err(Error::config(format!(
                        "stage {s} out of range for n_st={}",
                        self.grid.n_st
                    )));
                }
            }
        }
        Ok(())
    }

    /// Selected stages, ascending and without repeats.
    pub fn stage_list(&self) -> Vec<usize> {
        let mut v = self
            .stages
            .clone()
            .unwrap_or_else(|| (0..self.grid.n_st).collect());
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// What one rank's body needs to know.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RankCtx<'a> {
    pub grid: DecompGrid,
    pub coords: RankCoords,
    pub kernel: Kernel,
    pub stages: &'a [usize],
}

/// Result of one rank.
#[derive(Clone, Debug)]
pub struct RankOutput<T> {
    pub rank: usize,
    pub coords: RankCoords,
    /// Records in ascending canonical order (empty unless kept).
    pub records: Vec<MetricRecord<T>>,
    pub metric_count: usize,
    pub checksum: Checksum128,
    pub ops: OpCounts,
    pub traffic: TrafficStats,
    pub load_time: Duration,
    pub compute_time: Duration,
    pub output_time: Duration,
}

/// Executes rank `c`'s share of the run over `comm`.
pub fn run_rank<T: Element>(
    cfg: &RunConfig,
    source: &VectorSource,
    c: RankCoords,
    comm: &mut Comm,
) -> Result<RankOutput<T>> {
    let rank = cfg.grid.rank_of_coords(c)?;
    let t0 = Instant::now();
    let block = source.load::<T>(cfg.n_f, cfg.n_v, &cfg.grid, c)?;
    let t1 = Instant::now();
    let stages = cfg.stage_list();
    let ctx = RankCtx {
        grid: cfg.grid,
        coords: c,
        kernel: cfg.kernel,
        stages: &stages,
    };
    let mut ops = OpCounts::default();
    let mut records = match cfg.arity {
        Arity::Two => rank_2way(&ctx, &block, comm, &mut ops)?,
        Arity::Three => rank_3way(&ctx, &block, comm, &mut ops)?,
    };
    let t2 = Instant::now();
    records.sort_by_key(|r| r.id);
    let checksum = Checksum128::of_records(&records, cfg.n_v)?;
    if let Some(out) = &cfg.output {
        write_metrics(&records, out, rank)?;
    }
    let metric_count = records.len();
    if !cfg.keep_records {
        records = Vec::new();
    }
    Ok(RankOutput {
        rank,
        coords: c,
        records,
        metric_count,
        checksum,
        ops,
        traffic: comm.traffic().clone(),
        load_time: t1 - t0,
        compute_time: t2 - t1,
        output_time: t2.elapsed(),
    })
}

/// Result of a whole run.
#[derive(Clone, Debug)]
pub struct RunResult<T> {
    pub outputs: Vec<RankOutput<T>>,
    pub checksum: Checksum128,
    pub ops: OpCounts,
    pub traffic: TrafficStats,
    pub metric_count: usize,
    pub elapsed: Duration,
}

impl<T: Element> RunResult<T> {
    pub fn from_outputs(outputs: Vec<RankOutput<T>>, elapsed: Duration) -> Self {
        let mut ops = OpCounts::default();
        let mut traffic = TrafficStats::default();
        for o in &outputs {
            ops += o.ops;
            traffic.merge(&o.traffic);
        }
        RunResult {
            checksum: outputs.iter().map(|o| o.checksum).sum(),
            metric_count: outputs.iter().map(|o| o.metric_count).sum(),
            outputs,
            ops,
            traffic,
            elapsed,
        }
    }

    /// All kept records in ascending canonical order.
    pub fn records(&self) -> Vec<MetricRecord<T>> {
        let mut v: Vec<MetricRecord<T>> = self.outputs.iter().flat_map(|o| o.records.iter().copied()).collect();
        v.sort_by_key(|r| r.id);
        v
    }
}

/// Runs every rank on its own thread over the configured transport.
pub fn execute<T: Element>(cfg: &RunConfig, source: &VectorSource) -> Result<RunResult<T>> {
    cfg.validate()?;
    let start = Instant::now();
    let transports = make_transports(&cfg.grid, &cfg.transport, cfg.engine.timeout)?;
    let outputs = spawn(&cfg.grid, transports, &cfg.engine, |c, comm| {
        run_rank::<T>(cfg, source, c, comm)
    })?;
    Ok(RunResult::from_outputs(outputs, start.elapsed()))
}
