//! Kernel microbenchmarks and worker scaling sweeps.

use std::fmt::Write;
use std::time::{Duration, Instant};

use propsim::run::{execute, RunConfig, RunResult, VectorSource};
use propsim::verify::SyntheticSpec;
use propsim::{Arity, DecompGrid, DenseMatrix, Kernel, OpCounts, Precision, Result, Tile};

/// One kernel timing.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelRow {
    pub kernel: &'static str,
    pub size: usize,
    pub tile: Option<usize>,
    pub seconds: f64,
    pub ops: u64,
}

impl KernelRow {
    pub fn ops_per_sec(&self) -> f64 {
        self.ops as f64 / self.seconds
    }
}

fn matrix(n: usize, seed: u64, bits: u32) -> DenseMatrix<f64> {
    let g = SyntheticSpec::random_exact(seed, n, n, Precision::Double, bits)
        .generator()
        .expect("valid bench spec");
    DenseMatrix::from_fn(n, n, |q, i| g.value(q, i))
}

/// Best of `reps` runs of `kernel` on an `n x n` by `n x n` product.
pub fn time_kernel(kernel: Kernel, w: &DenseMatrix<f64>, v: &DenseMatrix<f64>, reps: usize) -> Result<(f64, u64)> {
    let mut best = f64::INFINITY;
    let mut ops = OpCounts::default();
    for _ in 0..reps.max(1) {
        ops = OpCounts::default();
        let t = Instant::now();
        let out = kernel.mgemm(w.view(), v.view(), &mut ops)?;
        best = best.min(t.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    Ok((best, ops.total()))
}

/// Naive, blocked (one row per tile) and bit-packed timings per size.
pub fn kernel_sweep(sizes: &[usize], tiles: &[usize], reps: usize) -> Result<Vec<KernelRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let (w, v) = (matrix(n, 1, 11), matrix(n, 2, 11));
        let (s, ops) = time_kernel(Kernel::Naive, &w, &v, reps)?;
        rows.push(KernelRow {
            kernel: "naive",
            size: n,
            tile: None,
            seconds: s,
            ops,
        });
        for &t in tiles {
            let (s, ops) = time_kernel(Kernel::Blocked(Tile::new(t, t)?), &w, &v, reps)?;
            rows.push(KernelRow {
                kernel: "blocked",
                size: n,
                tile: Some(t),
                seconds: s,
                ops,
            });
        }
        let (wb, vb) = (matrix(n, 3, 1), matrix(n, 4, 1));
        let (s, ops) = time_kernel(Kernel::BitPacked, &wb, &vb, reps)?;
        rows.push(KernelRow {
            kernel: "bitpacked",
            size: n,
            tile: None,
            seconds: s,
            ops,
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleMode {
    /// Vectors per worker held fixed.
    Weak,
    /// Total vectors held fixed.
    Strong,
}

impl ScaleMode {
    fn name(self) -> &'static str {
        match self {
            ScaleMode::Weak => "weak",
            ScaleMode::Strong => "strong",
        }
    }
}

/// One point of a scaling sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleRow {
    pub mode: ScaleMode,
    pub workers: usize,
    pub n_v: usize,
    pub n_f: usize,
    pub seconds: f64,
    pub comparisons: u64,
    pub ops: u64,
    /// Weak: per-worker rate over the 1-worker rate. Strong: `t_1 / (w t_w)`.
    pub efficiency: f64,
}

impl ScaleRow {
    pub fn comparisons_per_sec(&self) -> f64 {
        self.comparisons as f64 / self.seconds
    }

    pub fn per_worker(&self) -> f64 {
        self.comparisons_per_sec() / self.workers as f64
    }

    pub fn ops_per_sec(&self) -> f64 {
        self.ops as f64 / self.seconds
    }
}

#[derive(Clone, Debug)]
pub struct ScaleSpec {
    pub arity: Arity,
    pub n_f: usize,
    /// Weak: vectors per worker. Strong: total vectors.
    pub n_v: usize,
    pub workers: Vec<usize>,
    pub reps: usize,
}

fn timed_run(arity: Arity, n_f: usize, n_v: usize, workers: usize, reps: usize) -> Result<(f64, u64, u64)> {
    let spec = SyntheticSpec::random_exact(7, n_f, n_v, Precision::Double, 11);
    let source = VectorSource::Synthetic(spec.generator()?);
    let mut cfg = RunConfig::new(arity, n_f, n_v, DecompGrid::new(1, workers, 1, 1)?);
    cfg.keep_records = false;
    let mut best = Duration::MAX;
    let mut counts = (0, 0);
    for _ in 0..reps.max(1) {
        let r: RunResult<f64> = execute(&cfg, &source)?;
        best = best.min(r.elapsed);
        counts = (n_f as u64 * r.metric_count as u64, r.ops.total());
    }
    Ok((best.as_secs_f64(), counts.0, counts.1))
}

/// Runs the sweep; each worker owns one vector slab.
pub fn scaling(mode: ScaleMode, spec: &ScaleSpec) -> Result<Vec<ScaleRow>> {
    let mut rows: Vec<ScaleRow> = Vec::new();
    for &w in &spec.workers {
        let n_v = match mode {
            ScaleMode::Weak => spec.n_v * w,
            ScaleMode::Strong => spec.n_v,
        };
        let (seconds, comparisons, ops) = timed_run(spec.arity, spec.n_f, n_v, w, spec.reps)?;
        let mut row = ScaleRow {
            mode,
            workers: w,
            n_v,
            n_f: spec.n_f,
            seconds,
            comparisons,
            ops,
            efficiency: 1.0,
        };
        if let Some(base) = rows.first() {
            row.efficiency = match mode {
                ScaleMode::Weak => row.per_worker() / base.per_worker(),
                ScaleMode::Strong => base.seconds * base.workers as f64 / (w as f64 * seconds),
            };
        }
        rows.push(row);
    }
    Ok(rows)
}

/// True if aggregate comparisons per second never drop as workers are added.
pub fn is_monotone(rows: &[ScaleRow]) -> bool {
    rows.windows(2)
        .all(|p| p[1].comparisons_per_sec() >= p[0].comparisons_per_sec())
}

pub fn kernel_csv(rows: &[KernelRow]) -> String {
    let mut s = String::from("kernel,size,tile,seconds,ops,ops_per_sec\n");
    for r in rows {
        let tile = r.tile.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{:.6},{},{:.6e}", r.kernel, r.size, tile, r.seconds, r.ops, r.ops_per_sec());
    }
    s
}

pub fn kernel_table(rows: &[KernelRow]) -> String {
    let mut s = format!("{:<10} {:>6} {:>5} {:>10} {:>12}\n", "kernel", "size", "tile", "seconds", "ops/s");
    for r in rows {
        let tile = r.tile.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{:<10} {:>6} {:>5} {:>10.4} {:>12.3e}", r.kernel, r.size, tile, r.seconds, r.ops_per_sec());
    }
    s
}

pub fn scaling_csv(rows: &[ScaleRow]) -> String {
    let mut s = String::from(
        "mode,workers,n_v,n_f,seconds,comparisons,comparisons_per_sec,comparisons_per_sec_per_worker,ops_per_sec,efficiency\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{},{:.6e},{:.6e},{:.6e},{:.4}",
            r.mode.name(),
            r.workers,
            r.n_v,
            r.n_f,
            r.seconds,
            r.comparisons,
            r.comparisons_per_sec(),
            r.per_worker(),
            r.ops_per_sec(),
            r.efficiency
        );
    }
    s
}

pub fn scaling_table(rows: &[ScaleRow]) -> String {
    let mut s = format!(
        "{:<6} {:>7} {:>6} {:>10} {:>12} {:>12} {:>10}\n",
        "mode", "workers", "n_v", "seconds", "cmp/s", "cmp/s/wkr", "eff"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6} {:>7} {:>6} {:>10.4} {:>12.3e} {:>12.3e} {:>10.3}",
            r.mode.name(),
            r.workers,
            r.n_v,
            r.seconds,
            r.comparisons_per_sec(),
            r.per_worker(),
            r.efficiency
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_rows_per_size_and_tile() {
        let rows = kernel_sweep(&[8, 16], &[4, 8], 1).unwrap();
        assert_eq!(rows.len(), 2 * (2 + 2));
        assert_eq!(kernel_csv(&rows).lines().count(), rows.len() + 1);
    }

    #[test]
    fn scaling_points() {
        let spec = ScaleSpec {
            arity: Arity::Two,
            n_f: 8,
            n_v: 12,
            workers: vec![1, 2, 3],
            reps: 1,
        };
        let weak = scaling(ScaleMode::Weak, &spec).unwrap();
        assert_eq!(weak.iter().map(|r| r.n_v).collect::<Vec<_>>(), [12, 24, 36]);
        assert_eq!(weak[2].comparisons, 8 * 36 * 35 / 2);
        let strong = scaling(ScaleMode::Strong, &spec).unwrap();
        assert!(strong.iter().all(|r| r.n_v == 12));
        assert_eq!(strong[0].efficiency, 1.0);
    }
}
