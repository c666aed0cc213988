//! 2-way proportional similarity.
//!
//! `c2(u, v) = 2 * n2 / d2` with `n2 = sum_q min(u_q, v_q)` and
//! `d2 = sum(u) + sum(v)`. When `d2` is zero (both vectors all zero) the
//! value is `-0.0`: it compares equal to 0, keeps the range, and its sign bit
//! marks the record as degenerate in full-precision output.

use crate::block::VectorBlock;
use crate::element::{encode_slice, Element};
use crate::engine::{reduce_field_axis, Comm, Tag, PHASE_SUMS, PHASE_VECTORS};
use crate::error::{Error, Result};
use crate::mingemm::{column_sums, DenseMatrix, Kernel, MatRef, OpCounts};
use crate::run::{execute, RankCtx, RunConfig, RunResult, VectorSource};
use crate::schedule::{steps_2way, tasks_2way};
use crate::tuple::{Arity, MetricRecord, TupleId};

pub(crate) fn degenerate<T: Element>() -> T {
    T::ZERO * (T::ZERO - T::ONE)
}

/// `2 n / d`, or `-0.0` when `d` is zero.
#[inline]
pub fn metric2_value<T: Element>(n: T, d: T) -> T {
    if d == T::ZERO {
        degenerate()
    } else {
        T::TWO * n / d
    }
}

pub(crate) fn check_vector<T: Element>(v: &[T]) -> Result<()> {
    for (q, &x) in v.iter().enumerate() {
        if !(x >= T::ZERO && x.to_f64().is_finite()) {
            return Err(Error::InvalidElement {
                field: q,
                vector: 0,
                value: x.to_f64(),
            });
        }
    }
    Ok(())
}

/// Metric of two vectors, straight from the definition.
pub fn czekanowski2<T: Element>(vi: &[T], vj: &[T]) -> Result<T> {
    if vi.len() != vj.len() || vi.is_empty() {
        return Err(Error::dim(format!(
            "vectors of length {} and {}",
            vi.len(),
            vj.len()
        )));
    }
    check_vector(vi)?;
    check_vector(vj)?;
    let m = DenseMatrix::from_columns(&[vi.to_vec(), vj.to_vec()])?;
    let mut ops = OpCounts::default();
    let n = Kernel::Naive.mgemm(m.col_range(0..1), m.col_range(1..2), &mut ops)?;
    let s = column_sums(m.view());
    Ok(metric2_value(n.get(0, 0), s[0] + s[1]))
}

/// Which entries of a result block are metrics of this block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairFilter {
    /// Both operands are the same slab: keep local `li < lj`.
    Diagonal,
    /// Distinct slabs: keep everything.
    Full,
}

/// Numerators of one result block and the metrics extracted from it.
#[derive(Clone, Debug, PartialEq)]
pub struct PairBlockResult<T> {
    pub row_offset: usize,
    pub col_offset: usize,
    pub numerators: DenseMatrix<T>,
    pub records: Vec<MetricRecord<T>>,
}

/// Turns (already field-reduced) numerators into metric records.
pub fn extract_pairs<T: Element>(
    numerators: &DenseMatrix<T>,
    row_offset: usize,
    col_offset: usize,
    sums_w: &[T],
    sums_v: &[T],
    filter: PairFilter,
    ops: &mut OpCounts,
) -> Result<Vec<MetricRecord<T>>> {
    let (m, n) = (numerators.rows(), numerators.cols());
    if sums_w.len() != m || sums_v.len() != n {
        return Err(Error::dim("column sums do not match the numerator block"));
    }
    let mut out = Vec::new();
    for j in 0..n {
        let rows = match filter {
            PairFilter::Diagonal => 0..j.min(m),
            PairFilter::Full => 0..m,
        };
        for i in rows {
            // Addition is commutative, so the sum is canonical either way round.
            let value = metric2_value(numerators.get(i, j), sums_w[i] + sums_v[j]);
            out.push(MetricRecord {
                id: TupleId::from_unordered(&[row_offset + i, col_offset + j])?,
                value,
            });
        }
    }
    ops.adds += out.len() as u64;
    ops.muls += 2 * out.len() as u64;
    Ok(out)
}

/// One block `W^T min V` on a single rank holding all fields.
pub fn compute_pair_block<T: Element>(
    w: &VectorBlock<T>,
    v: &VectorBlock<T>,
    sums_w: &[T],
    sums_v: &[T],
    filter: PairFilter,
    kernel: Kernel,
    ops: &mut OpCounts,
) -> Result<PairBlockResult<T>> {
    if w.field_offset() != v.field_offset() || w.n_f_local() != v.n_f_local() {
        return Err(Error::dim("blocks cover different field ranges"));
    }
    let numerators = kernel.mgemm(w.view(), v.view(), ops)?;
    let records = extract_pairs(
        &numerators,
        w.vector_offset(),
        v.vector_offset(),
        sums_w,
        sums_v,
        filter,
        ops,
    )?;
    Ok(PairBlockResult {
        row_offset: w.vector_offset(),
        col_offset: v.vector_offset(),
        numerators,
        records,
    })
}

/// Column sums of a block, reduced over the field axis.
pub(crate) fn global_sums<T: Element>(
    ctx: &RankCtx<'_>,
    block: MatRef<'_, T>,
    comm: &mut Comm,
    ops: &mut OpCounts,
) -> Result<Vec<T>> {
    let partial = column_sums(block);
    *ops += OpCounts::column_sums(block.rows(), block.cols());
    let sums = reduce_field_axis(comm, &ctx.grid, ctx.coords, partial)?;
    ops.adds += ((ctx.grid.n_pf - 1) * block.cols()) as u64;
    Ok(sums)
}

/// Sends this rank's block and sums to the slab `delta` below.
pub(crate) fn send_slab<T: Element>(
    ctx: &RankCtx<'_>,
    comm: &mut Comm,
    step: u32,
    delta: usize,
    block: &[T],
    sums: &[T],
) -> Result<()> {
    let dest = ctx.grid.shifted(ctx.coords, -(delta as isize));
    comm.send(dest, Tag::new(PHASE_VECTORS, step), block)?;
    comm.send_bytes(dest, Tag::new(PHASE_SUMS, step), encode_slice(sums), 0)
}

/// Receives the block and sums of the slab `delta` above.
pub(crate) fn recv_slab<T: Element>(
    ctx: &RankCtx<'_>,
    comm: &mut Comm,
    step: u32,
    delta: usize,
    shape: (usize, usize),
) -> Result<(Vec<T>, Vec<T>)> {
    let source = ctx.grid.shifted(ctx.coords, delta as isize);
    let other: Vec<T> = comm.recv(source, Tag::new(PHASE_VECTORS, step))?;
    let other_sums: Vec<T> = comm.recv(source, Tag::new(PHASE_SUMS, step))?;
    if other.len() != shape.0 * shape.1 || other_sums.len() != shape.1 {
        return Err(Error::dim(format!("rank {source} sent a block of the wrong shape")));
    }
    Ok((other, other_sums))
}

/// Rank body of a 2-way run: circulant block loop with field-axis reduction.
pub(crate) fn rank_2way<T: Element>(
    ctx: &RankCtx<'_>,
    block: &VectorBlock<T>,
    comm: &mut Comm,
    ops: &mut OpCounts,
) -> Result<Vec<MetricRecord<T>>> {
    let grid = ctx.grid;
    let c = ctx.coords;
    let (n_fp, n_b) = (block.n_f_local(), block.n_v_local());
    let own = block.matrix().as_slice();
    let sums = global_sums(ctx, block.view(), comm, ops)?;
    let keep: Vec<usize> = tasks_2way(&grid, c).iter().map(|t| t.step).collect();
    let mut records = Vec::new();

    let steps = steps_2way(&grid, c);
    // Each step's block goes out one step early so it is in flight while
    // the current block is computed.
    let mut sent = 0;
    for (n, &step) in steps.iter().enumerate() {
        while sent < steps.len() && sent <= n + 1 {
            if steps[sent] != 0 {
                send_slab(ctx, comm, steps[sent] as u32, steps[sent], own, &sums)?;
            }
            sent += 1;
        }
        let (other, other_sums) = if step == 0 {
            (own.to_vec(), sums.clone())
        } else {
            recv_slab(ctx, comm, step as u32, step, (n_fp, n_b))?
        };
        // The dropped half-offset block is still exchanged, then discarded.
        if !keep.contains(&step) {
            continue;
        }
        let other = DenseMatrix::from_col_major(n_fp, n_b, other)?;
        let partial = ctx.kernel.mgemm(block.view(), other.view(), ops)?;
        let reduced = reduce_field_axis(comm, &grid, c, partial.into_vec())?;
        ops.adds += ((grid.n_pf - 1) * n_b * n_b) as u64;
        if c.p_f != 0 {
            continue;
        }
        let numerators = DenseMatrix::from_col_major(n_b, n_b, reduced)?;
        let col_slab = (c.p_v + step) % grid.n_pv;
        let filter = if step == 0 {
            PairFilter::Diagonal
        } else {
            PairFilter::Full
        };
        records.extend(extract_pairs(
            &numerators,
            c.p_v * n_b,
            col_slab * n_b,
            &sums,
            &other_sums,
            filter,
            ops,
        )?);
    }
    Ok(records)
}

/// Distributed 2-way run over the configured grid and transport.
pub fn run_2way<T: Element>(cfg: &RunConfig, source: &VectorSource) -> Result<RunResult<T>> {
    if cfg.arity != Arity::Two {
        return Err(Error::config("run_2way needs a 2-way configuration"));
    }
    execute(cfg, source)
}
