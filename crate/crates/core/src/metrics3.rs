//! 3-way proportional similarity.
//!
//! `c3 = 1.5 * n3 / d3` where, for canonical `i < j < k`,
//! `n3 = ((n2(i,j) + n2(i,k)) + n2(j,k)) - n3'`, `n3' = sum_q min(v_i, v_j, v_k)`
//! and `d3 = (S_i + S_j) + S_k`.
//!
//! A slice task first forms the pairwise numerator matrices of its block,
//! then walks its pivot axis. For each pivot vector `x` it builds
//! `X = min(v_x, V_a)` column by column and multiplies `X^T min V_b` to get
//! `n3'` for every `(x, a, b)` in one min-product.

use std::ops::Range;

use crate::block::VectorBlock;
use crate::element::Element;
use crate::engine::{reduce_field_axis, Comm};
use crate::error::{Error, Result};
use crate::metrics2::{check_vector, degenerate, global_sums, recv_slab, send_slab};
use crate::mingemm::{xj_columns, DenseMatrix, Kernel, MatRef, OpCounts};
use crate::run::{execute, RankCtx, RunConfig, RunResult, VectorSource};
use crate::schedule::{region_3way, tasks_3way, BlockClass, Region, SliceTask3};
use crate::tuple::{Arity, MetricRecord, TupleId};

/// `1.5 n / d`, or `-0.0` when `d` is zero.
#[inline]
pub fn metric3_value<T: Element>(n: T, d: T) -> T {
    if d == T::ZERO {
        degenerate()
    } else {
        T::THREE_HALVES * n / d
    }
}

/// Metric of three vectors, straight from the definition.
pub fn czekanowski3<T: Element>(vi: &[T], vj: &[T], vk: &[T]) -> Result<T> {
    let n = vi.len();
    if n == 0 || vj.len() != n || vk.len() != n {
        return Err(Error::dim("vectors must have equal nonzero length"));
    }
    for v in [vi, vj, vk] {
        check_vector(v)?;
    }
    let fold = |f: &dyn Fn(usize) -> T| (1..n).fold(f(0), |s, q| s + f(q));
    let n2 = |a: &[T], b: &[T]| fold(&|q| a[q].min_elem(b[q]));
    let sum = |a: &[T]| fold(&|q| a[q]);
    let n3p = fold(&|q| vi[q].min_elem(vj[q]).min_elem(vk[q]));
    // Adding in ascending order makes the result exactly symmetric.
    let ascending = |mut t: [T; 3]| {
        t.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        t[0] + t[1] + t[2]
    };
    let n3 = ascending([n2(vi, vj), n2(vi, vk), n2(vj, vk)]) - n3p;
    Ok(metric3_value(n3, ascending([sum(vi), sum(vj), sum(vk)])))
}

/// The three vector blocks of a task, by slot, with their sums and global offsets.
#[derive(Clone, Copy, Debug)]
pub struct SlotInputs<'a, T> {
    pub blocks: [MatRef<'a, T>; 3],
    pub sums: [&'a [T]; 3],
    pub offsets: [usize; 3],
}

const SLOT_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Per-rank partial sums for one task region, before the field reduction.
#[derive(Clone, Debug)]
pub struct SlicePartials<T> {
    /// Column range of each slot that the pair matrices cover.
    ranges: [Range<usize>; 3],
    /// Distinct pair numerator matrices.
    pairs: Vec<DenseMatrix<T>>,
    /// Index into `pairs` for slot pairs (0,1), (0,2), (1,2).
    pair_of: [usize; 3],
    /// Owned local coordinates, in the order of `n3p`.
    pub elements: Vec<[usize; 3]>,
    pub n3p: Vec<T>,
}

impl<T: Element> SlicePartials<T> {
    pub fn flatten(&self) -> Vec<T> {
        let mut v: Vec<T> = self.pairs.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
        v.extend_from_slice(&self.n3p);
        v
    }

    /// Replaces the numeric contents with `flat` (same layout as [`Self::flatten`]).
    pub fn unflatten(&mut self, flat: &[T]) -> Result<()> {
        let total: usize = self.pairs.iter().map(|m| m.as_slice().len()).sum::<usize>() + self.n3p.len();
        if flat.len() != total {
            return Err(Error::dim(format!("{} reduced values for {total} partials", flat.len())));
        }
        let mut at = 0;
        for m in &mut self.pairs {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        self.n3p.copy_from_slice(&flat[at..]);
        Ok(())
    }

    fn n2(&self, s: usize, t: usize, l: [usize; 3]) -> T {
        let (s, t) = if s < t { (s, t) } else { (t, s) };
        let idx = SLOT_PAIRS.iter().position(|&p| p == (s, t)).expect("slot pair");
        self.pairs[self.pair_of[idx]].get(l[s] - self.ranges[s].start, l[t] - self.ranges[t].start)
    }
}

/// Computes pair numerators and `n3'` for every element of `region` from
/// the rows this rank holds.
pub fn slice_partials<T: Element>(
    task: &SliceTask3,
    region: &Region,
    inp: &SlotInputs<'_, T>,
    kernel: Kernel,
    ops: &mut OpCounts,
) -> Result<SlicePartials<T>> {
    let n_b = region.n_b;
    if inp.blocks.iter().any(|b| b.cols() != n_b) {
        return Err(Error::dim("slot blocks must all hold n_b vectors"));
    }
    let p = region.pivot_slot;
    let r = region.pivot_range.clone();
    let diagonal = task.class == BlockClass::DiagonalEdge;
    let ranges: [Range<usize>; 3] = std::array::from_fn(|s| {
        if s == p {
            r.clone()
        } else if diagonal {
            0..r.end
        } else {
            0..n_b
        }
    });
    let mut out = SlicePartials {
        ranges: ranges.clone(),
        pairs: Vec::new(),
        pair_of: [0; 3],
        elements: Vec::new(),
        n3p: Vec::new(),
    };
    if r.is_empty() {
        return Ok(out);
    }

    let mut keys: Vec<(usize, Range<usize>, usize, Range<usize>)> = Vec::new();
    for (idx, &(s, t)) in SLOT_PAIRS.iter().enumerate() {
        let key = (task.blocks[s], ranges[s].clone(), task.blocks[t], ranges[t].clone());
        out.pair_of[idx] = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                let m = kernel.mgemm(
                    inp.blocks[s].col_range(ranges[s].clone()),
                    inp.blocks[t].col_range(ranges[t].clone()),
                    ops,
                )?;
                keys.push(key);
                out.pairs.push(m);
                keys.len() - 1
            }
        };
    }

    let (a, b) = match p {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for x in r {
        let (ra, rb) = if diagonal { (0..x, 0..x) } else { (0..n_b, 0..n_b) };
        if ra.is_empty() || rb.is_empty() {
            continue;
        }
        let va = inp.blocks[a].col_range(ra.clone());
        let xm = xj_columns(va, inp.blocks[p].col(x))?;
        ops.mins += (va.rows() * va.cols()) as u64;
        let bm = kernel.mgemm(xm.view(), inp.blocks[b].col_range(rb.clone()), ops)?;
        for yb in rb.clone() {
            for ya in ra.clone() {
                let mut l = [0; 3];
                l[p] = x;
                l[a] = ya;
                l[b] = yb;
                if region.contains(l) {
                    out.elements.push(l);
                    out.n3p.push(bm.get(ya - ra.start, yb - rb.start));
                }
            }
        }
    }
    Ok(out)
}

/// Assembles metrics from field-reduced partials.
pub fn assemble_triples<T: Element>(
    partials: &SlicePartials<T>,
    inp: &SlotInputs<'_, T>,
    ops: &mut OpCounts,
) -> Result<Vec<MetricRecord<T>>> {
    let mut out = Vec::with_capacity(partials.elements.len());
    for (&l, &n3p) in partials.elements.iter().zip(&partials.n3p) {
        let g: [usize; 3] = std::array::from_fn(|s| inp.offsets[s] + l[s]);
        let mut o = [0usize, 1, 2];
        o.sort_unstable_by_key(|&s| g[s]);
        let n3 = partials.n2(o[0], o[1], l) + partials.n2(o[0], o[2], l) + partials.n2(o[1], o[2], l) - n3p;
        let sum = |s: usize| inp.sums[s][l[s]];
        let d = sum(o[0]) + sum(o[1]) + sum(o[2]);
        out.push(MetricRecord {
            id: TupleId::triple(g[o[0]], g[o[1]], g[o[2]])?,
            value: metric3_value(n3, d),
        });
    }
    ops.adds += 5 * out.len() as u64;
    ops.muls += 2 * out.len() as u64;
    Ok(out)
}

/// Metrics of one task region.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleSliceResult<T> {
    pub task: SliceTask3,
    pub stage: usize,
    pub records: Vec<MetricRecord<T>>,
}

/// One task stage on a single rank holding all fields. `v` holds the blocks
/// of slots `(I, J, K)`; `sums` their column sums.
#[allow(clippy::too_many_arguments)]
pub fn compute_triple_slice<T: Element>(
    task: &SliceTask3,
    v: [&VectorBlock<T>; 3],
    sums: [&[T]; 3],
    n_st: usize,
    stage: usize,
    kernel: Kernel,
    ops: &mut OpCounts,
) -> Result<TripleSliceResult<T>> {
    let n_b = v[0].n_v_local();
    if v.iter().any(|b| b.n_f_local() != v[0].n_f_local() || b.field_offset() != v[0].field_offset()) {
        return Err(Error::dim("blocks cover different field ranges"));
    }
    let region = region_3way(task, n_b, n_st, Some(stage))?;
    let inp = SlotInputs {
        blocks: [v[0].view(), v[1].view(), v[2].view()],
        sums,
        offsets: [v[0].vector_offset(), v[1].vector_offset(), v[2].vector_offset()],
    };
    let partials = slice_partials(task, &region, &inp, kernel, ops)?;
    Ok(TripleSliceResult {
        task: *task,
        stage,
        records: assemble_triples(&partials, &inp, ops)?,
    })
}

/// Rank body of a 3-way run: diagonal, face and volume phases in counter order.
pub(crate) fn rank_3way<T: Element>(
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
    let fetch = |comm: &mut Comm, step: usize, delta: usize| -> Result<(Vec<T>, Vec<T>)> {
        send_slab(ctx, comm, step as u32, delta, own, &sums)?;
        recv_slab(ctx, comm, step as u32, delta, (n_fp, n_b))
    };
    let mut cache_k: Option<(usize, Vec<T>, Vec<T>)> = None;
    let mut records = Vec::new();

    for task in tasks_3way(&grid, c) {
        let j_data = if task.delta_j == 0 {
            None
        } else {
            Some(fetch(comm, 2 * task.counter, task.delta_j)?)
        };
        if task.class == BlockClass::Volume && cache_k.as_ref().map(|k| k.0) != Some(task.delta_k) {
            let (v, s) = fetch(comm, 2 * task.counter + 1, task.delta_k)?;
            cache_k = Some((task.delta_k, v, s));
        }
        let (vj, sj): (&[T], &[T]) = match &j_data {
            Some((v, s)) => (v, s),
            None => (own, &sums),
        };
        let (vk, sk): (&[T], &[T]) = match task.class {
            BlockClass::DiagonalEdge | BlockClass::Face => (vj, sj),
            BlockClass::Volume => {
                let k = cache_k.as_ref().expect("fetched above");
                (&k.1, &k.2)
            }
        };
        let inp = SlotInputs {
            blocks: [
                MatRef::new(n_fp, n_b, own)?,
                MatRef::new(n_fp, n_b, vj)?,
                MatRef::new(n_fp, n_b, vk)?,
            ],
            sums: [&sums, sj, sk],
            offsets: task.blocks.map(|b| b * n_b),
        };
        for &stage in ctx.stages {
            let region = region_3way(&task, n_b, grid.n_st, Some(stage))?;
            let mut partials = slice_partials(&task, &region, &inp, ctx.kernel, ops)?;
            if grid.n_pf > 1 {
                let flat = partials.flatten();
                let n = flat.len();
                let reduced = reduce_field_axis(comm, &grid, c, flat)?;
                ops.adds += ((grid.n_pf - 1) * n) as u64;
                partials.unflatten(&reduced)?;
            }
            if c.p_f == 0 {
                records.extend(assemble_triples(&partials, &inp, ops)?);
            }
        }
    }
    Ok(records)
}

/// Distributed 3-way run over the configured grid, transport and stages.
pub fn run_3way<T: Element>(cfg: &RunConfig, source: &VectorSource) -> Result<RunResult<T>> {
    if cfg.arity != Arity::Three {
        return Err(Error::config("run_3way needs a 3-way configuration"));
    }
    execute(cfg, source)
}
