//! Per-rank run-time model and decomposition suggestions.
//!
//! `t_g` is the time of one block min-product, `t_c` of one vector block
//! exchange, `t_tv`/`t_tm` of moving a vector/result block to and from an
//! accelerator, and `t_cpu` of the host-side metric work for one block.

use crate::element::Precision;
use crate::error::{Error, Result};
use crate::grid::DecompGrid;
use crate::tuple::Arity;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepTimes {
    pub t_g: f64,
    pub t_c: f64,
    pub t_tv: f64,
    pub t_tm: f64,
    pub t_cpu: f64,
}

impl StepTimes {
    fn check(&self) -> Result<()> {
        let all = [self.t_g, self.t_c, self.t_tv, self.t_tm, self.t_cpu];
        if all.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::config("model times must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// `t_c + t_tv + load * t_g + t_tm + t_cpu`.
pub fn predict_2way(t: &StepTimes, load: usize) -> Result<f64> {
    t.check()?;
    Ok(t.t_c + t.t_tv + load as f64 * t.t_g + t.t_tm + t.t_cpu)
}

/// `t_c + t_tv + load * [(3 + (n_vp / 6) / n_st) t_g + 3 t_tv + 4 t_tm + t_cpu]`.
pub fn predict_3way(t: &StepTimes, load: usize, n_vp: usize, n_st: usize) -> Result<f64> {
    t.check()?;
    if n_st == 0 {
        return Err(Error::config("n_st must be at least 1"));
    }
    let depth = (n_vp as f64 / 6.0) / n_st as f64;
    let per_slice = (3.0 + depth) * t.t_g + 3.0 * t.t_tv + 4.0 * t.t_tm + t.t_cpu;
    Ok(t.t_c + t.t_tv + load as f64 * per_slice)
}

/// Replication giving each 2-way rank about `load` blocks:
/// `ceil(ceil(n_pv / 2 + 1) / load)`.
pub fn n_pr_2way(n_pv: usize, load: usize) -> Result<usize> {
    if load == 0 || n_pv == 0 {
        return Err(Error::config("n_pv and the load must be at least 1"));
    }
    let blocks = (n_pv + 3) / 2;
    Ok(blocks.div_ceil(load))
}

/// Replication giving each 3-way rank about `load` slices:
/// `ceil((n_pv + 1)(n_pv + 2) / load)`.
pub fn n_pr_3way(n_pv: usize, load: usize) -> Result<usize> {
    if load == 0 || n_pv == 0 {
        return Err(Error::config("n_pv and the load must be at least 1"));
    }
    Ok(((n_pv + 1) * (n_pv + 2)).div_ceil(load))
}

pub fn n_pr_for(arity: Arity, n_pv: usize, load: usize) -> Result<usize> {
    match arity {
        Arity::Two => n_pr_2way(n_pv, load),
        Arity::Three => n_pr_3way(n_pv, load),
    }
}

/// Peak bytes a rank holds for a block of `n_fp x n_vp`: its own block, the
/// blocks it receives and the numerator matrices built from them.
pub fn rank_memory_bytes(arity: Arity, n_fp: usize, n_vp: usize, precision: Precision) -> u64 {
    let es = precision.element_size() as u64;
    let (v, m) = ((n_fp * n_vp) as u64, (n_vp * n_vp) as u64);
    match arity {
        Arity::Two => es * (2 * v + m),
        // Three vector blocks, the X columns, three pair matrices and B.
        Arity::Three => es * (4 * v + 4 * m),
    }
}

/// What [`suggest`] chooses between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuggestRequest {
    pub n_p: usize,
    pub n_v: usize,
    pub n_f: usize,
    pub arity: Arity,
    pub load: usize,
    pub memory_bytes: u64,
    pub precision: Precision,
}

/// The decomposition with the largest per-rank block that fits in memory,
/// with `n_pr` from the load formula and at most `n_p` ranks in total.
///
/// Ties go to the grid using more ranks, then to fewer field-axis ranks.
pub fn suggest(req: &SuggestRequest) -> Result<DecompGrid> {
    if req.n_p == 0 || req.load == 0 {
        return Err(Error::config("n_p and the load must be at least 1"));
    }
    let mut best: Option<(u64, usize, usize, DecompGrid)> = None;
    for n_pv in (1..=req.n_v).filter(|d| req.n_v % d == 0) {
        let n_vp = req.n_v / n_pv;
        if req.arity == Arity::Three && n_vp % 6 != 0 {
            continue;
        }
        let n_pr = n_pr_for(req.arity, n_pv, req.load)?;
        for n_pf in (1..=req.n_f).filter(|d| req.n_f % d == 0) {
            let grid = DecompGrid::new(n_pf, n_pv, n_pr, 1)?;
            if grid.n_p() > req.n_p || grid.validate(req.n_f, req.n_v, req.arity).is_err() {
                continue;
            }
            let n_fp = req.n_f / n_pf;
            if rank_memory_bytes(req.arity, n_fp, n_vp, req.precision) > req.memory_bytes {
                continue;
            }
            let key = ((n_fp * n_vp) as u64, grid.n_p(), usize::MAX - n_pf);
            if best.as_ref().map_or(true, |b| key > (b.0, b.1, b.2)) {
                best = Some((key.0, key.1, key.2, grid));
            }
        }
    }
    best.map(|b| b.3).ok_or_else(|| {
        Error::config(format!(
            "no decomposition of {} vectors x {} fields fits {} ranks with {} bytes each",
            req.n_v, req.n_f, req.n_p, req.memory_bytes
        ))
    })
}
