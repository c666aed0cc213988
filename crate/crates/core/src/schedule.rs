//! Symmetry-eliminating work decomposition.
//!
//! The vector axis is cut into `n_pv` slabs of `n_b = n_v / n_pv` vectors.
//! Rank `(p_f, p_v, p_r)` works on result blocks whose first coordinate is
//! slab `p_v`; the blocks of a slab are dealt round-robin to its `n_pr`
//! replicas. Every rank derives the full schedule locally, so no
//! coordination messages are needed.
//!
//! 2-way: slab `I` computes blocks `(I, I + d mod n_pv)` for
//! `d = 0..=n_pv/2`. When `n_pv` is even the half-offset block `d = n_pv/2`
//! would be computed twice, so only slabs `I < n_pv/2` keep it.
//!
//! 3-way: slab `I` computes, in order,
//! - the diagonal block `(I, I, I)` in six slices,
//! - face blocks `(I, J, J)` for every `J != I`, each in six slices,
//! - volume blocks `(I, J, K)` for distinct `J, K != I`, one task each,
//!
//! giving `(n_pv + 1)(n_pv + 2)` slice units per slab. Each task owns a
//! region of its block defined by [`region_3way`]; the regions of all tasks
//! partition the set of canonical triples.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid::{DecompGrid, RankCoords};
use crate::tuple::Arity;

/// One 2-way result block computed by a rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockTask2 {
    /// Offset along the circulant, `col_block = row_block + step mod n_pv`.
    pub step: usize,
    pub owner: RankCoords,
    pub row_block: usize,
    pub col_block: usize,
    pub diagonal: bool,
}

/// Kind of a 3-way result block, by how many of its slab indices coincide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockClass {
    DiagonalEdge,
    Face,
    Volume,
}

impl BlockClass {
    pub fn name(self) -> &'static str {
        match self {
            BlockClass::DiagonalEdge => "diagonal",
            BlockClass::Face => "face",
            BlockClass::Volume => "volume",
        }
    }
}

/// One 3-way slice unit computed by a rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SliceTask3 {
    pub owner: RankCoords,
    /// Slab indices `(I, J, K)`; `I` is the owner's slab.
    pub blocks: [usize; 3],
    pub class: BlockClass,
    /// Slice number in `0..6`. For volume blocks this is the permutation
    /// rank of `(I, J, K)` among the orderings of its sorted slab ids.
    pub slice: usize,
    /// Running slice-unit counter within the slab; decides `p_r`.
    pub counter: usize,
    pub delta_j: usize,
    pub delta_k: usize,
}

/// Block slot (`0` = i, `1` = j, `2` = k) along which a task's region is
/// sliced and its pipeline runs.
pub type Slot = usize;

/// The set of local `(li, lj, lk)` a task owns within its block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub class: BlockClass,
    pub pivot_slot: Slot,
    pub pivot_range: Range<usize>,
    pub n_b: usize,
}

impl Region {
    pub fn contains(&self, l: [usize; 3]) -> bool {
        if l.iter().any(|&x| x >= self.n_b) || !self.pivot_range.contains(&l[self.pivot_slot]) {
            return false;
        }
        match self.class {
            BlockClass::DiagonalEdge => l[0] < l[1] && l[1] < l[2],
            BlockClass::Face => l[1] < l[2],
            BlockClass::Volume => true,
        }
    }

    /// All owned local coordinates, pivot index outermost.
    pub fn elements(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for a in 0..self.n_b {
            for b in 0..self.n_b {
                for c in 0..self.n_b {
                    let l = [a, b, c];
                    if self.contains(l) {
                        out.push(l);
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        let n = self.n_b;
        let p = self.pivot_range.clone();
        match self.class {
            // lk = p, li < lj < p.
            BlockClass::DiagonalEdge => p.map(|x| x * x.saturating_sub(1) / 2).sum(),
            BlockClass::Face => p.len() * (n * n.saturating_sub(1) / 2),
            BlockClass::Volume => p.len() * n * n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ownership of a canonical pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairOwner {
    pub rank: usize,
    pub coords: RankCoords,
    /// Index of the owning task in the rank's task list.
    pub task_position: usize,
    pub step: usize,
}

/// Ownership of a canonical triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TripleOwner {
    pub rank: usize,
    pub coords: RankCoords,
    pub stage: usize,
    /// Index of the owning task in the rank's task list.
    pub task_position: usize,
    pub counter: usize,
}

/// Per-rank task counts and derived balance figures.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadStats {
    pub per_rank: Vec<usize>,
    pub max: usize,
    pub min: usize,
    /// `min / max`, at most 1.
    pub imbalance_ratio: f64,
    /// Slice units per slab (3-way) or blocks per slab summed (2-way).
    pub units_per_slab: usize,
    /// Volume-block units per slab; zero for 2-way.
    pub volume_units_per_slab: usize,
}

impl LoadStats {
    pub fn volume_fraction(&self) -> f64 {
        self.volume_units_per_slab as f64 / self.units_per_slab as f64
    }
}

/// `n_pv^2 / ((n_pv + 1)(n_pv + 2))`: fraction of useful volume-equivalent
/// work when every slice unit costs as much as a volume slice.
pub fn imbalance_factor(n_pv: usize) -> f64 {
    let n = n_pv as f64;
    n * n / ((n + 1.0) * (n + 2.0))
}

/// `[floor(x * n / d), floor((x + 1) * n / d))`.
fn part(x: usize, n: usize, d: usize) -> Range<usize> {
    (x * n / d)..((x + 1) * n / d)
}

/// Pipeline range of stage `s_t` within sixth `s` of `[0, n_vp)`.
pub fn stage_range(s_t: usize, s: usize, n_vp: usize, n_st: usize) -> Result<Range<usize>> {
    if n_st == 0 || s_t >= n_st || s >= 6 {
        return Err(Error::config(format!(
            "invalid stage {s_t} of {n_st} or slice {s}"
        )));
    }
    Ok(part(s_t + n_st * s, n_vp, 6 * n_st))
}

fn sixth_of(x: usize, n_b: usize) -> usize {
    (0..6)
        .find(|&s| part(s, n_b, 6).contains(&x))
        .expect("index inside block")
}

fn stage_of(x: usize, s: usize, n_b: usize, n_st: usize) -> usize {
    (0..n_st)
        .find(|&t| part(t + n_st * s, n_b, 6 * n_st).contains(&x))
        .expect("index inside sixth")
}

pub fn classify_block3(i: usize, j: usize, k: usize) -> BlockClass {
    if i == j && j == k {
        BlockClass::DiagonalEdge
    } else if i == j || j == k || i == k {
        BlockClass::Face
    } else {
        BlockClass::Volume
    }
}

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Lexicographic rank of the ordering of three distinct values.
fn permutation_rank(b: [usize; 3]) -> usize {
    let mut sorted = b;
    sorted.sort_unstable();
    let pos = b.map(|x| sorted.iter().position(|&y| y == x).expect("present"));
    PERMS.iter().position(|p| *p == pos).expect("distinct values")
}

fn block_edge(n_v: usize, grid: &DecompGrid) -> Result<usize> {
    if n_v == 0 || n_v % grid.n_pv != 0 {
        return Err(Error::config(format!(
            "n_v={n_v} is not divisible by n_pv={}",
            grid.n_pv
        )));
    }
    Ok(n_v / grid.n_pv)
}

fn keeps_half_offset(n_pv: usize, step: usize, p_v: usize) -> bool {
    !(n_pv % 2 == 0 && step > 0 && step == n_pv / 2 && p_v >= n_pv / 2)
}

/// Circulant offsets a rank takes part in, including ones it exchanges
/// vectors for but does not compute (the dropped half-offset block).
pub fn steps_2way(grid: &DecompGrid, c: RankCoords) -> Vec<usize> {
    (0..=grid.n_pv / 2).filter(|d| d % grid.n_pr == c.p_r).collect()
}

/// Blocks each rank computes, indexed by rank.
pub fn schedule_2way(grid: &DecompGrid) -> Result<Vec<Vec<BlockTask2>>> {
    let mut out = Vec::with_capacity(grid.n_p());
    for rank in 0..grid.n_p() {
        let c = grid.coords_of_rank(rank)?;
        out.push(tasks_2way(grid, c));
    }
    Ok(out)
}

pub fn tasks_2way(grid: &DecompGrid, c: RankCoords) -> Vec<BlockTask2> {
    steps_2way(grid, c)
        .into_iter()
        .filter(|&d| keeps_half_offset(grid.n_pv, d, c.p_v))
        .map(|d| BlockTask2 {
            step: d,
            owner: c,
            row_block: c.p_v,
            col_block: (c.p_v + d) % grid.n_pv,
            diagonal: d == 0,
        })
        .collect()
}

/// Owner of pair `(i, j)`. Field-axis rank 0 of the group extracts metrics.
pub fn owns_pair(i: usize, j: usize, n_v: usize, grid: &DecompGrid) -> Result<PairOwner> {
    if i >= j || j >= n_v {
        return Err(Error::InvalidTuple(format!("({i},{j}) with n_v={n_v}")));
    }
    let n_b = block_edge(n_v, grid)?;
    let n = grid.n_pv;
    let (a, b) = (i / n_b, j / n_b);
    let (slab, step) = if a == b {
        (a, 0)
    } else {
        let d = (b + n - a) % n;
        if d < n - d || (d == n - d && a < n / 2) {
            (a, d)
        } else {
            (b, n - d)
        }
    };
    let p_r = step % grid.n_pr;
    let coords = RankCoords { p_f: 0, p_v: slab, p_r };
    let task_position = tasks_2way(grid, coords)
        .iter()
        .position(|t| t.step == step)
        .expect("owner schedules the block");
    Ok(PairOwner {
        rank: grid.rank_of_coords(coords)?,
        coords,
        task_position,
        step,
    })
}

/// Every slice unit of slab `p_v` in counter order, before assignment to replicas.
fn slab_units_3way(n_pv: usize, p_v: usize) -> Vec<([usize; 3], BlockClass, usize, usize, usize)> {
    let mut units = Vec::with_capacity((n_pv + 1) * (n_pv + 2));
    let i = p_v;
    for s in 0..6 {
        units.push(([i, i, i], BlockClass::DiagonalEdge, s, 0, 0));
    }
    for s in 0..6 {
        for dj in 1..n_pv {
            let j = (i + dj) % n_pv;
            units.push(([i, j, j], BlockClass::Face, s, dj, dj));
        }
    }
    for dk in 1..n_pv {
        for dj in 1..n_pv {
            if dj == dk {
                continue;
            }
            let b = [i, (i + dj) % n_pv, (i + dk) % n_pv];
            units.push((b, BlockClass::Volume, permutation_rank(b), dj, dk));
        }
    }
    units
}

/// Slice units each rank computes, indexed by rank.
pub fn schedule_3way(grid: &DecompGrid) -> Result<Vec<Vec<SliceTask3>>> {
    let mut out = Vec::with_capacity(grid.n_p());
    for rank in 0..grid.n_p() {
        let c = grid.coords_of_rank(rank)?;
        out.push(tasks_3way(grid, c));
    }
    Ok(out)
}

pub fn tasks_3way(grid: &DecompGrid, c: RankCoords) -> Vec<SliceTask3> {
    slab_units_3way(grid.n_pv, c.p_v)
        .into_iter()
        .enumerate()
        .filter(|(counter, _)| counter % grid.n_pr == c.p_r)
        .map(|(counter, (blocks, class, slice, dj, dk))| SliceTask3 {
            owner: c,
            blocks,
            class,
            slice,
            counter,
            delta_j: dj,
            delta_k: dk,
        })
        .collect()
}

/// Owned region of `task`, optionally restricted to one stage of `n_st`.
pub fn region_3way(task: &SliceTask3, n_b: usize, n_st: usize, stage: Option<usize>) -> Result<Region> {
    if task.slice >= 6 || n_b == 0 {
        return Err(Error::config(format!("invalid task slice {}", task.slice)));
    }
    if classify_block3(task.blocks[0], task.blocks[1], task.blocks[2]) != task.class {
        return Err(Error::config(format!(
            "task blocks {:?} are not a {} block",
            task.blocks,
            task.class.name()
        )));
    }
    let pivot_slot = match task.class {
        BlockClass::DiagonalEdge => 2,
        BlockClass::Face => {
            if task.blocks[1] != task.blocks[2] {
                return Err(Error::config("face tasks must have the form (I, J, J)"));
            }
            0
        }
        BlockClass::Volume => {
            if permutation_rank(task.blocks) != task.slice {
                return Err(Error::config("volume task slice must match its block ordering"));
            }
            let a = *task.blocks.iter().min().expect("three blocks");
            task.blocks.iter().position(|&b| b == a).expect("present")
        }
    };
    let pivot_range = match stage {
        None => part(task.slice, n_b, 6),
        Some(s_t) => stage_range(s_t, task.slice, n_b, n_st)?,
    };
    Ok(Region {
        class: task.class,
        pivot_slot,
        pivot_range,
        n_b,
    })
}

/// Owner of triple `(i, j, k)` and the stage (of `grid.n_st`) it falls in.
pub fn owns_triple(i: usize, j: usize, k: usize, n_v: usize, grid: &DecompGrid) -> Result<TripleOwner> {
    if i >= j || j >= k || k >= n_v {
        return Err(Error::InvalidTuple(format!("({i},{j},{k}) with n_v={n_v}")));
    }
    let n_b = block_edge(n_v, grid)?;
    let n = grid.n_pv;
    let (a, b, c) = (i / n_b, j / n_b, k / n_b);
    let (li, lk) = (i % n_b, k % n_b);
    let (slab, counter, pivot, slice) = if a == b && b == c {
        let s = sixth_of(lk, n_b);
        (a, s, lk, s)
    } else if a == b {
        // Two elements in slab a, one in slab c: face block (c, a, a).
        let s = sixth_of(lk, n_b);
        let dj = (a + n - c) % n;
        (c, 6 + s * (n - 1) + (dj - 1), lk, s)
    } else if b == c {
        let s = sixth_of(li, n_b);
        let dj = (b + n - a) % n;
        (a, 6 + s * (n - 1) + (dj - 1), li, s)
    } else {
        // Slabs a < b < c; the slab-a element picks the ordering.
        let sigma = sixth_of(li, n_b);
        let order = PERMS[sigma].map(|p| [a, b, c][p]);
        let owner = order[0];
        let dj = (order[1] + n - owner) % n;
        let dk = (order[2] + n - owner) % n;
        let idx = (dk - 1) * (n - 2) + (dj - 1) - usize::from(dj > dk);
        (owner, 6 + 6 * (n - 1) + idx, li, sigma)
    };
    let coords = RankCoords {
        p_f: 0,
        p_v: slab,
        p_r: counter % grid.n_pr,
    };
    Ok(TripleOwner {
        rank: grid.rank_of_coords(coords)?,
        coords,
        stage: stage_of(pivot, slice, n_b, grid.n_st),
        task_position: counter / grid.n_pr,
        counter,
    })
}

/// Task counts per rank for the given arity.
pub fn load_stats(grid: &DecompGrid, arity: Arity) -> Result<LoadStats> {
    let (per_rank, units_per_slab, volume_units_per_slab) = match arity {
        Arity::Two => {
            let s = schedule_2way(grid)?;
            let per: Vec<usize> = s.iter().map(Vec::len).collect();
            let slab0: usize = (0..grid.n_pv)
                .map(|p_v| {
                    (0..grid.n_pr)
                        .map(|p_r| tasks_2way(grid, RankCoords { p_f: 0, p_v, p_r }).len())
                        .sum::<usize>()
                })
                .max()
                .unwrap_or(0);
            (per, slab0, 0)
        }
        Arity::Three => {
            let s = schedule_3way(grid)?;
            let per: Vec<usize> = s.iter().map(Vec::len).collect();
            let units = slab_units_3way(grid.n_pv, 0);
            let vol = units
                .iter()
                .filter(|u| u.1 == BlockClass::Volume)
                .count();
            (per, units.len(), vol)
        }
    };
    let max = per_rank.iter().copied().max().unwrap_or(0);
    let min = per_rank.iter().copied().min().unwrap_or(0);
    Ok(LoadStats {
        imbalance_ratio: if max == 0 { 1.0 } else { min as f64 / max as f64 },
        per_rank,
        max,
        min,
        units_per_slab,
        volume_units_per_slab,
    })
}

/// Tab-separated listing of every rank's tasks, one per line.
pub fn dump_schedule(grid: &DecompGrid, arity: Arity) -> Result<String> {
    let mut out = String::new();
    match arity {
        Arity::Two => {
            out.push_str("rank\tp_f\tp_v\tp_r\tposition\tstep\trow_block\tcol_block\tdiagonal\n");
            for (rank, tasks) in schedule_2way(grid)?.iter().enumerate() {
                for (pos, t) in tasks.iter().enumerate() {
                    let c = t.owner;
                    let _ = writeln!(
                        out,
                        "{rank}\t{}\t{}\t{}\t{pos}\t{}\t{}\t{}\t{}",
                        c.p_f, c.p_v, c.p_r, t.step, t.row_block, t.col_block, t.diagonal
                    );
                }
            }
        }
        Arity::Three => {
            out.push_str("rank\tp_f\tp_v\tp_r\tposition\tcounter\tclass\tI\tJ\tK\tslice\n");
            for (rank, tasks) in schedule_3way(grid)?.iter().enumerate() {
                for (pos, t) in tasks.iter().enumerate() {
                    let c = t.owner;
                    let _ = writeln!(
                        out,
                        "{rank}\t{}\t{}\t{}\t{pos}\t{}\t{}\t{}\t{}\t{}\t{}",
                        c.p_f,
                        c.p_v,
                        c.p_r,
                        t.counter,
                        t.class.name(),
                        t.blocks[0],
                        t.blocks[1],
                        t.blocks[2],
                        t.slice
                    );
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n_pv: usize, n_pr: usize, n_st: usize) -> DecompGrid {
        DecompGrid::new(1, n_pv, n_pr, n_st).unwrap()
    }

    fn slab_count_2way(g: &DecompGrid, p_v: usize) -> usize {
        (0..g.n_pr)
            .map(|p_r| tasks_2way(g, RankCoords { p_f: 0, p_v, p_r }).len())
            .sum()
    }

    #[test]
    fn circulant_odd() {
        let g = grid(5, 1, 1);
        let s = schedule_2way(&g).unwrap();
        assert!(s.iter().all(|t| t.len() == 3));
        let total: usize = s.iter().map(Vec::len).sum();
        let diag = s.iter().flatten().filter(|t| t.diagonal).count();
        assert_eq!((total, diag), (15, 5));
        for t in s.iter().flatten() {
            assert_eq!(t.col_block, (t.row_block + t.step) % 5);
        }
    }

    #[test]
    fn circulant_single_slab() {
        let s = schedule_2way(&grid(1, 1, 1)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 1);
        assert!(s[0][0].diagonal);
    }

    #[test]
    fn circulant_even_half_offset() {
        let g = grid(4, 1, 1);
        let counts: Vec<usize> = (0..4).map(|p| slab_count_2way(&g, p)).collect();
        assert_eq!(counts, vec![3, 3, 2, 2]);
    }

    #[test]
    fn pair_owner_examples() {
        let g = grid(1, 1, 1);
        assert_eq!(owns_pair(2, 5, 6, &g).unwrap().rank, 0);
        // Block (0, 2) with n_pv = 3 is slab 2's offset-1 block.
        let g = grid(3, 1, 1);
        let o = owns_pair(0, 5, 6, &g).unwrap();
        assert_eq!(o.coords.p_v, 2);
        assert_eq!(o.step, 1);
        assert!(owns_pair(3, 3, 6, &g).is_err());
    }

    #[test]
    fn pair_owner_matches_schedule() {
        for n_pv in 1..=8 {
            for n_pr in 1..=4 {
                let g = grid(n_pv, n_pr, 1);
                let n_v = 2 * n_pv;
                let n_b = 2;
                for i in 0..n_v {
                    for j in i + 1..n_v {
                        let o = owns_pair(i, j, n_v, &g).unwrap();
                        let tasks = tasks_2way(&g, o.coords);
                        let t = tasks[o.task_position];
                        let (r, c) = (t.row_block, t.col_block);
                        let (bi, bj) = (i / n_b, j / n_b);
                        assert!((r, c) == (bi, bj) || (r, c) == (bj, bi), "{i},{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_block3(2, 2, 2), BlockClass::DiagonalEdge);
        assert_eq!(classify_block3(1, 4, 4), BlockClass::Face);
        assert_eq!(classify_block3(0, 2, 5), BlockClass::Volume);
    }

    #[test]
    fn slice_unit_counts() {
        for n_pv in 1..=16 {
            let units = slab_units_3way(n_pv, 0);
            assert_eq!(units.len(), (n_pv + 1) * (n_pv + 2));
        }
        let s = schedule_3way(&grid(4, 1, 1)).unwrap();
        assert!(s.iter().all(|t| t.len() == 30));
        let s = schedule_3way(&grid(1, 1, 1)).unwrap();
        assert_eq!(s[0].len(), 6);
    }

    #[test]
    fn round_robin_within_one() {
        let g = grid(4, 5, 1);
        let stats = load_stats(&g, Arity::Three).unwrap();
        assert!(stats.max - stats.min <= 1, "{stats:?}");
        assert_eq!(stats.per_rank.iter().sum::<usize>(), 4 * 30);
    }

    #[test]
    fn stage_range_examples() {
        assert_eq!(stage_range(15, 5, 2880, 16).unwrap().len(), 30);
        assert_eq!(stage_range(0, 0, 6, 1).unwrap(), 0..1);
        assert!(stage_range(2, 0, 6, 2).is_err());
        assert!(stage_range(0, 6, 6, 1).is_err());
        for (n_vp, n_st) in [(6, 1), (12, 2), (36, 3), (7, 2), (30, 4)] {
            let mut covered = vec![0u32; n_vp];
            for s in 0..6 {
                for t in 0..n_st {
                    for x in stage_range(t, s, n_vp, n_st).unwrap() {
                        covered[x] += 1;
                    }
                }
            }
            assert!(covered.iter().all(|&c| c == 1), "{n_vp} {n_st}");
        }
    }

    fn unit(blocks: [usize; 3], class: BlockClass, slice: usize) -> SliceTask3 {
        SliceTask3 {
            owner: RankCoords { p_f: 0, p_v: blocks[0], p_r: 0 },
            blocks,
            class,
            slice,
            counter: 0,
            delta_j: 0,
            delta_k: 0,
        }
    }

    #[test]
    fn diagonal_region_union() {
        let mut all = Vec::new();
        for s in 0..6 {
            let r = region_3way(&unit([0, 0, 0], BlockClass::DiagonalEdge, s), 4, 1, None).unwrap();
            assert_eq!(r.len(), r.elements().len());
            all.extend(r.elements());
        }
        all.sort();
        assert_eq!(all, vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]);
    }

    #[test]
    fn face_region_union() {
        let mut all = Vec::new();
        for s in 0..6 {
            let r = region_3way(&unit([0, 1, 1], BlockClass::Face, s), 3, 1, None).unwrap();
            all.extend(r.elements());
        }
        all.sort();
        assert_eq!(all.len(), 9);
        all.dedup();
        assert_eq!(all.len(), 9);
        assert!(all.iter().all(|l| l[1] < l[2]));
    }

    #[test]
    fn volume_sigma_rule_covers_once() {
        let n_b = 6;
        let (a, b, c) = (0usize, 1usize, 2usize);
        let mut seen = vec![0u8; n_b * n_b * n_b];
        for p in PERMS {
            let blocks = p.map(|x| [a, b, c][x]);
            let t = unit(blocks, BlockClass::Volume, permutation_rank(blocks));
            let r = region_3way(&t, n_b, 1, None).unwrap();
            assert_eq!(r.len(), n_b * n_b * n_b / 6);
            for l in r.elements() {
                // Map slot-local indices back to (la, lb, lc).
                let mut by_block = [0; 3];
                for slot in 0..3 {
                    by_block[blocks[slot]] = l[slot];
                }
                seen[(by_block[0] * n_b + by_block[1]) * n_b + by_block[2]] += 1;
            }
        }
        assert!(seen.iter().all(|&x| x == 1));
    }

    #[test]
    fn region_rejects_inconsistent_task() {
        assert!(region_3way(&unit([0, 1, 1], BlockClass::Volume, 0), 6, 1, None).is_err());
        assert!(region_3way(&unit([1, 1, 0], BlockClass::Face, 0), 6, 1, None).is_err());
        assert!(region_3way(&unit([0, 0, 0], BlockClass::DiagonalEdge, 6), 6, 1, None).is_err());
    }

    #[test]
    fn triple_owner_consistent_with_regions() {
        for n_pv in 1..=6 {
            for n_st in 1..=2 {
                for n_b in [1usize, 3, 6, 12] {
                    let g = grid(n_pv, 1, n_st);
                    let n_v = n_pv * n_b;
                    if n_v < 3 || n_v > 40 {
                        continue;
                    }
                    for i in 0..n_v {
                        for j in i + 1..n_v {
                            for k in j + 1..n_v {
                                let o = owns_triple(i, j, k, n_v, &g).unwrap();
                                let t = tasks_3way(&g, o.coords)[o.task_position];
                                assert_eq!(t.counter, o.counter);
                                let r = region_3way(&t, n_b, n_st, Some(o.stage)).unwrap();
                                // Find the slot assignment of (i, j, k) in this block.
                                let found = [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]]
                                    .iter()
                                    .any(|g3| {
                                        (0..3).all(|s| g3[s] / n_b == t.blocks[s])
                                            && r.contains(g3.map(|x| x % n_b))
                                    });
                                assert!(found, "({i},{j},{k}) n_pv={n_pv} n_b={n_b}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn volume_fraction_and_imbalance() {
        let s = load_stats(&grid(10, 1, 1), Arity::Three).unwrap();
        assert_eq!((s.volume_units_per_slab, s.units_per_slab), (72, 132));
        assert!((imbalance_factor(4) - 16.0 / 30.0).abs() < 1e-15);
        let mut prev = 0.0;
        for n in 1..=64 {
            let f = imbalance_factor(n);
            assert!(f > prev && f < 1.0);
            prev = f;
        }
    }

    #[test]
    fn dump_lines() {
        let d = dump_schedule(&grid(3, 1, 1), Arity::Two).unwrap();
        assert_eq!(d.lines().count(), 1 + 6);
        let d = dump_schedule(&grid(2, 2, 1), Arity::Three).unwrap();
        assert_eq!(d.lines().count(), 1 + 2 * 12);
        assert!(d.lines().nth(1).unwrap().split('\t').count() == 11);
    }
}
