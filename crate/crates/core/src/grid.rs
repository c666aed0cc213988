//! Parallel decomposition of the problem and the rank layout.

use std::fmt;

use crate::error::{Error, Result};
use crate::tuple::Arity;

/// Decomposition of `n_p = n_pf * n_pv * n_pr` ranks, plus the 3-way stage count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DecompGrid {
    /// Ranks along the field (vector element) axis.
    pub n_pf: usize,
    /// Ranks along the vector axis; one slab of vectors per coordinate.
    pub n_pv: usize,
    /// Replication ranks sharing the work of one slab.
    pub n_pr: usize,
    /// Number of stages the 3-way pipeline is split into.
    pub n_st: usize,
}

/// Position of a rank within a [`DecompGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankCoords {
    pub p_f: usize,
    pub p_v: usize,
    pub p_r: usize,
}

impl fmt::Display for RankCoords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p_f, self.p_v, self.p_r)
    }
}

impl fmt::Display for DecompGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_pf={} n_pv={} n_pr={} n_st={}",
            self.n_pf, self.n_pv, self.n_pr, self.n_st
        )
    }
}

impl Default for DecompGrid {
    fn default() -> Self {
        DecompGrid::single()
    }
}

impl DecompGrid {
    pub fn new(n_pf: usize, n_pv: usize, n_pr: usize, n_st: usize) -> Result<Self> {
        let grid = DecompGrid {
            n_pf,
            n_pv,
            n_pr,
            n_st,
        };
        grid.check_counts()?;
        Ok(grid)
    }

    pub fn single() -> Self {
        DecompGrid {
            n_pf: 1,
            n_pv: 1,
            n_pr: 1,
            n_st: 1,
        }
    }

    pub fn n_p(&self) -> usize {
        self.n_pf * self.n_pv * self.n_pr
    }

    fn check_counts(&self) -> Result<()> {
        for (name, v) in [
            ("n_pf", self.n_pf),
            ("n_pv", self.n_pv),
            ("n_pr", self.n_pr),
            ("n_st", self.n_st),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Checks the divisibility rules a problem of `n_f` fields and `n_v`
    /// vectors must satisfy on this grid.
    pub fn validate(&self, n_f: usize, n_v: usize, arity: Arity) -> Result<()> {
        self.check_counts()?;
        if n_f == 0 || n_v == 0 {
            return Err(Error::config("n_f and n_v must be at least 1"));
        }
        if n_f % self.n_pf != 0 {
            return Err(Error::config(format!(
                "n_f={n_f} is not divisible by n_pf={}; every field-axis rank must hold the same number of rows",
                self.n_pf
            )));
        }
        if n_v % self.n_pv != 0 {
            return Err(Error::config(format!(
                "n_v={n_v} is not divisible by n_pv={}; every slab must hold the same number of vectors",
                self.n_pv
            )));
        }
        if n_v < arity.k() {
            return Err(Error::config(format!(
                "n_v={n_v} is too small for {}-way metrics",
                arity.k()
            )));
        }
        match arity {
            Arity::Two => {
                if self.n_st != 1 {
                    return Err(Error::config("staging (n_st > 1) applies to 3-way runs only"));
                }
            }
            Arity::Three => {
                let n_vp = n_v / self.n_pv;
                if n_vp % (6 * self.n_st) != 0 {
                    return Err(Error::config(format!(
                        "3-way runs need n_v/n_pv = {n_vp} divisible by 6*n_st = {}; each block is cut into six slices of n_st stages",
                        6 * self.n_st
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn coords_of_rank(&self, rank: usize) -> Result<RankCoords> {
        if rank >= self.n_p() {
            return Err(Error::RankOutOfRange {
                rank,
                n_p: self.n_p(),
            });
        }
        Ok(RankCoords {
            p_f: rank % self.n_pf,
            p_v: (rank / self.n_pf) % self.n_pv,
            p_r: rank / (self.n_pf * self.n_pv),
        })
    }

    /// Field axis varies fastest: `rank = p_f + n_pf * (p_v + n_pv * p_r)`.
    pub fn rank_of_coords(&self, c: RankCoords) -> Result<usize> {
        if c.p_f >= self.n_pf || c.p_v >= self.n_pv || c.p_r >= self.n_pr {
            return Err(Error::config(format!("coordinates {c} outside grid {self}")));
        }
        Ok(c.p_f + self.n_pf * (c.p_v + self.n_pv * c.p_r))
    }

    /// Rank at slab `p_v` offset by `delta` (with wraparound), same `p_f` and `p_r`.
    pub(crate) fn shifted(&self, c: RankCoords, delta: isize) -> usize {
        let n = self.n_pv as isize;
        let p_v = (c.p_v as isize + delta).rem_euclid(n) as usize;
        c.p_f + self.n_pf * (p_v + self.n_pv * c.p_r)
    }

    /// Ranks sharing `(p_v, p_r)` with `c`, in ascending `p_f` order.
    pub(crate) fn field_group(&self, c: RankCoords) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_pf).map(move |p_f| p_f + self.n_pf * (c.p_v + self.n_pv * c.p_r))
    }
}
