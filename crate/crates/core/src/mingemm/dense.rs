use super::matrix::{DenseMatrix, MatRef};
use crate::element::Element;
use crate::error::{Error, Result};

/// Output tile extents for [`mgemm_blocked`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tile {
    pub rows: usize,
    pub cols: usize,
}

impl Tile {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config("tile sizes must be at least 1"));
        }
        Ok(Tile { rows, cols })
    }
}

impl Default for Tile {
    fn default() -> Self {
        Tile { rows: 64, cols: 64 }
    }
}

fn check_dims<T>(w: &MatRef<'_, T>, v: &MatRef<'_, T>) -> Result<()>
where
    T: Copy,
{
    if w.rows() != v.rows() {
        return Err(Error::dim(format!(
            "min-product operands have {} and {} rows",
            w.rows(),
            v.rows()
        )));
    }
    if w.rows() == 0 {
        return Err(Error::dim("min-product operands have no rows"));
    }
    Ok(())
}

/// `M[i][j] = sum_q min(W[q][i], V[q][j])`, one output at a time, ascending `q`.
///
/// This is the reference every other kernel is compared against. The first
/// term initializes the accumulator, so each output costs `n_f` mins and
/// `n_f - 1` adds.
pub fn mgemm_naive<T: Element>(w: MatRef<'_, T>, v: MatRef<'_, T>) -> Result<DenseMatrix<T>> {
    check_dims(&w, &v)?;
    let (m, n) = (w.cols(), v.cols());
    let mut out = DenseMatrix::zeros(m, n);
    for j in 0..n {
        let vc = v.col(j);
        for i in 0..m {
            let wc = w.col(i);
            let mut acc = wc[0].min_elem(vc[0]);
            for q in 1..wc.len() {
                acc = acc + wc[q].min_elem(vc[q]);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

const MR: usize = 4;
const NR: usize = 4;
/// Rows of `k` per pass, so a pair of micro panels stays in L1.
const KC: usize = 256;

/// Packs rows `q0..q0 + kc` of `cols` columns starting at `c0` into
/// interleaved panels of `width`: panel `p` holds
/// `buf[p*kc*width + q*width + a] = M[q0 + q][c0 + p*width + a]`.
/// Columns past the end of the range are zero.
fn pack<T: Element>(m: &MatRef<'_, T>, c0: usize, cols: usize, q0: usize, kc: usize, width: usize, buf: &mut Vec<T>) {
    let panels = cols.div_ceil(width);
    buf.clear();
    buf.resize(panels * kc * width, T::ZERO);
    for p in 0..panels {
        let panel = &mut buf[p * kc * width..(p + 1) * kc * width];
        for a in 0..width.min(cols - p * width) {
            for (q, &x) in m.col(c0 + p * width + a)[q0..q0 + kc].iter().enumerate() {
                panel[q * width + a] = x;
            }
        }
    }
}

/// Accumulates one `MR x NR` block over a packed `k` range. With `first`
/// the leading term initializes the accumulators, otherwise they continue
/// from `acc`.
#[inline(always)]
fn micro_kernel<T: Element>(wp: &[T], vp: &[T], first: bool, acc: &mut [[T; NR]; MR]) {
    let mut wrows = wp.chunks_exact(MR);
    let mut vrows = vp.chunks_exact(NR);
    if first {
        let w0 = wrows.next().expect("k >= 1");
        let v0 = vrows.next().expect("k >= 1");
        for a in 0..MR {
            for b in 0..NR {
                acc[a][b] = w0[a].min_elem(v0[b]);
            }
        }
    }
    let mut r = *acc;
    for (w, v) in wrows.zip(vrows) {
        let w: &[T; MR] = w.try_into().expect("panel width");
        let v: &[T; NR] = v.try_into().expect("panel width");
        for a in 0..MR {
            for b in 0..NR {
                r[a][b] = r[a][b] + w[a].min_elem(v[b]);
            }
        }
    }
    *acc = r;
}

/// Cache- and register-blocked min-product.
///
/// Every output still accumulates its `q` terms one at a time in ascending
/// order, across passes as well as within them, so the result is bitwise
/// identical to [`mgemm_naive`] for any finite input. The speedup comes from
/// packing operands into contiguous panels, splitting `q` into passes that
/// fit in cache and keeping an `MR x NR` block of independent accumulators
/// in registers.
pub fn mgemm_blocked<T: Element>(
    w: MatRef<'_, T>,
    v: MatRef<'_, T>,
    tile: Tile,
) -> Result<DenseMatrix<T>> {
    check_dims(&w, &v)?;
    if tile.rows == 0 || tile.cols == 0 {
        return Err(Error::config("tile sizes must be at least 1"));
    }
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2.
            return Ok(unsafe { blocked_avx2(w, v, tile) });
        }
    }
    Ok(blocked_impl(w, v, tile))
}

// Same code, compiled with wider vectors. Only min and add are used, so the
// results do not depend on the instruction set.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn blocked_avx2<T: Element>(w: MatRef<'_, T>, v: MatRef<'_, T>, tile: Tile) -> DenseMatrix<T> {
    blocked_impl(w, v, tile)
}

#[inline(always)]
fn blocked_impl<T: Element>(w: MatRef<'_, T>, v: MatRef<'_, T>, tile: Tile) -> DenseMatrix<T> {
    let (m, n, k) = (w.cols(), v.cols(), w.rows());
    let mut out = DenseMatrix::zeros(m, n);
    let mut wbuf = Vec::new();
    let mut vbuf = Vec::new();
    let out_data = out.as_mut_slice();

    for j0 in (0..n).step_by(tile.cols) {
        let jn = tile.cols.min(n - j0);
        for q0 in (0..k).step_by(KC) {
            let kc = KC.min(k - q0);
            pack(&v, j0, jn, q0, kc, NR, &mut vbuf);
            for i0 in (0..m).step_by(tile.rows) {
                let in_ = tile.rows.min(m - i0);
                pack(&w, i0, in_, q0, kc, MR, &mut wbuf);
                for (pj, vp) in vbuf.chunks_exact(kc * NR).enumerate() {
                    let jb = j0 + pj * NR;
                    let nb = NR.min(j0 + jn - jb);
                    for (pi, wp) in wbuf.chunks_exact(kc * MR).enumerate() {
                        let ib = i0 + pi * MR;
                        let mb = MR.min(i0 + in_ - ib);
                        let mut acc = [[T::ZERO; NR]; MR];
                        if q0 > 0 {
                            for b in 0..nb {
                                for a in 0..mb {
                                    acc[a][b] = out_data[(jb + b) * m + ib + a];
                                }
                            }
                        }
                        micro_kernel(wp, vp, q0 == 0, &mut acc);
                        for b in 0..nb {
                            let col = &mut out_data[(jb + b) * m..(jb + b + 1) * m];
                            for a in 0..mb {
                                col[ib + a] = acc[a][b];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Per-vector sums `S_i = sum_q V[q][i]`, ascending `q`.
pub fn column_sums<T: Element>(v: MatRef<'_, T>) -> Vec<T> {
    (0..v.cols())
        .map(|c| match v.col(c).split_first() {
            None => T::ZERO,
            Some((&first, rest)) => rest.iter().fold(first, |acc, &x| acc + x),
        })
        .collect()
}

/// Columns `min(vj, V[:, k])` for every column `k` of `v`.
pub fn xj_columns<T: Element>(v: MatRef<'_, T>, vj: &[T]) -> Result<DenseMatrix<T>> {
    if vj.len() != v.rows() {
        return Err(Error::dim(format!(
            "pivot column has length {}, matrix has {} rows",
            vj.len(),
            v.rows()
        )));
    }
    let mut out = Vec::with_capacity(v.rows() * v.cols());
    for c in 0..v.cols() {
        out.extend(v.col(c).iter().zip(vj).map(|(&x, &p)| p.min_elem(x)));
    }
    DenseMatrix::from_col_major(v.rows(), v.cols(), out)
}
