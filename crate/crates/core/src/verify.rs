//! Synthetic inputs, reference implementations and the exact result checksum.
//!
//! The synthetic generators produce small integers stored exactly in the
//! floating-point type. With the magnitude bound enforced by
//! [`SyntheticSpec::validate`] every sum the metrics need is exact, so any
//! decomposition of the work yields bit-identical values.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::element::{Element, Precision};
use crate::error::{Error, Result};
use crate::mingemm::{MatRef, OpCounts};
use crate::tuple::{MetricRecord, TupleId};

/// Fixed 64-bit avalanche mix (the splitmix64 finalizer).
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

/// `mix64` of an offset input, so that index 0 does not hash to 0.
fn index_hash(t: u64) -> u64 {
    mix64(t.wrapping_add(0x9E37_79B9_7F4A_7C15))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    RandomExact,
    Analytic,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-exact" | "random_exact" => Ok(SyntheticKind::RandomExact),
            "analytic" => Ok(SyntheticKind::Analytic),
            _ => Err(Error::config(format!(
                "unknown synthetic kind '{s}' (expected random-exact or analytic)"
            ))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::RandomExact => "random-exact",
            SyntheticKind::Analytic => "analytic",
        })
    }
}

/// Parameters of a synthetic input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub seed: u64,
    pub n_f: usize,
    pub n_v: usize,
    pub precision: Precision,
    /// Random values lie in `[0, 2^bits)`.
    pub bits: u32,
}

impl SyntheticSpec {
    pub fn random_exact(seed: u64, n_f: usize, n_v: usize, precision: Precision, bits: u32) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::RandomExact,
            seed,
            n_f,
            n_v,
            precision,
            bits,
        }
    }

    pub fn analytic(seed: u64, n_f: usize, n_v: usize, precision: Precision) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Analytic,
            seed,
            n_f,
            n_v,
            precision,
            bits: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_f == 0 || self.n_v == 0 {
            return Err(Error::config("synthetic input needs n_f, n_v >= 1"));
        }
        match self.kind {
            SyntheticKind::RandomExact => {
                // The largest sum formed is a 3-way denominator: three column sums.
                let m = self.precision.mantissa_bits();
                let max = if self.bits >= 64 { u64::MAX } else { (1u64 << self.bits) - 1 };
                let worst = (3 * self.n_f as u128) * max as u128;
                if self.bits >= 64 || worst >= 1u128 << m {
                    return Err(Error::config(format!(
                        "3*n_f*(2^{b}-1) must stay below 2^{m} for exact {p} sums; lower --bits or --num-field",
                        b = self.bits,
                        p = self.precision
                    )));
                }
            }
            SyntheticKind::Analytic => {
                if self.n_f < self.n_v {
                    return Err(Error::config(format!(
                        "the analytic input needs n_f >= n_v (got n_f={}, n_v={})",
                        self.n_f, self.n_v
                    )));
                }
                let worst = 3 * 2 * self.n_f as u128;
                if worst >= 1u128 << self.precision.mantissa_bits() {
                    return Err(Error::config("n_f too large for exact analytic sums"));
                }
            }
        }
        Ok(())
    }

    pub fn generator(&self) -> Result<Generator> {
        self.validate()?;
        Ok(match self.kind {
            SyntheticKind::RandomExact => Generator::RandomExact {
                seed: self.seed,
                n_v: self.n_v,
                bits: self.bits,
            },
            SyntheticKind::Analytic => Generator::Analytic { n_v: self.n_v },
        })
    }
}

/// Element function of a synthetic input, evaluated at global coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    RandomExact { seed: u64, n_v: usize, bits: u32 },
    Analytic { n_v: usize },
}

impl Generator {
    pub fn value_u64(&self, q: usize, i: usize) -> u64 {
        match *self {
            Generator::RandomExact { seed, n_v, bits } => {
                let h = mix64(seed ^ (q as u64 * n_v as u64 + i as u64));
                if bits == 0 {
                    0
                } else {
                    h & ((1u64 << bits) - 1)
                }
            }
            Generator::Analytic { n_v } => 1 + u64::from(q % n_v == i),
        }
    }

    pub fn value<T: Element>(&self, q: usize, i: usize) -> T {
        T::from_u64_exact(self.value_u64(q, i))
    }
}

/// `value = mix64(seed ^ (q * n_v + i)) mod 2^bits`.
pub fn gen_random_exact(spec: &SyntheticSpec) -> Result<Generator> {
    if spec.kind != SyntheticKind::RandomExact {
        return Err(Error::config("not a random-exact spec"));
    }
    spec.generator()
}

/// Closed-form metric values for the analytic input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnalyticPredictor {
    pub n_f: usize,
    pub n_v: usize,
}

impl AnalyticPredictor {
    /// Number of fields `q` with `q mod n_v == i`.
    pub fn count(&self, i: usize) -> usize {
        if i >= self.n_f {
            0
        } else {
            (self.n_f - 1 - i) / self.n_v + 1
        }
    }

    pub fn c2<T: Element>(&self, i: usize, j: usize) -> T {
        let n = 2 * self.n_f as u64;
        let d = n + (self.count(i) + self.count(j)) as u64;
        T::from_u64_exact(n) / T::from_u64_exact(d)
    }

    pub fn c3<T: Element>(&self, i: usize, j: usize, k: usize) -> T {
        let n = 3 * self.n_f as u64;
        let d = n + (self.count(i) + self.count(j) + self.count(k)) as u64;
        T::from_u64_exact(n) / T::from_u64_exact(d)
    }

    pub fn predict<T: Element>(&self, id: &TupleId) -> T {
        match *id {
            TupleId::Pair([i, j]) => self.c2(i, j),
            TupleId::Triple([i, j, k]) => self.c3(i, j, k),
        }
    }
}

/// `v[q][i] = 1 + [q mod n_v == i]`, plus its predictor.
///
/// Every pair shares `n_f` in its min-sum and every triple's min-of-three
/// sum is `n_f` too, so all values follow from the per-vector counts of 2s.
/// The seed is accepted for interface symmetry; the layout is fixed.
pub fn gen_analytic(seed: u64, n_f: usize, n_v: usize) -> Result<(Generator, AnalyticPredictor)> {
    let spec = SyntheticSpec::analytic(seed, n_f, n_v, Precision::Double);
    Ok((spec.generator()?, AnalyticPredictor { n_f, n_v }))
}

fn degenerate<T: Element>() -> T {
    T::ZERO * (T::ZERO - T::ONE)
}

/// Direct evaluation of all pair metrics, in canonical order.
pub fn oracle_2way<T: Element>(v: MatRef<'_, T>, ops: &mut OpCounts) -> Vec<MetricRecord<T>> {
    let (n_f, n_v) = (v.rows(), v.cols());
    let sums: Vec<T> = (0..n_v)
        .map(|i| {
            let c = v.col(i);
            let mut s = c[0];
            for &x in &c[1..] {
                s = s + x;
            }
            s
        })
        .collect();
    ops.adds += (n_v * (n_f - 1)) as u64;
    let mut out = Vec::new();
    for i in 0..n_v {
        for j in i + 1..n_v {
            let (a, b) = (v.col(i), v.col(j));
            let mut n = if a[0] < b[0] { a[0] } else { b[0] };
            for q in 1..n_f {
                n = n + if a[q] < b[q] { a[q] } else { b[q] };
            }
            ops.mins += n_f as u64;
            ops.adds += (n_f - 1) as u64 + 1;
            ops.muls += 2;
            let d = sums[i] + sums[j];
            let value = if d == T::ZERO { degenerate() } else { T::TWO * n / d };
            out.push(MetricRecord {
                id: TupleId::Pair([i, j]),
                value,
            });
        }
    }
    out
}

/// Direct evaluation of all triple metrics, in canonical order.
pub fn oracle_3way<T: Element>(v: MatRef<'_, T>, ops: &mut OpCounts) -> Vec<MetricRecord<T>> {
    let (n_f, n_v) = (v.rows(), v.cols());
    let min = |a: T, b: T| if a < b { a } else { b };
    let sum = |i: usize| {
        let c = v.col(i);
        c[1..].iter().fold(c[0], |s, &x| s + x)
    };
    let n2 = |i: usize, j: usize| {
        let (a, b) = (v.col(i), v.col(j));
        (1..n_f).fold(min(a[0], b[0]), |s, q| s + min(a[q], b[q]))
    };
    let sums: Vec<T> = (0..n_v).map(sum).collect();
    let mut pairs = vec![T::ZERO; n_v * n_v];
    for i in 0..n_v {
        for j in i + 1..n_v {
            pairs[i * n_v + j] = n2(i, j);
        }
    }
    ops.adds += (n_v * (n_f - 1)) as u64;
    ops.mins += (n_v * (n_v - 1) / 2 * n_f) as u64;
    ops.adds += (n_v * (n_v - 1) / 2 * (n_f - 1)) as u64;
    let mut out = Vec::new();
    for i in 0..n_v {
        for j in i + 1..n_v {
            for k in j + 1..n_v {
                let (a, b, c) = (v.col(i), v.col(j), v.col(k));
                let mut n3p = min(min(a[0], b[0]), c[0]);
                for q in 1..n_f {
                    n3p = n3p + min(min(a[q], b[q]), c[q]);
                }
                ops.mins += 2 * n_f as u64;
                ops.adds += (n_f - 1) as u64 + 5;
                ops.muls += 2;
                let n3 = pairs[i * n_v + j] + pairs[i * n_v + k] + pairs[j * n_v + k] - n3p;
                let d = sums[i] + sums[j] + sums[k];
                let value = if d == T::ZERO {
                    degenerate()
                } else {
                    T::THREE_HALVES * n3 / d
                };
                out.push(MetricRecord {
                    id: TupleId::Triple([i, j, k]),
                    value,
                });
            }
        }
    }
    out
}

/// Order-independent 128-bit digest of a metric set.
///
/// Each record contributes `u128(h(t)) * u128(mix64(bits) | 1)` where `t` is
/// the canonical tuple index and `bits` the value's bit pattern widened to 64
/// bits; contributions are summed modulo `2^128`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Checksum128(pub u128);

impl Checksum128 {
    pub fn contribution(index: u64, value_bits: u64) -> u128 {
        u128::from(index_hash(index)).wrapping_mul(u128::from(mix64(value_bits) | 1))
    }

    pub fn add_record(&mut self, index: u64, value_bits: u64) {
        self.0 = self.0.wrapping_add(Self::contribution(index, value_bits));
    }

    pub fn combine(self, other: Checksum128) -> Checksum128 {
        Checksum128(self.0.wrapping_add(other.0))
    }

    /// Digest of `records`; fails if a tuple appears twice.
    pub fn of_records<T: Element>(records: &[MetricRecord<T>], n_v: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut sum = Checksum128::default();
        for r in records {
            let t = r.id.index(n_v)?;
            if !seen.insert(t) {
                return Err(Error::DuplicateTuple(t));
            }
            sum.add_record(t, r.value.bits_u64());
        }
        Ok(sum)
    }
}

impl fmt::Display for Checksum128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for Checksum128 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 32 {
            return Err(Error::config(format!("checksum '{s}' is not 32 hex digits")));
        }
        u128::from_str_radix(s, 16)
            .map(Checksum128)
            .map_err(|e| Error::config(format!("checksum '{s}': {e}")))
    }
}

impl std::iter::Sum for Checksum128 {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Checksum128::default(), Checksum128::combine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mingemm::DenseMatrix;

    #[test]
    fn mix64_reference_values() {
        assert_eq!(mix64(0), 0);
        // splitmix64 output for state 0 is mix64(0x9E3779B97F4A7C15).
        assert_eq!(index_hash(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn random_exact_bound() {
        assert!(SyntheticSpec::random_exact(1, 64, 24, Precision::Double, 11).validate().is_ok());
        assert!(SyntheticSpec::random_exact(1, 1 << 20, 24, Precision::Single, 11)
            .validate()
            .is_err());
        let g = SyntheticSpec::random_exact(7, 8, 8, Precision::Double, 0).generator().unwrap();
        assert!((0..8).all(|q| (0..8).all(|i| g.value_u64(q, i) == 0)));
        let g = SyntheticSpec::random_exact(7, 8, 8, Precision::Double, 5).generator().unwrap();
        assert!((0..8).all(|q| (0..8).all(|i| g.value_u64(q, i) < 32)));
    }

    #[test]
    fn analytic_examples() {
        let (g, p) = gen_analytic(0, 4, 4).unwrap();
        assert_eq!(g.value_u64(2, 2), 2);
        assert_eq!(g.value_u64(2, 1), 1);
        assert_eq!(p.c2::<f64>(0, 3), 0.8);
        let (_, p) = gen_analytic(0, 8, 4).unwrap();
        assert!((0..4).all(|i| p.count(i) == 2));
        assert_eq!(p.c3::<f64>(0, 1, 3), 0.8);
        assert!(gen_analytic(0, 3, 4).is_err());
    }

    #[test]
    fn oracle_small_cases() {
        let v = DenseMatrix::from_columns(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let mut ops = OpCounts::default();
        let r = oracle_2way(v.view(), &mut ops);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].value, 2.0 * 2.0 / 6.0);
        let v = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = oracle_3way(v.view(), &mut ops);
        assert_eq!(r[0].value, 0.75);
        let z = DenseMatrix::from_columns(&[vec![0.0f32; 3], vec![0.0; 3]]).unwrap();
        let r = oracle_2way(z.view(), &mut ops);
        assert_eq!(r[0].value, 0.0);
        assert!(r[0].value.is_sign_negative());
    }

    #[test]
    fn checksum_basics() {
        let empty: Vec<MetricRecord<f64>> = Vec::new();
        assert_eq!(Checksum128::of_records(&empty, 4).unwrap().0, 0);
        let a = MetricRecord { id: TupleId::Pair([0, 1]), value: 0.5 };
        let b = MetricRecord { id: TupleId::Pair([1, 2]), value: 0.25 };
        let x = Checksum128::of_records(&[a, b], 4).unwrap();
        let y = Checksum128::of_records(&[b, a], 4).unwrap();
        assert_eq!(x, y);
        assert_ne!(x.0, 0);
        assert!(matches!(
            Checksum128::of_records(&[a, a], 4),
            Err(Error::DuplicateTuple(0))
        ));
        let s = x.to_string();
        assert_eq!(s.len(), 32);
        assert_eq!(s.parse::<Checksum128>().unwrap(), x);
        // Record 0 is visible.
        let c = MetricRecord { id: TupleId::Pair([0, 1]), value: 0.75 };
        assert_ne!(Checksum128::of_records(&[c], 4).unwrap(), Checksum128::of_records(&[a], 4).unwrap());
    }

    #[test]
    fn checksum_detects_bit_flips() {
        let base: Vec<MetricRecord<f64>> = (0..100)
            .map(|t| MetricRecord {
                id: TupleId::from_index(crate::tuple::Arity::Two, t, 20).unwrap(),
                value: (mix64(t) % 1000) as f64 / 1000.0,
            })
            .collect();
        let c0 = Checksum128::of_records(&base, 20).unwrap();
        let mut seen = HashSet::new();
        for trial in 0..10_000u64 {
            let h = mix64(trial + 1);
            let r = (h % 100) as usize;
            let bit = (h >> 32) % 64;
            let mut recs = base.clone();
            recs[r].value = f64::from_bits(recs[r].value.to_bits() ^ (1 << bit));
            let c = Checksum128::of_records(&recs, 20).unwrap();
            assert_ne!(c, c0);
            seen.insert((r, bit, c));
        }
    }
}
