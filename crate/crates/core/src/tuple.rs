//! Canonical pairs and triples of vector indices and their linearization.
//!
//! Tuples are ordered lexicographically by their ascending global indices;
//! the linear index of a tuple is its position in that order. Output files
//! store no indices, so this order is what lets a record's position be
//! turned back into the tuple it belongs to.

use std::fmt;

use crate::error::{Error, Result};

/// Number of vectors compared at once.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arity {
    Two,
    Three,
}

impl Arity {
    pub fn k(self) -> usize {
        match self {
            Arity::Two => 2,
            Arity::Three => 3,
        }
    }

    pub fn from_k(k: usize) -> Result<Self> {
        match k {
            2 => Ok(Arity::Two),
            3 => Ok(Arity::Three),
            _ => Err(Error::config(format!("num-way must be 2 or 3, got {k}"))),
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.k())
    }
}

/// A pair or triple of global vector indices in strictly ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TupleId {
    Pair([usize; 2]),
    Triple([usize; 3]),
}

impl TupleId {
    pub fn pair(i: usize, j: usize) -> Result<Self> {
        if i >= j {
            return Err(Error::InvalidTuple(format!("({i},{j}) is not strictly ascending")));
        }
        Ok(TupleId::Pair([i, j]))
    }

    pub fn triple(i: usize, j: usize, k: usize) -> Result<Self> {
        if i >= j || j >= k {
            return Err(Error::InvalidTuple(format!(
                "({i},{j},{k}) is not strictly ascending"
            )));
        }
        Ok(TupleId::Triple([i, j, k]))
    }

    /// Sorts arbitrary distinct indices into a canonical tuple.
    pub fn from_unordered(indices: &[usize]) -> Result<Self> {
        match *indices {
            [a, b] => TupleId::pair(a.min(b), a.max(b)),
            [a, b, c] => {
                let mut v = [a, b, c];
                v.sort_unstable();
                TupleId::triple(v[0], v[1], v[2])
            }
            _ => Err(Error::InvalidTuple(format!(
                "expected 2 or 3 indices, got {}",
                indices.len()
            ))),
        }
    }

    pub fn arity(&self) -> Arity {
        match self {
            TupleId::Pair(_) => Arity::Two,
            TupleId::Triple(_) => Arity::Three,
        }
    }

    pub fn indices(&self) -> &[usize] {
        match self {
            TupleId::Pair(v) => v,
            TupleId::Triple(v) => v,
        }
    }

    /// Position of this tuple in the lexicographic enumeration over `n_v` vectors.
    pub fn index(&self, n_v: usize) -> Result<u64> {
        match *self {
            TupleId::Pair([i, j]) => pair_index(i, j, n_v),
            TupleId::Triple([i, j, k]) => triple_index(i, j, k, n_v),
        }
    }

    pub fn from_index(arity: Arity, index: u64, n_v: usize) -> Result<Self> {
        match arity {
            Arity::Two => {
                let (i, j) = pair_unindex(index, n_v)?;
                Ok(TupleId::Pair([i, j]))
            }
            Arity::Three => {
                let (i, j, k) = triple_unindex(index, n_v)?;
                Ok(TupleId::Triple([i, j, k]))
            }
        }
    }
}

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TupleId::Pair([i, j]) => write!(f, "({i},{j})"),
            TupleId::Triple([i, j, k]) => write!(f, "({i},{j},{k})"),
        }
    }
}

/// A metric value attached to the tuple it was computed for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRecord<T> {
    pub id: TupleId,
    pub value: T,
}

#[inline]
fn choose2(n: u64) -> u64 {
    if n < 2 {
        0
    } else {
        n * (n - 1) / 2
    }
}

#[inline]
fn choose3(n: u64) -> u64 {
    if n < 3 {
        0
    } else {
        n * (n - 1) / 2 * (n - 2) / 3
    }
}

/// `C(n_v, k)`: the number of distinct pairs or triples.
pub fn unique_tuple_count(arity: Arity, n_v: usize) -> u64 {
    match arity {
        Arity::Two => choose2(n_v as u64),
        Arity::Three => choose3(n_v as u64),
    }
}

pub fn pair_index(i: usize, j: usize, n_v: usize) -> Result<u64> {
    if i >= j || j >= n_v {
        return Err(Error::InvalidTuple(format!("({i},{j}) with n_v={n_v}")));
    }
    let (i, j, n) = (i as u64, j as u64, n_v as u64);
    Ok(i * n - i * (i + 1) / 2 + (j - i - 1))
}

pub fn pair_unindex(index: u64, n_v: usize) -> Result<(usize, usize)> {
    let n = n_v as u64;
    if index >= choose2(n) {
        return Err(Error::InvalidTuple(format!(
            "pair index {index} out of range for n_v={n_v}"
        )));
    }
    // Number of pairs whose first index is below i.
    let start = |i: u64| i * n - i * (i + 1) / 2;
    let (mut lo, mut hi) = (0u64, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if start(mid) <= index {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let i = lo;
    let j = index - start(i) + i + 1;
    Ok((i as usize, j as usize))
}

pub fn triple_index(i: usize, j: usize, k: usize, n_v: usize) -> Result<u64> {
    if i >= j || j >= k || k >= n_v {
        return Err(Error::InvalidTuple(format!("({i},{j},{k}) with n_v={n_v}")));
    }
    let (i, j, k, n) = (i as u64, j as u64, k as u64, n_v as u64);
    Ok(choose3(n) - choose3(n - i) + choose2(n - i - 1) - choose2(n - j) + (k - j - 1))
}

pub fn triple_unindex(index: u64, n_v: usize) -> Result<(usize, usize, usize)> {
    let n = n_v as u64;
    let total = choose3(n);
    if index >= total {
        return Err(Error::InvalidTuple(format!(
            "triple index {index} out of range for n_v={n_v}"
        )));
    }
    // Largest i with start_i(i) <= index.
    let start_i = |i: u64| total - choose3(n - i);
    let (mut lo, mut hi) = (0u64, n - 2);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if start_i(mid) <= index {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let i = lo;
    let rest = index - start_i(i);
    // Within first index i, pairs (j, k) over i+1..n in lexicographic order.
    let start_j = |j: u64| choose2(n - i - 1) - choose2(n - j);
    let (mut lo, mut hi) = (i + 1, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if start_j(mid) <= rest {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let j = lo;
    let k = rest - start_j(j) + j + 1;
    Ok((i as usize, j as usize, k as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex_pairs(n: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                v.push((i, j));
            }
        }
        v
    }

    fn lex_triples(n: usize) -> Vec<(usize, usize, usize)> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    v.push((i, j, k));
                }
            }
        }
        v
    }

    #[test]
    fn pair_examples() {
        assert_eq!(pair_index(0, 1, 6).unwrap(), 0);
        assert_eq!(pair_index(4, 5, 6).unwrap(), 14);
        assert_eq!(pair_index(1, 3, 6).unwrap(), 6);
        // Enumeration agrees with the closed forms used above.
        let pairs = lex_pairs(6);
        assert_eq!(pairs[14], (4, 5));
        assert_eq!(pairs[6], (1, 3));
    }

    #[test]
    fn triple_examples() {
        assert_eq!(triple_index(0, 1, 2, 6).unwrap(), 0);
        assert_eq!(triple_index(3, 4, 5, 6).unwrap(), 19);
        assert_eq!(triple_index(0, 2, 4, 6).unwrap(), 5);
        let triples = lex_triples(6);
        assert_eq!(triples[19], (3, 4, 5));
        assert_eq!(triples[5], (0, 2, 4));
    }

    #[test]
    fn counts() {
        assert_eq!(unique_tuple_count(Arity::Two, 6), 15);
        assert_eq!(unique_tuple_count(Arity::Three, 6), 20);
        assert_eq!(unique_tuple_count(Arity::Three, 3), 1);
    }

    #[test]
    fn exhaustive_bijection_up_to_64() {
        for n in 2..=64 {
            let pairs = lex_pairs(n);
            assert_eq!(pairs.len() as u64, unique_tuple_count(Arity::Two, n));
            for (idx, &(i, j)) in pairs.iter().enumerate() {
                assert_eq!(pair_index(i, j, n).unwrap(), idx as u64);
                assert_eq!(pair_unindex(idx as u64, n).unwrap(), (i, j));
            }
        }
        for n in 3..=64 {
            let triples = lex_triples(n);
            assert_eq!(triples.len() as u64, unique_tuple_count(Arity::Three, n));
            for (idx, &(i, j, k)) in triples.iter().enumerate() {
                assert_eq!(triple_index(i, j, k, n).unwrap(), idx as u64);
                assert_eq!(triple_unindex(idx as u64, n).unwrap(), (i, j, k));
            }
        }
    }

    #[test]
    fn invalid_tuples_rejected() {
        assert!(pair_index(2, 2, 6).is_err());
        assert!(pair_index(3, 1, 6).is_err());
        assert!(pair_index(1, 6, 6).is_err());
        assert!(triple_index(0, 2, 2, 6).is_err());
        assert!(triple_index(0, 1, 6, 6).is_err());
        assert!(pair_unindex(15, 6).is_err());
        assert!(triple_unindex(20, 6).is_err());
        assert!(TupleId::pair(1, 0).is_err());
        assert_eq!(
            TupleId::from_unordered(&[5, 1, 3]).unwrap(),
            TupleId::Triple([1, 3, 5])
        );
    }
}
