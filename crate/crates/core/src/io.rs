//! Binary vector input, per-rank metric output and offline index recovery.
//!
//! Input is one headerless column-major file of `n_f * n_v` little-endian
//! elements. Output is one file per rank holding that rank's metric values
//! in ascending canonical tuple order, with no indices: the tuple of every
//! value follows from the run configuration alone ([`reconstruct_index`]).

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::block::VectorBlock;
use crate::element::{decode_slice, Element, Precision};
use crate::error::{Error, Result};
use crate::grid::{DecompGrid, RankCoords};
use crate::mingemm::DenseMatrix;
use crate::schedule::{owns_pair, owns_triple};
use crate::tuple::{unique_tuple_count, Arity, MetricRecord, TupleId};

/// A raw column-major vector file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorFileSpec {
    pub path: PathBuf,
    pub n_f: usize,
    pub n_v: usize,
    pub precision: Precision,
}

impl VectorFileSpec {
    pub fn new(path: impl Into<PathBuf>, n_f: usize, n_v: usize, precision: Precision) -> Self {
        VectorFileSpec {
            path: path.into(),
            n_f,
            n_v,
            precision,
        }
    }

    pub fn expected_bytes(&self) -> u64 {
        (self.n_f * self.n_v * self.precision.element_size()) as u64
    }

    fn open_checked(&self) -> Result<File> {
        let f = File::open(&self.path)?;
        let actual = f.metadata()?.len();
        if actual != self.expected_bytes() {
            return Err(Error::SizeMismatch {
                path: self.path.clone(),
                expected: self.expected_bytes(),
                actual,
            });
        }
        Ok(f)
    }

    fn check_precision<T: Element>(&self) -> Result<()> {
        if T::PRECISION != self.precision {
            return Err(Error::config(format!(
                "file holds {} values but the run uses {}",
                self.precision,
                T::PRECISION
            )));
        }
        Ok(())
    }
}

/// Loads the rows and columns owned by `coords`: rows
/// `[p_f * n_fp, (p_f + 1) * n_fp)` of columns `[p_v * n_vp, (p_v + 1) * n_vp)`.
pub fn read_slice<T: Element>(spec: &VectorFileSpec, coords: RankCoords, grid: &DecompGrid) -> Result<VectorBlock<T>> {
    spec.check_precision::<T>()?;
    if spec.n_f % grid.n_pf != 0 || spec.n_v % grid.n_pv != 0 {
        return Err(Error::config(format!(
            "a {}x{} file cannot be split over {grid}",
            spec.n_f, spec.n_v
        )));
    }
    grid.rank_of_coords(coords)?;
    let (n_fp, n_vp) = (spec.n_f / grid.n_pf, spec.n_v / grid.n_pv);
    let (r0, c0) = (coords.p_f * n_fp, coords.p_v * n_vp);
    let es = spec.precision.element_size();
    let mut f = spec.open_checked()?;
    let mut buf = vec![0u8; n_fp * es];
    let mut data = Vec::with_capacity(n_fp * n_vp);
    for c in c0..c0 + n_vp {
        f.seek(SeekFrom::Start(((c * spec.n_f + r0) * es) as u64))?;
        f.read_exact(&mut buf)?;
        data.extend(decode_slice::<T>(&buf));
    }
    VectorBlock::new(r0, c0, DenseMatrix::from_col_major(n_fp, n_vp, data)?)
}

/// Loads the whole file.
pub fn read_all<T: Element>(spec: &VectorFileSpec) -> Result<DenseMatrix<T>> {
    spec.check_precision::<T>()?;
    let mut bytes = Vec::new();
    spec.open_checked()?.read_to_end(&mut bytes)?;
    let m = DenseMatrix::from_col_major(spec.n_f, spec.n_v, decode_slice(&bytes))?;
    Ok(VectorBlock::new(0, 0, m)?.into_matrix())
}

/// Writes `n_f x n_v` values `f(q, i)` column by column.
pub fn write_vectors_with<T: Element>(
    path: &Path,
    n_f: usize,
    n_v: usize,
    f: impl Fn(usize, usize) -> T,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut col = Vec::with_capacity(n_f * T::PRECISION.element_size());
    for i in 0..n_v {
        col.clear();
        for q in 0..n_f {
            f(q, i).write_le(&mut col);
        }
        w.write_all(&col)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vectors<T: Element>(path: &Path, m: &DenseMatrix<T>) -> Result<()> {
    write_vectors_with(path, m.rows(), m.cols(), |q, i| m.get(q, i))
}

/// `floor(clamp(value, 0, 1) * 255 + 0.5)`.
pub fn quantize_byte(value: f64) -> Result<u8> {
    if !value.is_finite() {
        return Err(Error::config(format!("cannot quantize non-finite value {value}")));
    }
    Ok((value.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8)
}

pub fn dequantize_byte(b: u8) -> f64 {
    f64::from(b) / 255.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputMode {
    /// One byte per metric.
    #[default]
    Byte,
    /// Full run precision.
    Full,
}

impl FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "byte" => Ok(OutputMode::Byte),
            "full" => Ok(OutputMode::Full),
            _ => Err(Error::config(format!("unknown output mode '{s}' (expected byte or full)"))),
        }
    }
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputMode::Byte => "byte",
            OutputMode::Full => "full",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricOutputSpec {
    pub dir: PathBuf,
    pub mode: OutputMode,
}

impl MetricOutputSpec {
    pub fn new(dir: impl Into<PathBuf>, mode: OutputMode) -> Self {
        MetricOutputSpec { dir: dir.into(), mode }
    }

    pub fn path_for(&self, rank: usize) -> PathBuf {
        self.dir.join(format!("metrics_{rank}.bin"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.txt")
    }
}

/// Writes `records` for `rank` in ascending canonical order. The file is
/// created even when there is nothing to write.
pub fn write_metrics<T: Element>(records: &[MetricRecord<T>], spec: &MetricOutputSpec, rank: usize) -> Result<PathBuf> {
    let mut sorted: Vec<&MetricRecord<T>> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);
    let path = spec.path_for(rank);
    let mut w = BufWriter::new(File::create(&path)?);
    let mut buf = Vec::with_capacity(8);
    for r in sorted {
        match spec.mode {
            OutputMode::Byte => w.write_all(&[quantize_byte(r.value.to_f64())?])?,
            OutputMode::Full => {
                buf.clear();
                r.value.write_le(&mut buf);
                w.write_all(&buf)?;
            }
        }
    }
    w.flush()?;
    Ok(path)
}

/// Reads a full-mode rank file back in run precision.
pub fn read_metrics_full<T: Element>(spec: &MetricOutputSpec, rank: usize) -> Result<Vec<T>> {
    let bytes = std::fs::read(spec.path_for(rank))?;
    if bytes.len() % T::PRECISION.element_size() != 0 {
        return Err(Error::SizeMismatch {
            path: spec.path_for(rank),
            expected: (bytes.len() / T::PRECISION.element_size() * T::PRECISION.element_size()) as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(decode_slice(&bytes))
}

/// Reads a rank file as `f64` values, decoding bytes to `b / 255`.
pub fn read_metrics(spec: &MetricOutputSpec, rank: usize, precision: Precision) -> Result<Vec<f64>> {
    match spec.mode {
        OutputMode::Byte => Ok(std::fs::read(spec.path_for(rank))?
            .into_iter()
            .map(dequantize_byte)
            .collect()),
        OutputMode::Full => match precision {
            Precision::Single => Ok(read_metrics_full::<f32>(spec, rank)?
                .into_iter()
                .map(f64::from)
                .collect()),
            Precision::Double => read_metrics_full::<f64>(spec, rank),
        },
    }
}

/// What index reconstruction needs to know about a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexConfig {
    pub arity: Arity,
    pub n_v: usize,
    pub grid: DecompGrid,
    /// Stages computed by the run; `None` means all of them.
    pub stages: Option<Vec<usize>>,
}

impl IndexConfig {
    fn stage_selected(&self, s: usize) -> bool {
        self.stages.as_ref().map_or(true, |v| v.contains(&s))
    }
}

/// Rank that owns `id` and the stage it belongs to (always 0 for pairs).
pub fn owner_of(id: &TupleId, n_v: usize, grid: &DecompGrid) -> Result<(usize, usize)> {
    match *id {
        TupleId::Pair([i, j]) => Ok((owns_pair(i, j, n_v, grid)?.rank, 0)),
        TupleId::Triple([i, j, k]) => {
            let o = owns_triple(i, j, k, n_v, grid)?;
            Ok((o.rank, o.stage))
        }
    }
}

/// Tuples written by `rank`, in file order.
pub fn owned_tuples(rank: usize, cfg: &IndexConfig) -> Result<Vec<TupleId>> {
    if rank >= cfg.grid.n_p() {
        return Err(Error::RankOutOfRange {
            rank,
            n_p: cfg.grid.n_p(),
        });
    }
    let mut out = Vec::new();
    for t in 0..unique_tuple_count(cfg.arity, cfg.n_v) {
        let id = TupleId::from_index(cfg.arity, t, cfg.n_v)?;
        let (r, s) = owner_of(&id, cfg.n_v, &cfg.grid)?;
        if r == rank && cfg.stage_selected(s) {
            out.push(id);
        }
    }
    Ok(out)
}

/// The tuple whose value sits at `position` in `rank`'s output file.
pub fn reconstruct_index(rank: usize, position: usize, cfg: &IndexConfig) -> Result<TupleId> {
    let owned = owned_tuples(rank, cfg)?;
    owned.get(position).copied().ok_or(Error::PositionOutOfRange {
        rank,
        position,
        owned: owned.len(),
    })
}

/// Flat `key=value` text file recorded next to run outputs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::config(format!("manifest has no '{key}' entry")))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("manifest line {}: expected key=value", n + 1)))?;
            m.entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = BufReader::new(File::open(path)?);
        let mut text = String::new();
        for line in f.lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        Manifest::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl fmt::Display for Manifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_byte(0.0).unwrap(), 0);
        assert_eq!(quantize_byte(1.0).unwrap(), 255);
        assert_eq!(quantize_byte(2.0 / 3.0).unwrap(), 170);
        assert_eq!(quantize_byte(0.8).unwrap(), 204);
        assert_eq!(quantize_byte(0.5).unwrap(), 128);
        assert_eq!(quantize_byte(-0.0).unwrap(), 0);
        assert!(quantize_byte(f64::NAN).is_err());
        for k in 0..=10_000 {
            let v = k as f64 / 10_000.0;
            let e = (dequantize_byte(quantize_byte(v).unwrap()) - v).abs();
            assert!(e <= 1.0 / 510.0 + 1e-15);
        }
    }

    #[test]
    fn slice_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bin");
        let f = |q: usize, i: usize| (10 * q + i) as f64;
        write_vectors_with(&path, 4, 6, f).unwrap();
        let spec = VectorFileSpec::new(&path, 4, 6, Precision::Double);
        let g = DecompGrid::new(2, 3, 1, 1).unwrap();
        let b: VectorBlock<f64> = read_slice(&spec, RankCoords { p_f: 1, p_v: 2, p_r: 0 }, &g).unwrap();
        assert_eq!((b.field_offset(), b.vector_offset()), (2, 4));
        let all: DenseMatrix<f64> = read_all(&spec).unwrap();
        for q in 0..2 {
            for i in 0..2 {
                assert_eq!(b.get(q, i), all.get(q + 2, i + 4));
                assert_eq!(b.get(q, i), f(q + 2, i + 4));
            }
        }
        let whole: VectorBlock<f64> =
            read_slice(&spec, RankCoords { p_f: 0, p_v: 0, p_r: 0 }, &DecompGrid::single()).unwrap();
        assert_eq!(whole.matrix(), &all);
    }

    #[test]
    fn truncated_and_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bin");
        std::fs::write(&path, [0u8; 100]).unwrap();
        let spec = VectorFileSpec::new(&path, 4, 6, Precision::Single);
        let e = read_all::<f32>(&spec).unwrap_err();
        assert!(matches!(e, Error::SizeMismatch { expected: 96, actual: 100, .. }));
        write_vectors_with(&path, 2, 2, |q, _| if q == 1 { -1.0f32 } else { 0.0 }).unwrap();
        let spec = VectorFileSpec::new(&path, 2, 2, Precision::Single);
        assert!(matches!(read_all::<f32>(&spec), Err(Error::InvalidElement { .. })));
        assert!(read_all::<f64>(&spec).is_err());
    }

    #[test]
    fn metric_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = MetricOutputSpec::new(dir.path(), OutputMode::Byte);
        let recs = [
            MetricRecord { id: TupleId::Pair([0, 2]), value: 0.5f64 },
            MetricRecord { id: TupleId::Pair([0, 1]), value: 1.0 },
        ];
        let p = write_metrics(&recs, &spec, 3).unwrap();
        assert_eq!(std::fs::read(p).unwrap(), vec![255, 128]);
        let empty: [MetricRecord<f64>; 0] = [];
        let p = write_metrics(&empty, &spec, 4).unwrap();
        assert_eq!(std::fs::read(p).unwrap().len(), 0);

        let full = MetricOutputSpec::new(dir.path(), OutputMode::Full);
        let recs = [MetricRecord { id: TupleId::Pair([0, 1]), value: 0.1f32 }];
        write_metrics(&recs, &full, 0).unwrap();
        assert_eq!(read_metrics_full::<f32>(&full, 0).unwrap()[0].to_bits(), 0.1f32.to_bits());
    }

    #[test]
    fn reconstruct_single_rank() {
        let cfg = IndexConfig {
            arity: Arity::Two,
            n_v: 6,
            grid: DecompGrid::single(),
            stages: None,
        };
        assert_eq!(reconstruct_index(0, 0, &cfg).unwrap(), TupleId::Pair([0, 1]));
        assert!(matches!(
            reconstruct_index(0, 15, &cfg),
            Err(Error::PositionOutOfRange { owned: 15, .. })
        ));
    }

    #[test]
    fn manifest_roundtrip() {
        let mut m = Manifest::default();
        m.set("n_v", 24).set("checksum", "00ff");
        let back = Manifest::parse(&m.to_string()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.get("n_v"), Some("24"));
        assert!(Manifest::parse("novalue").is_err());
    }
}
