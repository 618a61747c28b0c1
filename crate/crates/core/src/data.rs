//! Dataset ingestion and feature discretization.
//!
//! Raw features are mapped once per training run onto per-feature bins. Bin `k` of a
//! feature covers the right-closed interval `(s_{k-1}, s_k]`, with `s_0 = -inf` and
//! `s_b = +inf`, so only the `b - 1` interior boundaries are stored.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Largest bin count a feature may use (bin indices are stored as `u16` at most).
pub const MAX_SUPPORTED_BINS: usize = 1 << 16;

const CACHE_MAGIC: &[u8; 4] = b"BMO1";

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset<T> {
    features: Matrix<T>,
    targets: Matrix<T>,
    feature_names: Option<Vec<String>>,
}

impl<T: Scalar> RawDataset<T> {
    pub fn new(features: Matrix<T>, targets: Matrix<T>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Data("no rows".into()));
        }
        if features.cols() == 0 {
            return Err(Error::Data("no feature columns".into()));
        }
        if targets.cols() == 0 {
            return Err(Error::Data("no target columns".into()));
        }
        if features.rows() != targets.rows() {
            return Err(Error::shape(format!(
                "{} feature rows but {} target rows",
                features.rows(),
                targets.rows()
            )));
        }
        check_finite(&features, 0)?;
        check_finite(&targets, features.cols())?;
        Ok(Self {
            features,
            targets,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_features() {
            return Err(Error::shape(format!(
                "{} feature names for {} features",
                names.len(),
                self.num_features()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn targets(&self) -> &Matrix<T> {
        &self.targets
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn num_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_outputs(&self) -> usize {
        self.targets.cols()
    }

    /// Verifies every target row is a one-hot class indicator.
    pub fn check_one_hot(&self) -> Result<()> {
        for (i, row) in self.targets.iter_rows().enumerate() {
            let ones = row.iter().filter(|&&v| v == T::one()).count();
            let zeros = row.iter().filter(|&&v| v == T::zero()).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::Ingestion {
                    row: i + 1,
                    column: self.num_features() + 1,
                    message: "target row is not one-hot".into(),
                });
            }
        }
        Ok(())
    }

    /// A copy whose target block is repeated `factor` times side by side.
    pub fn replicate_targets(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::config("replication factor must be positive"));
        }
        let d = self.num_outputs();
        let columns: Vec<usize> = (0..d * factor).map(|c| c % d).collect();
        Ok(Self {
            features: self.features.clone(),
            targets: self.targets.select_columns(&columns),
            feature_names: self.feature_names.clone(),
        })
    }
}

fn check_finite<T: Scalar>(m: &Matrix<T>, column_offset: usize) -> Result<()> {
    for (i, row) in m.iter_rows().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Ingestion {
                row: i + 1,
                column: column_offset + j + 1,
                message: format!("non-finite value {}", row[j]),
            });
        }
    }
    Ok(())
}

/// Which CSV columns hold the targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSpec {
    /// The last `n` columns are real-valued targets.
    Trailing(usize),
    /// The last column is an integer class index in `[0, classes)`, expanded to one-hot.
    Class { classes: usize },
}

impl std::str::FromStr for LabelSpec {
    type Err = Error;

    /// Accepts `N` (trailing target columns) or `class:C`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("class:") {
            let classes = rest
                .parse::<usize>()
                .map_err(|_| Error::config(format!("bad class count in label spec {s:?}")))?;
            if classes < 2 {
                return Err(Error::config("a class label needs at least 2 classes"));
            }
            return Ok(LabelSpec::Class { classes });
        }
        let n = s
            .parse::<usize>()
            .map_err(|_| Error::config(format!("bad label spec {s:?}, expected N or class:C")))?;
        if n == 0 {
            return Err(Error::config("label spec needs at least one target column"));
        }
        Ok(LabelSpec::Trailing(n))
    }
}

impl LabelSpec {
    fn raw_columns(&self) -> usize {
        match self {
            LabelSpec::Trailing(n) => *n,
            LabelSpec::Class { .. } => 1,
        }
    }
}

struct CsvTable<T> {
    header: Option<Vec<String>>,
    rows: Vec<Vec<T>>,
    width: Option<usize>,
}

fn parse_csv<T: Scalar>(path: &Path) -> Result<CsvTable<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut header = None;
    let mut rows = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && cells.iter().all(|c| c.parse::<f64>().is_err()) {
            width = Some(cells.len());
            header = Some(cells.iter().map(|c| c.to_string()).collect());
            continue;
        }
        if let Some(w) = width {
            if cells.len() != w {
                return Err(Error::Ingestion {
                    row: lineno + 1,
                    column: cells.len().min(w) + 1,
                    message: format!("ragged row: {} cells, expected {w}", cells.len()),
                });
            }
        }
        width = Some(cells.len());
        let mut row = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                row: lineno + 1,
                column: j + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row: lineno + 1,
                    column: j + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            row.push(T::from_f64_lossy(v));
        }
        rows.push(row);
    }
    Ok(CsvTable {
        header,
        rows,
        width,
    })
}

/// Loads a training CSV. An optional header row is detected when no cell of the first
/// line parses as a number.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, labels: LabelSpec) -> Result<RawDataset<T>> {
    let path = path.as_ref();
    let table = parse_csv::<T>(path)?;
    if table.rows.is_empty() {
        return Err(Error::Data(format!("{}: no rows", path.display())));
    }
    let width = table.width.unwrap_or(0);
    let label_cols = labels.raw_columns();
    if width <= label_cols {
        return Err(Error::Data(format!(
            "{}: {width} columns leave no features after {label_cols} label column(s)",
            path.display()
        )));
    }
    let m = width - label_cols;
    let n = table.rows.len();
    let mut features = Vec::with_capacity(n * m);
    let mut targets = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        features.extend_from_slice(&row[..m]);
        match labels {
            LabelSpec::Trailing(_) => targets.extend_from_slice(&row[m..]),
            LabelSpec::Class { classes } => {
                let raw = row[m];
                let class = raw.to_f64_lossy();
                if class < 0.0 || class.fract() != 0.0 || class >= classes as f64 {
                    return Err(Error::Ingestion {
                        row: i + 1 + usize::from(table.header.is_some()),
                        column: m + 1,
                        message: format!("class label {raw} outside [0, {classes})"),
                    });
                }
                let mut one_hot = vec![T::zero(); classes];
                one_hot[class as usize] = T::one();
                targets.extend(one_hot);
            }
        }
    }
    let d = match labels {
        LabelSpec::Trailing(k) => k,
        LabelSpec::Class { classes } => classes,
    };
    let ds = RawDataset::new(
        Matrix::from_vec(n, m, features)?,
        Matrix::from_vec(n, d, targets)?,
    )?;
    match table.header {
        Some(h) => ds.with_feature_names(h[..m].to_vec()),
        None => Ok(ds),
    }
}

/// Loads a features-only CSV for inference. Zero data rows are allowed. When `labels`
/// is given, the trailing label columns are dropped.
pub fn load_features_csv<T: Scalar>(
    path: impl AsRef<Path>,
    labels: Option<LabelSpec>,
) -> Result<Matrix<T>> {
    let table = parse_csv::<T>(path.as_ref())?;
    let width = table.width.unwrap_or(0);
    let drop = labels.map_or(0, |l| l.raw_columns());
    if width < drop {
        return Err(Error::Data("fewer columns than label columns".into()));
    }
    let m = width - drop;
    let rows: Vec<Vec<T>> = table.rows.into_iter().map(|r| r[..m].to_vec()).collect();
    if rows.is_empty() {
        return Matrix::from_vec(0, m, Vec::new());
    }
    Matrix::from_rows(&rows)
}

/// Loads either a CSV or a `BMO1` binary cache, sniffing the magic bytes.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, labels: LabelSpec) -> Result<RawDataset<T>> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let is_cache = fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map(|_| &head == CACHE_MAGIC)
        .unwrap_or(false);
    if is_cache {
        read_binary_cache(path)
    } else {
        load_csv(path, labels)
    }
}

/// Writes `magic "BMO1"`, then `n, m, d` as little-endian `u64`, then the feature matrix
/// and the target matrix, each row-major as little-endian `f64`.
pub fn write_binary_cache<T: Scalar>(path: impl AsRef<Path>, ds: &RawDataset<T>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(
        28 + 8 * ds.num_samples() * (ds.num_features() + ds.num_outputs()),
    );
    buf.extend_from_slice(CACHE_MAGIC);
    for v in [ds.num_samples(), ds.num_features(), ds.num_outputs()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in ds.features.as_slice().iter().chain(ds.targets.as_slice()) {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_binary_cache<T: Scalar>(path: impl AsRef<Path>) -> Result<RawDataset<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 28 || &bytes[..4] != CACHE_MAGIC {
        return Err(Error::Data(format!("{}: not a BMO1 cache", path.display())));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[4 + 8 * i..12 + 8 * i].try_into().unwrap());
    let (n, m, d) = (word(0) as usize, word(1) as usize, word(2) as usize);
    let expected = n
        .checked_mul(m + d)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(28));
    if expected != Some(bytes.len()) {
        return Err(Error::Data(format!(
            "{}: cache header says {n}x({m}+{d}) but payload is {} bytes",
            path.display(),
            bytes.len() - 28
        )));
    }
    let values: Vec<T> = bytes[28..]
        .chunks_exact(8)
        .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let (feat, targ) = values.split_at(n * m);
    RawDataset::new(
        Matrix::from_vec(n, m, feat.to_vec())?,
        Matrix::from_vec(n, d, targ.to_vec())?,
    )
}

/// Per-feature bin boundaries. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper<T> {
    boundaries: Vec<Vec<T>>,
}

impl<T: Scalar> BinMapper<T> {
    /// Builds boundaries from each feature column's empirical distribution.
    ///
    /// A column with at most `max_bins` distinct values gets one bin per distinct value,
    /// split at the midpoints between consecutive values. Otherwise boundaries sit at the
    /// midpoints around the `q / max_bins` quantiles, deduplicated.
    pub fn build(features: &Matrix<T>, max_bins: usize) -> Result<Self> {
        if max_bins < 2 {
            return Err(Error::config(format!("max_bins must be at least 2, got {max_bins}")));
        }
        if max_bins > MAX_SUPPORTED_BINS {
            return Err(Error::config(format!(
                "max_bins must be at most {MAX_SUPPORTED_BINS}, got {max_bins}"
            )));
        }
        check_finite(features, 0)?;
        let boundaries = (0..features.cols())
            .into_par_iter()
            .map(|j| {
                let mut column: Vec<T> = features.column(j).collect();
                column.sort_by(|a, b| a.partial_cmp(b).expect("finite values are ordered"));
                column_boundaries(&column, max_bins)
            })
            .collect();
        Ok(Self { boundaries })
    }

    /// Wraps explicit boundary lists, checking they are finite and strictly increasing.
    pub fn from_boundaries(boundaries: Vec<Vec<T>>) -> Result<Self> {
        for (j, b) in boundaries.iter().enumerate() {
            if b.iter().any(|v| !v.is_finite()) || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(format!(
                    "feature {j}: boundaries must be finite and strictly increasing"
                )));
            }
            if b.len() + 1 > MAX_SUPPORTED_BINS {
                return Err(Error::config(format!("feature {j}: too many bins")));
            }
        }
        Ok(Self { boundaries })
    }

    pub fn num_features(&self) -> usize {
        self.boundaries.len()
    }

    pub fn num_bins(&self, feature: usize) -> usize {
        self.boundaries[feature].len() + 1
    }

    pub fn boundaries(&self, feature: usize) -> &[T] {
        &self.boundaries[feature]
    }

    /// Upper boundary `s_bin` of a bin; `+inf` for the last bin.
    pub fn upper_bound(&self, feature: usize, bin: usize) -> T {
        self.boundaries[feature]
            .get(bin)
            .copied()
            .unwrap_or_else(T::infinity)
    }

    /// The `k` with `s_{k-1} < x <= s_k`, by binary search.
    pub fn bin_value(&self, feature: usize, x: T) -> usize {
        self.boundaries[feature].partition_point(|&s| s < x)
    }

    pub fn bin_matrix(&self, features: &Matrix<T>) -> Result<BinnedMatrix> {
        if features.cols() != self.num_features() {
            return Err(Error::shape(format!(
                "mapper has {} features, matrix has {}",
                self.num_features(),
                features.cols()
            )));
        }
        check_finite(features, 0)?;
        let n = features.rows();
        let bins: Vec<usize> = (0..self.num_features()).map(|j| self.num_bins(j)).collect();
        let wide = bins.iter().any(|&b| b > 256);
        let columns: Vec<Vec<u16>> = (0..self.num_features())
            .into_par_iter()
            .map(|j| {
                features
                    .column(j)
                    .map(|x| self.bin_value(j, x) as u16)
                    .collect()
            })
            .collect();
        let storage = if wide {
            BinStorage::U16(columns.concat())
        } else {
            BinStorage::U8(columns.iter().flatten().map(|&b| b as u8).collect())
        };
        Ok(BinnedMatrix {
            rows: n,
            bins,
            storage,
        })
    }
}

fn midpoint<T: Scalar>(a: T, b: T) -> T {
    a + (b - a) * T::half()
}

fn column_boundaries<T: Scalar>(sorted: &[T], max_bins: usize) -> Vec<T> {
    let mut distinct: Vec<T> = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut out: Vec<T> = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let idx = q * n / max_bins;
        if idx == 0 {
            continue;
        }
        let below = sorted[idx - 1];
        // First distinct value strictly above `below`.
        let pos = distinct.partition_point(|&v| v <= below);
        let Some(&above) = distinct.get(pos) else {
            continue;
        };
        let boundary = midpoint(below, above);
        if out.last().is_none_or(|&last| boundary > last) {
            out.push(boundary);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum BinStorage {
    U8(Vec<u8>),
    U16(Vec<u16>),
}

/// Bin indices of every sample, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    rows: usize,
    bins: Vec<usize>,
    storage: BinStorage,
}

/// One feature column of a [`BinnedMatrix`].
#[derive(Debug, Clone, Copy)]
pub enum BinColumn<'a> {
    U8(&'a [u8]),
    U16(&'a [u16]),
}

impl BinColumn<'_> {
    pub fn get(&self, row: usize) -> usize {
        match self {
            BinColumn::U8(c) => c[row] as usize,
            BinColumn::U16(c) => c[row] as usize,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BinColumn::U8(c) => c.len(),
            BinColumn::U16(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl BinnedMatrix {
    /// Builds a matrix directly from per-feature bin columns.
    pub fn from_columns(columns: &[Vec<usize>], bins: Vec<usize>) -> Result<Self> {
        if columns.len() != bins.len() {
            return Err(Error::shape("one bin count per column is required"));
        }
        let rows = columns.first().map_or(0, Vec::len);
        for (j, (col, &b)) in columns.iter().zip(&bins).enumerate() {
            if col.len() != rows {
                return Err(Error::shape(format!("column {j} has {} rows", col.len())));
            }
            if b == 0 || b > MAX_SUPPORTED_BINS || col.iter().any(|&v| v >= b) {
                return Err(Error::shape(format!("column {j} has indices outside [0, {b})")));
            }
        }
        let storage = if bins.iter().any(|&b| b > 256) {
            BinStorage::U16(columns.iter().flatten().map(|&v| v as u16).collect())
        } else {
            BinStorage::U8(columns.iter().flatten().map(|&v| v as u8).collect())
        };
        Ok(Self {
            rows,
            bins,
            storage,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_features(&self) -> usize {
        self.bins.len()
    }

    pub fn num_bins(&self, feature: usize) -> usize {
        self.bins[feature]
    }

    pub fn column(&self, feature: usize) -> BinColumn<'_> {
        let range = feature * self.rows..(feature + 1) * self.rows;
        match &self.storage {
            BinStorage::U8(v) => BinColumn::U8(&v[range]),
            BinStorage::U16(v) => BinColumn::U16(&v[range]),
        }
    }

    pub fn get(&self, row: usize, feature: usize) -> usize {
        self.column(feature).get(row)
    }

    /// Whether indices are stored as 16-bit.
    pub fn is_wide(&self) -> bool {
        matches!(self.storage, BinStorage::U16(_))
    }
}

/// Writes a header row (feature names, then `y0..`) followed by one row per sample.
pub fn write_csv<T: Scalar, W: Write + ?Sized>(out: &mut W, ds: &RawDataset<T>) -> std::io::Result<()> {
    let mut header: Vec<String> = match ds.feature_names() {
        Some(names) => names.to_vec(),
        None => (0..ds.num_features()).map(|j| format!("x{j}")).collect(),
    };
    header.extend((0..ds.num_outputs()).map(|j| format!("y{j}")));
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..ds.num_samples() {
        line.clear();
        for (k, v) in ds.features.row(i).iter().chain(ds.targets.row(i)).enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(values: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn linear_scan(bounds: &[f64], x: f64) -> usize {
        let mut k = 0;
        while k < bounds.len() && !(x <= bounds[k]) {
            k += 1;
        }
        k
    }

    #[test]
    fn quantile_midpoint_two_bins() {
        let m = BinMapper::build(&col(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(m.boundaries(0), &[2.5]);
        assert_eq!(m.num_bins(0), 2);
    }

    #[test]
    fn constant_column_is_one_bin() {
        for max_bins in [2, 3, 255] {
            let m = BinMapper::build(&col(&[7.0, 7.0, 7.0]), max_bins).unwrap();
            assert!(m.boundaries(0).is_empty());
            assert_eq!(m.num_bins(0), 1);
        }
    }

    #[test]
    fn few_distinct_values_get_one_bin_each() {
        let m = BinMapper::build(&col(&[1.0, 2.0, 3.0, 4.0]), 4).unwrap();
        assert_eq!(m.boundaries(0), &[1.5, 2.5, 3.5]);
    }

    #[test]
    fn max_bins_below_two_is_rejected() {
        assert!(matches!(
            BinMapper::build(&col(&[1.0]), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn non_finite_feature_names_cell() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]).unwrap();
        match BinMapper::build(&m, 4) {
            Err(Error::Ingestion { row, column, .. }) => assert_eq!((row, column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bin_value_is_right_closed() {
        let m = BinMapper::from_boundaries(vec![vec![2.5]]).unwrap();
        assert_eq!(m.bin_value(0, 2.0), 0);
        assert_eq!(m.bin_value(0, 2.5), 0);
        assert_eq!(m.bin_value(0, 2.6), 1);
        let m = BinMapper::from_boundaries(vec![vec![1.5, 2.5, 3.5]]).unwrap();
        assert_eq!(m.bin_value(0, 3.0), 2);
    }

    #[test]
    fn bin_matrix_per_element() {
        let m = BinMapper::from_boundaries(vec![vec![2.5]]).unwrap();
        let b = m.bin_matrix(&col(&[2.0])).unwrap();
        assert_eq!(b.get(0, 0), 0);

        let m = BinMapper::from_boundaries(vec![vec![2.5], vec![2.5]]).unwrap();
        let x = Matrix::from_vec(2, 2, vec![1.0, 4.0, 3.0, 2.0]).unwrap();
        let b = m.bin_matrix(&x).unwrap();
        assert_eq!([b.get(0, 0), b.get(0, 1), b.get(1, 0), b.get(1, 1)], [0, 1, 1, 0]);
        assert!(!b.is_wide());
    }

    #[test]
    fn wide_storage_above_256_bins() {
        let values: Vec<f64> = (0..600).map(f64::from).collect();
        let x = col(&values);
        let m = BinMapper::build(&x, 512).unwrap();
        assert_eq!(m.num_bins(0), 512);
        let b = m.bin_matrix(&x).unwrap();
        assert!(b.is_wide());
        for (i, &v) in values.iter().enumerate() {
            assert_eq!(b.get(i, 0), m.bin_value(0, v));
        }
    }

    #[test]
    fn replicate_targets_doubles_columns() {
        let ds = RawDataset::new(
            Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap(),
            Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
        )
        .unwrap();
        let r = ds.replicate_targets(2).unwrap();
        assert_eq!(r.targets().row(1), &[3.0, 4.0, 3.0, 4.0]);
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_class_column_expands_to_one_hot() {
        let f = write_tmp("1,2,0\n3,4,1\n");
        let ds: RawDataset<f64> = load_csv(f.path(), LabelSpec::Class { classes: 2 }).unwrap();
        assert_eq!(ds.features().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ds.targets().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        ds.check_one_hot().unwrap();
    }

    #[test]
    fn csv_header_is_detected() {
        let f = write_tmp("a,b,y\n1,2,0.5\n");
        let ds: RawDataset<f64> = load_csv(f.path(), LabelSpec::Trailing(1)).unwrap();
        assert_eq!(ds.feature_names().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ds.targets().as_slice(), &[0.5]);
    }

    #[test]
    fn csv_errors() {
        let f = write_tmp("");
        let err = load_csv::<f64>(f.path(), LabelSpec::Trailing(1)).unwrap_err();
        assert!(err.to_string().contains("no rows"), "{err}");

        let f = write_tmp("1,abc,0\n");
        match load_csv::<f64>(f.path(), LabelSpec::Trailing(1)) {
            Err(Error::Ingestion { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }

        let f = write_tmp("1,2,0\n3,4\n");
        assert!(matches!(
            load_csv::<f64>(f.path(), LabelSpec::Trailing(1)),
            Err(Error::Ingestion { row: 2, .. })
        ));

        let f = write_tmp("1,inf,0\n");
        assert!(matches!(
            load_csv::<f64>(f.path(), LabelSpec::Trailing(1)),
            Err(Error::Ingestion { row: 1, column: 2, .. })
        ));

        let f = write_tmp("1,2,5\n");
        assert!(load_csv::<f64>(f.path(), LabelSpec::Class { classes: 3 }).is_err());
    }

    #[test]
    fn label_spec_parsing() {
        assert_eq!("3".parse::<LabelSpec>().unwrap(), LabelSpec::Trailing(3));
        assert_eq!(
            "class:10".parse::<LabelSpec>().unwrap(),
            LabelSpec::Class { classes: 10 }
        );
        assert!("0".parse::<LabelSpec>().is_err());
        assert!("class:x".parse::<LabelSpec>().is_err());
    }

    #[test]
    fn binary_cache_round_trip() {
        let ds = RawDataset::new(
            Matrix::from_vec(2, 2, vec![1.0, -2.5, 3.25, 4.0]).unwrap(),
            Matrix::from_vec(2, 1, vec![0.1, 0.2]).unwrap(),
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_binary_cache(f.path(), &ds).unwrap();
        let bytes = std::fs::read(f.path()).unwrap();
        assert_eq!(&bytes[..4], b"BMO1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 28 + 8 * 6);
        let back: RawDataset<f64> = load_dataset(f.path(), LabelSpec::Trailing(1)).unwrap();
        assert_eq!(back, ds);
    }

    proptest! {
        #[test]
        fn binary_search_matches_linear_scan(
            values in prop::collection::vec(-100.0f64..100.0, 1..200),
            probes in prop::collection::vec(-120.0f64..120.0, 1..50),
            max_bins in 2usize..40,
        ) {
            let m = BinMapper::build(&col(&values), max_bins).unwrap();
            prop_assert!(m.num_bins(0) <= max_bins);
            let b = m.boundaries(0);
            prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
            for &x in probes.iter().chain(values.iter()).chain(b.iter()) {
                prop_assert_eq!(m.bin_value(0, x), linear_scan(b, x));
            }
            for &v in &values {
                prop_assert!(m.bin_value(0, v) < m.num_bins(0));
            }
        }

        #[test]
        fn binning_is_monotone(
            values in prop::collection::vec(-10.0f64..10.0, 1..100),
            a in -12.0f64..12.0,
            b in -12.0f64..12.0,
        ) {
            let m = BinMapper::build(&col(&values), 16).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.bin_value(0, lo) <= m.bin_value(0, hi));
        }

        #[test]
        fn mapper_is_deterministic(values in prop::collection::vec(-5.0f64..5.0, 1..100)) {
            let x = col(&values);
            let a = BinMapper::build(&x, 8).unwrap();
            let b = BinMapper::build(&x, 8).unwrap();
            let bits = |m: &BinMapper<f64>| m.boundaries(0).iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a), bits(&b));
        }
    }
}
