//! Quantized tabular data, empirical value probabilities and label oracles.
//!
//! Every feature is stored as a column of value indices in `[0, |V_j|)`. The
//! empirical distribution of the full unlabeled sample is treated as the true
//! distribution, both by the selection algorithms and by evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Default number of equal-frequency bins for real-valued columns.
pub const DEFAULT_BINS: usize = 5;

/// Column-oriented categorical table.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDataset {
    names: Vec<String>,
    columns: Vec<Vec<u32>>,
    alphabets: Vec<usize>,
    labels: Option<Vec<u8>>,
    m: usize,
}

impl QuantizedDataset {
    /// Build a dataset from columns of value indices.
    pub fn new(
        names: Vec<String>,
        columns: Vec<Vec<u32>>,
        alphabets: Vec<usize>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if names.len() != d || alphabets.len() != d {
            return Err(Error::InvalidDataset(format!(
                "{d} columns but {} names and {} alphabets",
                names.len(),
                alphabets.len()
            )));
        }
        let m = columns[0].len();
        if m == 0 {
            return Err(Error::EmptyTable);
        }
        for (j, (col, &size)) in columns.iter().zip(&alphabets).enumerate() {
            if col.len() != m {
                return Err(Error::InvalidDataset(format!(
                    "column {j} has length {}, expected {m}",
                    col.len()
                )));
            }
            if size == 0 {
                return Err(Error::EmptyAlphabet);
            }
            if let Some(&bad) = col.iter().find(|&&v| v as usize >= size) {
                return Err(Error::InvalidDataset(format!(
                    "column {j} holds value {bad} outside its alphabet of size {size}"
                )));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != m {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {m} examples",
                    labels.len()
                )));
            }
            if labels.iter().any(|&y| y > 1) {
                return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
            }
        }
        Ok(Self {
            names,
            columns,
            alphabets,
            labels,
            m,
        })
    }

    /// Build from columns, taking each alphabet size as `max value + 1`.
    pub fn from_columns(columns: Vec<Vec<u32>>, labels: Option<Vec<u8>>) -> Result<Self> {
        let names = (0..columns.len()).map(|j| format!("f{j}")).collect();
        let alphabets = columns
            .iter()
            .map(|c| c.iter().max().map_or(1, |&v| v as usize + 1))
            .collect();
        Self::new(names, columns, alphabets, labels)
    }

    /// Number of examples.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of features.
    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn alphabet(&self, j: usize) -> usize {
        self.alphabets[j]
    }

    pub fn alphabets(&self) -> &[usize] {
        &self.alphabets
    }

    /// Value index of example `i` in feature `j`.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> usize {
        self.columns[j][i] as usize
    }

    /// Hidden ground-truth labels, when the source provided them.
    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        self.labels = Some(labels);
        Self::new(self.names, self.columns, self.alphabets, self.labels)
    }
}

/// Empirical probability of every value of every feature.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    probs: Vec<Vec<f64>>,
}

impl MarginalTable {
    pub fn feature(&self, j: usize) -> &[f64] {
        &self.probs[j]
    }

    pub fn get(&self, j: usize, v: usize) -> f64 {
        self.probs[j][v]
    }

    pub fn d(&self) -> usize {
        self.probs.len()
    }
}

/// `p(j, v) = |{i : x_i(j) = v}| / m` for every feature.
pub fn marginals(ds: &QuantizedDataset) -> MarginalTable {
    let m = ds.m() as f64;
    let probs = (0..ds.d())
        .map(|j| {
            let mut counts = vec![0usize; ds.alphabet(j)];
            for &v in ds.column(j) {
                counts[v as usize] += 1;
            }
            counts.into_iter().map(|c| c as f64 / m).collect()
        })
        .collect();
    MarginalTable { probs }
}

/// Joint empirical distribution of one feature pair over the full sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    first: usize,
    second: usize,
    width: usize,
    probs: Vec<f64>,
}

impl PairTable {
    pub fn compute(ds: &QuantizedDataset, j1: usize, j2: usize) -> Result<Self> {
        check_pair(ds, j1, j2)?;
        let width = ds.alphabet(j2);
        let mut counts = vec![0usize; ds.alphabet(j1) * width];
        for (&a, &b) in ds.column(j1).iter().zip(ds.column(j2)) {
            counts[a as usize * width + b as usize] += 1;
        }
        let m = ds.m() as f64;
        Ok(Self {
            first: j1,
            second: j2,
            width,
            probs: counts.into_iter().map(|c| c as f64 / m).collect(),
        })
    }

    pub fn features(&self) -> (usize, usize) {
        (self.first, self.second)
    }

    #[inline]
    pub fn get(&self, v1: usize, v2: usize) -> f64 {
        self.probs[v1 * self.width + v2]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn check_pair(ds: &QuantizedDataset, j1: usize, j2: usize) -> Result<()> {
    let d = ds.d();
    for j in [j1, j2] {
        if j >= d {
            return Err(Error::IndexOutOfRange { index: j, len: d });
        }
    }
    if j1 == j2 {
        return Err(Error::SameFeature(j1));
    }
    Ok(())
}

/// Fraction of examples with `x(j1) = v1` and `x(j2) = v2`.
pub fn pair_probability(
    ds: &QuantizedDataset,
    j1: usize,
    j2: usize,
    v1: usize,
    v2: usize,
) -> Result<f64> {
    check_pair(ds, j1, j2)?;
    for (j, v) in [(j1, v1), (j2, v2)] {
        if v >= ds.alphabet(j) {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: ds.alphabet(j),
            });
        }
    }
    let hits = ds
        .column(j1)
        .iter()
        .zip(ds.column(j2))
        .filter(|(&a, &b)| a as usize == v1 && b as usize == v2)
        .count();
    Ok(hits as f64 / ds.m() as f64)
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Read a header-bearing CSV file and quantize every column.
///
/// String columns map distinct strings to indices in lexicographic order.
/// Numeric columns with more than `bins` distinct values are cut into `bins`
/// equal-frequency bins; others map distinct values in increasing order. The
/// optional label column must hold exactly two distinct values, mapped to 0
/// and 1 in sorted order.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>, bins: usize) -> Result<QuantizedDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column, bins)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, label_column: Option<&str>, bins: usize) -> Result<QuantizedDataset> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let width = header.len();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row: row + 1,
                found: record.len(),
                expected: width,
            });
        }
        for (col, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    row: row + 1,
                    column: header[col].clone(),
                });
            }
            cells[col].push(cell.to_owned());
        }
    }
    if cells.first().map_or(true, Vec::is_empty) {
        return Err(Error::EmptyTable);
    }

    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::UnknownColumn(name.to_owned()))?,
        ),
        None => None,
    };

    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut alphabets = Vec::new();
    let mut labels = None;
    for (col, raw) in cells.iter().enumerate() {
        if Some(col) == label_idx {
            let (values, size) = encode_categorical(raw);
            if size != 2 {
                return Err(Error::LabelCardinality {
                    column: header[col].clone(),
                    found: size,
                });
            }
            labels = Some(values.into_iter().map(|v| v as u8).collect());
            continue;
        }
        let (values, size) = match parse_numeric(raw) {
            Some(nums) => quantize_numeric(&nums, bins),
            None => encode_categorical(raw),
        };
        names.push(header[col].clone());
        columns.push(values);
        alphabets.push(size);
    }
    QuantizedDataset::new(names, columns, alphabets, labels)
}

fn parse_numeric(raw: &[String]) -> Option<Vec<f64>> {
    raw.iter()
        .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect()
}

/// Distinct values in sorted order (numerically if every value parses as a
/// number, lexicographically otherwise).
fn encode_categorical(raw: &[String]) -> (Vec<u32>, usize) {
    if let Some(nums) = parse_numeric(raw) {
        return encode_sorted_numbers(&nums);
    }
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    let index: HashMap<&str, u32> = distinct
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i as u32))
        .collect();
    (raw.iter().map(|s| index[s.as_str()]).collect(), distinct.len())
}

fn encode_sorted_numbers(nums: &[f64]) -> (Vec<u32>, usize) {
    let mut distinct: Vec<f64> = nums.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let values = nums
        .iter()
        .map(|x| distinct.binary_search_by(|p| p.total_cmp(x)).unwrap() as u32)
        .collect();
    (values, distinct.len())
}

fn quantize_numeric(nums: &[f64], bins: usize) -> (Vec<u32>, usize) {
    let mut distinct = nums.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= bins {
        return encode_sorted_numbers(nums);
    }
    equal_frequency_bins(nums, bins)
}

/// Equal-frequency binning: the example at sorted rank `r` goes to bin
/// `floor(r * bins / m)`, tied values share the bin of their lowest rank, and
/// empty bins are dropped so every returned value index is populated.
pub fn equal_frequency_bins(nums: &[f64], bins: usize) -> (Vec<u32>, usize) {
    let m = nums.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| nums[a].total_cmp(&nums[b]));
    let mut raw_bin = vec![0usize; m];
    let mut prev: Option<(f64, usize)> = None;
    for (rank, &i) in order.iter().enumerate() {
        let bin = match prev {
            Some((x, b)) if x == nums[i] => b,
            _ => rank * bins / m,
        };
        raw_bin[i] = bin;
        prev = Some((nums[i], bin));
    }
    let used: BTreeMap<usize, u32> = raw_bin
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(new, old)| (old, new as u32))
        .collect();
    (raw_bin.iter().map(|b| used[b]).collect(), used.len())
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Binary-feature table with one informative feature (feature 0).
///
/// Every feature is an independent fair coin; the label is drawn from
/// `Bernoulli(informative_q[x(0)])`.
pub fn planted_dataset(m: usize, d: usize, informative_q: [f64; 2], seed: u64) -> Result<QuantizedDataset> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidConfig("planted dataset needs m >= 1 and d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(m); d];
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        for col in columns.iter_mut() {
            col.push(rng.gen_range(0..2u32));
        }
        let q = informative_q[columns[0].last().copied().unwrap() as usize];
        labels.push(u8::from(rng.gen::<f64>() < q));
    }
    let names = (0..d).map(|j| format!("f{j}")).collect();
    QuantizedDataset::new(names, columns, vec![2; d], Some(labels))
}

// ---------------------------------------------------------------------------
// Label oracles
// ---------------------------------------------------------------------------

/// Source of binary labels for example indices. Repeated queries for the same
/// index must return the same label.
pub trait LabelOracle {
    fn label(&mut self, index: usize) -> Result<u8>;
}

impl<T: LabelOracle + ?Sized> LabelOracle for &mut T {
    fn label(&mut self, index: usize) -> Result<u8> {
        (**self).label(index)
    }
}

impl<T: LabelOracle + ?Sized> LabelOracle for Box<T> {
    fn label(&mut self, index: usize) -> Result<u8> {
        (**self).label(index)
    }
}

/// Returns the stored label of the requested example.
#[derive(Debug, Clone)]
pub struct DatasetOracle {
    labels: Vec<u8>,
}

impl DatasetOracle {
    pub fn new(ds: &QuantizedDataset) -> Result<Self> {
        ds.labels()
            .map(|l| Self { labels: l.to_vec() })
            .ok_or(Error::MissingGroundTruth)
    }

    pub fn from_labels(labels: Vec<u8>) -> Self {
        Self { labels }
    }
}

impl LabelOracle for DatasetOracle {
    fn label(&mut self, index: usize) -> Result<u8> {
        self.labels.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            len: self.labels.len(),
        })
    }
}

/// Draws `Y | X(j) = v ~ Bernoulli(q_v)` once per example and caches it.
#[derive(Debug, Clone)]
pub struct BernoulliOracle {
    values: Vec<u32>,
    q: Vec<f64>,
    rng: ChaCha8Rng,
    cache: HashMap<usize, u8>,
}

impl BernoulliOracle {
    /// Labels driven by feature `feature` of `ds` with per-value parameters `q`.
    pub fn new(ds: &QuantizedDataset, feature: usize, q: Vec<f64>, seed: u64) -> Result<Self> {
        if feature >= ds.d() {
            return Err(Error::IndexOutOfRange {
                index: feature,
                len: ds.d(),
            });
        }
        if q.len() != ds.alphabet(feature) {
            return Err(Error::InvalidConfig(format!(
                "feature {feature} has {} values but {} parameters were given",
                ds.alphabet(feature),
                q.len()
            )));
        }
        if q.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("Bernoulli parameters must lie in [0, 1]".into()));
        }
        Ok(Self {
            values: ds.column(feature).to_vec(),
            q,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cache: HashMap::new(),
        })
    }
}

impl LabelOracle for BernoulliOracle {
    fn label(&mut self, index: usize) -> Result<u8> {
        if let Some(&y) = self.cache.get(&index) {
            return Ok(y);
        }
        let v = *self.values.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.values.len(),
        })? as usize;
        let y = u8::from(self.rng.gen::<f64>() < self.q[v]);
        self.cache.insert(index, y);
        Ok(y)
    }
}

/// Asks a human for each label over a line-oriented channel.
pub struct InteractiveOracle<R, W> {
    input: R,
    output: W,
    row_names: Option<Vec<String>>,
    cache: HashMap<usize, u8>,
    transcript: Vec<String>,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self {
            input,
            output,
            row_names: None,
            cache: HashMap::new(),
            transcript: Vec::new(),
        }
    }

    /// Optional per-row descriptions shown alongside the row number.
    pub fn with_row_descriptions(mut self, rows: Vec<String>) -> Self {
        self.row_names = Some(rows);
        self
    }

    /// One line per answered prompt: `row <i>: label <y>`.
    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    fn io_err(e: std::io::Error) -> Error {
        Error::OracleAborted(e.to_string())
    }
}

impl<R: BufRead, W: Write> LabelOracle for InteractiveOracle<R, W> {
    fn label(&mut self, index: usize) -> Result<u8> {
        if let Some(&y) = self.cache.get(&index) {
            return Ok(y);
        }
        loop {
            match self.row_names.as_ref().and_then(|r| r.get(index)) {
                Some(desc) => write!(self.output, "row {index} ({desc}): label [0/1]? "),
                None => write!(self.output, "row {index}: label [0/1]? "),
            }
            .and_then(|_| self.output.flush())
            .map_err(Self::io_err)?;
            let mut line = String::new();
            let read = self.input.read_line(&mut line).map_err(Self::io_err)?;
            if read == 0 {
                return Err(Error::OracleAborted("end of input".into()));
            }
            let y = match line.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    writeln!(self.output, "expected 0 or 1, got `{other}`").map_err(Self::io_err)?;
                    continue;
                }
            };
            writeln!(self.output, "row {index}: recorded label {y}").map_err(Self::io_err)?;
            self.transcript.push(format!("row {index}: label {y}"));
            self.cache.insert(index, y);
            return Ok(y);
        }
    }
}
