//! Dataset ingestion, synthetic teachers, splits.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::baseline::{Activation, MlpNet};
use crate::linalg::dense::Mat;
use crate::net::{BasisFunction, PolyNet};
use crate::{rng, Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelKind {
    Regression,
    /// Every label is exactly -1 or +1.
    Binary,
}

/// `m` examples `(x_i, y_i)` with `x_i` in `R^d`. Immutable after
/// construction.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    features: Mat<T>,
    labels: Vec<T>,
    kind: LabelKind,
    feature_names: Option<Vec<String>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Mat<T>, labels: Vec<T>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if features.data().iter().any(|x| !x.is_finite())
            || labels.iter().any(|y| !y.is_finite())
        {
            return Err(Error::InvalidModel("dataset contains non-finite entries".into()));
        }
        let kind = if labels
            .iter()
            .all(|&y| y == T::one() || y == -T::one())
        {
            LabelKind::Binary
        } else {
            LabelKind::Regression
        };
        Ok(Dataset {
            features,
            labels,
            kind,
            feature_names: None,
        })
    }

    pub fn from_rows(rows: Vec<Vec<T>>, labels: Vec<T>) -> Result<Self> {
        Self::new(Mat::from_rows(rows)?, labels)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn x(&self, i: usize) -> &[T] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> T {
        self.labels[i]
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn features(&self) -> &Mat<T> {
        &self.features
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Seeded shuffle split into `(train, test)`; the index sets partition
    /// `0..m`.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::config("train_fraction must lie in [0, 1]"));
        }
        let m = self.len();
        let n_train = ((m as f64) * train_fraction).round() as usize;
        if n_train == 0 || n_train == m {
            return Err(Error::config("split would leave one side empty"));
        }
        let mut indices: Vec<usize> = (0..m).collect();
        let mut r = rng::seeded(seed, 0);
        // Fisher-Yates.
        for i in (1..m).rev() {
            let j = r.gen_range(0..=i);
            indices.swap(i, j);
        }
        let take = |idx: &[usize]| -> Result<Dataset<T>> {
            let rows: Vec<Vec<T>> = idx.iter().map(|&i| self.x(i).to_vec()).collect();
            let labels: Vec<T> = idx.iter().map(|&i| self.label(i)).collect();
            let mut ds = Dataset::from_rows(rows, labels)?;
            ds.feature_names = self.feature_names.clone();
            Ok(ds)
        };
        Ok((take(&indices[..n_train])?, take(&indices[n_train..])?))
    }

    /// Returns a standardized copy (zero mean, unit variance per feature,
    /// using this dataset's statistics) together with the per-feature
    /// `(mean, sd)` pairs. Constant features are left unscaled.
    pub fn standardized(&self) -> (Dataset<T>, Vec<(T, T)>) {
        let (m, d) = (self.len(), self.dim());
        let mut stats = Vec::with_capacity(d);
        for j in 0..d {
            let mean = crate::accum::mean((0..m).map(|i| self.features.get(i, j)));
            let var = crate::accum::mean((0..m).map(|i| {
                let c = self.features.get(i, j) - mean;
                c * c
            }));
            let sd = var.sqrt();
            stats.push((mean, if sd > T::zero() { sd } else { T::one() }));
        }
        let features = Mat::from_fn(m, d, |i, j| {
            (self.features.get(i, j) - stats[j].0) / stats[j].1
        });
        let ds = Dataset {
            features,
            labels: self.labels.clone(),
            kind: self.kind,
            feature_names: self.feature_names.clone(),
        };
        (ds, stats)
    }

    /// Writes `features,label` rows (header line when names are present) with
    /// shortest round-trip decimal formatting.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        if let Some(names) = &self.feature_names {
            writeln!(out, "{},label", names.join(","))?;
        }
        for i in 0..self.len() {
            let row: Vec<String> = self.x(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{},{}", row.join(","), self.label(i))?;
        }
        Ok(())
    }
}

/// Parses a rectangular numeric CSV ('.' decimal, comma separator, optional
/// single header line). The label column is the last one unless `label_col`
/// (0-based) says otherwise; a label column valued entirely in {-1, +1} is
/// tagged binary.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label_col: Option<usize>) -> Result<Dataset<T>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut lines = text.lines().enumerate().peekable();

    let mut feature_names = None;
    if let Some((_, first)) = lines.peek() {
        // A header line is all names; a data row with one bad cell is not a
        // header and must surface as a positioned parse error.
        let looks_like_header = !first.trim().is_empty()
            && first
                .split(',')
                .all(|tok| tok.trim().parse::<f64>().is_err() && !tok.trim().is_empty());
        if looks_like_header {
            let (_, header) = lines.next().unwrap();
            let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
            feature_names = Some(names);
        }
    }

    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut labels: Vec<T> = Vec::new();
    let mut width = None;
    for (line_idx, line) in lines {
        let row_no = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    row: row_no,
                    col: cells.len(),
                    message: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        let w = cells.len();
        if w < 2 {
            return Err(Error::Parse {
                row: row_no,
                col: 1,
                message: "need at least one feature column and one label column".into(),
            });
        }
        let lc = label_col.unwrap_or(w - 1);
        if lc >= w {
            return Err(Error::Parse {
                row: row_no,
                col: w,
                message: format!("label column {lc} out of range for {w} columns"),
            });
        }
        let mut row = Vec::with_capacity(w - 1);
        let mut label = T::zero();
        for (c, cell) in cells.iter().enumerate() {
            let parsed: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                col: c + 1,
                message: format!("'{}' is not a number", cell.trim()),
            })?;
            if !parsed.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    col: c + 1,
                    message: "non-finite value".into(),
                });
            }
            if c == lc {
                label = T::of(parsed);
            } else {
                row.push(T::of(parsed));
            }
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ds = Dataset::from_rows(rows, labels)?;
    if let Some(mut names) = feature_names {
        let lc = label_col.unwrap_or(names.len().saturating_sub(1));
        if lc < names.len() {
            names.remove(lc);
        }
        ds.feature_names = Some(names);
    }
    Ok(ds)
}

/// Gaussian inputs pushed through a teacher network, with optional label
/// noise: `y_i = f*(x_i) + noise_sd * N(0,1)`.
pub fn gen_from_teacher<T: Scalar>(
    teacher: &PolyNet<T>,
    m: usize,
    seed: u64,
    noise_sd: f64,
) -> Result<Dataset<T>> {
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = teacher.dim();
    let mut r = rng::seeded(seed, 0);
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let x: Vec<T> = rng::gaussian_vec(&mut r, d);
        let mut y = teacher.evaluate(&x)?;
        if noise_sd > 0.0 {
            y += T::of(noise_sd) * rng::standard_normal(&mut r);
        }
        rows.push(x);
        labels.push(y);
    }
    Dataset::from_rows(rows, labels)
}

/// Samples a random teacher from the constrained depth-2 class — `k` squared
/// neurons with unit Gaussian directions, `|alpha_i| <= 1`, small affine part
/// — and draws `m` labeled Gaussian examples from it.
pub fn gen_teacher_p2k<T: Scalar>(
    d: usize,
    k: usize,
    m: usize,
    seed: u64,
    noise_sd: f64,
) -> Result<(Dataset<T>, PolyNet<T>)> {
    if k == 0 {
        return Err(Error::config("teacher needs k >= 1 neurons"));
    }
    if d == 0 {
        return Err(Error::config("teacher needs d >= 1"));
    }
    let mut r = rng::seeded(seed, 1);
    let bias = T::of(0.1) * rng::standard_normal::<T, _>(&mut r);
    let scale = T::of(0.1 / (d as f64).sqrt());
    let direct: Vec<T> = (0..d)
        .map(|_| scale * rng::standard_normal::<T, _>(&mut r))
        .collect();
    let mut teacher = PolyNet::affine(bias, direct);
    for _ in 0..k {
        let w: Vec<T> = rng::unit_gaussian(&mut r, d);
        let alpha = T::of(r.gen_range(-1.0..=1.0));
        teacher.push_neuron(alpha, BasisFunction::square(w)?)?;
    }
    let data = gen_from_teacher(&teacher, m, seed, noise_sd)?;
    Ok((data, teacher))
}

/// Seed-independent fixed teacher: a single squared neuron on the first
/// coordinate with alpha = 1 and zero affine part, so `y = x_1^2` exactly.
pub fn fixed_p2k_teacher<T: Scalar>(d: usize) -> Result<PolyNet<T>> {
    if d == 0 {
        return Err(Error::config("teacher needs d >= 1"));
    }
    let mut w = vec![T::zero(); d];
    w[0] = T::one();
    let mut teacher = PolyNet::zero(d);
    teacher.push_neuron(T::one(), BasisFunction::square(w)?)?;
    Ok(teacher)
}

/// Random one-hidden-layer teacher MLP and a dataset drawn from it. Labels
/// are the sign of the teacher output when `binary` is set, otherwise the raw
/// output.
pub fn gen_teacher_mlp<T: Scalar>(
    d: usize,
    width: usize,
    activation: Activation,
    m: usize,
    seed: u64,
    binary: bool,
) -> Result<(Dataset<T>, MlpNet<T>)> {
    if width == 0 {
        return Err(Error::config("teacher needs width >= 1"));
    }
    let teacher = MlpNet::random(&[d, width, 1], activation, 1.0, seed)?;
    let mut r = rng::seeded(seed, 2);
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let x: Vec<T> = rng::gaussian_vec(&mut r, d);
        let out = teacher.forward(&x)?;
        let y = if binary {
            if out >= T::zero() {
                T::one()
            } else {
                -T::one()
            }
        } else {
            out
        };
        rows.push(x);
        labels.push(y);
    }
    Ok((Dataset::from_rows(rows, labels)?, teacher))
}
