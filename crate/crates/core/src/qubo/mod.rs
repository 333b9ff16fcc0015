//! Binary portfolio selection as a QUBO.
//!
//! `E(x) = sum_i Q_ii x_i + sum_{i<j} Q_ij x_i x_j` with `Q` stored upper
//! triangular. The binary multi-objective portfolio minimizes
//! `x'Sx - lambda r'x`; since `x_i^2 = x_i` the variance diagonal folds into
//! the linear biases, and the ordered double sum over `(i, j)` and `(j, i)`
//! doubles every off-diagonal coupling.

mod anneal;
mod exhaustive;
mod text;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::flags::Flag;
use crate::optimizer::Weights;
use crate::stats::ExpectedStats;

pub use anneal::{anneal, AnnealSchedule};
pub use exhaustive::{exhaustive_min, MAX_EXHAUSTIVE};
pub use text::{parse_qubo_text, to_qubo_text};

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("selection has {got} bits, model has {expected} variables")]
    SizeMismatch { expected: usize, got: usize },
    #[error("{n} variables exceed the exhaustive limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("coefficient below the diagonal at ({0}, {1})")]
    LowerTriangle(usize, usize),
    #[error("invalid anneal schedule: {0}")]
    Schedule(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Upper-triangular QUBO coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    q: DMatrix<f64>,
}

impl QuboModel {
    pub fn zeros(n: usize) -> Self {
        Self { q: DMatrix::zeros(n, n) }
    }

    /// Validates that the strictly lower part is zero and every entry finite.
    pub fn from_upper(q: DMatrix<f64>) -> Result<Self, QuboError> {
        assert_eq!(q.nrows(), q.ncols(), "QUBO matrix must be square");
        if q.iter().any(|v| !v.is_finite()) {
            return Err(QuboError::NonFinite);
        }
        for j in 0..q.ncols() {
            for i in (j + 1)..q.nrows() {
                if q[(i, j)] != 0.0 {
                    return Err(QuboError::LowerTriangle(i, j));
                }
            }
        }
        Ok(Self { q })
    }

    pub fn size(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `Q_ij` for `i <= j`, mirrored for `i > j`.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.q[(i, j)]
        } else {
            self.q[(j, i)]
        }
    }

    /// Sets `Q_ij`, storing it in the upper triangle.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.q[(a, b)] = value;
    }

    /// Same model with variables relabelled: new variable `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.size();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                out.set(i, j, self.coefficient(perm[i], perm[j]));
            }
        }
        out
    }

    /// `sum_i Q_ii x_i + sum_{i<j} Q_ij x_i x_j`.
    pub fn energy(&self, x: &BinarySelection) -> Result<f64, QuboError> {
        if x.len() != self.size() {
            return Err(QuboError::SizeMismatch {
                expected: self.size(),
                got: x.len(),
            });
        }
        Ok(self.energy_of(x.bits()))
    }

    pub(crate) fn energy_of(&self, bits: &[bool]) -> f64 {
        let n = self.size();
        let mut e = 0.0;
        for i in (0..n).filter(|&i| bits[i]) {
            e += self.q[(i, i)];
            for j in ((i + 1)..n).filter(|&j| bits[j]) {
                e += self.q[(i, j)];
            }
        }
        e
    }

    /// `sum_i |Q_ii| + sum_{i<j} |Q_ij|`, an upper bound on any energy gap.
    pub(crate) fn magnitude(&self) -> f64 {
        self.q.iter().map(|v| v.abs()).sum()
    }
}

/// QUBO for `x'Sx - risk_aversion * r'x` over `x in {0,1}^N`:
/// `Q_ii = -risk_aversion * r_i + S_ii`, `Q_ij = 2 S_ij` for `i < j`.
pub fn build_bmop(stats: &ExpectedStats, risk_aversion: f64) -> Result<QuboModel, QuboError> {
    if !risk_aversion.is_finite() {
        return Err(QuboError::NonFinite);
    }
    let n = stats.n_assets();
    let (mean, cov) = (stats.mean(), stats.covariance());
    let mut model = QuboModel::zeros(n);
    for i in 0..n {
        model.q[(i, i)] = -risk_aversion * mean[i] + cov[(i, i)];
        for j in (i + 1)..n {
            model.q[(i, j)] = cov[(i, j)] + cov[(j, i)];
        }
    }
    if model.q.iter().any(|v| !v.is_finite()) {
        return Err(QuboError::NonFinite);
    }
    Ok(model)
}

/// A point of `{0,1}^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySelection(Vec<bool>);

impl BinarySelection {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// From `0`/`1` integers; any other value is rejected.
    pub fn from_digits(digits: &[u8]) -> Option<Self> {
        digits
            .iter()
            .map(|d| match d {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Bits read as a big-endian integer (first variable most significant).
    pub fn as_integer(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, b| (acc << 1) | (*b as u64))
    }

    pub fn from_integer(value: u64, n: usize) -> Self {
        Self((0..n).map(|i| (value >> (n - 1 - i)) & 1 == 1).collect())
    }
}

/// Equal weights over the selected assets, or over all assets (flagged)
/// when nothing was selected.
pub fn selection_to_weights(x: &BinarySelection, tickers: &[String]) -> (Weights, Vec<Flag>) {
    assert_eq!(x.len(), tickers.len(), "selection and ticker list differ in length");
    let k = x.count();
    if k == 0 {
        return (Weights::equal(tickers), vec![Flag::ZeroSelectionFallback]);
    }
    let w = 1.0 / k as f64;
    let values = nalgebra::DVector::from_iterator(x.len(), x.bits().iter().map(|b| if *b { w } else { 0.0 }));
    let weights = Weights::new(tickers.to_vec(), values).expect("normalized selection is a valid allocation");
    (weights, Vec::new())
}
