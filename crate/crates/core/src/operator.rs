//! Dense operator matrices and the vibronic basis they act on.
//!
//! The joint space is ordered electronic ⊗ CM ⊗ relative, with the electronic
//! factor itself ordered as `e1 * 2 + e2` (`↓ = 0`, `↑ = 1`). A flat index is
//! therefore `((e1 * 2 + e2) * n_cm_max + n) * n_rel_max + n_r`.

use std::fmt;

use ndarray::{linalg::kron, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold on `max |M - M†|` below which an operator is treated as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Joint electronic configuration of the two ions.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectronicLabel {
    #[serde(rename = "dd")]
    DownDown,
    #[serde(rename = "du")]
    DownUp,
    #[serde(rename = "ud")]
    UpDown,
    #[serde(rename = "uu")]
    UpUp,
}

impl ElectronicLabel {
    pub const ALL: [ElectronicLabel; 4] =
        [ElectronicLabel::DownDown, ElectronicLabel::DownUp, ElectronicLabel::UpDown, ElectronicLabel::UpUp];

    /// Builds the label from the two ion states (`false = ↓`, `true = ↑`).
    pub fn from_spins(e1: bool, e2: bool) -> Self {
        Self::ALL[(e1 as usize) * 2 + e2 as usize]
    }

    pub fn index(self) -> usize {
        match self {
            ElectronicLabel::DownDown => 0,
            ElectronicLabel::DownUp => 1,
            ElectronicLabel::UpDown => 2,
            ElectronicLabel::UpUp => 3,
        }
    }

    /// Number of excited ions.
    pub fn excitations(self) -> usize {
        match self {
            ElectronicLabel::DownDown => 0,
            ElectronicLabel::DownUp | ElectronicLabel::UpDown => 1,
            ElectronicLabel::UpUp => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ElectronicLabel::DownDown => "dd",
            ElectronicLabel::DownUp => "du",
            ElectronicLabel::UpDown => "ud",
            ElectronicLabel::UpUp => "uu",
        }
    }
}

impl fmt::Display for ElectronicLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Truncated product basis |e1, e2, n, n_r⟩.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub n_cm_max: usize,
    pub n_rel_max: usize,
}

impl BasisDescriptor {
    pub fn new(n_cm_max: usize, n_rel_max: usize) -> Self {
        Self { n_cm_max, n_rel_max }
    }

    pub fn dim(&self) -> usize {
        4 * self.motional_dim()
    }

    pub fn motional_dim(&self) -> usize {
        self.n_cm_max * self.n_rel_max
    }

    /// Flat index of |label, n, n_r⟩; `None` outside the truncation.
    pub fn index(&self, label: ElectronicLabel, n: usize, n_r: usize) -> Option<usize> {
        (n < self.n_cm_max && n_r < self.n_rel_max).then(|| (label.index() * self.n_cm_max + n) * self.n_rel_max + n_r)
    }

    pub fn decode(&self, idx: usize) -> (ElectronicLabel, usize, usize) {
        assert!(idx < self.dim(), "index {idx} outside basis of dimension {}", self.dim());
        let n_r = idx % self.n_rel_max;
        let rest = idx / self.n_rel_max;
        let n = rest % self.n_cm_max;
        (ElectronicLabel::ALL[rest / self.n_cm_max], n, n_r)
    }
}

/// Which tensor factor an operator acts on.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Factor {
    /// Two-spin factor, dimension 4.
    Electronic,
    /// Single CM mode.
    Cm(usize),
    /// Single relative mode.
    Rel(usize),
    /// CM ⊗ relative.
    Motional(BasisDescriptor),
    /// Full electronic ⊗ CM ⊗ relative space.
    Vibronic(BasisDescriptor),
    /// Anything else (test matrices, sub-blocks).
    Generic(usize),
}

impl Factor {
    pub fn dim(&self) -> usize {
        match *self {
            Factor::Electronic => 4,
            Factor::Cm(n) | Factor::Rel(n) | Factor::Generic(n) => n,
            Factor::Motional(b) => b.motional_dim(),
            Factor::Vibronic(b) => b.dim(),
        }
    }

    fn kron(self, other: Factor) -> Factor {
        match (self, other) {
            (Factor::Cm(n), Factor::Rel(m)) => Factor::Motional(BasisDescriptor::new(n, m)),
            (Factor::Electronic, Factor::Motional(b)) => Factor::Vibronic(b),
            (a, b) => Factor::Generic(a.dim() * b.dim()),
        }
    }
}

/// Dense complex square matrix tagged with its factor. `hermitian` records
/// whether `max |M - M†| < HERMITIAN_TOL` held at construction.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    matrix: Array2<C64>,
    factor: Factor,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(matrix: Array2<C64>, factor: Factor) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch { expected: rows, found: cols });
        }
        if rows != factor.dim() {
            return Err(Error::DimensionMismatch { expected: factor.dim(), found: rows });
        }
        Ok(Self::tagged(matrix, factor))
    }

    // callers guarantee matching dimensions
    fn tagged(matrix: Array2<C64>, factor: Factor) -> Self {
        let hermitian = hermiticity_error(&matrix) < HERMITIAN_TOL;
        Self { matrix, factor, hermitian }
    }

    pub fn zeros(factor: Factor) -> Self {
        let d = factor.dim();
        Self::tagged(Array2::zeros((d, d)), factor)
    }

    pub fn identity(factor: Factor) -> Self {
        let d = factor.dim();
        Self::tagged(Array2::eye(d), factor)
    }

    pub fn from_diagonal(diag: &[C64], factor: Factor) -> Result<Self> {
        let d = factor.dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: diag.len() });
        }
        let mut m = Array2::zeros((d, d));
        for (i, &v) in diag.iter().enumerate() {
            m[[i, i]] = v;
        }
        Ok(Self::tagged(m, factor))
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[[row, col]]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.matrix.diag().to_vec()
    }

    pub fn adjoint(&self) -> Self {
        Self::tagged(self.matrix.t().mapv(|z| z.conj()), self.factor)
    }

    pub fn dot(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator product across different dimensions");
        Self::tagged(self.matrix.dot(&other.matrix), self.factor)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::tagged(kron(&self.matrix, &other.matrix), self.factor.kron(other.factor))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::tagged(self.matrix.mapv(|z| z * c), self.factor)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator sum across different dimensions");
        Self::tagged(&self.matrix + &other.matrix, self.factor)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator difference across different dimensions");
        Self::tagged(&self.matrix - &other.matrix, self.factor)
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Self) -> Self {
        self.dot(other).sub(&other.dot(self))
    }

    /// `self + self†`
    pub fn plus_adjoint(&self) -> Self {
        self.add(&self.adjoint())
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::identity(self.factor);
        for _ in 0..k {
            out = out.dot(self);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    /// Largest off-diagonal magnitude.
    pub fn off_diagonal_norm(&self) -> f64 {
        self.matrix.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, z)| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), self.dim());
        self.matrix.rows().into_iter().map(|row| row.iter().zip(psi).map(|(m, p)| m * p).sum()).collect()
    }
}

fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}
