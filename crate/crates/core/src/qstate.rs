//! Dense linear algebra for small multi-qubit states.
//!
//! Matrices are `nalgebra` complex matrices. Subsystems are laid out with the
//! first factor as the most significant index, so `tensor(a, b)` places `a`'s
//! indices on the slow axis. For the four-photon states used throughout the
//! crate the global order is `(signal 1, signal 2, idler 1, idler 2)` and
//! party A is the pair of signals.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::tol;

pub type ComplexMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QStateError {
    #[error("Bloch vector has norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("matrix is not Hermitian (max |M - M^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("subsystem dimensions {dims:?} do not multiply to matrix dimension {dim}")]
    DimensionMismatch { dims: Vec<usize>, dim: usize },
    #[error("bipartition index {index} out of range for {count} subsystems")]
    BipartitionOutOfRange { index: usize, count: usize },
    #[error("trace is {trace}, expected 1")]
    NotUnitTrace { trace: f64 },
    #[error("minimum eigenvalue {min_eigenvalue:e} is negative")]
    NotPositive { min_eigenvalue: f64 },
    #[error("visibility {0} outside [0, 1]")]
    VisibilityOutOfRange(f64),
    #[error("invalid subsystem permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
}

/// A unit vector on the Bloch sphere. Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, QStateError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > tol::ALGEBRAIC {
            return Err(QStateError::NotNormalized { norm });
        }
        Ok(Self { x, y, z })
    }

    /// Rescales an arbitrary non-zero direction onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self, QStateError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QStateError::NotNormalized { norm });
        }
        Ok(Self { x: x / norm, y: y / norm, z: z / norm })
    }

    pub fn x_axis() -> Self {
        Self { x: 1.0, y: 0.0, z: 0.0 }
    }

    pub fn y_axis() -> Self {
        Self { x: 0.0, y: 1.0, z: 0.0 }
    }

    pub fn z_axis() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = QStateError;

    fn try_from([x, y, z]: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(x, y, z)
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        v.components()
    }
}

/// Measurement outcome of a two-outcome qubit analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn from_sign(sign: i32) -> Option<Outcome> {
        match sign {
            1 => Some(Outcome::Plus),
            -1 => Some(Outcome::Minus),
            _ => None,
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

/// Which side of the registered bipartition an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    A,
    B,
}

/// The four two-qubit Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub fn vector(self) -> [Complex64; 4] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            BellState::PhiPlus => [h, ZERO, ZERO, h],
            BellState::PhiMinus => [h, ZERO, ZERO, -h],
            BellState::PsiPlus => [ZERO, h, h, ZERO],
            BellState::PsiMinus => [ZERO, h, -h, ZERO],
        }
    }

    pub fn projector(self) -> ComplexMatrix {
        let v = self.vector();
        ComplexMatrix::from_fn(4, 4, |r, c| v[r] * v[c].conj())
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix over registered
/// subsystems, together with the subsystems forming party A.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
    party_a: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>, party_a: Vec<usize>) -> Result<Self, QStateError> {
        check_square(&matrix)?;
        check_dims(&dims, matrix.nrows())?;
        for &i in &party_a {
            if i >= dims.len() {
                return Err(QStateError::BipartitionOutOfRange { index: i, count: dims.len() });
            }
        }
        let deviation = hermiticity_deviation(&matrix);
        if deviation > tol::ALGEBRAIC {
            return Err(QStateError::NotHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > tol::SPECTRAL {
            return Err(QStateError::NotUnitTrace { trace });
        }
        let min_eigenvalue = min_eigenvalue(&matrix)?;
        if min_eigenvalue < -tol::SPECTRAL {
            return Err(QStateError::NotPositive { min_eigenvalue });
        }
        Ok(Self { matrix, dims, party_a })
    }

    /// Two-qubit state split as qubit 0 | qubit 1.
    pub fn two_qubit(matrix: ComplexMatrix) -> Result<Self, QStateError> {
        Self::new(matrix, vec![2, 2], vec![0])
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn party_a(&self) -> &[usize] {
        &self.party_a
    }

    pub fn party_b(&self) -> Vec<usize> {
        (0..self.dims.len()).filter(|i| !self.party_a.contains(i)).collect()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Tensor product; `other`'s subsystems are appended and its party A is
    /// merged into this state's party A.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let offset = self.dims.len();
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut party_a = self.party_a.clone();
        party_a.extend(other.party_a.iter().map(|i| i + offset));
        DensityMatrix { matrix: tensor(&self.matrix, &other.matrix), dims, party_a }
    }

    /// Reorders subsystems so that new subsystem `k` is old subsystem
    /// `perm[k]`. The bipartition follows the subsystems.
    pub fn permuted(&self, perm: &[usize]) -> Result<DensityMatrix, QStateError> {
        let matrix = permute_subsystems(&self.matrix, &self.dims, perm)?;
        let dims = perm.iter().map(|&p| self.dims[p]).collect();
        let mut party_a: Vec<usize> = (0..perm.len()).filter(|&k| self.party_a.contains(&perm[k])).collect();
        party_a.sort_unstable();
        Ok(DensityMatrix { matrix, dims, party_a })
    }

    pub fn with_party_a(mut self, party_a: Vec<usize>) -> Result<Self, QStateError> {
        for &i in &party_a {
            if i >= self.dims.len() {
                return Err(QStateError::BipartitionOutOfRange { index: i, count: self.dims.len() });
            }
        }
        self.party_a = party_a;
        Ok(self)
    }

    pub fn partial_transpose(&self, party: Party) -> ComplexMatrix {
        let subsystems = match party {
            Party::A => self.party_a.clone(),
            Party::B => self.party_b(),
        };
        partial_transpose_matrix(&self.matrix, &self.dims, &subsystems)
            .expect("subsystems validated at construction")
    }

    /// Expectation value Re Tr(O rho).
    pub fn expectation(&self, observable: &ComplexMatrix) -> f64 {
        trace_product(observable, &self.matrix).re
    }
}

fn check_square(m: &ComplexMatrix) -> Result<(), QStateError> {
    if m.nrows() != m.ncols() {
        return Err(QStateError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

fn check_dims(dims: &[usize], dim: usize) -> Result<(), QStateError> {
    if dims.iter().product::<usize>() != dim || dims.contains(&0) {
        return Err(QStateError::DimensionMismatch { dims: dims.to_vec(), dim });
    }
    Ok(())
}

/// Largest elementwise magnitude of `M - M^dagger`.
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Kronecker product, `a` on the most significant axes.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(ComplexMatrix::identity(1, 1), |acc, f| tensor(&acc, f))
}

/// Tr(A B) without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let mut acc = ZERO;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `v_x σ_x + v_y σ_y + v_z σ_z`.
pub fn pauli_along(v: &BlochVector) -> ComplexMatrix {
    let [x, y, z] = v.components();
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(z, 0.0),
            Complex64::new(x, -y),
            Complex64::new(x, y),
            Complex64::new(-z, 0.0),
        ],
    )
}

/// Rank-one projector `(1 + a v·σ)/2` onto the outcome `a` along `v`.
pub fn projector(v: &BlochVector, outcome: Outcome) -> ComplexMatrix {
    let half = Complex64::new(0.5, 0.0);
    (identity(2) + pauli_along(v) * Complex64::new(outcome.sign(), 0.0)) * half
}

/// Transposes the indices of the listed subsystems only.
pub fn partial_transpose_matrix(
    m: &ComplexMatrix,
    dims: &[usize],
    subsystems: &[usize],
) -> Result<ComplexMatrix, QStateError> {
    check_square(m)?;
    check_dims(dims, m.nrows())?;
    for &s in subsystems {
        if s >= dims.len() {
            return Err(QStateError::BipartitionOutOfRange { index: s, count: dims.len() });
        }
    }
    let n = m.nrows();
    let strides = strides(dims);
    let mut out = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let (mut rr, mut cc) = (r, c);
            for &s in subsystems {
                let dr = (r / strides[s]) % dims[s];
                let dc = (c / strides[s]) % dims[s];
                rr = rr - dr * strides[s] + dc * strides[s];
                cc = cc - dc * strides[s] + dr * strides[s];
            }
            out[(rr, cc)] = m[(r, c)];
        }
    }
    Ok(out)
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// Reorders tensor factors: new factor `k` is old factor `perm[k]`.
pub fn permute_subsystems(m: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix, QStateError> {
    check_square(m)?;
    check_dims(dims, m.nrows())?;
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() || perm.iter().any(|&p| p >= dims.len() || std::mem::replace(&mut seen[p], true)) {
        return Err(QStateError::InvalidPermutation(perm.to_vec()));
    }
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_strides = strides(&new_dims);
    let n = m.nrows();
    let map = |old: usize| -> usize {
        perm.iter()
            .enumerate()
            .map(|(k, &p)| ((old / old_strides[p]) % dims[p]) * new_strides[k])
            .sum()
    };
    let index: Vec<usize> = (0..n).map(map).collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(index[r], index[c])] = m[(r, c)];
        }
    }
    Ok(out)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>, QStateError> {
    check_square(m)?;
    let scale = m.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
    let deviation = hermiticity_deviation(m);
    if deviation > tol::ALGEBRAIC * scale {
        return Err(QStateError::NotHermitian { deviation });
    }
    let mut values: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigen decomposition of a Hermitian matrix with ascending eigenvalues.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64, QStateError> {
    Ok(hermitian_eigenvalues(m)?.first().copied().unwrap_or(0.0))
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose
/// over party A.
pub fn negativity(rho: &DensityMatrix) -> f64 {
    negativity_of(&rho.partial_transpose(Party::A))
}

/// Sum of negative-eigenvalue magnitudes of an already transposed operator.
pub fn negativity_of(transposed: &ComplexMatrix) -> f64 {
    let values = hermitian_eigenvalues(transposed).expect("partial transpose of a Hermitian matrix is Hermitian");
    values.iter().filter(|&&v| v < 0.0).fold(0.0, |acc, v| acc - v)
}

/// `V |φ+⟩⟨φ+| + (1 - V) 1/4`.
pub fn werner_state(visibility: f64) -> Result<DensityMatrix, QStateError> {
    werner_state_of(BellState::PhiPlus, visibility)
}

/// Werner state with an arbitrary Bell component.
pub fn werner_state_of(bell: BellState, visibility: f64) -> Result<DensityMatrix, QStateError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(QStateError::VisibilityOutOfRange(visibility));
    }
    let v = Complex64::new(visibility, 0.0);
    let noise = Complex64::new((1.0 - visibility) / 4.0, 0.0);
    let m = bell.projector() * v + identity(4) * noise;
    DensityMatrix::two_qubit(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    fn ket_bra(n: usize, i: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        m[(i, i)] = ONE;
        m
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        assert_eq!(tensor(&identity(2), &identity(2)), identity(4));
    }

    #[test]
    fn tensor_basis_projectors() {
        let out = tensor(&ket_bra(2, 0), &ket_bra(2, 1));
        assert_eq!(out, ket_bra(4, 1));
    }

    #[test]
    fn two_bell_pairs_tensor_is_rank_one() {
        let phi = BellState::PhiPlus.projector();
        let both = tensor(&phi, &phi);
        assert_eq!(both.nrows(), 16);
        assert!((both.trace().re - 1.0).abs() < 1e-12);
        // rank via eigenvalue count, and idempotence via dense multiply
        let eig = hermitian_eigenvalues(&both).unwrap();
        assert_eq!(eig.iter().filter(|&&v| v > 1e-10).count(), 1);
        assert!(max_abs_diff(&(&both * &both), &both) < 1e-12);
    }

    #[test]
    fn pauli_along_axes() {
        assert_eq!(pauli_along(&BlochVector::x_axis()), sigma_x());
        let y = pauli_along(&BlochVector::y_axis());
        assert_eq!(y[(0, 1)], -I);
        assert_eq!(y[(1, 0)], I);
        let diag = BlochVector::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0).unwrap();
        let m = pauli_along(&diag);
        let expected = (sigma_x() + sigma_y()) * Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(max_abs_diff(&m, &expected) < 1e-15);
        let eig = hermitian_eigenvalues(&m).unwrap();
        assert!((eig[0] + 1.0).abs() < 1e-12 && (eig[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unit_bloch_vector_rejected() {
        assert!(matches!(BlochVector::new(1.0, 1.0, 0.0), Err(QStateError::NotNormalized { .. })));
    }

    #[test]
    fn projector_examples() {
        assert_eq!(projector(&BlochVector::z_axis(), Outcome::Plus), ket_bra(2, 0));
        let px = projector(&BlochVector::x_axis(), Outcome::Plus);
        let half = Complex64::new(0.5, 0.0);
        assert!(max_abs_diff(&px, &ComplexMatrix::from_element(2, 2, half)) < 1e-15);
        let v = BlochVector::normalized(0.3, -0.4, 0.5).unwrap();
        let sum = projector(&v, Outcome::Plus) + projector(&v, Outcome::Minus);
        assert!(max_abs_diff(&sum, &identity(2)) < 1e-15);
    }

    #[test]
    fn bell_partial_transpose_spectrum() {
        let rho = werner_state(1.0).unwrap();
        let pt = rho.partial_transpose(Party::A);
        let eig = hermitian_eigenvalues(&pt).unwrap();
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (e, x) in eig.iter().zip(expected) {
            assert!((e - x).abs() < 1e-10);
        }
        assert!((min_eigenvalue(&pt).unwrap() + 0.5).abs() < 1e-10);
        assert!((negativity(&rho) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn product_state_transpose_is_local_transpose() {
        let a = projector(&BlochVector::normalized(0.2, 0.7, -0.1).unwrap(), Outcome::Plus);
        let b = projector(&BlochVector::normalized(-0.5, 0.1, 0.9).unwrap(), Outcome::Minus);
        let rho = DensityMatrix::two_qubit(tensor(&a, &b)).unwrap();
        let pt = rho.partial_transpose(Party::A);
        assert!(max_abs_diff(&pt, &tensor(&a.transpose(), &b)) < 1e-15);
        assert!(min_eigenvalue(&pt).unwrap() > -1e-12);
        assert!(negativity(&rho) < 1e-12);
    }

    #[test]
    fn two_bell_pairs_across_signal_idler_cut() {
        let w = werner_state(1.0).unwrap();
        // (s1, i1, s2, i2) -> (s1, s2, i1, i2)
        let both = w.tensor(&w).permuted(&[0, 2, 1, 3]).unwrap().with_party_a(vec![0, 1]).unwrap();
        assert!((negativity(&both) - 1.5).abs() < 1e-10);
    }

    #[test]
    fn werner_examples() {
        let mixed = werner_state(0.0).unwrap();
        assert!(max_abs_diff(mixed.matrix(), &(identity(4) * Complex64::new(0.25, 0.0))) < 1e-15);
        let pure = werner_state(1.0).unwrap();
        assert!(max_abs_diff(pure.matrix(), &BellState::PhiPlus.projector()) < 1e-15);
        let v = 0.912;
        let n = negativity(&werner_state(v).unwrap());
        assert!((n - (3.0 * v - 1.0) / 4.0).abs() < 1e-10);
        assert!((n - 0.434).abs() < 1e-3);
        assert!(matches!(werner_state(1.2), Err(QStateError::VisibilityOutOfRange(_))));
    }

    #[test]
    fn werner_ppt_threshold() {
        let below = werner_state(1.0 / 3.0 - 0.01).unwrap();
        let above = werner_state(1.0 / 3.0 + 0.01).unwrap();
        assert!(min_eigenvalue(&below.partial_transpose(Party::A)).unwrap() >= -1e-10);
        assert!(min_eigenvalue(&above.partial_transpose(Party::A)).unwrap() < -1e-10);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&identity(4)).unwrap() - 1.0).abs() < 1e-12);
        assert!((min_eigenvalue(&sigma_z()).unwrap() + 1.0).abs() < 1e-12);
        let mut bad = identity(2);
        bad[(0, 1)] = ONE;
        assert!(matches!(min_eigenvalue(&bad), Err(QStateError::NotHermitian { .. })));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(
            DensityMatrix::two_qubit(identity(4)),
            Err(QStateError::NotUnitTrace { .. })
        ));
        assert!(matches!(
            DensityMatrix::new(identity(4) * Complex64::new(0.25, 0.0), vec![2, 3], vec![0]),
            Err(QStateError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            DensityMatrix::new(identity(4) * Complex64::new(0.25, 0.0), vec![2, 2], vec![2]),
            Err(QStateError::BipartitionOutOfRange { .. })
        ));
        let mut neg = identity(2) * Complex64::new(0.5, 0.0);
        neg[(0, 1)] = Complex64::new(0.8, 0.0);
        neg[(1, 0)] = Complex64::new(0.8, 0.0);
        assert!(matches!(
            DensityMatrix::new(neg, vec![2], vec![0]),
            Err(QStateError::NotPositive { .. })
        ));
    }

    #[test]
    fn permutation_round_trip() {
        let w = werner_state_of(BellState::PsiMinus, 0.7).unwrap();
        let p = w.permuted(&[1, 0]).unwrap();
        let back = p.permuted(&[1, 0]).unwrap();
        assert!(max_abs_diff(back.matrix(), w.matrix()) < 1e-15);
        assert!(permute_subsystems(w.matrix(), &[2, 2], &[0, 0]).is_err());
    }
}
