//! Upper bounds on `T = Tr(A σ) / Tr(B σ)` over relaxations of the separable
//! and Schmidt-number-limited state sets, and the induced-witness minima
//! `min Tr(W σ)` they are equivalent to.
//!
//! States are described on a [`StateSpace`]: a product of local isometries
//! `V_A ⊗ V_B` into the four-qubit space. Compressing onto the subspace the
//! witness actually sees is a local filter, so it keeps PPT states PPT and
//! never raises the Schmidt number. On the full space, states in the kernel of
//! `B` carry trace without contributing to either `A` or `B`, which makes
//! normalized minima degenerate and dilutes trace-relative negativity bounds.
//!
//! The Schmidt-number relaxation asks that `N(F σ F†) ≤ (k-1)/2 · Tr(F σ F†)`
//! for a list of local filters `F = F_A(t) ⊗ F_B(t)`, with
//! `F(t) = Π_sym + t Π_anti` built from the swap-symmetric and antisymmetric
//! parts of each party's local space. `t = 1` is the plain negativity bound.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use super::sdp::{self, SdpError, SdpOptions, SdpProblem, SdpSolution, SdpStatus, SparseHermitian};
use crate::qstate::{self, ComplexMatrix};
use crate::witness::{self, SettingsPair};

/// Filter parameters used for the Schmidt-number relaxation by default.
pub const DEFAULT_FILTERS: [f64; 4] = [1.0, 0.5, 0.65, 0.8];

/// Plain negativity bound, no filtering.
pub const NEGATIVITY_ONLY: [f64; 1] = [1.0];

const BISECTION_LOW: f64 = 2.0;
const BISECTION_HIGH: f64 = 4.0;
const BISECTION_MAX_STEPS: usize = 40;
const BISECTION_WIDTH: f64 = 1e-6;
const CONSISTENCY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("solver finished with status {status:?} (gap {gap:e}, best bound {bound})")]
    SolverFailure { status: SdpStatus, gap: f64, bound: f64 },
    #[error("post-hoc check failed: {0}")]
    Validation(String),
    #[error("bisection interval [{low}, {high}] does not bracket the bound")]
    NonBracketing { low: f64, high: f64 },
    #[error("fractional SDP gives {fractional} but bisection gives {bisection}")]
    Inconsistent { fractional: f64, bisection: f64 },
    #[error("Schmidt number must be at least 1")]
    InvalidSchmidtNumber,
    #[error("operator has dimension {found}, expected {expected}")]
    Dimension { found: usize, expected: usize },
}

/// The constrained state set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSet {
    Ppt,
    SchmidtNumber(u32),
}

impl StateSet {
    pub fn label(&self) -> String {
        match self {
            StateSet::Ppt => "ppt".to_string(),
            StateSet::SchmidtNumber(k) => format!("schmidt_{k}"),
        }
    }
}

/// A local subspace per party, each basis vector tagged with its swap parity.
#[derive(Debug, Clone)]
pub struct StateSpace {
    basis_a: ComplexMatrix,
    basis_b: ComplexMatrix,
    symmetric_a: Vec<bool>,
    symmetric_b: Vec<bool>,
}

/// Swap of the two qubits held by one party.
fn swap() -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(4, 4);
    for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        s[(r, c)] = Complex64::new(1.0, 0.0);
    }
    s
}

/// Orthonormal basis of the range of `proj ∘ (1 ± swap)/2`, split by parity.
fn parity_basis(support: &ComplexMatrix) -> (ComplexMatrix, Vec<bool>) {
    let s = swap();
    let id = qstate::identity(4);
    let half = Complex64::new(0.5, 0.0);
    let mut columns = Vec::new();
    let mut parity = Vec::new();
    for symmetric in [true, false] {
        let sign = if symmetric { 1.0 } else { -1.0 };
        let p = (&id + &s * Complex64::new(sign, 0.0)) * half;
        let restricted = &p * support * &p;
        let (values, vectors) = qstate::hermitian_eigen(&restricted);
        for (k, v) in values.iter().enumerate() {
            if *v > 0.5 {
                columns.push(vectors.column(k).into_owned());
                parity.push(symmetric);
            }
        }
    }
    (ComplexMatrix::from_columns(&columns), parity)
}

fn range_projector(m: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = qstate::hermitian_eigen(m);
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut p = ComplexMatrix::zeros(m.nrows(), m.ncols());
    for (k, v) in values.iter().enumerate() {
        if *v > 1e-9 * scale {
            let col = vectors.column(k);
            p += col * col.adjoint();
        }
    }
    p
}

impl StateSpace {
    /// The whole four-qubit space, written in the swap eigenbasis of each
    /// party.
    pub fn full() -> Self {
        let (basis, parity) = parity_basis(&qstate::identity(4));
        Self { basis_a: basis.clone(), basis_b: basis, symmetric_a: parity.clone(), symmetric_b: parity }
    }

    /// The product of the local supports of the witness terms: for party A
    /// the range of `sum_{x,a} P_a(v_x) ⊗ P_-a(v_x)`, likewise for B.
    pub fn detected(settings: &SettingsPair) -> Self {
        let local = |dirs: &[qstate::BlochVector; 2]| {
            let mut sum = ComplexMatrix::zeros(4, 4);
            for v in dirs {
                for a in qstate::Outcome::BOTH {
                    sum += qstate::tensor(&qstate::projector(v, a), &qstate::projector(v, a.flip()));
                }
            }
            parity_basis(&range_projector(&sum))
        };
        let (basis_a, symmetric_a) = local(&settings.alice);
        let (basis_b, symmetric_b) = local(&settings.bob);
        Self { basis_a, basis_b, symmetric_a, symmetric_b }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.basis_a.ncols(), self.basis_b.ncols())
    }

    pub fn dim(&self) -> usize {
        self.basis_a.ncols() * self.basis_b.ncols()
    }

    /// `V = V_A ⊗ V_B`, a `16 × dim` isometry.
    pub fn isometry(&self) -> ComplexMatrix {
        qstate::tensor(&self.basis_a, &self.basis_b)
    }

    /// `V† O V` for a four-qubit operator.
    pub fn compress(&self, op: &ComplexMatrix) -> Result<ComplexMatrix, BoundError> {
        if op.nrows() != 16 || op.ncols() != 16 {
            return Err(BoundError::Dimension { found: op.nrows(), expected: 16 });
        }
        let v = self.isometry();
        let mut out = v.adjoint() * op * &v;
        hermitize(&mut out);
        Ok(out)
    }

    /// `V σ V†`.
    pub fn embed(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        let v = self.isometry();
        &v * sigma * v.adjoint()
    }

    /// Diagonal of `F_A(t) ⊗ F_B(t)` in this space's basis.
    pub fn filter(&self, t: f64) -> Vec<f64> {
        let fa: Vec<f64> = self.symmetric_a.iter().map(|&s| if s { 1.0 } else { t }).collect();
        let fb: Vec<f64> = self.symmetric_b.iter().map(|&s| if s { 1.0 } else { t }).collect();
        fa.iter().flat_map(|x| fb.iter().map(move |y| x * y)).collect()
    }

    /// Partial transpose over party A in this space's basis.
    pub fn partial_transpose(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let (da, db) = self.dims();
        qstate::partial_transpose_matrix(m, &[da, db], &[0]).expect("dimensions match the space")
    }

    /// Largest negativity any state on this space can have.
    pub fn max_negativity(&self) -> f64 {
        let (da, db) = self.dims();
        (da.min(db) as f64 - 1.0) / 2.0
    }
}

fn hermitize(m: &mut ComplexMatrix) {
    let h = (&*m + m.adjoint()) * Complex64::new(0.5, 0.0);
    *m = h;
}

/// Result of one bound computation.
#[derive(Debug, Clone, Serialize)]
pub struct SdpBound {
    /// The certified side: the dual value for minimizations, and the negated
    /// dual value for ratio maximizations.
    pub value: f64,
    /// Objective at the returned primal point, in the same orientation.
    pub attained: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    #[serde(skip)]
    pub state: ComplexMatrix,
}

/// Builds the constraint rows shared by the normalized minimization and the
/// ratio maximization. `sigma` is block 0. `normalizer` is the operator
/// whose expectation is fixed to one.
fn build_problem(
    space: &StateSpace,
    set: StateSet,
    filters: &[f64],
    objective: ComplexMatrix,
    normalizer: &ComplexMatrix,
) -> Result<SdpProblem, BoundError> {
    let d = space.dim();
    let mut p = SdpProblem::new(vec![d]);
    p.objective[0] = objective;
    p.add_constraint(vec![(0, SparseHermitian::from_dense(normalizer)?)], 1.0);

    let basis = sdp::hermitian_basis(d);
    match set {
        StateSet::Ppt | StateSet::SchmidtNumber(1) => {
            let plus = p.add_block(d);
            for h in &basis {
                let pt = space.partial_transpose(&h.to_dense());
                p.add_constraint(
                    vec![(0, SparseHermitian::from_dense(&pt)?), (plus, scaled(h, -1.0))],
                    0.0,
                );
            }
        }
        StateSet::SchmidtNumber(0) => return Err(BoundError::InvalidSchmidtNumber),
        StateSet::SchmidtNumber(k) => {
            let c = (k as f64 - 1.0) / 2.0;
            if c < space.max_negativity() {
                for &t in filters {
                    let f = space.filter(t);
                    let plus = p.add_block(d);
                    let minus = p.add_block(d);
                    let slack = p.add_block(1);
                    for h in &basis {
                        // Re Tr(H (FσF)^Γ) = Re Tr(F H^Γ F σ)
                        let pt = space.partial_transpose(&h.to_dense());
                        let coeff = ComplexMatrix::from_fn(d, d, |r, col| pt[(r, col)] * f[r] * f[col]);
                        p.add_constraint(
                            vec![
                                (0, SparseHermitian::from_dense(&coeff)?),
                                (plus, scaled(h, -1.0)),
                                (minus, h.clone()),
                            ],
                            0.0,
                        );
                    }
                    // Tr M- - c Tr(F² σ) + s = 0
                    let f2 = ComplexMatrix::from_fn(d, d, |r, col| {
                        if r == col { Complex64::new(-c * f[r] * f[r], 0.0) } else { Complex64::new(0.0, 0.0) }
                    });
                    p.add_constraint(
                        vec![
                            (0, SparseHermitian::from_dense(&f2)?),
                            (minus, SparseHermitian::from_dense(&qstate::identity(d))?),
                            (slack, SparseHermitian::diagonal(1, 0, 1.0)),
                        ],
                        0.0,
                    );
                }
            }
        }
    }
    Ok(p)
}

fn scaled(h: &SparseHermitian, s: f64) -> SparseHermitian {
    SparseHermitian::from_dense(&(h.to_dense() * Complex64::new(s, 0.0))).expect("scaled Hermitian")
}

fn validate(solution: &SdpSolution) -> Result<(), BoundError> {
    if solution.min_primal_eigenvalue < -1e-8 {
        return Err(BoundError::Validation(format!(
            "primal block eigenvalue {:e} below -1e-8",
            solution.min_primal_eigenvalue
        )));
    }
    if solution.primal_residual > 1e-8 {
        return Err(BoundError::Validation(format!("primal residual {:e} above 1e-8", solution.primal_residual)));
    }
    let scale = 1.0 + solution.primal_value.abs();
    if solution.dual_value > solution.primal_value + 1e-7 * scale {
        return Err(BoundError::Validation(format!(
            "weak duality violated: dual {} > primal {}",
            solution.dual_value, solution.primal_value
        )));
    }
    Ok(())
}

fn run(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution, BoundError> {
    let solution = sdp::solve_sdp_with(problem, options)?;
    match solution.status {
        SdpStatus::Optimal | SdpStatus::SignDecided => {
            if solution.status == SdpStatus::Optimal {
                validate(&solution)?;
            }
            Ok(solution)
        }
        status => Err(BoundError::SolverFailure { status, gap: solution.gap, bound: solution.dual_value }),
    }
}

/// `min Tr(W σ)` over normalized states of `set` on `space`.
pub fn e_min(w: &ComplexMatrix, set: StateSet, space: &StateSpace, filters: &[f64]) -> Result<SdpBound, BoundError> {
    let wc = space.compress(w)?;
    let id = qstate::identity(space.dim());
    let problem = build_problem(space, set, filters, wc, &id)?;
    let s = run(&problem, &SdpOptions::default())?;
    Ok(SdpBound {
        value: s.dual_value,
        attained: s.primal_value,
        gap: s.gap,
        iterations: s.iterations,
        status: s.status,
        state: s.primal_blocks[0].clone(),
    })
}

/// `min Tr(W σ)` over PPT states on `space`.
pub fn e_ppt(w: &ComplexMatrix, space: &StateSpace) -> Result<SdpBound, BoundError> {
    e_min(w, StateSet::Ppt, space, &[])
}

/// `min Tr(W σ)` over states whose filtered negativities are at most
/// `(k-1)/2`. `k = 1` is the PPT problem.
pub fn e_schmidt(w: &ComplexMatrix, k: u32, space: &StateSpace, filters: &[f64]) -> Result<SdpBound, BoundError> {
    match k {
        0 => Err(BoundError::InvalidSchmidtNumber),
        1 => e_ppt(w, space),
        k => e_min(w, StateSet::SchmidtNumber(k), space, filters),
    }
}

/// `max Tr(A σ) / Tr(B σ)` as the cone-scaled program
/// `max Tr(A σ̃)` subject to `Tr(B σ̃) = 1`.
pub fn max_ratio_fractional(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    set: StateSet,
    space: &StateSpace,
    filters: &[f64],
) -> Result<SdpBound, BoundError> {
    let ac = space.compress(a)?;
    let bc = space.compress(b)?;
    let problem = build_problem(space, set, filters, -ac, &bc)?;
    let s = run(&problem, &SdpOptions::default())?;
    Ok(SdpBound {
        value: -s.dual_value,
        attained: -s.primal_value,
        gap: s.gap,
        iterations: s.iterations,
        status: s.status,
        state: s.primal_blocks[0].clone(),
    })
}

/// Outcome of the bisection cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct BisectionResult {
    pub low: f64,
    pub high: f64,
    pub steps: usize,
    pub solver_iterations: usize,
}

/// Is `min Tr(W(T) σ) ≥ 0` over the normalized set? Returns the answer and
/// the number of solver iterations spent.
fn witness_nonnegative(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    t: f64,
    set: StateSet,
    space: &StateSpace,
    filters: &[f64],
) -> Result<(bool, usize), BoundError> {
    let w = space.compress(&witness::induced_witness(a, b, t))?;
    let problem = build_problem(space, set, filters, w, &qstate::identity(space.dim()))?;
    let options = SdpOptions { sign_only: true, ..SdpOptions::default() };
    let s = run(&problem, &options)?;
    let tol = options.gap_tolerance;
    let nonnegative = match s.status {
        SdpStatus::SignDecided => s.dual_value > tol,
        _ => 0.5 * (s.primal_value + s.dual_value) >= -tol,
    };
    Ok((nonnegative, s.iterations))
}

/// Finds the smallest `T` in `[2, 4]` with `min Tr(W(T) σ) ≥ 0`.
pub fn max_ratio_bisection(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    set: StateSet,
    space: &StateSpace,
    filters: &[f64],
) -> Result<BisectionResult, BoundError> {
    let (mut low, mut high) = (BISECTION_LOW, BISECTION_HIGH);
    let (low_ok, i1) = witness_nonnegative(a, b, low, set, space, filters)?;
    let (high_ok, i2) = witness_nonnegative(a, b, high, set, space, filters)?;
    if low_ok || !high_ok {
        return Err(BoundError::NonBracketing { low, high });
    }
    let mut solver_iterations = i1 + i2;
    let mut steps = 0;
    while steps < BISECTION_MAX_STEPS && high - low > BISECTION_WIDTH {
        let mid = 0.5 * (low + high);
        let (ok, it) = witness_nonnegative(a, b, mid, set, space, filters)?;
        solver_iterations += it;
        if ok {
            high = mid;
        } else {
            low = mid;
        }
        steps += 1;
    }
    Ok(BisectionResult { low, high, steps, solver_iterations })
}

/// A bound computed by both routes.
#[derive(Debug, Clone, Serialize)]
pub struct RatioBound {
    pub set: StateSet,
    pub filters: Vec<f64>,
    pub fractional: SdpBound,
    pub bisection: BisectionResult,
}

/// `max Tr(Aσ)/Tr(Bσ)` over `set` for the default settings on the detected
/// space, computed as a fractional SDP and cross-checked by bisection.
pub fn max_ratio_bound(set: StateSet, filters: &[f64]) -> Result<RatioBound, BoundError> {
    let settings = SettingsPair::default();
    let (a, b) = witness::witness_operators(&settings);
    max_ratio_bound_for(&a, &b, set, &StateSpace::detected(&settings), filters)
}

pub fn max_ratio_bound_for(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    set: StateSet,
    space: &StateSpace,
    filters: &[f64],
) -> Result<RatioBound, BoundError> {
    let (fractional, bisection) = rayon::join(
        || max_ratio_fractional(a, b, set, space, filters),
        || max_ratio_bisection(a, b, set, space, filters),
    );
    let fractional = fractional?;
    let bisection = bisection?;
    if (fractional.value - bisection.high).abs() > CONSISTENCY_TOLERANCE {
        return Err(BoundError::Inconsistent { fractional: fractional.value, bisection: bisection.high });
    }
    Ok(RatioBound { set, filters: filters.to_vec(), fractional, bisection })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::{T_ONE_PAIR, T_PPT, T_TWO_BELL_PAIRS};

    fn operators() -> (ComplexMatrix, ComplexMatrix, StateSpace) {
        let s = SettingsPair::default();
        let (a, b) = witness::witness_operators(&s);
        (a, b, StateSpace::detected(&s))
    }

    #[test]
    fn detected_space_holds_the_witness() {
        let (a, b, space) = operators();
        assert_eq!(space.dims(), (3, 3));
        let v = space.isometry();
        let proj = &v * v.adjoint();
        for op in [&a, &b] {
            let back = &proj * op * &proj;
            assert!((back - op).iter().all(|z| z.norm() < 1e-12));
        }
        // B is invertible on the detected space.
        let bc = space.compress(&b).unwrap();
        assert!(qstate::min_eigenvalue(&bc).unwrap() > 1e-3);
        // one antisymmetric direction per party (the singlet)
        assert_eq!(space.filter(0.0).iter().filter(|&&f| f == 0.0).count(), 5);
    }

    #[test]
    fn e_ppt_of_identity() {
        let (_, _, space) = operators();
        let r = e_ppt(&qstate::identity(16), &space).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        let r = e_ppt(&qstate::identity(16), &StateSpace::full()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn e_ppt_boundary_and_interior() {
        let (a, b, space) = operators();
        let at = e_ppt(&witness::induced_witness(&a, &b, T_PPT), &space).unwrap();
        assert!(at.value.abs() < 2e-6, "{}", at.value);
        let above = e_ppt(&witness::induced_witness(&a, &b, 3.0), &space).unwrap();
        assert!(above.value > 1e-3);
        let below = e_ppt(&witness::induced_witness(&a, &b, 2.5), &space).unwrap();
        assert!(below.value < -1e-3);
    }

    #[test]
    fn e_schmidt_examples() {
        let (a, b, space) = operators();
        let w = witness::induced_witness(&a, &b, T_PPT);
        let k1 = e_schmidt(&w, 1, &space, &DEFAULT_FILTERS).unwrap();
        assert!(k1.value.abs() < 2e-6);
        let w = witness::induced_witness(&a, &b, T_TWO_BELL_PAIRS);
        let k4 = e_schmidt(&w, 4, &space, &DEFAULT_FILTERS).unwrap();
        assert!(k4.value <= 1e-7);
        let w = witness::induced_witness(&a, &b, T_ONE_PAIR);
        let k2 = e_schmidt(&w, 2, &space, &DEFAULT_FILTERS).unwrap();
        // The relaxation is slightly looser than the exact one-pair set.
        assert!(k2.value.abs() < 5e-4, "{}", k2.value);
        assert!(k2.value <= 1e-7);
    }

    #[test]
    fn e_schmidt_non_increasing_in_k() {
        let (a, b, space) = operators();
        let w = witness::induced_witness(&a, &b, 3.2);
        let values: Vec<f64> = (1..=4)
            .map(|k| e_schmidt(&w, k, &space, &DEFAULT_FILTERS).unwrap().value)
            .collect();
        for pair in values.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6, "{values:?}");
        }
    }

    #[test]
    fn fractional_bounds() {
        let (a, b, space) = operators();
        let ppt = max_ratio_fractional(&a, &b, StateSet::Ppt, &space, &[]).unwrap();
        assert!((ppt.value - T_PPT).abs() < 1e-4, "{}", ppt.value);
        let k2 = max_ratio_fractional(&a, &b, StateSet::SchmidtNumber(2), &space, &DEFAULT_FILTERS).unwrap();
        assert!((k2.value - T_ONE_PAIR).abs() < 1e-3, "{}", k2.value);
        assert!(k2.value >= T_ONE_PAIR - 1e-6);
        let k4 = max_ratio_fractional(&a, &b, StateSet::SchmidtNumber(4), &space, &DEFAULT_FILTERS).unwrap();
        assert!(k4.value >= T_TWO_BELL_PAIRS - 1e-6);
    }

    #[test]
    fn plain_negativity_is_looser() {
        let (a, b, space) = operators();
        let plain = max_ratio_fractional(&a, &b, StateSet::SchmidtNumber(2), &space, &NEGATIVITY_ONLY).unwrap();
        let filtered =
            max_ratio_fractional(&a, &b, StateSet::SchmidtNumber(2), &space, &DEFAULT_FILTERS).unwrap();
        assert!(plain.value > filtered.value + 1e-2, "{} vs {}", plain.value, filtered.value);
        assert!((plain.value - 3.5697).abs() < 1e-3, "{}", plain.value);
    }

    #[test]
    fn bisection_agrees_for_ppt() {
        let r = max_ratio_bound(StateSet::Ppt, &[]).unwrap();
        assert!((r.bisection.high - T_PPT).abs() < 1e-4);
        assert!(r.bisection.high - r.bisection.low <= 1e-6);
    }
}
