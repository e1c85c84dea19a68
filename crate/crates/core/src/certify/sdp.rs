//! A small dense primal-dual interior-point solver for complex semidefinite
//! programs.
//!
//! Primal: minimize `sum_j Re Tr(C_j X_j)` subject to
//! `sum_j Re Tr(A_ij X_j) = b_i` and every `X_j ⪰ 0` (Hermitian).
//! Dual: maximize `b·y` subject to `Z_j = C_j - sum_i y_i A_ij ⪰ 0`.
//!
//! The iteration is an infeasible-start Mehrotra predictor-corrector with
//! Nesterov-Todd scaling. Blocks stay complex Hermitian throughout; the
//! Schur complement is real symmetric. Coefficient matrices are stored
//! sparsely since most constraints in this crate touch a handful of entries.

use nalgebra::{Cholesky, DMatrix, DVector, SVD};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::qstate::{self, ComplexMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("constraint {constraint} refers to block {block}, but there are only {blocks} blocks")]
    UnknownBlock { constraint: usize, block: usize, blocks: usize },
    #[error("coefficient of constraint {constraint} on block {block} has dimension {found}, expected {expected}")]
    BlockDimension { constraint: usize, block: usize, found: usize, expected: usize },
    #[error("objective block {block} has dimension {found}, expected {expected}")]
    ObjectiveDimension { block: usize, found: usize, expected: usize },
    #[error("coefficient matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("Schur complement is singular; constraints are likely linearly dependent")]
    SingularSchur,
}

/// Hermitian matrix stored as its nonzero entries, both triangles included.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseHermitian {
    pub fn from_dense(m: &ComplexMatrix) -> Result<Self, SdpError> {
        let scale = m.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
        let dev = qstate::hermiticity_deviation(m);
        if dev > 1e-12 * scale {
            return Err(SdpError::NotHermitian(dev));
        }
        let n = m.nrows();
        let mut entries = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = m[(r, c)];
                if v.norm() > 1e-15 * scale {
                    entries.push((r, c, v));
                }
            }
        }
        Ok(Self { dim: n, entries })
    }

    pub fn diagonal(dim: usize, index: usize, value: f64) -> Self {
        Self { dim, entries: vec![(index, index, Complex64::new(value, 0.0))] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// `Re Tr(self · x)`.
    pub fn inner(&self, x: &ComplexMatrix) -> f64 {
        self.entries.iter().map(|&(r, c, v)| (v * x[(c, r)]).re).sum()
    }

    fn add_scaled_to(&self, target: &mut ComplexMatrix, scale: f64) {
        for &(r, c, v) in &self.entries {
            target[(r, c)] += v * scale;
        }
    }

    /// `W · self · W` for Hermitian `W`.
    fn sandwich(&self, w: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n, n);
        for &(r, c, v) in &self.entries {
            for q in 0..n {
                let left = w[(q, r)] * v;
                if left == ZERO {
                    continue;
                }
                for p in 0..n {
                    out[(q, p)] += left * w[(c, p)];
                }
            }
        }
        out
    }
}

/// One linear equality `sum_j Re Tr(A_j X_j) = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, SparseHermitian)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<ComplexMatrix>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        let objective = blocks.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
        Self { blocks, objective, constraints: Vec::new() }
    }

    /// Appends a PSD block and returns its index.
    pub fn add_block(&mut self, dim: usize) -> usize {
        self.blocks.push(dim);
        self.objective.push(ComplexMatrix::zeros(dim, dim));
        self.blocks.len() - 1
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, SparseHermitian)>, rhs: f64) {
        self.constraints.push(Constraint { terms, rhs });
    }

    fn validate(&self) -> Result<(), SdpError> {
        for (j, (c, &n)) in self.objective.iter().zip(&self.blocks).enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return Err(SdpError::ObjectiveDimension { block: j, found: c.nrows(), expected: n });
            }
            let dev = qstate::hermiticity_deviation(c);
            if dev > 1e-12 * c.iter().fold(1.0_f64, |a, z| a.max(z.norm())) {
                return Err(SdpError::NotHermitian(dev));
            }
        }
        for (i, con) in self.constraints.iter().enumerate() {
            for (block, a) in &con.terms {
                let Some(&n) = self.blocks.get(*block) else {
                    return Err(SdpError::UnknownBlock { constraint: i, block: *block, blocks: self.blocks.len() });
                };
                if a.dim != n {
                    return Err(SdpError::BlockDimension { constraint: i, block: *block, found: a.dim, expected: n });
                }
            }
        }
        Ok(())
    }

    /// `sum_j Re Tr(A_ij X_j)` for every constraint.
    pub fn apply(&self, x: &[ComplexMatrix]) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints
                .iter()
                .map(|con| con.terms.iter().map(|(b, a)| a.inner(&x[*b])).sum::<f64>()),
        )
    }

    /// `sum_i y_i A_ij` for every block.
    pub fn adjoint(&self, y: &DVector<f64>) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> = self.blocks.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
        for (i, con) in self.constraints.iter().enumerate() {
            for (b, a) in &con.terms {
                a.add_scaled_to(&mut out[*b], y[i]);
            }
        }
        out
    }

    fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.rhs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    /// Stopped once the sign of the optimum was settled (see [`SdpOptions::sign_only`]).
    SignDecided,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub step_fraction: f64,
    /// Stop as soon as a feasible primal iterate with negative objective or a
    /// feasible dual iterate with positive objective has been found.
    pub sign_only: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gap_tolerance: 1e-7,
            feasibility_tolerance: 1e-9,
            step_fraction: 0.98,
            sign_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `primal_value - dual_value`.
    pub gap: f64,
    pub primal_blocks: Vec<ComplexMatrix>,
    pub dual_slack: Vec<ComplexMatrix>,
    pub y: DVector<f64>,
    pub iterations: usize,
    /// Largest absolute violation of `A(X) = b`.
    pub primal_residual: f64,
    /// Largest entry of `C - A*(y) - Z`.
    pub dual_residual: f64,
    /// Smallest eigenvalue over all primal blocks.
    pub min_primal_eigenvalue: f64,
}

impl SdpSolution {
    /// Relative gap test used for the `Optimal` status.
    pub fn gap_within(&self, tolerance: f64) -> bool {
        self.gap.abs() <= tolerance * (1.0 + self.primal_value.abs())
    }
}

struct Scaling {
    g: ComplexMatrix,
    w: ComplexMatrix,
    v: Vec<f64>,
}

fn hermitize(m: &mut ComplexMatrix) {
    let n = m.nrows();
    for r in 0..n {
        m[(r, r)].im = 0.0;
        for c in r + 1..n {
            let avg = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
            m[(r, c)] = avg;
            m[(c, r)] = avg.conj();
        }
    }
}

fn re_trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    qstate::trace_product(a, b).re
}

fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn psd_factor(m: &ComplexMatrix) -> ComplexMatrix {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return ch.unpack();
    }
    let (values, vectors) = qstate::hermitian_eigen(m);
    let n = m.nrows();
    let floor = values.last().copied().unwrap_or(1.0).abs() * 1e-30;
    ComplexMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * values[c].max(floor).sqrt())
}

/// Nesterov-Todd scaling `G` with `G^-1 X G^-* = G^* Z G = diag(v)`.
fn nt_scaling(x: &ComplexMatrix, z: &ComplexMatrix) -> Scaling {
    let l = psd_factor(x);
    let r = psd_factor(z);
    let svd = SVD::new(r.adjoint() * &l, false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let v: Vec<f64> = svd.singular_values.iter().map(|s| s.max(1e-300)).collect();
    let n = x.nrows();
    let right = v_t.adjoint();
    let g = &l * ComplexMatrix::from_fn(n, n, |row, col| right[(row, col)] / v[col].sqrt());
    let w = &g * g.adjoint();
    Scaling { g, w, v }
}

/// Largest `alpha` keeping `diag(v) + alpha d` PSD.
fn max_step(v: &[f64], d: &ComplexMatrix) -> f64 {
    let n = v.len();
    let s: Vec<f64> = v.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut m = ComplexMatrix::from_fn(n, n, |r, c| d[(r, c)] * s[r] * s[c]);
    hermitize(&mut m);
    let lo = qstate::hermitian_eigen(&m).0[0];
    if lo < 0.0 {
        -1.0 / lo
    } else {
        f64::INFINITY
    }
}

struct Direction {
    dx: Vec<ComplexMatrix>,
    dz: Vec<ComplexMatrix>,
    dy: DVector<f64>,
    x_scaled: Vec<ComplexMatrix>,
    z_scaled: Vec<ComplexMatrix>,
}

/// Solves the problem with default options.
pub fn solve_sdp(problem: &SdpProblem) -> Result<SdpSolution, SdpError> {
    solve_sdp_with(problem, &SdpOptions::default())
}

pub fn solve_sdp_with(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let m = problem.constraints.len();
    let nb = problem.blocks.len();
    let b = problem.rhs();
    let n_total: usize = problem.blocks.iter().sum();

    // Constraints touching each block, for the sparse Schur assembly.
    let mut touching: Vec<Vec<(usize, &SparseHermitian)>> = vec![Vec::new(); nb];
    for (i, con) in problem.constraints.iter().enumerate() {
        for (blk, a) in &con.terms {
            touching[*blk].push((i, a));
        }
    }

    let norm_b = b.amax();
    let norm_c = problem.objective.iter().map(frobenius).fold(0.0, f64::max);
    let mut x: Vec<ComplexMatrix> = Vec::with_capacity(nb);
    let mut z: Vec<ComplexMatrix> = Vec::with_capacity(nb);
    for (j, &n) in problem.blocks.iter().enumerate() {
        let mut xi = 10.0_f64.max((n as f64).sqrt());
        let mut zi = xi.max(frobenius(&problem.objective[j]));
        for (i, a) in &touching[j] {
            let fa = a.entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt();
            xi = xi.max(n as f64 * (1.0 + b[*i].abs()) / (1.0 + fa));
            zi = zi.max(fa);
        }
        x.push(ComplexMatrix::identity(n, n) * Complex64::new(xi, 0.0));
        z.push(ComplexMatrix::identity(n, n) * Complex64::new(zi, 0.0));
    }
    let mut y = DVector::<f64>::zeros(m);

    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;

    loop {
        let ax = problem.apply(&x);
        let rp = &b - &ax;
        let aty = problem.adjoint(&y);
        let rd: Vec<ComplexMatrix> = (0..nb).map(|j| &problem.objective[j] - &z[j] - &aty[j]).collect();
        let pobj: f64 = (0..nb).map(|j| re_trace_product(&problem.objective[j], &x[j])).sum();
        let dobj = b.dot(&y);
        let complementarity: f64 = (0..nb).map(|j| re_trace_product(&x[j], &z[j])).sum();
        let pinf = rp.amax() / (1.0 + norm_b);
        let dinf = rd.iter().map(|r| r.iter().fold(0.0_f64, |a, v| a.max(v.norm()))).fold(0.0, f64::max)
            / (1.0 + norm_c);
        let scale = 1.0 + pobj.abs();
        let feasible_p = pinf <= options.feasibility_tolerance;
        let feasible_d = dinf <= options.feasibility_tolerance;

        if feasible_p && feasible_d && (pobj - dobj).abs() <= options.gap_tolerance * scale
            && complementarity <= options.gap_tolerance * scale
        {
            status = SdpStatus::Optimal;
            break;
        }
        if options.sign_only && ((feasible_p && pobj < -options.gap_tolerance) || (feasible_d && dobj > options.gap_tolerance)) {
            status = SdpStatus::SignDecided;
            break;
        }
        // Divergence of the dual ray with small primal-side progress signals
        // primal infeasibility; the converse signals an unbounded primal.
        if dobj > 1e12 * (1.0 + norm_c) && feasible_d || pobj < -1e12 * (1.0 + norm_b) && feasible_p {
            status = SdpStatus::Infeasible;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        iterations += 1;

        let scalings: Vec<Scaling> = (0..nb).map(|j| nt_scaling(&x[j], &z[j])).collect();

        // Schur complement M_ik = sum_j Re Tr(A_ij W_j A_kj W_j).
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for j in 0..nb {
            let w = &scalings[j].w;
            for (pos, &(k, ak)) in touching[j].iter().enumerate() {
                let sandwiched = ak.sandwich(w);
                for &(i, ai) in &touching[j][..=pos] {
                    let v = ai.inner(&sandwiched);
                    schur[(i, k)] += v;
                    if i != k {
                        schur[(k, i)] += v;
                    }
                }
            }
        }
        let diag_max = (0..m).map(|i| schur[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let mut reg = schur;
                for i in 0..m {
                    reg[(i, i)] += 1e-13 * diag_max;
                }
                Cholesky::new(reg).ok_or(SdpError::SingularSchur)?
            }
        };

        let w_rd_w: Vec<ComplexMatrix> = (0..nb).map(|j| &scalings[j].w * &rd[j] * &scalings[j].w).collect();
        let a_w_rd_w = problem.apply(&w_rd_w);

        let solve = |d: &[ComplexMatrix]| -> Direction {
            let gdg: Vec<ComplexMatrix> =
                (0..nb).map(|j| &scalings[j].g * &d[j] * scalings[j].g.adjoint()).collect();
            let rhs = &rp - problem.apply(&gdg) + &a_w_rd_w;
            let dy = chol.solve(&rhs);
            let atdy = problem.adjoint(&dy);
            let mut dz = Vec::with_capacity(nb);
            let mut dx = Vec::with_capacity(nb);
            let mut xs = Vec::with_capacity(nb);
            let mut zs = Vec::with_capacity(nb);
            for j in 0..nb {
                let mut dzj = &rd[j] - &atdy[j];
                hermitize(&mut dzj);
                let g = &scalings[j].g;
                let mut zt = g.adjoint() * &dzj * g;
                hermitize(&mut zt);
                let xt = &d[j] - &zt;
                let mut dxj = g * &xt * g.adjoint();
                hermitize(&mut dxj);
                dz.push(dzj);
                dx.push(dxj);
                xs.push(xt);
                zs.push(zt);
            }
            Direction { dx, dz, dy, x_scaled: xs, z_scaled: zs }
        };

        let steps = |dir: &Direction| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for (j, s) in scalings.iter().enumerate() {
                ap = ap.min(max_step(&s.v, &dir.x_scaled[j]));
                ad = ad.min(max_step(&s.v, &dir.z_scaled[j]));
            }
            (ap, ad)
        };

        let mu: f64 = scalings.iter().flat_map(|s| s.v.iter().map(|v| v * v)).sum::<f64>() / n_total as f64;

        // Predictor: D = -V.
        let d_aff: Vec<ComplexMatrix> = scalings
            .iter()
            .map(|s| ComplexMatrix::from_diagonal(&DVector::from_iterator(s.v.len(), s.v.iter().map(|v| Complex64::new(-v, 0.0)))))
            .collect();
        let aff = solve(&d_aff);
        let (ap, ad) = steps(&aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for (j, s) in scalings.iter().enumerate() {
            let n = s.v.len();
            let vx = ComplexMatrix::from_fn(n, n, |r, c| {
                (if r == c { Complex64::new(s.v[r], 0.0) } else { ZERO }) + aff.x_scaled[j][(r, c)] * ap
            });
            let vz = ComplexMatrix::from_fn(n, n, |r, c| {
                (if r == c { Complex64::new(s.v[r], 0.0) } else { ZERO }) + aff.z_scaled[j][(r, c)] * ad
            });
            mu_aff += re_trace_product(&vx, &vz);
        }
        mu_aff /= n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector: V∘D = sigma mu I - V² - sym(X̃_aff Z̃_aff).
        let d_cor: Vec<ComplexMatrix> = scalings
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let n = s.v.len();
                let xz = &aff.x_scaled[j] * &aff.z_scaled[j];
                ComplexMatrix::from_fn(n, n, |r, c| {
                    let mut rhs = -(xz[(r, c)] + xz[(c, r)].conj()) * 0.5;
                    if r == c {
                        rhs += Complex64::new(sigma * mu - s.v[r] * s.v[r], 0.0);
                    }
                    rhs * 2.0 / (s.v[r] + s.v[c])
                })
            })
            .collect();
        let dir = solve(&d_cor);
        let (ap, ad) = steps(&dir);
        let ap = (options.step_fraction * ap).min(1.0);
        let ad = (options.step_fraction * ad).min(1.0);

        for j in 0..nb {
            x[j] += &dir.dx[j] * Complex64::new(ap, 0.0);
            z[j] += &dir.dz[j] * Complex64::new(ad, 0.0);
            hermitize(&mut x[j]);
            hermitize(&mut z[j]);
        }
        y += &dir.dy * ad;
    }

    let ax = problem.apply(&x);
    let aty = problem.adjoint(&y);
    let primal_residual = (&b - &ax).amax();
    let dual_residual = (0..nb)
        .map(|j| (&problem.objective[j] - &z[j] - &aty[j]).iter().fold(0.0_f64, |a, v| a.max(v.norm())))
        .fold(0.0, f64::max);
    let primal_value: f64 = (0..nb).map(|j| re_trace_product(&problem.objective[j], &x[j])).sum();
    let dual_value = b.dot(&y);
    let min_primal_eigenvalue = x
        .iter()
        .map(|xj| qstate::hermitian_eigen(xj).0[0])
        .fold(f64::INFINITY, f64::min);
    Ok(SdpSolution {
        status,
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        primal_blocks: x,
        dual_slack: z,
        y,
        iterations,
        primal_residual,
        dual_residual,
        min_primal_eigenvalue,
    })
}

/// Orthonormal basis of the real vector space of `n × n` Hermitian
/// matrices under `Re Tr(A B)`: `E_pp`, `(E_pq + E_qp)/√2`,
/// `i(E_pq - E_qp)/√2` for `p < q`.
pub fn hermitian_basis(n: usize) -> Vec<SparseHermitian> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        out.push(SparseHermitian::diagonal(n, p, 1.0));
        for q in p + 1..n {
            out.push(SparseHermitian {
                dim: n,
                entries: vec![(p, q, Complex64::new(h, 0.0)), (q, p, Complex64::new(h, 0.0))],
            });
            out.push(SparseHermitian {
                dim: n,
                entries: vec![(p, q, Complex64::new(0.0, h)), (q, p, Complex64::new(0.0, -h))],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trace_one(n: usize) -> SparseHermitian {
        SparseHermitian::from_dense(&ComplexMatrix::identity(n, n)).unwrap()
    }

    fn min_eig_problem(w: ComplexMatrix) -> SdpProblem {
        let n = w.nrows();
        let mut p = SdpProblem::new(vec![n]);
        p.objective[0] = w;
        p.add_constraint(vec![(0, trace_one(n))], 1.0);
        p
    }

    fn check_invariants(s: &SdpSolution) {
        assert!(s.dual_value <= s.primal_value + 1e-7 * (1.0 + s.primal_value.abs()), "weak duality");
        assert!(s.min_primal_eigenvalue >= -1e-8);
        assert!(s.primal_residual <= 1e-8, "primal residual {}", s.primal_residual);
    }

    #[test]
    fn min_eigenvalue_of_sigma_z() {
        let s = solve_sdp(&min_eig_problem(qstate::sigma_z())).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_value + 1.0).abs() < 1e-7);
        check_invariants(&s);
    }

    #[test]
    fn identity_objective() {
        let s = solve_sdp(&min_eig_problem(ComplexMatrix::identity(3, 3))).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_value - 1.0).abs() < 1e-7);
        check_invariants(&s);
    }

    #[test]
    fn random_hermitian_matches_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let g = ComplexMatrix::from_fn(16, 16, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let w = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
            let s = solve_sdp(&min_eig_problem(w.clone())).unwrap();
            assert_eq!(s.status, SdpStatus::Optimal);
            let oracle = qstate::min_eigenvalue(&w).unwrap();
            assert!((s.primal_value - oracle).abs() < 1e-6, "{} vs {}", s.primal_value, oracle);
            assert!((s.dual_value - oracle).abs() < 1e-6);
            check_invariants(&s);
        }
    }

    #[test]
    fn two_blocks_with_shared_constraint() {
        // minimize x11 + 2 z subject to x11 + z = 1 with a 2x2 block and a scalar.
        let mut p = SdpProblem::new(vec![2, 1]);
        p.objective[0][(0, 0)] = Complex64::new(1.0, 0.0);
        p.objective[1][(0, 0)] = Complex64::new(2.0, 0.0);
        p.add_constraint(
            vec![(0, SparseHermitian::diagonal(2, 0, 1.0)), (1, SparseHermitian::diagonal(1, 0, 1.0))],
            1.0,
        );
        // Pin the off-diagonal block entry and x22 to make the problem bounded.
        for basis in hermitian_basis(2).into_iter().skip(1) {
            p.add_constraint(vec![(0, basis)], 0.0);
        }
        let s = solve_sdp(&p).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_value - 1.0).abs() < 1e-7);
        check_invariants(&s);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        // Tr X = -1 with X PSD has no solution.
        let mut p = SdpProblem::new(vec![2]);
        p.add_constraint(vec![(0, trace_one(2))], -1.0);
        let s = solve_sdp(&p).unwrap();
        assert_ne!(s.status, SdpStatus::Optimal);
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let ip = a.inner(&b.to_dense());
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_block_reference() {
        let mut p = SdpProblem::new(vec![2]);
        p.add_constraint(vec![(3, trace_one(2))], 1.0);
        assert!(matches!(solve_sdp(&p), Err(SdpError::UnknownBlock { .. })));
    }
}
