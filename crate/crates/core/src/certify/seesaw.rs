//! Lower bounds on `max Tr(Aσ)/Tr(Bσ)` from explicit pure states of bounded
//! Schmidt rank across the signals | idlers cut.
//!
//! A rank-`r` vector `Σ_j α_j ⊗ β_j` is linear in the stacked `α` for fixed
//! `β` (and vice versa), so each half-step is a generalized Hermitian
//! eigenproblem. Rank 1 is the separable see-saw.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::qstate::{self, ComplexMatrix};

const LOCAL_DIM: usize = 4;
const CONVERGENCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 2000;

pub type ComplexVector = DVector<Complex64>;

#[derive(Debug, Clone, Serialize)]
pub struct SeesawResult {
    pub rank: usize,
    pub ratio: f64,
    pub restarts: usize,
    pub best_restart: usize,
    pub sweeps: usize,
    #[serde(skip)]
    pub state: ComplexVector,
}

/// `⟨ψ|A|ψ⟩ / ⟨ψ|B|ψ⟩`, or `None` when the denominator vanishes.
pub fn ratio(a: &ComplexMatrix, b: &ComplexMatrix, psi: &ComplexVector) -> Option<f64> {
    let num = (psi.adjoint() * a * psi)[(0, 0)].re;
    let den = (psi.adjoint() * b * psi)[(0, 0)].re;
    (den > 1e-14 * psi.norm_squared()).then(|| num / den)
}

/// Largest generalized eigenpair of `(a, b)` on the range of `b`.
fn top_generalized(a: &ComplexMatrix, b: &ComplexMatrix) -> Option<(f64, ComplexVector)> {
    let (values, vectors) = qstate::hermitian_eigen(b);
    let top = values.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return None;
    }
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > 1e-10 * top).collect();
    let n = b.nrows();
    let t = ComplexMatrix::from_fn(n, keep.len(), |r, c| vectors[(r, keep[c])] / values[keep[c]].sqrt());
    let mut reduced = t.adjoint() * a * &t;
    reduced = (&reduced + reduced.adjoint()) * Complex64::new(0.5, 0.0);
    let (vals, vecs) = qstate::hermitian_eigen(&reduced);
    let last = vals.len() - 1;
    let x = &t * vecs.column(last);
    Some((vals[last], x.normalize()))
}

/// Columns `e_i ⊗ β_j` (or `α_j ⊗ e_i`) for all `j`, mapping stacked local
/// vectors to the four-qubit vector.
fn embedding(fixed: &[ComplexVector], fixed_is_b: bool) -> ComplexMatrix {
    let r = fixed.len();
    let id = qstate::identity(LOCAL_DIM);
    let mut k = ComplexMatrix::zeros(LOCAL_DIM * LOCAL_DIM, LOCAL_DIM * r);
    for (j, f) in fixed.iter().enumerate() {
        let col = ComplexMatrix::from_column_slice(LOCAL_DIM, 1, f.as_slice());
        let block = if fixed_is_b { qstate::tensor(&id, &col) } else { qstate::tensor(&col, &id) };
        k.view_mut((0, LOCAL_DIM * j), (LOCAL_DIM * LOCAL_DIM, LOCAL_DIM)).copy_from(&block);
    }
    k
}

fn split(v: &ComplexVector, r: usize) -> Vec<ComplexVector> {
    (0..r).map(|j| v.rows(LOCAL_DIM * j, LOCAL_DIM).into_owned()).collect()
}

fn random_vector(rng: &mut ChaCha8Rng) -> ComplexVector {
    ComplexVector::from_fn(LOCAL_DIM, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn single_run(a: &ComplexMatrix, b: &ComplexMatrix, rank: usize, rng: &mut ChaCha8Rng) -> (f64, ComplexVector, usize) {
    let mut betas: Vec<ComplexVector> = (0..rank).map(|_| random_vector(rng)).collect();
    let mut best = f64::NEG_INFINITY;
    let mut state = ComplexVector::zeros(16);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let k = embedding(&betas, true);
        let Some((_, alpha)) = top_generalized(&(k.adjoint() * a * &k), &(k.adjoint() * b * &k)) else {
            betas = (0..rank).map(|_| random_vector(rng)).collect();
            continue;
        };
        let alphas = split(&alpha, rank);
        let k = embedding(&alphas, false);
        let Some((value, beta)) = top_generalized(&(k.adjoint() * a * &k), &(k.adjoint() * b * &k)) else {
            betas = (0..rank).map(|_| random_vector(rng)).collect();
            continue;
        };
        betas = split(&beta, rank);
        state = &k * &beta;
        let improved = value - best;
        best = best.max(value);
        if improved.abs() < CONVERGENCE {
            break;
        }
    }
    (best, state, sweeps)
}

/// Best ratio over pure states of Schmidt rank at most `rank`, from
/// `restarts` seeded random starts run in parallel.
pub fn seesaw(a: &ComplexMatrix, b: &ComplexMatrix, rank: usize, restarts: usize, seed: u64) -> SeesawResult {
    let restarts = restarts.max(1);
    let runs: Vec<(f64, ComplexVector, usize)> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            single_run(a, b, rank, &mut rng)
        })
        .collect();
    let (best_restart, best) = runs
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
        .expect("at least one restart");
    SeesawResult {
        rank,
        ratio: best.0,
        restarts,
        best_restart,
        sweeps: runs.iter().map(|r| r.2).sum(),
        state: best.1.clone(),
    }
}

/// The separable see-saw over product vectors `α ⊗ β`.
pub fn seesaw_separable(a: &ComplexMatrix, b: &ComplexMatrix, restarts: usize, seed: u64) -> SeesawResult {
    seesaw(a, b, 1, restarts, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{BlochVector, Outcome};
    use crate::witness::{self, SettingsPair, SIGNS, T_ONE_PAIR, T_PPT};

    #[test]
    fn product_zero_state_ratio_matches_enumeration() {
        let settings = SettingsPair::default();
        let (a, b) = witness::witness_operators(&settings);
        let mut psi = ComplexVector::zeros(16);
        psi[0] = Complex64::new(1.0, 0.0);
        // Each qubit in |0⟩: p(outcome) = (1 + a v_z)/2 per qubit.
        let p = |v: &BlochVector, o: Outcome| (1.0 + o.sign() * v.components()[2]) / 2.0;
        let (mut num, mut den) = (0.0, 0.0);
        for (x, y, oa, ob) in witness::cells() {
            let v = &settings.alice[x];
            let w = &settings.bob[y];
            let prob = p(v, oa) * p(v, oa.flip()) * p(w, ob) * p(w, ob.flip());
            num += SIGNS[2 * x + y] * oa.sign() * ob.sign() * prob;
            den += 0.25 * prob;
        }
        let r = ratio(&a, &b, &psi).unwrap();
        assert!((r - num / den).abs() < 1e-12);
    }

    #[test]
    fn separable_seesaw_reaches_ppt_bound() {
        let (a, b) = witness::witness_operators(&SettingsPair::default());
        let r = seesaw_separable(&a, &b, 50, 7);
        assert!(r.ratio >= T_PPT - 1e-4, "{}", r.ratio);
        assert!(r.ratio <= T_PPT + 1e-6);
        assert!((ratio(&a, &b, &r.state).unwrap() - r.ratio).abs() < 1e-9);
    }

    #[test]
    fn rank_two_seesaw_reaches_one_pair_bound() {
        let (a, b) = witness::witness_operators(&SettingsPair::default());
        let r = seesaw(&a, &b, 2, 20, 3);
        assert!((r.ratio - T_ONE_PAIR).abs() < 1e-6, "{}", r.ratio);
    }

    #[test]
    fn deterministic_given_seed() {
        let (a, b) = witness::witness_operators(&SettingsPair::default());
        let x = seesaw_separable(&a, &b, 4, 99);
        let y = seesaw_separable(&a, &b, 4, 99);
        assert_eq!(x.ratio, y.ratio);
    }
}
