//! The restricted four-fold witness statistic and its operator form.
//!
//! With detector dead time longer than the pair separation, a second pair can
//! only be seen on the complementary ports. For every setting pair `(x, y)`
//! the accessible patterns are therefore `(a, b, -a, -b)`, giving 16 cells in
//! total. This module turns such tables into the statistic `T`, builds the
//! operators `A` and `B` with `T = Tr(A rho) / Tr(B rho)`, and evaluates the
//! Werner-pair consistency model.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{self, BellState, BlochVector, ComplexMatrix, DensityMatrix, Outcome, QStateError};

/// Sign of each correlator in `T`, indexed by `2x + y`.
pub const SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// Largest `T` reachable by a separable (PPT) state for the default settings.
pub const T_PPT: f64 = 2.0 * SQRT_2;

/// Largest `T` reachable when at most one of the two pairs is entangled.
pub const T_ONE_PAIR: f64 = 5.0 * FRAC_1_SQRT_2;

/// Value of `T` for two perfect Bell pairs.
pub const T_TWO_BELL_PAIRS: f64 = 8.0 * SQRT_2 / 3.0;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("count table is empty")]
    EmptyData,
    #[error("{name} = {value} outside [{min}, {max}]")]
    OutOfRange { name: &'static str, value: f64, min: f64, max: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    State(#[from] QStateError),
}

fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<(), WitnessError> {
    if !(min..=max).contains(&value) {
        return Err(WitnessError::OutOfRange { name, value, min, max });
    }
    Ok(())
}

/// Two measurement directions per party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingsPair {
    pub alice: [BlochVector; 2],
    pub bob: [BlochVector; 2],
}

impl Default for SettingsPair {
    fn default() -> Self {
        let d = |x: f64, y: f64| BlochVector::normalized(x, y, 0.0).expect("non-zero direction");
        Self {
            alice: [BlochVector::x_axis(), BlochVector::y_axis()],
            bob: [d(1.0, 1.0), d(1.0, -1.0)],
        }
    }
}

impl SettingsPair {
    /// True when every direction matches the CHSH-optimal defaults.
    pub fn is_default(&self) -> bool {
        let reference = Self::default();
        self.alice
            .iter()
            .chain(&self.bob)
            .zip(reference.alice.iter().chain(&reference.bob))
            .all(|(u, v)| (u.dot(v) - 1.0).abs() < 1e-12)
    }
}

fn outcome_index(o: Outcome) -> usize {
    match o {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
    }
}

/// Anything that assigns a rate to the cell `N_{ab,-a-b|xy}`.
pub trait FourFoldRates {
    fn rate(&self, x: usize, y: usize, a: Outcome, b: Outcome) -> f64;
}

/// Integer four-fold counts, one cell per `(x, y, a, b)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    counts: [[[[u64; 2]; 2]; 2]; 2],
}

impl CountTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from the four per-setting columns, each ordered as
    /// `(++, --), (--, ++), (+-, -+), (-+, +-)`, i.e. by `(a, b)` in
    /// `(+,+), (-,-), (+,-), (-,+)`.
    pub fn from_columns(columns: [[u64; 4]; 4]) -> Self {
        use Outcome::{Minus, Plus};
        let order = [(Plus, Plus), (Minus, Minus), (Plus, Minus), (Minus, Plus)];
        let mut table = Self::new();
        for (xy, column) in columns.iter().enumerate() {
            for (&(a, b), &n) in order.iter().zip(column) {
                table.set(xy / 2, xy % 2, a, b, n);
            }
        }
        table
    }

    /// Inverse of [`CountTable::from_columns`].
    pub fn to_columns(&self) -> [[u64; 4]; 4] {
        use Outcome::{Minus, Plus};
        let order = [(Plus, Plus), (Minus, Minus), (Plus, Minus), (Minus, Plus)];
        [0, 1, 2, 3].map(|xy| order.map(|(a, b)| self.get(xy / 2, xy % 2, a, b)))
    }

    pub fn get(&self, x: usize, y: usize, a: Outcome, b: Outcome) -> u64 {
        self.counts[x][y][outcome_index(a)][outcome_index(b)]
    }

    pub fn set(&mut self, x: usize, y: usize, a: Outcome, b: Outcome, n: u64) {
        self.counts[x][y][outcome_index(a)][outcome_index(b)] = n;
    }

    pub fn increment(&mut self, x: usize, y: usize, a: Outcome, b: Outcome) {
        self.counts[x][y][outcome_index(a)][outcome_index(b)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().flatten().sum()
    }

    pub fn setting_total(&self, x: usize, y: usize) -> u64 {
        self.counts[x][y].iter().flatten().sum()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        let mut out = *self;
        out.counts.iter_mut().flatten().flatten().flatten().for_each(|n| *n *= factor);
        out
    }

    pub fn merged(&self, other: &CountTable) -> Self {
        let mut out = *self;
        for (x, y, a, b) in cells() {
            out.set(x, y, a, b, self.get(x, y, a, b) + other.get(x, y, a, b));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,a,b,count\n");
        for (x, y, a, b) in cells() {
            let _ = writeln!(s, "{x},{y},{:+},{:+},{}", a.as_i32(), b.as_i32(), self.get(x, y, a, b));
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Reads `x,y,a,b,count` rows. Cells absent from the file are zero;
    /// repeated cells are an error.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, WitnessError> {
        let mut table = Self::new();
        let mut seen = [[[[false; 2]; 2]; 2]; 2];
        let mut header_seen = false;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                let header: Vec<&str> = line.split(',').map(str::trim).collect();
                if header != ["x", "y", "a", "b", "count"] {
                    return Err(WitnessError::Parse {
                        line: line_no,
                        message: format!("expected header `x,y,a,b,count`, found `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse_err = |message: String| WitnessError::Parse { line: line_no, message };
            if fields.len() != 5 {
                return Err(parse_err(format!("expected 5 fields, found {}", fields.len())));
            }
            let setting = |s: &str, name: &str| match s {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(parse_err(format!("{name} must be 0 or 1, found `{s}`"))),
            };
            let outcome = |s: &str, name: &str| {
                s.parse::<i32>()
                    .ok()
                    .and_then(Outcome::from_sign)
                    .ok_or_else(|| parse_err(format!("{name} must be +1 or -1, found `{s}`")))
            };
            let x = setting(fields[0], "x")?;
            let y = setting(fields[1], "y")?;
            let a = outcome(fields[2], "a")?;
            let b = outcome(fields[3], "b")?;
            let n: u64 = fields[4]
                .parse()
                .map_err(|_| parse_err(format!("count must be a non-negative integer, found `{}`", fields[4])))?;
            let flag = &mut seen[x][y][outcome_index(a)][outcome_index(b)];
            if *flag {
                return Err(parse_err("duplicate cell".to_string()));
            }
            *flag = true;
            table.set(x, y, a, b, n);
        }
        if !header_seen {
            return Err(WitnessError::Parse { line: 0, message: "missing header".into() });
        }
        Ok(table)
    }
}

impl FourFoldRates for CountTable {
    fn rate(&self, x: usize, y: usize, a: Outcome, b: Outcome) -> f64 {
        self.get(x, y, a, b) as f64
    }
}

/// Real-valued rates, used for exact model predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateTable {
    rates: [[[[f64; 2]; 2]; 2]; 2],
}

impl RateTable {
    pub fn get(&self, x: usize, y: usize, a: Outcome, b: Outcome) -> f64 {
        self.rates[x][y][outcome_index(a)][outcome_index(b)]
    }

    pub fn set(&mut self, x: usize, y: usize, a: Outcome, b: Outcome, r: f64) {
        self.rates[x][y][outcome_index(a)][outcome_index(b)] = r;
    }
}

impl FourFoldRates for RateTable {
    fn rate(&self, x: usize, y: usize, a: Outcome, b: Outcome) -> f64 {
        self.get(x, y, a, b)
    }
}

/// All 16 `(x, y, a, b)` cells in canonical order.
pub fn cells() -> impl Iterator<Item = (usize, usize, Outcome, Outcome)> {
    (0..2).flat_map(|x| {
        (0..2).flat_map(move |y| {
            Outcome::BOTH
                .into_iter()
                .flat_map(move |a| Outcome::BOTH.into_iter().map(move |b| (x, y, a, b)))
        })
    })
}

/// Raw correlator `C_xy = sum_ab ab N_{ab,-a-b|xy}`.
pub fn correlator<T: FourFoldRates + ?Sized>(table: &T, x: usize, y: usize) -> f64 {
    Outcome::BOTH
        .iter()
        .flat_map(|&a| Outcome::BOTH.iter().map(move |&b| (a, b)))
        .map(|(a, b)| a.sign() * b.sign() * table.rate(x, y, a, b))
        .sum()
}

fn total<T: FourFoldRates + ?Sized>(table: &T) -> f64 {
    cells().map(|(x, y, a, b)| table.rate(x, y, a, b)).sum()
}

/// `N = (1/4) * sum of all cells`.
pub fn normalization<T: FourFoldRates + ?Sized>(table: &T) -> Result<f64, WitnessError> {
    let s = total(table);
    if s <= 0.0 {
        return Err(WitnessError::EmptyData);
    }
    Ok(s / 4.0)
}

/// Raw correlators divided by the global `N`, ordered `00, 01, 10, 11`.
pub fn normalized_correlators<T: FourFoldRates + ?Sized>(table: &T) -> Result<[f64; 4], WitnessError> {
    let n = normalization(table)?;
    Ok([0, 1, 2, 3].map(|xy| correlator(table, xy / 2, xy % 2) / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessValue {
    pub t: f64,
    pub sigma_t: f64,
    /// `C_xy / N`, ordered `00, 01, 10, 11`.
    pub correlators: [f64; 4],
    /// One-sigma Poisson errors of the normalized correlators.
    pub correlator_sigmas: [f64; 4],
    pub raw_correlators: [f64; 4],
    pub normalization: f64,
}

/// `T = (C00 + C01 + C10 - C11) / N` with first-order Poisson errors.
///
/// Every cell is treated as an independent Poisson count. Writing
/// `T = 4 sum_i c_i n_i / S` with `S` the total and `c_i = s_xy ab`,
/// `dT/dn_i = (4 c_i - T) / S`. Correlator errors propagate through the same
/// global `N`.
pub fn witness_statistic<T: FourFoldRates + ?Sized>(table: &T) -> Result<WitnessValue, WitnessError> {
    let n = normalization(table)?;
    let s = 4.0 * n;
    let raw = [0, 1, 2, 3].map(|xy| correlator(table, xy / 2, xy % 2));
    let correlators = raw.map(|c| c / n);
    let t: f64 = raw.iter().zip(SIGNS).map(|(c, s)| c * s).sum::<f64>() / n;

    let mut var_t = 0.0;
    let mut var_c = [0.0; 4];
    for (x, y, a, b) in cells() {
        let count = table.rate(x, y, a, b);
        let xy = 2 * x + y;
        let ab = a.sign() * b.sign();
        var_t += count * ((4.0 * SIGNS[xy] * ab - t) / s).powi(2);
        for (k, v) in var_c.iter_mut().enumerate() {
            let own = if k == xy { 4.0 * ab } else { 0.0 };
            *v += count * ((own - correlators[k]) / s).powi(2);
        }
    }
    Ok(WitnessValue {
        t,
        sigma_t: var_t.sqrt(),
        correlators,
        correlator_sigmas: var_c.map(f64::sqrt),
        raw_correlators: raw,
        normalization: n,
    })
}

/// The operators `A` and `B` on `(s1, s2, i1, i2)` with
/// `T = Tr(A rho) / Tr(B rho)` for the ideal rates
/// `N_{ab,-a-b|xy} ∝ Tr(P_a(v_x) ⊗ P_-a(v_x) ⊗ P_b(w_y) ⊗ P_-b(w_y) rho)`.
pub fn witness_operators(settings: &SettingsPair) -> (ComplexMatrix, ComplexMatrix) {
    let mut a_op = ComplexMatrix::zeros(16, 16);
    let mut b_op = ComplexMatrix::zeros(16, 16);
    for (x, y, a, b) in cells() {
        let v = &settings.alice[x];
        let w = &settings.bob[y];
        let term = qstate::tensor_all(&[
            &qstate::projector(v, a),
            &qstate::projector(v, a.flip()),
            &qstate::projector(w, b),
            &qstate::projector(w, b.flip()),
        ]);
        let coefficient = SIGNS[2 * x + y] * a.sign() * b.sign();
        a_op += &term * Complex64::new(coefficient, 0.0);
        b_op += &term * Complex64::new(0.25, 0.0);
    }
    (a_op, b_op)
}

/// `W(T) = T B - A`. Its expectation vanishes on any state whose ratio is
/// exactly `T`, and it is positive on states with a smaller ratio.
pub fn induced_witness(a: &ComplexMatrix, b: &ComplexMatrix, t: f64) -> ComplexMatrix {
    b * Complex64::new(t, 0.0) - a
}

/// `S = E00 + E01 + E10 - E11`.
pub fn chsh(correlators: [f64; 4]) -> Result<f64, WitnessError> {
    for e in correlators {
        check_range("correlator", e, -1.0, 1.0)?;
    }
    Ok(correlators.iter().zip(SIGNS).map(|(e, s)| e * s).sum())
}

/// Single-pair correlators `E_xy = Tr(v_x·σ ⊗ w_y·σ rho)`.
pub fn pair_correlators(state: &DensityMatrix, settings: &SettingsPair) -> [f64; 4] {
    [0, 1, 2, 3].map(|xy| {
        let op = qstate::tensor(
            &qstate::pauli_along(&settings.alice[xy / 2]),
            &qstate::pauli_along(&settings.bob[xy % 2]),
        );
        state.expectation(&op)
    })
}

/// Joint outcome probabilities `p(ab|xy)` of one pair, indexed by outcome
/// index (`0` for `+`).
pub fn pair_probabilities(state: &DensityMatrix, settings: &SettingsPair, x: usize, y: usize) -> [[f64; 2]; 2] {
    let mut p = [[0.0; 2]; 2];
    for a in Outcome::BOTH {
        for b in Outcome::BOTH {
            let op = qstate::tensor(
                &qstate::projector(&settings.alice[x], a),
                &qstate::projector(&settings.bob[y], b),
            );
            p[outcome_index(a)][outcome_index(b)] = state.expectation(&op);
        }
    }
    p
}

/// Exact rates `p(ab|xy) p(-a-b|xy)` for two independent copies of `state`.
pub fn exact_rate_table(state: &DensityMatrix, settings: &SettingsPair) -> RateTable {
    let mut table = RateTable::default();
    for x in 0..2 {
        for y in 0..2 {
            let p = pair_probabilities(state, settings, x, y);
            for a in Outcome::BOTH {
                for b in Outcome::BOTH {
                    let first = p[outcome_index(a)][outcome_index(b)];
                    let second = p[outcome_index(a.flip())][outcome_index(b.flip())];
                    table.set(x, y, a, b, first * second);
                }
            }
        }
    }
    table
}

/// The Werner pair whose correlations the default settings are tuned for.
///
/// With `σ_y = [[0, -i], [i, 0]]` the default directions are CHSH-optimal for
/// `|ψ+⟩ = (|01⟩ + |10⟩)/√2` (correlation matrix `diag(1, 1, -1)`); on `|φ+⟩`
/// the `x`/`y` correlations cancel and `T` vanishes.
pub fn model_pair(visibility: f64) -> Result<DensityMatrix, WitnessError> {
    Ok(qstate::werner_state_of(BellState::PsiPlus, visibility)?)
}

/// `T(V) = 4√2 V / (1 + V²/2)` for two identical Werner pairs.
pub fn predict_t_from_visibility(visibility: f64) -> Result<f64, WitnessError> {
    check_range("visibility", visibility, 0.0, 1.0)?;
    Ok(4.0 * SQRT_2 * visibility / (1.0 + visibility * visibility / 2.0))
}

/// `T(S) = 2S / (1 + S²/16)`, using `S = 2√2 V`.
pub fn predict_t_from_chsh(s: f64) -> Result<f64, WitnessError> {
    check_range("S", s, 0.0, 2.0 * SQRT_2)?;
    Ok(2.0 * s / (1.0 + s * s / 16.0))
}

/// `S = 2√2 V` for a Werner pair measured at the default settings.
pub fn chsh_from_visibility(visibility: f64) -> Result<f64, WitnessError> {
    check_range("visibility", visibility, 0.0, 1.0)?;
    Ok(2.0 * SQRT_2 * visibility)
}

/// Smallest visibility with `T(V) = 5/√2`: the lower root of
/// `2.5 V² - 8 V + 5 = 0`.
pub fn min_certifying_visibility() -> f64 {
    (8.0 - 14.0_f64.sqrt()) / 5.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{Outcome::Minus, Outcome::Plus};

    pub(crate) fn stored() -> CountTable {
        CountTable::from_columns([[76, 112, 1, 2], [70, 113, 2, 7], [61, 112, 5, 4], [4, 6, 92, 82]])
    }

    fn transmitted() -> CountTable {
        CountTable::from_columns([[195, 216, 10, 9], [220, 227, 12, 10], [200, 198, 11, 13], [6, 11, 222, 223]])
    }

    // Independent oracle: one pass over the 16 cells with explicit signs.
    fn oracle_t_sigma(columns: [[u64; 4]; 4]) -> (f64, f64) {
        let ab = [1.0, 1.0, -1.0, -1.0];
        let s: f64 = columns.iter().flatten().map(|&n| n as f64).sum();
        let num: f64 = (0..4)
            .map(|xy| SIGNS[xy] * (0..4).map(|k| ab[k] * columns[xy][k] as f64).sum::<f64>())
            .sum();
        let t = 4.0 * num / s;
        let mut var = 0.0;
        for xy in 0..4 {
            for k in 0..4 {
                let d = (4.0 * SIGNS[xy] * ab[k] - t) / s;
                var += columns[xy][k] as f64 * d * d;
            }
        }
        (t, var.sqrt())
    }

    #[test]
    fn stored_table_correlators() {
        let t = stored();
        assert_eq!(correlator(&t, 0, 0), 185.0);
        assert_eq!(correlator(&t, 0, 1), 174.0);
        assert_eq!(correlator(&t, 1, 0), 164.0);
        assert_eq!(correlator(&t, 1, 1), -164.0);
        assert_eq!(normalization(&t).unwrap(), 187.25);
        let c = normalized_correlators(&t).unwrap();
        assert!((c[0] - 0.988).abs() < 1e-3);
        assert!((c[2] - 0.876).abs() < 1e-3);
    }

    #[test]
    fn stored_and_transmitted_statistics() {
        let w = witness_statistic(&stored()).unwrap();
        let (t, s) = oracle_t_sigma([[76, 112, 1, 2], [70, 113, 2, 7], [61, 112, 5, 4], [4, 6, 92, 82]]);
        assert!((w.t - t).abs() < 1e-12 && (w.sigma_t - s).abs() < 1e-12);
        assert!((w.t - 3.67).abs() < 0.01);
        assert!((w.sigma_t - 0.06).abs() < 0.005);
        let w = witness_statistic(&transmitted()).unwrap();
        assert!((w.t - 3.63).abs() < 0.01);
        assert!((w.sigma_t - 0.04).abs() < 0.005);
    }

    #[test]
    fn trivial_tables() {
        let mut t = CountTable::new();
        assert!(matches!(normalization(&t), Err(WitnessError::EmptyData)));
        assert!(matches!(witness_statistic(&t), Err(WitnessError::EmptyData)));
        t.set(0, 0, Plus, Plus, 1);
        assert_eq!(normalization(&t).unwrap(), 0.25);
        let mut uniform = CountTable::new();
        for (x, y, a, b) in cells() {
            uniform.set(x, y, a, b, 7);
        }
        assert_eq!(normalization(&uniform).unwrap(), 28.0);
        assert_eq!(correlator(&uniform, 1, 0), 0.0);
        assert_eq!(normalized_correlators(&uniform).unwrap(), [0.0; 4]);

        let mut anti = CountTable::new();
        anti.set(1, 1, Plus, Minus, 5);
        anti.set(1, 1, Minus, Plus, 5);
        let w = witness_statistic(&anti).unwrap();
        assert_eq!(w.raw_correlators[3], -10.0);
        assert_eq!(w.t, 4.0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let t = stored();
        let csv = t.to_csv();
        assert!(csv.starts_with("x,y,a,b,count\n0,0,+1,+1,76\n"));
        assert_eq!(CountTable::read_csv(csv.as_bytes()).unwrap(), t);
        let bad = "x,y,a,b,count\n0,0,+1,+1,3\n0,2,+1,+1,4\n";
        match CountTable::read_csv(bad.as_bytes()) {
            Err(WitnessError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let dup = "x,y,a,b,count\n0,0,1,1,3\n0,0,+1,+1,4\n";
        assert!(CountTable::read_csv(dup.as_bytes()).is_err());
        assert!(CountTable::read_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn operator_traces_on_werner_pairs() {
        let (a, b) = witness_operators(&SettingsPair::default());
        assert!((b.trace().re - 4.0).abs() < 1e-12);
        for v in [0.0, 0.3, 0.912, 1.0] {
            let pair = model_pair(v).unwrap();
            let rho = pair.tensor(&pair).permuted(&[0, 2, 1, 3]).unwrap();
            let tb = rho.expectation(&b);
            assert!((tb - (1.0 + v * v / 2.0) / 4.0).abs() < 1e-12);
            if v == 1.0 {
                assert!((rho.expectation(&a) - SQRT_2).abs() < 1e-12);
            }
            // brute-force oracle over the 16 outcome probabilities
            let table = exact_rate_table(&pair, &SettingsPair::default());
            let ta: f64 = cells()
                .map(|(x, y, a_, b_)| SIGNS[2 * x + y] * a_.sign() * b_.sign() * table.get(x, y, a_, b_))
                .sum();
            assert!((rho.expectation(&a) - ta).abs() < 1e-12);
        }
    }

    #[test]
    fn induced_witness_vanishes_at_own_ratio() {
        let (a, b) = witness_operators(&SettingsPair::default());
        let pair = model_pair(0.8).unwrap();
        let rho = pair.tensor(&pair).permuted(&[0, 2, 1, 3]).unwrap();
        let t = rho.expectation(&a) / rho.expectation(&b);
        assert!(rho.expectation(&induced_witness(&a, &b, t)).abs() < 1e-12);
    }

    #[test]
    fn phi_plus_gives_no_signal_at_default_settings() {
        let pair = qstate::werner_state(1.0).unwrap();
        let e = pair_correlators(&pair, &SettingsPair::default());
        assert!(chsh(e).unwrap().abs() < 1e-12);
        let psi = model_pair(1.0).unwrap();
        let e = pair_correlators(&psi, &SettingsPair::default());
        for (ei, si) in e.iter().zip(SIGNS) {
            assert!((ei - si * FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn chsh_examples() {
        let h = FRAC_1_SQRT_2;
        assert!((chsh([h, h, h, -h]).unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(chsh([1.0; 4]).unwrap(), 2.0);
        assert!(chsh([1.1, 0.0, 0.0, 0.0]).is_err());
        let s = chsh_from_visibility(0.912).unwrap();
        assert!((s - 2.579).abs() < 1e-3);
    }

    #[test]
    fn prediction_examples() {
        assert!((predict_t_from_visibility(1.0).unwrap() - T_TWO_BELL_PAIRS).abs() < 1e-12);
        assert!((predict_t_from_visibility(1.0).unwrap() - 3.7712).abs() < 1e-4);
        assert_eq!(predict_t_from_visibility(0.0).unwrap(), 0.0);
        assert!((predict_t_from_visibility(0.912).unwrap() - 3.64).abs() < 0.01);
        assert!((predict_t_from_chsh(2.58).unwrap() - 3.64).abs() < 0.01);
        assert!((predict_t_from_chsh(2.0 * SQRT_2).unwrap() - T_TWO_BELL_PAIRS).abs() < 1e-12);
        assert_eq!(predict_t_from_chsh(0.0).unwrap(), 0.0);
        assert!(predict_t_from_chsh(3.0).is_err());
        assert!(predict_t_from_visibility(-0.1).is_err());
    }

    #[test]
    fn minimum_visibility() {
        let v = min_certifying_visibility();
        assert!((v - 0.8517).abs() < 1e-4);
        assert!((predict_t_from_visibility(v).unwrap() - T_ONE_PAIR).abs() < 1e-10);
        assert!(v > 1.0 / 3.0 && v < 1.0);
    }

    #[test]
    fn settings_flag() {
        assert!(SettingsPair::default().is_default());
        let mut s = SettingsPair::default();
        s.alice[0] = BlochVector::z_axis();
        assert!(!s.is_default());
    }
}
