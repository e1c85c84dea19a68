//! The table printed by `bounds`: every bound with how it was obtained.

use serde::Serialize;

use super::bounds::{self, BoundError, RatioBound, StateSet, DEFAULT_FILTERS, NEGATIVITY_ONLY};
use super::seesaw;
use crate::witness::{self, SettingsPair};

/// One row of the bounds report.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub constraint: String,
    pub bound: f64,
    /// Duality gap for SDP rows, final bracket width for bisection rows,
    /// zero for see-saw rows.
    pub gap: f64,
    pub method: String,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub seesaw_restarts: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { seesaw_restarts: 50, seed: 1 }
    }
}

fn ratio_rows(label: &str, method_suffix: &str, r: &RatioBound) -> [BoundReport; 2] {
    [
        BoundReport {
            constraint: label.to_string(),
            bound: r.fractional.value,
            gap: r.fractional.gap,
            method: format!("fractional_sdp{method_suffix}"),
            iterations: r.fractional.iterations,
        },
        BoundReport {
            constraint: label.to_string(),
            bound: r.bisection.high,
            gap: r.bisection.high - r.bisection.low,
            method: format!("bisection{method_suffix}"),
            iterations: r.bisection.steps,
        },
    ]
}

/// Computes the separable and one-pair bounds from scratch, plus the
/// plain-negativity variant and see-saw lower bounds for comparison.
pub fn bounds_report(options: &ReportOptions) -> Result<Vec<BoundReport>, BoundError> {
    let settings = SettingsPair::default();
    let (a, b) = witness::witness_operators(&settings);

    let ((ppt, filtered), (plain, (sep, rank2))) = rayon::join(
        || {
            rayon::join(
                || bounds::max_ratio_bound(StateSet::Ppt, &[]),
                || bounds::max_ratio_bound(StateSet::SchmidtNumber(2), &DEFAULT_FILTERS),
            )
        },
        || {
            rayon::join(
                || bounds::max_ratio_bound(StateSet::SchmidtNumber(2), &NEGATIVITY_ONLY),
                || {
                    rayon::join(
                        || seesaw::seesaw_separable(&a, &b, options.seesaw_restarts, options.seed),
                        || seesaw::seesaw(&a, &b, 2, options.seesaw_restarts, options.seed),
                    )
                },
            )
        },
    );
    let (ppt, filtered, plain) = (ppt?, filtered?, plain?);

    let mut rows = Vec::new();
    rows.extend(ratio_rows("ppt", "", &ppt));
    rows.extend(ratio_rows("schmidt_2", "_filtered_negativity", &filtered));
    rows.extend(ratio_rows("schmidt_2", "_negativity_only", &plain));
    rows.push(BoundReport {
        constraint: "separable".into(),
        bound: sep.ratio,
        gap: 0.0,
        method: "seesaw_lower_bound".into(),
        iterations: sep.sweeps,
    });
    rows.push(BoundReport {
        constraint: "schmidt_2".into(),
        bound: rank2.ratio,
        gap: 0.0,
        method: "seesaw_rank2_lower_bound".into(),
        iterations: rank2.sweeps,
    });
    Ok(rows)
}

/// Fixed-width text rendering of the report.
pub fn render(rows: &[BoundReport]) -> String {
    let mut out = format!("{:<12} {:>12} {:>11} {:>6}  {}\n", "constraint", "bound", "gap", "iters", "method");
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>12.7} {:>11.2e} {:>6}  {}\n",
            r.constraint, r.bound, r.gap, r.iterations, r.method
        ));
    }
    out
}
