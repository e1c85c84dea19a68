//! Negativity of one and two Werner pairs across the signals | idlers cut,
//! and where the two-pair state starts to certify more than one pair.

use multipair::qstate::{self, BellState};
use multipair::witness;

fn main() {
    println!("{:>6} {:>12} {:>12} {:>10}", "V", "N(1 pair)", "N(2 pairs)", "T model");
    for k in 0..=10 {
        let v = k as f64 / 10.0;
        let one = qstate::werner_state_of(BellState::PsiPlus, v).unwrap();
        // (s1, i1, s2, i2) -> (s1, s2, i1, i2)
        let two = one.tensor(&one).permuted(&[0, 2, 1, 3]).unwrap();
        println!(
            "{v:>6.2} {:>12.6} {:>12.6} {:>10.6}",
            qstate::negativity(&one),
            qstate::negativity(&two),
            witness::predict_t_from_visibility(v).unwrap()
        );
    }
    println!("minimum certifying visibility {:.6}", witness::min_certifying_visibility());
}
