//! The Werner-pair model: predicted T against visibility and CHSH value.

use multipair::witness;

fn main() {
    for s in [2.0, 2.4, 2.58, 2.7, 2.0 * 2f64.sqrt()] {
        println!("S = {s:.4}  ->  T = {:.4}", witness::predict_t_from_chsh(s).unwrap());
    }
    for v in [0.8, 0.8517, 0.912, 1.0] {
        println!("V = {v:.4}  ->  T = {:.4}", witness::predict_t_from_visibility(v).unwrap());
    }
    println!("T exceeds 5/sqrt(2) for V > {:.4}", witness::min_certifying_visibility());
}
