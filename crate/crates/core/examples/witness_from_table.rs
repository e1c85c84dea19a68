//! Correlators, T and the certification verdict for a count table.
//!
//! `cargo run --example witness_from_table -- fixtures/stored.csv`

use std::fs::File;
use std::io::BufReader;

use multipair::certify::{certify, CertificationBounds};
use multipair::witness::{self, CountTable};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/stored.csv").into());
    let table = CountTable::read_csv(BufReader::new(File::open(&path).expect("open table"))).expect("parse table");
    let w = witness::witness_statistic(&table).expect("non-empty table");
    println!("{path}: {} four-folds", table.total());
    for (k, label) in ["00", "01", "10", "11"].iter().enumerate() {
        println!("  E_{label} = {:+.3} ± {:.3}", w.correlators[k], w.correlator_sigmas[k]);
    }
    println!("  T = {:.3} ± {:.3}", w.t, w.sigma_t);
    let v = certify(&w, &CertificationBounds::cached()).unwrap();
    println!("  {:?}, {:.2} sigma from the deciding bound", v.level, v.margin_sigmas);
}
