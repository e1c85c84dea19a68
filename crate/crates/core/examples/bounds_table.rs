//! Recomputes every certification bound and prints the table.

use std::time::Instant;

use multipair::certify::report::{bounds_report, render, ReportOptions};

fn main() {
    let start = Instant::now();
    let rows = bounds_report(&ReportOptions::default()).expect("bounds");
    print!("{}", render(&rows));
    eprintln!("elapsed {:.2?}", start.elapsed());
}
