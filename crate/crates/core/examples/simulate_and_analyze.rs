//! Streams a simulated run straight into the analyzer and prints the
//! two-fold peaks, the delay histogram and the witness for each path class.
//!
//! `cargo run --release --example simulate_and_analyze -- [duration_s] [mean_pairs]`

use multipair::coincidence::{mode_capacity, AnalysisConfig, Analyzer, PathClass};
use multipair::simulate::{EventGenerator, ExperimentConfig};
use multipair::witness;

fn main() {
    let mut args = std::env::args().skip(1);
    let duration_s = args.next().map_or(40.0, |s| s.parse().expect("duration"));
    let mu = args.next().map_or(0.05, |s| s.parse().expect("mean pairs"));
    let config = ExperimentConfig { duration_s, mean_pairs_per_pulse: mu, ..ExperimentConfig::default() };

    let mut analyzer = Analyzer::new(AnalysisConfig::default()).unwrap();
    for chunk in EventGenerator::new(&config).unwrap() {
        for e in chunk {
            analyzer.push(e).unwrap();
        }
    }
    let a = analyzer.finish();

    println!("{} events over {duration_s} s", a.event_count);
    println!(
        "two-folds: transmitted {} ({:.0} Hz), stored {} ({:.0} Hz)",
        a.transmitted_twofolds,
        a.transmitted_twofolds as f64 / duration_s,
        a.stored_twofolds,
        a.stored_twofolds as f64 / duration_s
    );
    let cap = a.capacity_histogram();
    println!("stored delay histogram (5 ns bins from 5 ns): {:?}", cap.counts);
    println!("modes: {}", mode_capacity(&cap));
    for class in PathClass::ALL {
        let table = a.count_table(class);
        match witness::witness_statistic(&table) {
            Ok(w) => println!("{:<24} n = {:>5}  T = {:.3} ± {:.3}", class.as_str(), table.total(), w.t, w.sigma_t),
            Err(e) => println!("{:<24} {e}", class.as_str()),
        }
    }
    println!("dropped: {:?}", a.diagnostics);
}
