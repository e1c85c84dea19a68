//! Pair rate needed for a given stored two-fold rate, checked against a
//! short simulation.

use multipair::coincidence::{analyze, AnalysisConfig};
use multipair::simulate::{self, ExperimentConfig};

fn main() {
    let mut config = ExperimentConfig { duration_s: 2.0, ..ExperimentConfig::default() };
    for target in [200.0, 1000.0, 5000.0] {
        config.mean_pairs_per_pulse = simulate::calibrate_mean_pairs(&config, target);
        let stream = simulate::run(&config).expect("valid config");
        let a = analyze(&stream.events, AnalysisConfig::default()).expect("sorted stream");
        println!(
            "target {target:>6.0} Hz  mu {:.3e}  simulated {:>8.1} Hz",
            config.mean_pairs_per_pulse,
            a.stored_twofolds as f64 / config.duration_s
        );
    }
}
