//! Explicit states approaching the separable and one-pair bounds.

use multipair::certify::seesaw;
use multipair::witness::{self, SettingsPair, T_ONE_PAIR, T_PPT};

fn main() {
    let (a, b) = witness::witness_operators(&SettingsPair::default());
    for (rank, target) in [(1, T_PPT), (2, T_ONE_PAIR)] {
        let r = seesaw::seesaw(&a, &b, rank, 20, 11);
        println!("Schmidt rank {rank}: {:.8} (reference {target:.8}), {} sweeps", r.ratio, r.sweeps);
    }
}
