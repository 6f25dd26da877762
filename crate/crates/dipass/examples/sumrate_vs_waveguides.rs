//! Monte-Carlo comparison of zero-forcing and WMMSE sum rates as the number
//! of waveguides grows, using the deterministic experiment harness.

use dipass::config::RawConfig;
use dipass::harness::{generate_scenario, run_pipeline, trial_seed, Beamformer};
use dipass::SystemConfig;

fn main() {
    let trials = 30u64;
    let seed = 1u64;
    println!("{trials} scenarios per point, 5 users, seed {seed}");
    println!("{:>4} {:>12} {:>12} {:>10} {:>10}", "N", "ZF rate", "WMMSE rate", "ZF served", "WM served");

    for n in [1usize, 2, 4, 8] {
        let mut raw = RawConfig::default();
        raw.num_waveguides = n;
        raw.num_users = 5;
        let cfg = SystemConfig::from_raw(raw).unwrap();

        let mut rate = [0.0f64; 2];
        let mut served = [0.0f64; 2];
        for t in 0..trials {
            let scen = generate_scenario(&cfg, trial_seed(seed, t));
            for (i, bf) in [Beamformer::Zf, Beamformer::Wmmse].into_iter().enumerate() {
                let result = run_pipeline(&scen.users, &cfg, bf).unwrap();
                rate[i] += result.report.sum_rate;
                served[i] += result.report.num_served as f64;
            }
        }
        let k = trials as f64;
        println!(
            "{n:>4} {:>12.3} {:>12.3} {:>10.2} {:>10.2}",
            rate[0] / k,
            rate[1] / k,
            served[0] / k,
            served[1] / k
        );
    }
}
