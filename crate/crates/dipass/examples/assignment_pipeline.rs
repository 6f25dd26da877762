//! Runs the full multi-antenna deployment pipeline on one random scenario and
//! prints the assignment, the placed antenna states and the channel matrices
//! as JSON.

use dipass::assignment::assignment_to_json;
use dipass::channel::assemble_channels;
use dipass::config::RawConfig;
use dipass::harness::{generate_scenario, run_pipeline, Beamformer};
use dipass::{Orientation, SystemConfig, Vec3};

fn main() {
    let mut raw = RawConfig::default();
    raw.num_waveguides = 3;
    raw.num_pas_per_wg = 2;
    raw.num_users = 4;
    let cfg = SystemConfig::from_raw(raw).unwrap();

    let scen = generate_scenario(&cfg, 42);
    println!("users:");
    for (m, u) in scen.users.iter().enumerate() {
        println!("  {m}: ({:.2}, {:.2}, {:.2})", u.x, u.y, u.z);
    }

    let result = run_pipeline(&scen.users, &cfg, Beamformer::Wmmse).unwrap();
    println!("\nassignment and placement:");
    println!("{}", serde_json::to_string_pretty(&assignment_to_json(&result.mask, &result.states)).unwrap());

    println!(
        "phase tuning: {} shifts, residual misalignment {:.4} rad",
        result.tune.shifts.len(),
        result.tune.residual_misalignment
    );

    let pas: Vec<(Vec3, Orientation)> = result
        .states
        .iter()
        .map(|s| (s.position(&cfg), s.orientation))
        .collect();
    let channels = assemble_channels(&pas, &scen.users, &cfg).unwrap();
    println!("\nchannel factors:");
    println!("{}", serde_json::to_string_pretty(&channels.to_json()).unwrap());

    println!(
        "\nWMMSE: {} iterations, converged = {}",
        result.precoder.iterations, result.precoder.converged
    );
    println!("sum rate: {:.3} bits/s/Hz", result.report.sum_rate);
    for (m, (&rate, &served)) in result.report.rates.iter().zip(&result.report.served).enumerate() {
        println!("  user {m}: {rate:.3} bits/s/Hz, served = {served}");
    }
}
