//! Solves the single-antenna placement problem for a few users and compares
//! the closed-form solution against a brute-force sweep of the composite gain
//! along the waveguide.

use dipass::config::RawConfig;
use dipass::single_pa::{interior_optimum_exists, oracle_max_gain, solve_placement};
use dipass::{SystemConfig, Vec3};

fn main() {
    let mut raw = RawConfig::default();
    raw.num_waveguides = 1;
    let cfg = SystemConfig::from_raw(raw).unwrap();
    let wg_x = 5.0;

    println!("waveguide along y at x = {wg_x} m, height {} m", cfg.region[2]);
    println!(
        "interior optimum exists (attenuation trade-off): {}",
        interior_optimum_exists(cfg.wg_atten_nat, cfg.los_coeff)
    );

    println!(
        "\n{:>16} {:>10} {:>10} {:>12} {:>10}",
        "user (x, y)", "y* m", "oracle m", "gain", "boundary"
    );
    for (x, y) in [(5.0, 3.0), (8.0, 5.0), (2.0, 9.0), (5.0, 0.2)] {
        let user = Vec3::new(x, y, 0.0);
        let sol = solve_placement(&user, wg_x, &cfg).unwrap();
        let (y_oracle, _) = oracle_max_gain(&user, wg_x, &cfg).unwrap();
        println!(
            "{:>16} {:>10.4} {:>10.4} {:>12.4e} {:>10}",
            format!("({x:.1}, {y:.1})"),
            sol.y_star,
            y_oracle,
            sol.gain_sq,
            sol.boundary_hit
        );
    }

    // The optimal backoff gamma* = y_user - y* depends only on the lateral
    // offset, not on how far down the guide the user sits.
    println!("\nbackoff gamma* for users at x = 8 (lateral offset fixed):");
    for y in [3.0, 5.0, 8.0] {
        let sol = solve_placement(&Vec3::new(8.0, y, 0.0), wg_x, &cfg).unwrap();
        println!("  user y = {y:.1} m: gamma* = {:.6} m", sol.gamma_star);
    }
}
