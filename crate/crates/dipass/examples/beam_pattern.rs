//! Prints the directional beam characteristics of a single pinching antenna:
//! divergence angles, half-power footprint versus range and a transverse cut
//! of the normalized field intensity.

use dipass::channel::{beam_field, divergence_angles, half_power_footprint, transverse_power_integral};
use dipass::geometry::LocalCoords;
use dipass::SystemConfig;

fn main() {
    let cfg = SystemConfig::defaults();
    let (w1, w2) = cfg.beam_widths();
    println!("carrier: {:.0} GHz, wavelength {:.3} mm", cfg.carrier_freq / 1e9, cfg.wavelength * 1e3);
    println!("emission spot: w1 = {:.3} mm (x), w2 = {:.3} mm (z)", w1 * 1e3, w2 * 1e3);

    let (tx, tz) = divergence_angles(&cfg);
    println!("divergence: theta_x = {:.2} deg, theta_z = {:.2} deg", tx.to_degrees(), tz.to_degrees());

    println!("\nhalf-power footprint (beam cross-section where intensity falls to 1/2):");
    println!("{:>8} {:>12} {:>12}", "range m", "x-diam m", "z-diam m");
    for range in [1.0, 2.0, 3.0, 5.0, 10.0] {
        let (dx, dz) = half_power_footprint(&cfg, range);
        println!("{range:>8.1} {dx:>12.4} {dz:>12.4}");
    }

    // The transverse intensity integrates to one at every range: the beam
    // spreads but carries constant power.
    println!("\ntransverse power integral (should be 1 at any range):");
    for range in [0.5, 3.0, 10.0] {
        println!("  range {range:>5.1} m: {:.9}", transverse_power_integral(&cfg, range, 6.0, 400));
    }

    // Normalized intensity profile across the wide (z) axis at 3 m.
    let range = 3.0;
    let on_axis = beam_field(&LocalCoords { x: 0.0, y: range, z: 0.0 }, &cfg).norm_sqr();
    println!("\nintensity cut along z at {range} m (relative to boresight):");
    for i in 0..=10 {
        let z = -0.12 + 0.024 * i as f64;
        let v = beam_field(&LocalCoords { x: 0.0, y: range, z }, &cfg).norm_sqr() / on_axis;
        let bar = "#".repeat((v * 40.0).round() as usize);
        println!("  z = {z:>7.3} m  {v:>6.3}  {bar}");
    }
}
