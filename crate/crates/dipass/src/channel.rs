//! The three-factor channel: equal-quota coupling along the waveguide, a
//! directional Gaussian beam at the PA, the stochastic-LoS free-space leg,
//! and the composite matrix that ties them together.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::geometry::{normalize_angle, to_local, LocalCoords, Orientation, Vec3};
use crate::single_pa::PlacementSolution;
use crate::DipassError;

/// Coupling lengths for the L PAs of one waveguide under equal quota division.
///
/// Each PA extracts a 1/L power share at the waveguide input; the memoryless
/// exponential decay makes the required length depend only on the PA's order.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    pub lengths: Vec<f64>,
}

/// tau_l = arcsin(sqrt(1 / (L + 1 - l))) / kappa, l = 1..L.
pub fn coupling_lengths(l_count: usize, kappa: f64) -> CouplingPlan {
    assert!(l_count >= 1 && kappa > 0.0);
    let lengths = (1..=l_count)
        .map(|l| (1.0 / (l_count + 1 - l) as f64).sqrt().asin() / kappa)
        .collect();
    CouplingPlan { lengths }
}

impl CouplingPlan {
    /// Telescoping amplitude product prod_{i<l} sqrt(1 - sin^2(kappa tau_i)) * sin(kappa tau_l).
    pub fn coupled_amplitude(&self, kappa: f64, l: usize) -> f64 {
        let mut amp = (kappa * self.lengths[l]).sin();
        for tau in &self.lengths[..l] {
            amp *= (1.0 - (kappa * tau).sin().powi(2)).sqrt();
        }
        amp
    }
}

/// Waveguide-to-PA channel coefficient at in-guide distance `y_pa`:
/// sqrt(1/L) * e^{-alpha_w y / 2} * e^{-j 2 pi y / lambda_g}.
pub fn wg_to_pa(y_pa: f64, l_count: usize, alpha_w: f64, lambda_g: f64) -> Result<Complex64, DipassError> {
    if !(y_pa >= 0.0) {
        return Err(DipassError::Geometry(format!(
            "in-guide distance must be non-negative, got {y_pa}"
        )));
    }
    let mag = (1.0 / l_count as f64).sqrt() * (-alpha_w * y_pa / 2.0).exp();
    let phase = -2.0 * PI * y_pa / lambda_g;
    Ok(Complex64::from_polar(mag, phase))
}

/// Gaussian beam parameters at axial range `y` (meters).
#[derive(Debug, Clone, Copy)]
pub struct BeamParams {
    /// Initial widths, meters.
    pub w1: f64,
    pub w2: f64,
    /// Beam radii at range, meters.
    pub big_w1: f64,
    pub big_w2: f64,
    /// Radii of curvature (far field: equal to the range).
    pub r1: f64,
    pub r2: f64,
    /// Gouy phases, radians.
    pub gouy1: f64,
    pub gouy2: f64,
    /// Normalization, 1/m: B^2 = 2 / (pi w1 w2).
    pub norm: f64,
}

impl BeamParams {
    pub fn at_range(y: f64, cfg: &SystemConfig) -> Self {
        let (w1, w2) = cfg.beam_widths();
        let n = cfg.refractive_index;
        let lam = cfg.wavelength;
        let spread = |w: f64| lam * y / (PI * n * w);
        BeamParams {
            w1,
            w2,
            big_w1: spread(w1),
            big_w2: spread(w2),
            r1: y,
            r2: y,
            gouy1: (lam * y / (PI * n * w1)).atan(),
            gouy2: (lam * y / (PI * n * w2)).atan(),
            norm: (2.0 / (PI * w1 * w2)).sqrt(),
        }
    }
}

/// Complex beam amplitude at a point in the PA's local frame.
///
/// Forward half-space only: for y <= 0 the radiated field is exactly zero.
pub fn beam_field(local: &LocalCoords, cfg: &SystemConfig) -> Complex64 {
    if local.y <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let p = BeamParams::at_range(local.y, cfg);
    let k = 2.0 * PI / cfg.wavelength;
    let n = cfg.refractive_index;
    let amp = (p.w1 * p.w2 / (p.big_w1 * p.big_w2)).sqrt() * p.norm;
    let gauss = -(local.x * local.x / (p.big_w1 * p.big_w1)
        + local.z * local.z / (p.big_w2 * p.big_w2));
    let phase = -k
        * n
        * (local.x * local.x / (2.0 * p.r1) + local.z * local.z / (2.0 * p.r2) + local.y)
        + (p.gouy1 + p.gouy2) / 2.0;
    amp * gauss.exp() * Complex64::from_polar(1.0, phase)
}

/// Far-field divergence half-angles (radians) along the local x and z axes:
/// arctan(lambda / (pi n w_i)). The wavelength cancels against w_i = v a lambda,
/// leaving a function of (n, v, a, b) only.
pub fn divergence_angles(cfg: &SystemConfig) -> (f64, f64) {
    let (w1, w2) = cfg.beam_widths();
    let n = cfg.refractive_index;
    (
        (cfg.wavelength / (PI * n * w1)).atan(),
        (cfg.wavelength / (PI * n * w2)).atan(),
    )
}

/// Half-power footprint diameters (x, z) of the beam at `range` meters:
/// the intensity falls to one half at radius W_i * sqrt(ln 2 / 2).
pub fn half_power_footprint(cfg: &SystemConfig, range: f64) -> (f64, f64) {
    let p = BeamParams::at_range(range, cfg);
    let d = |w: f64| 2.0 * w * (0.5 * std::f64::consts::LN_2).sqrt();
    (d(p.big_w1), d(p.big_w2))
}

/// Numerical quadrature of |beam_field|^2 over the transverse plane at a
/// fixed range (Simpson's rule on a window of `half_widths` beam radii).
pub fn transverse_power_integral(cfg: &SystemConfig, range: f64, half_widths: f64, n: usize) -> f64 {
    let p = BeamParams::at_range(range, cfg);
    let (hx, hz) = (half_widths * p.big_w1, half_widths * p.big_w2);
    let n = if n % 2 == 0 { n } else { n + 1 };
    let (dx, dz) = (2.0 * hx / n as f64, 2.0 * hz / n as f64);
    let simpson_w = |i: usize| -> f64 {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut total = 0.0;
    for i in 0..=n {
        let x = -hx + i as f64 * dx;
        let mut row = 0.0;
        for j in 0..=n {
            let z = -hz + j as f64 * dz;
            let f = beam_field(&LocalCoords { x, y: range, z }, cfg);
            row += simpson_w(j) * f.norm_sqr();
        }
        total += simpson_w(i) * row * dz / 3.0;
    }
    total * dx / 3.0
}

/// PA-to-user channel coefficient: sqrt(eta) * alpha_L^d * beam_field(local),
/// with eta = lambda^2 / (4 pi) and d the Euclidean PA-user distance.
pub fn pa_to_user(
    user: &Vec3,
    pa: &Vec3,
    orient: &Orientation,
    cfg: &SystemConfig,
) -> Result<Complex64, DipassError> {
    let local = to_local(user, pa, orient)?;
    let d = user.distance(pa);
    let eta = cfg.wavelength * cfg.wavelength / (4.0 * PI);
    Ok(eta.sqrt() * cfg.los_coeff.powf(d) * beam_field(&local, cfg))
}

/// Composite single-link power gain |H|^2 = |wg_to_pa|^2 * |pa_to_user|^2,
/// for a PA at in-guide distance `pa.y` on a waveguide with `l_count` PAs.
pub fn composite_gain_sq(
    user: &Vec3,
    pa: &Vec3,
    orient: &Orientation,
    cfg: &SystemConfig,
    l_count: usize,
) -> Result<f64, DipassError> {
    let wp = wg_to_pa(pa.y, l_count, cfg.wg_atten_nat, cfg.guided_wavelength)?;
    let pu = pa_to_user(user, pa, orient, cfg)?;
    Ok(wp.norm_sqr() * pu.norm_sqr())
}

/// One entry of the optimal channel gain matrix: the best complex gain a PA
/// slot can offer a user once placed and oriented by the single-PA solver.
#[derive(Debug, Clone)]
pub struct GainEntry {
    pub magnitude: f64,
    /// Radians in (-pi, pi].
    pub phase: f64,
    /// (user, order-on-waveguide, waveguide), zero-based.
    pub owner: (usize, usize, usize),
    pub optimal_y: f64,
    pub optimal_orientation: Orientation,
}

impl GainEntry {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }
}

/// Evaluates the optimal-gain matrix entry for user `m` and PA slot
/// (`order`, `waveguide`) from a solved placement:
/// sqrt(1/L) e^{-alpha_w y*/2} alpha_L^{y~*} (lambda/2) n v sqrt(2ab) / y~*.
pub fn optimal_gain_entry(
    m: usize,
    order: usize,
    waveguide: usize,
    cfg: &SystemConfig,
    solution: &PlacementSolution,
) -> Result<GainEntry, DipassError> {
    let l_count = cfg.num_pas_per_wg;
    let y_star = solution.y_star;
    let range = (solution.lateral_sq + solution.gamma_star * solution.gamma_star).sqrt();
    if range <= 0.0 {
        return Err(DipassError::Geometry("user coincides with the PA".into()));
    }
    let [a, b] = cfg.cross_section;
    let n = cfg.refractive_index;
    let v = cfg.beam_correction;
    let lam = cfg.wavelength;
    let magnitude = (1.0 / l_count as f64).sqrt()
        * (-cfg.wg_atten_nat * y_star / 2.0).exp()
        * cfg.los_coeff.powf(range)
        * (lam / 2.0)
        * n
        * v
        * (2.0 * a * b).sqrt()
        / range;
    let p = BeamParams::at_range(range, cfg);
    let k = 2.0 * PI / lam;
    let phase = normalize_angle(
        -2.0 * PI / cfg.guided_wavelength * y_star - k * n * range + (p.gouy1 + p.gouy2) / 2.0,
    );
    Ok(GainEntry {
        magnitude,
        phase,
        owner: (m, order, waveguide),
        optimal_y: y_star,
        optimal_orientation: solution.orientation,
    })
}

/// The assembled three-factor channel for a fully placed deployment.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Diagonal of the NL x NL waveguide-to-PA matrix.
    pub h_wp: DVector<Complex64>,
    /// M x NL PA-to-user matrix.
    pub h_pu: DMatrix<Complex64>,
    /// NL x N block-diagonal 0/1 distribution matrix.
    pub lambda_mask: DMatrix<f64>,
    /// M x N composite H = h_pu * diag(h_wp) * lambda.
    pub composite: DMatrix<Complex64>,
}

impl ChannelSet {
    /// Per-PA composite coefficient h_pu[m, ln] * h_wp[ln].
    pub fn link(&self, m: usize, pa: usize) -> Complex64 {
        self.h_pu[(m, pa)] * self.h_wp[pa]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let cvec = |c: &Complex64| serde_json::json!([c.re, c.im]);
        serde_json::json!({
            "h_wp_diag": self.h_wp.iter().map(cvec).collect::<Vec<_>>(),
            "h_pu": (0..self.h_pu.nrows()).map(|m| {
                (0..self.h_pu.ncols()).map(|p| cvec(&self.h_pu[(m, p)])).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "lambda": (0..self.lambda_mask.nrows()).map(|i| {
                (0..self.lambda_mask.ncols()).map(|j| self.lambda_mask[(i, j)]).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "composite": (0..self.composite.nrows()).map(|m| {
                (0..self.composite.ncols()).map(|n| cvec(&self.composite[(m, n)])).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }
}

/// Assembles the channel factors for PA slots in index order
/// ln = (n-1)L + l. `pas` holds each slot's position and orientation.
pub fn assemble_channels(
    pas: &[(Vec3, Orientation)],
    users: &[Vec3],
    cfg: &SystemConfig,
) -> Result<ChannelSet, DipassError> {
    let (n_wg, l_count) = (cfg.num_waveguides, cfg.num_pas_per_wg);
    let nl = n_wg * l_count;
    assert_eq!(pas.len(), nl, "expected one (position, orientation) per PA slot");
    let m_users = users.len();

    let mut h_wp = DVector::from_element(nl, Complex64::new(0.0, 0.0));
    for (idx, (pos, _)) in pas.iter().enumerate() {
        h_wp[idx] = wg_to_pa(pos.y, l_count, cfg.wg_atten_nat, cfg.guided_wavelength)?;
    }

    let mut h_pu = DMatrix::from_element(m_users, nl, Complex64::new(0.0, 0.0));
    for (m, user) in users.iter().enumerate() {
        for (idx, (pos, orient)) in pas.iter().enumerate() {
            h_pu[(m, idx)] = pa_to_user(user, pos, orient, cfg)?;
        }
    }

    let mut lambda_mask = DMatrix::zeros(nl, n_wg);
    for n in 0..n_wg {
        for l in 0..l_count {
            lambda_mask[(n * l_count + l, n)] = 1.0;
        }
    }

    let lambda_c = lambda_mask.map(|x| Complex64::new(x, 0.0));
    let composite = &h_pu * DMatrix::from_diagonal(&h_wp) * lambda_c;
    Ok(ChannelSet {
        h_wp,
        h_pu,
        lambda_mask,
        composite,
    })
}
