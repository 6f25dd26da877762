//! Closed-form single-PA optimization: orientation that puts the user on
//! boresight, the existence condition for an interior optimum, the optimal
//! in-guide offset (exact root plus closed-form approximation), and an
//! independent 1-D search oracle.

use std::f64::consts::FRAC_PI_2;

use crate::channel::composite_gain_sq;
use crate::config::SystemConfig;
use crate::geometry::{Orientation, Vec3};
use crate::DipassError;

/// Solved placement for one PA-user pair.
#[derive(Debug, Clone)]
pub struct PlacementSolution {
    /// Optimal in-guide position, meters, in [0, y^U].
    pub y_star: f64,
    /// Horizontal offset y^U - y_star after clamping.
    pub gamma_star: f64,
    /// Squared lateral distance A = (x^U - x^P)^2 + (z^U - z^P)^2.
    pub lateral_sq: f64,
    pub orientation: Orientation,
    pub gain_sq: f64,
    /// True when the unconstrained optimum fell outside [0, y^U].
    pub boundary_hit: bool,
}

/// Orientation pointing the beam axis straight at the user.
///
/// Uses two-argument arctangents so the elevation lands in (pi/2, pi]
/// regardless of quadrant. A user directly below gets the canonical
/// azimuth pi/2.
pub fn optimal_orientation(user: &Vec3, pa: &Vec3) -> Result<Orientation, DipassError> {
    let dx = user.x - pa.x;
    let dy = user.y - pa.y;
    let dz = user.z - pa.z;
    if dx == 0.0 && dy == 0.0 && dz == 0.0 {
        return Err(DipassError::Geometry("user and PA coincide".into()));
    }
    if dz >= 0.0 {
        return Err(DipassError::Geometry(format!(
            "user must lie below the PA (dz = {dz})"
        )));
    }
    let horiz = dx.hypot(dy);
    let theta = horiz.atan2(dz);
    let phi = if horiz == 0.0 {
        FRAC_PI_2
    } else {
        dy.atan2(dx)
    };
    Orientation::new(theta, phi)
}

/// Existence of an interior (non-origin) optimum: alpha_L < e^{-alpha_W / 2}.
pub fn interior_optimum_exists(alpha_w: f64, alpha_l: f64) -> bool {
    alpha_l < (-alpha_w / 2.0).exp()
}

/// d ln|H|^2 / d y^P at offset gamma = y^U - y^P with the user on boresight:
/// -alpha_W - 2 ln(alpha_L) gamma / sqrt(A + gamma^2) + 2 gamma / (A + gamma^2).
pub fn stationarity_derivative(gamma: f64, lateral_sq: f64, alpha_w: f64, alpha_l: f64) -> f64 {
    let r2 = lateral_sq + gamma * gamma;
    -alpha_w - 2.0 * alpha_l.ln() * gamma / r2.sqrt() + 2.0 * gamma / r2
}

fn stationarity_derivative_prime(gamma: f64, lateral_sq: f64, alpha_l: f64) -> f64 {
    let a = lateral_sq;
    let r2 = a + gamma * gamma;
    -2.0 * alpha_l.ln() * a / r2.powf(1.5) + 2.0 * (a - gamma * gamma) / (r2 * r2)
}

/// Closed-form approximate offset: sqrt(A alpha_W^2 / ((2 ln alpha_L)^2 - alpha_W^2)).
pub fn optimal_offset_approx(lateral_sq: f64, alpha_w: f64, alpha_l: f64) -> Result<f64, DipassError> {
    if alpha_w == 0.0 {
        return Ok(0.0);
    }
    let denom = (2.0 * alpha_l.ln()).powi(2) - alpha_w * alpha_w;
    if denom <= 0.0 {
        return Err(DipassError::NoInteriorOptimum);
    }
    Ok((lateral_sq * alpha_w * alpha_w / denom).sqrt())
}

/// Optimal offset gamma* for an interior optimum.
///
/// The Taylor-derived closed form seeds the root; a few Newton steps on the
/// stationarity derivative restore exact stationarity (|derivative| < 1e-6),
/// with a bisection fallback if Newton stalls.
pub fn optimal_offset_exact(lateral_sq: f64, alpha_w: f64, alpha_l: f64) -> Result<f64, DipassError> {
    if !interior_optimum_exists(alpha_w, alpha_l) {
        return Err(DipassError::NoInteriorOptimum);
    }
    if !(lateral_sq > 0.0) {
        return Err(DipassError::Geometry(format!(
            "lateral distance must be positive, got A = {lateral_sq}"
        )));
    }
    if alpha_w < 1e-14 {
        // No waveguide loss: the PA sits level with the user.
        return Ok(0.0);
    }
    let a = lateral_sq;
    let ln_l = alpha_l.ln();

    // Second-order Taylor closed form as the initializer.
    let disc = a + ln_l * a * a * (alpha_w + 2.0 * ln_l);
    let mut gamma = if disc >= 0.0 {
        let theta = (-1.0 - disc.sqrt()) / (ln_l * a);
        let g = a.sqrt() / theta.tan();
        if g.is_finite() && g > 0.0 {
            g
        } else {
            optimal_offset_approx(a, alpha_w, alpha_l)?
        }
    } else {
        optimal_offset_approx(a, alpha_w, alpha_l)?
    };

    for _ in 0..5 {
        let f = stationarity_derivative(gamma, a, alpha_w, alpha_l);
        if f.abs() < 1e-12 {
            break;
        }
        let fp = stationarity_derivative_prime(gamma, a, alpha_l);
        let step = f / fp;
        let next = gamma - step;
        gamma = if next > 0.0 { next } else { gamma / 2.0 };
    }

    if stationarity_derivative(gamma, a, alpha_w, alpha_l).abs() > 1e-9 {
        // Bracket the sign change and bisect.
        let (mut lo, mut hi) = (1e-12, gamma.max(1.0));
        while stationarity_derivative(hi, a, alpha_w, alpha_l) < 0.0 && hi < 1e6 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if stationarity_derivative(mid, a, alpha_w, alpha_l) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        gamma = 0.5 * (lo + hi);
    }
    Ok(gamma)
}

fn pa_at(wg_x: f64, y: f64, dz: f64) -> Vec3 {
    Vec3::new(wg_x, y, dz)
}

/// ln of the single-link gain at in-guide position `y` with the user on
/// boresight, evaluated in closed form:
/// -ln L - alpha_W y + 2 ln(alpha_L) d + ln(n^2 w1 w2 / 2) - 2 ln d.
///
/// Stays finite where the linear-domain gain underflows (long waveguides,
/// strong LoS decay), which the search oracle needs.
pub fn log_gain_at(user: &Vec3, wg_x: f64, y: f64, cfg: &SystemConfig) -> Result<f64, DipassError> {
    if !(y >= 0.0) {
        return Err(DipassError::Geometry(format!(
            "in-guide position must be non-negative, got {y}"
        )));
    }
    let lateral_sq = (user.x - wg_x).powi(2) + (user.z - cfg.region[2]).powi(2);
    let d2 = lateral_sq + (user.y - y).powi(2);
    if d2 <= 0.0 {
        return Err(DipassError::Geometry("user coincides with the PA".into()));
    }
    let (w1, w2) = cfg.beam_widths();
    let n = cfg.refractive_index;
    Ok(-(cfg.num_pas_per_wg as f64).ln() - cfg.wg_atten_nat * y
        + cfg.los_coeff.ln() * 2.0 * d2.sqrt()
        + (n * n * w1 * w2 / 2.0).ln()
        - d2.ln())
}

/// Single-link gain at in-guide position `y` with the orientation re-aimed
/// at the user.
pub fn gain_at(user: &Vec3, wg_x: f64, y: f64, cfg: &SystemConfig) -> Result<f64, DipassError> {
    let pa = pa_at(wg_x, y, cfg.region[2]);
    let orient = optimal_orientation(user, &pa)?;
    composite_gain_sq(user, &pa, &orient, cfg, cfg.num_pas_per_wg)
}

/// Solves placement and orientation for one PA serving one user:
/// y* = max(0, y^U - gamma*) when an interior optimum exists, else y* = 0.
pub fn solve_placement(user: &Vec3, wg_x: f64, cfg: &SystemConfig) -> Result<PlacementSolution, DipassError> {
    let dz = cfg.region[2];
    let lateral_sq = (user.x - wg_x).powi(2) + (user.z - dz).powi(2);
    let y_user = user.y;
    let (alpha_w, alpha_l) = (cfg.wg_atten_nat, cfg.los_coeff);

    let (y_star, boundary_hit) = if !interior_optimum_exists(alpha_w, alpha_l) {
        // The gain derivative is negative everywhere: stay at the entrance.
        (0.0, true)
    } else if lateral_sq <= 1e-24 {
        (y_user.max(0.0), false)
    } else {
        let gamma = optimal_offset_exact(lateral_sq, alpha_w, alpha_l)?;
        if y_user - gamma >= 0.0 {
            (y_user - gamma, false)
        } else {
            (0.0, true)
        }
    };

    let pa = pa_at(wg_x, y_star, dz);
    let orientation = optimal_orientation(user, &pa)?;
    let gain_sq = composite_gain_sq(user, &pa, &orientation, cfg, cfg.num_pas_per_wg)?;
    Ok(PlacementSolution {
        y_star,
        gamma_star: y_user - y_star,
        lateral_sq,
        orientation,
        gain_sq,
        boundary_hit,
    })
}

/// Golden-section search for the maximum of `f` on [a, b] to `tol` in x.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}

/// Independent placement oracle: coarse scan of the gain over
/// y in [0, min(y^U, Dy)] with the orientation re-optimized at every sample,
/// refined by golden-section search to 1e-6 m. Deterministic.
pub fn oracle_max_gain(user: &Vec3, wg_x: f64, cfg: &SystemConfig) -> Result<(f64, f64), DipassError> {
    let hi = user.y.min(cfg.region[1]).max(0.0);
    let eval = |y: f64| log_gain_at(user, wg_x, y, cfg).unwrap_or(f64::NEG_INFINITY);
    if hi == 0.0 {
        return Ok((0.0, gain_at(user, wg_x, 0.0, cfg)?));
    }
    // Coarse scan guards against multiple local maxima near the existence
    // threshold; golden section then refines the best bracket.
    let samples = 1200;
    let mut best_i: usize = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=samples {
        let y = hi * i as f64 / samples as f64;
        let v = eval(y);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = hi * best_i.saturating_sub(1) as f64 / samples as f64;
    let up = hi * (best_i + 1).min(samples) as f64 / samples as f64;
    let (y, _) = golden_section_max(eval, lo, up, 1e-6);
    // The maximum may sit exactly on a boundary of the domain.
    let mut cands = vec![(y, gain_at(user, wg_x, y, cfg)?)];
    for yb in [0.0, hi] {
        cands.push((yb, gain_at(user, wg_x, yb, cfg)?));
    }
    cands.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(*cands.last().unwrap())
}
