//! Waveguide-level precoding over the effective M x N channel: zero-forcing
//! and WMMSE under a unit total-power constraint, plus SINR/rate evaluation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::assignment::AssignmentMask;
use crate::DipassError;

/// Rate below which a user counts as unserved, bits/s/Hz.
pub const SERVED_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderMethod {
    ZeroForcing,
    Wmmse,
}

/// An N x M precoder with tr(W^H W) = 1.
#[derive(Debug, Clone)]
pub struct Precoder {
    pub w: DMatrix<Complex64>,
    pub method: PrecoderMethod,
    pub iterations: usize,
    pub converged: bool,
    /// Sum-rate after each WMMSE iteration; empty for zero-forcing.
    pub objective_trace: Vec<f64>,
    /// Set when a rank-deficient Gram matrix forced ridge regularization.
    pub regularized: bool,
}

/// Per-user SINR and rate summary.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub served: Vec<bool>,
    pub num_served: usize,
}

/// Collapses per-PA channel entries into the effective M x N channel seen at
/// the waveguide inputs: entries of PAs serving user m add coherently per
/// waveguide, all other PAs contribute nothing to row m.
pub fn effective_channel(
    mask: &AssignmentMask,
    entries: &DMatrix<Complex64>,
    num_waveguides: usize,
    pas_per_wg: usize,
) -> DMatrix<Complex64> {
    let m_users = mask.num_users();
    let mut g = DMatrix::from_element(m_users, num_waveguides, Complex64::new(0.0, 0.0));
    for m in 0..m_users {
        for p in mask.pas_of_user(m) {
            g[(m, p / pas_per_wg)] += entries[(m, p)];
        }
    }
    g
}

fn frobenius_sq(w: &DMatrix<Complex64>) -> f64 {
    w.iter().map(|c| c.norm_sqr()).sum()
}

/// Zero-forcing precoder for the effective channel `g` (M x N). With more
/// users than waveguides the min(M, N) strongest rows are served and the
/// rest receive zero columns. Output power is normalized to tr(W^H W) = 1.
pub fn zf_precoder(g: &DMatrix<Complex64>) -> Result<Precoder, DipassError> {
    let (m_users, n_wg) = g.shape();
    if m_users == 0 || n_wg == 0 {
        return Err(DipassError::Numeric("empty channel matrix".into()));
    }
    let k = m_users.min(n_wg);
    let mut order: Vec<usize> = (0..m_users).collect();
    order.sort_by(|&a, &b| g.row(b).norm().total_cmp(&g.row(a).norm()).then(a.cmp(&b)));
    let mut served: Vec<usize> = order[..k].to_vec();
    served.sort_unstable();

    let gs = DMatrix::from_fn(k, n_wg, |r, c| g[(served[r], c)]);
    let gram = &gs * gs.adjoint();
    let trace = gram.diagonal().iter().map(|c| c.re).sum::<f64>().max(f64::MIN_POSITIVE);
    let solve_with = |ridge: f64| -> Option<DMatrix<Complex64>> {
        let mut reg = gram.clone();
        for i in 0..k {
            reg[(i, i)] += Complex64::new(ridge, 0.0);
        }
        let inv = reg.try_inverse()?;
        if !inv.iter().all(|c| c.is_finite()) {
            return None;
        }
        Some(gs.adjoint() * inv) // N x K
    };
    // A rank-deficient Gram matrix can slip past LU inversion with a finite
    // but useless result, so verify the pseudo-inverse residual and fall back
    // to a ridge for ill-conditioned channels.
    let mut regularized = false;
    let mut ws = solve_with(0.0).filter(|ws| ((&gs * ws) - DMatrix::identity(k, k)).norm() <= 1e-6);
    if ws.is_none() {
        regularized = true;
        ws = solve_with(1e-9 * trace / k as f64);
    }
    let ws = ws.ok_or_else(|| DipassError::Numeric("channel Gram matrix is singular".into()))?;

    let mut w = DMatrix::from_element(n_wg, m_users, Complex64::new(0.0, 0.0));
    for (r, &m) in served.iter().enumerate() {
        for n in 0..n_wg {
            w[(n, m)] = ws[(n, r)];
        }
    }
    let power = frobenius_sq(&w);
    if !(power > 0.0) {
        return Err(DipassError::Numeric("zero-forcing produced a zero precoder".into()));
    }
    w /= Complex64::new(power.sqrt(), 0.0);
    Ok(Precoder {
        w,
        method: PrecoderMethod::ZeroForcing,
        iterations: 0,
        converged: true,
        objective_trace: Vec::new(),
        regularized,
    })
}

/// Sum rate of precoder `w` over channel `g` under transmit power `p_tx` and
/// noise power `noise`.
pub fn sum_rate(g: &DMatrix<Complex64>, w: &DMatrix<Complex64>, p_tx: f64, noise: f64) -> f64 {
    evaluate(g, w, p_tx, noise).sum_rate
}

/// WMMSE precoder: alternating receive-filter / MSE-weight / transmit-filter
/// updates with the power constraint enforced by bisection on the Lagrange
/// multiplier. Starts from the matched filter; if that run lands below the
/// zero-forcing rate, a second run seeded at the ZF point takes over (its
/// monotone trace starts at the ZF rate, so it can never end below it).
/// Stops when the sum rate changes by less than `tol` or after `max_iter`.
pub fn wmmse_precoder(
    g: &DMatrix<Complex64>,
    p_tx: f64,
    noise: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Precoder, DipassError> {
    let (m_users, n_wg) = g.shape();
    if m_users == 0 || n_wg == 0 {
        return Err(DipassError::Numeric("empty channel matrix".into()));
    }
    let mf = g.adjoint();
    let from_mf = wmmse_from(g, p_tx, noise, max_iter, tol, mf)?;
    if let Ok(zf) = zf_precoder(g) {
        let zf_rate = sum_rate(g, &zf.w, p_tx, noise);
        if sum_rate(g, &from_mf.w, p_tx, noise) < zf_rate - 1e-12 {
            let from_zf = wmmse_from(g, p_tx, noise, max_iter, tol, zf.w)?;
            if sum_rate(g, &from_zf.w, p_tx, noise) > sum_rate(g, &from_mf.w, p_tx, noise) {
                return Ok(from_zf);
            }
        }
    }
    Ok(from_mf)
}

fn wmmse_from(
    g: &DMatrix<Complex64>,
    p_tx: f64,
    noise: f64,
    max_iter: usize,
    tol: f64,
    w_init: DMatrix<Complex64>,
) -> Result<Precoder, DipassError> {
    let (m_users, n_wg) = g.shape();
    // Fold the transmit power into the channel; the constraint stays tr = 1.
    let gt = g.map(|c| c * Complex64::new(p_tx.sqrt(), 0.0));

    let mut w = w_init;
    let p0 = frobenius_sq(&w);
    if !(p0 > 0.0) {
        return Err(DipassError::Numeric("all-zero channel matrix".into()));
    }
    w /= Complex64::new(p0.sqrt(), 0.0);

    let mut trace_log = vec![sum_rate(g, &w, p_tx, noise)];
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        // Receive filters and MSE weights.
        let mut u = vec![Complex64::new(0.0, 0.0); m_users];
        let mut lam = vec![0.0f64; m_users];
        for m in 0..m_users {
            let hm = gt.row(m);
            let total: f64 = (0..m_users)
                .map(|i| (hm * w.column(i))[(0, 0)].norm_sqr())
                .sum::<f64>()
                + noise;
            let desired = (hm * w.column(m))[(0, 0)];
            u[m] = desired / Complex64::new(total, 0.0);
            let mse = 1.0 - desired.norm_sqr() / total;
            lam[m] = 1.0 / mse.max(1e-300);
        }

        // Transmit filter: w_m = (A + mu I)^-1 lam_m u_m^* h_m^H with A
        // hermitian PSD. One eigendecomposition per iteration turns every
        // mu-evaluation of the transmit power into an O(n^2) sum, so the
        // multiplier bisection is cheap.
        let mut a = DMatrix::from_element(n_wg, n_wg, Complex64::new(0.0, 0.0));
        for m in 0..m_users {
            let hm = gt.row(m).transpose().conjugate(); // N x 1
            a += &hm * hm.adjoint() * Complex64::new(lam[m] * u[m].norm_sqr(), 0.0);
        }
        let eig = nalgebra::SymmetricEigen::new(a);
        // Projected right-hand sides c_m = Q^H (lam_m u_m^* h_m^H).
        let mut c = DMatrix::from_element(n_wg, m_users, Complex64::new(0.0, 0.0));
        for m in 0..m_users {
            let rhs = gt.row(m).transpose().conjugate() * Complex64::new(lam[m], 0.0) * u[m].conj();
            c.set_column(m, &(eig.eigenvectors.adjoint() * rhs));
        }
        let power_at = |mu: f64| -> f64 {
            let mut p = 0.0;
            for m in 0..m_users {
                for i in 0..n_wg {
                    let d = eig.eigenvalues[i].max(0.0) + mu;
                    p += c[(i, m)].norm_sqr() / (d * d);
                }
            }
            p
        };
        let assemble = |mu: f64| -> DMatrix<Complex64> {
            let mut scaled = c.clone();
            for m in 0..m_users {
                for i in 0..n_wg {
                    scaled[(i, m)] /= Complex64::new(eig.eigenvalues[i].max(0.0) + mu, 0.0);
                }
            }
            &eig.eigenvectors * scaled
        };
        let mu = if power_at(0.0).is_finite() && power_at(0.0) <= 1.0 + 1e-12 {
            0.0
        } else {
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            while !power_at(hi).is_finite() || power_at(hi) > 1.0 {
                hi *= 2.0;
                if hi > 1e18 {
                    return Err(DipassError::Numeric("power bisection failed to bracket".into()));
                }
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if !power_at(mid).is_finite() || power_at(mid) > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let mut next = assemble(mu);
        // Spending the full budget never hurts the unconstrained solution.
        let p = frobenius_sq(&next);
        if p < 1.0 - 1e-12 && p > 0.0 {
            next /= Complex64::new(p.sqrt(), 0.0);
            if sum_rate(g, &next, p_tx, noise) < *trace_log.last().unwrap() {
                next *= Complex64::new(p.sqrt(), 0.0);
            }
        }

        let rate = sum_rate(g, &next, p_tx, noise);
        if rate >= *trace_log.last().unwrap() {
            w = next;
        }
        trace_log.push(rate.max(*trace_log.last().unwrap()));
        if (trace_log[it + 1] - trace_log[it]).abs() < tol {
            converged = true;
            break;
        }
    }

    // Exhaust the power budget at the end.
    let p = frobenius_sq(&w);
    if p < 1.0 - 1e-12 {
        let scaled = w.map(|c| c / Complex64::new(p.sqrt(), 0.0));
        if sum_rate(g, &scaled, p_tx, noise) >= *trace_log.last().unwrap() {
            w = scaled;
        }
    }

    Ok(Precoder {
        w,
        method: PrecoderMethod::Wmmse,
        iterations,
        converged,
        objective_trace: trace_log,
        regularized: false,
    })
}

/// Per-user SINR, rates and the served-user count for precoder `w` over
/// effective channel `g`.
pub fn evaluate(g: &DMatrix<Complex64>, w: &DMatrix<Complex64>, p_tx: f64, noise: f64) -> RateReport {
    let m_users = g.nrows();
    let mut sinr = Vec::with_capacity(m_users);
    for m in 0..m_users {
        let hm = g.row(m);
        let signal = (hm * w.column(m))[(0, 0)].norm_sqr();
        let interf: f64 = (0..w.ncols())
            .filter(|&i| i != m)
            .map(|i| (hm * w.column(i))[(0, 0)].norm_sqr())
            .sum();
        sinr.push(p_tx * signal / (p_tx * interf + noise));
    }
    let rates: Vec<f64> = sinr.iter().map(|&x| (1.0 + x).log2()).collect();
    let served: Vec<bool> = rates.iter().map(|&r| r >= SERVED_THRESHOLD).collect();
    RateReport {
        sum_rate: rates.iter().sum(),
        num_served: served.iter().filter(|&&s| s).count(),
        sinr,
        rates,
        served,
    }
}
