//! Multi-PA pipeline: optimal-gain matrix, Hungarian matching with virtual
//! rows/columns, greedy augmentation by marginal rate gain, feasibility
//! projection onto the spacing constraints, and wavelength-scale phase
//! fine-tuning for coherent combining.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{coupling_lengths, optimal_gain_entry, pa_to_user, wg_to_pa, GainEntry};
use crate::config::SystemConfig;
use crate::geometry::{normalize_angle, waveguide_entrances, Orientation, Vec3};
use crate::single_pa::{optimal_orientation, solve_placement};
use crate::DipassError;

/// Binary PA-to-user matching, M x NL. A zero column means the PA is parked
/// on a virtual user and radiates toward no one.
#[derive(Debug, Clone)]
pub struct AssignmentMask {
    mask: Vec<Vec<bool>>,
    num_pas: usize,
}

impl AssignmentMask {
    pub fn empty(num_users: usize, num_pas: usize) -> Self {
        Self {
            mask: vec![vec![false; num_pas]; num_users],
            num_pas,
        }
    }

    pub fn set(&mut self, user: usize, pa: usize) {
        debug_assert!(self.assigned_user(pa).is_none(), "PA already assigned");
        self.mask[user][pa] = true;
    }

    pub fn get(&self, user: usize, pa: usize) -> bool {
        self.mask[user][pa]
    }

    pub fn num_users(&self) -> usize {
        self.mask.len()
    }

    pub fn num_pas(&self) -> usize {
        self.num_pas
    }

    pub fn assigned_user(&self, pa: usize) -> Option<usize> {
        (0..self.mask.len()).find(|&m| self.mask[m][pa])
    }

    pub fn pas_of_user(&self, user: usize) -> Vec<usize> {
        (0..self.num_pas).filter(|&p| self.mask[user][p]).collect()
    }

    /// Checks the matching constraints: each PA serves at most one user, and
    /// when M <= NL every user is served.
    pub fn check(&self) -> Result<(), DipassError> {
        for p in 0..self.num_pas {
            let count = self.mask.iter().filter(|row| row[p]).count();
            if count > 1 {
                return Err(DipassError::Assignment(format!("PA {p} serves {count} users")));
            }
        }
        if self.num_users() <= self.num_pas {
            for (m, row) in self.mask.iter().enumerate() {
                if !row.iter().any(|&b| b) {
                    return Err(DipassError::Assignment(format!("user {m} is unserved")));
                }
            }
        }
        Ok(())
    }
}

/// Physical state of one PA slot.
#[derive(Debug, Clone)]
pub struct PAState {
    pub waveguide: usize,
    /// Order along the waveguide, zero-based; fixes the coupling length.
    pub order: usize,
    /// In-guide position, meters.
    pub y: f64,
    pub orientation: Orientation,
    pub coupling_length: f64,
    pub assigned_user: Option<usize>,
}

impl PAState {
    pub fn slot(&self, l_count: usize) -> usize {
        self.waveguide * l_count + self.order
    }

    pub fn position(&self, cfg: &SystemConfig) -> Vec3 {
        let entr = waveguide_entrances(cfg);
        Vec3::new(entr[self.waveguide].x, self.y, cfg.region[2])
    }
}

/// M x NL matrix of best-achievable gains, one entry per (user, PA slot).
pub type GainMatrix = Vec<Vec<GainEntry>>;

/// Builds the optimal channel gain matrix: every entry assumes its PA is
/// placed and oriented optimally for its user, with the slot's 1/sqrt(L)
/// power share folded in.
pub fn build_gain_matrix(users: &[Vec3], cfg: &SystemConfig) -> Result<GainMatrix, DipassError> {
    let entrances = waveguide_entrances(cfg);
    let l_count = cfg.num_pas_per_wg;
    let mut rows = Vec::with_capacity(users.len());
    for (m, user) in users.iter().enumerate() {
        let mut row = Vec::with_capacity(cfg.num_pas());
        for (n, wg) in entrances.iter().enumerate() {
            let sol = solve_placement(user, wg.x, cfg)?;
            for l in 0..l_count {
                row.push(optimal_gain_entry(m, l, n, cfg, &sol)?);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Solves the square assignment problem; returns `perm` with `perm[row] = col`.
///
/// Deterministic tie-break: among equal-utility optima, lower row indices
/// prefer lower column indices (implemented as a geometric perturbation far
/// below the utility scale).
pub fn hungarian(utilities: &DMatrix<f64>, maximize: bool) -> Result<Vec<usize>, DipassError> {
    let n = utilities.nrows();
    if n == 0 || utilities.ncols() != n {
        return Err(DipassError::Assignment(format!(
            "expected a non-empty square matrix, got {}x{}",
            utilities.nrows(),
            utilities.ncols()
        )));
    }
    if utilities.iter().any(|v| !v.is_finite()) {
        return Err(DipassError::Assignment("non-finite utility".into()));
    }

    let scale = utilities.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let hi = utilities.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let tie = 1e-9 * scale;
    let mut cost = DMatrix::zeros(n, n);
    for i in 0..n {
        // Geometric row weights make the tie-break lexicographic.
        let w = tie * 0.5f64.powi(i.min(60) as i32);
        for j in 0..n {
            let base = if maximize {
                hi - utilities[(i, j)]
            } else {
                utilities[(i, j)]
            };
            cost[(i, j)] = base + w * j as f64;
        }
    }

    // Shortest-augmenting-path Hungarian with potentials, O(n^3).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // column -> assigned row, 1-based, 0 = free
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    Ok(perm)
}

/// Interim precoder used during greedy augmentation: every waveguide that
/// hosts a PA serving user m gets the same real weight 1/sqrt(N M). Keeping
/// the magnitude fixed across rounds makes the marginal gain of Eq-style
/// coherent addition well defined and the augmentation monotone.
pub fn interim_precoder(mask: &AssignmentMask, cfg: &SystemConfig) -> DMatrix<f64> {
    let (n_wg, l_count, m_users) = (cfg.num_waveguides, cfg.num_pas_per_wg, mask.num_users());
    let c = 1.0 / ((n_wg * m_users) as f64).sqrt();
    let mut w = DMatrix::zeros(n_wg, m_users);
    for p in 0..mask.num_pas() {
        if let Some(m) = mask.assigned_user(p) {
            w[(p / l_count, m)] = c;
        }
    }
    w
}

/// Per-user SINR under the magnitude-only model: coherent magnitudes add
/// within a user's serving set; interference couples through shared columns
/// of the interim precoder.
pub fn sinr_masked(
    mask: &AssignmentMask,
    mags: &[Vec<f64>],
    w: &DMatrix<f64>,
    p_tx: f64,
    noise: f64,
    l_count: usize,
) -> Vec<f64> {
    let m_users = mask.num_users();
    let n_wg = w.nrows();
    let mut out = Vec::with_capacity(m_users);
    for m in 0..m_users {
        // Aggregate masked magnitudes per waveguide.
        let mut b = vec![0.0f64; n_wg];
        for p in 0..mask.num_pas() {
            if mask.get(m, p) {
                b[p / l_count] += mags[m][p];
            }
        }
        let signal: f64 = (0..n_wg).map(|n| b[n] * w[(n, m)]).sum::<f64>().powi(2);
        let mut interf = 0.0;
        for i in 0..m_users {
            if i != m {
                interf += (0..n_wg).map(|n| b[n] * w[(n, i)]).sum::<f64>().powi(2);
            }
        }
        out.push(p_tx * signal / (p_tx * interf + noise));
    }
    out
}

/// Marginal rate gain of assigning `candidate = (user, pa)` on top of `mask`:
/// log2((1 + xi_new) / (1 + xi_old)) for that user. The candidate inherits
/// the user's existing weight magnitude on its waveguide.
pub fn marginal_gain(
    mask: &AssignmentMask,
    candidate: (usize, usize),
    mags: &[Vec<f64>],
    w_interim: &DMatrix<f64>,
    cfg: &SystemConfig,
) -> f64 {
    let (m, p) = candidate;
    let l_count = cfg.num_pas_per_wg;
    let (p_tx, noise) = (cfg.tx_power, cfg.noise_power);
    let xi_old = sinr_masked(mask, mags, w_interim, p_tx, noise, l_count)[m];

    let mut with = mask.clone();
    with.set(m, p);
    let mut w = w_interim.clone();
    let n = p / l_count;
    if w[(n, m)] == 0.0 {
        let existing = (0..w.nrows()).fold(0.0f64, |a, r| a.max(w[(r, m)]));
        w[(n, m)] = if existing > 0.0 {
            existing
        } else {
            1.0 / ((cfg.num_waveguides * mask.num_users()) as f64).sqrt()
        };
    }
    let xi_new = sinr_masked(&with, mags, &w, p_tx, noise, l_count)[m];
    ((1.0 + xi_new) / (1.0 + xi_old)).log2()
}

fn magnitudes(gains: &GainMatrix) -> Vec<Vec<f64>> {
    gains
        .iter()
        .map(|row| row.iter().map(|e| e.magnitude).collect())
        .collect()
}

/// PA-user assignment of the full pipeline. With M >= NL the Hungarian stage
/// (padded with zero-gain virtual PAs) picks the best NL pairings; otherwise
/// every user first receives one PA via Hungarian matching against virtual
/// users, and the remaining PAs are added greedily by marginal rate gain.
pub fn assign(users: &[Vec3], gains: &GainMatrix, cfg: &SystemConfig) -> Result<AssignmentMask, DipassError> {
    let m_users = users.len();
    let nl = cfg.num_pas();
    let mags = magnitudes(gains);
    let utility = |m: usize, p: usize| -> f64 {
        (1.0 + cfg.tx_power * mags[m][p] * mags[m][p] / cfg.noise_power).log2()
    };

    let mut mask = AssignmentMask::empty(m_users, nl);
    if m_users >= nl {
        // Pad with virtual zero-gain PAs so every user has a column.
        let r = m_users;
        let mut util = DMatrix::zeros(r, r);
        for m in 0..m_users {
            for p in 0..nl {
                util[(m, p)] = utility(m, p);
            }
        }
        let perm = hungarian(&util, true)?;
        for (m, &col) in perm.iter().enumerate() {
            if col < nl {
                mask.set(m, col);
            }
        }
    } else {
        // Virtual users absorb the surplus PAs in the Hungarian stage.
        let r = nl;
        let mut util = DMatrix::zeros(r, r);
        for m in 0..m_users {
            for p in 0..nl {
                util[(m, p)] = utility(m, p);
            }
        }
        let perm = hungarian(&util, true)?;
        for m in 0..m_users {
            mask.set(m, perm[m]);
        }
        // Greedy rounds for the NL - M leftover PAs.
        for _round in 0..(nl - m_users) {
            let w = interim_precoder(&mask, cfg);
            let mut best: Option<(f64, usize, usize)> = None;
            for p in 0..nl {
                if mask.assigned_user(p).is_some() {
                    continue;
                }
                for m in 0..m_users {
                    let dr = marginal_gain(&mask, (m, p), &mags, &w, cfg);
                    let better = match best {
                        None => true,
                        Some((b, bm, bp)) => {
                            dr > b + 1e-15 || (dr >= b - 1e-15 && (m, p) < (bm, bp))
                        }
                    };
                    if better {
                        best = Some((dr, m, p));
                    }
                }
            }
            match best {
                Some((dr, m, p)) if dr >= 0.0 => mask.set(m, p),
                // A PA that can only hurt stays parked on its virtual user.
                _ => break,
            }
        }
    }
    mask.check()?;
    Ok(mask)
}

/// Nominal PA states from an assignment: assigned slots take their entry's
/// optimal position and orientation, leftover slots park at the entrance
/// pointing straight down.
pub fn nominal_states(mask: &AssignmentMask, gains: &GainMatrix, cfg: &SystemConfig) -> Vec<PAState> {
    let l_count = cfg.num_pas_per_wg;
    let plan = coupling_lengths(l_count, cfg.coupling_coeff);
    let down = Orientation::new(PI, FRAC_PI_2).expect("valid");
    (0..cfg.num_pas())
        .map(|p| {
            let (n, l) = (p / l_count, p % l_count);
            match mask.assigned_user(p) {
                Some(m) => {
                    let e = &gains[m][p];
                    PAState {
                        waveguide: n,
                        order: l,
                        y: e.optimal_y,
                        orientation: e.optimal_orientation,
                        coupling_length: plan.lengths[l],
                        assigned_user: Some(m),
                    }
                }
                None => PAState {
                    waveguide: n,
                    order: l,
                    y: 0.0,
                    orientation: down,
                    coupling_length: plan.lengths[l],
                    assigned_user: None,
                },
            }
        })
        .collect()
}

/// Projects nominal positions onto the feasible set: per waveguide, PAs are
/// sorted by target position, pushed right to honor the entrance gap and the
/// minimum spacing, then pulled left from the waveguide end. Coupling lengths
/// are re-bound to the sorted order; serving relationships are preserved.
pub fn project_feasible(states: &[PAState], cfg: &SystemConfig, users: &[Vec3]) -> Result<Vec<PAState>, DipassError> {
    let l_count = cfg.num_pas_per_wg;
    let spacing = cfg.min_spacing;
    let dy = cfg.region[1];
    let entrances = waveguide_entrances(cfg);
    let plan = coupling_lengths(l_count, cfg.coupling_coeff);

    let mut out: Vec<PAState> = Vec::with_capacity(states.len());
    for n in 0..cfg.num_waveguides {
        let mut group: Vec<&PAState> = states.iter().filter(|s| s.waveguide == n).collect();
        if group.len() != l_count {
            return Err(DipassError::Assignment(format!(
                "waveguide {n} has {} states, expected {l_count}",
                group.len()
            )));
        }
        group.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.order.cmp(&b.order)));
        let mut ys: Vec<f64> = group.iter().map(|s| s.y).collect();
        ys[0] = ys[0].max(spacing);
        for i in 1..l_count {
            ys[i] = ys[i].max(ys[i - 1] + spacing);
        }
        if ys[l_count - 1] > dy {
            ys[l_count - 1] = dy;
            for i in (0..l_count - 1).rev() {
                ys[i] = ys[i].min(ys[i + 1] - spacing);
            }
        }
        for (rank, (s, &y)) in group.iter().zip(ys.iter()).enumerate() {
            let orientation = match s.assigned_user {
                Some(m) => {
                    let pa = Vec3::new(entrances[n].x, y, cfg.region[2]);
                    optimal_orientation(&users[m], &pa)?
                }
                None => s.orientation,
            };
            out.push(PAState {
                waveguide: n,
                order: rank,
                y,
                orientation,
                coupling_length: plan.lengths[rank],
                assigned_user: s.assigned_user,
            });
        }
    }
    out.sort_by_key(|s| s.slot(l_count));
    Ok(out)
}

/// Complex per-link channel entries for the current physical state, M x NL.
pub fn channel_entries(states: &[PAState], users: &[Vec3], cfg: &SystemConfig) -> Result<DMatrix<Complex64>, DipassError> {
    let l_count = cfg.num_pas_per_wg;
    let mut h = DMatrix::from_element(users.len(), states.len(), Complex64::new(0.0, 0.0));
    for s in states {
        let pos = s.position(cfg);
        let wp = wg_to_pa(s.y, l_count, cfg.wg_atten_nat, cfg.guided_wavelength)?;
        for (m, user) in users.iter().enumerate() {
            h[(m, s.slot(l_count))] = wp * pa_to_user(user, &pos, &s.orientation, cfg)?;
        }
    }
    Ok(h)
}

/// Outcome of the phase fine-tuning stage.
#[derive(Debug, Clone, Default)]
pub struct TuneReport {
    /// (pa slot, applied displacement) for every shifted PA.
    pub shifts: Vec<(usize, f64)>,
    /// PAs skipped because the displacement-to-phase coefficient vanished.
    pub degenerate: Vec<usize>,
    /// Worst residual phase misalignment (radians) after re-projection.
    pub residual_misalignment: f64,
}

/// Aligns the phases of multi-PA users by shifting each non-reference PA
/// within one wavelength, then re-projects onto the feasible set.
///
/// A small displacement dy changes the phase by
/// -(2 pi n / lambda - (2 pi / lambda) sin(theta) sin(phi)) dy.
/// A shift is kept only if it does not reduce the user's combined signal
/// power, so alignment never trades away magnitude.
pub fn phase_fine_tune(
    states: &[PAState],
    mask: &AssignmentMask,
    users: &[Vec3],
    cfg: &SystemConfig,
) -> Result<(Vec<PAState>, TuneReport), DipassError> {
    let lam = cfg.wavelength;
    let n_idx = cfg.refractive_index;
    let mut tuned = states.to_vec();
    let mut report = TuneReport::default();

    let entries = channel_entries(&tuned, users, cfg)?;
    for m in 0..users.len() {
        let serving = mask.pas_of_user(m);
        if serving.len() < 2 {
            continue;
        }
        let reference = *serving
            .iter()
            .max_by(|&&a, &&b| entries[(m, a)].norm().total_cmp(&entries[(m, b)].norm()))
            .unwrap();
        let target_phase = entries[(m, reference)].arg();
        let combined = |ts: &[PAState]| -> Result<f64, DipassError> {
            let e = channel_entries(ts, users, cfg)?;
            Ok(serving.iter().map(|&p| e[(m, p)]).sum::<Complex64>().norm_sqr())
        };
        for &p in &serving {
            if p == reference {
                continue;
            }
            let s = &tuned[p];
            let coeff = -(2.0 * PI * n_idx / lam
                - (2.0 * PI / lam) * s.orientation.theta().sin() * s.orientation.phi().sin());
            if coeff.abs() < 1e-6 {
                report.degenerate.push(p);
                continue;
            }
            let current = channel_entries(&tuned, users, cfg)?[(m, p)].arg();
            let dphi = normalize_angle(target_phase - current);
            let mut dy = dphi / coeff;
            // Pick the equivalent displacement closest to zero, then cap at
            // one wavelength.
            let period = 2.0 * PI / coeff.abs();
            dy -= (dy / period).round() * period;
            if dy.abs() > lam {
                dy = lam.copysign(dy);
            }
            let before = combined(&tuned)?;
            let mut trial = tuned.clone();
            trial[p].y = (trial[p].y + dy).clamp(0.0, cfg.region[1]);
            if combined(&trial)? >= before {
                tuned = trial;
                report.shifts.push((p, dy));
            }
        }
    }

    let projected = project_feasible(&tuned, cfg, users)?;
    let entries = channel_entries(&projected, users, cfg)?;
    for m in 0..users.len() {
        let serving = mask.pas_of_user(m);
        if serving.len() < 2 {
            continue;
        }
        let phases: Vec<f64> = serving.iter().map(|&p| entries[(m, p)].arg()).collect();
        for w in phases.windows(2) {
            let miss = normalize_angle(w[1] - w[0]).abs();
            report.residual_misalignment = report.residual_misalignment.max(miss);
        }
    }
    Ok((projected, report))
}

/// JSON export of a complete assignment: mask, per-PA state, per-user serving set.
pub fn assignment_to_json(mask: &AssignmentMask, states: &[PAState]) -> serde_json::Value {
    serde_json::json!({
        "mask": (0..mask.num_users()).map(|m| {
            (0..mask.num_pas()).map(|p| mask.get(m, p) as u8).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
        "pas": states.iter().map(|s| serde_json::json!({
            "waveguide": s.waveguide,
            "order": s.order,
            "y": s.y,
            "theta": s.orientation.theta(),
            "phi": s.orientation.phi(),
            "coupling_length": s.coupling_length,
            "user": s.assigned_user,
        })).collect::<Vec<_>>(),
        "serving": (0..mask.num_users()).map(|m| mask.pas_of_user(m)).collect::<Vec<_>>(),
    })
}
