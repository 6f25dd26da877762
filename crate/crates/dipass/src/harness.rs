//! Scenario generation and the Monte-Carlo experiment runner.
//!
//! Every experiment is deterministic in (config, spec): per-trial seeds are
//! derived from the master seed with a splittable generator, so serial and
//! parallel execution orders produce identical tables. CSV output uses nine
//! significant digits and an optional (suppressible) timestamp header line.

use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assignment::{
    assign, build_gain_matrix, channel_entries, nominal_states, phase_fine_tune, project_feasible,
    AssignmentMask, PAState, TuneReport,
};
use crate::beamforming::{
    effective_channel, evaluate, wmmse_precoder, zf_precoder, Precoder, RateReport,
};
use crate::config::SystemConfig;
use crate::geometry::Vec3;
use crate::single_pa::{gain_at, solve_placement};
use crate::DipassError;

/// A drop of users on the floor of the region.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub users: Vec<Vec3>,
    pub seed: u64,
}

/// Draws `cfg.num_users` positions i.i.d. uniform over the floor
/// [0, Dx] x [0, Dy] x {0}. Identical (config, seed) pairs give identical
/// scenarios.
pub fn generate_scenario(cfg: &SystemConfig, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = (0..cfg.num_users)
        .map(|_| {
            Vec3::new(
                rng.gen_range(0.0..cfg.region[0]),
                rng.gen_range(0.0..cfg.region[1]),
                0.0,
            )
        })
        .collect();
    Scenario { users, seed }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial` under master seed `seed`; independent of the order
/// in which trials run.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut s = seed ^ trial.wrapping_mul(0xA076_1D64_78BD_642F);
    splitmix64(&mut s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beamformer {
    Zf,
    Wmmse,
}

impl FromStr for Beamformer {
    type Err = DipassError;

    fn from_str(s: &str) -> Result<Self, DipassError> {
        match s {
            "zf" => Ok(Self::Zf),
            "wmmse" => Ok(Self::Wmmse),
            other => Err(DipassError::Config(format!(
                "unknown beamformer {other:?}; expected zf or wmmse"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Composite gain versus in-guide position for users at several depths.
    SinglePaSweep,
    /// Optimal position and gain over a grid of user locations.
    PlacementHeatmap,
    /// Mean sum rate versus number of waveguides, Monte-Carlo over user drops.
    SumrateVsN,
    /// Served-user counts versus number of waveguides.
    ServedUsers,
    /// Gain profile along the waveguide for several deployment heights.
    GainProfile,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SinglePaSweep => "single-pa-sweep",
            Self::PlacementHeatmap => "placement-heatmap",
            Self::SumrateVsN => "sumrate-vs-N",
            Self::ServedUsers => "served-users",
            Self::GainProfile => "gain-profile",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = DipassError;

    fn from_str(s: &str) -> Result<Self, DipassError> {
        match s {
            "single-pa-sweep" => Ok(Self::SinglePaSweep),
            "placement-heatmap" => Ok(Self::PlacementHeatmap),
            "sumrate-vs-N" | "sumrate-vs-n" => Ok(Self::SumrateVsN),
            "served-users" => Ok(Self::ServedUsers),
            "gain-profile" => Ok(Self::GainProfile),
            other => Err(DipassError::Config(format!("unknown experiment {other:?}"))),
        }
    }
}

/// One experiment request. Default grids reproduce the standard studies;
/// all grids must stay non-empty and `trials >= 1`.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub beamformer: Beamformer,
    /// Emit a `# generated_unix=...` first line.
    pub timestamp_header: bool,
    /// User depths y^U for the single-PA sweep, meters.
    pub depth_grid: Vec<f64>,
    /// Deployment heights for the gain profile, meters.
    pub height_grid: Vec<f64>,
    /// Waveguide counts for the Monte-Carlo experiments.
    pub waveguide_grid: Vec<usize>,
    /// Samples along the waveguide for sweep-style experiments.
    pub sweep_points: usize,
    /// Grid resolution per axis for the placement heatmap.
    pub heatmap_points: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64, trials: usize, beamformer: Beamformer) -> Self {
        Self {
            kind,
            seed,
            trials,
            beamformer,
            timestamp_header: true,
            depth_grid: vec![2.0, 5.0, 8.0],
            height_grid: vec![2.0, 3.0, 4.0, 5.0],
            waveguide_grid: vec![1, 2, 4, 8],
            sweep_points: 201,
            heatmap_points: 10,
        }
    }

    fn validate(&self) -> Result<(), DipassError> {
        if self.trials < 1 {
            return Err(DipassError::Config("trials must be >= 1".into()));
        }
        if self.depth_grid.is_empty()
            || self.height_grid.is_empty()
            || self.waveguide_grid.is_empty()
            || self.sweep_points < 2
            || self.heatmap_points < 1
        {
            return Err(DipassError::Config("experiment grids must be non-empty".into()));
        }
        Ok(())
    }
}

/// Everything the multi-PA pipeline produces for one scenario.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub mask: AssignmentMask,
    pub states: Vec<PAState>,
    pub tune: TuneReport,
    pub effective: DMatrix<Complex64>,
    pub precoder: Precoder,
    pub report: RateReport,
}

/// Runs the full deployment pipeline for fixed user positions: optimal gain
/// matrix, assignment, placement, feasibility projection, phase fine-tuning,
/// precoding and rate evaluation.
pub fn run_pipeline(
    users: &[Vec3],
    cfg: &SystemConfig,
    beamformer: Beamformer,
) -> Result<PipelineResult, DipassError> {
    let gains = build_gain_matrix(users, cfg)?;
    let mask = assign(users, &gains, cfg)?;
    let states = project_feasible(&nominal_states(&mask, &gains, cfg), cfg, users)?;
    let (states, tune) = phase_fine_tune(&states, &mask, users, cfg)?;
    let entries = channel_entries(&states, users, cfg)?;
    let effective = effective_channel(&mask, &entries, cfg.num_waveguides, cfg.num_pas_per_wg);
    let precoder = match beamformer {
        Beamformer::Zf => zf_precoder(&effective)?,
        Beamformer::Wmmse => wmmse_precoder(&effective, cfg.tx_power, cfg.noise_power, 200, 1e-6)?,
    };
    let report = evaluate(&effective, &precoder.w, cfg.tx_power, cfg.noise_power);
    Ok(PipelineResult {
        mask,
        states,
        tune,
        effective,
        precoder,
        report,
    })
}

/// One grid point of an experiment: fixed parameters plus one value vector
/// per trial.
struct GridPoint {
    params: Vec<f64>,
    trials: Vec<Vec<f64>>,
}

struct Table {
    /// Parameter column names, then value column names.
    param_cols: &'static [&'static str],
    value_cols: &'static [&'static str],
    points: Vec<GridPoint>,
}

fn fmt(x: f64) -> String {
    format!("{:.8e}", x)
}

fn write_table(
    table: &Table,
    spec: &ExperimentSpec,
    out: &mut dyn Write,
) -> Result<(), DipassError> {
    if spec.timestamp_header {
        let unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# generated_unix={unix}")?;
    }
    writeln!(
        out,
        "# experiment={} seed={} trials={}",
        spec.kind.name(),
        spec.seed,
        spec.trials
    )?;
    let mut header = vec!["record".to_string(), "trial".to_string()];
    header.extend(table.param_cols.iter().map(|s| s.to_string()));
    header.extend(table.value_cols.iter().map(|s| s.to_string()));
    writeln!(out, "{}", header.join(","))?;

    for gp in &table.points {
        let params: Vec<String> = gp.params.iter().map(|&p| fmt(p)).collect();
        for (t, values) in gp.trials.iter().enumerate() {
            let mut row = vec!["sample".to_string(), t.to_string()];
            row.extend(params.iter().cloned());
            row.extend(values.iter().map(|&v| fmt(v)));
            writeln!(out, "{}", row.join(","))?;
        }
        let k = table.value_cols.len();
        let t = gp.trials.len() as f64;
        let mut means = vec![0.0f64; k];
        for values in &gp.trials {
            for (j, &v) in values.iter().enumerate() {
                means[j] += v / t;
            }
        }
        let mut stderrs = vec![0.0f64; k];
        if gp.trials.len() > 1 {
            for values in &gp.trials {
                for (j, &v) in values.iter().enumerate() {
                    stderrs[j] += (v - means[j]).powi(2);
                }
            }
            for s in stderrs.iter_mut() {
                *s = (*s / (t - 1.0)).sqrt() / t.sqrt();
            }
        }
        for (name, stats) in [("mean", &means), ("stderr", &stderrs)] {
            let mut row = vec![name.to_string(), String::new()];
            row.extend(params.iter().cloned());
            row.extend(stats.iter().map(|&v| fmt(v)));
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn sweep_table(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<Table, DipassError> {
    // One user per depth, 3 m lateral offset from the waveguide axis, gain
    // sampled along the guide with the orientation kept optimal.
    let wg_x = cfg.region[0] / (2.0 * cfg.num_waveguides as f64);
    let mut points = Vec::new();
    for &depth in &spec.depth_grid {
        let user = Vec3::new(wg_x + 3.0, depth, 0.0);
        for y in linspace(0.0, cfg.region[1], spec.sweep_points) {
            let gain = gain_at(&user, wg_x, y, cfg)?;
            points.push(GridPoint {
                params: vec![depth, y],
                trials: vec![vec![gain]],
            });
        }
    }
    Ok(Table {
        param_cols: &["y_user", "y"],
        value_cols: &["gain_sq"],
        points,
    })
}

fn heatmap_table(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<Table, DipassError> {
    let wg_x = cfg.region[0] / (2.0 * cfg.num_waveguides as f64);
    let n = spec.heatmap_points;
    let xs = linspace(0.5, cfg.region[0] - 0.5, n);
    let ys = linspace(0.5, cfg.region[1] - 0.5, n);
    let mut points = Vec::new();
    for &x in &xs {
        for &y in &ys {
            let sol = solve_placement(&Vec3::new(x, y, 0.0), wg_x, cfg)?;
            points.push(GridPoint {
                params: vec![x, y],
                trials: vec![vec![sol.y_star, sol.gamma_star, sol.gain_sq]],
            });
        }
    }
    Ok(Table {
        param_cols: &["x_user", "y_user"],
        value_cols: &["y_star", "gamma_star", "gain_sq"],
        points,
    })
}

fn profile_table(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<Table, DipassError> {
    let wg_x = cfg.region[0] / (2.0 * cfg.num_waveguides as f64);
    let user = Vec3::new(wg_x + 3.0, cfg.region[1] / 2.0, 0.0);
    let mut points = Vec::new();
    for &height in &spec.height_grid {
        let mut c = cfg.clone();
        c.region[2] = height;
        for y in linspace(0.0, c.region[1], spec.sweep_points) {
            let gain = gain_at(&user, wg_x, y, &c)?;
            points.push(GridPoint {
                params: vec![height, y],
                trials: vec![vec![gain]],
            });
        }
    }
    Ok(Table {
        param_cols: &["height", "y"],
        value_cols: &["gain_sq"],
        points,
    })
}

fn monte_carlo_table(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<Table, DipassError> {
    let mut points = Vec::new();
    for &n in &spec.waveguide_grid {
        let mut c = cfg.clone();
        c.num_waveguides = n;
        let mut trials = Vec::with_capacity(spec.trials);
        for t in 0..spec.trials {
            let scen = generate_scenario(&c, trial_seed(spec.seed, t as u64));
            let result = run_pipeline(&scen.users, &c, spec.beamformer)?;
            trials.push(vec![result.report.sum_rate, result.report.num_served as f64]);
        }
        points.push(GridPoint {
            params: vec![n as f64],
            trials,
        });
    }
    Ok(Table {
        param_cols: &["num_waveguides"],
        value_cols: &["sum_rate", "num_served"],
        points,
    })
}

/// Runs the experiment and writes its CSV table to `out`.
///
/// Columns by kind (all tables start with `record,trial`):
/// - single-pa-sweep: `y_user,y,gain_sq`
/// - placement-heatmap: `x_user,y_user,y_star,gamma_star,gain_sq`
/// - gain-profile: `height,y,gain_sq`
/// - sumrate-vs-N / served-users: `num_waveguides,sum_rate,num_served`
///
/// Each grid point gets one `sample` row per trial plus `mean` and `stderr`
/// rows aggregated over trials.
pub fn run_experiment(
    cfg: &SystemConfig,
    spec: &ExperimentSpec,
    out: &mut dyn Write,
) -> Result<(), DipassError> {
    spec.validate()?;
    let table = match spec.kind {
        ExperimentKind::SinglePaSweep => sweep_table(cfg, spec)?,
        ExperimentKind::PlacementHeatmap => heatmap_table(cfg, spec)?,
        ExperimentKind::GainProfile => profile_table(cfg, spec)?,
        ExperimentKind::SumrateVsN | ExperimentKind::ServedUsers => monte_carlo_table(cfg, spec)?,
    };
    write_table(&table, spec, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn small_cfg(users: usize) -> SystemConfig {
        let mut raw = RawConfig::default();
        raw.num_users = users;
        SystemConfig::from_raw(raw).unwrap()
    }

    #[test]
    fn scenario_deterministic_and_on_floor() {
        let cfg = small_cfg(5);
        let a = generate_scenario(&cfg, 42);
        let b = generate_scenario(&cfg, 42);
        for (p, q) in a.users.iter().zip(b.users.iter()) {
            assert_eq!(p, q);
        }
        let c = generate_scenario(&cfg, 43);
        assert!(a.users.iter().zip(c.users.iter()).any(|(p, q)| p != q));
        for u in &a.users {
            assert!(u.x >= 0.0 && u.x <= 10.0);
            assert!(u.y >= 0.0 && u.y <= 10.0);
            assert_eq!(u.z, 0.0);
        }
    }

    #[test]
    fn scenario_mean_near_center() {
        let cfg = small_cfg(1000);
        let scen = generate_scenario(&cfg, 7);
        let mx: f64 = scen.users.iter().map(|u| u.x).sum::<f64>() / 1000.0;
        let my: f64 = scen.users.iter().map(|u| u.y).sum::<f64>() / 1000.0;
        // Uniform on [0, 10]: std of the mean = 10 / sqrt(12 * 1000) ~ 0.091.
        let tol = 3.0 * 10.0 / (12.0f64 * 1000.0).sqrt();
        assert!((mx - 5.0).abs() < tol, "mean x {mx}");
        assert!((my - 5.0).abs() < tol, "mean y {my}");
    }

    #[test]
    fn trial_seeds_distinct_and_stable() {
        let s: Vec<u64> = (0..100).map(|t| trial_seed(9, t)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 100);
        assert_eq!(trial_seed(9, 50), s[50]);
    }

    #[test]
    fn experiment_csv_deterministic() {
        let cfg = small_cfg(3);
        let mut spec = ExperimentSpec::new(ExperimentKind::SumrateVsN, 5, 3, Beamformer::Zf);
        spec.timestamp_header = false;
        spec.waveguide_grid = vec![2, 4];
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_experiment(&cfg, &spec, &mut a).unwrap();
        run_experiment(&cfg, &spec, &mut b).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn aggregates_match_samples() {
        let cfg = small_cfg(3);
        let mut spec = ExperimentSpec::new(ExperimentKind::SumrateVsN, 11, 4, Beamformer::Zf);
        spec.timestamp_header = false;
        spec.waveguide_grid = vec![2];
        let mut buf = Vec::new();
        run_experiment(&cfg, &spec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut samples = Vec::new();
        let mut mean = None;
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let cells: Vec<&str> = line.split(',').collect();
            match cells[0] {
                "sample" => samples.push(cells[3].parse::<f64>().unwrap()),
                "mean" => mean = Some(cells[3].parse::<f64>().unwrap()),
                _ => {}
            }
        }
        assert_eq!(samples.len(), 4);
        let recomputed = samples.iter().sum::<f64>() / 4.0;
        assert!((mean.unwrap() - recomputed).abs() < 1e-7 * recomputed.abs().max(1.0));
    }

    #[test]
    fn served_users_zf_caps_at_n() {
        let cfg = small_cfg(10);
        for &n in &[1usize, 2, 4] {
            let mut c = cfg.clone();
            c.num_waveguides = n;
            for t in 0..5 {
                let scen = generate_scenario(&c, trial_seed(3, t));
                let r = run_pipeline(&scen.users, &c, Beamformer::Zf).unwrap();
                assert_eq!(r.report.num_served, n.min(10), "N={n} trial={t}");
            }
        }
    }

    #[test]
    fn pipeline_smoke_wmmse() {
        let cfg = small_cfg(4);
        let scen = generate_scenario(&cfg, 21);
        let r = run_pipeline(&scen.users, &cfg, Beamformer::Wmmse).unwrap();
        r.mask.check().unwrap();
        assert!(r.report.sum_rate > 0.0);
        let power: f64 = r.precoder.w.iter().map(|c| c.norm_sqr()).sum();
        assert!((power - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_specs_rejected() {
        let cfg = small_cfg(2);
        let mut spec = ExperimentSpec::new(ExperimentKind::SumrateVsN, 0, 0, Beamformer::Zf);
        let mut sink = Vec::new();
        assert!(run_experiment(&cfg, &spec, &mut sink).is_err());
        spec.trials = 1;
        spec.waveguide_grid.clear();
        assert!(run_experiment(&cfg, &spec, &mut sink).is_err());
    }
}
