//! System configuration: deployment geometry, waveguide material, power budget.
//!
//! All internal formulas work in natural (neper, power) attenuation units.
//! Decibels appear only at the configuration boundary.

use serde::{Deserialize, Serialize};

use crate::DipassError;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power attenuation coefficient from dB/m to nepers/m (power).
///
/// A signal attenuated by `alpha_db` dB over one meter has power factor
/// `10^(-alpha_db/10) = e^(-alpha_nat)`.
pub fn atten_db_to_nat(alpha_db: f64) -> Result<f64, DipassError> {
    if !(alpha_db >= 0.0) {
        return Err(DipassError::Config(format!(
            "attenuation must be non-negative, got {alpha_db} dB/m"
        )));
    }
    Ok(alpha_db * std::f64::consts::LN_10 / 10.0)
}

/// Raw JSON document for [`SystemConfig`]; missing optional fields take the
/// defaults of the 100 GHz indoor deployment (10 x 10 x 3 m region,
/// 1.3 dB/m waveguide, LoS coefficient 0.5, 40 W transmit power).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default = "d_num_waveguides")]
    pub num_waveguides: usize,
    #[serde(default = "d_num_pas_per_wg")]
    pub num_pas_per_wg: usize,
    #[serde(default = "d_num_users")]
    pub num_users: usize,
    /// (Dx, Dy, Dz) in meters.
    #[serde(default = "d_region")]
    pub region: [f64; 3],
    /// Carrier frequency in Hz.
    #[serde(default = "d_carrier_freq")]
    pub carrier_freq: f64,
    /// Guided wavelength in meters; defaults to lambda / n.
    #[serde(default)]
    pub guided_wavelength: Option<f64>,
    /// Cross-section (a, b) as dimensionless multiples of the wavelength.
    #[serde(default = "d_cross_section")]
    pub cross_section: [f64; 2],
    #[serde(default = "d_refractive_index")]
    pub refractive_index: f64,
    /// Empirical Gaussian-width correction factor.
    #[serde(default = "d_beam_correction")]
    pub beam_correction: f64,
    /// Coupling coefficient, 1/m.
    #[serde(default = "d_coupling_coeff")]
    pub coupling_coeff: f64,
    /// Waveguide power attenuation, dB/m.
    #[serde(default = "d_wg_atten_db")]
    pub wg_atten_db: f64,
    /// LoS existence coefficient per meter, in (0, 1].
    #[serde(default = "d_los_coeff")]
    pub los_coeff: f64,
    /// Total transmit power, watts.
    #[serde(default = "d_tx_power")]
    pub tx_power: f64,
    /// Per-user noise power, watts.
    #[serde(default = "d_noise_power")]
    pub noise_power: f64,
    /// Minimum on-waveguide PA spacing, meters; defaults to lambda_g / 2.
    #[serde(default)]
    pub min_spacing: Option<f64>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn d_num_waveguides() -> usize {
    4
}
fn d_num_pas_per_wg() -> usize {
    1
}
fn d_num_users() -> usize {
    5
}
fn d_region() -> [f64; 3] {
    [10.0, 10.0, 3.0]
}
fn d_carrier_freq() -> f64 {
    100.0e9
}
fn d_cross_section() -> [f64; 2] {
    [10.0, 6.0]
}
fn d_refractive_index() -> f64 {
    1.5
}
fn d_beam_correction() -> f64 {
    1.1
}
fn d_coupling_coeff() -> f64 {
    10.0
}
fn d_wg_atten_db() -> f64 {
    1.3
}
fn d_los_coeff() -> f64 {
    0.5
}
fn d_tx_power() -> f64 {
    40.0
}
fn d_noise_power() -> f64 {
    1.0e-9
}

impl Default for RawConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config must deserialize")
    }
}

/// Validated system parameters. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub num_waveguides: usize,
    pub num_pas_per_wg: usize,
    pub num_users: usize,
    /// Region dimensions (Dx, Dy, Dz), meters.
    pub region: [f64; 3],
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    /// Free-space wavelength, meters (c / f).
    pub wavelength: f64,
    /// Guided wavelength, meters.
    pub guided_wavelength: f64,
    /// Cross-section (a, b), dimensionless multiples of lambda.
    pub cross_section: [f64; 2],
    pub refractive_index: f64,
    pub beam_correction: f64,
    /// Coupling coefficient, 1/m.
    pub coupling_coeff: f64,
    /// Waveguide attenuation, dB/m.
    pub wg_atten_db: f64,
    /// Waveguide power attenuation, nepers/m.
    pub wg_atten_nat: f64,
    /// LoS existence coefficient per meter.
    pub los_coeff: f64,
    /// Total transmit power, watts.
    pub tx_power: f64,
    /// Per-user noise power, watts.
    pub noise_power: f64,
    /// Minimum PA spacing on a waveguide, meters.
    pub min_spacing: f64,
    pub rng_seed: u64,
}

impl SystemConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, DipassError> {
        let err = |msg: String| Err(DipassError::Config(msg));
        if raw.num_waveguides < 1 || raw.num_pas_per_wg < 1 || raw.num_users < 1 {
            return err("num_waveguides, num_pas_per_wg and num_users must be >= 1".into());
        }
        if raw.region.iter().any(|&d| !(d > 0.0)) {
            return err(format!("region dimensions must be positive, got {:?}", raw.region));
        }
        if !(raw.carrier_freq > 0.0) {
            return err(format!("carrier_freq must be positive, got {}", raw.carrier_freq));
        }
        if raw.cross_section.iter().any(|&d| !(d > 0.0)) {
            return err(format!(
                "cross_section must be positive, got {:?}",
                raw.cross_section
            ));
        }
        if !(raw.refractive_index > 0.0) || !(raw.beam_correction > 0.0) {
            return err("refractive_index and beam_correction must be positive".into());
        }
        if !(raw.coupling_coeff > 0.0) {
            return err(format!("coupling_coeff must be positive, got {}", raw.coupling_coeff));
        }
        if !(raw.los_coeff > 0.0 && raw.los_coeff <= 1.0) {
            return err(format!("los_coeff must lie in (0, 1], got {}", raw.los_coeff));
        }
        if !(raw.tx_power > 0.0) || !(raw.noise_power > 0.0) {
            return err("tx_power and noise_power must be positive".into());
        }

        let wavelength = SPEED_OF_LIGHT / raw.carrier_freq;
        let guided_wavelength = match raw.guided_wavelength {
            Some(lg) if lg > 0.0 => lg,
            Some(lg) => return err(format!("guided_wavelength must be positive, got {lg}")),
            None => wavelength / raw.refractive_index,
        };
        let min_spacing = match raw.min_spacing {
            Some(s) if s > 0.0 => s,
            Some(s) => return err(format!("min_spacing must be positive, got {s}")),
            None => guided_wavelength / 2.0,
        };
        // All L PAs plus the leading gap must fit on the waveguide.
        if raw.num_pas_per_wg as f64 * min_spacing > raw.region[1] {
            return err(format!(
                "{} PAs with spacing {} m do not fit on a {} m waveguide",
                raw.num_pas_per_wg, min_spacing, raw.region[1]
            ));
        }
        let wg_atten_nat = atten_db_to_nat(raw.wg_atten_db)?;

        Ok(SystemConfig {
            num_waveguides: raw.num_waveguides,
            num_pas_per_wg: raw.num_pas_per_wg,
            num_users: raw.num_users,
            region: raw.region,
            carrier_freq: raw.carrier_freq,
            wavelength,
            guided_wavelength,
            cross_section: raw.cross_section,
            refractive_index: raw.refractive_index,
            beam_correction: raw.beam_correction,
            coupling_coeff: raw.coupling_coeff,
            wg_atten_db: raw.wg_atten_db,
            wg_atten_nat,
            los_coeff: raw.los_coeff,
            tx_power: raw.tx_power,
            noise_power: raw.noise_power,
            min_spacing,
            rng_seed: raw.rng_seed,
        })
    }

    /// Parses a JSON document with snake_case keys; missing fields take defaults.
    pub fn from_json(json: &str) -> Result<Self, DipassError> {
        let raw: RawConfig =
            serde_json::from_str(json).map_err(|e| DipassError::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn defaults() -> Self {
        Self::from_raw(RawConfig::default()).expect("defaults are valid")
    }

    /// Initial Gaussian beam widths (w1, w2) in meters: w_i = v * {a,b} * lambda.
    pub fn beam_widths(&self) -> (f64, f64) {
        let [a, b] = self.cross_section;
        (
            self.beam_correction * a * self.wavelength,
            self.beam_correction * b * self.wavelength,
        )
    }

    /// Total number of PA slots, N * L.
    pub fn num_pas(&self) -> usize {
        self.num_waveguides * self.num_pas_per_wg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn atten_conversion() {
        assert_eq!(atten_db_to_nat(0.0).unwrap(), 0.0);
        // Cross-check: 10*log10(e^{alpha * 1 m}) must recover the dB figure.
        for db in [1.3, 2.4] {
            let nat = atten_db_to_nat(db).unwrap();
            assert_relative_eq!(10.0 * (nat.exp()).log10(), db, max_relative = 1e-12);
        }
        assert_relative_eq!(atten_db_to_nat(1.3).unwrap(), 0.299_336_062, epsilon = 1e-9);
        assert_relative_eq!(atten_db_to_nat(2.4).unwrap(), 0.552_620_422, epsilon = 1e-9);
        assert!(atten_db_to_nat(-0.1).is_err());
    }

    #[test]
    fn defaults_match_deployment() {
        let cfg = SystemConfig::defaults();
        assert_eq!(cfg.region, [10.0, 10.0, 3.0]);
        assert_relative_eq!(cfg.wavelength, SPEED_OF_LIGHT / 100.0e9);
        assert_relative_eq!(cfg.guided_wavelength, cfg.wavelength / 1.5);
        assert_relative_eq!(cfg.min_spacing, cfg.guided_wavelength / 2.0);
        assert_eq!(cfg.tx_power, 40.0);
        assert_eq!(cfg.los_coeff, 0.5);
        let (w1, w2) = cfg.beam_widths();
        assert_relative_eq!(w1, 1.1 * 10.0 * cfg.wavelength);
        assert_relative_eq!(w2, 1.1 * 6.0 * cfg.wavelength);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let cfg = SystemConfig::from_json(
            r#"{"num_waveguides": 2, "num_pas_per_wg": 3, "num_users": 4, "wg_atten_db": 2.4}"#,
        )
        .unwrap();
        assert_eq!(cfg.num_waveguides, 2);
        assert_eq!(cfg.num_pas_per_wg, 3);
        assert_relative_eq!(cfg.wg_atten_nat, 0.552_620_422, epsilon = 1e-9);

        assert!(SystemConfig::from_json(r#"{"num_users": 0}"#).is_err());
        assert!(SystemConfig::from_json(r#"{"los_coeff": 1.5}"#).is_err());
        assert!(SystemConfig::from_json(r#"{"los_coeff": 0.0}"#).is_err());
        assert!(SystemConfig::from_json(r#"{"unknown_key": 1}"#).is_err());
        // Too many PAs for the waveguide length.
        assert!(SystemConfig::from_json(
            r#"{"num_pas_per_wg": 4, "min_spacing": 3.0, "region": [10.0, 10.0, 3.0]}"#
        )
        .is_err());
    }
}
