//! Site power model: per-cell draw from the battery and macro-site draw
//! from the grid, including baseband work offloaded by PHY-RF cells.

use serde::{Deserialize, Serialize};

use super::{EnvError, OperativeMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModelParams {
    /// RF circuitry of a small cell (W).
    pub rf_power_vsc: f64,
    /// Power amplifier of a small cell (W).
    pub pa_power_vsc: f64,
    /// RF circuitry of the macro cell (W).
    pub rf_power_mbs: f64,
    /// Power amplifier of the macro cell (W).
    pub pa_power_mbs: f64,
    /// GOPS delivered per watt of baseband hardware.
    pub gops_per_watt: f64,
    pub bb_static_vsc: f64,
    pub bb_load_vsc: f64,
    pub bb_static_mbs: f64,
    pub bb_load_mbs: f64,
    /// Cooling and supply overhead as a fraction of site power.
    pub overhead_frac_vsc: f64,
    pub overhead_frac_mbs: f64,
}

impl Default for PowerModelParams {
    fn default() -> Self {
        Self {
            rf_power_vsc: 2.6,
            pa_power_vsc: 71.4,
            rf_power_mbs: 9.18,
            pa_power_mbs: 1100.0,
            gops_per_watt: 8.0,
            bb_static_vsc: 440.0,
            bb_load_vsc: 60.0,
            bb_static_mbs: 630.0,
            bb_load_mbs: 215.0,
            overhead_frac_vsc: 0.0,
            overhead_frac_mbs: 0.10,
        }
    }
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), EnvError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EnvError::Domain(format!("{name} = {value} outside [0, 1]")))
    }
}

impl PowerModelParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let fields = [
            ("rf_power_vsc", self.rf_power_vsc),
            ("pa_power_vsc", self.pa_power_vsc),
            ("rf_power_mbs", self.rf_power_mbs),
            ("pa_power_mbs", self.pa_power_mbs),
            ("gops_per_watt", self.gops_per_watt),
            ("bb_static_vsc", self.bb_static_vsc),
            ("bb_load_vsc", self.bb_load_vsc),
            ("bb_static_mbs", self.bb_static_mbs),
            ("bb_load_mbs", self.bb_load_mbs),
            ("overhead_frac_vsc", self.overhead_frac_vsc),
            ("overhead_frac_mbs", self.overhead_frac_mbs),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(EnvError::Domain(format!("power.{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.gops_per_watt <= 0.0 {
            return Err(EnvError::Domain("power.gops_per_watt must be > 0".into()));
        }
        Ok(())
    }

    /// Baseband power of one small cell at the given normalized load (W).
    pub fn bb_power_vsc(&self, load_norm: f64) -> f64 {
        (self.bb_static_vsc + self.bb_load_vsc * load_norm) / self.gops_per_watt
    }

    pub fn bb_power_mbs(&self, load_norm: f64) -> f64 {
        (self.bb_static_mbs + self.bb_load_mbs * load_norm) / self.gops_per_watt
    }

    /// Macro-site power for its own radio and baseband, overhead included.
    pub fn mbs_site_power(&self, mbs_load_norm: f64) -> f64 {
        (1.0 + self.overhead_frac_mbs) * (self.bb_power_mbs(mbs_load_norm) + self.rf_power_mbs + self.pa_power_mbs)
    }
}

/// Power a small cell draws from its own battery (W).
pub fn vsc_power(mode: OperativeMode, load_norm: f64, params: &PowerModelParams) -> Result<f64, EnvError> {
    check_fraction("load_norm", load_norm)?;
    let radio = params.rf_power_vsc + params.pa_power_vsc;
    Ok(match mode {
        OperativeMode::Off => 0.0,
        OperativeMode::PhyRf => (1.0 + params.overhead_frac_vsc) * radio,
        OperativeMode::MacPhy => (1.0 + params.overhead_frac_vsc) * (params.bb_power_vsc(load_norm) + radio),
    })
}

/// Grid power drawn at the macro site (W).
///
/// Baseband of PHY-RF cells is added on top of the macro site's own
/// consumption and does not carry the macro overhead factor.
pub fn mbs_grid_power(
    modes: &[OperativeMode],
    cell_loads_norm: &[f64],
    mbs_load_norm: f64,
    params: &PowerModelParams,
) -> Result<f64, EnvError> {
    if modes.len() != cell_loads_norm.len() {
        return Err(EnvError::Dimension { what: "cell loads", expected: modes.len(), got: cell_loads_norm.len() });
    }
    check_fraction("mbs_load_norm", mbs_load_norm)?;
    let mut power = params.mbs_site_power(mbs_load_norm);
    for (&mode, &load) in modes.iter().zip(cell_loads_norm) {
        check_fraction("cell load_norm", load)?;
        if mode == OperativeMode::PhyRf {
            power += params.bb_power_vsc(load);
        }
    }
    Ok(power)
}

/// Normalizer for grid energy: macro site at full load hosting the
/// baseband of every cell in PHY-RF mode at full load.
pub fn p_max(n_cells: usize, params: &PowerModelParams) -> f64 {
    let modes = vec![OperativeMode::PhyRf; n_cells];
    let loads = vec![1.0; n_cells];
    mbs_grid_power(&modes, &loads, 1.0, params).expect("full-load arguments are in range")
}

/// Fraction of the slot's total demand that lands on switched-off cells.
/// Zero when there is no demand at all.
pub fn drop_rate(modes: &[OperativeMode], loads: &[f64]) -> Result<f64, EnvError> {
    if modes.len() != loads.len() {
        return Err(EnvError::Dimension { what: "loads", expected: modes.len(), got: loads.len() });
    }
    let mut total = 0.0;
    let mut dropped = 0.0;
    for (&mode, &load) in modes.iter().zip(loads) {
        if load < 0.0 || !load.is_finite() {
            return Err(EnvError::Domain(format!("load must be finite and >= 0, got {load}")));
        }
        total += load;
        if mode == OperativeMode::Off {
            dropped += load;
        }
    }
    Ok(if total > 0.0 { dropped / total } else { 0.0 })
}
