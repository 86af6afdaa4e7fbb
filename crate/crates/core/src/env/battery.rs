use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryParams {
    /// Usable capacity (kWh).
    pub capacity: f64,
    /// State-of-charge floor as a fraction of capacity.
    pub soc_floor_frac: f64,
    /// Charge at the start of an episode as a fraction of capacity.
    pub initial_frac: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self { capacity: 2.0, soc_floor_frac: 0.20, initial_frac: 1.0 }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return Err(EnvError::Domain(format!("battery.capacity must be > 0, got {}", self.capacity)));
        }
        if !(0.0..1.0).contains(&self.soc_floor_frac) {
            return Err(EnvError::Domain(format!(
                "battery.soc_floor_frac must be in [0, 1), got {}",
                self.soc_floor_frac
            )));
        }
        if !(0.0..=1.0).contains(&self.initial_frac) {
            return Err(EnvError::Domain(format!("battery.initial_frac must be in [0, 1], got {}", self.initial_frac)));
        }
        Ok(())
    }

    pub fn floor_kwh(&self) -> f64 {
        self.soc_floor_frac * self.capacity
    }

    pub fn initial_kwh(&self) -> f64 {
        self.initial_frac * self.capacity
    }

    /// Charge after one slot: harvest in, consumption out, capped at
    /// capacity and clamped at zero.
    pub fn next_level(&self, level: f64, harvest_kwh: f64, used_kwh: f64) -> f64 {
        (level + harvest_kwh - used_kwh).min(self.capacity).max(0.0)
    }

    /// True when spending `used_kwh` this slot would leave the battery
    /// under the SOC floor.
    pub fn breaches_floor(&self, level: f64, harvest_kwh: f64, used_kwh: f64) -> bool {
        used_kwh > 0.0 && level + harvest_kwh - used_kwh < self.floor_kwh()
    }
}

/// Uniform grid of battery levels `k * capacity / (bins - 1)` used by the
/// quantized dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryGrid {
    pub bins: usize,
    pub capacity: f64,
}

impl BatteryGrid {
    pub fn new(bins: usize, capacity: f64) -> Result<Self, EnvError> {
        if bins < 2 {
            return Err(EnvError::Domain(format!("battery grid needs at least 2 bins, got {bins}")));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(EnvError::Domain(format!("battery grid capacity must be > 0, got {capacity}")));
        }
        Ok(Self { bins, capacity })
    }

    pub fn step(&self) -> f64 {
        self.capacity / (self.bins - 1) as f64
    }

    pub fn value(&self, bin: usize) -> f64 {
        if bin + 1 == self.bins {
            self.capacity
        } else {
            bin as f64 * self.step()
        }
    }

    /// Nearest bin; halfway points round up.
    pub fn snap(&self, level: f64) -> usize {
        let k = (level / self.step() + 0.5).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }

    pub fn quantize(&self, level: f64) -> f64 {
        self.value(self.snap(level))
    }
}
