use serde::{Deserialize, Serialize};

use super::{BatteryParams, EnvError, PowerModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficProfile {
    /// Evening peak, flatter weekends.
    Residential,
    /// Working-hours peak, suppressed on weekends.
    Office,
}

/// Source of the macro cell's own normalized load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MbsLoadMode {
    /// Mean of the small cells' normalized loads in the slot.
    MeanOfCells,
    /// Noise-free traffic profile shape for the slot.
    FixedProfile,
}

/// How cyclic inputs (hour, month) enter the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CyclicEncoding {
    /// One sine per variable; observation length `3 + N`.
    Sine,
    /// Sine and cosine per variable; observation length `5 + N`.
    SinCos,
}

/// Shape parameters of the synthetic solar generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolarParams {
    /// Day length at the equinox (h).
    pub mean_day_length_h: f64,
    /// Half the difference between the longest and shortest day (h).
    pub day_length_swing_h: f64,
    /// Clear-sky peak as a fraction of panel peak output, midwinter.
    pub winter_peak_frac: f64,
    /// Clear-sky peak as a fraction of panel peak output, midsummer.
    pub summer_peak_frac: f64,
    /// Position of the longest day as a fraction of the year.
    pub solstice_year_frac: f64,
    /// Median daily clearness (cloud attenuation factor, <= 1).
    pub median_clearness: f64,
    /// Log-sd of daily clearness in midsummer.
    pub summer_cloud_sd: f64,
    /// Log-sd of daily clearness in midwinter.
    pub winter_cloud_sd: f64,
    /// Day-to-day correlation of the log-clearness process.
    pub cloud_day_correlation: f64,
    /// Log-sd of independent hourly fluctuations per cell.
    pub hourly_noise_sd: f64,
}

impl Default for SolarParams {
    fn default() -> Self {
        Self {
            mean_day_length_h: 12.1,
            day_length_swing_h: 2.2,
            winter_peak_frac: 0.75,
            summer_peak_frac: 1.0,
            solstice_year_frac: 0.47,
            median_clearness: 0.85,
            summer_cloud_sd: 0.25,
            winter_cloud_sd: 0.35,
            cloud_day_correlation: 0.6,
            hourly_noise_sd: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub n_cells: usize,
    /// Slot duration (h); must divide 24.
    pub slot_hours: f64,
    pub days_per_month: usize,
    pub months_per_year: usize,
    /// Weight of grid energy against drop rate in the per-slot cost.
    pub weight: f64,
    pub power: PowerModelParams,
    pub battery: BatteryParams,
    pub traffic_profile: TrafficProfile,
    pub users_per_cell: f64,
    pub heavy_user_frac: f64,
    /// Demand of a heavy user (MB/h).
    pub heavy_rate: f64,
    /// Demand of an ordinary user (MB/h).
    pub ordinary_rate: f64,
    /// Standard deviation of traffic noise as a fraction of the mean.
    pub load_noise_sd_frac: f64,
    /// Panel area per cell (m^2).
    pub panel_area: f64,
    /// Panel output at full irradiance (W/m^2).
    pub panel_peak_output: f64,
    pub mbs_load_mode: MbsLoadMode,
    pub cyclic_encoding: CyclicEncoding,
    pub solar: SolarParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_cells: 3,
            slot_hours: 1.0,
            days_per_month: 30,
            months_per_year: 12,
            weight: 0.5,
            power: PowerModelParams::default(),
            battery: BatteryParams::default(),
            traffic_profile: TrafficProfile::Residential,
            users_per_cell: 90.0,
            heavy_user_frac: 0.5,
            heavy_rate: 900.0,
            ordinary_rate: 112.5,
            load_noise_sd_frac: 0.1,
            panel_area: 4.48,
            panel_peak_output: 186.0,
            mbs_load_mode: MbsLoadMode::MeanOfCells,
            cyclic_encoding: CyclicEncoding::Sine,
            solar: SolarParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_cells == 0 {
            return Err(EnvError::Domain("n_cells must be >= 1".into()));
        }
        if !(self.slot_hours > 0.0 && self.slot_hours <= 24.0) {
            return Err(EnvError::Domain(format!("slot_hours must be in (0, 24], got {}", self.slot_hours)));
        }
        let per_day = 24.0 / self.slot_hours;
        if (per_day - per_day.round()).abs() > 1e-9 || self.slot_hours < 1.0 {
            return Err(EnvError::Domain(format!(
                "slot_hours must be a whole number of hours dividing 24, got {}",
                self.slot_hours
            )));
        }
        if self.days_per_month == 0 || self.months_per_year == 0 {
            return Err(EnvError::Domain("calendar lengths must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(EnvError::Domain(format!("weight must be in [0, 1], got {}", self.weight)));
        }
        for (name, v) in [
            ("users_per_cell", self.users_per_cell),
            ("heavy_rate", self.heavy_rate),
            ("ordinary_rate", self.ordinary_rate),
            ("load_noise_sd_frac", self.load_noise_sd_frac),
            ("panel_area", self.panel_area),
            ("panel_peak_output", self.panel_peak_output),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EnvError::Domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.heavy_user_frac) {
            return Err(EnvError::Domain("heavy_user_frac must be in [0, 1]".into()));
        }
        if self.max_load_mb() <= 0.0 {
            return Err(EnvError::Domain("peak cell demand must be > 0".into()));
        }
        self.power.validate()?;
        self.battery.validate()
    }

    pub fn steps_per_day(&self) -> usize {
        (24.0 / self.slot_hours).round() as usize
    }

    pub fn days_per_year(&self) -> usize {
        self.days_per_month * self.months_per_year
    }

    /// Slots in one episode (one simulated year).
    pub fn episode_len(&self) -> usize {
        self.days_per_year() * self.steps_per_day()
    }

    /// Peak per-slot demand of one cell (MB); the load normalizer.
    pub fn max_load_mb(&self) -> f64 {
        self.users_per_cell
            * (self.heavy_user_frac * self.heavy_rate + (1.0 - self.heavy_user_frac) * self.ordinary_rate)
            * self.slot_hours
    }

    pub fn hour_of(&self, step: usize) -> usize {
        ((step % self.steps_per_day()) as f64 * self.slot_hours) as usize
    }

    pub fn day_of(&self, step: usize) -> usize {
        (step / self.steps_per_day()) % self.days_per_year()
    }

    pub fn month_of(&self, step: usize) -> usize {
        self.day_of(step) / self.days_per_month
    }

    /// Day index within the 7-day week; the week restarts every month.
    pub fn weekday_of(&self, step: usize) -> usize {
        (self.day_of(step) % self.days_per_month) % 7
    }

    pub fn is_weekend(&self, step: usize) -> bool {
        self.weekday_of(step) >= 5
    }

    pub fn observation_len(&self) -> usize {
        match self.cyclic_encoding {
            CyclicEncoding::Sine => 3 + self.n_cells,
            CyclicEncoding::SinCos => 5 + self.n_cells,
        }
    }

    /// Slot energy (kWh) drawn at `watts` for one slot.
    pub fn slot_energy_kwh(&self, watts: f64) -> f64 {
        watts * self.slot_hours / 1000.0
    }
}
