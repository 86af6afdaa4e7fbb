//! Per-cell hourly harvest and traffic series for one simulated year,
//! either synthesized or loaded from CSV.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EnvConfig, EnvError, TrafficProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    harvest: Vec<Vec<f64>>,
    load: Vec<Vec<f64>>,
    seed: Option<u64>,
    harvest_max: f64,
}

impl TraceSet {
    /// Builds a trace set from `[cell][step]` arrays of harvest (kWh per
    /// slot) and load (MB per slot).
    pub fn new(harvest: Vec<Vec<f64>>, load: Vec<Vec<f64>>, seed: Option<u64>) -> Result<Self, EnvError> {
        if harvest.is_empty() || harvest.len() != load.len() {
            return Err(EnvError::Dimension { what: "trace cells", expected: harvest.len(), got: load.len() });
        }
        let steps = harvest[0].len();
        for series in harvest.iter().chain(&load) {
            if series.len() != steps {
                return Err(EnvError::Dimension { what: "trace steps", expected: steps, got: series.len() });
            }
            if let Some(bad) = series.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(EnvError::Domain(format!("trace entries must be finite and >= 0, got {bad}")));
            }
        }
        let harvest_max = harvest.iter().flatten().copied().fold(0.0, f64::max);
        Ok(Self { harvest, load, seed, harvest_max })
    }

    pub fn n_cells(&self) -> usize {
        self.harvest.len()
    }

    pub fn steps(&self) -> usize {
        self.harvest[0].len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn harvest(&self, cell: usize, step: usize) -> f64 {
        self.harvest[cell][step]
    }

    pub fn load(&self, cell: usize, step: usize) -> f64 {
        self.load[cell][step]
    }

    pub fn harvest_series(&self, cell: usize) -> &[f64] {
        &self.harvest[cell]
    }

    pub fn load_series(&self, cell: usize) -> &[f64] {
        &self.load[cell]
    }

    /// Largest single-slot harvest over all cells.
    pub fn harvest_max(&self) -> f64 {
        self.harvest_max
    }

    pub fn check_matches(&self, cfg: &EnvConfig) -> Result<(), EnvError> {
        if self.n_cells() != cfg.n_cells {
            return Err(EnvError::Dimension { what: "trace cells", expected: cfg.n_cells, got: self.n_cells() });
        }
        if self.steps() < cfg.episode_len() {
            return Err(EnvError::Dimension { what: "trace steps", expected: cfg.episode_len(), got: self.steps() });
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EnvError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cell", "step", "harvest_kwh", "load_mb"])?;
        for cell in 0..self.n_cells() {
            for step in 0..self.steps() {
                w.write_record(&[
                    cell.to_string(),
                    step.to_string(),
                    self.harvest[cell][step].to_string(),
                    self.load[cell][step].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads `cell,step,harvest_kwh,load_mb` rows and checks that every
    /// (cell, step) pair of the configured episode appears exactly once.
    pub fn read_csv<R: Read>(reader: R, cfg: &EnvConfig) -> Result<Self, EnvError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["cell", "step", "harvest_kwh", "load_mb"] {
            return Err(EnvError::Schema(format!(
                "expected header cell,step,harvest_kwh,load_mb, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (cells, steps) = (cfg.n_cells, cfg.episode_len());
        let mut harvest = vec![vec![f64::NAN; steps]; cells];
        let mut load = vec![vec![f64::NAN; steps]; cells];
        let mut seen = vec![false; cells * steps];
        for (i, record) in r.records().enumerate() {
            let line = i + 2;
            let record = record?;
            let field =
                |k: usize| record.get(k).ok_or_else(|| EnvError::Schema(format!("line {line}: missing column {k}")));
            let parse_err = |what: &str| EnvError::Schema(format!("line {line}: unparseable {what}"));
            let cell: usize = field(0)?.trim().parse().map_err(|_| parse_err("cell"))?;
            let step: usize = field(1)?.trim().parse().map_err(|_| parse_err("step"))?;
            let h: f64 = field(2)?.trim().parse().map_err(|_| parse_err("harvest_kwh"))?;
            let l: f64 = field(3)?.trim().parse().map_err(|_| parse_err("load_mb"))?;
            if cell >= cells || step >= steps {
                return Err(EnvError::Schema(format!(
                    "line {line}: (cell {cell}, step {step}) outside {cells} cells x {steps} steps"
                )));
            }
            if !(h.is_finite() && h >= 0.0 && l.is_finite() && l >= 0.0) {
                return Err(EnvError::Schema(format!("line {line}: values must be finite and >= 0")));
            }
            let slot = cell * steps + step;
            if std::mem::replace(&mut seen[slot], true) {
                return Err(EnvError::Schema(format!("line {line}: duplicate (cell {cell}, step {step})")));
            }
            harvest[cell][step] = h;
            load[cell][step] = l;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(EnvError::Schema(format!(
                "incomplete trace: missing (cell {}, step {})",
                missing / steps,
                missing % steps
            )));
        }
        Self::new(harvest, load, None)
    }
}

fn circular_bump(hour: f64, centre: f64, width: f64) -> f64 {
    let d = (hour - centre).abs();
    let d = d.min(24.0 - d);
    (-0.5 * (d / width).powi(2)).exp()
}

fn raw_shape(profile: TrafficProfile, hour: f64, weekend: bool) -> f64 {
    match (profile, weekend) {
        (TrafficProfile::Residential, false) => {
            0.12 + 0.30 * circular_bump(hour, 8.5, 1.5)
                + 0.30 * circular_bump(hour, 13.0, 2.5)
                + 0.85 * circular_bump(hour, 20.5, 2.2)
        }
        (TrafficProfile::Residential, true) => {
            0.15 + 0.45 * circular_bump(hour, 12.0, 3.0) + 0.80 * circular_bump(hour, 20.5, 2.5)
        }
        (TrafficProfile::Office, weekend) => {
            let weekday = 0.08
                + 0.55 * circular_bump(hour, 10.5, 1.8)
                + 0.60 * circular_bump(hour, 14.5, 2.0)
                + 0.12 * circular_bump(hour, 19.0, 2.0);
            if weekend {
                0.35 * weekday
            } else {
                weekday
            }
        }
    }
}

/// Normalized hourly demand shape in `[0, 1]`, reaching exactly 1 at the
/// busiest hour of the week.
pub fn profile_shape(profile: TrafficProfile, hour: usize, weekend: bool) -> f64 {
    let peak = (0..24)
        .flat_map(|h| [raw_shape(profile, h as f64, false), raw_shape(profile, h as f64, true)])
        .fold(0.0, f64::max);
    raw_shape(profile, (hour % 24) as f64, weekend) / peak
}

/// Seasonal position in `[-1, 1]`: 1 on the longest day, -1 on the shortest.
fn season(cfg: &EnvConfig, day: usize) -> f64 {
    let frac = (day as f64 + 0.5) / cfg.days_per_year() as f64;
    (2.0 * std::f64::consts::PI * (frac - cfg.solar.solstice_year_frac)).cos()
}

/// Clear-sky energy (kWh) collected by one panel over `[start_h, start_h + hours)`
/// of `day`. Irradiance follows a raised cosine between sunrise and sunset
/// centred on solar noon.
pub fn clear_sky_kwh(cfg: &EnvConfig, day: usize, start_h: f64, hours: f64) -> f64 {
    let s = season(cfg, day);
    let sp = &cfg.solar;
    let day_len = (sp.mean_day_length_h + sp.day_length_swing_h * s).clamp(0.0, 24.0);
    if day_len <= 0.0 {
        return 0.0;
    }
    let peak_frac = sp.winter_peak_frac + (sp.summer_peak_frac - sp.winter_peak_frac) * (1.0 + s) / 2.0;
    let peak_kw = cfg.panel_area * cfg.panel_peak_output * peak_frac / 1000.0;
    let sunrise = 12.0 - day_len / 2.0;
    let sunset = 12.0 + day_len / 2.0;
    let a = start_h.max(sunrise);
    let b = (start_h + hours).min(sunset);
    if b <= a {
        return 0.0;
    }
    let w = 2.0 * std::f64::consts::PI / day_len;
    let integral = (b - a) - ((w * (b - sunrise)).sin() - (w * (a - sunrise)).sin()) / w;
    (peak_kw * 0.5 * integral).max(0.0)
}

pub fn clear_sky_day_kwh(cfg: &EnvConfig, day: usize) -> f64 {
    clear_sky_kwh(cfg, day, 0.0, 24.0)
}

const CLOUD_STREAM: u64 = 1;
const SOLAR_NOISE_STREAM: u64 = 1_000;
const LOAD_NOISE_STREAM: u64 = 2_000;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Daily cloud attenuation shared by all cells: a lognormal AR(1) process
/// whose spread widens in winter, capped at clear sky.
fn daily_clearness(cfg: &EnvConfig, seed: u64) -> Vec<f64> {
    let sp = &cfg.solar;
    let mut rng = stream(seed, CLOUD_STREAM);
    let rho = sp.cloud_day_correlation.clamp(0.0, 0.999);
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x: f64 = StandardNormal.sample(&mut rng);
    (0..cfg.days_per_year())
        .map(|day| {
            if day > 0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + innovation * z;
            }
            let s = season(cfg, day);
            let sd = sp.summer_cloud_sd + (sp.winter_cloud_sd - sp.summer_cloud_sd) * (1.0 - s) / 2.0;
            (sp.median_clearness * (sd * x).exp()).min(1.0)
        })
        .collect()
}

/// Synthesizes one year of per-cell harvest and traffic. Pure in
/// `(cfg, seed)`.
pub fn generate_traces(cfg: &EnvConfig, seed: u64) -> Result<TraceSet, EnvError> {
    cfg.validate()?;
    let steps = cfg.episode_len();
    let clearness = daily_clearness(cfg, seed);
    let l_max = cfg.max_load_mb();
    let noise_sd = cfg.solar.hourly_noise_sd;

    let mut harvest = Vec::with_capacity(cfg.n_cells);
    let mut load = Vec::with_capacity(cfg.n_cells);
    for cell in 0..cfg.n_cells {
        let mut solar_rng = stream(seed, SOLAR_NOISE_STREAM + cell as u64);
        let mut load_rng = stream(seed, LOAD_NOISE_STREAM + cell as u64);
        let mut h_series = Vec::with_capacity(steps);
        let mut l_series = Vec::with_capacity(steps);
        for step in 0..steps {
            let day = cfg.day_of(step);
            let hour = cfg.hour_of(step);

            let clear = clear_sky_kwh(cfg, day, hour as f64, cfg.slot_hours);
            let z: f64 = StandardNormal.sample(&mut solar_rng);
            let jitter = (noise_sd * z - 0.5 * noise_sd * noise_sd).exp();
            h_series.push(if clear > 0.0 { clear * clearness[day] * jitter } else { 0.0 });

            let mean = l_max * profile_shape(cfg.traffic_profile, hour, cfg.is_weekend(step));
            let z: f64 = StandardNormal.sample(&mut load_rng);
            l_series.push((mean + cfg.load_noise_sd_frac * mean * z).max(0.0));
        }
        harvest.push(h_series);
        load.push(l_series);
    }
    TraceSet::new(harvest, load, Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> EnvConfig {
        EnvConfig { n_cells: 2, ..Default::default() }
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = small_cfg();
        let a = generate_traces(&cfg, 7).unwrap();
        let b = generate_traces(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_traces(&cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn night_hours_harvest_nothing() {
        let cfg = small_cfg();
        let t = generate_traces(&cfg, 3).unwrap();
        for cell in 0..cfg.n_cells {
            for day in 0..cfg.days_per_year() {
                for hour in [0, 1, 2, 3, 22, 23] {
                    assert_eq!(t.harvest(cell, day * 24 + hour), 0.0, "day {day} hour {hour}");
                }
            }
        }
    }

    #[test]
    fn clear_winter_day_recharges_battery() {
        let cfg = EnvConfig::default();
        let december: Vec<f64> = (330..360).map(|d| clear_sky_day_kwh(&cfg, d)).collect();
        let mut sorted = december.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[15] >= cfg.battery.capacity, "median clear December day {}", sorted[15]);
        let june = clear_sky_day_kwh(&cfg, 170);
        assert!(june > sorted[15]);
    }

    #[test]
    fn hourly_integrals_sum_to_daily() {
        let cfg = EnvConfig::default();
        for day in [0, 100, 200, 359] {
            let hourly: f64 = (0..24).map(|h| clear_sky_kwh(&cfg, day, h as f64, 1.0)).sum();
            assert!((hourly - clear_sky_day_kwh(&cfg, day)).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_shapes_in_unit_interval_with_expected_peaks() {
        for profile in [TrafficProfile::Residential, TrafficProfile::Office] {
            let mut peak = 0.0f64;
            for h in 0..24 {
                for weekend in [false, true] {
                    let v = profile_shape(profile, h, weekend);
                    assert!((0.0..=1.0).contains(&v));
                    peak = peak.max(v);
                }
            }
            assert!((peak - 1.0).abs() < 1e-12);
        }
        let argmax = |profile, weekend| {
            (0..24usize)
                .max_by(|&a, &b| profile_shape(profile, a, weekend).total_cmp(&profile_shape(profile, b, weekend)))
                .unwrap()
        };
        assert!((19..=22).contains(&argmax(TrafficProfile::Residential, false)));
        assert!((10..=16).contains(&argmax(TrafficProfile::Office, false)));
        assert!(
            profile_shape(TrafficProfile::Office, 12, true) < 0.5 * profile_shape(TrafficProfile::Office, 12, false)
        );
    }

    #[test]
    fn mean_load_scale() {
        let cfg = EnvConfig { n_cells: 1, load_noise_sd_frac: 0.0, ..Default::default() };
        let t = generate_traces(&cfg, 1).unwrap();
        let max = t.load_series(0).iter().copied().fold(0.0, f64::max);
        assert!((max - 45562.5).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = EnvConfig { n_cells: 1, days_per_month: 2, months_per_year: 1, ..Default::default() };
        let t = generate_traces(&cfg, 11).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = TraceSet::read_csv(buf.as_slice(), &cfg).unwrap();
        assert_eq!(back.harvest_series(0), t.harvest_series(0));
        assert_eq!(back.load_series(0), t.load_series(0));
    }

    #[test]
    fn csv_rejects_incomplete_or_duplicate() {
        let cfg = EnvConfig { n_cells: 1, days_per_month: 1, months_per_year: 1, ..Default::default() };
        let mut text = String::from("cell,step,harvest_kwh,load_mb\n");
        for s in 0..23 {
            text.push_str(&format!("0,{s},0.0,1.0\n"));
        }
        let err = TraceSet::read_csv(text.as_bytes(), &cfg).unwrap_err();
        assert!(matches!(err, EnvError::Schema(ref m) if m.contains("missing")));
        text.push_str("0,22,0.0,1.0\n");
        let err = TraceSet::read_csv(text.as_bytes(), &cfg).unwrap_err();
        assert!(matches!(err, EnvError::Schema(ref m) if m.contains("duplicate")));
        let err = TraceSet::read_csv("a,b,c,d\n".as_bytes(), &cfg).unwrap_err();
        assert!(matches!(err, EnvError::Schema(_)));
    }
}
