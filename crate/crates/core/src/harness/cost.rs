use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Installed solar panel price ($/W).
    pub panel_price: f64,
    /// Battery storage price ($/kWh).
    pub storage_price: f64,
    /// Grid electricity price ($/kWh).
    pub grid_price: f64,
    /// Panel rating per cell (W). 500 W reproduces the published CAPEX
    /// figures; the panel geometry itself gives about 833 W.
    pub panel_rating_w: f64,
    pub battery_kwh: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { panel_price: 1.17, storage_price: 131.0, grid_price: 0.21, panel_rating_w: 500.0, battery_kwh: 2.0 }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let all = [self.panel_price, self.storage_price, self.grid_price, self.panel_rating_w, self.battery_kwh];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("cost parameters must be finite and >= 0: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub capex: f64,
    pub opex_per_year: f64,
    pub total_cost: f64,
}

pub fn cost_analysis(
    annual_grid_kwh: f64,
    n_cells: usize,
    harvesting: bool,
    params: &CostParams,
    years: f64,
) -> Result<CostBreakdown, HarnessError> {
    params.validate()?;
    if !(annual_grid_kwh.is_finite() && annual_grid_kwh >= 0.0 && years.is_finite() && years >= 0.0) {
        return Err(HarnessError::Config("grid energy and years must be finite and >= 0".into()));
    }
    let capex = if harvesting {
        n_cells as f64 * (params.panel_rating_w * params.panel_price + params.battery_kwh * params.storage_price)
    } else {
        0.0
    };
    let opex_per_year = annual_grid_kwh * params.grid_price;
    Ok(CostBreakdown { capex, opex_per_year, total_cost: capex + years * opex_per_year })
}

/// The fields of any run summary that the comparison report reads.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportInput {
    #[serde(default)]
    pub label: String,
    pub n_cells: usize,
    pub grid_kwh: f64,
    #[serde(default)]
    pub mean_drop_rate: f64,
    #[serde(default)]
    pub cumulative_reward: f64,
    #[serde(default = "harvesting_default")]
    pub harvesting: bool,
}

fn harvesting_default() -> bool {
    true
}

pub const REPORT_HEADER: [&str; 9] =
    ["label", "n_cells", "grid_kwh", "drop_pct", "cum_reward", "capex", "opex", "cost_5y", "cost_10y"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub n_cells: usize,
    pub grid_kwh: f64,
    pub drop_pct: f64,
    pub cum_reward: f64,
    pub capex: f64,
    pub opex: f64,
    pub cost_5y: f64,
    pub cost_10y: f64,
}

pub fn report_row(input: &ReportInput, params: &CostParams) -> Result<ReportRow, HarnessError> {
    let five = cost_analysis(input.grid_kwh, input.n_cells, input.harvesting, params, 5.0)?;
    let ten = cost_analysis(input.grid_kwh, input.n_cells, input.harvesting, params, 10.0)?;
    Ok(ReportRow {
        label: input.label.clone(),
        n_cells: input.n_cells,
        grid_kwh: input.grid_kwh,
        drop_pct: 100.0 * input.mean_drop_rate,
        cum_reward: input.cumulative_reward,
        capex: five.capex,
        opex: five.opex_per_year,
        cost_5y: five.total_cost,
        cost_10y: ten.total_cost,
    })
}
