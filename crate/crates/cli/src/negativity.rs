use std::fs::File;

use qretro::detectors::ApdParams;
use qretro::wigner::{negativity_on, negativity_threshold};
use serde::{Deserialize, Serialize};

use crate::{config_err, linspace, prepare_out, write_json, CliError, Globals, Result, Table};

/// Map of `W(0,0)` of the "on" element over efficiency and dark counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegativityMapConfig {
    /// Efficiencies `i/eta_steps` for `i = 1..=eta_steps`.
    pub eta_steps: usize,
    pub nu_max: f64,
    /// Dark-count means evenly spaced over `[0, nu_max]`.
    pub nu_steps: usize,
}

impl Default for NegativityMapConfig {
    fn default() -> Self {
        Self { eta_steps: 20, nu_max: 2.0, nu_steps: 101 }
    }
}

impl NegativityMapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta_steps < 2 || self.nu_steps < 2 {
            return Err(config_err("eta_steps and nu_steps must be >= 2"));
        }
        if !(self.nu_max > 0.0) || !self.nu_max.is_finite() {
            return Err(config_err(format!("nu_max must be finite and > 0, got {}", self.nu_max)));
        }
        Ok(())
    }

    pub fn etas(&self) -> Vec<f64> {
        (1..=self.eta_steps).map(|i| i as f64 / self.eta_steps as f64).collect()
    }

    pub fn nus(&self) -> Vec<f64> {
        linspace(0.0, self.nu_max, self.nu_steps)
    }
}

/// Columns `eta, nu, negativity, nu_star`, `eta` outer.
pub fn negativity_map(cfg: &NegativityMapConfig) -> Result<Table> {
    cfg.validate()?;
    let mut t = Table::new(["eta", "nu", "negativity", "nu_star"].map(String::from).to_vec());
    for eta in cfg.etas() {
        let nu_star = negativity_threshold(eta)?;
        for nu in cfg.nus() {
            let w = negativity_on(ApdParams::new(eta, nu)?);
            t.push(vec![eta, nu, w, nu_star]);
        }
    }
    Ok(t)
}

pub fn run(cfg: &NegativityMapConfig, globals: &Globals) -> Result<()> {
    let table = negativity_map(cfg)?;
    prepare_out(&globals.out)?;
    let csv_path = globals.out.join("negativity_map.csv");
    let file = File::create(&csv_path).map_err(|source| CliError::Output { path: csv_path.clone(), source })?;
    table.write_csv(file)?;
    write_json(
        &globals.out.join("negativity_map.json"),
        &serde_json::json!({
            "command": "negativity-map",
            "config": cfg,
            "rows": table.rows.len(),
            "columns": table.headers,
            "quantity": "W_on(0,0) = 1/(2 pi) - exp(-nu)/(pi (2 - eta))",
            "contour": "nu_star = -ln(1 - eta/2)",
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ideal_detector_corner_and_contour() {
        let cfg = NegativityMapConfig { eta_steps: 4, nu_max: 1.0, nu_steps: 3 };
        let t = negativity_map(&cfg).unwrap();
        assert_eq!(t.rows.len(), 12);
        let corner = t.rows.iter().find(|r| r[0] == 1.0 && r[1] == 0.0).unwrap();
        assert!((corner[2] + 1.0 / (2.0 * PI)).abs() < 1e-15);
        for r in &t.rows {
            assert!((r[3] + (1.0 - r[0] / 2.0).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_degenerate_axes() {
        let cfg = NegativityMapConfig { nu_steps: 1, ..Default::default() };
        assert_eq!(negativity_map(&cfg).unwrap_err().exit_code(), 2);
    }
}
