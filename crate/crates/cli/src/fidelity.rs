use std::fs::File;

use qretro::detectors::ApdParams;
use qretro::fock::{fidelity_pure, FockSpace, DEFAULT_DIM};
use qretro::metrics::{fidelity_off, fidelity_on_profile, off_truncation_factor};
use qretro::retrodiction::premeasurement_off;
use serde::{Deserialize, Serialize};

use crate::{config_err, linspace, prepare_out, write_json, CliError, Globals, Result, Table};

/// Fock-state fidelities of the "off" pre-measurement state and the click
/// probability profile of the "on" element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityCurvesConfig {
    pub n_max: usize,
    /// Efficiencies evenly spaced over `[0, 1]`.
    pub eta_steps: usize,
    /// Dark-count means, one `Pr(on|n)` column each.
    pub nu_list: Vec<f64>,
}

impl Default for FidelityCurvesConfig {
    fn default() -> Self {
        Self { n_max: 10, eta_steps: 101, nu_list: vec![0.0, 0.1, 0.5] }
    }
}

impl FidelityCurvesConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_max < 1 {
            return Err(config_err("n_max must be >= 1"));
        }
        if self.n_max >= dim {
            return Err(config_err(format!("n_max = {} needs a Fock dimension above it, got {dim}", self.n_max)));
        }
        if self.eta_steps < 2 {
            return Err(config_err("eta_steps must be >= 2"));
        }
        if self.nu_list.is_empty() {
            return Err(config_err("nu_list must not be empty"));
        }
        for &nu in &self.nu_list {
            ApdParams::new(0.0, nu)?;
        }
        Ok(())
    }
}

/// Columns `eta, n, f_off, f_off_retro, pr_on_nu=<ν>...`, `eta` outer.
///
/// `f_off` is the closed form `η(1−η)ⁿ`; `f_off_retro` is `⟨n|ρ_off|n⟩` of
/// the truncated retrodicted state, rescaled by `1 − (1−η)^D`.
pub fn fidelity_curves(cfg: &FidelityCurvesConfig, dim: usize) -> Result<Table> {
    cfg.validate(dim)?;
    let space = FockSpace::new(dim)?;
    let mut headers: Vec<String> = ["eta", "n", "f_off", "f_off_retro"].map(String::from).to_vec();
    headers.extend(cfg.nu_list.iter().map(|nu| format!("pr_on_nu={nu}")));
    let mut t = Table::new(headers);
    for eta in linspace(0.0, 1.0, cfg.eta_steps) {
        let retro = premeasurement_off(ApdParams::new(eta, 0.0)?, space)?;
        let correction = off_truncation_factor(eta, dim);
        for n in 0..=cfg.n_max {
            let f_retro = fidelity_pure(&retro, &space.basis(n))? / correction;
            let mut row = vec![eta, n as f64, fidelity_off(n, eta), f_retro];
            for &nu in &cfg.nu_list {
                row.push(fidelity_on_profile(n, ApdParams::new(eta, nu)?));
            }
            t.push(row);
        }
    }
    Ok(t)
}

pub fn run(cfg: &FidelityCurvesConfig, globals: &Globals) -> Result<()> {
    let dim = globals.dim.unwrap_or(DEFAULT_DIM);
    let table = fidelity_curves(cfg, dim)?;
    prepare_out(&globals.out)?;
    let csv_path = globals.out.join("fidelity_curves.csv");
    let file = File::create(&csv_path).map_err(|source| CliError::Output { path: csv_path.clone(), source })?;
    table.write_csv(file)?;
    write_json(
        &globals.out.join("fidelity_curves.json"),
        &serde_json::json!({
            "command": "fidelity-curves",
            "config": cfg,
            "dim": dim,
            "rows": table.rows.len(),
            "columns": table.headers,
            "f_off": "eta (1 - eta)^n",
            "f_off_retro": "<n|rho_off|n> (1 - (1 - eta)^D)",
            "pr_on": "1 - exp(-nu) (1 - eta)^n",
        }),
    )
}
