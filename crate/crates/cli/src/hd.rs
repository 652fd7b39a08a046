use std::fs::File;

use qretro::detectors::HomodyneParams;
use qretro::wigner::{
    hd_retro_wigner, hd_squeezing_db, hd_variance, wigner_hd, GridSpec, HdRetroParams, WignerGrid,
    DEFAULT_EXCESS_NOISE,
};
use serde::{Deserialize, Serialize};

use crate::{config_err, prepare_out, write_json, CliError, Globals, Result};

/// Wigner function of a homodyne POVM element, or of the state it
/// retrodicts when `retro` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdWignerConfig {
    pub x_i: f64,
    pub eta: f64,
    pub phi: f64,
    pub retro: bool,
    /// Anti-squeezed variance regulator `e_n` of the retrodicted state.
    pub excess_noise: f64,
    /// Explicit grid. Without one, the element uses `[−6, 6]²` and the
    /// retrodicted state a box of `n_sigma` standard deviations.
    pub grid: Option<GridSpec>,
    pub n_sigma: f64,
    /// Points per axis of the automatic grid; raised for tilted states.
    pub points: usize,
}

impl Default for HdWignerConfig {
    fn default() -> Self {
        Self {
            x_i: 1.0,
            eta: 0.75,
            phi: 0.0,
            retro: false,
            excess_noise: DEFAULT_EXCESS_NOISE,
            grid: None,
            n_sigma: 6.0,
            points: 201,
        }
    }
}

impl HdWignerConfig {
    pub fn params(&self) -> Result<HomodyneParams> {
        Ok(HomodyneParams::new(self.eta, self.phi, self.x_i)?)
    }

    pub fn validate(&self) -> Result<()> {
        let hd = self.params()?;
        if self.retro {
            HdRetroParams::new(hd, self.excess_noise)?;
        }
        if !(self.n_sigma > 0.0) || !self.n_sigma.is_finite() {
            return Err(config_err(format!("n_sigma must be finite and > 0, got {}", self.n_sigma)));
        }
        if self.points < 2 {
            return Err(config_err("points must be >= 2"));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }

    /// Explicit grid, else the automatic one.
    pub fn resolve_grid(&self) -> Result<GridSpec> {
        if let Some(g) = self.grid {
            return Ok(g);
        }
        if !self.retro {
            return Ok(GridSpec::default());
        }
        let rp = HdRetroParams::new(self.params()?, self.excess_noise)?;
        let ((c, _), (sx, sp)) = rp.center_and_sd();
        let (s, co) = self.phi.sin_cos();
        // Bounding box of the rotated ellipse.
        let hx = self.n_sigma * (sx * sx * co * co + sp * sp * s * s).sqrt();
        let hp = self.n_sigma * (sx * sx * s * s + sp * sp * co * co).sqrt();
        // A tilted narrow Gaussian aliases on an axis-aligned lattice unless
        // the step stays below its narrow width.
        let (nx, np) = if s.abs() < 1e-12 {
            (self.points, self.points)
        } else {
            let fit = |h: f64| self.points.max((2.0 * h / sx).ceil() as usize + 1);
            (fit(hx), fit(hp))
        };
        Ok(GridSpec::around((c * co, c * s), (hx, hp), 1.0, nx, np)?)
    }
}

/// Grid and sidecar metadata.
pub fn hd_wigner(cfg: &HdWignerConfig) -> Result<(WignerGrid, serde_json::Value)> {
    cfg.validate()?;
    let grid = cfg.resolve_grid()?;
    let hd = cfg.params()?;
    if !cfg.retro {
        let w = wigner_hd(hd, &grid)?;
        let extra = serde_json::json!({
            "kind": "povm_element",
            "config": cfg,
            "ridge_center": cfg.x_i / cfg.eta.sqrt(),
            "ridge_variance": hd_variance(cfg.eta),
        });
        let meta = w.metadata(extra);
        return Ok((w, meta));
    }
    let rp = HdRetroParams::new(hd, cfg.excess_noise)?;
    let w = hd_retro_wigner(rp, &grid)?;
    let m = w.moments();
    // Smallest principal variance, in units of the vacuum variance.
    let tr = m.var_x + m.var_p;
    let det = m.var_x * m.var_p - m.cov_xp * m.cov_xp;
    let var_min = tr / 2.0 - ((tr * tr / 4.0 - det).max(0.0)).sqrt();
    let extra = serde_json::json!({
        "kind": "retrodicted_state",
        "config": cfg,
        "squeezing_db": hd_squeezing_db(cfg.eta),
        "fitted_squeezing_db": 10.0 * (2.0 * var_min).log10(),
        "fitted_moments": m,
    });
    let meta = w.metadata(extra);
    Ok((w, meta))
}

pub fn run(cfg: &HdWignerConfig, globals: &Globals) -> Result<()> {
    let (w, meta) = hd_wigner(cfg)?;
    prepare_out(&globals.out)?;
    let csv_path = globals.out.join("hd_wigner.csv");
    let file = File::create(&csv_path).map_err(|source| CliError::Output { path: csv_path.clone(), source })?;
    w.write_csv(std::io::BufWriter::new(file))?;
    write_json(&globals.out.join("hd_wigner.json"), &meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retrodicted_grid_is_normalized_and_squeezed() {
        for (eta, db) in [(0.98, -16.90), (0.9, -9.54)] {
            let cfg = HdWignerConfig { eta, retro: true, ..Default::default() };
            let (w, meta) = hd_wigner(&cfg).unwrap();
            assert!((w.integral() - 1.0).abs() < 1e-3);
            let fitted = meta["parameters"]["fitted_squeezing_db"].as_f64().unwrap();
            assert!((fitted - db).abs() < 0.2, "{fitted}");
        }
    }

    #[test]
    fn rotated_auto_grid_keeps_squeezing() {
        let cfg = HdWignerConfig { eta: 0.9, phi: 0.7, retro: true, excess_noise: 40.0, ..Default::default() };
        let (w, meta) = hd_wigner(&cfg).unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-3, "{}", w.integral());
        let fitted = meta["parameters"]["fitted_squeezing_db"].as_f64().unwrap();
        assert!((fitted - hd_squeezing_db(0.9)).abs() < 0.2, "{fitted}");
    }

    #[test]
    fn element_ridge_peaks_at_scaled_reading() {
        let (w, _) = hd_wigner(&HdWignerConfig::default()).unwrap();
        let spec = w.spec;
        let (mut best, mut at) = (f64::MIN, 0.0);
        for i in 0..spec.nx {
            if w.at(i, spec.np / 2) > best {
                best = w.at(i, spec.np / 2);
                at = spec.x(i);
            }
        }
        assert!((at - 1.0 / 0.75f64.sqrt()).abs() <= spec.dx());
    }

    #[test]
    fn efficiency_bounds_are_config_errors() {
        for eta in [0.0, 1.0, 1.5] {
            let cfg = HdWignerConfig { eta, ..Default::default() };
            assert_eq!(hd_wigner(&cfg).unwrap_err().exit_code(), 2);
        }
        let cfg = HdWignerConfig { retro: true, excess_noise: 1.0, ..Default::default() };
        assert!(hd_wigner(&cfg).is_err());
    }
}
