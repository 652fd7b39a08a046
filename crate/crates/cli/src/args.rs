//! Command-line surface. Flags given on the command line override the
//! matching fields of a `--config` file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qretro::wigner::GridSpec;

use crate::fidelity::FidelityCurvesConfig;
use crate::hd::HdWignerConfig;
use crate::negativity::NegativityMapConfig;
use crate::tomo::TomoConfig;
use crate::{config_err, load_config, parse_config, Globals, Result};

#[derive(Debug, Parser)]
#[command(
    name = "qretro",
    about = "Retrodicted pre-measurement states and detector tomography",
    disable_version_flag = true
)]
pub struct Cli {
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Seed for stochastic commands (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Fock truncation for commands that use one (overrides the config).
    #[arg(long, global = true)]
    pub dim: Option<usize>,

    /// Print version information as JSON and exit.
    #[arg(long)]
    pub version: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

impl Cli {
    pub fn globals(&self) -> Globals {
        Globals { out: self.out.clone(), seed: self.seed, dim: self.dim }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Negativity of the APD "on" element at the origin over (eta, nu).
    NegativityMap(NegativityMapArgs),
    /// Fock fidelities of the "off" state and the "on" click profile.
    FidelityCurves(FidelityCurvesArgs),
    /// Wigner grid of a homodyne element or its retrodicted state.
    HdWigner(HdWignerArgs),
    /// Simulated detector tomography from a JSON config.
    Tomo(TomoArgs),
}

#[derive(Debug, Args)]
pub struct NegativityMapArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub eta_steps: Option<usize>,
    #[arg(long)]
    pub nu_max: Option<f64>,
    #[arg(long)]
    pub nu_steps: Option<usize>,
}

impl NegativityMapArgs {
    pub fn resolve(&self) -> Result<NegativityMapConfig> {
        let mut c: NegativityMapConfig = load_config(self.config.as_deref())?;
        set(&mut c.eta_steps, self.eta_steps);
        set(&mut c.nu_max, self.nu_max);
        set(&mut c.nu_steps, self.nu_steps);
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct FidelityCurvesArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub eta_steps: Option<usize>,
    /// Comma-separated dark-count means.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub nu: Option<Vec<f64>>,
}

impl FidelityCurvesArgs {
    pub fn resolve(&self) -> Result<FidelityCurvesConfig> {
        let mut c: FidelityCurvesConfig = load_config(self.config.as_deref())?;
        set(&mut c.n_max, self.n_max);
        set(&mut c.eta_steps, self.eta_steps);
        set(&mut c.nu_list, self.nu.clone());
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct HdWignerArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Homodyne reading.
    #[arg(long = "x-i", allow_hyphen_values = true)]
    pub x_i: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Emit the retrodicted state instead of the POVM element.
    #[arg(long)]
    pub retro: bool,
    /// Excess anti-squeezing `e_n` of the retrodicted state.
    #[arg(long = "e-n")]
    pub excess_noise: Option<f64>,
    /// Explicit grid `x_min,x_max,p_min,p_max,nx,np`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub n_sigma: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

impl HdWignerArgs {
    pub fn resolve(&self) -> Result<HdWignerConfig> {
        let mut c: HdWignerConfig = load_config(self.config.as_deref())?;
        set(&mut c.x_i, self.x_i);
        set(&mut c.eta, self.eta);
        set(&mut c.phi, self.phi);
        c.retro |= self.retro;
        set(&mut c.excess_noise, self.excess_noise);
        set(&mut c.n_sigma, self.n_sigma);
        set(&mut c.points, self.points);
        if let Some(g) = &self.grid {
            c.grid = Some(parse_grid(g)?);
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TomoArgs {
    /// JSON config; the bundled APD example when omitted.
    pub config: Option<PathBuf>,
    /// Print the bundled example config and exit.
    #[arg(long)]
    pub print_example: bool,
}

impl TomoArgs {
    pub fn resolve(&self) -> Result<TomoConfig> {
        match &self.config {
            Some(p) => parse_config(p),
            None => Ok(TomoConfig::example()),
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(config_err(format!("grid needs six comma-separated values, got {s:?}")));
    }
    let f = |k: usize| parts[k].parse::<f64>().map_err(|e| config_err(format!("grid value {:?}: {e}", parts[k])));
    let u = |k: usize| parts[k].parse::<usize>().map_err(|e| config_err(format!("grid count {:?}: {e}", parts[k])));
    Ok(GridSpec::new(f(0)?, f(1)?, f(2)?, f(3)?, u(4)?, u(5)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from(["qretro", "--out", "o", "hd-wigner", "--x-i", "-0.5", "--retro", "--grid", "-2,2,-3,3,11,21"])
            .unwrap();
        let Some(Command::HdWigner(a)) = &cli.command else { panic!() };
        let c = a.resolve().unwrap();
        assert_eq!(c.x_i, -0.5);
        assert!(c.retro);
        assert_eq!(c.eta, 0.75);
        assert_eq!(c.grid.unwrap().np, 21);
        assert_eq!(cli.globals().out, PathBuf::from("o"));
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["qretro", "fidelity-curves", "--dim", "16", "--nu", "0,0.5"]).unwrap();
        assert_eq!(cli.dim, Some(16));
        let Some(Command::FidelityCurves(a)) = &cli.command else { panic!() };
        assert_eq!(a.resolve().unwrap().nu_list, vec![0.0, 0.5]);
    }

    #[test]
    fn malformed_grid_is_config_error() {
        assert!(parse_grid("1,2,3").is_err());
        assert!(parse_grid("0,1,0,1,1,5").is_err());
    }
}
