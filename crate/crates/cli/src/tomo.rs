use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use qretro::detectors::DetectorConfig;
use qretro::fock::{state_fidelity, trace_distance, FockSpace};
use qretro::metrics::{projectivity, MetricReport};
use qretro::retrodiction::{premeasurement_state, ProbeEnsemble};
use qretro::tomography::{
    maxlik_povm, qdt_retrodict, qst_premeasurement, simulate_counts, MaxLikOptions, QstOptions,
};
use serde::{Deserialize, Serialize};

use crate::{config_err, prepare_out, write_json, CliError, Globals, Result, Table};

/// The bundled example: APD with η = 0.6, ν = 0.05.
pub const EXAMPLE_CONFIG: &str = include_str!("../configs/tomo_apd.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Ring magnitudes `|α|`.
    pub magnitudes: Vec<f64>,
    /// Equally spaced phases per ring.
    pub phases: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { magnitudes: (0..=12).map(|k| 0.25 * k as f64).collect(), phases: 8 }
    }
}

/// Simulate → reconstruct → retrodict → metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoConfig {
    pub detector: DetectorConfig,
    /// Fock truncation; derived from the largest probe when absent.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub maxlik: MaxLikOptions,
    /// Fock fidelities reported per outcome.
    #[serde(default = "default_fock_levels")]
    pub fock_levels: usize,
    /// Also recover each pre-measurement state from the retrodictive
    /// probabilities alone.
    #[serde(default)]
    pub qst: bool,
}

fn default_shots() -> u64 {
    100_000
}

fn default_fock_levels() -> usize {
    4
}

/// Smallest `D` with `|α|² + 4|α| + 6 < D`.
pub fn dim_for_amplitude(a: f64) -> usize {
    (a * a + 4.0 * a + 6.0).floor() as usize + 1
}

impl TomoConfig {
    pub fn example() -> Self {
        serde_json::from_str(EXAMPLE_CONFIG).expect("bundled config parses")
    }

    /// Apply global overrides and fill the derived truncation.
    pub fn resolve(mut self, globals: &Globals) -> Result<Self> {
        if let Some(seed) = globals.seed {
            self.seed = seed;
        }
        if let Some(d) = globals.dim {
            self.dim = Some(d);
        }
        self.validate()?;
        if self.dim.is_none() {
            let amax = self.probes.magnitudes.iter().copied().fold(0.0, f64::max);
            self.dim = Some(dim_for_amplitude(amax));
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.maxlik.validate()?;
        if self.shots == 0 {
            return Err(config_err("shots must be positive"));
        }
        if self.probes.phases == 0 || self.probes.magnitudes.is_empty() {
            return Err(config_err("probes need at least one magnitude and one phase"));
        }
        if let Some(&bad) = self.probes.magnitudes.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(config_err(format!("probe magnitude must be finite and >= 0, got {bad}")));
        }
        if self.dim.is_some_and(|d| d < 2) {
            return Err(config_err("dim must be >= 2"));
        }
        Ok(())
    }
}

/// Headline numbers of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomoSummary {
    pub dim: usize,
    pub seed: u64,
    pub iterations: usize,
    pub stop_reason: String,
    pub completeness_residual: f64,
    /// Trace distance of each reconstructed element from the model element.
    pub trace_distance: BTreeMap<String, f64>,
    pub projectivity: BTreeMap<String, Option<f64>>,
    pub true_projectivity: BTreeMap<String, Option<f64>>,
    /// Fidelity of the recovered state with the reconstructed element's
    /// pre-measurement state, when `qst` is on.
    pub qst_fidelity: BTreeMap<String, Option<f64>>,
}

/// Run the pipeline and write every artifact under `out`. Returns the
/// summary; non-convergence surfaces as an error after all files are
/// written.
pub fn run_config(cfg: &TomoConfig, out: &Path) -> Result<TomoSummary> {
    let dim = cfg.dim.ok_or_else(|| config_err("unresolved dim"))?;
    let space = FockSpace::new(dim)?;
    let ensemble = ProbeEnsemble::rings(space, &cfg.probes.magnitudes, cfg.probes.phases)?;
    let truth = cfg.detector.povm(space)?;
    let table = simulate_counts(&ensemble, &truth, cfg.shots, cfg.seed)?;
    let report = maxlik_povm(&table, cfg.maxlik)?;
    let retro = qdt_retrodict(&table)?;

    prepare_out(out)?;
    write_json(&out.join("config.json"), cfg)?;
    let counts_path = out.join("counts.csv");
    let file = File::create(&counts_path).map_err(|source| CliError::Output { path: counts_path.clone(), source })?;
    table.write_csv(BufWriter::new(file))?;
    write_json(&out.join("report.json"), &report.to_json())?;

    let mut headers: Vec<String> = vec!["probe_re".into(), "probe_im".into()];
    headers.extend(table.labels().iter().cloned());
    let mut rt = Table::new(headers);
    for (m, probe) in ensemble.probes().iter().enumerate() {
        let alpha = probe.alpha.unwrap_or_default();
        let mut row = vec![alpha.re, alpha.im];
        row.extend(retro.row(m).iter());
        rt.push(row);
    }
    let rt_path = out.join("retrodiction.csv");
    let file = File::create(&rt_path).map_err(|source| CliError::Output { path: rt_path.clone(), source })?;
    rt.write_csv(BufWriter::new(file))?;

    let mut states = serde_json::Map::new();
    let mut metrics = serde_json::Map::new();
    let mut qst_states = serde_json::Map::new();
    let mut summary = TomoSummary {
        dim,
        seed: cfg.seed,
        iterations: report.iterations,
        stop_reason: serde_json::to_value(report.stop_reason)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        completeness_residual: report.completeness_residual,
        trace_distance: BTreeMap::new(),
        projectivity: BTreeMap::new(),
        true_projectivity: BTreeMap::new(),
        qst_fidelity: BTreeMap::new(),
    };
    for (n, (label, element)) in report.povm.iter().enumerate() {
        let model = truth.element(label).expect("reconstruction keeps the model labels");
        summary.trace_distance.insert(label.to_owned(), trace_distance(element, model));
        summary.projectivity.insert(label.to_owned(), projectivity(element).ok());
        summary.true_projectivity.insert(label.to_owned(), projectivity(model).ok());
        // Outcomes never observed reconstruct to zero and have no state.
        let state = premeasurement_state(element).ok();
        states.insert(label.to_owned(), state.as_ref().map_or(serde_json::Value::Null, |s| s.to_json()));
        let mr = MetricReport::for_element(element, cfg.fock_levels.min(dim)).ok();
        metrics.insert(label.to_owned(), serde_json::to_value(mr).map_err(qretro::Error::from)?);
        if cfg.qst {
            let column: Vec<f64> = retro.column(n).iter().copied().collect();
            let rec = qst_premeasurement(&column, &ensemble, &QstOptions::default());
            let fid = match (&rec, &state) {
                (Ok(r), Some(s)) => Some(state_fidelity(r, s)),
                _ => None,
            };
            summary.qst_fidelity.insert(label.to_owned(), fid);
            qst_states.insert(label.to_owned(), rec.map_or(serde_json::Value::Null, |s| s.to_json()));
        }
    }
    write_json(&out.join("premeasurement_states.json"), &states)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    if cfg.qst {
        write_json(&out.join("qst_states.json"), &qst_states)?;
    }
    write_json(&out.join("summary.json"), &summary)?;

    report.ensure_converged()?;
    Ok(summary)
}

pub fn run(cfg: TomoConfig, globals: &Globals) -> Result<TomoSummary> {
    let cfg = cfg.resolve(globals)?;
    run_config(&cfg, &globals.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_rule_dimension() {
        assert_eq!(dim_for_amplitude(3.0), 28);
        assert_eq!(dim_for_amplitude(0.0), 7);
        assert_eq!(dim_for_amplitude(2.0), 19);
    }

    #[test]
    fn bundled_config_is_the_documented_example() {
        let cfg = TomoConfig::example();
        assert_eq!(cfg.detector, DetectorConfig::Apd { eta: 0.6, nu: 0.05 });
        assert_eq!(cfg.shots, 100_000);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_and_validation() {
        let g = Globals { seed: Some(7), dim: Some(12), ..Default::default() };
        let cfg = TomoConfig::example().resolve(&g).unwrap();
        assert_eq!((cfg.seed, cfg.dim), (7, Some(12)));
        let bad = TomoConfig { shots: 0, ..TomoConfig::example() };
        assert_eq!(bad.resolve(&Globals::default()).unwrap_err().exit_code(), 2);
        let bad = TomoConfig { detector: DetectorConfig::Apd { eta: 1.2, nu: 0.0 }, ..TomoConfig::example() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn budget_exhaustion_exits_three_with_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = TomoConfig::example();
        cfg.dim = Some(10);
        cfg.probes.magnitudes = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        cfg.maxlik.max_iters = 2;
        let err = run_config(&cfg, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("summary.json").exists());
    }
}
