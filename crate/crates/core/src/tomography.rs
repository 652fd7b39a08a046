//! Simulated detector tomography and pre-measurement-state reconstruction.
//!
//! Counts come from a seeded ChaCha stream, so every stochastic output is a
//! pure function of its inputs and the seed.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::detectors::predictive_prob;
use crate::error::{invalid, Error, Result};
use crate::fock::{cholesky_upper, eigh, hermitian_fn, upper_inverse, FockOperator, FockSpace, Povm, QuantumState};
use crate::retrodiction::{bayes_retrodict, unread_mixture, ProbeEnsemble, PropositionKind, PropositionSet};

/// Completeness a POVM must meet before counts are simulated from it.
pub const SIMULATION_COMPLETENESS_TOL: f64 = 1e-8;

/// Completeness bound declared for reconstructed POVMs.
pub const RECONSTRUCTION_COMPLETENESS_TOL: f64 = 1e-8;

/// Eigenvalue floor when forming `λ^{−1/2}`.
pub const LAMBDA_FLOOR: f64 = 1e-14;

/// Allowed decrease of the log-likelihood between accepted iterates.
pub const LL_SLACK: f64 = 1e-12;

/// Outcome counts for every probe of an ensemble.
#[derive(Clone, Debug)]
pub struct CountTable {
    probes: ProbeEnsemble,
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
    shots_per_probe: u64,
    seed: u64,
}

impl CountTable {
    /// Every row must sum to `shots_per_probe`.
    pub fn new(
        probes: ProbeEnsemble,
        labels: Vec<String>,
        counts: Vec<Vec<u64>>,
        shots_per_probe: u64,
        seed: u64,
    ) -> Result<Self> {
        if shots_per_probe == 0 {
            return Err(invalid("shots per probe must be positive"));
        }
        if counts.len() != probes.len() {
            return Err(Error::DimensionMismatch { expected: probes.len(), found: counts.len() });
        }
        for (m, row) in counts.iter().enumerate() {
            if row.len() != labels.len() {
                return Err(Error::DimensionMismatch { expected: labels.len(), found: row.len() });
            }
            let total: u64 = row.iter().sum();
            if total != shots_per_probe {
                return Err(invalid(format!("probe {m} has {total} shots, expected {shots_per_probe}")));
            }
        }
        Ok(Self { probes, labels, counts, shots_per_probe, seed })
    }

    pub fn probes(&self) -> &ProbeEnsemble {
        &self.probes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn shots_per_probe(&self) -> u64 {
        self.shots_per_probe
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `f[(m, n)] = counts / shots`.
    pub fn frequencies(&self) -> DMatrix<f64> {
        let s = self.shots_per_probe as f64;
        DMatrix::from_fn(self.counts.len(), self.labels.len(), |m, n| self.counts[m][n] as f64 / s)
    }

    /// Header `probe_re,probe_im,prob,<labels>`, one row per probe.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "probe_re,probe_im,prob,{}", self.labels.join(","))?;
        for (probe, row) in self.probes.probes().iter().zip(&self.counts) {
            let alpha = probe
                .alpha
                .ok_or_else(|| invalid("only coherent-probe tables have a CSV form"))?;
            write!(out, "{:.16e},{:.16e},{:.16e}", alpha.re, alpha.im, probe.prob)?;
            for c in row {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Inverse of [`Self::write_csv`]. The CSV carries neither the
    /// truncation nor the seed, so both are supplied.
    pub fn read_csv<R: BufRead>(input: R, space: FockSpace, seed: u64) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 4 || cols[..3] != ["probe_re", "probe_im", "prob"] {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let labels: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
        let mut entries = Vec::new();
        let mut counts = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!("row has {} fields, expected {}", fields.len(), cols.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
            entries.push((C64::new(num(fields[0])?, num(fields[1])?), num(fields[2])?));
            let row = fields[3..]
                .iter()
                .map(|s| s.parse::<u64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<u64>>>()?;
            counts.push(row);
        }
        let shots = counts.first().map(|r| r.iter().sum()).unwrap_or(0);
        let probes = ProbeEnsemble::coherent(space, &entries)?;
        Self::new(probes, labels, counts, shots, seed)
    }
}

/// Multinomial counts per probe with probabilities `Tr(ρₘ Πₙ)`.
pub fn simulate_counts(ensemble: &ProbeEnsemble, povm: &Povm, shots: u64, seed: u64) -> Result<CountTable> {
    if povm.space() != ensemble.space() {
        return Err(Error::DimensionMismatch { expected: ensemble.space().dim(), found: povm.space().dim() });
    }
    let res = povm.completeness_residual();
    if res > SIMULATION_COMPLETENESS_TOL {
        return Err(Error::IncompletePovm(res));
    }
    if shots == 0 {
        return Err(invalid("shots per probe must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(ensemble.len());
    for m in 0..ensemble.len() {
        let state = ensemble.state(m);
        let probs: Vec<f64> = povm.iter().map(|(_, el)| predictive_prob(&state, el).max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        counts.push(multinomial(&mut rng, shots, &probs, total)?);
    }
    let labels = povm.labels().into_iter().map(String::from).collect();
    CountTable::new(ensemble.clone(), labels, counts, shots, seed)
}

/// Sequential-binomial multinomial draw.
fn multinomial(rng: &mut ChaCha8Rng, shots: u64, probs: &[f64], total: f64) -> Result<Vec<u64>> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = total;
    for (n, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if n + 1 == probs.len() {
            out[n] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(remaining, q)
            .map_err(|e| invalid(format!("binomial draw: {e}")))?
            .sample(rng);
        out[n] = k;
        remaining -= k;
        mass -= p;
    }
    Ok(out)
}

/// Controls for the iterative maximum-likelihood reconstructions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaxLikOptions {
    pub max_iters: usize,
    /// Stop when the relative log-likelihood gain falls below this.
    pub ll_tol: f64,
    /// Keep every iterate diagonal in the Fock basis.
    pub diagonal_constraint: bool,
}

impl Default for MaxLikOptions {
    fn default() -> Self {
        Self { max_iters: 5000, ll_tol: 1e-10, diagonal_constraint: false }
    }
}

impl MaxLikOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        if !(self.ll_tol > 0.0) || !self.ll_tol.is_finite() {
            return Err(invalid(format!("ll_tol must be positive, got {}", self.ll_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tol,
    MaxIters,
}

/// Result of a MaxLik POVM reconstruction. Returned even when the iteration
/// budget runs out; see [`ReconstructionReport::ensure_converged`].
#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    pub povm: Povm,
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub completeness_residual: f64,
    pub stop_reason: StopReason,
    /// Log-likelihood of the initial guess followed by every accepted iterate.
    pub log_likelihood_history: Vec<f64>,
    pub notes: Vec<String>,
    pub options: MaxLikOptions,
    pub seed: Option<u64>,
}

impl ReconstructionReport {
    /// `Err(NoConvergence)` when the run stopped on `max_iters`.
    pub fn ensure_converged(&self) -> Result<()> {
        match self.stop_reason {
            StopReason::Tol => Ok(()),
            StopReason::MaxIters => Err(Error::NoConvergence(self.iterations)),
        }
    }

    /// Largest decrease between consecutive recorded log-likelihoods.
    pub fn worst_ll_decrease(&self) -> f64 {
        self.log_likelihood_history.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "options": self.options,
            "iterations": self.iterations,
            "final_log_likelihood": self.final_log_likelihood,
            "completeness_residual": self.completeness_residual,
            "stop_reason": self.stop_reason,
            "log_likelihood_history": self.log_likelihood_history,
            "notes": self.notes,
            "povm": self.povm.to_json(),
        })
    }
}

/// MaxLik POVM reconstruction from a count table.
pub fn maxlik_povm(table: &CountTable, options: MaxLikOptions) -> Result<ReconstructionReport> {
    let mut report = maxlik_povm_frequencies(table.probes(), table.labels(), &table.frequencies(), options, None)?;
    report.seed = Some(table.seed());
    Ok(report)
}

/// MaxLik POVM reconstruction from a frequency matrix `f[(m, n)]` (rows sum
/// to one). `init` defaults to `Πₙ = 1/N`.
///
/// Each iteration applies `Πₙ ← λ^{−1/2} Rₙ Πₙ Rₙ λ^{−1/2}` with
/// `Rₙ = Σₘ (fₘₙ/pₘₙ) ρₘ` and `λ = Σₙ Rₙ Πₙ Rₙ`. If a full step lowers the
/// likelihood, the step is diluted to `(1 + εRₙ)/(1 + ε)` with shrinking `ε`.
pub fn maxlik_povm_frequencies(
    ensemble: &ProbeEnsemble,
    labels: &[String],
    freqs: &DMatrix<f64>,
    options: MaxLikOptions,
    init: Option<&Povm>,
) -> Result<ReconstructionReport> {
    options.validate()?;
    let (m_count, n_count) = freqs.shape();
    if m_count != ensemble.len() {
        return Err(Error::DimensionMismatch { expected: ensemble.len(), found: m_count });
    }
    if labels.len() != n_count {
        return Err(Error::DimensionMismatch { expected: n_count, found: labels.len() });
    }
    if freqs.iter().any(|f| !(*f >= 0.0)) {
        return Err(invalid("frequencies must be nonnegative"));
    }
    let space = ensemble.space();
    let d = space.dim();
    let mut notes = Vec::new();
    let active: Vec<bool> = (0..n_count).map(|n| freqs.column(n).sum() > 0.0).collect();
    for (n, a) in active.iter().enumerate() {
        if !a {
            notes.push(format!("outcome {:?} never observed; element frozen at zero", labels[n]));
        }
    }
    let n_active = active.iter().filter(|a| **a).count();
    if n_active == 0 {
        return Err(invalid("no outcome was observed"));
    }
    let start: Vec<DMatrix<C64>> = match init {
        Some(p) => {
            if p.len() != n_count || p.space() != space {
                return Err(invalid("initial POVM does not match the outcome set"));
            }
            p.iter().map(|(_, el)| el.matrix().clone()).collect()
        }
        None => (0..n_count)
            .map(|n| {
                if active[n] {
                    DMatrix::<C64>::identity(d, d).scale(1.0 / n_active as f64)
                } else {
                    DMatrix::zeros(d, d)
                }
            })
            .collect(),
    };

    let (elements, iterations, history, stop_reason) = if options.diagonal_constraint {
        let model = DiagonalModel::new(ensemble);
        let init: Vec<Vec<f64>> = start.iter().map(|m| m.diagonal().iter().map(|z| z.re).collect()).collect();
        let run = iterate(&model, freqs, &active, init, &options);
        let mats = run
            .0
            .iter()
            .map(|v| DMatrix::from_diagonal(&DVector::from_iterator(d, v.iter().map(|x| C64::new(*x, 0.0)))))
            .collect::<Vec<_>>();
        (mats, run.1, run.2, run.3)
    } else {
        let model = FullModel::new(ensemble);
        let init = start.iter().map(FullModel::factor).collect();
        let run = iterate(&model, freqs, &active, init, &options);
        (run.0.iter().map(FullModel::element).collect(), run.1, run.2, run.3)
    };

    let povm = Povm::from_parts_unchecked(
        space,
        labels
            .iter()
            .cloned()
            .zip(elements.into_iter().map(|m| FockOperator::from_parts(space, m)))
            .collect(),
        RECONSTRUCTION_COMPLETENESS_TOL,
    );
    let completeness_residual = povm.completeness_residual();
    if stop_reason == StopReason::MaxIters {
        log::warn!("MaxLik stopped after {iterations} iterations without meeting ll_tol");
    }
    Ok(ReconstructionReport {
        povm,
        iterations,
        final_log_likelihood: *history.last().expect("history holds the initial value"),
        completeness_residual,
        stop_reason,
        log_likelihood_history: history,
        notes,
        options,
        seed: None,
    })
}

/// One MaxLik parameterization of the POVM elements.
trait Model {
    type Elem: Clone;
    /// `p[(m, n)] = Tr(ρₘ Πₙ)`.
    fn probs(&self, elems: &[Self::Elem]) -> DMatrix<f64>;
    /// `Rₙ = Σₘ w[(m, n)] ρₘ`.
    fn r_ops(&self, w: &DMatrix<f64>, active: &[bool]) -> Vec<Option<Self::Elem>>;
    /// Normalized update with `Rₙ` diluted by `ε` (`None` = full step).
    fn update(&self, elems: &[Self::Elem], r: &[Option<Self::Elem>], eps: Option<f64>) -> Vec<Self::Elem>;
}

fn log_likelihood(freqs: &DMatrix<f64>, probs: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for (f, p) in freqs.iter().zip(probs.iter()) {
        if *f > 0.0 {
            s += f * p.max(f64::MIN_POSITIVE).ln();
        }
    }
    s
}

fn ratio_weights(freqs: &DMatrix<f64>, probs: &DMatrix<f64>) -> DMatrix<f64> {
    freqs.zip_map(probs, |f, p| if f > 0.0 { f / p.max(f64::MIN_POSITIVE) } else { 0.0 })
}

/// Dilution parameters tried after a full step fails to improve.
const DILUTIONS: [f64; 12] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.02, 1e-2, 5e-3, 1e-3, 1e-4, 1e-5, 1e-6];

fn iterate<M: Model>(
    model: &M,
    freqs: &DMatrix<f64>,
    active: &[bool],
    mut elems: Vec<M::Elem>,
    options: &MaxLikOptions,
) -> (Vec<M::Elem>, usize, Vec<f64>, StopReason) {
    let mut probs = model.probs(&elems);
    let mut ll = log_likelihood(freqs, &probs);
    let mut history = vec![ll];
    for it in 1..=options.max_iters {
        let r = model.r_ops(&ratio_weights(freqs, &probs), active);
        let mut accepted = None;
        for eps in std::iter::once(None).chain(DILUTIONS.iter().map(|e| Some(*e))) {
            let cand = model.update(&elems, &r, eps);
            let cand_probs = model.probs(&cand);
            let cand_ll = log_likelihood(freqs, &cand_probs);
            if cand_ll >= ll {
                accepted = Some((cand, cand_probs, cand_ll));
                break;
            }
        }
        let Some((cand, cand_probs, cand_ll)) = accepted else {
            // No ascent direction left at working precision.
            return (elems, it - 1, history, StopReason::Tol);
        };
        let gain = (cand_ll - ll) / ll.abs().max(f64::MIN_POSITIVE);
        elems = cand;
        probs = cand_probs;
        ll = cand_ll;
        history.push(ll);
        if gain < options.ll_tol {
            return (elems, it, history, StopReason::Tol);
        }
    }
    (elems, options.max_iters, history, StopReason::MaxIters)
}

/// Probes and elements reduced to their Fock-basis diagonals.
struct DiagonalModel {
    /// `q[m][k] = |⟨k|ψₘ⟩|²`.
    q: Vec<Vec<f64>>,
    dim: usize,
}

impl DiagonalModel {
    fn new(ensemble: &ProbeEnsemble) -> Self {
        let q = ensemble.probes().iter().map(|p| p.ket.iter().map(|z| z.norm_sqr()).collect()).collect();
        Self { q, dim: ensemble.space().dim() }
    }
}

impl Model for DiagonalModel {
    type Elem = Vec<f64>;

    fn probs(&self, elems: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.q.len(), elems.len(), |m, n| {
            self.q[m].iter().zip(&elems[n]).map(|(a, b)| a * b).sum()
        })
    }

    fn r_ops(&self, w: &DMatrix<f64>, active: &[bool]) -> Vec<Option<Vec<f64>>> {
        (0..w.ncols())
            .map(|n| {
                active[n].then(|| {
                    let mut r = vec![0.0; self.dim];
                    for (m, q) in self.q.iter().enumerate() {
                        let wm = w[(m, n)];
                        if wm != 0.0 {
                            for (rk, qk) in r.iter_mut().zip(q) {
                                *rk += wm * qk;
                            }
                        }
                    }
                    r
                })
            })
            .collect()
    }

    fn update(&self, elems: &[Vec<f64>], r: &[Option<Vec<f64>>], eps: Option<f64>) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = elems
            .iter()
            .zip(r)
            .map(|(e, rn)| match rn {
                None => vec![0.0; self.dim],
                Some(rn) => e
                    .iter()
                    .zip(rn)
                    .map(|(pi, rk)| {
                        let rk = match eps {
                            None => *rk,
                            Some(eps) => (1.0 + eps * rk) / (1.0 + eps),
                        };
                        rk * rk * pi
                    })
                    .collect(),
            })
            .collect();
        for k in 0..self.dim {
            let lam: f64 = out.iter().map(|e| e[k]).sum();
            let inv = 1.0 / lam.max(LAMBDA_FLOOR);
            for e in out.iter_mut() {
                e[k] *= inv;
            }
        }
        out
    }
}

/// Unconstrained elements carried as factors `Πₙ = AₙAₙ†`, so every
/// iterate is positive semidefinite whatever the rounding.
struct FullModel {
    kets: Vec<DVector<C64>>,
    dim: usize,
}

impl FullModel {
    fn new(ensemble: &ProbeEnsemble) -> Self {
        Self { kets: ensemble.probes().iter().map(|p| p.ket.clone()).collect(), dim: ensemble.space().dim() }
    }

    /// `Π^{1/2}`, negative rounding clipped.
    fn factor(op: &DMatrix<C64>) -> DMatrix<C64> {
        hermitian_fn(op, |l| l.max(0.0).sqrt())
    }

    fn element(a: &DMatrix<C64>) -> DMatrix<C64> {
        let m = a * a.adjoint();
        (&m + m.adjoint()).scale(0.5)
    }
}

impl Model for FullModel {
    type Elem = DMatrix<C64>;

    fn probs(&self, elems: &[DMatrix<C64>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.kets.len(), elems.len(), |m, n| (elems[n].adjoint() * &self.kets[m]).norm_squared())
    }

    fn r_ops(&self, w: &DMatrix<f64>, active: &[bool]) -> Vec<Option<DMatrix<C64>>> {
        (0..w.ncols())
            .map(|n| {
                active[n].then(|| {
                    let mut r = DMatrix::<C64>::zeros(self.dim, self.dim);
                    for (m, k) in self.kets.iter().enumerate() {
                        let wm = w[(m, n)];
                        if wm != 0.0 {
                            r += (k * k.adjoint()).scale(wm);
                        }
                    }
                    r
                })
            })
            .collect()
    }

    fn update(&self, elems: &[DMatrix<C64>], r: &[Option<DMatrix<C64>>], eps: Option<f64>) -> Vec<DMatrix<C64>> {
        let id = DMatrix::<C64>::identity(self.dim, self.dim);
        let mut out: Vec<DMatrix<C64>> = elems
            .iter()
            .zip(r)
            .map(|(a, rn)| match rn {
                None => DMatrix::zeros(self.dim, self.dim),
                Some(rn) => match eps {
                    None => rn * a,
                    Some(eps) => (&id + rn.scale(eps)).scale(1.0 / (1.0 + eps)) * a,
                },
            })
            .collect();
        normalize_factors(&mut out, self.dim);
        // Where the probes barely reach, lambda is tiny and lambda^{-1/2}
        // amplifies eigensolver round-off; the sum is then close to, but not
        // at, the identity. Repeat with the well-conditioned sum.
        for _ in 0..REFINE_PASSES {
            let sum = out.iter().fold(DMatrix::<C64>::zeros(self.dim, self.dim), |acc, a| acc + Self::element(a));
            if (sum - &id).iter().map(|z| z.norm()).fold(0.0, f64::max) < REFINE_TOL {
                break;
            }
            normalize_factors(&mut out, self.dim);
        }
        out
    }
}

const REFINE_PASSES: usize = 4;
const REFINE_TOL: f64 = 1e-13;

/// `Aₙ ← S Aₙ` with `S = (Σ AₖAₖ†)^{−1/2}`, eigenvalues floored.
fn normalize_factors(factors: &mut [DMatrix<C64>], dim: usize) {
    let lam = factors.iter().fold(DMatrix::<C64>::zeros(dim, dim), |acc, a| acc + FullModel::element(a));
    let s = hermitian_fn(&lam, |l| 1.0 / l.max(LAMBDA_FLOOR).sqrt());
    for a in factors.iter_mut() {
        *a = &s * &*a;
    }
}

/// `Λₘ = (σ⁻¹)† pₘ|αₘ⟩⟨αₘ| σ⁻¹` with `ρ^[?] = σ†σ` from the design ensemble.
pub fn lambda_propositions(ensemble: &ProbeEnsemble) -> Result<PropositionSet> {
    lambda_propositions_with_mixture(ensemble, &unread_mixture(ensemble))
}

/// As [`lambda_propositions`], factoring an externally supplied mixture
/// (for instance a reconstructed one) instead of the design mixture.
pub fn lambda_propositions_with_mixture(ensemble: &ProbeEnsemble, mixture: &QuantumState) -> Result<PropositionSet> {
    let (_, sigma_inv) = mixture_factor(ensemble, mixture)?;
    lambda_from_factor(ensemble, &sigma_inv)
}

/// `(σ, σ⁻¹)` for the given mixture.
fn mixture_factor(ensemble: &ProbeEnsemble, mixture: &QuantumState) -> Result<(FockOperator, FockOperator)> {
    if mixture.space() != ensemble.space() {
        return Err(Error::DimensionMismatch { expected: ensemble.space().dim(), found: mixture.dim() });
    }
    let sigma = cholesky_upper(mixture.op())?;
    let inv = upper_inverse(&sigma)?;
    Ok((sigma, inv))
}

fn lambda_from_factor(ensemble: &ProbeEnsemble, sigma_inv: &FockOperator) -> Result<PropositionSet> {
    let space = ensemble.space();
    let si = sigma_inv.matrix();
    let ops = ensemble
        .probes()
        .iter()
        .map(|p| {
            let v = si.adjoint() * &p.ket;
            FockOperator::from_parts(space, (&v * v.adjoint()).scale(p.prob))
        })
        .collect();
    PropositionSet::new(PropositionKind::Lambda, ops)
}

/// Options for [`qst_premeasurement`].
#[derive(Clone, Debug, Default)]
pub struct QstOptions {
    /// Iteration controls; `diagonal_constraint` does not apply to the state
    /// reconstruction and is ignored.
    pub maxlik: MaxLikOptions,
    /// Mixture to factor instead of the design ensemble's `ρ^[?]`.
    pub mixture: Option<QuantumState>,
}

impl QstOptions {
    /// Settings for noise-free probabilities. Pure pre-measurement states
    /// sit on the boundary of the state space, where the `RρR` iteration
    /// converges sublinearly, so the tolerance is tight and the budget large.
    /// On sampled data the default tolerance is preferable: running longer
    /// fits the noise that `σ⁻¹` amplifies.
    pub fn exact() -> Self {
        Self {
            maxlik: MaxLikOptions { max_iters: 200_000, ll_tol: 1e-14, diagonal_constraint: false },
            mixture: None,
        }
    }
}

/// Recover the pre-measurement state of one outcome from `Pr(m|n)`.
///
/// A state-MaxLik over the `Λₘ` finds `ρₙ` with `Tr(ρₙΛₘ)` closest to the
/// retrodicted column; then `ρ_retr = σ⁻¹ρₙ(σ⁻¹)†` normalized. The column
/// must use the ensemble's own preparation probabilities as priors.
pub fn qst_premeasurement(retro_probs: &[f64], ensemble: &ProbeEnsemble, options: &QstOptions) -> Result<QuantumState> {
    options.maxlik.validate()?;
    if retro_probs.len() != ensemble.len() {
        return Err(Error::DimensionMismatch { expected: ensemble.len(), found: retro_probs.len() });
    }
    if retro_probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(invalid("retrodicted probabilities must be nonnegative"));
    }
    let total: f64 = retro_probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("retrodicted probabilities sum to {total}, not 1")));
    }
    let design;
    let mixture = match &options.mixture {
        Some(m) => m,
        None => {
            design = unread_mixture(ensemble);
            &design
        }
    };
    let (_, sigma_inv) = mixture_factor(ensemble, mixture)?;
    let lambdas = lambda_from_factor(ensemble, &sigma_inv)?;
    let (rho_n, stop) = state_maxlik(lambdas.ops(), retro_probs, &options.maxlik);
    if stop == StopReason::MaxIters {
        return Err(Error::NoConvergence(options.maxlik.max_iters));
    }
    let si = sigma_inv.matrix();
    let back = si * &rho_n * si.adjoint();
    let back = (&back + back.adjoint()).scale(0.5);
    QuantumState::normalized(FockOperator::from_parts(ensemble.space(), back))
}

/// `ρ ← RρR/Tr` with `R = Σ (fₘ/pₘ) Eₘ`, diluted when a full step does not
/// increase `Σ fₘ ln pₘ`.
fn state_maxlik(effects: &[FockOperator], freqs: &[f64], options: &MaxLikOptions) -> (DMatrix<C64>, StopReason) {
    let d = effects[0].dim();
    let id = DMatrix::<C64>::identity(d, d);
    let probs = |rho: &DMatrix<C64>| -> Vec<f64> {
        effects
            .iter()
            .map(|e| {
                let m = e.matrix();
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += (rho[(i, j)] * m[(j, i)]).re;
                    }
                }
                s
            })
            .collect()
    };
    let ll_of = |p: &[f64]| -> f64 {
        freqs
            .iter()
            .zip(p)
            .filter(|(f, _)| **f > 0.0)
            .map(|(f, p)| f * p.max(f64::MIN_POSITIVE).ln())
            .sum()
    };
    let mut rho = id.scale(1.0 / d as f64);
    let mut p = probs(&rho);
    let mut ll = ll_of(&p);
    for _ in 0..options.max_iters {
        let mut r = DMatrix::<C64>::zeros(d, d);
        for ((e, f), pm) in effects.iter().zip(freqs).zip(&p) {
            if *f > 0.0 {
                r += e.matrix().scale(f / pm.max(f64::MIN_POSITIVE));
            }
        }
        let mut accepted = None;
        for eps in std::iter::once(None).chain(DILUTIONS.iter().map(|e| Some(*e))) {
            let re = match eps {
                None => r.clone(),
                Some(eps) => (&id + r.scale(eps)).scale(1.0 / (1.0 + eps)),
            };
            let mut cand = &re * &rho * &re;
            cand = (&cand + cand.adjoint()).scale(0.5);
            let tr = cand.trace().re;
            cand = cand.scale(1.0 / tr);
            let cp = probs(&cand);
            let cll = ll_of(&cp);
            if cll >= ll {
                accepted = Some((cand, cp, cll));
                break;
            }
        }
        let Some((cand, cp, cll)) = accepted else {
            return (rho, StopReason::Tol);
        };
        let gain = (cll - ll) / ll.abs().max(f64::MIN_POSITIVE);
        rho = cand;
        p = cp;
        ll = cll;
        if gain < options.ll_tol {
            return (rho, StopReason::Tol);
        }
    }
    (rho, StopReason::MaxIters)
}

/// `Pr(m|n) = Pr(n|m) / Σ_{m'} Pr(n|m')` from a table with equal shots per
/// probe. Same `(m, n)` layout as the frequencies.
pub fn qdt_retrodict(table: &CountTable) -> Result<DMatrix<f64>> {
    qdt_retrodict_predictive(&table.frequencies())
}

/// [`qdt_retrodict`] from a predictive matrix `Pr(n|m)`.
pub fn qdt_retrodict_predictive(predictive: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = predictive.nrows();
    if m == 0 {
        return Err(invalid("empty predictive matrix"));
    }
    bayes_retrodict(predictive, &vec![1.0 / m as f64; m])
}

/// Exact `Pr(n|m)` for every probe and element.
pub fn predictive_matrix(ensemble: &ProbeEnsemble, povm: &Povm) -> DMatrix<f64> {
    DMatrix::from_fn(ensemble.len(), povm.len(), |m, n| {
        predictive_prob(&ensemble.state(m), &povm.elements()[n].1)
    })
}

/// Largest eigenvalue magnitude of `Σ Πₙ − 1`, for reports built elsewhere.
pub fn completeness_error(elements: &[FockOperator]) -> f64 {
    let d = elements[0].dim();
    let mut s = DMatrix::<C64>::identity(d, d).scale(-1.0);
    for e in elements {
        s += e.matrix();
    }
    eigh(&s).0.iter().fold(0.0f64, |a, l| a.max(l.abs()))
}
