//! Retrodiction: pre-measurement states, proposition operators,
//! retrodictive probabilities and heralded state preparation.
//!
//! A measurement outcome `n` with POVM element `Πₙ` is summarized by the
//! pre-measurement state `Πₙ / Tr Πₙ`. Statements about the preparation are
//! proposition operators `Θₘ` (or `Λₘ` for coherent probe ensembles, see
//! [`crate::tomography::lambda_propositions`]) that resolve the identity,
//! and `Pr(m|n) = Tr(ρ_retr Θₘ)`.
//!
//! Time evolution between preparation and detection is taken as the
//! identity throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::detectors::{trace_product, ApdParams};
use crate::error::{invalid, Error, Result};
use crate::fock::{coherent_ket, FockOperator, FockSpace, OperatorRecord, QuantumState};

/// Traces at or below this are treated as zero in `Π / Tr Π`.
pub const TRACE_FLOOR: f64 = 1e-12;

/// Default tolerance on `ρ^[?] = 1/D` for the `Θ` construction.
pub const THETA_TOL: f64 = 1e-8;

/// Completeness tolerance for proposition sets.
pub const PROPOSITION_COMPLETENESS_TOL: f64 = 1e-10;

/// One preparation: a pure probe state and its preparation probability.
#[derive(Clone, Debug)]
pub struct Probe {
    /// Coherent amplitude, when the probe is a coherent state.
    pub alpha: Option<C64>,
    pub ket: DVector<C64>,
    pub prob: f64,
}

/// Pure probe states with preparation probabilities.
#[derive(Clone, Debug)]
pub struct ProbeEnsemble {
    space: FockSpace,
    probes: Vec<Probe>,
}

impl ProbeEnsemble {
    /// Coherent probes `|αₘ⟩` prepared with probability `pₘ`.
    pub fn coherent(space: FockSpace, entries: &[(C64, f64)]) -> Result<Self> {
        let probes = entries
            .iter()
            .map(|&(alpha, prob)| Probe { alpha: Some(alpha), ket: coherent_ket(alpha, space), prob })
            .collect();
        Self::from_probes(space, probes)
    }

    /// Equal-weight coherent probes on rings: every amplitude in
    /// `magnitudes` at `phases` equally spaced phases. A zero magnitude
    /// contributes a single vacuum probe per ring phase so every ring has
    /// the same weight.
    pub fn rings(space: FockSpace, magnitudes: &[f64], phases: usize) -> Result<Self> {
        if phases == 0 || magnitudes.is_empty() {
            return Err(invalid("ring ensemble needs at least one magnitude and one phase"));
        }
        let total = (magnitudes.len() * phases) as f64;
        let mut entries = Vec::with_capacity(magnitudes.len() * phases);
        for &r in magnitudes {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(invalid(format!("probe magnitude must be finite and >= 0, got {r}")));
            }
            for k in 0..phases {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / phases as f64;
                entries.push((C64::from_polar(r, theta), 1.0 / total));
            }
        }
        Self::coherent(space, &entries)
    }

    /// Arbitrary pure probes (normalized on construction).
    pub fn from_kets(space: FockSpace, kets: Vec<DVector<C64>>, probs: Vec<f64>) -> Result<Self> {
        if kets.len() != probs.len() {
            return Err(invalid("one probability per ket required"));
        }
        let mut probes = Vec::with_capacity(kets.len());
        for (ket, prob) in kets.into_iter().zip(probs) {
            if ket.len() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), found: ket.len() });
            }
            let n = ket.norm();
            if !(n > 0.0) {
                return Err(invalid("zero probe ket"));
            }
            probes.push(Probe { alpha: None, ket: ket / C64::new(n, 0.0), prob });
        }
        Self::from_probes(space, probes)
    }

    fn from_probes(space: FockSpace, probes: Vec<Probe>) -> Result<Self> {
        if probes.is_empty() {
            return Err(invalid("empty probe ensemble"));
        }
        if probes.iter().any(|p| !(p.prob >= 0.0)) {
            return Err(invalid("preparation probabilities must be nonnegative"));
        }
        let total: f64 = probes.iter().map(|p| p.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("preparation probabilities sum to {total}, not 1")));
        }
        Ok(Self { space, probes })
    }

    #[inline]
    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn probs(&self) -> Vec<f64> {
        self.probes.iter().map(|p| p.prob).collect()
    }

    /// `ρₘ = |ψₘ⟩⟨ψₘ|`.
    pub fn state(&self, m: usize) -> QuantumState {
        let ket = &self.probes[m].ket;
        QuantumState::from_op_unchecked(FockOperator::from_parts(self.space, ket * ket.adjoint()))
    }

    /// Same probes, equal preparation probabilities.
    pub fn with_uniform_probs(&self) -> Self {
        let p = 1.0 / self.probes.len() as f64;
        let probes = self.probes.iter().map(|q| Probe { prob: p, ..q.clone() }).collect();
        Self { space: self.space, probes }
    }
}

/// `ρ^[?] = Σ pₘ ρₘ`, the state prepared when the choice `m` is not read.
pub fn unread_mixture(ensemble: &ProbeEnsemble) -> QuantumState {
    let d = ensemble.space.dim();
    let mut m = DMatrix::<C64>::zeros(d, d);
    for p in &ensemble.probes {
        m += (&p.ket * p.ket.adjoint()).scale(p.prob);
    }
    QuantumState::from_op_unchecked(FockOperator::from_parts(ensemble.space, m))
}

/// Which construction produced a proposition set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropositionKind {
    Theta,
    Lambda,
}

/// Positive operators about the preparation that resolve the identity.
#[derive(Clone, Debug)]
pub struct PropositionSet {
    kind: PropositionKind,
    ops: Vec<FockOperator>,
}

impl PropositionSet {
    pub fn new(kind: PropositionKind, ops: Vec<FockOperator>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| invalid("empty proposition set"))?;
        let space = first.space();
        for op in &ops {
            if op.dim() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), found: op.dim() });
            }
            op.check_positive()?;
        }
        let set = Self { kind, ops };
        let res = set.completeness_residual();
        if res > PROPOSITION_COMPLETENESS_TOL {
            return Err(Error::IncompletePovm(res));
        }
        Ok(set)
    }

    pub fn kind(&self) -> PropositionKind {
        self.kind
    }

    pub fn ops(&self) -> &[FockOperator] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn space(&self) -> FockSpace {
        self.ops[0].space()
    }

    /// `max |Σ ops − 1|` entrywise.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.space().dim();
        let mut sum = DMatrix::<C64>::zeros(d, d);
        for op in &self.ops {
            sum += op.matrix();
        }
        sum -= DMatrix::<C64>::identity(d, d);
        sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `{"kind": …, "dim": D, "ops": [operator records]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "dim": self.space().dim(),
            "ops": self.ops.iter().map(FockOperator::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let kind: PropositionKind = serde_json::from_value(value["kind"].clone())?;
        let ops = value["ops"]
            .as_array()
            .ok_or_else(|| Error::Parse("missing ops".into()))?
            .iter()
            .map(FockOperator::from_json)
            .collect::<Result<Vec<_>>>()?;
        Self::new(kind, ops)
    }
}

/// `ρ_retr = Π / Tr Π`.
pub fn premeasurement_state(element: &FockOperator) -> Result<QuantumState> {
    let tr = element.trace_re();
    if !(tr > TRACE_FLOOR) {
        return Err(Error::ZeroTraceElement(tr));
    }
    QuantumState::new(element.scale(1.0 / tr))
}

/// Pre-measurement state of the APD "off" outcome in closed form: the
/// geometric law `(1−η)ⁿ` normalized over `n < D`. The dark-count level
/// drops out, so `params.nu` is never read.
pub fn premeasurement_off(params: ApdParams, space: FockSpace) -> Result<QuantumState> {
    params.validate()?;
    let q = 1.0 - params.eta;
    let diag: Vec<f64> = (0..space.dim()).map(|n| q.powi(n as i32)).collect();
    let tr: f64 = diag.iter().sum();
    let diag: Vec<f64> = diag.iter().map(|d| d / tr).collect();
    QuantumState::new(FockOperator::from_diagonal(space, &diag)?)
}

/// Pre-measurement state of the APD "on" outcome at finite truncation:
/// diagonal `∝ 1 − e^{−ν}(1−η)ⁿ`, normalized over `n < D`.
pub fn premeasurement_on_asymptotic(params: ApdParams, space: FockSpace) -> Result<QuantumState> {
    params.validate()?;
    let diag: Vec<f64> = (0..space.dim()).map(|n| params.prob_on_fock(n)).collect();
    let tr: f64 = diag.iter().sum();
    if !(tr > TRACE_FLOOR) {
        return Err(Error::ZeroTraceElement(tr));
    }
    let diag: Vec<f64> = diag.iter().map(|d| d / tr).collect();
    QuantumState::new(FockOperator::from_diagonal(space, &diag)?)
}

/// `Θₘ = D pₘ ρₘ`, valid only when the unread mixture is `1/D`.
pub fn proposition_set_theta(ensemble: &ProbeEnsemble, theta_tol: f64) -> Result<PropositionSet> {
    let space = ensemble.space();
    let d = space.dim() as f64;
    let mix = unread_mixture(ensemble);
    let target = FockOperator::identity(space).scale(1.0 / d);
    let dev = mix.op().max_abs_diff(&target);
    if dev > theta_tol {
        return Err(Error::NotMaximallyMixed(dev));
    }
    let ops = (0..ensemble.len())
        .map(|m| ensemble.state(m).op().scale(d * ensemble.probes[m].prob))
        .collect();
    PropositionSet::new(PropositionKind::Theta, ops)
}

/// `Pr(m|n) = Tr(ρ_retr Θₘ)` with `ρ_retr` retrodicted from `element`.
pub fn retrodictive_prob(element: &FockOperator, proposition: &FockOperator) -> Result<f64> {
    let tr = element.trace_re();
    if !(tr > TRACE_FLOOR) {
        return Err(Error::ZeroTraceElement(tr));
    }
    Ok(trace_product(element, proposition) / tr)
}

/// Bayes inversion. `predictive[(m, n)] = Pr(n|m)`; returns
/// `Pr(m|n) = Pr(n|m)Pr(m) / Σ_{m'} Pr(n|m')Pr(m')` in the same layout, so
/// every column sums to one.
pub fn bayes_retrodict(predictive: &DMatrix<f64>, priors: &[f64]) -> Result<DMatrix<f64>> {
    let (rows, cols) = predictive.shape();
    if priors.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, found: priors.len() });
    }
    if priors.iter().any(|p| !(*p >= 0.0)) {
        return Err(invalid("priors must be nonnegative"));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("priors sum to {total}, not 1")));
    }
    if predictive.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p)) {
        return Err(invalid("predictive probabilities must lie in [0, 1]"));
    }
    let mut out = DMatrix::<f64>::zeros(rows, cols);
    for n in 0..cols {
        let denom: f64 = (0..rows).map(|m| predictive[(m, n)] * priors[m]).sum();
        if !(denom > 0.0) {
            return Err(Error::UnreachableOutcome(n));
        }
        for m in 0..rows {
            out[(m, n)] = predictive[(m, n)] * priors[m] / denom;
        }
    }
    Ok(out)
}

/// Density operator on `A ⊗ B`, row-major index `i_A·D_B + i_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    space_a: FockSpace,
    space_b: FockSpace,
    matrix: DMatrix<C64>,
}

impl BipartiteState {
    pub fn new(space_a: FockSpace, space_b: FockSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space_a.dim() * space_b.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        let tol = space_a.tol().max(space_b.tol());
        let herr = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herr > tol {
            return Err(Error::NotHermitian(herr));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > tol {
            return Err(Error::NotNormalized(tr));
        }
        let lmin = crate::fock::eigh(&matrix).0[0];
        if lmin < -tol {
            return Err(Error::NotPositive(lmin));
        }
        Ok(Self { space_a, space_b, matrix })
    }

    pub fn product(a: &QuantumState, b: &QuantumState) -> Self {
        Self { space_a: a.space(), space_b: b.space(), matrix: a.matrix().kronecker(b.matrix()) }
    }

    pub fn pure(space_a: FockSpace, space_b: FockSpace, ket: &DVector<C64>) -> Result<Self> {
        let n2 = ket.norm_squared();
        if !(n2 > 0.0) {
            return Err(invalid("zero ket"));
        }
        Self::new(space_a, space_b, (ket * ket.adjoint()).scale(1.0 / n2))
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.space_a.dim(), self.space_b.dim()]
    }

    pub fn space_a(&self) -> FockSpace {
        self.space_a
    }

    pub fn space_b(&self) -> FockSpace {
        self.space_b
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// `⟨(i,k)|ρ|(j,l)⟩`.
    #[inline]
    pub fn entry(&self, i: usize, k: usize, j: usize, l: usize) -> C64 {
        let db = self.space_b.dim();
        self.matrix[(i * db + k, j * db + l)]
    }

    /// `Tr_B(ρ (1 ⊗ Π))` as an unnormalized operator on `A`.
    pub fn contract_b(&self, element: &FockOperator) -> Result<FockOperator> {
        let (da, db) = (self.space_a.dim(), self.space_b.dim());
        if element.dim() != db {
            return Err(Error::DimensionMismatch { expected: db, found: element.dim() });
        }
        let pi = element.matrix();
        let mut out = DMatrix::<C64>::zeros(da, da);
        for i in 0..da {
            for j in 0..da {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..db {
                    for l in 0..db {
                        let r = self.matrix[(i * db + k, j * db + l)];
                        if r.re != 0.0 || r.im != 0.0 {
                            s += r * pi[(l, k)];
                        }
                    }
                }
                out[(i, j)] = s;
            }
        }
        Ok(FockOperator::from_parts(self.space_a, out))
    }

    /// Reduced state of mode `A`.
    pub fn reduced_a(&self) -> QuantumState {
        let op = self.contract_b(&FockOperator::identity(self.space_b)).expect("dims agree");
        QuantumState::from_op_unchecked(op)
    }

    /// Operator record with the extra `"dims": [D_A, D_B]` field.
    pub fn to_json(&self) -> serde_json::Value {
        let tol = self.space_a.tol().max(self.space_b.tol());
        serde_json::to_value(OperatorRecord::from_matrix(&self.matrix, Some(tol), Some(self.dims())))
            .expect("bipartite record serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let rec: OperatorRecord = serde_json::from_value(value.clone())?;
        let [da, db] = rec.dims.ok_or_else(|| Error::Parse("missing dims".into()))?;
        if da * db != rec.dim {
            return Err(Error::Parse(format!("dims {da}x{db} do not match dim {}", rec.dim)));
        }
        let tol = rec.trace_tol.unwrap_or(crate::fock::DEFAULT_TOL);
        Self::new(FockSpace::with_tol(da, tol)?, FockSpace::with_tol(db, tol)?, rec.to_matrix()?)
    }
}

/// Two-mode squeezed vacuum `√(1−λ²) Σ λⁿ |n,n⟩` on `space ⊗ space`.
pub fn tmsv(lambda: f64, space: FockSpace) -> Result<BipartiteState> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(invalid(format!("squeezing parameter must lie in [0, 1), got {lambda}")));
    }
    let d = space.dim();
    let leak = lambda.powi(2 * d as i32);
    if leak > 1e-9 {
        return Err(Error::TruncationLeakage(leak));
    }
    let mut ket = DVector::<C64>::zeros(d * d);
    let norm = (1.0 - lambda * lambda).sqrt();
    for n in 0..d {
        ket[n * d + n] = C64::new(norm * lambda.powi(n as i32), 0.0);
    }
    BipartiteState::pure(space, space, &ket)
}

/// Heralded state on `A` after outcome `element` on `B`:
/// `ρ_A = Tr_B(ρ_AB (1 ⊗ Π)) / 𝒫`, returned with `𝒫`.
pub fn conditioned_state(
    resource: &BipartiteState,
    element: &FockOperator,
) -> Result<(QuantumState, f64)> {
    let unnorm = resource.contract_b(element)?;
    let p = unnorm.trace_re();
    if !(p > TRACE_FLOOR) {
        return Err(Error::ZeroSuccessProbability(p));
    }
    let state = QuantumState::new(unnorm.scale(1.0 / p))?;
    Ok((state, p))
}
