//! POVM models for the avalanche photodiode, the ideal photon-number
//! resolving detector and inefficient homodyne detection.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{invalid, Error, Result};
use crate::fock::{FockOperator, FockSpace, Povm, QuantumState};
use crate::quadrature::{hermite_polys, GaussHermite};

/// Quadrature-error ceiling for the homodyne top-corner element.
pub const HD_QUADRATURE_TOL: f64 = 1e-9;

const HD_MAX_NODES: usize = crate::quadrature::MAX_ORDER;

/// Avalanche photodiode: efficiency `eta`, mean dark counts `nu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApdParams {
    pub eta: f64,
    pub nu: f64,
}

impl ApdParams {
    pub fn new(eta: f64, nu: f64) -> Result<Self> {
        let p = Self { eta, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid(format!("APD efficiency must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(invalid(format!("dark-count mean must be finite and >= 0, got {}", self.nu)));
        }
        Ok(())
    }

    /// `⟨n|Π_off|n⟩ = e^{−ν}(1−η)ⁿ`.
    pub fn off_diagonal_entry(&self, n: usize) -> f64 {
        (-self.nu).exp() * (1.0 - self.eta).powi(n as i32)
    }

    /// `Pr(on | n) = 1 − e^{−ν}(1−η)ⁿ`.
    pub fn prob_on_fock(&self, n: usize) -> f64 {
        1.0 - self.off_diagonal_entry(n)
    }
}

/// Homodyne measurement of quadrature `x̂_φ` with efficiency `eta`,
/// reading `x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneParams {
    pub eta: f64,
    pub phi: f64,
    pub x_i: f64,
}

impl HomodyneParams {
    pub fn new(eta: f64, phi: f64, x_i: f64) -> Result<Self> {
        let p = Self { eta, phi, x_i };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!(
                "homodyne efficiency must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if !self.phi.is_finite() || !self.x_i.is_finite() {
            return Err(invalid("homodyne phase and reading must be finite"));
        }
        Ok(())
    }
}

/// Discretization of the homodyne outcome axis for tomography.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneBinning {
    pub dx: f64,
    pub xmax: f64,
}

impl Default for HomodyneBinning {
    fn default() -> Self {
        Self { dx: 0.25, xmax: 5.0 }
    }
}

impl HomodyneBinning {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.xmax > 0.0) {
            return Err(invalid("bin width and range must be positive"));
        }
        let n = 2.0 * self.xmax / self.dx;
        if (n - n.round()).abs() > 1e-9 || n.round() > 10_000.0 {
            return Err(invalid(format!(
                "2*xmax/dx = {n} must be a whole number of bins (at most 10000)"
            )));
        }
        Ok(())
    }

    /// Bin edges from `−xmax` to `xmax`; the outer two bins extend to ±∞.
    pub fn edges(&self) -> Vec<f64> {
        let n = (2.0 * self.xmax / self.dx).round() as usize;
        (0..=n).map(|i| -self.xmax + i as f64 * self.dx).collect()
    }
}

/// Detector description as read from JSON configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DetectorConfig {
    Apd {
        eta: f64,
        nu: f64,
    },
    Pnrd,
    Hd {
        eta: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default)]
        bins: HomodyneBinning,
    },
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Apd { eta, nu } => ApdParams::new(*eta, *nu).map(|_| ()),
            Self::Pnrd => Ok(()),
            Self::Hd { eta, phi, bins } => {
                HomodyneParams::new(*eta, *phi, 0.0)?;
                bins.validate()
            }
        }
    }

    pub fn povm(&self, space: FockSpace) -> Result<Povm> {
        match self {
            Self::Apd { eta, nu } => Ok(apd_povm(ApdParams::new(*eta, *nu)?, space)),
            Self::Pnrd => Ok(pnrd_povm(space)),
            Self::Hd { eta, phi, bins } => hd_binned_povm(*eta, *phi, *bins, space),
        }
    }

    /// Phase-insensitive detectors have diagonal POVMs.
    pub fn is_phase_insensitive(&self) -> bool {
        !matches!(self, Self::Hd { .. })
    }
}

/// `{"off", "on"}` with `Π_off = e^{−ν} Σ (1−η)ⁿ |n⟩⟨n|` and
/// `Π_on = 1 − Π_off`.
pub fn apd_povm(params: ApdParams, space: FockSpace) -> Povm {
    let off: Vec<f64> = (0..space.dim()).map(|n| params.off_diagonal_entry(n)).collect();
    let on: Vec<f64> = off.iter().map(|p| 1.0 - p).collect();
    let elements = vec![
        ("off".to_string(), FockOperator::from_diagonal(space, &off).expect("dim")),
        ("on".to_string(), FockOperator::from_diagonal(space, &on).expect("dim")),
    ];
    Povm::from_parts_unchecked(space, elements, 0.0)
}

/// Projectors `|n⟩⟨n|` labeled `"0"…"D−1"`.
pub fn pnrd_povm(space: FockSpace) -> Povm {
    let elements = (0..space.dim())
        .map(|n| {
            let mut diag = vec![0.0; space.dim()];
            diag[n] = 1.0;
            (n.to_string(), FockOperator::from_diagonal(space, &diag).expect("dim"))
        })
        .collect();
    Povm::from_parts_unchecked(space, elements, 0.0)
}

/// Density of the homodyne element at reading `x_I`:
/// `⟨m|Π|n⟩ = e^{i(m−n)φ} ∫ G(x) ψₘ(x) ψₙ(x) dx`.
///
/// Completing the square in the Gaussian kernel turns the integrand into a
/// polynomial of degree `2D−2` against `e^{−y²}`, so the rule is exact once
/// the node count reaches `D`. Starts at `4D` nodes and doubles until the
/// `(D−1, D−1)` entry moves by less than 1e-12.
pub fn hd_povm_element(params: HomodyneParams, space: FockSpace) -> Result<FockOperator> {
    params.validate()?;
    let d = space.dim();
    let eta = params.eta;
    let center = eta.sqrt() * params.x_i;
    let width = (1.0 - eta).sqrt();
    let prefactor = (-params.x_i * params.x_i).exp() / std::f64::consts::PI.sqrt();

    let real_part = |nodes: usize| -> DMatrix<f64> {
        let gh = GaussHermite::cached(nodes);
        let mut acc = DMatrix::<f64>::zeros(d, d);
        for (&y, &w) in gh.nodes.iter().zip(&gh.weights) {
            if w == 0.0 {
                continue;
            }
            let h = hermite_polys(center + width * y, d);
            for m in 0..d {
                let wm = w * h[m];
                for n in m..d {
                    acc[(m, n)] += wm * h[n];
                }
            }
        }
        for m in 0..d {
            for n in 0..m {
                acc[(m, n)] = acc[(n, m)];
            }
        }
        acc * prefactor
    };

    let real = converge_nodes(d, real_part)?;
    Ok(with_phase(space, &real, params.phi))
}

/// Repeats a quadrature with doubled node counts until the top-corner
/// entry stabilizes.
fn converge_nodes(d: usize, eval: impl Fn(usize) -> DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut nodes = (4 * d).min(HD_MAX_NODES);
    let mut prev = eval(nodes);
    loop {
        if nodes >= HD_MAX_NODES {
            return Err(Error::QuadratureUnderresolved(f64::INFINITY));
        }
        let next_nodes = (2 * nodes).min(HD_MAX_NODES);
        let next = eval(next_nodes);
        let change = (next[(d - 1, d - 1)] - prev[(d - 1, d - 1)]).abs();
        if change < 1e-12 {
            return Ok(next);
        }
        if next_nodes == HD_MAX_NODES {
            if change > HD_QUADRATURE_TOL {
                return Err(Error::QuadratureUnderresolved(change));
            }
            return Ok(next);
        }
        nodes = next_nodes;
        prev = next;
    }
}

fn with_phase(space: FockSpace, real: &DMatrix<f64>, phi: f64) -> FockOperator {
    let d = space.dim();
    let m = DMatrix::from_fn(d, d, |i, j| {
        let ph = C64::from_polar(1.0, (i as f64 - j as f64) * phi);
        ph * real[(i, j)]
    });
    FockOperator::new(space, m).expect("dim")
}

/// Binned homodyne POVM: one element per bin of `binning`, plus the two
/// overflow bins `(−∞, −xmax)` and `[xmax, ∞)`. The bin response
/// `P(x) = ½[erf((b−√η x)/√(1−η)) − erf((a−√η x)/√(1−η))]` sums to one at
/// every `x`, so completeness holds at any quadrature order.
pub fn hd_binned_povm(
    eta: f64,
    phi: f64,
    binning: HomodyneBinning,
    space: FockSpace,
) -> Result<Povm> {
    HomodyneParams::new(eta, phi, 0.0)?;
    binning.validate()?;
    let d = space.dim();
    let edges = binning.edges();
    let mut bounds: Vec<(f64, f64)> = Vec::with_capacity(edges.len() + 1);
    bounds.push((f64::NEG_INFINITY, edges[0]));
    for w in edges.windows(2) {
        bounds.push((w[0], w[1]));
    }
    bounds.push((edges[edges.len() - 1], f64::INFINITY));

    let se = eta.sqrt();
    let scale = (1.0 - eta).sqrt();
    let cdf = |edge: f64, x: f64| -> f64 {
        if edge == f64::NEG_INFINITY {
            -1.0
        } else if edge == f64::INFINITY {
            1.0
        } else {
            erf((edge - se * x) / scale)
        }
    };

    let eval_all = |nodes: usize| -> Vec<DMatrix<f64>> {
        let gh = GaussHermite::cached(nodes);
        let mut acc = vec![DMatrix::<f64>::zeros(d, d); bounds.len()];
        for (&x, &w) in gh.nodes.iter().zip(&gh.weights) {
            if w == 0.0 {
                continue;
            }
            let h = hermite_polys(x, d);
            let mut base = DMatrix::<f64>::zeros(d, d);
            for m in 0..d {
                for n in m..d {
                    base[(m, n)] = w * h[m] * h[n];
                }
            }
            for (k, &(a, b)) in bounds.iter().enumerate() {
                let pk = 0.5 * (cdf(b, x) - cdf(a, x));
                if pk == 0.0 {
                    continue;
                }
                for m in 0..d {
                    for n in m..d {
                        acc[k][(m, n)] += pk * base[(m, n)];
                    }
                }
            }
        }
        for a in &mut acc {
            for m in 0..d {
                for n in 0..m {
                    a[(m, n)] = a[(n, m)];
                }
            }
        }
        acc
    };

    // Convergence is tracked on the largest top-corner change across bins.
    let mut nodes = (4 * d).max(128).min(HD_MAX_NODES);
    let mut prev = eval_all(nodes);
    let result = loop {
        let next_nodes = (2 * nodes).min(HD_MAX_NODES);
        let next = eval_all(next_nodes);
        let change = prev
            .iter()
            .zip(&next)
            .map(|(p, q)| (p[(d - 1, d - 1)] - q[(d - 1, d - 1)]).abs())
            .fold(0.0, f64::max);
        if change < 1e-12 {
            break next;
        }
        if next_nodes == HD_MAX_NODES || nodes == HD_MAX_NODES {
            if change > HD_QUADRATURE_TOL {
                return Err(Error::QuadratureUnderresolved(change));
            }
            break next;
        }
        nodes = next_nodes;
        prev = next;
    };

    let fmt_edge = |e: f64| {
        if e.is_infinite() {
            if e > 0.0 { "inf".to_string() } else { "-inf".to_string() }
        } else {
            format!("{e}")
        }
    };
    let elements = bounds
        .iter()
        .zip(result)
        .map(|(&(a, b), m)| {
            let label = format!("[{},{})", fmt_edge(a), fmt_edge(b));
            (label, with_phase(space, &m, phi))
        })
        .collect();
    Ok(Povm::from_parts_unchecked(space, elements, 1e-10))
}

/// Born rule `Tr(ρ Π)`, snapped into `[0, 1]` only when it overshoots by
/// less than the state tolerance.
pub fn predictive_prob(state: &QuantumState, element: &FockOperator) -> f64 {
    let p = trace_product(state.op(), element);
    let tol = state.space().tol();
    if p < 0.0 && p >= -tol {
        0.0
    } else if p > 1.0 && p <= 1.0 + tol {
        1.0
    } else {
        p
    }
}

/// `Re Tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &FockOperator, b: &FockOperator) -> f64 {
    let (ma, mb) = (a.matrix(), b.matrix());
    let d = a.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += (ma[(i, j)] * mb[(j, i)]).re;
        }
    }
    s
}
