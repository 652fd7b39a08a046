//! Phase-space representations.
//!
//! Convention: `x̂ = (â + â†)/√2`, `p̂ = (â − â†)/(i√2)`, vacuum variance 1/2.
//! The Wigner function is normalized so that the identity maps to the
//! constant `1/(2π)` and the vacuum state peaks at `W(0,0) = 1/π`. With this
//! choice `Tr(AB) = 2π ∫ W_A W_B dx dp` and `Tr A = ∫ W_A dx dp`.
//!
//! The Fock-basis kernel of `|m⟩⟨n|` (m ≥ n) is
//!
//! ```text
//! K_mn(x, p) = (−1)ⁿ/π · √(n!/m!) · (√2 (x − ip))^(m−n) · e^{−r²} · L_n^(m−n)(2r²)
//! ```
//!
//! with `r² = x² + p²` and `K_nm = conj(K_mn)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::detectors::{ApdParams, HomodyneParams};
use crate::error::{invalid, Error, Result};
use crate::fock::FockOperator;
use crate::retrodiction::BipartiteState;

/// Remainder bound required of the closed-form "on" series.
pub const SERIES_TOL: f64 = 1e-10;

/// Default excess noise along the conjugate quadrature of the retrodicted
/// homodyne state.
pub const DEFAULT_EXCESS_NOISE: f64 = 1e3;

/// Uniform rectangular sampling of phase space. Points include both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl Default for GridSpec {
    /// `[−6, 6]²` with 201 × 201 points.
    fn default() -> Self {
        Self { x_min: -6.0, x_max: 6.0, p_min: -6.0, p_max: 6.0, nx: 201, np: 201 }
    }
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64, nx: usize, np: usize) -> Result<Self> {
        let g = Self { x_min, x_max, p_min, p_max, nx, np };
        g.validate()?;
        Ok(g)
    }

    /// `[−half, half]²` with `n × n` points.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, -half, half, n, n)
    }

    /// Box spanning `±n_sigma` standard deviations around a center.
    pub fn around(center: (f64, f64), sd: (f64, f64), n_sigma: f64, nx: usize, np: usize) -> Result<Self> {
        Self::new(
            center.0 - n_sigma * sd.0,
            center.0 + n_sigma * sd.0,
            center.1 - n_sigma * sd.1,
            center.1 + n_sigma * sd.1,
            nx,
            np,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.p_min, self.p_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(invalid("grid bounds must be finite with max > min"));
        }
        if self.nx < 2 || self.np < 2 {
            return Err(invalid("grid needs at least two points per axis"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dp()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Evaluate `f(x, p)` at every grid point.
    pub fn evaluate(&self, f: impl Fn(f64, f64) -> f64) -> WignerGrid {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            let x = self.x(i);
            for j in 0..self.np {
                values.push(f(x, self.p(j)));
            }
        }
        WignerGrid { spec: *self, values }
    }
}

/// Real samples on a [`GridSpec`], row-major with `x` outer.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.np + j]
    }

    /// Cell-sum integral `Σ W · Δx Δp`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |self − other|` over matching grids.
    pub fn sup_diff(&self, other: &WignerGrid) -> f64 {
        assert_eq!(self.spec, other.spec, "grids differ");
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// First and second moments of the grid, treating it as a density.
    pub fn moments(&self) -> GridMoments {
        let g = &self.spec;
        let (mut s, mut sx, mut sp) = (0.0, 0.0, 0.0);
        for i in 0..g.nx {
            for j in 0..g.np {
                let w = self.at(i, j);
                s += w;
                sx += w * g.x(i);
                sp += w * g.p(j);
            }
        }
        let (mx, mp) = (sx / s, sp / s);
        let (mut vx, mut vp, mut cxp) = (0.0, 0.0, 0.0);
        for i in 0..g.nx {
            let dx = g.x(i) - mx;
            for j in 0..g.np {
                let w = self.at(i, j);
                let dp = g.p(j) - mp;
                vx += w * dx * dx;
                vp += w * dp * dp;
                cxp += w * dx * dp;
            }
        }
        GridMoments {
            mass: s * g.cell_area(),
            mean_x: mx,
            mean_p: mp,
            var_x: vx / s,
            var_p: vp / s,
            cov_xp: cxp / s,
        }
    }

    /// CSV with header `x,p,w`, one row per point, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,p,w")?;
        for i in 0..self.spec.nx {
            let x = self.spec.x(i);
            for j in 0..self.spec.np {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", x, self.spec.p(j), self.at(i, j))?;
            }
        }
        Ok(())
    }

    /// Inverse of [`Self::write_csv`]; the grid shape is recovered from the
    /// distinct coordinates.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))??;
        if header.trim() != "x,p,w" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',').map(|t| t.trim().parse::<f64>());
            let mut row = [0.0; 3];
            for slot in &mut row {
                *slot = it
                    .next()
                    .ok_or_else(|| Error::Parse(format!("short row {line:?}")))?
                    .map_err(|e| Error::Parse(e.to_string()))?;
            }
            rows.push(row);
        }
        if rows.len() < 4 {
            return Err(Error::Parse("grid CSV needs at least 2x2 points".into()));
        }
        let x0 = rows[0][0];
        let np = rows.iter().take_while(|r| r[0] == x0).count();
        if np < 2 || rows.len() % np != 0 {
            return Err(Error::Parse("rows do not form a rectangular grid".into()));
        }
        let nx = rows.len() / np;
        let spec = GridSpec {
            x_min: x0,
            x_max: rows[rows.len() - 1][0],
            p_min: rows[0][1],
            p_max: rows[np - 1][1],
            nx,
            np,
        };
        spec.validate()?;
        Ok(Self { spec, values: rows.iter().map(|r| r[2]).collect() })
    }

    /// Sidecar metadata: convention anchors and grid bounds.
    pub fn metadata(&self, extra: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "convention": {
                "quadrature": "x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2))",
                "vacuum_variance": 0.5,
                "identity_value": 1.0 / (2.0 * PI),
                "vacuum_origin_value": 1.0 / PI,
            },
            "grid": self.spec,
            "integral": self.integral(),
            "parameters": extra,
        })
    }
}

/// Moments of a grid treated as a (quasi-)density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridMoments {
    pub mass: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

/// Generalized Laguerre `L_n^(k)(u)` for `n < count` by the three-term
/// recurrence.
pub fn laguerre_column(k: usize, u: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let kf = k as f64;
    let mut prev = 1.0;
    out.push(prev);
    if count == 1 {
        return out;
    }
    let mut cur = 1.0 + kf - u;
    out.push(cur);
    for n in 1..count - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - u) * cur - (nf + kf) * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// All kernels `K_mn(x, p)` for `m, n < dim`.
pub fn fock_kernels(x: f64, p: f64, dim: usize) -> DMatrix<C64> {
    let r2 = x * x + p * p;
    let u = 2.0 * r2;
    let z = C64::new(x, -p) * std::f64::consts::SQRT_2;
    let lnz = z.norm().ln();
    let argz = z.arg();
    let gauss = -r2;
    let mut lf = vec![0.0; dim + 1];
    for j in 1..=dim {
        lf[j] = lf[j - 1] + (j as f64).ln();
    }
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..dim {
        let lag = laguerre_column(k, u, dim - k);
        for n in 0..dim - k {
            let m = n + k;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let val = if k == 0 {
                sign / PI * gauss.exp() * lag[n]
            } else if z.norm() == 0.0 {
                0.0
            } else {
                let logmag = 0.5 * (lf[n] - lf[m]) + k as f64 * lnz + gauss;
                sign / PI * logmag.exp() * lag[n]
            };
            let phase = C64::from_polar(1.0, k as f64 * argz);
            let kmn = phase * val;
            out[(m, n)] = kmn;
            out[(n, m)] = kmn.conj();
        }
    }
    out
}

/// `W(x, p) = Σ_mn A_mn K_mn(x, p)` at a single point.
pub fn wigner_point(op: &FockOperator, x: f64, p: f64) -> f64 {
    let k = fock_kernels(x, p, op.dim());
    let a = op.matrix();
    let mut s = 0.0;
    for m in 0..op.dim() {
        for n in 0..op.dim() {
            s += (a[(m, n)] * k[(m, n)]).re;
        }
    }
    s
}

/// Wigner function of an operator on a grid.
pub fn wigner_transform(op: &FockOperator, grid: &GridSpec) -> WignerGrid {
    let d = op.dim();
    if op.max_off_diagonal() == 0.0 {
        // Diagonal operators only need the k = 0 column.
        let diag = op.diagonal_re();
        return grid.evaluate(|x, p| {
            let r2 = x * x + p * p;
            let lag = laguerre_column(0, 2.0 * r2, d);
            let s: f64 = diag
                .iter()
                .zip(&lag)
                .enumerate()
                .map(|(n, (a, l))| if n % 2 == 0 { a * l } else { -a * l })
                .sum();
            s * (-r2).exp() / PI
        });
    }
    grid.evaluate(|x, p| wigner_point(op, x, p))
}

/// Wigner function of `1 − A` on the untruncated space: `1/(2π) − W_A`.
pub fn wigner_transform_complement(op: &FockOperator, grid: &GridSpec) -> WignerGrid {
    let mut w = wigner_transform(op, grid);
    for v in &mut w.values {
        *v = 1.0 / (2.0 * PI) - *v;
    }
    w
}

/// `W(0,0) = (1/π) Σ (−1)ⁿ A_nn`.
pub fn parity_at_origin(op: &FockOperator) -> f64 {
    op.diagonal_re()
        .iter()
        .enumerate()
        .map(|(n, a)| if n % 2 == 0 { *a } else { -*a })
        .sum::<f64>()
        / PI
}

/// Upper bound on the tail of the "on" series after `terms` terms.
pub fn on_series_remainder(params: ApdParams, terms: usize) -> f64 {
    let q = (1.0 - params.eta).abs();
    if q >= 1.0 {
        return f64::INFINITY;
    }
    (-params.nu).exp() * q.powi(terms as i32) / (PI * (1.0 - q))
}

/// Closed-form Wigner function of `Π_on`:
/// `1/(2π) − (e^{−ν}/π) Σ_{m<terms} (η−1)^m e^{−r²} L_m(2r²)`.
///
/// Uses `|e^{−u/2} L_m(u)| ≤ 1` for the remainder bound.
pub fn wigner_on_closed(x: f64, p: f64, params: ApdParams, terms: usize) -> Result<f64> {
    params.validate()?;
    let bound = on_series_remainder(params, terms);
    if bound > SERIES_TOL {
        return Err(Error::SeriesNotConverged(bound));
    }
    let r2 = x * x + p * p;
    let lag = laguerre_column(0, 2.0 * r2, terms);
    let g = params.eta - 1.0;
    let mut s = 0.0;
    let mut gm = 1.0;
    for l in lag {
        s += gm * l;
        gm *= g;
    }
    Ok(1.0 / (2.0 * PI) - (-params.nu).exp() / PI * (-r2).exp() * s)
}

/// Smallest term count meeting a remainder bound of 1e-13 (capped).
pub fn on_series_terms(params: ApdParams) -> Result<usize> {
    let q = 1.0 - params.eta;
    if q <= 0.0 {
        return Ok(1);
    }
    if q >= 1.0 {
        return Err(Error::SeriesNotConverged(f64::INFINITY));
    }
    let target = 1e-13 * PI * (1.0 - q) / (-params.nu).exp();
    let t = (target.ln() / q.ln()).ceil().max(1.0) as usize;
    if t > 1_000_000 {
        return Err(Error::SeriesNotConverged(on_series_remainder(params, 1_000_000)));
    }
    Ok(t)
}

/// [`wigner_on_closed`] with an automatic term count.
pub fn wigner_on(x: f64, p: f64, params: ApdParams) -> Result<f64> {
    wigner_on_closed(x, p, params, on_series_terms(params)?)
}

/// `𝒩_on(η, ν) = W_on(0, 0) = 1/(2π) − e^{−ν}/(π(2−η))`.
pub fn negativity_on(params: ApdParams) -> f64 {
    1.0 / (2.0 * PI) - (-params.nu).exp() / (PI * (2.0 - params.eta))
}

/// Dark-count level `ν*(η) = −ln(1 − η/2)` at which `𝒩_on` changes sign.
pub fn negativity_threshold(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    Ok(-(-0.5 * eta).ln_1p())
}

/// Rotate lab coordinates into the `(x_φ, p_φ)` frame.
#[inline]
fn rotate(x: f64, p: f64, phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    (x * c + p * s, -x * s + p * c)
}

/// `σ_x²(η) = (1−η)/(2η)`.
pub fn hd_variance(eta: f64) -> f64 {
    (1.0 - eta) / (2.0 * eta)
}

/// Wigner function of the homodyne POVM element: a ridge along `p_φ`
/// centered at `x_φ = x_I/√η` with variance `σ_x²(η)`.
pub fn wigner_hd(params: HomodyneParams, grid: &GridSpec) -> Result<WignerGrid> {
    params.validate()?;
    let var = hd_variance(params.eta);
    let center = params.x_i / params.eta.sqrt();
    let amp = 1.0 / (8.0 * PI.powi(3) * params.eta * var).sqrt();
    Ok(grid.evaluate(|x, p| {
        let (xf, _) = rotate(x, p, params.phi);
        amp * (-(xf - center).powi(2) / (2.0 * var)).exp()
    }))
}

/// Parameters of the regularized retrodicted homodyne state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HdRetroParams {
    pub hd: HomodyneParams,
    pub excess_noise: f64,
}

impl HdRetroParams {
    pub fn new(hd: HomodyneParams, excess_noise: f64) -> Result<Self> {
        let p = Self { hd, excess_noise };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.hd.validate()?;
        if !(self.excess_noise >= 10.0) || !self.excess_noise.is_finite() {
            return Err(invalid(format!(
                "excess noise must be finite and >= 10, got {}",
                self.excess_noise
            )));
        }
        Ok(())
    }

    /// `s(η) = (1−η)/η`.
    pub fn squeezing(&self) -> f64 {
        hd_squeezing(self.hd.eta)
    }

    /// Center `(x_I/√η, 0)` and standard deviations in the `φ` frame.
    pub fn center_and_sd(&self) -> ((f64, f64), (f64, f64)) {
        let s = self.squeezing();
        (
            (self.hd.x_i / self.hd.eta.sqrt(), 0.0),
            ((s / 2.0).sqrt(), ((1.0 / s + self.excess_noise) / 2.0).sqrt()),
        )
    }
}

/// `s(η) = (1−η)/η`.
pub fn hd_squeezing(eta: f64) -> f64 {
    (1.0 - eta) / eta
}

/// `10 log₁₀ s(η)`.
pub fn hd_squeezing_db(eta: f64) -> f64 {
    10.0 * hd_squeezing(eta).log10()
}

/// Normalized Gaussian of the pre-measurement state retrodicted from a
/// homodyne reading: x-variance `s/2`, p-variance `(1/s + e_n)/2`.
pub fn hd_retro_wigner(params: HdRetroParams, grid: &GridSpec) -> Result<WignerGrid> {
    params.validate()?;
    let s = params.squeezing();
    let en = params.excess_noise;
    let center = params.hd.x_i / params.hd.eta.sqrt();
    let amp = 1.0 / (PI * (1.0 + en * s).sqrt());
    let phi = params.hd.phi;
    Ok(grid.evaluate(|x, p| {
        let (xf, pf) = rotate(x, p, phi);
        amp * (-(xf - center).powi(2) / s - pf * pf / (1.0 / s + en)).exp()
    }))
}

/// Heralded state via the phase-space overlap
/// `W_cond(x,p) ∝ ∫ W_AB(x,p; x',p') W_retr(x',p') dx'dp'`.
///
/// The B-mode integral is done numerically on `b_grid` (cell sums) against
/// the Fock kernels of mode B, which leaves an operator on A whose Wigner
/// function is `W_cond`. Returned normalized to unit trace; not validated
/// as a state since grid error can leave tiny negative eigenvalues.
pub fn herald_by_phase_space_overlap(
    resource: &BipartiteState,
    retro_wigner: impl Fn(f64, f64) -> f64,
    b_grid: &GridSpec,
) -> Result<FockOperator> {
    let [da, db] = resource.dims();
    let mut overlap = DMatrix::<C64>::zeros(db, db);
    for i in 0..b_grid.nx {
        let x = b_grid.x(i);
        for j in 0..b_grid.np {
            let p = b_grid.p(j);
            let w = retro_wigner(x, p);
            if w == 0.0 {
                continue;
            }
            overlap += fock_kernels(x, p, db).scale(w);
        }
    }
    overlap = overlap.scale(b_grid.cell_area());
    // overlap[k,l] = ∫ K_kl W_retr ∝ ⟨l|Π|k⟩.
    let mut out = DMatrix::<C64>::zeros(da, da);
    for a in 0..da {
        for b in 0..da {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..db {
                for l in 0..db {
                    s += resource.entry(a, k, b, l) * overlap[(k, l)];
                }
            }
            out[(a, b)] = s;
        }
    }
    let tr = out.trace().re;
    if !(tr.abs() > 0.0) {
        return Err(Error::ZeroSuccessProbability(tr));
    }
    FockOperator::new(resource.space_a(), out.scale(1.0 / tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::apd_povm;
    use crate::fock::{coherent_state, FockSpace, QuantumState};

    fn sp(d: usize) -> FockSpace {
        FockSpace::new(d).unwrap()
    }

    #[test]
    fn laguerre_known_values() {
        // L_2^(1)(u) = (u² − 6u + 6)/2, L_3(u) = (−u³ + 9u² − 18u + 6)/6.
        let u = 1.7;
        assert!((laguerre_column(1, u, 3)[2] - (u * u - 6.0 * u + 6.0) / 2.0).abs() < 1e-14);
        assert!((laguerre_column(0, u, 4)[3] - (-u * u * u + 9.0 * u * u - 18.0 * u + 6.0) / 6.0).abs() < 1e-14);
        assert!(laguerre_column(0, 0.0, 30).iter().all(|l| (l - 1.0).abs() < 1e-12));
    }

    #[test]
    fn vacuum_anchor() {
        let w = wigner_point(QuantumState::vacuum(sp(4)).op(), 0.0, 0.0);
        assert!((w - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn single_photon_origin() {
        let w = wigner_point(QuantumState::fock(sp(4), 1).unwrap().op(), 0.0, 0.0);
        assert!((w + 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn coherent_state_is_displaced_vacuum() {
        // |β⟩ has W = e^{−(x−x₀)²−(p−p₀)²}/π with (x₀,p₀) = √2 (Re β, Im β).
        let beta = C64::new(0.6, -0.4);
        let rho = coherent_state(beta, sp(30));
        let (x0, p0) = (2f64.sqrt() * beta.re, 2f64.sqrt() * beta.im);
        for &(x, p) in &[(0.0, 0.0), (0.8, -0.5), (-1.0, 1.2), (x0, p0)] {
            let expect = (-(x - x0).powi(2) - (p - p0).powi(2)).exp() / PI;
            let got = wigner_point(rho.op(), x, p);
            assert!((got - expect).abs() < 1e-12, "({x},{p}): {got} vs {expect}");
        }
    }

    #[test]
    fn output_is_real_for_hermitian_input() {
        let rho = coherent_state(C64::new(0.3, 0.9), sp(12));
        let k = fock_kernels(0.4, -0.7, 12);
        let mut s = C64::new(0.0, 0.0);
        for m in 0..12 {
            for n in 0..12 {
                s += rho.matrix()[(m, n)] * k[(m, n)];
            }
        }
        assert!(s.im.abs() < 1e-10);
    }

    #[test]
    fn parity_identity_holds() {
        let s = sp(10);
        let rho = QuantumState::thermal(s, 0.8).unwrap();
        assert!((wigner_point(rho.op(), 0.0, 0.0) - parity_at_origin(rho.op())).abs() < 1e-12);
    }

    #[test]
    fn state_integrates_to_one() {
        let rho = coherent_state(C64::new(0.5, 0.5), sp(16));
        let w = wigner_transform(rho.op(), &GridSpec::default());
        assert!((w.integral() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn closed_series_anchors() {
        let ideal = ApdParams::new(1.0, 0.0).unwrap();
        assert!((wigner_on_closed(0.0, 0.0, ideal, 1).unwrap() + 1.0 / (2.0 * PI)).abs() < 1e-15);
        let half = ApdParams::new(0.5, 0.0).unwrap();
        let w = wigner_on(0.0, 0.0, half).unwrap();
        let expect = 1.0 / (2.0 * PI) - 1.0 / (1.5 * PI);
        assert!((w - expect).abs() < 1e-12);
        assert!((expect + 0.05305164769729845).abs() < 1e-12);
    }

    #[test]
    fn closed_series_rejects_short_expansion() {
        let p = ApdParams::new(0.3, 0.0).unwrap();
        assert!(matches!(wigner_on_closed(0.0, 0.0, p, 5), Err(Error::SeriesNotConverged(_))));
        assert!(matches!(on_series_terms(ApdParams::new(0.0, 0.2).unwrap()), Err(Error::SeriesNotConverged(_))));
    }

    #[test]
    fn closed_series_matches_matrix_kernel() {
        let p = ApdParams::new(0.6, 0.1).unwrap();
        let povm = apd_povm(p, sp(48));
        let grid = GridSpec::square(3.0, 61).unwrap();
        let matrix = wigner_transform_complement(povm.element("off").unwrap(), &grid);
        let closed = grid.evaluate(|x, q| wigner_on(x, q, p).unwrap());
        assert!(matrix.sup_diff(&closed) <= 1e-8);
    }

    #[test]
    fn negativity_threshold_values() {
        assert!((negativity_threshold(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(negativity_threshold(1e-12).unwrap() < 1e-11);
        assert!(negativity_threshold(0.0).is_err());
        for k in 2..=10 {
            let eta = k as f64 / 10.0;
            let nu = negativity_threshold(eta).unwrap();
            assert!(negativity_on(ApdParams::new(eta, nu).unwrap()).abs() < 1e-12);
        }
        assert!((negativity_on(ApdParams::new(1.0, 0.0).unwrap()) + 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((negativity_on(ApdParams::new(0.7, 800.0).unwrap()) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn hd_ridge_shape() {
        let hd = HomodyneParams::new(0.75, 0.0, 1.0).unwrap();
        assert!((hd_variance(0.75) - 1.0 / 6.0).abs() < 1e-15);
        let grid = GridSpec::default();
        let w = wigner_hd(hd, &grid).unwrap();
        for i in 0..grid.nx {
            let row = &w.values[i * grid.np..(i + 1) * grid.np];
            assert!(row.iter().all(|v| (v - row[0]).abs() <= 1e-15));
        }
        // The ridge of the POVM Wigner is Π(x)/(2π) evaluated along x̂.
        let x = 1.3;
        let povm_density = (-(1.0 - 0.75f64.sqrt() * x).powi(2) / 0.25).exp() / (PI * 0.25).sqrt();
        let got = wigner_hd(hd, &GridSpec::new(x, x + 1.0, 0.0, 1.0, 2, 2).unwrap()).unwrap().at(0, 0);
        assert!((got - povm_density / (2.0 * PI)).abs() < 1e-15);
        let m = w.moments();
        assert!((m.mean_x - 1.0 / 0.75f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn hd_retro_normalized_and_squeezed() {
        for (eta, db) in [(0.98, -16.90196080028514), (0.9, -9.542425094393248)] {
            assert!((hd_squeezing_db(eta) - db).abs() < 1e-10);
            let rp = HdRetroParams::new(HomodyneParams::new(eta, 0.0, 1.0).unwrap(), DEFAULT_EXCESS_NOISE)
                .unwrap();
            let (c, sd) = rp.center_and_sd();
            let grid = GridSpec::around(c, sd, 6.0, 201, 201).unwrap();
            let w = hd_retro_wigner(rp, &grid).unwrap();
            assert!((w.integral() - 1.0).abs() < 1e-3);
        }
        assert!(HdRetroParams::new(HomodyneParams::new(0.9, 0.0, 1.0).unwrap(), 5.0).is_err());
    }

    #[test]
    fn hudson_pure_gaussians_nonnegative() {
        use crate::fock::squeezed_vacuum;
        let grid = GridSpec::square(4.0, 81).unwrap();
        let states = [
            QuantumState::vacuum(sp(30)),
            coherent_state(C64::new(0.8, -0.5), sp(30)),
            // Truncated squeezed states converge slowly away from the origin.
            squeezed_vacuum(0.5, sp(90)),
        ];
        for s in &states {
            assert!(wigner_transform(s.op(), &grid).min() >= -1e-12);
        }
        assert!(wigner_transform(QuantumState::fock(sp(30), 1).unwrap().op(), &grid).min() < -0.3);
    }

    #[test]
    fn csv_round_trip() {
        let grid = GridSpec::new(-1.0, 2.0, -0.5, 0.5, 7, 5).unwrap();
        let w = wigner_transform(QuantumState::fock(sp(4), 1).unwrap().op(), &grid);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = WignerGrid::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.values, w.values);
        assert_eq!(back.spec.nx, 7);
        assert_eq!(back.spec.np, 5);
        assert!((back.spec.x_max - 2.0).abs() < 1e-15);
    }
}
