//! Gauss–Hermite rules and harmonic-oscillator eigenfunctions.
//!
//! Wavefunctions use `x̂ = (â + â†)/√2`, so the vacuum density is
//! `e^{−x²}/√π` (variance 1/2).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Largest order before the unscaled recurrence overflows.
pub const MAX_ORDER: usize = 512;

/// Nodes and weights for `∫ f(x) e^{−x²} dx ≈ Σ wᵢ f(xᵢ)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch eigenvalues as starting points, then Newton on the
    /// orthonormal Hermite recurrence for the roots and `2/p'²` for the
    /// weights (relative accuracy is kept for the tiny outer weights).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        assert!(n <= MAX_ORDER, "Gauss-Hermite order {n} overflows the recurrence");
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        guesses.sort_by(f64::total_cmp);

        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for mut z in guesses {
            for _ in 0..50 {
                let (p1, p2) = orthonormal_pair(n, z, pim4);
                let step = p1 / ((2.0 * nf).sqrt() * p2);
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, p2) = orthonormal_pair(n, z, pim4);
            let pp = (2.0 * nf).sqrt() * p2;
            nodes.push(z);
            weights.push(2.0 / (pp * pp));
        }
        // Enforce exact symmetry.
        for i in 0..n / 2 {
            let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[n - 1 - i]);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared rule of order `n`, computed once per process.
    pub fn cached(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().expect("cache lock").get(&n) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(Self::new(n));
        cache.lock().expect("cache lock").insert(n, Arc::clone(&rule));
        rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `(p_n(z), p_{n−1}(z))` for the orthonormal Hermite polynomials scaled
/// so that `p_k(x) e^{−x²/2}` are the oscillator eigenfunctions.
fn orthonormal_pair(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// `hₙ(x) = ψₙ(x) e^{x²/2}` for `n < count`.
pub fn hermite_polys(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for n in 0..count {
        out.push(cur);
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

/// Oscillator eigenfunctions `ψₙ(x)` for `n < count`, Gaussian folded into
/// the seed so large `|x|` does not overflow.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for n in 0..count {
        out.push(cur);
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_moments() {
        // ∫ x^{2k} e^{−x²} = Γ(k + 1/2).
        let gh = GaussHermite::new(20);
        let gammas = [PI.sqrt(), 0.5 * PI.sqrt(), 0.75 * PI.sqrt(), 1.875 * PI.sqrt()];
        for (k, g) in gammas.iter().enumerate() {
            let s: f64 = gh
                .nodes
                .iter()
                .zip(&gh.weights)
                .map(|(x, w)| w * x.powi(2 * k as i32))
                .sum();
            assert!((s - g).abs() < 1e-13, "k={k}: {s} vs {g}");
        }
    }

    #[test]
    fn nodes_sorted_and_symmetric() {
        for n in [1, 2, 7, 64, 256, 512] {
            let gh = GaussHermite::new(n);
            assert!(gh.nodes.windows(2).all(|w| w[0] < w[1]));
            for i in 0..n {
                assert!((gh.nodes[i] + gh.nodes[n - 1 - i]).abs() < 1e-12);
            }
            let total: f64 = gh.weights.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-12, "n={n}: {total}");
        }
    }

    #[test]
    fn hermite_functions_orthonormal() {
        let gh = GaussHermite::new(40);
        let d = 12;
        let hs: Vec<Vec<f64>> = gh.nodes.iter().map(|&x| hermite_polys(x, d)).collect();
        for m in 0..d {
            for n in 0..d {
                let s: f64 = hs.iter().zip(&gh.weights).map(|(h, w)| w * h[m] * h[n]).sum();
                let e = if m == n { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "({m},{n}) = {s}");
            }
        }
    }

    #[test]
    fn functions_match_polys() {
        let x = 1.3;
        let f = hermite_functions(x, 10);
        let p = hermite_polys(x, 10);
        for n in 0..10 {
            assert!((f[n] - p[n] * (-0.5 * x * x).exp()).abs() < 1e-14);
        }
    }
}
