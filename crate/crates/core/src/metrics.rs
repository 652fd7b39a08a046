//! Measurement-quality metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detectors::ApdParams;
use crate::error::Result;
use crate::fock::{ladder, purity, von_neumann_entropy, FockOperator, QuantumState};
use crate::retrodiction::premeasurement_state;
use crate::wigner::parity_at_origin;

/// Projectivity threshold above which an element counts as projective.
pub const PROJECTIVE_TOL: f64 = 1e-6;

/// Purity of the pre-measurement state of `element`.
pub fn projectivity(element: &FockOperator) -> Result<f64> {
    Ok(purity(&premeasurement_state(element)?))
}

/// `Tr Π` for projective elements, `None` otherwise.
pub fn effective_efficiency(element: &FockOperator) -> Option<f64> {
    match projectivity(element) {
        Ok(p) if p >= 1.0 - PROJECTIVE_TOL => Some(element.trace_re()),
        _ => None,
    }
}

/// `F_off(n, η) = η(1−η)ⁿ`, the overlap of the untruncated "off"
/// pre-measurement state with `|n⟩`.
pub fn fidelity_off(n: usize, eta: f64) -> f64 {
    eta * (1.0 - eta).powi(n as i32)
}

/// Factor by which the truncated "off" state overweights each level:
/// `1/(1 − (1−η)^D)`.
pub fn off_truncation_factor(eta: f64, dim: usize) -> f64 {
    1.0 / (1.0 - (1.0 - eta).powi(dim as i32))
}

/// `Pr(on|n) = 1 − e^{−ν}(1−η)ⁿ`.
///
/// The "on" fidelity itself carries a `1/D` prefactor that vanishes with the
/// truncation; this is the dimension-free profile it multiplies.
pub fn fidelity_on_profile(n: usize, params: ApdParams) -> f64 {
    params.prob_on_fock(n)
}

/// First moments and symmetrized covariance of `(x̂, p̂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianMoments {
    pub fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// `ν̄ = √det(cov)`, equal to 1/2 for pure Gaussian states.
    pub fn symplectic_eigenvalue(&self) -> f64 {
        self.det().max(0.0).sqrt()
    }

    /// Entropy of the Gaussian state with these moments.
    pub fn gaussian_entropy(&self) -> f64 {
        gaussian_entropy(self.symplectic_eigenvalue())
    }
}

/// `g(ν̄) = (ν̄+½)ln(ν̄+½) − (ν̄−½)ln(ν̄−½)`.
pub fn gaussian_entropy(nu: f64) -> f64 {
    let a = nu + 0.5;
    let b = nu - 0.5;
    let xlogx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
    xlogx(a) - xlogx(b)
}

/// Moments from `⟨â⟩`, `⟨â²⟩` and `⟨n̂⟩`.
///
/// Meaningful only while `⟨n̂⟩` stays well below the truncation.
pub fn gaussian_moments(state: &QuantumState) -> GaussianMoments {
    let a = ladder(state.space());
    let rho = state.matrix();
    let am = a.matrix();
    let ea = (rho * am).trace();
    let ea2 = (rho * am * am).trace();
    let en = state.mean_photon_number();
    let s2 = std::f64::consts::SQRT_2;
    let mx = s2 * ea.re;
    let mp = s2 * ea.im;
    let xx = ea2.re + en + 0.5;
    let pp = -ea2.re + en + 0.5;
    let xp = ea2.im;
    let cxx = xx - mx * mx;
    let cpp = pp - mp * mp;
    let cxp = xp - mx * mp;
    GaussianMoments { mean: [mx, mp], cov: [[cxx, cxp], [cxp, cpp]] }
}

/// `δ = S(ρ_G) − S(ρ)`, with `ρ_G` the Gaussian state sharing the moments.
pub fn non_gaussianity(state: &QuantumState) -> f64 {
    gaussian_moments(state).gaussian_entropy() - von_neumann_entropy(state)
}

/// Summary of one POVM element through its pre-measurement state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub projectivity: f64,
    pub effective_efficiency: Option<f64>,
    /// `⟨n|ρ_retr|n⟩` keyed by photon number.
    pub fidelities: BTreeMap<String, f64>,
    pub non_gaussianity: f64,
    /// `W(0,0)` of the pre-measurement state.
    pub negativity_origin: f64,
}

impl MetricReport {
    /// Metrics of `element`, with Fock fidelities for `n < fock_levels`.
    pub fn for_element(element: &FockOperator, fock_levels: usize) -> Result<Self> {
        let retro = premeasurement_state(element)?;
        let diag = retro.op().diagonal_re();
        let fidelities = diag
            .iter()
            .take(fock_levels)
            .enumerate()
            .map(|(n, v)| (n.to_string(), *v))
            .collect();
        let proj = purity(&retro);
        Ok(Self {
            projectivity: proj,
            effective_efficiency: (proj >= 1.0 - PROJECTIVE_TOL).then(|| element.trace_re()),
            fidelities,
            non_gaussianity: non_gaussianity(&retro),
            negativity_origin: parity_at_origin(retro.op()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{apd_povm, pnrd_povm};
    use crate::fock::{coherent_state, fidelity_pure, phase_rotate, squeezed_vacuum, FockSpace};
    use nalgebra::DVector;
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;

    fn sp(d: usize) -> FockSpace {
        FockSpace::new(d).unwrap()
    }

    /// Smallest D with `(1−η)^D < 1e−10`, plus a margin.
    fn dim_for(eta: f64) -> usize {
        ((1e-12f64).ln() / (1.0 - eta).ln()).ceil() as usize
    }

    #[test]
    fn projectivity_examples() {
        let pnrd = pnrd_povm(sp(6));
        assert!((projectivity(pnrd.element("3").unwrap()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(effective_efficiency(pnrd.element("3").unwrap()), Some(1.0));
        let ideal = apd_povm(ApdParams::new(1.0, 0.0).unwrap(), sp(6));
        assert!((projectivity(ideal.element("off").unwrap()).unwrap() - 1.0).abs() < 1e-15);
        let half = apd_povm(ApdParams::new(0.5, 0.0).unwrap(), sp(dim_for(0.5)));
        let off = half.element("off").unwrap();
        assert!((projectivity(off).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(effective_efficiency(off), None);
        assert!(projectivity(&FockOperator::zeros(sp(3))).is_err());
    }

    #[test]
    fn projectivity_closed_form() {
        for k in 2..=9 {
            let eta = k as f64 / 10.0;
            let povm = apd_povm(ApdParams::new(eta, 0.3).unwrap(), sp(dim_for(eta)));
            let p = projectivity(povm.element("off").unwrap()).unwrap();
            assert!((p - eta / (2.0 - eta)).abs() <= 1e-8, "eta={eta}");
        }
    }

    #[test]
    fn scaled_pure_element_efficiency() {
        let ket = DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]);
        let el = FockOperator::outer(sp(3), &ket).unwrap().scale(0.7);
        assert!((effective_efficiency(&el).unwrap() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        assert!((fidelity_off(2, 0.5) - 0.125).abs() < 1e-15);
        for eta in [0.1, 0.5, 0.9] {
            assert_eq!(fidelity_off(0, eta), eta);
            assert!((1..10).all(|n| fidelity_off(n, eta) < eta));
        }
        let r = fidelity_off(7, 1e-9) / fidelity_off(0, 1e-9);
        assert!((r - 1.0).abs() < 1e-7);
        let p = ApdParams::new(0.5, 0.0).unwrap();
        assert!((fidelity_on_profile(2, p) - 0.75).abs() < 1e-15);
        let flat = ApdParams::new(0.0, 0.4).unwrap();
        for n in 0..10 {
            assert!((fidelity_on_profile(n, flat) - (1.0 - (-0.4f64).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn off_fidelity_sum_and_truncation() {
        for eta in [0.3, 0.6] {
            let d = 25;
            let s: f64 = (0..d).map(|n| fidelity_off(n, eta)).sum();
            assert!((1.0 - s - (1.0 - eta).powi(d as i32)).abs() < 1e-12);
            let povm = apd_povm(ApdParams::new(eta, 0.1).unwrap(), sp(d));
            let retro = premeasurement_state(povm.element("off").unwrap()).unwrap();
            for n in 0..d {
                let f = fidelity_pure(&retro, &sp(d).basis(n)).unwrap();
                assert!((f / off_truncation_factor(eta, d) - fidelity_off(n, eta)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moments_examples() {
        let v = gaussian_moments(&QuantumState::vacuum(sp(10)));
        assert_eq!(v.mean, [0.0, 0.0]);
        assert!((v.cov[0][0] - 0.5).abs() < 1e-15 && (v.cov[1][1] - 0.5).abs() < 1e-15);
        let t = gaussian_moments(&QuantumState::thermal(sp(120), 0.7).unwrap());
        assert!((t.cov[0][0] - 1.2).abs() < 1e-9 && (t.cov[1][1] - 1.2).abs() < 1e-9);
        assert!(t.cov[0][1].abs() < 1e-12);
        let c = gaussian_moments(&coherent_state(C64::new(1.3, 0.0), sp(40)));
        assert!((c.mean[0] - 2f64.sqrt() * 1.3).abs() < 1e-10 && c.mean[1].abs() < 1e-12);
        assert!((c.cov[0][0] - 0.5).abs() < 1e-9 && (c.cov[1][1] - 0.5).abs() < 1e-9);
        let s = gaussian_moments(&squeezed_vacuum(0.5, sp(60)));
        assert!((s.cov[0][0] - 0.5 * (-1.0f64).exp()).abs() < 1e-9);
        assert!((s.det() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn non_gaussianity_examples() {
        assert!(non_gaussianity(&QuantumState::vacuum(sp(8))).abs() < 1e-9);
        assert!(non_gaussianity(&coherent_state(C64::new(0.7, -0.4), sp(40))).abs() < 1e-9);
        assert!(non_gaussianity(&QuantumState::thermal(sp(150), 0.9).unwrap()).abs() < 1e-9);
        assert!(non_gaussianity(&squeezed_vacuum(0.4, sp(60))).abs() < 1e-9);
        let one = non_gaussianity(&QuantumState::fock(sp(6), 1).unwrap());
        assert!((one - 2.0 * 2f64.ln()).abs() < 1e-6);
        for eta in [0.3, 0.6, 0.9] {
            let povm = apd_povm(ApdParams::new(eta, 0.0).unwrap(), sp(dim_for(eta) + 40));
            let retro = premeasurement_state(povm.element("off").unwrap()).unwrap();
            assert!(non_gaussianity(&retro).abs() < 1e-8, "eta={eta}");
        }
    }

    #[test]
    fn report_json_shape() {
        let povm = apd_povm(ApdParams::new(0.6, 0.05).unwrap(), sp(40));
        let r = MetricReport::for_element(povm.element("off").unwrap(), 3).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert!(v["effective_efficiency"].is_null());
        assert_eq!(v["fidelities"].as_object().unwrap().len(), 3);
        assert!((r.projectivity - 0.6 / 1.4).abs() < 1e-10);
        let on = MetricReport::for_element(povm.element("on").unwrap(), 3).unwrap();
        assert!(on.negativity_origin < 0.0);
    }

    fn ket_strategy(d: usize) -> impl Strategy<Value = DVector<C64>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d)
            .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
            .prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
    }

    proptest! {
        #[test]
        fn efficiency_defined_iff_projective(
            k1 in ket_strategy(5),
            k2 in ket_strategy(5),
            w in 0.05f64..1.0,
            rank2 in any::<bool>(),
        ) {
            let s = sp(5);
            let k1 = &k1 / C64::new(k1.norm(), 0.0);
            let mut el = FockOperator::outer(s, &k1).unwrap().scale(w);
            if rank2 {
                // Orthogonalize so the second component is a genuine rank increase.
                let ov = k1.dotc(&k2);
                let perp = &k2 - &k1 * ov;
                prop_assume!(perp.norm() > 0.1);
                let perp = &perp / C64::new(perp.norm(), 0.0);
                el = &el + &FockOperator::outer(s, &perp).unwrap().scale(0.3 * w);
            }
            let proj = projectivity(&el).unwrap();
            let eff = effective_efficiency(&el);
            prop_assert_eq!(eff.is_some(), !rank2);
            prop_assert_eq!(eff.is_some(), proj >= 1.0 - PROJECTIVE_TOL);
            if let Some(e) = eff {
                prop_assert!((e - w).abs() < 1e-12);
            }
        }

        #[test]
        fn non_gaussianity_rotation_invariant(re in -0.8f64..0.8, im in -0.8f64..0.8, theta in 0.0f64..6.3) {
            // Mix a coherent state with |1⟩ to get a non-Gaussian test state.
            let s = sp(30);
            let c = coherent_state(C64::new(re, im), s);
            let one = QuantumState::fock(s, 1).unwrap();
            let mix = QuantumState::new(&c.op().scale(0.6) + &one.op().scale(0.4)).unwrap();
            let d0 = non_gaussianity(&mix);
            let d1 = non_gaussianity(&phase_rotate(&mix, theta));
            prop_assert!((d0 - d1).abs() < 1e-9);
            prop_assert!(d0 >= -1e-9);
        }
    }
}
