//! Closed-form dispersive-regime predictions.
//!
//! Within the single-photon subspace `{|0,1>, |1,0>}` of a resonator pair the
//! effective exchange reduces to a driven two-level problem with an exact
//! solution. These functions are deliberately independent of the numerical
//! engine so the two can be checked against each other.

use std::f64::consts::PI;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CompositeBasis, StateVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelAmplitudes {
    /// Amplitude of `|0>_i |1>_j` (photon in the second pair member).
    pub c01: C64,
    /// Amplitude of `|1>_i |0>_j` (photon in the first pair member).
    pub c10: C64,
    pub g_prime: f64,
    pub delta: f64,
    pub omega_rabi: f64,
}

/// Exact solution of
/// `dc10/dt = -i g' c01 e^{i delta t}`, `dc01/dt = -i g' c10 e^{-i delta t}`.
pub fn two_level_solution(c01_0: C64, c10_0: C64, g_prime: f64, delta: f64, t: f64) -> TwoLevelAmplitudes {
    let omega = (4.0 * g_prime * g_prime + delta * delta).sqrt();
    if omega == 0.0 {
        return TwoLevelAmplitudes {
            c01: c01_0,
            c10: c10_0,
            g_prime,
            delta,
            omega_rabi: 0.0,
        };
    }
    let i = C64::i();
    let (s, c) = (0.5 * omega * t).sin_cos();
    let detuned = i * (delta / omega) * s;
    let hop = i * (2.0 * g_prime / omega) * s;
    let c01 = (c01_0 * (c + detuned) - hop * c10_0) * C64::from_polar(1.0, -0.5 * delta * t);
    let c10 = (c10_0 * (c - detuned) - hop * c01_0) * C64::from_polar(1.0, 0.5 * delta * t);
    TwoLevelAmplitudes {
        c01,
        c10,
        g_prime,
        delta,
        omega_rabi: omega,
    }
}

/// Time for `|g'| t = pi/4`, the equal-weight point of the exchange.
pub fn gate_time(g_prime: f64) -> Result<f64> {
    if g_prime == 0.0 || !g_prime.is_finite() {
        return Err(Error::param("g_prime", format!("must be nonzero and finite, got {g_prime}")));
    }
    Ok(PI / (4.0 * g_prime.abs()))
}

/// Relative phase sign of a Bell target `(|0,1> + s i |1,0>)/sqrt(2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BellKind {
    Plus,
    Minus,
}

impl BellKind {
    pub const ALL: [BellKind; 2] = [BellKind::Plus, BellKind::Minus];

    pub fn sign(self) -> f64 {
        match self {
            BellKind::Plus => 1.0,
            BellKind::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BellKind::Plus => "plus",
            BellKind::Minus => "minus",
        }
    }
}

/// `(|0>_i|1>_j + s i |1>_i|0>_j)/sqrt(2)` with every other mode in vacuum.
pub fn bell_target(kind: BellKind, pair: (usize, usize), basis: &CompositeBasis) -> Result<StateVector> {
    product_bell_target(&[(kind, pair)], basis)
}

/// Product of Bell states on disjoint pairs, every other mode in vacuum.
pub fn product_bell_target(
    factors: &[(BellKind, (usize, usize))],
    basis: &CompositeBasis,
) -> Result<StateVector> {
    let modes = basis.num_modes();
    let mut used = vec![false; modes];
    for &(_, (i, j)) in factors {
        for m in [i, j] {
            if m >= modes {
                return Err(Error::InvalidMode { mode: m, modes });
            }
            if used[m] {
                return Err(Error::param("pair", format!("mode {m} appears in more than one pair")));
            }
            used[m] = true;
        }
    }
    let mut amps = Array1::<C64>::zeros(basis.dim());
    let combos = 1usize << factors.len();
    for mask in 0..combos {
        let mut occ = vec![0usize; modes];
        let mut coeff = C64::new(1.0, 0.0);
        for (bit, &(kind, (i, j))) in factors.iter().enumerate() {
            if mask & (1 << bit) == 0 {
                occ[j] = 1;
            } else {
                occ[i] = 1;
                coeff *= C64::new(0.0, kind.sign());
            }
        }
        let index = basis.index_of(&occ).ok_or_else(|| Error::InvalidOccupation {
            occupations: occ.clone(),
            reason: "basis cannot hold the Bell-state components".into(),
        })?;
        amps[index] = coeff;
    }
    StateVector::normalized(basis, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis_state;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn identity_at_time_zero() {
        let (a, b) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let s = two_level_solution(a, b, 1.3e7, -4e6, 0.0);
        assert_eq!((s.c01, s.c10), (a, b));
    }

    #[test]
    fn resonant_quarter_swap_matches_sine_cosine_form() {
        // delta = 0, c10(0) = 1: c10 = cos(g't), c01 = -i sin(g't)
        for g in [3.1e7_f64, -3.1e7] {
            let t = PI / 4.0 / g.abs();
            let s = two_level_solution(C64::new(0.0, 0.0), C64::new(1.0, 0.0), g, 0.0, t);
            let gt = g * t;
            assert_abs_diff_eq!((s.c10 - C64::new(gt.cos(), 0.0)).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((s.c01 - C64::new(0.0, -gt.sin())).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.c01.norm(), FRAC_1_SQRT_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn resonant_half_period_swaps_fully() {
        let g = 2.0 * PI * 5e6;
        let s = two_level_solution(C64::new(0.0, 0.0), C64::new(1.0, 0.0), g, 0.0, PI / (2.0 * g));
        assert_abs_diff_eq!(s.c01.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_rates_are_identity() {
        let s = two_level_solution(C64::new(0.0, 1.0), C64::new(0.0, 0.0), 0.0, 0.0, 1.0);
        assert_eq!(s.c01, C64::new(0.0, 1.0));
        assert_eq!(s.omega_rabi, 0.0);
    }

    #[test]
    fn gate_times() {
        let t = gate_time(2.0 * PI * 5e6).unwrap();
        assert_abs_diff_eq!(t, 25e-9, epsilon = 1e-18);
        assert_abs_diff_eq!(gate_time(-2.0 * PI * 10e6).unwrap(), 12.5e-9, epsilon = 1e-18);
        assert!(gate_time(0.0).is_err());
    }

    #[test]
    fn bell_targets_in_three_mode_basis() {
        let basis = CompositeBasis::full(&[2, 2, 2]).unwrap();
        let plus = bell_target(BellKind::Plus, (0, 1), &basis).unwrap();
        let s = FRAC_1_SQRT_2;
        assert_abs_diff_eq!((plus.amplitude(&[0, 1, 0]).unwrap() - C64::new(s, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((plus.amplitude(&[1, 0, 0]).unwrap() - C64::new(0.0, s)).norm(), 0.0, epsilon = 1e-15);
        let minus = bell_target(BellKind::Minus, (0, 1), &basis).unwrap();
        assert_abs_diff_eq!(plus.inner(&minus).unwrap().norm(), 0.0, epsilon = 1e-15);
        let psi1 = basis_state(&[1, 0, 0], &basis).unwrap();
        let f = psi1.to_density().overlap(&plus).unwrap();
        assert_abs_diff_eq!(f.re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bell_target_validation() {
        let basis = CompositeBasis::full(&[2, 2, 2]).unwrap();
        assert!(bell_target(BellKind::Plus, (0, 3), &basis).is_err());
        assert!(product_bell_target(
            &[(BellKind::Plus, (0, 1)), (BellKind::Plus, (1, 2))],
            &basis
        )
        .is_err());
    }

    #[test]
    fn product_target_has_four_equal_weights() {
        let basis = CompositeBasis::restricted(&[3; 5], 2).unwrap();
        let t = product_bell_target(
            &[(BellKind::Minus, (0, 1)), (BellKind::Plus, (2, 3))],
            &basis,
        )
        .unwrap();
        let nonzero: Vec<f64> = t.amplitudes().iter().map(|z| z.norm()).filter(|&a| a > 0.0).collect();
        assert_eq!(nonzero.len(), 4);
        assert!(nonzero.iter().all(|a| (a - 0.5).abs() < 1e-15));
        // |1,0>|1,0> picks up (-i)(+i) = 1
        assert_abs_diff_eq!((t.amplitude(&[1, 0, 1, 0, 0]).unwrap() - C64::new(0.5, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn solution_is_unitary(
            theta in 0.0..PI,
            phi in -PI..PI,
            g in -1e8..1e8f64,
            delta in -1e8..1e8f64,
            t in 0.0..1e-6f64,
        ) {
            let c01 = C64::from_polar(theta.cos(), phi);
            let c10 = C64::new(theta.sin(), 0.0);
            let s = two_level_solution(c01, c10, g, delta, t);
            prop_assert!((s.c01.norm_sqr() + s.c10.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }
}
