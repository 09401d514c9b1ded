//! Populations and fidelities as quadratic forms `<psi|rho|psi>`.

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, StateVector};
use crate::oracle::{bell_target, BellKind};

/// Largest imaginary residue tolerated in `<psi|rho|psi>`.
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-10;

/// Population of `target`: `P = <target|rho|target>`.
pub fn population(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    let value = rho.overlap(target)?;
    let scale = 1.0f64.max(value.re.abs());
    if value.im.abs() > IMAGINARY_RESIDUE_LIMIT * scale {
        return Err(Error::param(
            "rho",
            format!("<psi|rho|psi> has imaginary part {:.3e}; rho is not Hermitian", value.im),
        ));
    }
    Ok(value.re)
}

/// Overlap fidelity with a pure target. Same quadratic form as
/// [`population`]; the separate name keeps call sites readable.
pub fn fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    population(rho, target)
}

/// Fidelity of the reduced state of `pair` against a two-mode Bell target.
pub fn marginal_bell_fidelity(rho: &DensityMatrix, pair: (usize, usize), kind: BellKind) -> Result<f64> {
    let reduced = rho.partial_trace(&[pair.0, pair.1])?;
    let target = bell_target(kind, (0, 1), reduced.basis())?;
    fidelity(&reduced, &target)
}
