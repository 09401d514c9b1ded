//! Device description and Hamiltonian construction.
//!
//! Storage resonators couple to a single bus resonator through an
//! exchange term `g_j (a+ b_j + a b_j+)`. Three frames are supported:
//!
//! * `Lab`: bare frequencies plus static exchange couplings.
//! * `Interaction`: rotating at every bare frequency, leaving the exchange
//!   terms oscillating at the detunings `Delta_j = omega_j - omega_R`.
//! * `Effective`: the bus eliminated to second order in `g_j / Delta_j`,
//!   leaving a direct exchange `g'` within each resonator pair, written in
//!   the frame rotating at the dispersively shifted frequencies.
//!
//! All quantities are angular frequencies in rad/s and times in seconds.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    annihilation_op, creation_op, dagger, number_op, modulus_norm_bound, ComplexMatrix,
    CompositeBasis, C64,
};

pub const TWO_PI: f64 = 2.0 * PI;

pub fn ghz(f: f64) -> f64 {
    f * TWO_PI * 1e9
}

pub fn mhz(f: f64) -> f64 {
    f * TWO_PI * 1e6
}

/// Decay rate from a photon lifetime in microseconds; an infinite lifetime
/// means no decay.
pub fn kappa_from_lifetime_us(lifetime_us: f64) -> f64 {
    if lifetime_us.is_infinite() {
        0.0
    } else {
        1.0 / (lifetime_us * 1e-6)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub label: String,
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// Coupling to the bus, rad/s.
    pub g: f64,
    /// Energy decay rate, 1/s.
    pub kappa: f64,
    pub fock_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub bus_omega: f64,
    pub bus_kappa: f64,
    pub bus_fock_dim: usize,
    pub resonators: Vec<ResonatorSpec>,
    pub dispersive_warn_threshold: f64,
}

pub const DEFAULT_DISPERSIVE_WARN_THRESHOLD: f64 = 0.2;

impl DeviceConfig {
    pub fn new(bus_omega: f64, bus_kappa: f64, resonators: Vec<ResonatorSpec>) -> Self {
        let bus_fock_dim = resonators.iter().map(|r| r.fock_dim).max().unwrap_or(2);
        DeviceConfig {
            bus_omega,
            bus_kappa,
            bus_fock_dim,
            resonators,
            dispersive_warn_threshold: DEFAULT_DISPERSIVE_WARN_THRESHOLD,
        }
    }

    /// Mode count: resonators in order, then the bus.
    pub fn num_modes(&self) -> usize {
        self.resonators.len() + 1
    }

    pub fn bus_mode(&self) -> usize {
        self.resonators.len()
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.resonators
            .iter()
            .map(|r| r.fock_dim)
            .chain(std::iter::once(self.bus_fock_dim))
            .collect()
    }

    /// Sets every mode, bus included, to the same Fock dimension.
    pub fn set_fock_dim(&mut self, dim: usize) {
        for r in &mut self.resonators {
            r.fock_dim = dim;
        }
        self.bus_fock_dim = dim;
    }

    /// `Delta_j = omega_j - omega_R`.
    pub fn detuning(&self, index: usize) -> f64 {
        self.resonators[index].omega - self.bus_omega
    }

    /// Per-mode decay rates in mode order (bus last).
    pub fn mode_kappas(&self) -> Vec<f64> {
        self.resonators
            .iter()
            .map(|r| r.kappa)
            .chain(std::iter::once(self.bus_kappa))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: String, v: f64| -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
            Ok(())
        };
        let nonneg = |name: String, v: f64| -> Result<()> {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be non-negative and finite, got {v}")));
            }
            Ok(())
        };
        positive("bus.omega".into(), self.bus_omega)?;
        nonneg("bus.kappa".into(), self.bus_kappa)?;
        if self.bus_fock_dim < 2 {
            return Err(Error::param("bus.fock_dim", "must be at least 2"));
        }
        if self.resonators.is_empty() {
            return Err(Error::param("resonators", "at least one resonator is required"));
        }
        for (i, r) in self.resonators.iter().enumerate() {
            positive(format!("resonators[{i}].omega"), r.omega)?;
            nonneg(format!("resonators[{i}].g"), r.g)?;
            nonneg(format!("resonators[{i}].kappa"), r.kappa)?;
            if r.fock_dim < 2 {
                return Err(Error::param(format!("resonators[{i}].fock_dim"), "must be at least 2"));
            }
        }
        Ok(())
    }

    /// Messages for every resonator whose `|g/Delta|` exceeds the
    /// dispersive warning threshold.
    pub fn dispersive_warnings(&self) -> Vec<String> {
        self.resonators
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let delta = self.detuning(i);
                let ratio = if delta == 0.0 { f64::INFINITY } else { (r.g / delta).abs() };
                (ratio > self.dispersive_warn_threshold).then(|| {
                    format!(
                        "resonator {} ({}): |g/Delta| = {:.3} exceeds {:.3}; outside the dispersive regime",
                        i, r.label, ratio, self.dispersive_warn_threshold
                    )
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Lab,
    Interaction,
    Effective,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Lab => "lab",
            Frame::Interaction => "interaction",
            Frame::Effective => "effective",
        })
    }
}

impl FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lab" => Ok(Frame::Lab),
            "interaction" => Ok(Frame::Interaction),
            "effective" => Ok(Frame::Effective),
            other => Err(format!("unknown frame `{other}` (expected lab, interaction or effective)")),
        }
    }
}

/// Which closed form to use for the bus-mediated exchange rate.
///
/// `Paper` is `g1 g2 (Delta1 + Delta2) / (Delta1 Delta2)`; `Half` carries
/// the extra factor 1/2 of the standard second-order elimination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GPrimeFormula {
    Paper,
    Half,
}

impl GPrimeFormula {
    pub const ALL: [GPrimeFormula; 2] = [GPrimeFormula::Paper, GPrimeFormula::Half];
}

impl fmt::Display for GPrimeFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GPrimeFormula::Paper => "paper",
            GPrimeFormula::Half => "half",
        })
    }
}

impl FromStr for GPrimeFormula {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "paper" => Ok(GPrimeFormula::Paper),
            "half" => Ok(GPrimeFormula::Half),
            other => Err(format!("unknown g' formula `{other}` (expected paper or half)")),
        }
    }
}

/// Dispersive-regime parameters of one resonator pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub pair: (usize, usize),
    pub g_prime: f64,
    /// Dispersive shifts `g_j^2 / Delta_j` of the pair members.
    pub chi: (f64, f64),
    pub omega_r_shifted: f64,
    pub omega_shifted: (f64, f64),
    pub delta: f64,
    pub omega_rabi: f64,
    pub formula: GPrimeFormula,
}

impl EffectiveParams {
    /// Parameters for a bare two-level exchange with the given `g'` and
    /// pair detuning; the bus-related fields are zero.
    pub fn from_exchange(pair: (usize, usize), g_prime: f64, delta: f64) -> Self {
        EffectiveParams {
            pair,
            g_prime,
            chi: (0.0, 0.0),
            omega_r_shifted: 0.0,
            omega_shifted: (0.0, 0.0),
            delta,
            omega_rabi: (4.0 * g_prime * g_prime + delta * delta).sqrt(),
            formula: GPrimeFormula::Half,
        }
    }
}

pub fn effective_params(
    config: &DeviceConfig,
    pair: (usize, usize),
    formula: GPrimeFormula,
) -> Result<EffectiveParams> {
    let n = config.resonators.len();
    for idx in [pair.0, pair.1] {
        if idx >= n {
            return Err(Error::InvalidMode { mode: idx, modes: n });
        }
    }
    if pair.0 == pair.1 {
        return Err(Error::param("pair", "a pair needs two distinct resonators"));
    }
    let (d1, d2) = (config.detuning(pair.0), config.detuning(pair.1));
    if d1 == 0.0 {
        return Err(Error::ZeroDetuning { index: pair.0 });
    }
    if d2 == 0.0 {
        return Err(Error::ZeroDetuning { index: pair.1 });
    }
    let (r1, r2) = (&config.resonators[pair.0], &config.resonators[pair.1]);
    let paper = r1.g * r2.g * (d1 + d2) / (d1 * d2);
    let g_prime = match formula {
        GPrimeFormula::Paper => paper,
        GPrimeFormula::Half => 0.5 * paper,
    };
    let chi = (r1.g * r1.g / d1, r2.g * r2.g / d2);
    let omega_shifted = (r1.omega + chi.0, r2.omega + chi.1);
    let delta = omega_shifted.0 - omega_shifted.1;
    Ok(EffectiveParams {
        pair,
        g_prime,
        chi,
        omega_r_shifted: config.bus_omega - chi.0 - chi.1,
        omega_shifted,
        delta,
        omega_rabi: (4.0 * g_prime * g_prime + delta * delta).sqrt(),
        formula,
    })
}

/// `kappa = omega / Q`.
pub fn q_to_kappa(q: f64, omega: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::param("Q", format!("must be positive, got {q}")));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::param("omega", format!("must be positive, got {omega}")));
    }
    Ok(omega / q)
}

/// Photon lifetime `1/kappa` in seconds for quality factor `q`.
pub fn q_to_lifetime(q: f64, omega: f64) -> Result<f64> {
    q_to_kappa(q, omega).map(|k| 1.0 / k)
}

/// Quality factor `omega / kappa` giving the requested lifetime `1/kappa`.
pub fn lifetime_to_q(lifetime: f64, omega: f64) -> Result<f64> {
    if !(lifetime > 0.0) {
        return Err(Error::param("lifetime", format!("must be positive, got {lifetime}")));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::param("omega", format!("must be positive, got {omega}")));
    }
    Ok(omega * lifetime)
}

/// A rotating term `T e^{-i nu t} + T+ e^{i nu t}`.
#[derive(Clone, Debug)]
pub struct RotatingTerm {
    pub matrix: ComplexMatrix,
    /// `nu`, rad/s.
    pub frequency: f64,
}

/// Frame-tagged Hamiltonian `H(t) = H_0 + sum_k (T_k e^{-i nu_k t} + h.c.)`.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    pub frame: Frame,
    pub basis: CompositeBasis,
    pub static_part: ComplexMatrix,
    pub terms: Vec<RotatingTerm>,
}

impl HamiltonianModel {
    pub fn zero(basis: &CompositeBasis, frame: Frame) -> Self {
        let d = basis.dim();
        HamiltonianModel {
            frame,
            basis: basis.clone(),
            static_part: ComplexMatrix::zeros((d, d)),
            terms: Vec::new(),
        }
    }

    /// Time-independent Hamiltonian.
    pub fn constant(basis: &CompositeBasis, frame: Frame, h: ComplexMatrix) -> Result<Self> {
        if h.dim() != (basis.dim(), basis.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian {:?} vs basis dimension {}",
                h.dim(),
                basis.dim()
            )));
        }
        Ok(HamiltonianModel {
            frame,
            basis: basis.clone(),
            static_part: h,
            terms: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        let mut h = self.static_part.clone();
        for term in &self.terms {
            let phase = C64::from_polar(1.0, -term.frequency * t);
            let n = h.nrows();
            for i in 0..n {
                for j in 0..n {
                    let v = term.matrix[(i, j)];
                    if v.norm_sqr() != 0.0 {
                        h[(i, j)] += v * phase;
                        h[(j, i)] += v.conj() * phase.conj();
                    }
                }
            }
        }
        h
    }

    /// Upper bound on `max_t ||H(t)||`.
    pub fn norm_bound(&self) -> f64 {
        let daggers: Vec<ComplexMatrix> = self.terms.iter().map(|t| dagger(&t.matrix)).collect();
        modulus_norm_bound(
            std::iter::once(&self.static_part)
                .chain(self.terms.iter().map(|t| &t.matrix))
                .chain(daggers.iter()),
        )
    }
}

fn check_basis(config: &DeviceConfig, basis: &CompositeBasis) -> Result<()> {
    let expected = config.mode_dims();
    if basis.mode_dims() != expected.as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "basis modes {:?} do not match the device's {:?}",
            basis.mode_dims(),
            expected
        )));
    }
    Ok(())
}

/// Builds the lab or interaction frame Hamiltonian. The effective frame
/// pairs consecutive resonators `(0,1), (2,3), ...` using the `Half`
/// formula; use [`build_effective_hamiltonian`] for explicit control.
pub fn build_hamiltonian(
    config: &DeviceConfig,
    frame: Frame,
    basis: &CompositeBasis,
) -> Result<HamiltonianModel> {
    match frame {
        Frame::Effective => {
            let pairs = consecutive_pairs(config.resonators.len())?;
            build_effective_hamiltonian(config, &pairs, GPrimeFormula::Half, basis)
        }
        Frame::Lab | Frame::Interaction => build_bus_hamiltonian(config, frame, basis),
    }
}

/// Lab or interaction frame from the bus couplings, or the effective frame
/// on `pairs` (consecutive pairs when empty) with the given formula.
pub fn build_bus_or_effective(
    config: &DeviceConfig,
    frame: Frame,
    pairs: &[(usize, usize)],
    formula: GPrimeFormula,
    basis: &CompositeBasis,
) -> Result<HamiltonianModel> {
    match frame {
        Frame::Effective if pairs.is_empty() => {
            let pairs = consecutive_pairs(config.resonators.len())?;
            build_effective_hamiltonian(config, &pairs, formula, basis)
        }
        Frame::Effective => build_effective_hamiltonian(config, pairs, formula, basis),
        Frame::Lab | Frame::Interaction => build_bus_hamiltonian(config, frame, basis),
    }
}

/// `(0,1), (2,3), ...`; requires an even resonator count.
pub fn consecutive_pairs(count: usize) -> Result<Vec<(usize, usize)>> {
    if count == 0 || !count.is_multiple_of(2) {
        return Err(Error::param(
            "resonators",
            format!("pairing needs an even, nonzero resonator count, got {count}"),
        ));
    }
    Ok((0..count / 2).map(|k| (2 * k, 2 * k + 1)).collect())
}

fn build_bus_hamiltonian(
    config: &DeviceConfig,
    frame: Frame,
    basis: &CompositeBasis,
) -> Result<HamiltonianModel> {
    config.validate()?;
    check_basis(config, basis)?;
    let bus = config.bus_mode();
    let a_dag = creation_op(bus, basis)?;
    let mut model = HamiltonianModel::zero(basis, frame);

    if frame == Frame::Lab {
        model.static_part = number_op(bus, basis)?.mapv(|z| z * config.bus_omega);
        for (j, r) in config.resonators.iter().enumerate() {
            model.static_part = &model.static_part + &number_op(j, basis)?.mapv(|z| z * r.omega);
        }
    }

    for (j, r) in config.resonators.iter().enumerate() {
        if r.g == 0.0 {
            continue;
        }
        let exchange = a_dag.dot(&annihilation_op(j, basis)?).mapv(|z| z * r.g);
        match frame {
            Frame::Lab => {
                model.static_part = &model.static_part + &exchange + &dagger(&exchange);
            }
            _ => model.terms.push(RotatingTerm {
                matrix: exchange,
                frequency: config.detuning(j),
            }),
        }
    }
    Ok(model)
}

/// Dispersive effective Hamiltonian: for every pair `(i, j)` an exchange
/// `g' b_i+ b_j e^{i delta t} + h.c.`, with the bus left free.
pub fn build_effective_hamiltonian(
    config: &DeviceConfig,
    pairs: &[(usize, usize)],
    formula: GPrimeFormula,
    basis: &CompositeBasis,
) -> Result<HamiltonianModel> {
    config.validate()?;
    check_basis(config, basis)?;
    let mut model = HamiltonianModel::zero(basis, Frame::Effective);
    for &pair in pairs {
        let params = effective_params(config, pair, formula)?;
        model.terms.push(exchange_term(&params, basis)?);
    }
    Ok(model)
}

/// Effective-frame Hamiltonian for explicitly given pair parameters.
pub fn effective_hamiltonian_from_params(
    params: &[EffectiveParams],
    basis: &CompositeBasis,
) -> Result<HamiltonianModel> {
    let mut model = HamiltonianModel::zero(basis, Frame::Effective);
    for p in params {
        model.terms.push(exchange_term(p, basis)?);
    }
    Ok(model)
}

fn exchange_term(params: &EffectiveParams, basis: &CompositeBasis) -> Result<RotatingTerm> {
    let (i, j) = params.pair;
    let hop = creation_op(i, basis)?
        .dot(&annihilation_op(j, basis)?)
        .mapv(|z| z * params.g_prime);
    // b_i+ b_j rotates as e^{+i delta t} with delta = omega_i' - omega_j'
    Ok(RotatingTerm {
        matrix: hop,
        frequency: -params.delta,
    })
}
