//! Fixed-step RK4 propagation of pure states and density matrices.
//!
//! Hamiltonians and jump operators are compiled once into lists of nonzero
//! entries; the state stays dense. The rotating terms of the Hamiltonian are
//! evaluated with exact phases at every RK4 substep.

use serde::{Deserialize, Serialize};

use crate::device::HamiltonianModel;
use crate::error::{Error, IntegratorFailure, Result};
use crate::fock::{
    annihilation_op, dagger, modulus_norm_bound, ComplexMatrix, CompositeBasis, DensityMatrix,
    StateVector, C64,
};

pub const DEFAULT_DT: f64 = 0.01 / 1e9;
pub const STABILITY_LIMIT: f64 = 0.05;
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
pub const TRACE_DRIFT_LIMIT: f64 = 1e-7;
pub const NEGATIVE_EIGENVALUE_LIMIT: f64 = -1e-6;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;

/// Photon loss through `operator` at `rate` (1/s).
#[derive(Clone, Debug)]
pub struct CollapseChannel {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

impl CollapseChannel {
    pub fn new(operator: ComplexMatrix, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::param("rate", format!("must be non-negative, got {rate}")));
        }
        Ok(CollapseChannel { operator, rate })
    }

    /// Decay of `mode` through its annihilation operator.
    pub fn decay(mode: usize, rate: f64, basis: &CompositeBasis) -> Result<Self> {
        Self::new(annihilation_op(mode, basis)?, rate)
    }
}

/// One decay channel per mode, skipping zero rates.
pub fn decay_channels(kappas: &[f64], basis: &CompositeBasis) -> Result<Vec<CollapseChannel>> {
    kappas
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0.0)
        .map(|(m, &k)| CollapseChannel::decay(m, k, basis))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Step size, seconds.
    pub dt: f64,
    /// End time, seconds.
    pub t_max: f64,
    /// Record a sample every this many steps (the last step is always kept).
    pub sample_every: usize,
    /// Whether callers should follow up with a halved-dt run.
    pub convergence_check: bool,
    /// Enforce the stability guard and the drift limits. Disabled only to
    /// study deliberately under-resolved runs.
    pub enforce_guards: bool,
    /// Eigendecompose density-matrix samples to check positivity.
    pub check_positivity: bool,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_max: f64, sample_every: usize) -> Self {
        IntegratorConfig {
            dt,
            t_max,
            sample_every,
            convergence_check: false,
            enforce_guards: true,
            check_positivity: true,
        }
    }

    /// Same sampling times with half the step.
    pub fn halved(&self) -> Self {
        IntegratorConfig {
            dt: self.dt / 2.0,
            sample_every: self.sample_every * 2,
            ..self.clone()
        }
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::param("t_max", format!("must be non-negative, got {}", self.t_max)));
        }
        if self.sample_every == 0 {
            return Err(Error::param("sample_every", "must be at least 1"));
        }
        let n = (self.t_max / self.dt).round();
        if (n * self.dt - self.t_max).abs() > 1e-9 * self.t_max.max(self.dt) {
            return Err(Error::param(
                "t_max",
                format!("{} s is not a whole number of {} s steps", self.t_max, self.dt),
            ));
        }
        Ok(n as usize)
    }

    fn check_stability(&self, generator_norm: f64) -> Result<()> {
        let product = self.dt * generator_norm;
        if self.enforce_guards && product > STABILITY_LIMIT {
            return Err(Error::param(
                "dt",
                format!(
                    "dt * ||H|| = {product:.3e} exceeds the stability guard {STABILITY_LIMIT}; \
                     reduce dt below {:.3e} s",
                    STABILITY_LIMIT / generator_norm
                ),
            ));
        }
        Ok(())
    }
}

/// Nonzero entries of a matrix.
#[derive(Clone, Debug, Default)]
struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let entries = m
            .indexed_iter()
            .filter(|(_, v)| v.norm_sqr() != 0.0)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        SparseOp { entries }
    }
}

/// `H(t)` (optionally with an anti-Hermitian decay part) as a sparse entry
/// list refreshed in place.
struct CompiledGenerator {
    fixed: Vec<(usize, usize, C64)>,
    rotating: Vec<(SparseOp, f64)>,
    current: Vec<(usize, usize, C64)>,
}

impl CompiledGenerator {
    fn new(h: &HamiltonianModel, extra_static: Option<&ComplexMatrix>) -> Self {
        let fixed_dense = match extra_static {
            Some(extra) => &h.static_part + extra,
            None => h.static_part.clone(),
        };
        let fixed = SparseOp::from_dense(&fixed_dense).entries;
        let rotating = h
            .terms
            .iter()
            .map(|t| (SparseOp::from_dense(&t.matrix), t.frequency))
            .collect();
        CompiledGenerator {
            fixed,
            rotating,
            current: Vec::new(),
        }
    }

    fn refresh(&mut self, t: f64) {
        self.current.clear();
        self.current.extend_from_slice(&self.fixed);
        for (op, nu) in &self.rotating {
            let phase = C64::from_polar(1.0, -nu * t);
            for &(i, j, v) in &op.entries {
                self.current.push((i, j, v * phase));
                self.current.push((j, i, (v * phase).conj()));
            }
        }
    }
}

fn check_dims(h: &HamiltonianModel, basis: &CompositeBasis) -> Result<()> {
    if &h.basis != basis {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian basis {:?} vs state basis {:?}",
            h.basis, basis
        )));
    }
    Ok(())
}

/// Samples of an evolution.
#[derive(Clone, Debug)]
pub struct TimeSeries<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diagnostics: Diagnostics,
}

/// Invariant monitoring collected over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub samples: usize,
    /// Closed runs: `max | ||psi|| - 1 |`; open runs: `max |Tr rho - Tr rho_0|`.
    pub max_drift: f64,
    /// Open runs only.
    pub max_hermiticity_error: f64,
    /// Open runs with positivity checks only; `+inf` otherwise.
    pub min_eigenvalue: f64,
}

/// Closed-system evolution `i dpsi/dt = H(t) psi`, handing every sample
/// (normalized for reporting) to `observe`.
pub fn evolve_closed_with<F>(
    h: &HamiltonianModel,
    psi0: &StateVector,
    cfg: &IntegratorConfig,
    mut observe: F,
) -> Result<Diagnostics>
where
    F: FnMut(f64, &StateVector) -> Result<()>,
{
    check_dims(h, psi0.basis())?;
    let steps = cfg.steps()?;
    cfg.check_stability(h.norm_bound())?;
    let basis = psi0.basis().clone();
    let n = basis.dim();
    let mut gen = CompiledGenerator::new(h, None);

    let mut psi: Vec<C64> = psi0.amplitudes().to_vec();
    let initial_norm = l2(&psi);
    let mut stage = vec![C64::new(0.0, 0.0); n];
    let mut k = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
    let mut diag = Diagnostics {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };

    let mut emit = |step: usize, psi: &[C64], diag: &mut Diagnostics| -> Result<()> {
        let t = step as f64 * cfg.dt;
        let norm = l2(psi);
        if !norm.is_finite() {
            return Err(IntegratorFailure::NonFinite { time: t }.into());
        }
        diag.max_drift = diag.max_drift.max((norm - initial_norm).abs());
        diag.samples += 1;
        let amps = ndarray::Array1::from_iter(psi.iter().map(|z| z / norm));
        observe(t, &StateVector::from_raw(&basis, amps))
    };

    emit(0, &psi, &mut diag)?;
    let dt = cfg.dt;
    for step in 0..steps {
        let t = step as f64 * dt;
        let rhs = |gen: &mut CompiledGenerator, t: f64, y: &[C64], out: &mut [C64]| {
            gen.refresh(t);
            out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for &(i, j, v) in &gen.current {
                out[i] += v * y[j];
            }
            out.iter_mut().for_each(|z| *z = C64::new(z.im, -z.re));
        };
        rhs(&mut gen, t, &psi, &mut k[0]);
        axpy(&psi, 0.5 * dt, &k[0], &mut stage);
        rhs(&mut gen, t + 0.5 * dt, &stage, &mut k[1]);
        axpy(&psi, 0.5 * dt, &k[1], &mut stage);
        rhs(&mut gen, t + 0.5 * dt, &stage, &mut k[2]);
        axpy(&psi, dt, &k[2], &mut stage);
        rhs(&mut gen, t + dt, &stage, &mut k[3]);
        for i in 0..n {
            psi[i] += (dt / 6.0) * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        let done = step + 1;
        if done % cfg.sample_every == 0 || done == steps {
            emit(done, &psi, &mut diag)?;
            if cfg.enforce_guards && diag.max_drift > NORM_DRIFT_LIMIT {
                return Err(IntegratorFailure::NormDrift {
                    drift: diag.max_drift,
                    limit: NORM_DRIFT_LIMIT,
                }
                .into());
            }
        }
    }
    diag.steps = steps;
    Ok(diag)
}

pub fn evolve_closed(
    h: &HamiltonianModel,
    psi0: &StateVector,
    cfg: &IntegratorConfig,
) -> Result<TimeSeries<StateVector>> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let diagnostics = evolve_closed_with(h, psi0, cfg, |t, psi| {
        times.push(t);
        states.push(psi.clone());
        Ok(())
    })?;
    Ok(TimeSeries {
        times,
        states,
        diagnostics,
    })
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &[C64], a: f64, x: &[C64], out: &mut [C64]) {
    for ((o, yi), xi) in out.iter_mut().zip(y).zip(x) {
        *o = yi + xi * a;
    }
}

/// Right-hand side of the master equation,
/// `-i[H, rho] + sum_k rate_k (L rho L+ - {L+ L, rho}/2)`, evaluated as
/// `X + X+ + sum_k rate_k L rho L+` with `X = -i K rho` and the non-Hermitian
/// `K = H - (i/2) sum_k rate_k L+ L`. Valid for Hermitian `rho`.
struct LindbladRhs {
    gen: CompiledGenerator,
    jumps: Vec<(SparseOp, f64)>,
    scratch: Vec<C64>,
    n: usize,
}

impl LindbladRhs {
    fn new(h: &HamiltonianModel, channels: &[CollapseChannel]) -> Self {
        let n = h.dim();
        let mut decay = ComplexMatrix::zeros((n, n));
        for c in channels {
            let ldl = dagger(&c.operator).dot(&c.operator);
            decay = decay + ldl.mapv(|z| z * C64::new(0.0, -0.5 * c.rate));
        }
        let extra = (!channels.is_empty()).then_some(&decay);
        LindbladRhs {
            gen: CompiledGenerator::new(h, extra),
            jumps: channels
                .iter()
                .filter(|c| c.rate > 0.0)
                .map(|c| (SparseOp::from_dense(&c.operator), c.rate))
                .collect(),
            scratch: vec![C64::new(0.0, 0.0); n * n],
            n,
        }
    }

    fn eval(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        self.gen.refresh(t);
        let x = &mut self.scratch;
        x.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for &(i, k, v) in &self.gen.current {
            let coeff = C64::new(v.im, -v.re); // -i v
            let src = &rho[k * n..(k + 1) * n];
            let dst = &mut x[i * n..(i + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += coeff * s;
            }
        }
        for i in 0..n {
            for j in i..n {
                let v = x[i * n + j] + x[j * n + i].conj();
                out[i * n + j] = v;
                out[j * n + i] = v.conj();
            }
        }
        for (op, rate) in &self.jumps {
            for &(i, k, a) in &op.entries {
                let ra = a * *rate;
                for &(j, l, b) in &op.entries {
                    out[i * n + j] += ra * rho[k * n + l] * b.conj();
                }
            }
        }
    }

    fn generator_norm(h: &HamiltonianModel, channels: &[CollapseChannel]) -> f64 {
        h.norm_bound()
            + channels
                .iter()
                .map(|c| 0.5 * c.rate * modulus_norm_bound([&dagger(&c.operator).dot(&c.operator)]))
                .sum::<f64>()
    }
}

/// Lindblad evolution handing every sample to `observe`.
pub fn evolve_lindblad_with<F>(
    h: &HamiltonianModel,
    rho0: &DensityMatrix,
    channels: &[CollapseChannel],
    cfg: &IntegratorConfig,
    mut observe: F,
) -> Result<Diagnostics>
where
    F: FnMut(f64, &DensityMatrix) -> Result<()>,
{
    check_dims(h, rho0.basis())?;
    let n = h.dim();
    for (k, c) in channels.iter().enumerate() {
        if c.operator.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "collapse channel {k} is {:?}, basis has {n} states",
                c.operator.dim()
            )));
        }
        if !(c.rate >= 0.0) {
            return Err(Error::param(format!("channels[{k}].rate"), "must be non-negative"));
        }
    }
    let steps = cfg.steps()?;
    cfg.check_stability(LindbladRhs::generator_norm(h, channels))?;

    let basis = rho0.basis().clone();
    let mut rhs = LindbladRhs::new(h, channels);
    let mut rho: Vec<C64> = rho0.entries().iter().copied().collect();
    let initial_trace = rho0.trace();
    let zero = C64::new(0.0, 0.0);
    let mut stage = vec![zero; n * n];
    let mut k = [vec![zero; n * n], vec![zero; n * n], vec![zero; n * n], vec![zero; n * n]];
    let mut diag = Diagnostics {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };

    let mut emit = |step: usize, rho: &[C64], diag: &mut Diagnostics| -> Result<()> {
        let t = step as f64 * cfg.dt;
        let dm = DensityMatrix::new(
            &basis,
            ComplexMatrix::from_shape_vec((n, n), rho.to_vec()).expect("square buffer"),
        )?;
        let trace = dm.trace();
        if !(trace.re.is_finite() && trace.im.is_finite()) {
            return Err(IntegratorFailure::NonFinite { time: t }.into());
        }
        diag.max_drift = diag.max_drift.max((trace - initial_trace).norm());
        diag.max_hermiticity_error = diag.max_hermiticity_error.max(dm.hermiticity_error());
        diag.samples += 1;
        if cfg.enforce_guards && diag.max_drift > TRACE_DRIFT_LIMIT {
            return Err(IntegratorFailure::TraceDrift {
                drift: diag.max_drift,
                limit: TRACE_DRIFT_LIMIT,
            }
            .into());
        }
        if cfg.check_positivity {
            let ev = dm.min_eigenvalue();
            diag.min_eigenvalue = diag.min_eigenvalue.min(ev);
            if cfg.enforce_guards && ev < NEGATIVE_EIGENVALUE_LIMIT {
                return Err(IntegratorFailure::NegativeEigenvalue {
                    value: ev,
                    time: t,
                    limit: NEGATIVE_EIGENVALUE_LIMIT,
                }
                .into());
            }
        }
        observe(t, &dm)
    };

    emit(0, &rho, &mut diag)?;
    let dt = cfg.dt;
    for step in 0..steps {
        let t = step as f64 * dt;
        rhs.eval(t, &rho, &mut k[0]);
        axpy(&rho, 0.5 * dt, &k[0], &mut stage);
        rhs.eval(t + 0.5 * dt, &stage, &mut k[1]);
        axpy(&rho, 0.5 * dt, &k[1], &mut stage);
        rhs.eval(t + 0.5 * dt, &stage, &mut k[2]);
        axpy(&rho, dt, &k[2], &mut stage);
        rhs.eval(t + dt, &stage, &mut k[3]);
        for idx in 0..n * n {
            rho[idx] += (dt / 6.0) * (k[0][idx] + 2.0 * k[1][idx] + 2.0 * k[2][idx] + k[3][idx]);
        }
        // re-symmetrize
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (rho[i * n + j] + rho[j * n + i].conj());
                rho[i * n + j] = v;
                rho[j * n + i] = v.conj();
            }
        }
        let done = step + 1;
        if done % cfg.sample_every == 0 || done == steps {
            emit(done, &rho, &mut diag)?;
        }
    }
    diag.steps = steps;
    Ok(diag)
}

pub fn evolve_lindblad(
    h: &HamiltonianModel,
    rho0: &DensityMatrix,
    channels: &[CollapseChannel],
    cfg: &IntegratorConfig,
) -> Result<TimeSeries<DensityMatrix>> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let diagnostics = evolve_lindblad_with(h, rho0, channels, cfg, |t, rho| {
        times.push(t);
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(TimeSeries {
        times,
        states,
        diagnostics,
    })
}

/// Named real-valued observables sampled on a shared time grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    /// Seconds.
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ObservableSeries {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub max_deviation: f64,
    /// Column and time (s) of the largest deviation.
    pub worst: Option<(String, f64)>,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when the two runs cannot be compared point by point.
    pub note: Option<String>,
}

/// Maximum pointwise deviation between two runs of the same setup that
/// differ only in step size.
pub fn convergence_check(run: &ObservableSeries, refined: &ObservableSeries) -> ConvergenceReport {
    let mismatch = |note: String| ConvergenceReport {
        max_deviation: f64::INFINITY,
        worst: None,
        tolerance: CONVERGENCE_TOLERANCE,
        passed: false,
        note: Some(note),
    };
    if run.times.len() != refined.times.len() {
        return mismatch(format!(
            "sample counts differ ({} vs {})",
            run.times.len(),
            refined.times.len()
        ));
    }
    let scale = run.times.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    if run
        .times
        .iter()
        .zip(&refined.times)
        .any(|(a, b)| (a - b).abs() > 1e-9 * scale)
    {
        return mismatch("sample times differ".into());
    }
    let mut max_deviation = 0.0f64;
    let mut worst = None;
    for (name, values) in &run.columns {
        let Some(other) = refined.column(name) else {
            return mismatch(format!("column {name} missing from the refined run"));
        };
        for (i, (a, b)) in values.iter().zip(other).enumerate() {
            let d = (a - b).abs();
            if d > max_deviation || d.is_nan() {
                max_deviation = if d.is_nan() { f64::INFINITY } else { d };
                worst = Some((name.clone(), run.times[i]));
            }
        }
    }
    ConvergenceReport {
        max_deviation,
        worst,
        tolerance: CONVERGENCE_TOLERANCE,
        passed: max_deviation < CONVERGENCE_TOLERANCE,
        note: None,
    }
}
