use std::f64::consts::PI;

use resbus::analysis::{fit_sinusoid, fit_swap_rate};
use resbus::device::mhz;
use resbus::engine::{evolve_lindblad_with, IntegratorConfig};
use resbus::fock::basis_state;
use resbus::observables::population;
use resbus::scenario::{
    builtin_scenario, closed_occupation_trace, run_scenario, sweep, TRQ_FIG2, TRQ_FIG2_FASTDECAY,
};

#[test]
fn longer_lifetimes_give_higher_fidelity() {
    let base = builtin_scenario(TRQ_FIG2).unwrap();
    let lifetimes = [3.0, 10.0, 30.0, 100.0];
    let runs = sweep(&base, "kappa_inv_us", &lifetimes).unwrap();
    assert_eq!(runs.len(), lifetimes.len());
    for (run, tau) in runs.iter().zip(lifetimes) {
        assert!(run.metadata.scenario.ends_with(&format!("kappa_inv_us={tau}]")));
    }
    let best: Vec<f64> = runs.iter().map(|r| r.best().optimum.value).collect();
    assert!(best.windows(2).all(|w| w[1] > w[0]), "{best:?}");
    // the sweep point at the golden lifetime reproduces the golden run
    let golden = run_scenario(&base).unwrap();
    assert_eq!(runs[1].series, golden.series);
}

#[test]
fn sweep_rejects_unknown_paths_even_when_empty() {
    let base = builtin_scenario(TRQ_FIG2).unwrap();
    assert!(sweep(&base, "resonators[0].colour", &[]).is_err());
    assert!(sweep(&base, "resonators[7].g_mhz", &[1.0]).is_err());
    assert!(sweep(&base, "kappa_inv_us", &[]).unwrap().is_empty());
}

#[test]
fn exchange_rate_scales_quadratically_with_coupling() {
    let base = builtin_scenario(TRQ_FIG2).unwrap().closed_variant();
    let couplings = [10.0, 20.0, 50.0];
    let mut fitted = Vec::new();
    for g in couplings {
        let mut s = base.clone();
        s.set_parameter("resonators[*].g_mhz", g).unwrap();
        let expected = s.effective_params()[0].g_prime.abs();
        let dt = 0.05e-9;
        let steps = (1.2 * PI / expected / dt).ceil() as usize;
        s.integrator = IntegratorConfig::new(dt, steps as f64 * dt, 20);
        let (times, p2) = closed_occupation_trace(&s, 1).unwrap();
        let fit = fit_swap_rate(&times, &p2, expected / 4.0, expected * 4.0).unwrap();
        fitted.push(fit.angular_frequency);
    }
    let reference = fitted[2];
    for (g, rate) in couplings.iter().zip(&fitted) {
        let predicted = (g / 50.0).powi(2);
        let ratio = rate / reference;
        assert!((ratio / predicted - 1.0).abs() < 0.05, "g = {g} MHz: ratio {ratio}, expected {predicted}");
    }
    assert!((fitted[0] / mhz(0.2) - 1.0).abs() < 0.01);
}

#[test]
fn bus_ripple_is_small_and_oscillates_at_the_detuning() {
    let mut s = builtin_scenario(TRQ_FIG2).unwrap().closed_variant();
    s.set_parameter("sim.t_max_ns", 100.0).unwrap();
    let (times, p2) = closed_occupation_trace(&s, 1).unwrap();
    let slow = fit_swap_rate(&times, &p2, mhz(1.0), mhz(20.0)).unwrap();
    let residual: Vec<f64> = times.iter().zip(&p2).map(|(t, p)| p - slow.eval(*t)).collect();
    let ripple = fit_sinusoid(&times, &residual, mhz(250.0), mhz(1000.0)).unwrap();
    let detuning_hz = (s.device.detuning(0) / (2.0 * PI)).abs();
    assert!(ripple.amplitude.abs() < 0.05, "{}", ripple.amplitude);
    assert!(ripple.amplitude.abs() > 1e-4, "ripple not resolved: {}", ripple.amplitude);
    assert!(
        (ripple.frequency_hz() / detuning_hz - 1.0).abs() < 0.2,
        "{} Hz vs {detuning_hz} Hz",
        ripple.frequency_hz()
    );
}

#[test]
fn populations_account_for_every_excitation() {
    let closed = run_scenario(&builtin_scenario(TRQ_FIG2).unwrap().closed_variant()).unwrap();
    let n = closed.extra("N_total").unwrap();
    let p1 = closed.series.column("P_r1").unwrap();
    let p2 = closed.series.column("P_r2").unwrap();
    for i in 0..n.len() {
        assert!((n[i] - 1.0).abs() < 1e-9);
        let in_storage = p1[i] + p2[i];
        // whatever is missing sits virtually in the bus, at most ~4 (g/Delta)^2
        assert!(in_storage <= 1.0 + 1e-12 && in_storage > 0.95, "{in_storage}");
    }

    let scenario = builtin_scenario(TRQ_FIG2).unwrap();
    let kappa = scenario.device.bus_kappa;
    assert!(scenario.device.resonators.iter().all(|r| r.kappa == kappa));
    let open = run_scenario(&scenario).unwrap();
    let n = open.extra("N_total").unwrap();
    let t_end = *open.series.times.last().unwrap();
    // equal decay rates everywhere: N(t) = exp(-kappa t)
    assert!((n.last().unwrap() - (-kappa * t_end).exp()).abs() < 1e-9);
}

#[test]
fn single_excitation_states_and_vacuum_are_complete() {
    let s = builtin_scenario(TRQ_FIG2).unwrap();
    let basis = s.build_basis().unwrap();
    let h = s.hamiltonian(&basis).unwrap();
    let channels = s.channels(&basis).unwrap();
    let rho0 = basis_state(&s.initial_occupations, &basis).unwrap().to_density();
    let kets: Vec<_> = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0]]
        .iter()
        .map(|occ| basis_state(occ, &basis).unwrap())
        .collect();
    evolve_lindblad_with(&h, &rho0, &channels, &s.integrator, |t, rho| {
        let total: f64 = kets.iter().map(|k| population(rho, k).unwrap()).sum();
        assert!((total - 1.0).abs() <= 1e-8, "t = {t:e}: {total}");
        Ok(())
    })
    .unwrap();
}

#[test]
fn reported_series_stay_within_unit_interval() {
    for name in [TRQ_FIG2, TRQ_FIG2_FASTDECAY] {
        let r = run_scenario(&builtin_scenario(name).unwrap()).unwrap();
        for (column, values) in &r.series.columns {
            for v in values {
                assert!((-1e-9..=1.0 + 1e-9).contains(v), "{name} {column}: {v}");
            }
        }
    }
}
