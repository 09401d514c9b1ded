use resbus::device::build_hamiltonian;
use resbus::engine::{decay_channels, evolve_closed, evolve_lindblad, IntegratorConfig};
use resbus::fock::{basis_state, CompositeBasis};
use resbus::scenario::{builtin_scenario, FRQ_FIG3, TRQ_FIG2};

fn frq_bases() -> (resbus::scenario::Scenario, CompositeBasis, CompositeBasis) {
    let s = builtin_scenario(FRQ_FIG3).unwrap();
    let dims = s.device.mode_dims();
    let full = CompositeBasis::full(&dims).unwrap();
    let sector = CompositeBasis::restricted(&dims, 2).unwrap();
    (s, full, sector)
}

#[test]
fn sector_basis_reproduces_full_basis_amplitudes() {
    let (s, full, sector) = frq_bases();
    assert_eq!((full.dim(), sector.dim()), (243, 21));
    let cfg = IntegratorConfig::new(s.integrator.dt, 30e-9, 200);
    let mut results = Vec::new();
    for basis in [&full, &sector] {
        let h = build_hamiltonian(&s.device, s.frame, basis).unwrap();
        let psi0 = basis_state(&s.initial_occupations, basis).unwrap();
        results.push(evolve_closed(&h, &psi0, &cfg).unwrap());
    }
    let (a, b) = (&results[0], &results[1]);
    assert_eq!(a.times.len(), b.times.len());
    let mut worst: f64 = 0.0;
    for (psi_full, psi_sector) in a.states.iter().zip(&b.states) {
        let mapped = psi_sector.transfer_to(&full).unwrap();
        for (x, y) in psi_full.amplitudes().iter().zip(mapped.amplitudes()) {
            worst = worst.max((x - y).norm());
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn closed_lindblad_run_matches_state_vector_run() {
    let mut s = builtin_scenario(TRQ_FIG2).unwrap().closed_variant();
    s.set_parameter("sim.t_max_ns", 30.0).unwrap();
    let basis = s.build_basis().unwrap();
    let h = s.hamiltonian(&basis).unwrap();
    let psi0 = basis_state(&s.initial_occupations, &basis).unwrap();
    let closed = evolve_closed(&h, &psi0, &s.integrator).unwrap();
    let channels = decay_channels(&s.device.mode_kappas(), &basis).unwrap();
    assert!(channels.iter().all(|c| c.rate == 0.0) || channels.is_empty());
    let open = evolve_lindblad(&h, &psi0.to_density(), &channels, &s.integrator).unwrap();
    let mut worst: f64 = 0.0;
    for (psi, rho) in closed.states.iter().zip(&open.states) {
        let pure = psi.to_density();
        for (x, y) in pure.entries().iter().zip(rho.entries()) {
            worst = worst.max((x - y).norm());
        }
        assert!((rho.purity() - 1.0).abs() < 1e-9, "purity {}", rho.purity());
    }
    assert!(worst < 1e-7, "{worst:e}");
}

#[test]
fn open_runs_agree_between_bases() {
    let (s, full, sector) = frq_bases();
    let cfg = IntegratorConfig::new(s.integrator.dt, 2e-9, 40);
    let mut runs = Vec::new();
    for basis in [&full, &sector] {
        let h = build_hamiltonian(&s.device, s.frame, basis).unwrap();
        let channels = decay_channels(&s.device.mode_kappas(), basis).unwrap();
        let rho0 = basis_state(&s.initial_occupations, basis).unwrap().to_density();
        runs.push(evolve_lindblad(&h, &rho0, &channels, &cfg).unwrap());
    }
    let mut worst: f64 = 0.0;
    for (a, b) in runs[0].states.iter().zip(&runs[1].states) {
        let mapped = b.transfer_to(&full).unwrap();
        for (x, y) in a.entries().iter().zip(mapped.entries()) {
            worst = worst.max((x - y).norm());
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
}
