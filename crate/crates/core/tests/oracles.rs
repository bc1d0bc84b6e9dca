use hyperspin::density::DensityMatrix;
use hyperspin::fock::FockSpace;
use hyperspin::liouvillian::build_liouvillian;
use hyperspin::network::{Connectivity, NetworkParams};
use hyperspin::steady::{default_time_step, evolve, solve_steady_state, SolverMethod};

const METHODS: [SolverMethod; 4] = [
    SolverMethod::NullspaceLu,
    SolverMethod::ShiftInvertArnoldi,
    SolverMethod::DenseFallback,
    SolverMethod::Gmres,
];

fn cases() -> Vec<(NetworkParams, FockSpace)> {
    let p = |n, conn, h| NetworkParams::from_connectivity(n, conn, h, 0.5, 0.1).unwrap();
    vec![
        (p(1, Connectivity::Decoupled, 2.0), FockSpace::new(1, 12).unwrap()),
        (p(1, Connectivity::Decoupled, 0.7), FockSpace::new(1, 10).unwrap()),
        (p(2, Connectivity::Ferromagnetic { c: 0.1 }, 1.2), FockSpace::new(2, 6).unwrap()),
        (p(2, Connectivity::Hyperspin, 1.5), FockSpace::new(2, 6).unwrap()),
        (p(2, Connectivity::Decoupled, 1.5), FockSpace::new(2, 5).unwrap()),
    ]
}

#[test]
fn all_solvers_agree() {
    for (params, space) in cases() {
        let l = build_liouvillian(&params, &space).unwrap();
        let states: Vec<DensityMatrix> = METHODS.iter().map(|&m| solve_steady_state(&l, m).unwrap()).collect();
        for (m, rho) in METHODS.iter().zip(&states).skip(1) {
            let dist = rho.frobenius_distance(&states[0]);
            assert!(dist <= 1e-7, "{m} vs nullspace_lu at h = {}: {dist:e}", params.pump);
        }
    }
}

#[test]
fn long_time_evolution_reaches_steady_state() {
    // The vacuum starts parity-even, so the slow parity-odd mode is never
    // excited and t = 200/g suffices.
    for (params, space) in cases() {
        let l = build_liouvillian(&params, &space).unwrap();
        let rho = solve_steady_state(&l, SolverMethod::NullspaceLu).unwrap();
        let late = evolve(&l, &DensityMatrix::vacuum(space), 200.0 / params.loss, default_time_step(&params, &space)).unwrap();
        let dist = late.frobenius_distance(&rho);
        assert!(dist <= 1e-7, "h = {}, N = {}: {dist:e}", params.pump, space.num_modes());
    }
}

#[test]
fn steady_states_are_physical() {
    for (params, space) in cases() {
        let l = build_liouvillian(&params, &space).unwrap();
        let rho = solve_steady_state(&l, SolverMethod::Auto).unwrap();
        assert!((rho.trace().re - 1.0).abs() <= 1e-12 && rho.trace().im.abs() <= 1e-12);
        assert!(rho.hermiticity_error() <= 1e-10);
        assert!(rho.min_eigenvalue().unwrap() >= -1e-8);
        assert!(rho.info().unwrap().scaled_residual <= 1e-9);
    }
}
