use std::sync::Arc;

use nlslab::branch::BranchSettings;
use nlslab::evolution::{self, EvolutionConfig, Scheme};
use nlslab::io::{self, Provenance};
use nlslab::modulation::{Decomposer, ModulationSettings};
use nlslab::{BranchSolver, ComplexField, Grid, Hamiltonian, Nonlinearity, Potential, SpectralData, Stencil};
use num_complex::Complex64;

fn decomposer() -> Decomposer {
    let grid = Arc::new(Grid::dirichlet(30.0, 801).unwrap());
    let v = Potential::sech2(1.0, 1.0).unwrap();
    let h = Hamiltonian::new(&grid, &v, Stencil::Second);
    let sp = SpectralData::cached(&h).unwrap();
    let nl = Nonlinearity::new(2.0, -1.0).unwrap();
    let branch = BranchSolver::new(&h, sp, nl, BranchSettings::default()).unwrap();
    Decomposer::new(branch, ModulationSettings::default())
}

fn packet(d: &Decomposer, z: Complex64, amp: f64) -> ComplexField {
    let sp = d.branch().spectral();
    let g = ComplexField::from_fn(sp.grid(), |x| {
        Complex64::new(0.0, 1.5 * x).exp() * (-0.5 * (x - 2.0) * (x - 2.0)).exp()
    });
    &sp.phi.scale(z) + &sp.project_pc(&g).unwrap().scale_real(amp)
}

#[test]
fn saved_trajectory_reloads_exactly() {
    let d = decomposer();
    let u0 = packet(&d, Complex64::new(0.02, 0.01), 0.005);
    let cfg = EvolutionConfig {
        dt: 0.01,
        t_final: 1.0,
        snapshot_stride: 25,
        ..EvolutionConfig::default()
    };
    let tr = evolution::run(&d, &u0, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    io::save_trajectory(dir.path(), &tr, &Provenance::new("abc")).unwrap();
    let back = io::load_trajectory(dir.path(), &d).unwrap();
    assert_eq!(back.snapshots.len(), tr.snapshots.len());
    assert_eq!(back.z_series, tr.z_series);
    for (a, b) in tr.snapshots.iter().zip(&back.snapshots) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.u.values(), b.u.values());
        assert_eq!(a.state.z, b.state.z);
    }
    assert_eq!(io::load_index(dir.path()).unwrap().provenance.config_hash, "abc");
}

#[test]
fn decomposition_is_lipschitz() {
    let d = decomposer();
    let u = packet(&d, Complex64::new(0.03, -0.02), 0.01);
    let (s0, _) = d.decompose(&u, 0.0).unwrap();
    for eps in [1e-4, 1e-5, 1e-6] {
        let dv = ComplexField::from_fn(u.grid(), |x| Complex64::new(eps * (-x * x).exp(), 0.0));
        let (s1, _) = d.decompose(&(&u + &dv), 0.0).unwrap();
        let dz = (s1.z - s0.z).norm();
        let deta = (&s1.eta - &s0.eta).h1_norm();
        assert!(dz <= 2.0 * dv.h1_norm(), "{dz}");
        assert!(deta <= 5.0 * dv.h1_norm(), "{deta}");
    }
}

#[test]
fn crank_nicolson_conserves_without_sponge() {
    let d = decomposer();
    let u0 = packet(&d, Complex64::new(0.05, 0.0), 0.01);
    let cfg = EvolutionConfig {
        dt: 0.02,
        t_final: 2.0,
        snapshot_stride: 10,
        scheme: Scheme::CrankNicolson,
        ..EvolutionConfig::default()
    };
    let tr = evolution::run(&d, &u0, &cfg).unwrap();
    let (dm, de) = tr.conservation_drift();
    assert!(dm < 1e-12, "{dm}");
    assert!(de < 1e-10, "{de}");
}
