//! Library results against the independent oracles and against frozen
//! high-precision values.

use crate::oracle::{effective_elementwise, expm, laguerre_exact, logm2};
use num_complex::Complex64 as C64;
use vibronic::fock::{
    build_collective_flips, build_f, build_h_kkr, carrier_operator, laguerre, mode_weight, sideband_operator,
    ModeParams, Sideband,
};
use vibronic::hamiltonian::{build_effective_hamiltonian, DriveParams};
use vibronic::operator::{ElectronicLabel, Factor, OperatorMatrix};
use vibronic::propagator::{evolve, fidelity, VibronicState};

#[test]
fn laguerre_matches_exact_series() {
    let xs = [0.0576, 0.09, 0.1736, 0.25, 0.5, 1.0, 2.5];
    let mut worst: f64 = 0.0;
    for n in 0..=30u64 {
        for k in 0..=4u64 {
            for &x in &xs {
                let exact = laguerre_exact(n, k, x);
                let rel = (laguerre(n as usize, k as usize, x) - exact).abs() / exact.abs();
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst < 1e-10, "worst relative error {worst:e}");
}

#[test]
fn laguerre_frozen_values() {
    assert!((laguerre(8, 1, 0.0576) - 7.061_790_105_042_539_690_1).abs() < 1e-13);
    assert!((laguerre(30, 3, 2.5) - 30.500_084_618_156_658_772).abs() < 1e-11);
}

#[test]
fn mode_weight_frozen_values() {
    assert!((mode_weight(4, 1, 0.3) - 0.791_545_883_703_570_517_86).abs() < 1e-15);
    let expected = [
        0.882496902584595403,
        0.772184789761520978,
        0.671065353007036088,
        0.578564050066853887,
        0.494135065799401873,
        0.417260115212792118,
        0.347447289250471146,
        0.284229941989653194,
        0.227165617953748865,
        0.17583501827618168,
        0.129841004488258945,
    ];
    let params = ModeParams::new(0.5, 0.3, 1, 0, 11, 2).unwrap();
    let f = build_f(&params).unwrap();
    for (n, &e) in expected.iter().enumerate() {
        assert!((f.get(n, n).re - e).abs() < 1e-15, "n = {n}");
    }
}

#[test]
fn h_kkr_frozen_values() {
    let expected = [
        [0.28112023901322102, 0.269875429452692178, 0.258855516083373913],
        [0.268469828257626075, 0.257731035127321031, 0.247207017859622087],
        [0.256198929824698978, 0.245950972631711018, 0.235907974582582817],
        [0.244299004687179703, 0.234527044499692514, 0.224950523515955069],
        [0.232761667520298904, 0.223451200819486947, 0.214326943452691229],
    ];
    let params = ModeParams::new(0.3, 0.2, 1, 0, 5, 3).unwrap();
    let h = build_h_kkr(&params).unwrap();
    for (n, row) in expected.iter().enumerate() {
        for (n_r, &e) in row.iter().enumerate() {
            let i = n * 3 + n_r;
            let z = h.get(i, i);
            assert!((z.norm() - e).abs() < 1e-15);
            // (iη)^1 (iη_r)^0 makes the entry purely imaginary and positive
            assert!(z.re.abs() < 1e-17 && z.im > 0.0);
        }
    }
}

#[test]
fn effective_hamiltonian_matches_elementwise_assembly() {
    for (eta, phi0) in [(0.5, 0.0), (0.3, 0.7), (0.24, -1.3)] {
        let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, 9, 4).unwrap();
        let drive = DriveParams::new(1.0, 40.0 * eta).unwrap().with_phi0(phi0);
        let eff = build_effective_hamiltonian(&params, &drive).unwrap();
        let oracle = effective_elementwise(&params, &drive);
        let diff = eff.total.matrix().iter().zip(oracle.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "eta = {eta}: max entry diff {diff:e}");
    }
}

/// (1/δ)[h, h†] with h = Ω(S'_+ ⊗ X + S''_- ⊗ H₀₀†), the second-order
/// expansion of the drive around the frequency δ.
fn commutator_route(params: &ModeParams, drive: &DriveParams) -> OperatorMatrix {
    let flips = build_collective_flips(drive.phi0, params.k_r);
    let x = sideband_operator(params).unwrap();
    let y = carrier_operator(params).unwrap();
    let h = flips
        .s_prime
        .kron(&x)
        .add(&flips.s_double_prime.adjoint().kron(&y.adjoint()))
        .scale(C64::new(drive.omega, 0.0));
    h.commutator(&h.adjoint()).scale(C64::new(1.0 / drive.delta, 0.0))
}

#[test]
fn effective_hamiltonian_matches_commutator_expansion() {
    let cases = [
        (0.5, 1, 0, Sideband::Blue, 0.0),
        (0.4, 0, 2, Sideband::Blue, 0.3),
        (0.45, 1, 2, Sideband::Blue, 0.0),
        (0.35, 1, 1, Sideband::Blue, 0.9),
        (0.3, 1, 0, Sideband::Red, 0.0),
        (0.3, 2, 0, Sideband::Red, -0.4),
    ];
    for (eta, k, k_r, sideband, phi0) in cases {
        let params = ModeParams::new(eta, 0.8 * eta, k, k_r, 7, 6).unwrap().with_sideband(sideband);
        let drive = DriveParams::new(1.3, 17.0).unwrap().with_phi0(phi0);
        let eff = build_effective_hamiltonian(&params, &drive).unwrap();
        let oracle = commutator_route(&params, &drive);
        let diff = eff.total.max_abs_diff(&oracle);
        assert!(diff < 1e-13, "{cases:?}: {diff:e}", cases = (eta, k, k_r, sideband, phi0));
    }
}

#[test]
fn collective_raising_squares_to_pair_flip() {
    // (S'_+)² = (-1)^{k_r} · 2 S₊₁S₊₂ and (S''_+)² = 2 S₊₁S₊₂ on the two spins
    for k_r in 0..2 {
        let flips = build_collective_flips(0.6, k_r);
        let sq = flips.s_prime.dot(&flips.s_prime);
        let uu = ElectronicLabel::UpUp.index();
        let dd = ElectronicLabel::DownDown.index();
        let sign = if k_r == 0 { 1.0 } else { -1.0 };
        assert!((sq.get(uu, dd) - C64::new(2.0 * sign, 0.0)).norm() < 1e-15);
        let sq2 = flips.s_double_prime.dot(&flips.s_double_prime);
        assert!((sq2.get(uu, dd) - C64::new(2.0, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn evolve_matches_matrix_exponential() {
    let eta = 0.5;
    let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, 5, 3).unwrap();
    let drive = DriveParams::new(1.0, 20.0).unwrap();
    let eff = build_effective_hamiltonian(&params, &drive).unwrap();
    let basis = params.basis();
    let amps: Vec<C64> = (0..basis.dim()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos())).collect();
    let psi = VibronicState::from_amplitudes(basis, amps).unwrap();
    for t in [10.0, 250.0] {
        let u = expm(&eff.total.matrix().mapv(|z| z * C64::new(0.0, -t)));
        let op = OperatorMatrix::new(u, Factor::Vibronic(basis)).unwrap();
        let exact = VibronicState::from_amplitudes(basis, op.apply(psi.amplitudes())).unwrap();
        let out = evolve(&psi, &eff.total, t, 1e-8).unwrap();
        let deficit = 1.0 - fidelity(&exact, &out).unwrap();
        assert!(deficit < 1e-8, "t = {t}: deficit {deficit:e}");
    }
}

#[test]
fn logm2_inverts_expm() {
    let a = ndarray::arr2(&[[C64::new(0.0, -0.3), C64::new(0.1, 0.2)], [C64::new(-0.1, 0.2), C64::new(0.0, 0.5)]]);
    let e = expm(&a);
    let l = logm2([[e[[0, 0]], e[[0, 1]]], [e[[1, 0]], e[[1, 1]]]]);
    for i in 0..2 {
        for j in 0..2 {
            assert!((l[i][j] - a[[i, j]]).norm() < 1e-14);
        }
    }
}

#[test]
fn corrected_detunings_from_oracle_diagonal() {
    let eta = 0.5;
    let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, 6, 3).unwrap();
    let drive = DriveParams::new(1.0, 40.0 * eta).unwrap();
    let oracle = effective_elementwise(&params, &drive);
    let b = params.basis();
    let down = oracle[[b.index(ElectronicLabel::DownDown, 0, 0).unwrap(); 2]].re;
    let up = oracle[[b.index(ElectronicLabel::UpUp, 1, 0).unwrap(); 2]].re;
    let corrected = vibronic::hamiltonian::corrected_drive(&params, &drive, 0, 0).unwrap();
    assert!((corrected.delta_i - (drive.delta - 0.5 * (up - down))).abs() < 1e-13);
    assert!((corrected.delta_ii - (drive.delta + 0.5 * (up - down))).abs() < 1e-13);
    assert!((corrected.delta_i - 20.035_812_967_9).abs() < 1e-9);
    assert!((corrected.delta_ii - 19.964_187_032_1).abs() < 1e-9);
}

#[test]
fn scan_coupling_column_matches_closed_form() {
    use vibronic::propagator::EvolveOptions;
    use vibronic::spectroscopy::{scan_collect, ScanGrid, ScanObservables};
    let eta = 0.45;
    let grid = ScanGrid { eta: vec![eta], delta: vec![18.0], n: (0..8).collect(), ..ScanGrid::default() };
    let rows = scan_collect(&grid, &ScanObservables::default(), 2, &EvolveOptions::default()).unwrap();
    let omega0 = 1.0 / 18.0;
    let g0 = crate::oracle::mode_weight_exact(0, 0, ModeParams::stretch_eta(eta));
    for row in rows {
        let n = row.point.n;
        let f = |m, k| crate::oracle::mode_weight_exact(m, k, eta);
        let expected = 2.0 * omega0 * eta * g0 * g0 * ((n + 1) as f64).sqrt() * f(n, 1) * (f(n, 0) - f(n + 1, 0)).abs();
        let got = row.coupling.unwrap();
        assert!((got - expected).abs() < 1e-14, "n = {n}: {got} vs {expected}");
    }
}
