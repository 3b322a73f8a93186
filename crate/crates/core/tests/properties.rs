//! Property tests for the invariants the library promises.

use std::f64::consts::PI;

use proptest::prelude::*;
use zkscatter::bilinear::{apply_tm, BilinearOp};
use zkscatter::data::{band_pass, gaussian, random_field, BandSpec};
use zkscatter::dynamics::{self, Equation, SolveOptions, SolverConfig};
use zkscatter::grid::{dealias, forward, inverse, product};
use zkscatter::norms::{lp_norm, sobolev_norm, x_report, Exponent};
use zkscatter::propagator::propagate;
use zkscatter::resonance::{self, BilinearSymbol, FreqPair};
use zkscatter::symmetry;
use zkscatter::{make_grid, SpectralField};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn coord() -> impl Strategy<Value = f64> {
    -5.0f64..5.0
}

fn off_axis() -> impl Strategy<Value = f64> {
    (0.1f64..5.0, any::<bool>()).prop_map(|(m, s)| if s { m } else { -m })
}

fn pair() -> impl Strategy<Value = FreqPair> {
    (coord(), coord(), off_axis(), off_axis()).prop_map(|(a, b, c, d)| FreqPair::new([a, b], [c, d]))
}

fn band() -> BandSpec {
    BandSpec { gap_lo: 0.1, gap_hi: 0.2, flat: 0.45, cut: 0.6 }
}

proptest! {
    #![proptest_config(cases(512))]

    #[test]
    fn key_identity_holds(p in pair()) {
        prop_assert!(resonance::key_identity_residual(&p) <= 1e-10);
        prop_assert!(resonance::euler_residual(&p) <= 1e-12);
        prop_assert!(resonance::cubic_split_residual(&p) <= 1e-12);
    }

    #[test]
    fn symbol_pieces_rebuild_the_decomposition(p in pair()) {
        let e = resonance::eval_decomposition(&p);
        let piece = |s: BilinearSymbol| s.eval(&p).unwrap() * s.eta_factor(p.eta).unwrap();
        let a: f64 = (1..=3).map(|k| piece(BilinearSymbol::Tr(k))).sum();
        let scale = (e.a / e.p).abs().max(1.0);
        prop_assert!((a - e.a / e.p).abs() <= 1e-12 * scale);
        for (j, b) in [(1u8, e.b1), (2u8, e.b2)] {
            let sum: f64 = (1..=3).map(|k| piece(BilinearSymbol::Sr(j, k))).sum();
            prop_assert!((sum - b / e.p).abs() <= 1e-12 * (b / e.p).abs().max(1.0));
        }
    }

    #[test]
    fn phase_forms_agree(p in pair()) {
        let gap = (resonance::eval_phi(&p) - resonance::eval_phi_cubic(&p)).abs();
        prop_assert!(gap <= 1e-12 * p.cubic_scale());
    }

    #[test]
    fn denominator_dominates_squares(z1 in -3.0f64..3.0, z2 in -3.0f64..3.0, s1 in -3.0f64..3.0, s2 in -3.0f64..3.0) {
        let den = z1 * z1 + z2 * z2 + s1 * s1 + s2 * s2;
        prop_assume!(den > 1e-6);
        let p = resonance::eval_p(&FreqPair::from_tilde([z1, z2], [s1, s2]));
        prop_assert!(p >= den * (1.0 - 1e-12));
    }

    #[test]
    fn dual_map_carries_the_dispersion(k1 in -4.0f64..4.0, k2 in -4.0f64..4.0) {
        let ks = symmetry::dual_map([k1, k2]);
        let w = ks[0].powi(3) + ks[1].powi(3);
        let scale = 1.0 + k1.hypot(k2).powi(3);
        prop_assert!((w - symmetry::physical_symbol([k1, k2])).abs() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn parseval(seed in any::<u64>()) {
        let g = make_grid(16, 12, 7.0, 5.0).unwrap();
        let f = random_field(g.clone(), seed, 0);
        let direct = lp_norm(&f, Exponent::Two);
        let spectral = forward(&f).l2_norm();
        prop_assert!((direct - spectral).abs() <= 1e-12 * direct);
        let back = inverse(&forward(&f));
        prop_assert!(back.zip_with(&f, |a, b| a - b).unwrap().max_abs() <= 1e-13);
    }

    #[test]
    fn unit_symbol_is_dealiased_product(seed in any::<u64>()) {
        let g = make_grid(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
        let f = dealias(&forward(&random_field(g.clone(), seed, 0)));
        let h = dealias(&forward(&random_field(g.clone(), seed, 1)));
        let op = BilinearOp { symbol: BilinearSymbol::One, grid: g };
        let direct = forward(&product(&inverse(&f), &inverse(&h)).unwrap());
        let tm = apply_tm(&op, &f, &h).unwrap();
        prop_assert!(tm.sub(&direct).unwrap().max_abs() <= 1e-12 * direct.max_abs());
    }

    #[test]
    fn propagation_is_unitary_group(t in -20.0f64..20.0, s in -20.0f64..20.0) {
        let g = make_grid(32, 32, 30.0, 30.0).unwrap();
        let f = forward(&gaussian(g, 1.0, 2.0, (1.0, -2.0)));
        let a = propagate(&propagate(&f, t), s);
        let b = propagate(&f, t + s);
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-12 * f.max_abs());
        prop_assert!((propagate(&f, t).l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
        for sigma in [0.0, 1.0, 2.5] {
            let n0 = sobolev_norm(&f, sigma, Exponent::Two);
            prop_assert!((sobolev_norm(&propagate(&f, t), sigma, Exponent::Two) - n0).abs() <= 1e-12 * n0);
        }
    }

    #[test]
    fn x_norm_is_a_seminorm(a in -4.0f64..4.0, b in -4.0f64..4.0, shift in -10.0f64..10.0) {
        let g = make_grid(32, 32, 32.0 * PI, 32.0 * PI).unwrap();
        let f = band_pass(g, band());
        let h = zkscatter::data::translate(&f, (shift, 0.5 * shift));
        let nf = x_report(&f).unwrap().total;
        let scaled = x_report(&f.scale(a)).unwrap().total;
        prop_assert!((scaled - a.abs() * nf).abs() <= 1e-12 * nf.max(scaled));
        let sum = x_report(&f.scale(a).add(&h.scale(b)).unwrap()).unwrap().total;
        let parts = x_report(&f.scale(a)).unwrap().total + x_report(&h.scale(b)).unwrap().total;
        prop_assert!(sum <= parts * (1.0 + 1e-12) + 1e-300);
    }
}

fn smooth_state(amp: f64) -> SpectralField {
    let g = make_grid(32, 32, 30.0, 30.0).unwrap();
    dealias(&forward(&gaussian(g, amp, 2.5, (0.0, 0.0))))
}

fn evolve(v: &SpectralField, dt: f64, t1: f64, eq: Equation) -> SpectralField {
    let cfg = SolverConfig::new(dt, 0.0, t1).with_equation(eq);
    dynamics::solve(v, &cfg, &[], &SolveOptions::default()).unwrap().last
}

#[test]
fn integrator_is_fourth_order() {
    for eq in [Equation::Symmetric, Equation::Physical] {
        let v = smooth_state(0.5);
        let t1 = 0.8;
        let reference = evolve(&v, t1 / 256.0, t1, eq);
        let err = |n: f64| evolve(&v, t1 / n, t1, eq).sub(&reference).unwrap().l2_norm();
        let (e1, e2) = (err(8.0), err(16.0));
        let order = (e1 / e2).log2();
        assert!((3.7..4.4).contains(&order), "{eq:?}: order {order}, errors {e1:e} {e2:e}");
    }
}

#[test]
fn integrator_is_time_reversible() {
    let v = smooth_state(0.5);
    let cfg = SolverConfig::new(0.01, 0.0, 1.0);
    let fwd = dynamics::solve(&v, &cfg, &[], &SolveOptions::default()).unwrap().last;
    let back = SolverConfig::new(0.01, 1.0, 0.0);
    let w = dynamics::solve(&fwd, &back, &[], &SolveOptions::default()).unwrap().last;
    let rel = w.sub(&v).unwrap().l2_norm() / v.l2_norm();
    assert!(rel <= 1e-8, "{rel:e}");
}

#[test]
fn small_data_follow_the_free_group() {
    let amp = 1e-7;
    let v = smooth_state(amp);
    let t1 = 2.0;
    let w = evolve(&v, 0.01, t1, Equation::Symmetric);
    let free = propagate(&v, t1);
    // The quadratic term contributes at relative order amp.
    let rel = w.sub(&free).unwrap().l2_norm() / v.l2_norm();
    assert!(rel <= 1e-5, "{rel:e}");
}

#[test]
fn mass_is_conserved_by_the_step() {
    let v = smooth_state(1.0);
    let w = evolve(&v, 0.01, 0.5, Equation::Physical);
    let (m0, m1) = (dynamics::mass(&v), dynamics::mass(&w));
    assert!((m1 - m0).abs() <= 1e-12 * lp_norm(&inverse(&v), Exponent::One));
}
