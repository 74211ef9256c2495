use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use painleve::connect::{
    averaged_actions, closed_form_phi2, connect_forward, transition_constants, AverageMethod,
    SEPARATRIX_TOL,
};
use painleve::{EquationParams, Error, FinalAsymptotics, InitialAsymptotics, Sign};

fn params(eps: f64) -> EquationParams {
    EquationParams::two(eps).unwrap()
}

fn close_phase(a: f64, b: f64, tol: f64) -> bool {
    (a.sin() - b.sin()).abs() < tol && (a.cos() - b.cos()).abs() < tol
}

/// Reference values from an independent high-precision evaluation.
#[test]
fn sweep_reference_points() {
    let cases = [
        (
            (0.9, 0.8, FRAC_PI_2, PI / 3.0, 1.0),
            (
                0.178_788_403_237_682_53,
                0.296_181_382_295_057_8,
                -2.816_249_436_723_329_4,
                -1.420_059_948_071_256_97,
            ),
            0.231_844_320_105_157_72,
        ),
        (
            (0.8, 0.6, 1.0, FRAC_PI_2, 1.0),
            (
                0.078_357_556_484_293_96,
                0.230_386_160_004_468_5,
                -3.784_033_400_302_057,
                2.138_507_662_818_955_3,
            ),
            0.404_568_541_667_851_7,
        ),
    ];
    for ((a1, a2, p1, p2, eps), (i1, i2, phi1, phi2), closed) in cases {
        let init = InitialAsymptotics::two(a1, a2, p1, p2).unwrap();
        let conn = connect_forward(&init, &params(eps)).unwrap();
        let f = conn.final_;
        let closed_got = closed_form_phi2(&conn.constants, f.i2, eps).unwrap();
        assert!(close_phase(closed_got, closed, 1e-11));
        assert_eq!(f.sigma, Sign::Minus);
        assert!((f.i1 - i1).abs() < 1e-12, "I1 {} vs {i1}", f.i1);
        assert!((f.i2 - i2).abs() < 1e-12, "I2 {} vs {i2}", f.i2);
        assert!(close_phase(f.phi1, phi1, 1e-11));
        assert!(
            close_phase(f.phi2, phi2, 1e-11),
            "phi2 {} vs {phi2}",
            f.phi2
        );
    }
}

#[test]
fn p1_reference() {
    let init = InitialAsymptotics::two(0.9, 0.8, 0.0, 0.0).unwrap();
    let c = transition_constants(&init, &params(1.0)).unwrap();
    assert!((c.p1 / 0.078_497_378_519_476_975 - 1.0).abs() < 1e-15);
}

#[test]
fn actions_nonnegative_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut kept = 0;
    for _ in 0..100_000 {
        let init = InitialAsymptotics::two(
            rng.random_range(1e-9..1.5),
            rng.random_range(1e-9..1.5),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        )
        .unwrap();
        let p = params(rng.random_range(0.05..5.0));
        let c = transition_constants(&init, &p).unwrap();
        if c.big_phi1.sin().abs() <= 1e-6 {
            continue;
        }
        match connect_forward(&init, &p) {
            Ok(conn) => {
                assert!(conn.final_.i1 >= 0.0);
                assert!(conn.final_.i2 >= -1e-12);
                kept += 1;
            }
            Err(Error::ConnectionDomain { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(kept > 99_000);
}

#[test]
fn sum_rule_discrepancy_shrinks() {
    let mut last = f64::INFINITY;
    for action in [1e-2, 1e-3, 1e-4] {
        let r =
            averaged_actions(action, &params(1.0), AverageMethod::MonteCarlo, 200_000, 9).unwrap();
        let gap =
            (r.mean_i2 + 2.0 * r.mean_i1 - (1.0 / (2.0 * PI * action)).ln() / (2.0 * PI)).abs();
        assert!(gap < last, "gap {gap} at {action} not below {last}");
        last = gap;
    }
}

#[test]
fn sigma_follows_sin_big_phi1_along_sweep() {
    let p = params(1.0);
    let mut prev: Option<(f64, Sign)> = None;
    for k in 1..400 {
        let phi1 = 2.0 * PI * k as f64 / 400.0;
        let init = InitialAsymptotics::two(0.8, 0.6, phi1, FRAC_PI_2).unwrap();
        let s = transition_constants(&init, &p).unwrap().big_phi1.sin();
        let Ok(conn) = connect_forward(&init, &p) else {
            assert!(s.abs() < SEPARATRIX_TOL);
            continue;
        };
        let sigma = conn.final_.sigma;
        assert_eq!(sigma.value(), s.signum());
        if let Some((ps, psig)) = prev {
            assert_eq!(ps.signum() != s.signum(), psig != sigma);
        }
        prev = Some((s, sigma));
    }
}

fn valid_point() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (
        0.01..1.5f64,
        0.01..1.5f64,
        0.0..2.0 * PI,
        0.0..2.0 * PI,
        0.05..5.0f64,
    )
}

fn try_connect(a1: f64, a2: f64, p1: f64, p2: f64, eps: f64) -> Option<FinalAsymptotics> {
    let init = InitialAsymptotics::two(a1, a2, p1, p2).unwrap();
    connect_forward(&init, &params(eps)).ok().map(|c| c.final_)
}

proptest! {
    #[test]
    fn reduction_gives_zero_second_action(a1 in 0.01..1.5f64, p1 in 0.0..2.0 * PI, p2 in 0.0..2.0 * PI, eps in 0.05..5.0f64) {
        if let Some(f) = try_connect(a1, 0.0, p1, p2, eps) {
            prop_assert!(f.i2.abs() <= 1e-12);
        }
    }

    #[test]
    fn two_pi_periodic((a1, a2, p1, p2, eps) in valid_point()) {
        let a = try_connect(a1, a2, p1, p2, eps);
        let b = try_connect(a1, a2, p1 + 2.0 * PI, p2 - 2.0 * PI, eps);
        match (a, b) {
            (Some(a), Some(b)) => {
                prop_assert_eq!(a.sigma, b.sigma);
                prop_assert!((a.i1 - b.i1).abs() <= 1e-12 * a.i1.max(1.0));
                prop_assert!((a.i2 - b.i2).abs() <= 1e-12 * a.i2.max(1.0));
                prop_assert!(close_phase(a.phi1, b.phi1, 1e-10));
                prop_assert!(close_phase(a.phi2, b.phi2, 1e-10));
            }
            (None, None) => {}
            _ => prop_assert!(false, "periodicity broke validity"),
        }
    }

    /// `u → −u` shifts both initial phases by π and must negate the whole
    /// final solution: σ flips, actions stay, both final phases stay.
    #[test]
    fn odd_symmetry((a1, a2, p1, p2, eps) in valid_point()) {
        if let (Some(a), Some(b)) = (try_connect(a1, a2, p1, p2, eps), try_connect(a1, a2, p1 + PI, p2 + PI, eps)) {
            prop_assert_eq!(a.sigma, b.sigma.flipped());
            prop_assert!((a.i1 - b.i1).abs() <= 1e-10);
            prop_assert!((a.i2 - b.i2).abs() <= 1e-10 * a.i2.max(1.0));
            prop_assert!(close_phase(a.phi1, b.phi1, 1e-9));
            prop_assert!(close_phase(a.phi2, b.phi2, 1e-9));
        }
    }

    #[test]
    fn amplitude_round_trip(i1 in 0.0..3.0f64, i2 in 0.0..3.0f64, eps in 0.05..5.0f64) {
        let f = FinalAsymptotics::new(Sign::Plus, i1, i2, 0.3, 0.4).unwrap();
        let g = FinalAsymptotics::from_amplitudes(Sign::Plus, f.rho(), f.amplitude(eps), 0.3, 0.4, eps).unwrap();
        prop_assert!((g.i1 - i1).abs() <= 1e-14 * i1.max(1.0));
        prop_assert!((g.i2 - i2).abs() <= 1e-14 * i2.max(1.0));
    }
}
