use fence_core::model::*;
use fence_core::Error;
use proptest::prelude::*;

fn pp() -> PotentialParams {
    PotentialParams::new(2.0, 10.0).unwrap()
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 60)
}

/// Plain RK4 on `x' = v, v' = s1 x`, one coordinate at a time.
fn rk4_target(x0: f64, v0: f64, s1: f64, t: f64, dt: f64) -> (f64, f64) {
    let f = |x: f64, v: f64| (v, s1 * x);
    let steps = (t / dt).round() as usize;
    let (mut x, mut v) = (x0, v0);
    for _ in 0..steps {
        let k1 = f(x, v);
        let k2 = f(x + 0.5 * dt * k1.0, v + 0.5 * dt * k1.1);
        let k3 = f(x + 0.5 * dt * k2.0, v + 0.5 * dt * k2.1);
        let k4 = f(x + dt * k3.0, v + dt * k3.1);
        x += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (x, v)
}

#[test]
fn target_matches_numerical_integration() {
    let (x0, v0) = (Vec2::new(2.0, 8.0), Vec2::new(0.5, 0.5));
    for s1 in [-0.1, 0.0, -2.0] {
        for t in [0.7, 3.0, 10.0] {
            let (x, v) = target_state_at(x0, v0, s1, t);
            let (ox, ovx) = rk4_target(x0.x, v0.x, s1, t, 1e-4);
            let (oy, ovy) = rk4_target(x0.y, v0.y, s1, t, 1e-4);
            assert!((x.x - ox).abs() < 1e-8 && (x.y - oy).abs() < 1e-8, "s1={s1} t={t}");
            assert!((v.x - ovx).abs() < 1e-8 && (v.y - ovy).abs() < 1e-8, "s1={s1} t={t}");
        }
    }
}

#[test]
fn alpha_integral_matches_quadrature_on_random_points() {
    use rand::{Rng, SeedableRng};
    let p = pp();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let d: f64 = rng.random_range(2.05..12.0);
        let oracle = if d >= 10.0 {
            0.0
        } else {
            adaptive_simpson(|s| 1.0 / (s - 2.0) - 1.0 / 8.0, d, 10.0, 1e-13)
        };
        let got = alpha_integral(d, &p).unwrap();
        assert!((got - oracle).abs() < 1e-8, "d={d}: {got} vs {oracle}");
    }
}

#[test]
fn below_safe_distance_is_an_error() {
    let p = pp();
    assert!(matches!(alpha(2.0, &p), Err(Error::BelowSafeDistance { .. })));
    assert!(matches!(alpha_integral(1.0, &p), Err(Error::BelowSafeDistance { .. })));
    let pos = [Vec2::new(0.0, 0.0), Vec2::new(1.5, 0.0)];
    assert!(repulsion(0, &pos, &p).is_err());
}

fn positions_strategy() -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((-15.0f64..15.0, -15.0f64..15.0), 2..7)
        .prop_map(|v| v.into_iter().map(|(x, y)| Vec2::new(x, y)).collect::<Vec<_>>())
        .prop_filter("pairs farther apart than r", |p| {
            p.iter().enumerate().all(|(i, a)| p[i + 1..].iter().all(|b| (*a - *b).norm() > 2.1))
        })
}

proptest! {
    #[test]
    fn repulsion_sums_to_zero(pos in positions_strategy()) {
        let etas = repulsion_all(&pos, &pp()).unwrap();
        let total = etas.iter().fold(Vec2::ZERO, |acc, e| acc + *e);
        let scale = etas.iter().map(|e| e.norm()).sum::<f64>().max(1.0);
        prop_assert!(total.norm() <= 1e-12 * scale, "sum {total:?}");
    }

    #[test]
    fn alpha_is_nonincreasing_and_nonnegative(a in 2.001f64..15.0, b in 2.001f64..15.0) {
        let p = pp();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (fl, fh) = (alpha(lo, &p).unwrap(), alpha(hi, &p).unwrap());
        prop_assert!(fl >= fh);
        prop_assert!(fh >= 0.0);
    }

    #[test]
    fn alpha_is_continuous_at_sensing_radius(h in 1e-12f64..1e-6) {
        let p = pp();
        prop_assert!(alpha(10.0 - h, &p).unwrap() < 2.0 * h);
        prop_assert_eq!(alpha(10.0 + h, &p).unwrap(), 0.0);
        prop_assert!(alpha_integral(10.0 - h, &p).unwrap() < h * h);
    }

    #[test]
    fn target_flow_is_a_semigroup(s1 in -1.0f64..=0.0, t1 in 0.0f64..20.0, t2 in 0.0f64..20.0) {
        let (x0, v0) = (Vec2::new(2.0, 8.0), Vec2::new(0.5, 0.5));
        let (xa, va) = target_state_at(x0, v0, s1, t1 + t2);
        let (xm, vm) = target_state_at(x0, v0, s1, t1);
        let (xb, vb) = target_state_at(xm, vm, s1, t2);
        prop_assert!((xa - xb).norm() < 1e-10 && (va - vb).norm() < 1e-10);
    }

    #[test]
    fn recovered_velocity_round_trips(
        s1 in -1.0f64..=0.0,
        t in 0.1f64..4.0,
        x0 in (-10.0f64..10.0, -10.0f64..10.0),
        v0 in (-3.0f64..3.0, -3.0f64..3.0),
    ) {
        let (x0, v0) = (Vec2::from([x0.0, x0.1]), Vec2::from([v0.0, v0.1]));
        let w = (-s1).sqrt();
        prop_assume!((w * t).sin().abs() > 0.05 || s1 == 0.0);
        let (xt, _) = target_state_at(x0, v0, s1, t);
        let v = recover_initial_velocity(x0, xt, t, s1).unwrap();
        prop_assert!((v - v0).norm() < 1e-9, "{v:?} vs {v0:?}");
    }

    #[test]
    fn neighbourhoods_are_symmetric(pos in positions_strategy()) {
        for i in 0..pos.len() {
            for k in neighbors(i, &pos, 10.0) {
                prop_assert!(neighbors(k, &pos, 10.0).contains(&i));
            }
        }
    }
}
