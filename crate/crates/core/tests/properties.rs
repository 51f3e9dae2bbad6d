//! Property tests across modules, checked against independent oracles.

mod common;

use common::*;
use ltvdiss::apps::{rocket_system, RocketParams};
use ltvdiss::dissipativity::{
    available_storage_continuation, integral_kyp_check, kyp_check, kyp_matrix, rde_integrate,
};
use ltvdiss::hermlin::{cholesky, herm_eig, HermMatrix};
use ltvdiss::ltv::{simulate, state_transition, Domain, MatrixFunction};
use ltvdiss::ph::{canonical_ph, power_balance_residual};
use ltvdiss::popov::popov_gram;
use ltvdiss::quad;
use ltvdiss::transforms::{transform_storage, transform_system, Transform};
use ltvdiss::{CMat, CVec, TimeExpr, C64};
use proptest::prelude::*;
use rand::Rng;

fn rel(a: &CMat, b: &CMat) -> f64 {
    norm2(&(a - b)) / (1.0 + norm2(b))
}

fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("t".to_string()),
        (-3.0..3.0f64).prop_map(|c| format!("{c}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]))
                .prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            (inner.clone(), prop::sample::select(vec!["sin", "cos", "exp", "abs", "recip"]))
                .prop_map(|(a, f)| format!("{f}({a})")),
            inner.clone().prop_map(|a| format!("sqrt(abs({a}))")),
            inner.clone().prop_map(|a| format!("-{a}")),
            (inner.clone(), 2..4i32).prop_map(|(a, k)| format!("({a})^{k}")),
            (inner.clone(), inner, -1.0..1.0f64)
                .prop_map(|(a, b, c)| format!("piecewise{{t < {c}: {a}; else: {b}}}")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_parse_back(src in expr_source(), ts in prop::collection::vec(-2.0..2.0f64, 100)) {
        let e = TimeExpr::parse(&src).unwrap();
        let back = TimeExpr::parse(&e.to_string()).unwrap();
        for t in ts {
            match (e.eval(t), back.eval(t)) {
                (Ok(a), Ok(b)) => {
                    if a.norm().is_finite() {
                        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{src} at {t}: {a} vs {b}");
                    }
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{src} at {t}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn builtin_derivatives_match_differences(
        f in prop::sample::select(vec!["sin", "cos", "exp", "sqrt", "abs", "recip", "square"]),
        a in 0.2..2.0f64,
        b in -2.0..2.0f64,
        t in -2.0..2.0f64,
    ) {
        let inner = format!("({a}*t + {b})");
        let src = match f {
            "square" => format!("{inner}^2"),
            _ => format!("{f}{inner}"),
        };
        let arg = a * t + b;
        // stay clear of the kinks and poles of sqrt, abs and recip
        prop_assume!(!(matches!(f, "sqrt" | "abs" | "recip") && arg.abs() < 0.05));
        prop_assume!(!(f == "sqrt" && arg < 0.0));
        let e = TimeExpr::parse(&src).unwrap();
        let h = 1e-5;
        let fd = (e.eval(t + h).unwrap() - e.eval(t - h).unwrap()) / (2.0 * h);
        let d = e.derivative().eval(t).unwrap();
        // central differences lose accuracy in proportion to the slope
        prop_assert!((d - fd).norm() <= 1e-6 * (1.0 + d.norm()), "{src} at {t}: {d} vs {fd}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigen_decomposition_reconstructs(n in 1usize..=50, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = constant_matrix(&mut r, n, n, true);
        let m = HermMatrix::new(&x + x.adjoint()).unwrap();
        let e = herm_eig(&m).unwrap();
        let lam = CMat::from_diagonal(&CVec::from_iterator(n, e.values.iter().map(|&v| C64::new(v, 0.0))));
        let back = &e.vectors * lam * e.vectors.adjoint();
        prop_assert!(norm2(&(back - m.matrix())) <= 1e-9 * (1.0 + norm2(m.matrix())));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cholesky_round_trip(n in 1usize..=20, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = constant_matrix(&mut r, n, n, true);
        let m = HermMatrix::new(x.adjoint() * &x + CMat::identity(n, n) * C64::new(0.1, 0.0)).unwrap();
        let l = cholesky(&m).unwrap();
        prop_assert!(norm2(&(l.adjoint() * &l - m.matrix())) <= 1e-10 * norm2(m.matrix()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// `x(t) = Φ(t, t₀)x₀ + ∫ Φ(t, s)B(s)u(s) ds` with Gauss–Legendre
    /// quadrature of transition matrices.
    #[test]
    fn simulation_matches_variation_of_constants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let piecewise = r.gen_bool(0.3);
        let sys = random_system(&mut r, n, m, piecewise);
        let x0 = vector(&mut r, n, true);
        let u = input(&mut r, m);
        let rtol = 1e-10;
        let g = grid(0.0, 1.5, 4);
        let traj = simulate(&sys, 0.0, &x0, &u, &g, rtol).unwrap();
        for (k, &t) in g.iter().enumerate().skip(1) {
            let forced = quad::integrate(
                |s| Ok(state_transition(&sys, t, s, rtol)? * sys.b().eval(s)? * u.eval(s)?),
                0.0, t, 12, &sys.breakpoints(),
            ).unwrap();
            let expect = state_transition(&sys, t, 0.0, rtol).unwrap() * &x0 + forced.column(0);
            let got = &traj.x[k];
            prop_assert!((got - &expect).norm() <= 100.0 * rtol * (1.0 + expect.norm()),
                "t = {t}: {got} vs {expect}");
        }
    }

    #[test]
    fn canonical_form_reassembles_the_system(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = PhShape::random(&mut r);
        let ph = random_ph(&mut r, shape);
        let g = grid(PH_DOMAIN.0, PH_DOMAIN.1, 11);
        let sys = ph.assemble_system(&g, 1e-9).unwrap();
        let q = ph.storage().unwrap();
        let c = canonical_ph(&sys, &q, &g).unwrap();
        prop_assert_eq!(c.rank, shape.r);
        let back = c.ph.assemble_unchecked().unwrap();
        for &t in &g {
            for (x, y) in [(back.a(), sys.a()), (back.b(), sys.b()), (back.c(), sys.c()), (back.d(), sys.d())] {
                let (x, y) = (x.eval(t).unwrap(), y.eval(t).unwrap());
                prop_assert!(norm2(&(&x - &y)) <= 1e-8 * (1.0 + norm2(&y)), "t = {t}");
            }
        }
    }

    #[test]
    fn kyp_matrix_is_twice_the_scaled_passivity_matrix(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = PhShape::random(&mut r);
        let ph = random_ph(&mut r, shape);
        let sys = ph.assemble_unchecked().unwrap();
        let q = ph.storage().unwrap();
        let (n, m) = (shape.n, shape.m);
        for t in grid(PH_DOMAIN.0, PH_DOMAIN.1, 9) {
            let mut scale = CMat::identity(n + m, n + m);
            scale.view_mut((0, 0), (n, n)).copy_from(&ph.q.eval(t).unwrap());
            let expect = &scale * ph.passivity_matrix(t).unwrap() * &scale * C64::new(2.0, 0.0);
            let got = kyp_matrix(&sys, &q, t).unwrap();
            prop_assert!(rel(got.matrix(), &expect) <= 1e-9, "t = {t}");
        }
    }

    /// `(QA + Q̇)v = 0` and `Cv = 0` for `v` in the kernel of `Q`.
    #[test]
    fn kernel_of_q_is_invisible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut shape = PhShape::random(&mut r);
        shape.n = 3;
        shape.r = r.gen_range(1..=2);
        let ph = random_ph(&mut r, shape);
        let sys = ph.assemble_unchecked().unwrap();
        for t in grid(PH_DOMAIN.0, PH_DOMAIN.1, 9) {
            let q = ph.q.eval(t).unwrap();
            let e = herm_eig(&HermMatrix::new(q.clone()).unwrap()).unwrap();
            let lhs = &q * sys.a().eval(t).unwrap() + ph.q.eval_deriv(t).unwrap();
            let c = sys.c().eval(t).unwrap();
            for k in 0..shape.n - shape.r {
                let v = e.vectors.column(k);
                prop_assert!((&lhs * v).norm() <= 1e-9 * (1.0 + norm2(&lhs)));
                prop_assert!((&c * v).norm() <= 1e-9 * (1.0 + norm2(&c)));
            }
        }
    }

    /// Nodewise KYP implies the integrated inequality on every subinterval.
    #[test]
    fn integral_kyp_on_subintervals(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = PhShape::random(&mut r);
        let ph = random_ph(&mut r, shape);
        let sys = ph.assemble_unchecked().unwrap();
        let q = ph.storage().unwrap();
        let g = grid(PH_DOMAIN.0, PH_DOMAIN.1, 5);
        prop_assert!(kyp_check(&sys, &q, &g, 1e-9).unwrap().holds);
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                let rep = integral_kyp_check(&sys, &q, g[i], g[j], 9, 1e-8).unwrap();
                prop_assert!(rep.holds, "[{}, {}]: {}", g[i], g[j], rep.min_eig);
            }
        }
    }

    #[test]
    fn riccati_output_solves_the_equation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = PhShape::random(&mut r);
        let sys = random_ph(&mut r, shape).assemble_unchecked().unwrap();
        let rtol = 1e-10;
        let zero = HermMatrix::new(CMat::zeros(shape.n, shape.n)).unwrap();
        let sol = rde_integrate(&sys, PH_DOMAIN.1, &zero, PH_DOMAIN.0, rtol).unwrap();
        let steps = sol.step_times();
        // midpoints are interpolation nodes, so also probe the quarter points
        for (w, th) in steps.windows(2).flat_map(|w| [(w, 0.25), (w, 0.5), (w, 0.75)]) {
            let t = w[0] + th * (w[1] - w[0]);
            let qt = sol.eval(t).unwrap();
            let res = sol.eval_dense_deriv(t).unwrap() - sol.rhs(t, &qt).unwrap();
            let scale = 1.0 + norm2(&sol.rhs(t, &qt).unwrap());
            prop_assert!(norm2(&res) <= 100.0 * rtol * scale,
                "t = {t}: residual {}", norm2(&res));
        }
    }

    #[test]
    fn available_storage_grows_with_the_horizon(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = PhShape::random(&mut r);
        let sys = random_ph(&mut r, shape).assemble_unchecked().unwrap();
        let x = vector(&mut r, shape.n, shape.complex);
        let steps = available_storage_continuation(&sys, 0.0, &x, &[0.5, 1.0, 2.0], 1e-10).unwrap();
        for w in steps.windows(2) {
            prop_assert!(w[1].value >= w[0].value - 1e-10 * (1.0 + w[0].value.abs()),
                "{} then {}", w[0].value, w[1].value);
        }
    }

    /// Upper blocks of the Gram matrix are `h·B(tⱼ)ᴴΦ(tᵢ, tⱼ)ᴴC(tᵢ)ᴴ`.
    #[test]
    fn popov_gram_is_self_adjoint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(1..=3), r.gen_range(1..=2));
        let sys = random_system(&mut r, n, m, false);
        let gram = popov_gram(&sys, 0.0, 1.0, 12, 1e-11).unwrap();
        let g = gram.matrix.matrix();
        prop_assert!(norm2(&(g - g.adjoint())) <= 1e-12 * (1.0 + norm2(g)));
        for i in 0..gram.cells() {
            for j in 0..i {
                let (ti, tj) = (gram.grid[i], gram.grid[j]);
                let phi = state_transition(&sys, ti, tj, 1e-11).unwrap();
                let expect = (sys.c().eval(ti).unwrap() * phi * sys.b().eval(tj).unwrap()).adjoint()
                    * C64::new(gram.h, 0.0);
                let blk = g.view((j * m, i * m), (m, m)).into_owned();
                prop_assert!(norm2(&(&blk - &expect)) <= 1e-8 * (1.0 + norm2(&expect)));
            }
        }
    }

    /// The rocket keeps its KYP solution under any well-conditioned state
    /// change, with `Q̃ = ZᴴQZ`.
    #[test]
    fn rocket_kyp_survives_state_changes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rocket = rocket_system(&RocketParams::new(TimeExpr::parse("2 - t").unwrap(), Domain::new(0.0, 1.0))).unwrap();
        let z = MatrixFunction::identity(2).scale(C64::new(2.0, 0.0)).add(&matrix(&mut r, 2, 2, 0.2, false)).unwrap();
        let tr = Transform::State { z: z.clone() };
        let g = grid(0.0, 1.0, 21);
        let sys_t = transform_system(&rocket.sys, &tr, &g, 1e-10).unwrap();
        let q_t = transform_storage(&rocket.q, &tr).unwrap();
        prop_assert!(kyp_check(&sys_t, &q_t, &g, 1e-9).unwrap().holds);
        for &t in &g {
            let zt = z.eval(t).unwrap();
            prop_assert!(rel(&q_t.q().eval(t).unwrap(), &(zt.adjoint() * rocket.q.q().eval(t).unwrap() * &zt)) <= 1e-12);
        }
    }
}

/// The trapezoid power balance converges at second order for random
/// representations.
#[test]
fn power_balance_converges_at_second_order() {
    for seed in 0..4 {
        let mut r = rng(900 + seed);
        let shape = PhShape::random(&mut r);
        let ph = random_ph(&mut r, shape);
        let sys = ph.assemble_unchecked().unwrap();
        let x0 = vector(&mut r, shape.n, shape.complex);
        let u = input(&mut r, shape.m);
        let res: Vec<f64> = [41, 81, 161]
            .iter()
            .map(|&nodes| {
                let traj = simulate(&sys, 0.0, &x0, &u, &grid(PH_DOMAIN.0, PH_DOMAIN.1, nodes), 1e-12).unwrap();
                power_balance_residual(&ph, &traj).unwrap().total_residual.abs()
            })
            .collect();
        // near-cancelling residuals carry no order information
        if res[0] < 1e-9 {
            continue;
        }
        for w in res.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..5.5).contains(&ratio), "seed {seed}: residuals {res:?}");
        }
    }
}
