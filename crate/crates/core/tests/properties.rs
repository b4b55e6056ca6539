use std::f64::consts::PI;

use proptest::prelude::*;
use sis_atlas::dynamics::{step, SimState};
use sis_atlas::logistic::{solve_u, solve_v};
use sis_atlas::spectral::principal_pair;
use sis_atlas::{CoefficientSet, Grid};

fn model(a: f64, b: f64, g0: f64, d_i: f64) -> CoefficientSet {
    let g = Grid::new(1.0, 101).unwrap();
    let beta = g.sample(|x| 1.0 + a * (PI * x).cos() + b * (2.0 * PI * x).cos());
    let gamma = g.sample(|x| g0 * (1.0 + 0.3 * (3.0 * PI * x).cos()));
    CoefficientSet::new(g, beta, gamma, d_i).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_annihilates_quadrature(vals in prop::collection::vec(-10.0f64..10.0, 64)) {
        let g = Grid::new(2.0, 64).unwrap();
        let lap = g.laplacian().apply(&vals);
        let scale = vals.iter().map(|v| v.abs()).fold(1.0, f64::max) / (g.spacing() * g.spacing());
        prop_assert!(g.integrate(&lap).abs() <= 1e-12 * scale);
    }

    #[test]
    fn r1_between_mean_ratio_and_max_ratio(a in -0.6f64..0.6, b in -0.3f64..0.3, g0 in 0.5f64..2.0, d_i in 0.05f64..5.0) {
        prop_assume!(a.abs() + b.abs() > 0.05);
        let c = model(a, b, g0, d_i);
        let e = principal_pair(&c).unwrap();
        let g = &c.grid;
        let mean_ratio = g.integrate(&c.beta) / g.integrate(&c.gamma);
        let max_ratio = c.beta_over_gamma().max();
        prop_assert!(e.r1 > mean_ratio && e.r1 < max_ratio, "{} not in ({mean_ratio}, {max_ratio})", e.r1);
        prop_assert!(e.residual(&c) < 1e-8);
    }

    #[test]
    fn logistic_profile_bounded_and_increasing(a in -0.6f64..0.6, g0 in 0.5f64..2.0, d_i in 0.1f64..3.0, ratio in 1.01f64..50.0) {
        let c = model(a, 0.0, g0, d_i);
        let e = principal_pair(&c).unwrap();
        let l = ratio * e.l_star;
        let u = solve_u(&c, &e, l, None).unwrap();
        prop_assert!(u.iter().all(|&x| x > 0.0 && x < 1.0 / d_i));
        let v = solve_v(&c, l, &u).unwrap();
        prop_assert!(v.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn imex_step_conserves_mass_and_positivity(
        s in prop::collection::vec(0.0f64..3.0, 101),
        i in prop::collection::vec(0.0f64..3.0, 101),
        d_s in 1e-4f64..2.0,
        dt in 1e-3f64..2.0,
    ) {
        let c = model(0.4, 0.1, 1.0, 0.5).with_d_s(d_s).unwrap();
        let st = SimState::new(&c.grid, c.grid.field(s).unwrap(), c.grid.field(i).unwrap(), dt).unwrap();
        prop_assume!(st.mass > 0.0);
        let next = step(&st, &c).unwrap();
        prop_assert!(next.s.iter().chain(next.i.iter()).all(|&v| v >= 0.0));
        prop_assert!((next.mass - st.mass).abs() <= 1e-12 * st.mass);
        prop_assert!(next.dt <= dt);
    }
}
