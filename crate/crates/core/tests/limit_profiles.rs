use std::f64::consts::PI;

use sis_atlas::asymptotics::*;
use sis_atlas::curves::{LogisticScan, ScanOptions};
use sis_atlas::spectral::principal_pair;
use sis_atlas::{AtlasError, CoefficientSet, Grid};

/// Two-mode rates whose `d_S = 0` curve dips below its tail value at an
/// interior `l`, so both branches of the limit problem exist for `R0`
/// between the dip and the tail.
fn two_mode_scan(n: usize) -> LogisticScan {
    let g = Grid::new(1.0, n).unwrap();
    let beta = g.sample(|x| 1.0 + 0.9 * (PI * x).cos());
    let gamma = g.sample(|x| {
        (1.0 + 0.9 * (PI * x).cos()) * (1.0 + 0.05 * (PI * x).cos() + 0.6 * (2.0 * PI * x).cos())
    });
    let c = CoefficientSet::new(g, beta, gamma, 1.0).unwrap();
    let e = principal_pair(&c).unwrap();
    let opts = ScanOptions {
        points_per_decade: 100,
        ..ScanOptions::default()
    };
    LogisticScan::new(&c, &e, opts).unwrap()
}

#[test]
fn both_branches_solve_the_nonlocal_problem() {
    let mut s = two_mode_scan(201);
    let r0 = 0.95;
    assert!(r0 < s.tail_limit());
    let low = solve_nonlocal(&mut s, r0, Branch::Low).unwrap();
    let high = solve_nonlocal(&mut s, r0, Branch::High).unwrap();
    for p in [&low, &high] {
        assert!(p.residual.unwrap() < 1e-8, "{:?}", p.residual);
        assert!(p.cross_check.unwrap() <= 1e-7, "{:?}", p.cross_check);
        let v = limit_curve_value(&s, p).unwrap().unwrap();
        assert!((v - r0).abs() < 1e-9);
    }
    assert!(low.l.unwrap() < high.l.unwrap());
    let (ul, uh) = (low.u_star.unwrap(), high.u_star.unwrap());
    assert!(ul.iter().zip(uh.iter()).all(|(a, b)| a < b));
}

#[test]
fn branch_rejections() {
    let mut s = two_mode_scan(101);
    let tail = s.tail_limit();
    let high = solve_nonlocal(&mut s, 0.5 * (tail + 1.0), Branch::High).unwrap_err();
    assert!(matches!(high, AtlasError::Domain(_)), "{high}");
    assert!(matches!(
        solve_nonlocal(&mut s, 1.0, Branch::Low),
        Err(AtlasError::Domain(_))
    ));
    assert!(matches!(
        solve_nonlocal(&mut s, 0.5, Branch::Low),
        Err(AtlasError::Domain(_))
    ));
    assert!(solve_nonlocal(&mut s, -1.0, Branch::Low)
        .unwrap_err()
        .is_config());
}

#[test]
fn scaling_with_two_nonlocal_branches() {
    let mut s = two_mode_scan(201);
    let d_s: Vec<f64> = (0..4).map(|k| 1e-6 / 2f64.powi(k)).collect();
    let rep = verify_scaling(&mut s, 0.95, &d_s).unwrap();
    assert_eq!(rep.regime, ScalingRegime::BothNonlocal);
    assert!(rep.pass, "{rep:?}");
    assert!(rep.monotone_roots);
}
