mod common;

use vortex_rings::giant_vortex::{initial_guess, solve_profile, RadialGrid};
use vortex_rings::params::regime_from_omega1;
use vortex_rings::tf::{annulus_geometry, tf_profile};

#[test]
fn flow_matches_newton_without_winding() {
    let r = regime_from_omega1(0.05, 0.0).unwrap();
    let tf = tf_profile(&r).unwrap();
    let geo = annulus_geometry(&r, &tf).unwrap();
    let grid = RadialGrid::new(geo.r_less, 512).unwrap();
    let s = solve_profile(&r, r.omega_floor(), &grid).unwrap();
    let span = 1.0 - geo.r_less;
    let g0: Vec<f64> = grid.nodes.iter().map(|x| 1.0 + 0.3 * (std::f64::consts::PI * (x - geo.r_less) / span).cos()).collect();
    let n = common::newton_radial(&grid.nodes, r.epsilon, r.omega, 0, &g0);
    assert!(n.residual < 1e-9, "newton residual {}", n.residual);
    assert!((s.energy - n.energy).abs() <= 1e-6 * n.energy.abs());
    assert!((s.mu_hat - n.mu).abs() <= 1e-6 * n.mu.abs());
    // without winding the minimizer is the constant profile
    let area = std::f64::consts::PI * (1.0 - geo.r_less * geo.r_less);
    assert!((n.energy - 1.0 / (r.epsilon * r.epsilon * area)).abs() <= 1e-9 * n.energy);
}

#[test]
fn flow_matches_newton_at_optimal_winding() {
    let r = regime_from_omega1(0.03, 0.05).unwrap();
    let tf = tf_profile(&r).unwrap();
    let geo = annulus_geometry(&r, &tf).unwrap();
    let grid = RadialGrid::new(geo.r_less, 600).unwrap();
    let s = solve_profile(&r, 12, &grid).unwrap();
    let n = common::newton_radial(&grid.nodes, r.epsilon, r.omega, s.winding, &initial_guess(&tf, &grid));
    assert!((s.energy - n.energy).abs() <= 1e-6 * n.energy.abs());
}

#[test]
fn grid_doubling_drift_is_small() {
    let r = regime_from_omega1(0.05, 0.0).unwrap();
    let tf = tf_profile(&r).unwrap();
    let geo = annulus_geometry(&r, &tf).unwrap();
    let grid = RadialGrid::new(geo.r_less, 1024).unwrap();
    let a = 8;
    let e1 = solve_profile(&r, a, &grid).unwrap().energy;
    let e2 = solve_profile(&r, a, &grid.refined()).unwrap().energy;
    assert!((e1 - e2).abs() <= 1e-5 * e2.abs(), "drift {}", (e1 - e2).abs() / e2.abs());
}
