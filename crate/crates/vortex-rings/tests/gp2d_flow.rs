mod common;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortex_rings::gp2d::{minimize_gp, DiscGrid, GpFunctional, GpOptions};
use vortex_rings::params::Regime;

fn still(epsilon: f64) -> Regime {
    Regime { epsilon, omega: 0.0, omega1: 0.0, omega0: None, log_eps: -epsilon.ln() }
}

fn bumpy(grid: &DiscGrid, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i in 0..grid.n_r() {
        let r = grid.r(i);
        for j in 0..grid.n_theta {
            let t = grid.theta(j);
            let amp = 1.0 + 0.5 * (3.0 * r).cos() + 0.2 * r * (2.0 * t).cos();
            psi[grid.index(i, j)] = Complex64::from_polar(amp, 0.1 * rng.gen_range(-1.0..1.0));
        }
    }
    psi
}

#[test]
fn still_disc_matches_radial_newton() {
    let r = still(0.3);
    let grid = DiscGrid::uniform(65, 256).unwrap();
    let w = minimize_gp(&r, &grid, bumpy(&grid, 3), &GpOptions::default()).unwrap();
    let g0: Vec<f64> = grid.radial.nodes.iter().map(|x| 1.0 + 0.5 * (3.0 * x).cos()).collect();
    let n = common::newton_radial(&grid.radial.nodes, r.epsilon, 0.0, 0, &g0);
    assert!((w.energy.total - n.energy).abs() <= 1e-4 * n.energy.abs(), "{} vs {}", w.energy.total, n.energy);
    assert!((w.mass - 1.0).abs() < 1e-10);
    assert!(w.energy_trace.windows(2).all(|p| p[1] <= p[0] + 1e-12 * p[0].abs()));
    // real positive up to a global phase
    let phase = w.psi[grid.index(grid.n_r() - 1, 0)].arg();
    let rot = Complex64::from_polar(1.0, -phase);
    for (k, v) in w.psi.iter().enumerate() {
        let z = v * rot;
        let i = k / grid.n_theta;
        assert!(z.re > 0.0 && z.im.abs() < 1e-3 * z.re);
        assert!((z.re - n.g[i]).abs() < 1e-3 * n.g[i]);
    }
}

#[test]
fn energy_is_gauge_invariant() {
    let r = Regime { omega: 4.0, ..still(0.3) };
    let grid = DiscGrid::uniform(33, 256).unwrap();
    let f = GpFunctional::new(&r, &grid);
    let psi = bumpy(&grid, 5);
    let e0 = f.energy(&psi).total;
    for alpha in [0.3, 1.7, -2.9] {
        let rot = Complex64::from_polar(1.0, alpha);
        let turned: Vec<Complex64> = psi.iter().map(|v| v * rot).collect();
        assert!((f.energy(&turned).total - e0).abs() <= 1e-12 * e0.abs());
    }
    let opts = GpOptions { tol_residual: 1e-5, ..GpOptions::default() };
    let a = minimize_gp(&r, &grid, psi.clone(), &opts).unwrap();
    let rot = Complex64::from_polar(1.0, 0.8);
    let b = minimize_gp(&r, &grid, psi.iter().map(|v| v * rot).collect(), &opts).unwrap();
    assert!((a.energy.total - b.energy.total).abs() <= 1e-10 * a.energy.total.abs());
}

#[test]
fn gradient_matches_finite_differences() {
    let r = Regime { omega: 6.0, ..still(0.2) };
    let grid = DiscGrid::uniform(40, 256).unwrap();
    let f = GpFunctional::new(&r, &grid);
    let psi = bumpy(&grid, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let mut eta: Vec<Complex64> = (0..grid.len())
            .map(|k| {
                let (i, j) = (k / grid.n_theta, k % grid.n_theta);
                let t = grid.theta(j);
                let m = rng.gen_range(1..6) as f64;
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * grid.r(i) * Complex64::from_polar(1.0, m * t)
            })
            .collect();
        // directions vanish at the pole
        eta[..grid.n_theta].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let h = 1e-5;
        let shift = |s: f64| -> f64 {
            let p: Vec<Complex64> = psi.iter().zip(&eta).map(|(a, b)| a + b * s).collect();
            f.energy(&p).total
        };
        let fd = (shift(h) - shift(-h)) / (2.0 * h);
        let an = f.directional_derivative(&psi, &eta);
        assert!((fd - an).abs() <= 1e-4 * an.abs().max(1.0), "fd {fd} vs {an}");
    }
}
