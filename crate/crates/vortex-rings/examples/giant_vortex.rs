//! Optimal winding and the radial giant-vortex profile.
//!
//! cargo run --release --example giant_vortex -- 0.03 0.05

use vortex_rings::giant_vortex::{decay_diagnostics, optimal_winding_scan, RadialGrid, SolverOptions};
use vortex_rings::params::regime_from_omega1;
use vortex_rings::tf::{annulus_geometry, tf_profile};

fn main() -> vortex_rings::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (eps, om1) = (args.first().copied().unwrap_or(0.03), args.get(1).copied().unwrap_or(0.05));
    let r = regime_from_omega1(eps, om1)?;
    let tf = tf_profile(&r)?;
    let geo = annulus_geometry(&r, &tf)?;
    let grid = RadialGrid::new(geo.r_less, 512)?;
    let (scan, s) = optimal_winding_scan(&r, &grid, &SolverOptions::default())?;
    println!("Omega = {:.4}, [Omega] = {}", r.omega, scan.omega);
    for (a, e) in &scan.energies {
        let mark = if *a == s.a { " <" } else { "" };
        println!("  a = {a:3}  E = {e:.8}{mark}");
    }
    println!("winding {} energy {:.8} mu {:.6} residual {:.2e} in {} steps", s.winding, s.energy, s.mu_hat, s.residual, s.iterations);
    println!("a * 3 sqrt(pi) eps / 2 = {:.4}", s.a as f64 * 3.0 * std::f64::consts::PI.sqrt() * eps / 2.0);
    let d = decay_diagnostics(&s, &tf);
    println!("bulk |g^2 - rho_TF|/rho_TF = {:.3e}, wall ratio {:.4}", d.bulk_relative_error, d.wall_ratio);
    println!("\n     r        g^2     rho_TF");
    for k in (0..grid.len()).step_by(grid.len() / 12) {
        let x = grid.nodes[k];
        println!("  {x:.4}  {:9.5}  {:9.5}", s.g[k] * s.g[k], tf.density(x));
    }
    Ok(())
}
