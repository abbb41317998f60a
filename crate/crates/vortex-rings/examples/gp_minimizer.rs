//! Minimizes the GP energy on the disc from a noisy giant vortex and lists the bulk vortices.
//!
//! cargo run --release --example gp_minimizer -- 0.05 0.04 1024

use vortex_rings::cli::{run_gp2d, Chain, ExperimentConfig};

fn main() -> vortex_rings::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = ExperimentConfig {
        epsilon: args.first().copied().unwrap_or(0.05),
        omega1: Some(args.get(1).copied().unwrap_or(0.04)),
        grid_theta: args.get(2).map_or(1024, |v| *v as usize),
        ..ExperimentConfig::default()
    };
    let chain = Chain::build(&cfg)?;
    let grid = chain.disc_grid(cfg.grid_theta)?;
    let (wf, rec) = run_gp2d(&cfg, &chain, &grid)?;
    println!("converged {} after {} steps, residual {:.2e}", rec.converged, wf.iterations, wf.residual);
    println!("E = {:.6} (giant vortex {:.6}), mu = {:.4}", wf.energy.total, chain.state.energy, wf.mu);
    println!("bulk r in [{:.4}, 1): {} vortices, {} low confidence", rec.region.0, rec.vortices.len(), rec.low_confidence);
    for v in &rec.vortices {
        println!("  r {:.4}  theta {:+.4}  degree {:+}  |u|min {:.3}", v.r, v.theta, v.degree, v.min_modulus);
    }
    let s = &rec.ring;
    println!("mean radius {:.4} +- {:.4}, gap ratio {:?}", s.mean_radius, s.radius_spread, s.gap_ratio);
    if let Some(e) = &chain.ring {
        println!("R_* = {:.4}, predicted number {:.2}", e.r_star, e.vortex_number.map_or(0.0, |n| n.target));
    }
    if let Some(c) = &rec.comparison {
        println!("dual norms: intrinsic {:.3e}, explicit {:.3e}, reference {:.3e}", c.intrinsic, c.explicit, c.reference);
    }
    let d = &rec.decoupling;
    println!("decoupling: reduced energy {:.5}, residual {:.2e} (bar {:.2e})", d.reduced.value, d.residual, d.error_bar);
    println!("bad cells {} / {}", rec.cells.bad, rec.cells.n_cells);
    Ok(())
}
