//! Builds a vortex-ring trial state and compares its energy terms with the ring predictions.
//!
//! cargo run --release --example trial_state -- 0.03 0.05 2304

use vortex_rings::cli::{Chain, ExperimentConfig};
use vortex_rings::trial::build_trial;

fn main() -> vortex_rings::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = ExperimentConfig {
        epsilon: args.first().copied().unwrap_or(0.03),
        omega1: Some(args.get(1).copied().unwrap_or(0.05)),
        grid_theta: args.get(2).map_or(2304, |v| *v as usize),
        ..ExperimentConfig::default()
    };
    let chain = Chain::build(&cfg)?;
    let grid = chain.disc_grid(cfg.grid_theta)?;
    let (trial, rep) = build_trial(&chain.trial_inputs(&cfg)?, &grid)?;
    println!("{} cells x {} vortices, core radius {:.4e} ({:.1} cells)", rep.n_cells, rep.per_cell, rep.core, rep.core_cells);
    println!("core windings {:?}, outer circulation {:.4}, inner {:.4}, kappa {:.4}", trial.core_windings, rep.outer_circulation, rep.inner_circulation, rep.kappa);
    println!("c^2 - 1 = {:.3e}, mass {:.12}", rep.c_squared - 1.0, rep.mass);
    println!("kinetic  {:9.4} vs {:9.4}  ratio {:.3}", rep.phase_kinetic, rep.kinetic_prediction, rep.kinetic_ratio);
    println!("rotation {:9.4} vs {:9.4}  ratio {:.3}", rep.rotation, rep.rotation_prediction, rep.rotation_ratio);
    println!("GP energy {:.4} +- {:.2e}", rep.energy.value, rep.energy.error_bar);
    println!("giant vortex {:.4}, quadratic bound {:.4}, at the integer count {:.4}", chain.state.energy, rep.bound.quadratic, rep.bound.at_count);
    println!("reduced energy {:.4}, decoupling defect {:.2e}", rep.decoupling.reduced.value, rep.decoupling.identity_defect);
    if let Some(c) = rep.cell_split {
        println!("cell splitting: global {:.6} vs sum over cells {:.6}", c.global_energy, c.cell_energy_sum);
    }
    Ok(())
}
