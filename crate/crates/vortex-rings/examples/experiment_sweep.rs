//! Experiment configuration in TOML and a cheap sweep over epsilon and omega1.
//!
//! cargo run --release --example experiment_sweep

use vortex_rings::cli::{run, ExperimentConfig};

const CONFIG: &str = r#"
pipeline = "sweep"
epsilon = 0.05
omega1 = 0.04
grid_r = 256
grid_theta = 1024
seed = 1
out = "target/sweep-example"
noise = 0.05
radial_tol = 1e-10
gp_max_iter = 4000
gp_tol_energy = 1e-11
gp_tol_residual = 1e-4
workers = 3

[sweep]
epsilon = [0.05, 0.03, 0.02]
omega1 = [-0.05, 0.02, 0.05]
point = "electro"
"#;

fn main() -> vortex_rings::error::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    run(&cfg)?;
    let table = std::fs::read_to_string(cfg.out.join("sweep.csv"))?;
    print!("{table}");
    println!("records in {}", cfg.out.display());
    Ok(())
}
