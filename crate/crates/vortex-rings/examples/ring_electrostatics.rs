//! Weighted electrostatics of the vortex ring: energy of the uniform ring, the optimal
//! vortex number, a 2D check against the radial formula and a cell Green function.
//!
//! cargo run --release --example ring_electrostatics

use std::f64::consts::PI;

use vortex_rings::cost::cost_profile;
use vortex_rings::electro::*;
use vortex_rings::giant_vortex::{optimal_winding, RadialGrid};
use vortex_rings::params::regime_from_omega1;
use vortex_rings::tf::{annulus_geometry, tf_profile};

fn main() -> vortex_rings::error::Result<()> {
    let r = regime_from_omega1(0.03, 0.05)?;
    let tf = tf_profile(&r)?;
    let geo = annulus_geometry(&r, &tf)?;
    let (_, s) = optimal_winding(&r, &RadialGrid::new(geo.r_less, 512)?)?;
    let cp = cost_profile(&s)?;
    let (rs, h) = (cp.r_star()?, cp.h_star()?);
    let w = WeightField::from_state(&s)?;
    let i_star = ring_energy(&w, rs, geo.r_less)?;
    let n = optimal_vortex_number(&r, h, i_star)?;
    println!("R_* = {rs:.4}  H(R_*) = {h:.4}  I_* = {i_star:.6}");
    println!("vortex number {:.3} -> {} cells x {} per cell", n.target, n.count.cells, n.count.per_cell);
    let re = renormalized_energy(-h / (2.0 * i_star), h, i_star)?;
    println!("ring energy at the optimal mass: {:.5} (minimum {:.5})", re.value, re.min_value);

    let grid = PolarGrid::annulus(geo.r_less, 1.0, 128, 256)?;
    let src = ring_source(&grid, rs, 1.0, |_| 1.0)?;
    let p = solve_poisson2d(&w, &src, &grid)?;
    let radial = radial_ring_potential(&w, rs, geo.r_less)?;
    println!("2D vs radial potential, relative L2: {:.3e}", compare_with_radial(&p, &w, &radial));
    println!("2D energy {:.6} vs radial {:.6}", electro_energy(&p, &w), i_star);

    let m = ring_minimality_check(&w, rs, &grid, 8, 7, 0.01)?;
    println!("perturbed rings: worst excess {:+.3e}, violations {}", m.worst_excess, m.violations);

    let cells = n.count.cells.max(1);
    let sector = PolarGrid::sector(geo.r_less, 1.0, 96, 0.0, 2.0 * PI / cells as f64, 96)?;
    let g = green_function_cell(&sector, &w, (rs, PI / cells as f64))?;
    println!("cell Green function log slope {:.4} vs rho(R_*)/(2 pi) = {:.4}", g.log_slope(3..=10), w.eval(rs) / (2.0 * PI));
    Ok(())
}
