//! Cost of a unit vortex across the annulus, and the ring radius where it is smallest.
//!
//! cargo run --release --example vortex_cost -- 0.03 0.05

use vortex_rings::cost::{cost_profile, ring_radius};
use vortex_rings::giant_vortex::{optimal_winding, RadialGrid};
use vortex_rings::params::regime_from_omega1;
use vortex_rings::tf::{annulus_geometry, tf_profile};

fn main() -> vortex_rings::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (eps, om1) = (args.first().copied().unwrap_or(0.03), args.get(1).copied().unwrap_or(0.05));
    let r = regime_from_omega1(eps, om1)?;
    let tf = tf_profile(&r)?;
    let geo = annulus_geometry(&r, &tf)?;
    let (_, s) = optimal_winding(&r, &RadialGrid::new(geo.r_less, 512)?)?;
    let cp = cost_profile(&s)?;
    match ring_radius(&r) {
        Ok(l) => println!("ring radius R_* = {:.5} (z1 {:.4}, z2 {:.4}, k(z2) {:.5})", l.r_star, l.z1, l.z2, l.k_at_z2),
        Err(e) => println!("no ring: {e}"),
    }
    if let (Ok(h), Some(f)) = (cp.h_star(), cp.f_at_rstar) {
        println!("H(R_*) = {h:.5}, F(R_*) = {f:.5}, argmin H on the grid = {:.5}", cp.argmin_h());
    }
    println!("\n     r          F          H       H_TF");
    for k in (0..cp.r.len()).step_by(cp.r.len() / 16) {
        println!("  {:.4}  {:9.4}  {:9.4}  {:9.4}", cp.r[k], cp.f[k], cp.h[k], cp.h_tf[k]);
    }
    Ok(())
}
