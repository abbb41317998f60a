//! Thomas-Fermi density and the working radii of the annulus for a few speeds.
//!
//! cargo run --release --example thomas_fermi

use vortex_rings::params::{critical_speed, regime_from_omega1, validate_regime};
use vortex_rings::tf::{annulus_geometry, tf_profile};

fn main() -> vortex_rings::error::Result<()> {
    for eps in [0.05, 0.03, 0.02] {
        println!("eps = {eps}: third critical speed {:.3}", critical_speed(eps)?);
        for om1 in [-0.05, 0.02, 0.05, 0.1] {
            let r = regime_from_omega1(eps, om1)?;
            match tf_profile(&r) {
                Ok(tf) => {
                    let g = annulus_geometry(&r, &tf)?;
                    println!(
                        "  omega1 {om1:>5}: Omega {:8.3}  R_h {:.4}  R_< {:.4}  R_bulk {:.4}  E_TF {:10.3}  mu_TF {:10.3}",
                        r.omega, tf.r_h, g.r_less, g.r_bulk, tf.e_tf, tf.mu_tf
                    );
                    for n in validate_regime(&r).notes {
                        println!("      note: {n}");
                    }
                }
                Err(e) => println!("  omega1 {om1:>5}: {e}"),
            }
        }
    }
    Ok(())
}
