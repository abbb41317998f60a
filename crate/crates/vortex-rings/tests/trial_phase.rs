use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use vortex_rings::cost::cost_profile;
use vortex_rings::electro::{ring_energy, WeightField};
use vortex_rings::giant_vortex::{optimal_winding, GiantVortexState, RadialGrid};
use vortex_rings::gp2d::{DiscGrid, GpFunctional};
use vortex_rings::params::{regime_from_omega1, Regime};
use vortex_rings::tf::{annulus_geometry, tf_profile, AnnulusGeometry, TFProfile};
use vortex_rings::trial::*;

struct Setup {
    r: Regime,
    tf: TFProfile,
    geo: AnnulusGeometry,
    state: GiantVortexState,
    grid: DiscGrid,
    r_star: f64,
    h_star: f64,
    f_star: f64,
    i_star: f64,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let r = regime_from_omega1(0.05, 0.04).unwrap();
        let tf = tf_profile(&r).unwrap();
        let geo = annulus_geometry(&r, &tf).unwrap();
        let rg = RadialGrid::new(geo.r_less, 256).unwrap();
        let (_, state) = optimal_winding(&r, &rg).unwrap();
        let cp = cost_profile(&state).unwrap();
        let r_star = cp.r_star().unwrap();
        let w = WeightField::from_state(&state).unwrap();
        let i_star = ring_energy(&w, r_star, geo.r_less).unwrap();
        let grid = DiscGrid::for_annulus(&rg, 1024, None).unwrap();
        Setup { r, tf, geo, h_star: cp.h_star().unwrap(), f_star: cp.f_at_rstar.unwrap(), state, grid, r_star, i_star }
    })
}

struct Built {
    cfg: VortexConfiguration,
    vort: RegularizedVorticity,
    rho: ModifiedDensity,
    phase: PhaseField,
}

fn built(n_cells: usize) -> Built {
    let s = setup();
    let cfg = build_configuration(&s.r, s.r_star, n_cells, 1, s.geo.r_less).unwrap();
    let vort = regularized_vorticity(&cfg, &s.grid).unwrap();
    let rho = modified_density(&s.r, &s.state, &s.tf, &s.geo).unwrap();
    let phase = phase_field(&vort, &rho, &s.grid).unwrap();
    Built { cfg, vort, rho, phase }
}

fn four() -> &'static Built {
    static B: OnceLock<Built> = OnceLock::new();
    B.get_or_init(|| built(4))
}

#[test]
fn no_vorticity_gives_trivial_phase() {
    let s = setup();
    let vort = RegularizedVorticity::empty(&s.grid);
    let rho = modified_density(&s.r, &s.state, &s.tf, &s.geo).unwrap();
    let ph = phase_field(&vort, &rho, &s.grid).unwrap();
    assert!(ph.h_bar.iter().all(|v| v.abs() < 1e-12));
    assert!(ph.kappa.abs() < 1e-12);
    assert!(ph.phase.iter().all(|z| (z.re - 1.0).abs() < 1e-12));
}

#[test]
fn cores_carry_unit_mass_and_winding() {
    let b = four();
    let s = setup();
    assert_eq!(b.cfg.count(), 4);
    assert!((b.vort.total() - 8.0 * PI).abs() < 1e-9);
    for m in &b.vort.raw_masses {
        assert!((m - 2.0 * PI).abs() < 0.05 * 2.0 * PI, "raw core mass {m}");
    }
    let trial = assemble_trial(&s.r, &s.state, &b.cfg, &b.phase, &s.geo, &s.grid).unwrap();
    assert_eq!(trial.core_windings, vec![1; 4]);
    assert!((GpFunctional::new(&s.r, &s.grid).mass(&trial.psi) - 1.0).abs() < 1e-8);
    let net = b.phase.outer_circulation - b.phase.inner_circulation;
    assert!((net - 8.0 * PI).abs() < 0.01 * 8.0 * PI, "net circulation {net}");
    assert!((b.phase.outer_circulation / (2.0 * PI)).fract().abs() < 1e-6 || (b.phase.outer_circulation / (2.0 * PI)).fract().abs() > 1.0 - 1e-6);
}

#[test]
fn vorticity_is_reflection_symmetric_per_cell() {
    let d = four().vort.reflection_defect(&four().cfg.cells).unwrap();
    assert!(d < 1e-12, "reflection defect {d}");
}

#[test]
fn neumann_cells_reproduce_the_global_solve() {
    let b = four();
    let rep = cell_splitting_check(&b.vort, &b.phase, &b.rho, &b.cfg.cells, &setup().grid).unwrap();
    assert!(rep.relative_gap < 0.02, "{rep:?}");
}

#[test]
fn under_resolved_core_is_rejected() {
    let s = setup();
    let coarse = DiscGrid::for_annulus(&s.state.grid, 256, None).unwrap();
    let cfg = build_configuration(&s.r, s.r_star, 1, 1, s.geo.r_less).unwrap();
    assert!(matches!(regularized_vorticity(&cfg, &coarse), Err(vortex_rings::error::Error::Resolution(_))));
}

#[test]
fn trial_energy_is_finite_and_reported() {
    let s = setup();
    let inp = TrialInputs {
        regime: s.r,
        state: &s.state,
        tf: &s.tf,
        geo: s.geo,
        r_star: s.r_star,
        h_star: s.h_star,
        f_star: s.f_star,
        i_star: s.i_star,
        n_cells: 1,
        per_cell: 1,
    };
    let (trial, rep) = build_trial(&inp, &s.grid).unwrap();
    assert_eq!(trial.core_windings, vec![1]);
    assert!(rep.energy.value.is_finite());
    assert!(rep.energy.value > s.state.energy - 1.0);
    assert!(rep.decoupling.identity_defect.abs() < 1e-2 * rep.decoupling.reduced.value.abs().max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loops_enclose_their_load(a_lo in 1usize..150, height in 0usize..40, j_lo in -300i64..300, width in 0i64..200) {
        let b = four();
        let a_hi = (a_lo + height).min(b.phase.n_rows - 2);
        let j_hi = j_lo + width;
        let n = b.phase.n_theta as i64;
        let mut enclosed = 0.0;
        for a in a_lo..=a_hi {
            for j in j_lo..=j_hi {
                enclosed += b.vort.loads[a * b.phase.n_theta + j.rem_euclid(n) as usize];
            }
        }
        let c = box_circulation(&b.phase, &b.rho, &setup().grid, (a_lo, a_hi), (j_lo, j_hi));
        prop_assert!((c - enclosed).abs() < 1e-8 * (1.0 + enclosed.abs()), "{} vs {}", c, enclosed);
    }

    #[test]
    fn placements_are_evenly_spaced(n in 1usize..12, m in 1usize..4) {
        let s = setup();
        if let Ok(c) = build_configuration(&s.r, s.r_star, n, m, s.geo.r_less) {
            let k = c.count();
            for q in 0..k {
                let gap = (c.angles[(q + 1) % k] - c.angles[q]).rem_euclid(2.0 * PI);
                let want = if k == 1 { 0.0 } else { 2.0 * PI / k as f64 };
                prop_assert!((gap - want).abs() < 1e-10);
            }
        }
    }
}
