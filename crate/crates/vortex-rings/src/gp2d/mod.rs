//! Two-dimensional GP minimization on the unit disc, vortex detection and
//! vorticity measures.

mod flow;
mod grid;
mod measures;
mod vorticity;

pub use flow::{
    check_alignment, minimize_gp, minimize_gp_capped, normalize, seed_field, GpEnergy, GpFunctional, GpOptions, Preset,
    WaveFunction,
};
pub use grid::{polar, DiscGrid, MIN_ANGULAR};
pub use measures::{
    annulus_energy, cell_diagnostics, decoupling_check, default_alpha, reduced_energy, ring_measure, ring_statistics,
    vorticity_comparison, weighted_dual_norm, Atom, CellReport, DecouplingReport, Dictionary, DualNorm, RadialBump,
    ReducedEnergy, RingStatistics, VorticityComparison,
};
pub use vorticity::{
    detect_vortices, intrinsic_vorticity, reduced_field, wrap, Plaquette, ReducedField, Vortex, VorticityData,
    VorticityField,
};
