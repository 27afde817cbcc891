//! Finite-time quantum Otto engines on a two-level working medium.
//!
//! Natural units (`ħ = k_B = 1`) throughout. Qubit basis index 0 is `|↑⟩`
//! (energy `+ω/2`), index 1 is `|↓⟩`.

pub mod disorder;
pub mod engine;
pub mod error;
pub mod lindblad;
pub mod quantum;

pub use disorder::{
    averaged_efficiency_vs_time, disorder_averaged_efficiency, enumerate_realizations, find_t_s, DisorderDistribution,
    DisorderMode, DisorderedResult, ReachingTime, Realization, TsSearch,
};
pub use engine::{
    adiabatic_map, build_hamiltonians, efficiency_vs_time, ideal_efficiency, run_cycle, run_engine,
    transverse_efficiency_formula, CycleRecord, CycleSelector, EfficiencyPoint, Engine, EngineRun, EngineSpec,
    HamiltonianPair, Variant,
};
pub use error::{Error, Result};
pub use lindblad::{audit_trajectory, evolve, BathSpec, GeneratorOptions, InvariantReport, LindbladGenerator, Propagator, Trajectory};
pub use quantum::{thermal_state, CMatrix, DensityMatrix, C64};
