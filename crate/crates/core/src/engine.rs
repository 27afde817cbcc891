//! Four-stroke Otto cycle with finite-time isochoric strokes.
//!
//! A cycle starts at field `ω₁`:
//!
//! 1. isochoric heating: hot bath, Hamiltonian `H₁`, duration `t̃` (A → B)
//! 2. adiabatic compression `H₁ → H₂` (B → C)
//! 3. isochoric cooling: cold bath, Hamiltonian `H₂`, duration `t̃` (C → D)
//! 4. adiabatic expansion `H₂ → H₁` (D → E)
//!
//! Both endpoint Hamiltonians are multiples of one operator, so they commute
//! and the adiabatic strokes carry the state over unchanged; only the energy
//! bookkeeping sees the change of field.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{BathSpec, GeneratorOptions, LindbladGenerator, Propagator, DEFAULT_DT};
use crate::quantum::{
    commutator, expectation, identity, kron, magnetization, max_abs, partial_trace_aux, pauli, thermal_state,
    trace_distance, transverse_magnetization, CMatrix, DensityMatrix, Pauli, StateTolerance,
};

/// Joint tolerance (trace distance and efficiency change) for the limit cycle.
pub const LIMIT_CYCLE_TOLERANCE: f64 = 1e-6;

/// Stroke duration treated as "infinite" when an ideal efficiency has to be
/// simulated rather than written down.
pub const IDEAL_STROKE_TIME: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `H_j = ½ω_j σ_z`.
    Baseline,
    /// `H_j = ½ω_j σ_z + (ω_j/Λ) σ_x`.
    Transverse { big_lambda: f64 },
    /// System plus auxiliary qubit:
    /// `H_j = ½ω_j (σ_z⊗I + I⊗σ_z) + nω_j σ_x⊗σ_x`, bath on the system only.
    Auxiliary { n: f64 },
}

impl Variant {
    pub fn dim(&self) -> usize {
        match self {
            Variant::Auxiliary { .. } => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineSpec {
    pub omega1: f64,
    pub omega2: f64,
    pub hot: BathSpec,
    pub cold: BathSpec,
    /// Duration `t̃` of each isochoric stroke.
    pub stroke_time: f64,
    pub variant: Variant,
    /// Temperature of the Gibbs state (w.r.t. `H₂`) the first cycle starts from.
    pub initial_temperature: f64,
    pub dt: f64,
    pub generator: GeneratorOptions,
}

impl EngineSpec {
    pub fn new(omega1: f64, omega2: f64, hot_temperature: f64, cold_temperature: f64) -> Self {
        Self {
            omega1,
            omega2,
            hot: BathSpec::new(hot_temperature),
            cold: BathSpec::new(cold_temperature),
            stroke_time: 1.0,
            variant: Variant::Baseline,
            initial_temperature: cold_temperature,
            dt: DEFAULT_DT,
            generator: GeneratorOptions::default(),
        }
    }

    pub fn with_stroke_time(mut self, stroke_time: f64) -> Self {
        self.stroke_time = stroke_time;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_initial_temperature(mut self, temperature: f64) -> Self {
        self.initial_temperature = temperature;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_couplings(mut self, hot: f64, cold: f64) -> Self {
        self.hot.coupling = hot;
        self.cold.coupling = cold;
        self
    }

    pub fn with_disorder(mut self, hot: f64, cold: f64) -> Self {
        self.hot.disorder = hot;
        self.cold.disorder = cold;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega2 > 0.0) {
            return Err(Error::param("omega2", format!("must be positive, got {}", self.omega2)));
        }
        if !(self.omega1 > self.omega2) {
            return Err(Error::param(
                "omega1",
                format!("must exceed omega2 ({} <= {})", self.omega1, self.omega2),
            ));
        }
        self.hot.validate()?;
        self.cold.validate()?;
        if !(self.hot.temperature > self.cold.temperature) {
            return Err(Error::param(
                "hot temperature",
                format!(
                    "must exceed the cold temperature ({} <= {})",
                    self.hot.temperature, self.cold.temperature
                ),
            ));
        }
        let t0 = self.initial_temperature;
        if !(t0 >= self.cold.temperature && t0 < self.hot.temperature) {
            return Err(Error::param(
                "initial_temperature",
                format!(
                    "must lie in [{}, {}), got {t0}",
                    self.cold.temperature, self.hot.temperature
                ),
            ));
        }
        if !(self.stroke_time >= 0.0) || !self.stroke_time.is_finite() {
            return Err(Error::param("stroke_time", format!("must be non-negative, got {}", self.stroke_time)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        match self.variant {
            Variant::Baseline => {}
            Variant::Transverse { big_lambda } => {
                if !(big_lambda > 0.0) {
                    return Err(Error::param("transverse_lambda", format!("must be positive, got {big_lambda}")));
                }
            }
            Variant::Auxiliary { n } => {
                if !(0.0..=1.0).contains(&n) {
                    return Err(Error::param(
                        "n",
                        format!("must satisfy 0 <= n <= 1.0 (weak system-bath coupling), got {n}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `1 - ω₂/ω₁`.
    pub fn otto_efficiency(&self) -> f64 {
        1.0 - self.omega2 / self.omega1
    }
}

/// Endpoint Hamiltonians of the driving protocol plus the operators needed to
/// book-keep energies on the system qubit.
#[derive(Debug, Clone)]
pub struct HamiltonianPair {
    pub h1: CMatrix,
    pub h2: CMatrix,
    /// Hamiltonians used for heat and work (`½ω_j σ_z` for the auxiliary
    /// variant, otherwise equal to `h1`/`h2`).
    pub system_h1: CMatrix,
    pub system_h2: CMatrix,
    /// System operator coupled to the baths.
    pub coupling: CMatrix,
}

/// The operator `K` with `H_j = ω_j K`.
fn unit_hamiltonian(variant: Variant) -> Result<CMatrix> {
    let z = pauli(Pauli::Z);
    let x = pauli(Pauli::X);
    Ok(match variant {
        Variant::Baseline => z.scale(0.5),
        Variant::Transverse { big_lambda } => z.scale(0.5) + x.scale(1.0 / big_lambda),
        Variant::Auxiliary { n } => {
            let i2 = identity(2);
            (kron(&z, &i2)? + kron(&i2, &z)?).scale(0.5) + kron(&x, &x)?.scale(n)
        }
    })
}

pub fn build_hamiltonians(spec: &EngineSpec) -> Result<HamiltonianPair> {
    spec.validate()?;
    let unit = unit_hamiltonian(spec.variant)?;
    let h1 = unit.scale(spec.omega1);
    let h2 = unit.scale(spec.omega2);
    let norm = max_abs(&commutator(&h1, &h2));
    if norm > 1e-10 * (max_abs(&h1) * max_abs(&h2)).max(1.0) {
        return Err(Error::NonCommuting { norm });
    }
    let (system_h1, system_h2, coupling) = match spec.variant {
        Variant::Auxiliary { .. } => (
            pauli(Pauli::Z).scale(0.5 * spec.omega1),
            pauli(Pauli::Z).scale(0.5 * spec.omega2),
            kron(&pauli(Pauli::X), &identity(2))?,
        ),
        _ => (h1.clone(), h2.clone(), pauli(Pauli::X)),
    };
    Ok(HamiltonianPair {
        h1,
        h2,
        system_h1,
        system_h2,
        coupling,
    })
}

/// Ideal adiabatic stroke between commuting Hamiltonians. Populations in the
/// shared eigenbasis are carried over, so the returned state equals `rho`;
/// fails if the Hamiltonians do not commute or `rho` is not stationary
/// under `from`.
pub fn adiabatic_map(rho: &DensityMatrix, from: &CMatrix, to: &CMatrix) -> Result<DensityMatrix> {
    let scale = max_abs(from).max(max_abs(to)).max(1.0);
    let norm = max_abs(&commutator(from, to));
    if norm > 1e-10 * scale * scale {
        return Err(Error::NonCommuting { norm });
    }
    if rho.dim() != from.nrows() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: from.nrows(),
        });
    }
    let norm = max_abs(&commutator(rho.matrix(), from));
    if norm > 1e-8 * scale {
        return Err(Error::NotDiagonal { norm });
    }
    Ok(rho.clone())
}

/// Thermodynamic ledger of one cycle. Heats and works follow the engine sign
/// convention: `heat_hot > 0` is absorbed, `total_work() > 0` is delivered.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle_index: usize,
    pub heat_hot: f64,
    pub work_compression: f64,
    pub heat_cold: f64,
    pub work_expansion: f64,
    /// System magnetization at the start, after heating, after cooling.
    pub magnetization_start: f64,
    pub magnetization_heated: f64,
    pub magnetization_cooled: f64,
    /// `⟨½σ_x⟩` of the system at the start and after heating.
    pub transverse_start: f64,
    pub transverse_heated: f64,
    /// `W/Q₁`, or `None` when no heat is absorbed (not an engine).
    pub efficiency: Option<f64>,
    /// `Tr[H₁ ρ]` on the system at the start and end of the cycle.
    pub energy_start: f64,
    pub energy_end: f64,
    pub rho_start: DensityMatrix,
    pub rho_heated: DensityMatrix,
    pub rho_compressed: DensityMatrix,
    pub rho_cooled: DensityMatrix,
    pub rho_end: DensityMatrix,
}

impl CycleRecord {
    pub fn total_work(&self) -> f64 {
        self.work_compression + self.work_expansion
    }

    pub fn is_engine(&self) -> bool {
        self.heat_hot > 0.0
    }

    /// `Q₁ + Q₂ - W - ΔU`; zero up to rounding.
    pub fn first_law_residual(&self) -> f64 {
        self.heat_hot + self.heat_cold - self.total_work() - (self.energy_end - self.energy_start)
    }

    /// `(S₂ - S₃)/(S₂ - S₁) · η_ideal`, which equals `W/Q₁` for `H ∝ σ_z`.
    pub fn magnetization_efficiency(&self, ideal: f64) -> f64 {
        (self.magnetization_heated - self.magnetization_cooled)
            / (self.magnetization_heated - self.magnetization_start)
            * ideal
    }
}

/// A fully prepared engine: Hamiltonians, stroke generators and propagators.
#[derive(Debug, Clone)]
pub struct Engine {
    spec: EngineSpec,
    hamiltonians: HamiltonianPair,
    hot_generator: LindbladGenerator,
    cold_generator: LindbladGenerator,
    heating: Propagator,
    cooling: Propagator,
}

impl Engine {
    pub fn new(spec: &EngineSpec) -> Result<Self> {
        let hamiltonians = build_hamiltonians(spec)?;
        let hot_generator =
            LindbladGenerator::build(&hamiltonians.h1, &hamiltonians.coupling, &spec.hot, spec.generator)?;
        let cold_generator =
            LindbladGenerator::build(&hamiltonians.h2, &hamiltonians.coupling, &spec.cold, spec.generator)?;
        let heating = Propagator::new(&hot_generator, spec.stroke_time, spec.dt)?;
        let cooling = Propagator::new(&cold_generator, spec.stroke_time, spec.dt)?;
        Ok(Self {
            spec: *spec,
            hamiltonians,
            hot_generator,
            cold_generator,
            heating,
            cooling,
        })
    }

    pub fn spec(&self) -> &EngineSpec {
        &self.spec
    }

    pub fn hamiltonians(&self) -> &HamiltonianPair {
        &self.hamiltonians
    }

    pub fn hot_generator(&self) -> &LindbladGenerator {
        &self.hot_generator
    }

    pub fn cold_generator(&self) -> &LindbladGenerator {
        &self.cold_generator
    }

    /// Gibbs state of `H₂` at the configured initial temperature.
    pub fn initial_state(&self) -> Result<DensityMatrix> {
        thermal_state(&self.hamiltonians.h2, self.spec.initial_temperature)
    }

    /// System state used for the ledger. Rounding lets the trace drift by
    /// ~1e-11 over 10⁴ steps, which would otherwise land in the ground-state
    /// population and swamp heats as small as 1e-6, so it is divided out.
    fn reduce(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let system = match rho.dim() {
            4 => partial_trace_aux(rho)?,
            _ => rho.clone(),
        };
        let trace = system.matrix().trace().re;
        DensityMatrix::with_tolerance(system.into_matrix().unscale(trace), StateTolerance::EVOLVED)
    }

    pub fn cycle(&self, rho_start: &DensityMatrix, cycle_index: usize) -> Result<CycleRecord> {
        let hs = &self.hamiltonians;
        if rho_start.dim() != hs.h1.nrows() {
            return Err(Error::DimensionMismatch {
                left: rho_start.dim(),
                right: hs.h1.nrows(),
            });
        }
        let rho_heated = self.heating.apply(rho_start)?;
        let rho_compressed = adiabatic_map(&rho_heated, &hs.h1, &hs.h2)?;
        let rho_cooled = self.cooling.apply(&rho_compressed)?;
        let rho_end = adiabatic_map(&rho_cooled, &hs.h2, &hs.h1)?;

        let a = self.reduce(rho_start)?;
        let b = self.reduce(&rho_heated)?;
        let c = self.reduce(&rho_compressed)?;
        let d = self.reduce(&rho_cooled)?;
        let e = self.reduce(&rho_end)?;

        let (s1, s2) = (&hs.system_h1, &hs.system_h2);
        let energy_start = expectation(s1, &a)?;
        let energy_heated = expectation(s1, &b)?;
        let energy_compressed = expectation(s2, &c)?;
        let energy_cooled = expectation(s2, &d)?;
        let energy_end = expectation(s1, &e)?;

        let heat_hot = energy_heated - energy_start;
        let work_compression = energy_heated - energy_compressed;
        let heat_cold = energy_cooled - energy_compressed;
        let work_expansion = energy_cooled - energy_end;
        let efficiency = (heat_hot > 0.0).then(|| (work_compression + work_expansion) / heat_hot);

        Ok(CycleRecord {
            cycle_index,
            heat_hot,
            work_compression,
            heat_cold,
            work_expansion,
            magnetization_start: magnetization(&a)?,
            magnetization_heated: magnetization(&b)?,
            magnetization_cooled: magnetization(&d)?,
            transverse_start: transverse_magnetization(&a)?,
            transverse_heated: transverse_magnetization(&b)?,
            efficiency,
            energy_start,
            energy_end,
            rho_start: rho_start.clone(),
            rho_heated,
            rho_compressed,
            rho_cooled,
            rho_end,
        })
    }

    /// Runs `max_cycles` cycles from `rho0`, feeding each end state into the
    /// next cycle.
    pub fn run_from(&self, rho0: &DensityMatrix, max_cycles: usize) -> Result<EngineRun> {
        if max_cycles == 0 {
            return Err(Error::param("max_cycles", "must be at least 1"));
        }
        let mut cycles: Vec<CycleRecord> = Vec::with_capacity(max_cycles);
        let mut limit_cycle_index = None;
        let mut state = rho0.clone();
        for k in 1..=max_cycles {
            let record = self.cycle(&state, k)?;
            if limit_cycle_index.is_none() {
                if let Some(prev) = cycles.last() {
                    if converged(prev, &record) {
                        limit_cycle_index = Some(k);
                    }
                }
            }
            state = record.rho_end.clone();
            cycles.push(record);
        }
        Ok(EngineRun {
            spec: self.spec,
            cycles,
            limit_cycle_index,
        })
    }
}

fn converged(prev: &CycleRecord, next: &CycleRecord) -> bool {
    let distance = trace_distance(&prev.rho_start, &next.rho_start);
    let efficiency_close = match (prev.efficiency, next.efficiency) {
        (Some(a), Some(b)) => (a - b).abs() <= LIMIT_CYCLE_TOLERANCE,
        (None, None) => true,
        _ => false,
    };
    distance <= LIMIT_CYCLE_TOLERANCE && efficiency_close
}

#[derive(Debug, Clone)]
pub struct EngineRun {
    pub spec: EngineSpec,
    pub cycles: Vec<CycleRecord>,
    /// First (1-based) cycle whose start state and efficiency agree with the
    /// previous cycle within [`LIMIT_CYCLE_TOLERANCE`].
    pub limit_cycle_index: Option<usize>,
}

pub fn run_cycle(rho_start: &DensityMatrix, spec: &EngineSpec) -> Result<CycleRecord> {
    Engine::new(spec)?.cycle(rho_start, 1)
}

pub fn run_engine(spec: &EngineSpec, max_cycles: usize) -> Result<EngineRun> {
    let engine = Engine::new(spec)?;
    let rho0 = engine.initial_state()?;
    engine.run_from(&rho0, max_cycles)
}

/// Efficiency with fully thermalizing strokes. Closed form `1 - ω₂/ω₁` for the
/// single-qubit variants; simulated with [`IDEAL_STROKE_TIME`] strokes for the
/// auxiliary variant.
pub fn ideal_efficiency(spec: &EngineSpec) -> Result<f64> {
    spec.validate()?;
    match spec.variant {
        Variant::Baseline | Variant::Transverse { .. } => Ok(spec.otto_efficiency()),
        Variant::Auxiliary { .. } => {
            let long = spec.with_stroke_time(IDEAL_STROKE_TIME);
            let engine = Engine::new(&long)?;
            let record = engine.cycle(&engine.initial_state()?, 1)?;
            record
                .efficiency
                .ok_or_else(|| Error::param("initial_temperature", "no heat absorbed at steady state"))
        }
    }
}

/// Steady-state efficiency of the transverse-field engine from its
/// longitudinal and transverse magnetizations.
pub fn transverse_efficiency_formula(
    magnetization_start: f64,
    magnetization_heated: f64,
    transverse_start: f64,
    transverse_heated: f64,
    spec: &EngineSpec,
) -> Result<f64> {
    let Variant::Transverse { big_lambda } = spec.variant else {
        return Err(Error::param("variant", "transverse efficiency requires the transverse variant"));
    };
    let (xi1, xi2) = (spec.omega1 / big_lambda, spec.omega2 / big_lambda);
    let ds = magnetization_heated - magnetization_start;
    let dsx = transverse_heated - transverse_start;
    let numerator = spec.omega2 * ds + 2.0 * xi2 * dsx;
    let denominator = spec.omega1 * ds + 2.0 * xi1 * dsx;
    if denominator == 0.0 {
        return Err(Error::param("magnetizations", "zero denominator"));
    }
    Ok(1.0 - numerator / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleSelector {
    /// Only the given (1-based) cycle.
    Only(usize),
    /// Every cycle from 1 through the given one.
    Through(usize),
}

impl CycleSelector {
    fn last(&self) -> usize {
        match *self {
            CycleSelector::Only(k) | CycleSelector::Through(k) => k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EfficiencyPoint {
    pub stroke_time: f64,
    pub record: CycleRecord,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("grid", "must be strictly ascending"));
    }
    if grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::param("grid", "stroke times must be non-negative"));
    }
    Ok(())
}

/// Efficiency of the selected cycle(s) for every stroke time in `grid`.
/// Grid points are evaluated in parallel; output follows grid order.
pub fn efficiency_vs_time(spec: &EngineSpec, grid: &[f64], selector: CycleSelector) -> Result<Vec<EfficiencyPoint>> {
    check_grid(grid)?;
    if selector.last() == 0 {
        return Err(Error::param("cycle", "cycles are numbered from 1"));
    }
    let per_point: Vec<Vec<EfficiencyPoint>> = grid
        .par_iter()
        .map(|&t| {
            let run = run_engine(&spec.with_stroke_time(t), selector.last())?;
            Ok(run
                .cycles
                .into_iter()
                .filter(|r| matches!(selector, CycleSelector::Through(_)) || r.cycle_index == selector.last())
                .map(|record| EfficiencyPoint { stroke_time: t, record })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}
