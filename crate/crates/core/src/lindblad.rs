//! Markovian bath contact: secular jump operators, Ohmic rates and a fixed-step
//! fourth-order Runge-Kutta integrator for the master equation
//!
//! ```text
//! dρ/dt = -i[H, ρ] + Σ_ℰ γ(ℰ) (A ρ A† - ½{A†A, ρ})
//! ```
//!
//! in natural units (ħ = k_B = 1, time in units of the reference frequency).

use crate::error::{Error, Result};
use crate::quantum::{hermitian_deviation, max_abs, CMatrix, DensityMatrix, SpectralDecomposition, StateTolerance, C64};

pub const DEFAULT_COUPLING: f64 = 0.1;
pub const DEFAULT_DT: f64 = 1e-3;

/// Mean occupation `1 / (exp(ℰ/T) - 1)`; underflows to zero for `ℰ/T ≳ 709`.
pub fn bose_einstein(energy: f64, temperature: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::param("energy", format!("must be positive, got {energy}")));
    }
    if !(temperature > 0.0) {
        return Err(Error::param("temperature", format!("must be positive, got {temperature}")));
    }
    Ok(1.0 / (energy / temperature).exp_m1())
}

/// One bath contact: temperature, Ohmic coupling λ and a quenched disorder
/// factor `d` that rescales every rate by `(1 + d)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub temperature: f64,
    pub coupling: f64,
    pub disorder: f64,
}

impl BathSpec {
    pub fn new(temperature: f64) -> Self {
        Self {
            temperature,
            coupling: DEFAULT_COUPLING,
            disorder: 0.0,
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_disorder(mut self, disorder: f64) -> Self {
        self.disorder = disorder;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::param("temperature", format!("must be positive, got {}", self.temperature)));
        }
        if !(self.coupling > 0.0) {
            return Err(Error::param("coupling", format!("must be positive, got {}", self.coupling)));
        }
        if !(self.disorder > -1.0) {
            return Err(Error::param("disorder", format!("must exceed -1, got {}", self.disorder)));
        }
        Ok(())
    }

    fn disorder_scale(&self) -> f64 {
        (1.0 + self.disorder).powi(2)
    }
}

/// Emission (`ℰ > 0`) or absorption (`ℰ < 0`) rate for an Ohmic spectral
/// density `J(ℰ) = λℰ`.
pub fn transition_rate(energy: f64, bath: &BathSpec) -> Result<f64> {
    bath.validate()?;
    let magnitude = energy.abs();
    let occupation = bose_einstein(magnitude, bath.temperature)?;
    let spectral = bath.coupling * magnitude * bath.disorder_scale();
    Ok(if energy > 0.0 {
        spectral * (1.0 + occupation)
    } else {
        spectral * occupation
    })
}

/// Rate of the zero-energy (pure dephasing) channel: the `ℰ → 0` limit of
/// `J(ℰ) n̄(ℰ)`, which is `λT`.
pub fn dephasing_rate(bath: &BathSpec) -> f64 {
    bath.coupling * bath.temperature * bath.disorder_scale()
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    /// Transition energy `ℰ = ε_r - ε_l` removed from the system by the jump.
    pub energy: f64,
    pub operator: CMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// Keep the `ℰ = 0` channel when the coupling operator has diagonal
    /// elements in the Hamiltonian eigenbasis.
    pub dephasing: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self { dephasing: true }
    }
}

/// Right-hand side of the master equation for one stroke.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    pub hamiltonian: CMatrix,
    pub channels: Vec<JumpChannel>,
    /// `H - (i/2) Σ γ A†A`.
    effective: CMatrix,
    effective_adjoint: CMatrix,
    jumps: Vec<(f64, CMatrix, CMatrix)>,
}

impl LindbladGenerator {
    /// Builds the secular generator for `h` coupled to `bath` through `coupling`.
    pub fn build(h: &CMatrix, coupling: &CMatrix, bath: &BathSpec, options: GeneratorOptions) -> Result<Self> {
        bath.validate()?;
        if coupling.nrows() != h.nrows() || !coupling.is_square() {
            return Err(Error::DimensionMismatch {
                left: coupling.nrows(),
                right: h.nrows(),
            });
        }
        let deviation = hermitian_deviation(coupling);
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
        let spectrum = SpectralDecomposition::of(h)?;
        let dim = spectrum.dim();
        let v = &spectrum.eigenvectors;
        let coupling_eig = v.adjoint() * coupling * v;
        let tol = 1e-9 * spectrum.spectral_norm().max(1.0);

        let mut gaps: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * dim);
        for l in 0..dim {
            for r in 0..dim {
                gaps.push((spectrum.eigenvalues[r] - spectrum.eigenvalues[l], l, r));
            }
        }
        gaps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut clusters: Vec<Vec<(f64, usize, usize)>> = Vec::new();
        for gap in gaps {
            match clusters.last_mut() {
                Some(cluster) if gap.0 - cluster[0].0 <= tol => cluster.push(gap),
                _ => clusters.push(vec![gap]),
            }
        }

        let mut channels = Vec::new();
        for cluster in clusters {
            let mean = cluster.iter().map(|g| g.0).sum::<f64>() / cluster.len() as f64;
            let energy = if mean.abs() <= tol { 0.0 } else { mean };
            let mut in_eigenbasis = CMatrix::zeros(dim, dim);
            for &(_, l, r) in &cluster {
                in_eigenbasis[(l, r)] = coupling_eig[(l, r)];
            }
            let operator = v * in_eigenbasis * v.adjoint();
            if operator.norm() <= 1e-12 {
                continue;
            }
            let rate = if energy == 0.0 {
                if !options.dephasing {
                    continue;
                }
                dephasing_rate(bath)
            } else {
                transition_rate(energy, bath)?
            };
            channels.push(JumpChannel { energy, operator, rate });
        }
        Ok(Self::from_channels(h.clone(), channels))
    }

    pub fn from_channels(hamiltonian: CMatrix, channels: Vec<JumpChannel>) -> Self {
        let i = C64::new(0.0, 1.0);
        let dim = hamiltonian.nrows();
        let mut decay = CMatrix::zeros(dim, dim);
        let mut jumps = Vec::with_capacity(channels.len());
        for ch in &channels {
            let adj = ch.operator.adjoint();
            decay += (&adj * &ch.operator).scale(ch.rate);
            jumps.push((ch.rate, ch.operator.clone(), adj));
        }
        let effective = &hamiltonian - decay * (i * 0.5);
        let effective_adjoint = effective.adjoint();
        Self {
            hamiltonian,
            channels,
            effective,
            effective_adjoint,
            jumps,
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Full right-hand side `-i[H, ρ] + D[ρ]` applied to an arbitrary matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let i = C64::new(0.0, 1.0);
        let mut out = (&self.effective * rho - rho * &self.effective_adjoint) * (-i);
        for (rate, a, a_adj) in &self.jumps {
            out += (a * rho * a_adj).scale(*rate);
        }
        out
    }

    /// Matrix of `apply` acting on row-major vectorized operators.
    pub fn superoperator(&self) -> CMatrix {
        let d = self.dim();
        let mut sup = CMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                let mut basis = CMatrix::zeros(d, d);
                basis[(a, b)] = C64::new(1.0, 0.0);
                let image = self.apply(&basis);
                for i in 0..d {
                    for j in 0..d {
                        sup[(i * d + j, a * d + b)] = image[(i, j)];
                    }
                }
            }
        }
        sup
    }
}

/// Number of equal RK4 steps used to cover `duration` with steps of at most `dt`.
pub fn step_count(duration: f64, dt: f64) -> usize {
    if duration <= 0.0 {
        0
    } else {
        (duration / dt - 1e-9).ceil().max(1.0) as usize
    }
}

fn check_times(duration: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::param("duration", format!("must be non-negative, got {duration}")));
    }
    Ok(())
}

fn rk4_step(generator: &LindbladGenerator, rho: &CMatrix, h: f64) -> CMatrix {
    let k1 = generator.apply(rho);
    let k2 = generator.apply(&(rho + k1.scale(0.5 * h)));
    let k3 = generator.apply(&(rho + k2.scale(0.5 * h)));
    let k4 = generator.apply(&(rho + k3.scale(h)));
    rho + (k1 + (k2 + k3).scale(2.0) + k4).scale(h / 6.0)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Integrates from `rho0` for `duration`, recording every step.
pub fn evolve(rho0: &DensityMatrix, generator: &LindbladGenerator, duration: f64, dt: f64) -> Result<Trajectory> {
    evolve_sampled(rho0, generator, duration, dt, 1)
}

/// Like [`evolve`] but records every `sample_every`-th step (the final state is
/// always recorded). Every step is validated regardless of sampling.
pub fn evolve_sampled(
    rho0: &DensityMatrix,
    generator: &LindbladGenerator,
    duration: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    check_times(duration, dt)?;
    if rho0.dim() != generator.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: generator.dim(),
        });
    }
    let steps = step_count(duration, dt);
    let h = if steps == 0 { 0.0 } else { duration / steps as f64 };
    let every = sample_every.max(1);

    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut current = rho0.matrix().clone();
    for k in 1..=steps {
        current = rk4_step(generator, &current, h);
        let time = k as f64 * h;
        let state = DensityMatrix::with_tolerance(current, StateTolerance::EVOLVED).map_err(|e| Error::Integration {
            time,
            dt,
            source: Box::new(e),
        })?;
        current = state.matrix().clone();
        if k % every == 0 || k == steps {
            times.push(time);
            states.push(state);
        }
    }
    Ok(Trajectory { times, states })
}

/// The linear map produced by `n` RK4 steps of the generator, stored as a
/// superoperator on row-major vectorized states.
///
/// For a time-independent linear generator one RK4 step of size `h` is exactly
/// `I + hL + (hL)²/2 + (hL)³/6 + (hL)⁴/24`, so the propagator reproduces
/// [`evolve`] up to rounding while letting a stroke be reused across cycles.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    map: CMatrix,
    pub duration: f64,
    pub dt: f64,
}

impl Propagator {
    pub fn new(generator: &LindbladGenerator, duration: f64, dt: f64) -> Result<Self> {
        check_times(duration, dt)?;
        let d = generator.dim();
        let steps = step_count(duration, dt);
        let identity = CMatrix::identity(d * d, d * d);
        if steps == 0 {
            return Ok(Self {
                dim: d,
                map: identity,
                duration,
                dt,
            });
        }
        let step = rk4_step_map(generator, duration / steps as f64);
        Ok(Self {
            dim: d,
            map: matrix_power(step, steps),
            duration,
            dt,
        })
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.dim,
            });
        }
        let d = self.dim;
        let m = rho.matrix();
        let vec = nalgebra::DVector::from_fn(d * d, |k, _| m[(k / d, k % d)]);
        let out = &self.map * vec;
        let evolved = CMatrix::from_fn(d, d, |i, j| out[i * d + j]);
        DensityMatrix::with_tolerance(evolved, StateTolerance::EVOLVED).map_err(|e| Error::Integration {
            time: self.duration,
            dt: self.dt,
            source: Box::new(e),
        })
    }
}

/// `I + hL + (hL)²/2 + (hL)³/6 + (hL)⁴/24` on row-major vectorized states.
fn rk4_step_map(generator: &LindbladGenerator, h: f64) -> CMatrix {
    let n = generator.dim() * generator.dim();
    let hl = generator.superoperator().scale(h);
    let hl2 = &hl * &hl;
    let hl3 = &hl2 * &hl;
    let hl4 = &hl3 * &hl;
    CMatrix::identity(n, n) + &hl + hl2.scale(0.5) + hl3.scale(1.0 / 6.0) + hl4.scale(1.0 / 24.0)
}

/// Worst invariant deviations seen along a stepped trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub steps: usize,
    pub max_hermitian_deviation: f64,
    pub max_trace_deviation: f64,
    pub min_eigenvalue: f64,
}

impl Default for InvariantReport {
    fn default() -> Self {
        Self {
            steps: 0,
            max_hermitian_deviation: 0.0,
            max_trace_deviation: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl InvariantReport {
    pub fn merge(&mut self, other: &InvariantReport) {
        self.steps += other.steps;
        self.max_hermitian_deviation = self.max_hermitian_deviation.max(other.max_hermitian_deviation);
        self.max_trace_deviation = self.max_trace_deviation.max(other.max_trace_deviation);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    pub fn within(&self, tol: StateTolerance) -> bool {
        self.max_hermitian_deviation <= tol.hermitian
            && self.max_trace_deviation <= tol.trace
            && self.min_eigenvalue >= -tol.psd
    }
}

/// Steps `rho0` through `duration` with the same RK4 steps as [`evolve`],
/// checking Hermiticity, trace and positivity after every step without
/// storing the states. Returns the report and the final (unsymmetrized)
/// state.
pub fn audit_trajectory(
    rho0: &DensityMatrix,
    generator: &LindbladGenerator,
    duration: f64,
    dt: f64,
) -> Result<(InvariantReport, CMatrix)> {
    check_times(duration, dt)?;
    let d = generator.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { left: rho0.dim(), right: d });
    }
    let steps = step_count(duration, dt);
    let m = rho0.matrix();
    let mut state = nalgebra::DVector::from_fn(d * d, |k, _| m[(k / d, k % d)]);
    let mut report = InvariantReport {
        steps,
        ..Default::default()
    };
    if steps > 0 {
        let step = rk4_step_map(generator, duration / steps as f64);
        for _ in 0..steps {
            state = &step * &state;
            let mut herm: f64 = 0.0;
            let mut trace = C64::new(0.0, 0.0);
            for i in 0..d {
                trace += state[i * d + i];
                for j in 0..d {
                    herm = herm.max((state[i * d + j] - state[j * d + i].conj()).norm());
                }
            }
            report.max_hermitian_deviation = report.max_hermitian_deviation.max(herm);
            report.max_trace_deviation = report.max_trace_deviation.max((trace - C64::new(1.0, 0.0)).norm());
            report.min_eigenvalue = report.min_eigenvalue.min(min_eigenvalue(&state, d));
        }
    }
    Ok((report, CMatrix::from_fn(d, d, |i, j| state[i * d + j])))
}

/// Smallest eigenvalue of the Hermitian part of a vectorized state.
fn min_eigenvalue(state: &nalgebra::DVector<C64>, d: usize) -> f64 {
    if d == 2 {
        let (a, c) = (state[0].re, state[3].re);
        let b = (state[1] + state[2].conj()) * 0.5;
        return 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b.norm_sqr()).sqrt();
    }
    let m = CMatrix::from_fn(d, d, |i, j| (state[i * d + j] + state[j * d + i].conj()) * 0.5);
    nalgebra::SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

fn matrix_power(mut base: CMatrix, mut exp: usize) -> CMatrix {
    let n = base.nrows();
    let mut acc: Option<CMatrix> = None;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = Some(match acc {
                Some(a) => a * &base,
                None => base.clone(),
            });
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    acc.unwrap_or_else(|| CMatrix::identity(n, n))
}

/// Largest entry of `L[ρ]`, used to check stationarity.
pub fn residual(generator: &LindbladGenerator, rho: &DensityMatrix) -> f64 {
    max_abs(&generator.apply(rho.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{identity, kron, pauli, thermal_state, trace_distance, Pauli};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sz(omega: f64) -> CMatrix {
        pauli(Pauli::Z).scale(0.5 * omega)
    }

    /// Closed-form two-level relaxation of the excited population.
    fn excited_population(p0: f64, omega: f64, bath: &BathSpec, t: f64) -> f64 {
        let n = 1.0 / ((omega / bath.temperature).exp() - 1.0);
        let emit = bath.coupling * omega * (1.0 + n) * (1.0 + bath.disorder).powi(2);
        let absorb = bath.coupling * omega * n * (1.0 + bath.disorder).powi(2);
        let total = emit + absorb;
        let p_inf = absorb / total;
        p_inf + (p0 - p_inf) * (-total * t).exp()
    }

    #[test]
    fn bose_einstein_values() {
        assert_abs_diff_eq!(bose_einstein(2.0_f64.ln(), 1.0).unwrap(), 1.0, epsilon = 1e-14);
        let tiny = bose_einstein(24.0, 0.75).unwrap();
        assert_abs_diff_eq!(tiny / (1.0 / (32.0_f64.exp() - 1.0)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tiny, 1.27e-14, epsilon = 0.01e-14);
        assert_eq!(bose_einstein(1.0, 1e-3).unwrap(), 0.0);
        assert!(bose_einstein(0.0, 1.0).is_err());
        assert!(bose_einstein(-1.0, 1.0).is_err());
    }

    #[test]
    fn ohmic_rate_value() {
        let bath = BathSpec::new(3.0);
        let expected = 0.1 * 24.0 * (1.0 + 1.0 / (8.0_f64.exp() - 1.0));
        assert_abs_diff_eq!(transition_rate(24.0, &bath).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 2.40081, epsilon = 1e-5);
        assert!(transition_rate(0.0, &bath).is_err());
    }

    #[test]
    fn disorder_scales_rates() {
        let bath = BathSpec::new(1.3);
        let delta = 0.4;
        for e in [0.5, -2.0, 7.0] {
            let plain = transition_rate(e, &bath).unwrap();
            let shifted = transition_rate(e, &bath.with_disorder(delta)).unwrap();
            assert_abs_diff_eq!(shifted / plain, (1.0 + delta) * (1.0 + delta), epsilon = 1e-13);
        }
        assert!(BathSpec::new(1.0).with_disorder(-1.0).validate().is_err());
    }

    #[test]
    fn two_level_channels() {
        let gen = LindbladGenerator::build(&sz(8.0), &pauli(Pauli::X), &BathSpec::new(1.0), Default::default()).unwrap();
        assert_eq!(gen.channels.len(), 2);
        let down = gen.channels.iter().find(|c| c.energy > 0.0).unwrap();
        assert_abs_diff_eq!(down.energy, 8.0, epsilon = 1e-12);
        // |↓⟩⟨↑| in the (↑, ↓) basis.
        assert_abs_diff_eq!(down.operator[(1, 0)].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(down.operator[(0, 1)].norm(), 0.0, epsilon = 1e-14);
        let up = gen.channels.iter().find(|c| c.energy < 0.0).unwrap();
        assert!(max_abs(&(&up.operator - down.operator.adjoint())) < 1e-14);
    }

    #[test]
    fn composite_channel_energies() {
        let omega = 8.0;
        let n = 1.0;
        let zi = kron(&pauli(Pauli::Z), &identity(2)).unwrap();
        let iz = kron(&identity(2), &pauli(Pauli::Z)).unwrap();
        let xx = kron(&pauli(Pauli::X), &pauli(Pauli::X)).unwrap();
        let h = (zi + iz).scale(0.5 * omega) + xx.scale(n * omega);
        let coupling = kron(&pauli(Pauli::X), &identity(2)).unwrap();
        let gen = LindbladGenerator::build(&h, &coupling, &BathSpec::new(0.5), Default::default()).unwrap();
        let mut energies: Vec<f64> = gen.channels.iter().map(|c| c.energy).collect();
        energies.sort_by(f64::total_cmp);
        let r = (1.0 + n * n).sqrt();
        let expected = [-(r + n) * omega, -(r - n) * omega, (r - n) * omega, (r + n) * omega];
        assert_eq!(energies.len(), 4);
        for (e, x) in energies.iter().zip(expected) {
            assert_abs_diff_eq!(*e, x, epsilon = 1e-10);
        }
    }

    #[test]
    fn transverse_field_has_dephasing_channel() {
        let h = sz(8.0) + pauli(Pauli::X).scale(2.0);
        let bath = BathSpec::new(1.0);
        let with = LindbladGenerator::build(&h, &pauli(Pauli::X), &bath, Default::default()).unwrap();
        let zero = with.channels.iter().find(|c| c.energy == 0.0).unwrap();
        assert_abs_diff_eq!(zero.rate, 0.1, epsilon = 1e-15);
        let without = LindbladGenerator::build(&h, &pauli(Pauli::X), &bath, GeneratorOptions { dephasing: false }).unwrap();
        assert_eq!(without.channels.len(), with.channels.len() - 1);
    }

    #[test]
    fn thermal_state_is_stationary() {
        let zi = kron(&pauli(Pauli::Z), &identity(2)).unwrap();
        let iz = kron(&identity(2), &pauli(Pauli::Z)).unwrap();
        let xx = kron(&pauli(Pauli::X), &pauli(Pauli::X)).unwrap();
        let cases = [
            (sz(8.0), pauli(Pauli::X), 1.0),
            (sz(6.0) + pauli(Pauli::X).scale(1.5), pauli(Pauli::X), 0.25),
            ((zi + iz).scale(4.0) + xx.scale(6.0), kron(&pauli(Pauli::X), &identity(2)).unwrap(), 0.5),
        ];
        for (h, c, t) in cases {
            let bath = BathSpec::new(t);
            let gen = LindbladGenerator::build(&h, &c, &bath, Default::default()).unwrap();
            let rho = thermal_state(&h, t).unwrap();
            assert!(residual(&gen, &rho) <= 1e-10, "residual {}", residual(&gen, &rho));
        }
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let gen = LindbladGenerator::build(&sz(8.0), &pauli(Pauli::X), &BathSpec::new(1.0), Default::default()).unwrap();
        let rho = thermal_state(&sz(6.0), 0.25).unwrap();
        let traj = evolve(&rho, &gen, 0.0, 1e-3).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.last(), &rho);
        assert!(evolve(&rho, &gen, 1.0, 0.0).is_err());
        assert!(evolve(&rho, &gen, -1.0, 1e-3).is_err());
    }

    #[test]
    fn evolve_matches_rate_equation() {
        let bath = BathSpec::new(1.0);
        let gen = LindbladGenerator::build(&sz(8.0), &pauli(Pauli::X), &bath, Default::default()).unwrap();
        let rho0 = thermal_state(&sz(6.0), 0.25).unwrap();
        let traj = evolve_sampled(&rho0, &gen, 4.0, 1e-3, 10).unwrap();
        let p0 = rho0.population(0);
        let worst = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(&t, s)| (s.population(0) - excited_population(p0, 8.0, &bath, t)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "max deviation {worst:e}");
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        // Large steps so the truncation error dominates rounding.
        let bath = BathSpec::new(1.0);
        let gen = LindbladGenerator::build(&sz(8.0), &pauli(Pauli::X), &bath, Default::default()).unwrap();
        let rho0 = DensityMatrix::pure(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let exact = excited_population(1.0, 8.0, &bath, 2.0);
        let err = |dt: f64| (evolve(&rho0, &gen, 2.0, dt).unwrap().last().population(0) - exact).abs();
        let (coarse, fine) = (err(0.2), err(0.1));
        assert!(fine * 16.0 <= coarse * 1.2, "coarse {coarse:e} fine {fine:e}");
        assert!(fine * 16.0 >= coarse * 0.8, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn propagator_matches_stepwise_evolution() {
        let h = sz(6.0) + pauli(Pauli::X).scale(0.75);
        let gen = LindbladGenerator::build(&h, &pauli(Pauli::X), &BathSpec::new(0.4), Default::default()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho0 = DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(0.0, s)]).unwrap();
        let stepped = evolve_sampled(&rho0, &gen, 1.5, 1e-3, 100).unwrap();
        let propagated = Propagator::new(&gen, 1.5, 1e-3).unwrap().apply(&rho0).unwrap();
        assert!(trace_distance(stepped.last(), &propagated) < 1e-11);
        let same = Propagator::new(&gen, 0.0, 1e-3).unwrap().apply(&rho0).unwrap();
        assert_eq!(same, rho0);
    }

    #[test]
    fn audit_matches_evolve() {
        let h = sz(8.0) + pauli(Pauli::X).scale(2.0);
        let gen = LindbladGenerator::build(&h, &pauli(Pauli::X), &BathSpec::new(1.0), Default::default()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho0 = DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(0.0, s)]).unwrap();
        let (report, last) = audit_trajectory(&rho0, &gen, 2.0, 1e-3).unwrap();
        assert_eq!(report.steps, 2000);
        assert!(report.within(StateTolerance::EVOLVED));
        assert!(report.min_eigenvalue > -1e-12);
        let stepped = evolve_sampled(&rho0, &gen, 2.0, 1e-3, 500).unwrap();
        assert!(max_abs(&(stepped.last().matrix() - &last)) < 1e-11);

        let aux = kron(&sz(8.0), &identity(2)).unwrap() + kron(&identity(2), &sz(8.0)).unwrap();
        let coupling = kron(&pauli(Pauli::X), &identity(2)).unwrap();
        let gen = LindbladGenerator::build(&aux, &coupling, &BathSpec::new(1.0), Default::default()).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(4).unwrap();
        let (report, _) = audit_trajectory(&rho0, &gen, 1.0, 1e-3).unwrap();
        assert!(report.within(StateTolerance::EVOLVED));
        assert!(report.min_eigenvalue > 0.0);
    }

    #[test]
    fn secular_structure_keeps_populations_decoupled() {
        let h = sz(8.0) + pauli(Pauli::X).scale(2.0);
        let gen = LindbladGenerator::build(&h, &pauli(Pauli::X), &BathSpec::new(1.0), Default::default()).unwrap();
        let rho0 = thermal_state(&(sz(6.0) + pauli(Pauli::X).scale(1.5)), 0.25).unwrap();
        let traj = evolve_sampled(&rho0, &gen, 3.0, 1e-3, 50).unwrap();
        let basis = SpectralDecomposition::of(&h).unwrap().eigenvectors;
        for s in &traj.states {
            let rotated = basis.adjoint() * s.matrix() * &basis;
            assert!(rotated[(0, 1)].norm() <= 1e-8);
        }
    }

    fn random_hermitian(entries: &[(f64, f64)], dim: usize) -> CMatrix {
        let g = CMatrix::from_fn(dim, dim, |i, j| C64::new(entries[i * dim + j].0, entries[i * dim + j].1));
        (&g + g.adjoint()).scale(0.5)
    }

    proptest! {
        #[test]
        fn detailed_balance(e in 0.01..50.0f64, t in 0.05..10.0f64, d in -0.9..0.9f64) {
            prop_assume!(e / t < 600.0);
            let bath = BathSpec::new(t).with_disorder(d);
            let ratio = transition_rate(-e, &bath).unwrap() / transition_rate(e, &bath).unwrap();
            prop_assert!((ratio / (-e / t).exp() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn generator_is_trace_annihilating(
            h in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 16),
            r in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16),
            t in 0.1..5.0f64,
        ) {
            let hm = random_hermitian(&h, 4);
            let coupling = kron(&pauli(Pauli::X), &identity(2)).unwrap();
            let gen = LindbladGenerator::build(&hm, &coupling, &BathSpec::new(t), Default::default()).unwrap();
            let rho = random_hermitian(&r, 4);
            prop_assert!(gen.apply(&rho).trace().norm() <= 1e-12);
            for ch in &gen.channels {
                prop_assert!(ch.rate >= 0.0);
                if ch.energy != 0.0 {
                    let partner = gen.channels.iter().find(|o| (o.energy + ch.energy).abs() < 1e-8).unwrap();
                    prop_assert!(max_abs(&(&partner.operator - ch.operator.adjoint())) < 1e-12);
                }
            }
        }
    }
}
