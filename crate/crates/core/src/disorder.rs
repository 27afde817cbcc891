//! Quenched disorder in the bath couplings.
//!
//! Each realization rescales the hot and cold couplings by `(1 + d)²` with
//! `d ∈ {-δ, 0, δ}`. The disorder-averaged efficiency is the probability
//! weighted mean of the single-realization efficiencies.

use rayon::prelude::*;

use crate::engine::{check_grid, ideal_efficiency, CycleRecord, Engine, EngineSpec, Variant};
use crate::error::{Error, Result};

pub const DEFAULT_TS_TOLERANCE: f64 = 2.5e-4;
pub const DEFAULT_TS_STEP: f64 = 0.05;
pub const DEFAULT_TS_CAP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisorderMode {
    /// One draw of `d` applies to both baths.
    Shared,
    /// Hot and cold strengths are drawn independently.
    Independent,
}

/// Three-point distribution: `d = 0` with probability `1 - 2q`, `d = ±δ` with
/// probability `q = (1 - p)/2` each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderDistribution {
    pub delta: f64,
    pub p: f64,
    pub mode: DisorderMode,
}

impl DisorderDistribution {
    pub fn new(delta: f64, p: f64) -> Self {
        Self {
            delta,
            p,
            mode: DisorderMode::Shared,
        }
    }

    pub fn with_mode(mut self, mode: DisorderMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::param("delta", format!("must lie in [0, 1), got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::param("p", format!("must lie in [0, 1), got {}", self.p)));
        }
        Ok(())
    }

    /// Support points of a single draw with their probabilities.
    fn marginal(&self) -> Vec<(f64, f64)> {
        let q = (1.0 - self.p) / 2.0;
        let mut points = vec![(-self.delta, q), (0.0, 1.0 - 2.0 * q), (self.delta, q)];
        if self.delta == 0.0 {
            points = vec![(0.0, 1.0)];
        }
        points
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Realization {
    pub hot: f64,
    pub cold: f64,
    pub probability: f64,
}

/// All realizations with non-zero probability, sorted by `(hot, cold)`.
pub fn enumerate_realizations(dist: &DisorderDistribution) -> Result<Vec<Realization>> {
    dist.validate()?;
    let marginal = dist.marginal();
    let mut out: Vec<Realization> = match dist.mode {
        DisorderMode::Shared => marginal
            .iter()
            .map(|&(d, probability)| Realization {
                hot: d,
                cold: d,
                probability,
            })
            .collect(),
        DisorderMode::Independent => marginal
            .iter()
            .flat_map(|&(h, ph)| {
                marginal.iter().map(move |&(c, pc)| Realization {
                    hot: h,
                    cold: c,
                    probability: ph * pc,
                })
            })
            .collect(),
    };
    out.retain(|r| r.probability > 0.0);
    out.sort_by(|a, b| a.hot.total_cmp(&b.hot).then(a.cold.total_cmp(&b.cold)));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RealizationResult {
    pub realization: Realization,
    pub record: CycleRecord,
}

#[derive(Debug, Clone)]
pub struct DisorderedResult {
    pub realizations: Vec<RealizationResult>,
    /// `None` when any realization absorbs no heat.
    pub averaged_efficiency: Option<f64>,
}

/// First-cycle efficiency averaged over explicitly weighted realizations.
/// Each realization starts from the initial state of `spec`.
pub fn average_over(spec: &EngineSpec, realizations: &[Realization]) -> Result<DisorderedResult> {
    let total: f64 = realizations.iter().map(|r| r.probability).sum();
    if realizations.is_empty() || (total - 1.0).abs() > 1e-12 {
        return Err(Error::param("realizations", format!("probabilities must sum to 1, got {total}")));
    }
    let results = realizations
        .iter()
        .map(|&realization| {
            let engine = Engine::new(&spec.with_disorder(realization.hot, realization.cold))?;
            let record = engine.cycle(&engine.initial_state()?, 1)?;
            Ok(RealizationResult { realization, record })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut averaged = Some(0.0);
    for r in &results {
        match (averaged, r.record.efficiency) {
            (Some(acc), Some(eta)) => averaged = Some(acc + r.realization.probability * eta),
            _ => {
                log::warn!(
                    "realization (d_h = {}, d_c = {}) absorbs no heat at t = {}",
                    r.realization.hot,
                    r.realization.cold,
                    spec.stroke_time
                );
                averaged = None;
            }
        }
    }
    Ok(DisorderedResult {
        realizations: results,
        averaged_efficiency: averaged,
    })
}

pub fn disorder_averaged_efficiency(spec: &EngineSpec, dist: &DisorderDistribution) -> Result<DisorderedResult> {
    average_over(spec, &enumerate_realizations(dist)?)
}

/// Disorder-averaged efficiency at each stroke time of `grid`, in parallel.
pub fn averaged_efficiency_vs_time(
    spec: &EngineSpec,
    dist: &DisorderDistribution,
    grid: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    check_grid(grid)?;
    let realizations = enumerate_realizations(dist)?;
    grid.par_iter()
        .map(|&t| {
            let result = average_over(&spec.with_stroke_time(t), &realizations)?;
            Ok((t, result.averaged_efficiency))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsSearch {
    /// Allowed `|η_dis - η_s|` at the reported time.
    pub tolerance: f64,
    pub step: f64,
    pub cap: f64,
}

impl Default for TsSearch {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TS_TOLERANCE,
            step: DEFAULT_TS_STEP,
            cap: DEFAULT_TS_CAP,
        }
    }
}

impl TsSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if !(self.step > 0.0) {
            return Err(Error::param("step", "must be positive"));
        }
        if !(self.cap >= self.step) {
            return Err(Error::param("cap", "must be at least one step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReachingTime {
    Reached(f64),
    NotReached { cap: f64 },
}

impl ReachingTime {
    pub fn time(&self) -> Option<f64> {
        match *self {
            ReachingTime::Reached(t) => Some(t),
            ReachingTime::NotReached { .. } => None,
        }
    }

    /// Orders reaching times with "not reached" above every reached time.
    pub fn sort_key(&self) -> f64 {
        self.time().unwrap_or(f64::INFINITY)
    }
}

/// Smallest grid time `k·step` (k ≥ 1) at which the disorder-averaged
/// efficiency is within `search.tolerance` of the ideal efficiency.
pub fn find_t_s(spec: &EngineSpec, dist: &DisorderDistribution, search: &TsSearch) -> Result<ReachingTime> {
    search.validate()?;
    let realizations = enumerate_realizations(dist)?;
    let ideal = match spec.variant {
        Variant::Auxiliary { .. } => ideal_efficiency(spec)?,
        _ => spec.otto_efficiency(),
    };
    let points = (search.cap / search.step + 1e-9).floor() as usize;
    for k in 1..=points {
        let t = k as f64 * search.step;
        let result = average_over(&spec.with_stroke_time(t), &realizations)?;
        if let Some(eta) = result.averaged_efficiency {
            if (eta - ideal).abs() <= search.tolerance {
                return Ok(ReachingTime::Reached(t));
            }
        }
    }
    Ok(ReachingTime::NotReached { cap: search.cap })
}
