use anyhow::{Context, Result};
use rayon::prelude::*;

use ottoforge_core::disorder::{average_over, enumerate_realizations, find_t_s, ReachingTime};
use ottoforge_core::engine::{ideal_efficiency, CycleRecord, Engine, EngineRun, EngineSpec, Variant};

use crate::config::{Experiment, RunConfig};
use crate::output::{Cell, Table};

const AUDIT_COLUMNS: [&str; 5] = ["q1", "w1", "q2", "w2", "first_law_residual"];

/// Result table plus the scalars reported in the manifest header.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub summary: Vec<(String, String)>,
}

fn header(columns: &[&str], audit: bool) -> Table {
    let mut all = columns.to_vec();
    if audit {
        all.extend(AUDIT_COLUMNS);
    }
    Table::new(&all)
}

fn audit_cells(record: &CycleRecord) -> Vec<Cell> {
    vec![
        record.heat_hot.into(),
        record.work_compression.into(),
        record.heat_cold.into(),
        record.work_expansion.into(),
        record.first_law_residual().into(),
    ]
}

fn run_point(spec: &EngineSpec, cycles: usize) -> Result<EngineRun> {
    let engine = Engine::new(spec)?;
    Ok(engine.run_from(&engine.initial_state()?, cycles)?)
}

fn selected<'a>(cfg: &RunConfig, run: &'a EngineRun) -> impl Iterator<Item = &'a CycleRecord> {
    let only = cfg.cycle;
    run.cycles
        .iter()
        .filter(move |r| only.is_none_or(|k| r.cycle_index == k))
}

/// Evaluates `point` for every element of `items` in parallel and
/// concatenates the resulting rows in input order.
fn collect_rows<T: Sync>(
    items: &[T],
    point: impl Fn(&T) -> Result<Vec<Vec<Cell>>> + Sync + Send,
) -> Result<Vec<Vec<Cell>>> {
    let blocks: Vec<Vec<Vec<Cell>>> = items.par_iter().map(point).collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn cycle_rows(cfg: &RunConfig, lead: &[Cell], run: &EngineRun, magnetizations: bool) -> Vec<Vec<Cell>> {
    selected(cfg, run)
        .map(|r| {
            let mut row = lead.to_vec();
            row.push(r.cycle_index.into());
            row.push(r.efficiency.into());
            if magnetizations {
                row.extend([
                    r.magnetization_start.into(),
                    r.magnetization_heated.into(),
                    r.magnetization_cooled.into(),
                ]);
            }
            if cfg.audit {
                row.extend(audit_cells(r));
            }
            row
        })
        .collect()
}

fn pairs(outer: &[f64], inner: &[f64]) -> Vec<(f64, f64)> {
    outer.iter().flat_map(|&a| inner.iter().map(move |&b| (a, b))).collect()
}

fn format_list(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(", ")
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.engine;
    let name = cfg.experiment.name();
    let mut summary = vec![("eta_s".to_string(), format!("{}", spec.otto_efficiency()))];
    let table = match cfg.experiment {
        Experiment::Cycle => {
            let mut table = header(&["t_tilde", "cycle", "eta", "s1", "s2", "s3"], cfg.audit);
            let run = run_point(&spec, cfg.cycles).with_context(|| format!("{name} at t_tilde = {}", spec.stroke_time))?;
            for row in cycle_rows(cfg, &[spec.stroke_time.into()], &run, true) {
                table.push(row);
            }
            summary.push(("limit_cycle_index".into(), describe_index(run.limit_cycle_index)));
            table
        }
        Experiment::SweepTime => {
            let mut table = header(&["t_tilde", "cycle", "eta"], cfg.audit);
            let grid = cfg.grid.t_tilde.clone().unwrap_or_default();
            let rows = collect_rows(&grid, |&t| {
                let run = run_point(&spec.with_stroke_time(t), cfg.cycles)
                    .with_context(|| format!("{name} at t_tilde = {t}"))?;
                Ok(cycle_rows(cfg, &[t.into()], &run, false))
            })?;
            rows.into_iter().for_each(|r| table.push(r));
            table
        }
        Experiment::LimitCycle => {
            let mut table = header(&["t_tilde", "limit_cycle_index", "eta"], false);
            let grid = cfg.stroke_times();
            let results = grid
                .par_iter()
                .map(|&t| {
                    run_point(&spec.with_stroke_time(t), cfg.max_cycles)
                        .with_context(|| format!("{name} at t_tilde = {t}"))
                })
                .collect::<Result<Vec<_>>>()?;
            for (t, run) in grid.iter().zip(&results) {
                let eta = run.limit_cycle_index.and_then(|k| run.cycles[k - 1].efficiency);
                table.push(vec![(*t).into(), run.limit_cycle_index.into(), eta.into()]);
            }
            summary.push(("max_cycles".into(), cfg.max_cycles.to_string()));
            summary.push((
                "limit_cycle_index".into(),
                format_list(results.iter().map(|r| describe_index(r.limit_cycle_index))),
            ));
            table
        }
        Experiment::Transverse => {
            let mut table = header(&["transverse_lambda", "t_tilde", "cycle", "eta"], cfg.audit);
            let points = pairs(cfg.grid.transverse_lambda.as_deref().unwrap_or_default(), &cfg.stroke_times());
            let rows = collect_rows(&points, |&(big_lambda, t)| {
                let point = spec
                    .with_variant(Variant::Transverse { big_lambda })
                    .with_stroke_time(t);
                let run = run_point(&point, cfg.cycles)
                    .with_context(|| format!("{name} at transverse_lambda = {big_lambda}, t_tilde = {t}"))?;
                Ok(cycle_rows(cfg, &[big_lambda.into(), t.into()], &run, false))
            })?;
            rows.into_iter().for_each(|r| table.push(r));
            table
        }
        Experiment::Aux => {
            let mut table = header(&["n", "t_tilde", "cycle", "eta"], cfg.audit);
            let ns = cfg.grid.n.clone().unwrap_or_default();
            let points = pairs(&ns, &cfg.stroke_times());
            let rows = collect_rows(&points, |&(n, t)| {
                let point = spec.with_variant(Variant::Auxiliary { n }).with_stroke_time(t);
                let run = run_point(&point, cfg.cycles).with_context(|| format!("{name} at n = {n}, t_tilde = {t}"))?;
                Ok(cycle_rows(cfg, &[n.into(), t.into()], &run, false))
            })?;
            rows.into_iter().for_each(|r| table.push(r));
            let ideals = ns
                .par_iter()
                .map(|&n| {
                    ideal_efficiency(&spec.with_variant(Variant::Auxiliary { n }))
                        .with_context(|| format!("{name} ideal efficiency at n = {n}"))
                })
                .collect::<Result<Vec<_>>>()?;
            summary.push((
                "eta_ideal".into(),
                format_list(ns.iter().zip(&ideals).map(|(n, e)| format!("n={n}: {e}"))),
            ));
            table
        }
        Experiment::Disorder => {
            let mut columns = vec!["delta", "t_tilde", "eta_dis"];
            if cfg.audit {
                columns.push("max_first_law_residual");
            }
            let mut table = Table::new(&columns);
            let points = pairs(cfg.grid.delta.as_deref().unwrap_or_default(), &cfg.stroke_times());
            let rows = collect_rows(&points, |&(delta, t)| {
                let context = || format!("{name} at delta = {delta}, t_tilde = {t}");
                let dist = ottoforge_core::DisorderDistribution { delta, ..cfg.disorder };
                let realizations = enumerate_realizations(&dist).with_context(context)?;
                let result = average_over(&spec.with_stroke_time(t), &realizations).with_context(context)?;
                let mut row: Vec<Cell> = vec![delta.into(), t.into(), result.averaged_efficiency.into()];
                if cfg.audit {
                    let worst = result
                        .realizations
                        .iter()
                        .map(|r| r.record.first_law_residual().abs())
                        .fold(0.0, f64::max);
                    row.push(worst.into());
                }
                Ok(vec![row])
            })?;
            rows.into_iter().for_each(|r| table.push(r));
            summary.push(("p".into(), cfg.disorder.p.to_string()));
            summary.push(("mode".into(), format!("{:?}", cfg.disorder.mode).to_lowercase()));
            table
        }
        Experiment::TsSearch => {
            let mut table = Table::new(&["delta", "t_s", "reached"]);
            let deltas = cfg.grid.delta.clone().unwrap_or_else(|| vec![cfg.disorder.delta]);
            let results = deltas
                .par_iter()
                .map(|&delta| {
                    let dist = ottoforge_core::DisorderDistribution { delta, ..cfg.disorder };
                    find_t_s(&spec, &dist, &cfg.search).with_context(|| format!("{name} at delta = {delta}"))
                })
                .collect::<Result<Vec<_>>>()?;
            for (delta, result) in deltas.iter().zip(&results) {
                let reached = matches!(result, ReachingTime::Reached(_));
                table.push(vec![(*delta).into(), result.time().into(), reached.into()]);
            }
            summary.push(("tolerance".into(), cfg.search.tolerance.to_string()));
            summary.push((
                "t_s".into(),
                format_list(results.iter().map(|r| match r {
                    ReachingTime::Reached(t) => t.to_string(),
                    ReachingTime::NotReached { cap } => format!("not reached by {cap}"),
                })),
            ));
            table
        }
    };
    summary.push(("rows".into(), table.rows.len().to_string()));
    Ok(Outcome { table, summary })
}

fn describe_index(index: Option<usize>) -> String {
    index.map_or_else(|| "none".to_string(), |k| k.to_string())
}
