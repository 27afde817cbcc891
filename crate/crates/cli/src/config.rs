//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [run]
//! experiment = sweep-time
//! [engine]
//! omega1 = 8
//! ...
//! [grid]
//! t_tilde = 0.05:10:0.05
//! ```
//!
//! Values are numbers, bare words, booleans, ranges `start:stop:step` or
//! lists `[a, b, c]`. Unknown sections and keys are errors.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ottoforge_core::disorder::{DisorderDistribution, DisorderMode, TsSearch};
use ottoforge_core::engine::{EngineSpec, Variant};
use ottoforge_core::lindblad::{GeneratorOptions, DEFAULT_COUPLING, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    /// `section.key`, or the section name for section-level problems.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

const KEYS: &[(&str, &[&str])] = &[
    ("run", &["experiment", "output", "cycles", "cycle", "max_cycles", "seed", "audit"]),
    (
        "engine",
        &[
            "omega1",
            "omega2",
            "t_hot",
            "t_cold",
            "lambda_hot",
            "lambda_cold",
            "t_tilde",
            "variant",
            "transverse_lambda",
            "n",
            "initial_temperature",
            "dt",
            "dephasing",
        ],
    ),
    ("disorder", &["delta", "p", "mode", "tolerance", "step", "cap"]),
    ("grid", &["t_tilde", "transverse_lambda", "n", "delta"]),
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: Option<usize>,
}

/// Parsed `key = value` pairs in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    entries: Vec<Entry>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError {
                        line: Some(line),
                        key: name.to_string(),
                        message: "unknown section (expected run, engine, disorder or grid)".into(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            let Some(section) = section.clone() else {
                return Err(ConfigError {
                    line: Some(line),
                    key: key.to_string(),
                    message: "key outside of any section".into(),
                });
            };
            doc.insert(&section, key, value.trim(), Some(line))?;
        }
        Ok(doc)
    }

    fn insert(&mut self, section: &str, key: &str, value: &str, line: Option<usize>) -> Result<()> {
        let known = KEYS
            .iter()
            .find(|(s, _)| *s == section)
            .is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            return Err(ConfigError {
                line,
                key: format!("{section}.{key}"),
                message: "unknown key".into(),
            });
        }
        if let Some(prev) = self.entries.iter().find(|e| e.section == section && e.key == key) {
            return Err(ConfigError {
                line,
                key: format!("{section}.{key}"),
                message: format!("duplicate key (first set on line {})", prev.line.unwrap_or(0)),
            });
        }
        let value = value.trim_matches('"').to_string();
        self.entries.push(Entry {
            section: section.to_string(),
            key: key.to_string(),
            value,
            line,
        });
        Ok(())
    }

    /// Sets or replaces a value; used for command-line overrides.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        self.entries.retain(|e| !(e.section == section && e.key == key));
        self.insert(section, key, value, None)
    }

    pub fn remove(&mut self, section: &str, key: &str) {
        self.entries.retain(|e| !(e.section == section && e.key == key));
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    /// Canonical text form: sections in fixed order, keys in file order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (section, _) in KEYS {
            let entries: Vec<&Entry> = self.entries.iter().filter(|e| e.section == *section).collect();
            if entries.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{section}]\n"));
            for e in entries {
                out.push_str(&format!("{} = {}\n", e.key, e.value));
            }
        }
        out
    }

    fn error(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.get(section, key).and_then(|e| e.line),
            key: format!("{section}.{key}"),
            message: message.into(),
        }
    }

    fn parsed<T: FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| self.error(section, key, format!("expected {what}, got `{}`", e.value))),
        }
    }

    fn float(&self, section: &str, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parsed(section, key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(self.error(section, key, "must be finite")),
            _ => Ok(v),
        }
    }

    fn required_float(&self, section: &str, key: &str) -> Result<f64> {
        self.float(section, key)?
            .ok_or_else(|| self.error(section, key, "missing required key"))
    }

    fn count(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.parsed(section, key, "a non-negative integer")
    }

    fn flag(&self, section: &str, key: &str) -> Result<Option<bool>> {
        self.parsed(section, key, "`true` or `false`")
    }

    fn range(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => parse_range(&e.value)
                .map(Some)
                .map_err(|m| self.error(section, key, m)),
        }
    }
}

/// Expands `start:stop:step`, `[a, b, ...]` or a single number.
pub fn parse_range(text: &str) -> std::result::Result<Vec<f64>, String> {
    let number = |s: &str| -> std::result::Result<f64, String> {
        let x: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err("values must be finite".into())
        }
    };
    let text = text.trim();
    let values = if let Some(inner) = text.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
        let values = inner
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(number)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("list must be strictly ascending".into());
        }
        values
    } else if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("expected `start:stop:step`, got `{text}`"));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if !(step > 0.0) {
            return Err("step must be positive".into());
        }
        if start > stop {
            return Err("start must not exceed stop".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|k| start + k as f64 * step).collect()
    } else {
        vec![number(text)?]
    };
    if values.is_empty() {
        return Err("range is empty".into());
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Cycle,
    SweepTime,
    LimitCycle,
    Transverse,
    Aux,
    Disorder,
    TsSearch,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Cycle => "cycle",
            Experiment::SweepTime => "sweep-time",
            Experiment::LimitCycle => "limit-cycle",
            Experiment::Transverse => "transverse",
            Experiment::Aux => "aux",
            Experiment::Disorder => "disorder",
            Experiment::TsSearch => "ts-search",
        }
    }

    const ALL: [Experiment; 7] = [
        Experiment::Cycle,
        Experiment::SweepTime,
        Experiment::LimitCycle,
        Experiment::Transverse,
        Experiment::Aux,
        Experiment::Disorder,
        Experiment::TsSearch,
    ];
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub t_tilde: Option<Vec<f64>>,
    pub transverse_lambda: Option<Vec<f64>>,
    pub n: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output: Option<PathBuf>,
    /// Cycles simulated per grid point.
    pub cycles: usize,
    /// Emit only this cycle instead of cycles `1..=cycles`.
    pub cycle: Option<usize>,
    pub max_cycles: usize,
    /// Accepted for compatibility; every computation is deterministic.
    pub seed: Option<u64>,
    pub audit: bool,
    pub engine: EngineSpec,
    pub disorder: DisorderDistribution,
    pub search: TsSearch,
    pub grid: Grid,
    pub document: Document,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::from_document(Document::parse(text)?)
}

impl RunConfig {
    pub fn from_document(doc: Document) -> Result<Self> {
        let experiment = match doc.get("run", "experiment") {
            None => return Err(doc.error("run", "experiment", "missing required key")),
            Some(e) => Experiment::ALL
                .into_iter()
                .find(|x| x.name() == e.value)
                .ok_or_else(|| {
                    let names: Vec<&str> = Experiment::ALL.iter().map(|x| x.name()).collect();
                    doc.error("run", "experiment", format!("unknown experiment `{}` (one of {})", e.value, names.join(", ")))
                })?,
        };
        let output = doc.get("run", "output").map(|e| PathBuf::from(&e.value));
        let cycles = doc.count("run", "cycles")?.unwrap_or(1);
        if cycles == 0 {
            return Err(doc.error("run", "cycles", "must be at least 1"));
        }
        let cycle = doc.count("run", "cycle")?;
        if let Some(c) = cycle {
            if c == 0 || c > cycles {
                return Err(doc.error("run", "cycle", format!("must lie in 1..={cycles} (run.cycles)")));
            }
        }
        let max_cycles = doc.count("run", "max_cycles")?.unwrap_or(100);
        if max_cycles == 0 {
            return Err(doc.error("run", "max_cycles", "must be at least 1"));
        }
        let seed = doc.parsed("run", "seed", "an unsigned integer")?;
        let audit = doc.flag("run", "audit")?.unwrap_or(false);

        let engine = engine_spec(&doc)?;
        let (disorder, search) = disorder_settings(&doc)?;
        let grid = Grid {
            t_tilde: doc.range("grid", "t_tilde")?,
            transverse_lambda: doc.range("grid", "transverse_lambda")?,
            n: doc.range("grid", "n")?,
            delta: doc.range("grid", "delta")?,
        };
        let config = RunConfig {
            experiment,
            output,
            cycles,
            cycle,
            max_cycles,
            seed,
            audit,
            engine,
            disorder,
            search,
            grid,
            document: doc,
        };
        config.check_grid()?;
        Ok(config)
    }

    fn check_grid(&self) -> Result<()> {
        let doc = &self.document;
        if let Some(ts) = &self.grid.t_tilde {
            if ts.iter().any(|t| *t < 0.0) {
                return Err(doc.error("grid", "t_tilde", "stroke times must be non-negative"));
            }
        }
        if let Some(ls) = &self.grid.transverse_lambda {
            if ls.iter().any(|l| !(*l > 0.0)) {
                return Err(doc.error("grid", "transverse_lambda", "must be positive"));
            }
        }
        if let Some(ns) = &self.grid.n {
            if ns.iter().any(|n| !(0.0..=1.0).contains(n)) {
                return Err(doc.error(
                    "grid",
                    "n",
                    "interaction strength must satisfy 0 <= n <= 1.0 (weak system-bath coupling)",
                ));
            }
        }
        if let Some(ds) = &self.grid.delta {
            if ds.iter().any(|d| !(0.0..1.0).contains(d)) {
                return Err(doc.error("grid", "delta", "disorder strength must lie in [0, 1)"));
            }
        }
        let require = |key: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(doc.error(
                    "grid",
                    key,
                    format!("required by experiment `{}`", self.experiment.name()),
                ))
            }
        };
        match self.experiment {
            Experiment::SweepTime => require("t_tilde", self.grid.t_tilde.is_some()),
            Experiment::Transverse => require("transverse_lambda", self.grid.transverse_lambda.is_some()),
            Experiment::Aux => require("n", self.grid.n.is_some()),
            Experiment::Disorder => require("delta", self.grid.delta.is_some()),
            _ => Ok(()),
        }
    }

    /// Stroke times for experiments that accept a `grid.t_tilde` but default
    /// to the single `engine.t_tilde`.
    pub fn stroke_times(&self) -> Vec<f64> {
        self.grid
            .t_tilde
            .clone()
            .unwrap_or_else(|| vec![self.engine.stroke_time])
    }

    /// Applies a `section.key = value` override and revalidates.
    pub fn with_override(self, section: &str, key: &str, value: &str) -> Result<Self> {
        let mut doc = self.document;
        doc.set(section, key, value)?;
        RunConfig::from_document(doc)
    }

    pub fn without(self, section: &str, key: &str) -> Result<Self> {
        let mut doc = self.document;
        doc.remove(section, key);
        RunConfig::from_document(doc)
    }
}

fn engine_spec(doc: &Document) -> Result<EngineSpec> {
    let omega1 = doc.required_float("engine", "omega1")?;
    let omega2 = doc.required_float("engine", "omega2")?;
    if !(omega2 > 0.0) {
        return Err(doc.error("engine", "omega2", "must be positive"));
    }
    if !(omega2 < omega1) {
        return Err(doc.error(
            "engine",
            "omega2",
            format!("must be smaller than engine.omega1 ({omega2} >= {omega1})"),
        ));
    }
    let t_hot = doc.required_float("engine", "t_hot")?;
    let t_cold = doc.required_float("engine", "t_cold")?;
    if !(t_cold > 0.0) {
        return Err(doc.error("engine", "t_cold", "must be positive"));
    }
    if !(t_hot > t_cold) {
        return Err(doc.error("engine", "t_hot", format!("must exceed engine.t_cold ({t_hot} <= {t_cold})")));
    }
    let mut spec = EngineSpec::new(omega1, omega2, t_hot, t_cold);
    for (key, target) in [("lambda_hot", &mut spec.hot.coupling), ("lambda_cold", &mut spec.cold.coupling)] {
        let value = doc.float("engine", key)?.unwrap_or(DEFAULT_COUPLING);
        if !(value > 0.0) {
            return Err(doc.error("engine", key, "must be positive"));
        }
        *target = value;
    }
    spec.stroke_time = doc.float("engine", "t_tilde")?.unwrap_or(1.0);
    if !(spec.stroke_time >= 0.0) {
        return Err(doc.error("engine", "t_tilde", "must be non-negative"));
    }
    spec.initial_temperature = doc.float("engine", "initial_temperature")?.unwrap_or(t_cold);
    if !(spec.initial_temperature >= t_cold && spec.initial_temperature < t_hot) {
        return Err(doc.error(
            "engine",
            "initial_temperature",
            format!("must satisfy t_cold <= initial_temperature < t_hot ({t_cold} <= x < {t_hot})"),
        ));
    }
    spec.dt = doc.float("engine", "dt")?.unwrap_or(DEFAULT_DT);
    if !(spec.dt > 0.0) {
        return Err(doc.error("engine", "dt", "must be positive"));
    }
    spec.generator = GeneratorOptions {
        dephasing: doc.flag("engine", "dephasing")?.unwrap_or(true),
    };
    let variant = doc.get("engine", "variant").map(|e| e.value.as_str()).unwrap_or("baseline");
    spec.variant = match variant {
        "baseline" => Variant::Baseline,
        "transverse" => {
            let big_lambda = doc.required_float("engine", "transverse_lambda")?;
            if !(big_lambda > 0.0) {
                return Err(doc.error("engine", "transverse_lambda", "must be positive"));
            }
            Variant::Transverse { big_lambda }
        }
        "aux" => {
            let n = doc.float("engine", "n")?.unwrap_or(0.0);
            if !(0.0..=1.0).contains(&n) {
                return Err(doc.error(
                    "engine",
                    "n",
                    format!("interaction strength must satisfy 0 <= n <= 1.0 (weak system-bath coupling), got {n}"),
                ));
            }
            Variant::Auxiliary { n }
        }
        other => {
            return Err(doc.error(
                "engine",
                "variant",
                format!("unknown variant `{other}` (one of baseline, transverse, aux)"),
            ))
        }
    };
    spec.validate().map_err(|e| ConfigError {
        line: None,
        key: "engine".into(),
        message: e.to_string(),
    })?;
    Ok(spec)
}

fn disorder_settings(doc: &Document) -> Result<(DisorderDistribution, TsSearch)> {
    let delta = doc.float("disorder", "delta")?.unwrap_or(0.0);
    if !(0.0..1.0).contains(&delta) {
        return Err(doc.error("disorder", "delta", "must lie in [0, 1)"));
    }
    let p = doc.float("disorder", "p")?.unwrap_or(0.9);
    if !(0.0..1.0).contains(&p) {
        return Err(doc.error("disorder", "p", "must lie in [0, 1)"));
    }
    let mode = match doc.get("disorder", "mode").map(|e| e.value.as_str()) {
        None | Some("shared") => DisorderMode::Shared,
        Some("independent") => DisorderMode::Independent,
        Some(other) => {
            return Err(doc.error(
                "disorder",
                "mode",
                format!("unknown mode `{other}` (one of shared, independent)"),
            ))
        }
    };
    let defaults = TsSearch::default();
    let search = TsSearch {
        tolerance: doc.float("disorder", "tolerance")?.unwrap_or(defaults.tolerance),
        step: doc.float("disorder", "step")?.unwrap_or(defaults.step),
        cap: doc.float("disorder", "cap")?.unwrap_or(defaults.cap),
    };
    for (key, value) in [("tolerance", search.tolerance), ("step", search.step)] {
        if !(value > 0.0) {
            return Err(doc.error("disorder", key, "must be positive"));
        }
    }
    if !(search.cap >= search.step) {
        return Err(doc.error("disorder", "cap", "must be at least disorder.step"));
    }
    Ok((DisorderDistribution::new(delta, p).with_mode(mode), search))
}
