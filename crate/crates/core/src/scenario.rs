//! Scenario files: INI-style sections of `key = value` lines.
//!
//! ```text
//! [scenario]
//! name = cox_unit
//! seed = 7
//! n_paths = 100000
//!
//! [model]
//! kind = cox
//! intensity = linear
//! rate = 1
//!
//! [grid]
//! horizon = 1
//! steps = 1000
//!
//! [tests]
//! run = hazard, pseudo_stopping
//!
//! [pricing]
//! maturity = 1
//! promised = 1
//! recovery = 0
//! ```
//!
//! `#` and `;` start comments. Errors carry the 1-based line number.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::grid_paths::TimeGrid;
use crate::random_times::{IntensitySpec, RandomTimeModel, SupremumMonitoring, ZeroDetection};
use crate::regression::{Basis, RegressionSpec, StateVar};
use crate::stats::DEFAULT_CHUNK_SIZE;

/// Scenarios shipped with the crate, as `(name, file contents)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("cox_unit", include_str!("../scenarios/cox_unit.ini")),
    ("cox_stochastic", include_str!("../scenarios/cox_stochastic.ini")),
    ("honest_expmart", include_str!("../scenarios/honest_expmart.ini")),
    ("last_zero", include_str!("../scenarios/last_zero.ini")),
    ("poisson_counterexample", include_str!("../scenarios/poisson_counterexample.ini")),
];

/// Tests a scenario may select.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TestKind {
    Floor,
    Hazard,
    PseudoStopping,
    Compensator,
    Avoidance,
    MonotoneZ,
    Mu,
    Regression,
    DoobMeyer,
}

impl TestKind {
    pub const ALL: [TestKind; 9] = [
        TestKind::Floor,
        TestKind::Hazard,
        TestKind::PseudoStopping,
        TestKind::Compensator,
        TestKind::Avoidance,
        TestKind::MonotoneZ,
        TestKind::Mu,
        TestKind::Regression,
        TestKind::DoobMeyer,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestKind::Floor => "floor",
            TestKind::Hazard => "hazard",
            TestKind::PseudoStopping => "pseudo_stopping",
            TestKind::Compensator => "compensator",
            TestKind::Avoidance => "avoidance",
            TestKind::MonotoneZ => "monotone_z",
            TestKind::Mu => "mu",
            TestKind::Regression => "regression",
            TestKind::DoobMeyer => "doob_meyer",
        }
    }
}

impl FromStr for TestKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        TestKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = TestKind::ALL.iter().map(TestKind::name).collect();
                format!("unknown test `{s}` (known: {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
    /// Start of the refined region and the refinement factor.
    pub refine: Option<(f64, usize)>,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        match self.refine {
            Some((from, factor)) => TimeGrid::refined(self.horizon, self.steps, from, factor),
            None => TimeGrid::uniform(self.horizon, self.steps),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestSelection {
    pub run: Vec<TestKind>,
    pub probe_pairs: Vec<(f64, f64)>,
    pub mu_pair: (f64, f64),
    pub deltas: Vec<f64>,
    pub time_scale: f64,
    pub regression: RegressionSpec,
    /// Regression times; every grid time when `None`.
    pub regression_times: Option<Vec<f64>>,
    pub regression_tolerance: f64,
    pub doob: RegressionSpec,
    pub doob_times: Option<Vec<f64>>,
    pub doob_tolerance: f64,
}

impl Default for TestSelection {
    fn default() -> Self {
        Self {
            run: Vec::new(),
            probe_pairs: vec![(0.25, 0.75)],
            mu_pair: (0.5, 1.0),
            deltas: vec![0.1, 0.01],
            time_scale: 1.0,
            regression: RegressionSpec::cubic(vec![StateVar::W]),
            regression_times: None,
            regression_tolerance: 0.02,
            doob: RegressionSpec::cubic(vec![StateVar::Z]),
            doob_times: None,
            doob_tolerance: 0.02,
        }
    }
}

/// Constant-claim pricing block: pays `promised` at `maturity` if no default,
/// `recovery` otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pricing {
    pub maturity: f64,
    pub promised: f64,
    pub recovery: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub n_paths: usize,
    pub chunk_size: usize,
    pub model: RandomTimeModel,
    pub grid: GridSpec,
    pub tests: TestSelection,
    pub pricing: Option<Pricing>,
    pub output: PathBuf,
    /// Number of paths written to the per-path CSVs.
    pub export_paths: usize,
}

impl Scenario {
    /// A bundled scenario by name.
    pub fn bundled(name: &str) -> Result<Self> {
        let text = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| LabError::invalid(format!("no bundled scenario named `{name}`")))?;
        Self::parse(text)
    }

    /// Reads a scenario file, or a bundled scenario when `path` names one and
    /// no such file exists.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            if let Some(name) = path.to_str().filter(|s| BUNDLED.iter().any(|(n, _)| n == s)) {
                return Self::bundled(name);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::parse(text)?;
        let mut sc = ini.section("scenario")?;
        let name = sc.take_string("name")?.unwrap_or_else(|| "scenario".into());
        let seed = sc.require::<u64>("seed")?;
        let n_paths = sc.require::<usize>("n_paths")?;
        let chunk_size = sc.take::<usize>("chunk_size")?.unwrap_or(DEFAULT_CHUNK_SIZE);
        let export_paths = sc.take::<usize>("export_paths")?.unwrap_or(20);
        let output = sc
            .take_string("output")?
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs").join(&name));
        sc.finish()?;
        if n_paths == 0 {
            return Err(ini.error_at("scenario", "n_paths", "n_paths must be positive"));
        }
        if chunk_size == 0 {
            return Err(ini.error_at("scenario", "chunk_size", "chunk_size must be positive"));
        }

        let model = parse_model(&ini)?;

        let mut g = ini.section("grid")?;
        let horizon = g.require::<f64>("horizon")?;
        let steps = g.require::<usize>("steps")?;
        let refine_from = g.take::<f64>("refine_from")?;
        let refine_factor = g.take::<usize>("refine_factor")?;
        g.finish()?;
        let grid = GridSpec {
            horizon,
            steps,
            refine: match (refine_from, refine_factor) {
                (Some(f), Some(k)) => Some((f, k)),
                (None, None) => None,
                _ => {
                    return Err(ini.error_at("grid", "refine_from", "refine_from and refine_factor go together"));
                }
            },
        };
        grid.build().map_err(|e| ini.error_at("grid", "horizon", &e.to_string()))?;

        let tests = parse_tests(&ini)?;

        let pricing = if ini.has("pricing") {
            let mut p = ini.section("pricing")?;
            let pricing = Pricing {
                maturity: p.require("maturity")?,
                promised: p.require("promised")?,
                recovery: p.require("recovery")?,
            };
            p.finish()?;
            if !(pricing.maturity >= 0.0 && pricing.maturity <= horizon) {
                return Err(ini.error_at("pricing", "maturity", "maturity must lie in [0, horizon]"));
            }
            Some(pricing)
        } else {
            None
        };
        ini.reject_unknown_sections(&["scenario", "model", "grid", "tests", "pricing"])?;

        Ok(Scenario {
            name,
            seed,
            n_paths,
            chunk_size,
            model,
            grid,
            tests,
            pricing,
            output,
            export_paths,
        })
    }

    /// Canonical INI text of the scenario; parses back to an equal value.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[scenario]");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_paths = {}", self.n_paths);
        let _ = writeln!(s, "chunk_size = {}", self.chunk_size);
        let _ = writeln!(s, "export_paths = {}", self.export_paths);
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "\n[model]");
        match &self.model {
            RandomTimeModel::Cox { intensity } => {
                let _ = writeln!(s, "kind = cox");
                let (name, rate) = match intensity {
                    IntensitySpec::Linear { rate } => ("linear", rate),
                    IntensitySpec::BrownianSquared { rate } => ("brownian_squared", rate),
                };
                let _ = writeln!(s, "intensity = {name}");
                let _ = writeln!(s, "rate = {rate}");
            }
            RandomTimeModel::HonestFromN { tail_eps, monitoring } => {
                let _ = writeln!(s, "kind = honest");
                let _ = writeln!(s, "tail_eps = {tail_eps}");
                let _ = writeln!(s, "monitoring = {}", monitoring_name(*monitoring));
            }
            RandomTimeModel::LastZeroBeforeOne { detection } => {
                let _ = writeln!(s, "kind = last_zero");
                let _ = writeln!(s, "detection = {}", detection_name(*detection));
            }
            RandomTimeModel::PoissonFirstJump { rate } => {
                let _ = writeln!(s, "kind = poisson");
                let _ = writeln!(s, "rate = {rate}");
            }
        }
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "horizon = {}", self.grid.horizon);
        let _ = writeln!(s, "steps = {}", self.grid.steps);
        if let Some((from, factor)) = self.grid.refine {
            let _ = writeln!(s, "refine_from = {from}");
            let _ = writeln!(s, "refine_factor = {factor}");
        }
        let t = &self.tests;
        let _ = writeln!(s, "\n[tests]");
        let run: Vec<&str> = t.run.iter().map(TestKind::name).collect();
        let _ = writeln!(s, "run = {}", run.join(", "));
        let pairs: Vec<String> = t.probe_pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        let _ = writeln!(s, "probe_pairs = {}", pairs.join(", "));
        let _ = writeln!(s, "mu_pair = {}:{}", t.mu_pair.0, t.mu_pair.1);
        let _ = writeln!(s, "deltas = {}", join(&t.deltas));
        let _ = writeln!(s, "time_scale = {}", t.time_scale);
        write_regression(&mut s, "regression", &t.regression, &t.regression_times);
        let _ = writeln!(s, "regression_tolerance = {}", t.regression_tolerance);
        write_regression(&mut s, "doob", &t.doob, &t.doob_times);
        let _ = writeln!(s, "doob_tolerance = {}", t.doob_tolerance);
        if let Some(p) = &self.pricing {
            let _ = writeln!(s, "\n[pricing]");
            let _ = writeln!(s, "maturity = {}", p.maturity);
            let _ = writeln!(s, "promised = {}", p.promised);
            let _ = writeln!(s, "recovery = {}", p.recovery);
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

fn write_regression(s: &mut String, prefix: &str, spec: &RegressionSpec, times: &Option<Vec<f64>>) {
    let state: Vec<&str> = spec.state.iter().map(|v| state_name(*v)).collect();
    let _ = writeln!(s, "{prefix}_state = {}", state.join(", "));
    match spec.basis {
        Basis::Polynomial { degree } => {
            let _ = writeln!(s, "{prefix}_degree = {degree}");
        }
        Basis::PiecewiseConstant { bins } => {
            let _ = writeln!(s, "{prefix}_bins = {bins}");
        }
    }
    let _ = writeln!(s, "{prefix}_ridge = {}", spec.ridge);
    if let Some(t) = times {
        let _ = writeln!(s, "{prefix}_times = {}", join(t));
    }
}

fn state_name(v: StateVar) -> &'static str {
    match v {
        StateVar::W => "W",
        StateVar::AbsW => "absW",
        StateVar::Sigma => "Sigma",
        StateVar::N => "N",
        StateVar::LogSigma => "lnSigma",
        StateVar::LogN => "lnN",
        StateVar::Time => "t",
        StateVar::Z => "Z",
    }
}

fn monitoring_name(m: SupremumMonitoring) -> &'static str {
    match m {
        SupremumMonitoring::Grid => "grid",
        SupremumMonitoring::Bridge => "bridge",
    }
}

fn detection_name(d: ZeroDetection) -> &'static str {
    match d {
        ZeroDetection::SignChange => "sign_change",
        ZeroDetection::Bridge => "bridge",
    }
}

fn parse_model(ini: &Ini) -> Result<RandomTimeModel> {
    let mut m = ini.section("model")?;
    let kind = m.require_string("kind")?;
    let model = match kind.as_str() {
        "cox" => {
            let rate = m.take::<f64>("rate")?.unwrap_or(1.0);
            let intensity = match m.take_string("intensity")?.as_deref().unwrap_or("linear") {
                "linear" => IntensitySpec::Linear { rate },
                "brownian_squared" => IntensitySpec::BrownianSquared { rate },
                other => return Err(m.error("intensity", &format!("unknown intensity `{other}`"))),
            };
            RandomTimeModel::Cox { intensity }
        }
        "honest" => {
            let tail_eps = m.take::<f64>("tail_eps")?.unwrap_or(1e-3);
            let monitoring = match m.take_string("monitoring")?.as_deref().unwrap_or("bridge") {
                "bridge" => SupremumMonitoring::Bridge,
                "grid" => SupremumMonitoring::Grid,
                other => return Err(m.error("monitoring", &format!("unknown monitoring `{other}`"))),
            };
            RandomTimeModel::HonestFromN { tail_eps, monitoring }
        }
        "last_zero" => {
            let detection = match m.take_string("detection")?.as_deref().unwrap_or("bridge") {
                "bridge" => ZeroDetection::Bridge,
                "sign_change" => ZeroDetection::SignChange,
                other => return Err(m.error("detection", &format!("unknown detection `{other}`"))),
            };
            RandomTimeModel::LastZeroBeforeOne { detection }
        }
        "poisson" => RandomTimeModel::PoissonFirstJump {
            rate: m.take::<f64>("rate")?.unwrap_or(1.0),
        },
        other => {
            return Err(m.error("kind", &format!("unknown model kind `{other}` (cox, honest, last_zero, poisson)")));
        }
    };
    model.validate().map_err(|e| m.error("kind", &e.to_string()))?;
    m.finish()?;
    Ok(model)
}

fn parse_tests(ini: &Ini) -> Result<TestSelection> {
    let mut out = TestSelection::default();
    if !ini.has("tests") {
        return Ok(out);
    }
    let mut t = ini.section("tests")?;
    if let Some((value, line)) = t.take_raw("run") {
        out.run = split_list(&value)
            .map(|s| s.parse::<TestKind>().map_err(|message| LabError::Config { line, message }))
            .collect::<Result<_>>()?;
    }
    if let Some((value, line)) = t.take_raw("probe_pairs") {
        out.probe_pairs = split_list(&value).map(|p| parse_pair(p, line)).collect::<Result<_>>()?;
    }
    if let Some((value, line)) = t.take_raw("mu_pair") {
        out.mu_pair = parse_pair(value.trim(), line)?;
    }
    if let Some(v) = t.take_list::<f64>("deltas")? {
        out.deltas = v;
    }
    if let Some(v) = t.take::<f64>("time_scale")? {
        out.time_scale = v;
    }
    out.regression = parse_regression(&mut t, "regression", out.regression)?;
    out.regression_times = t.take_times("regression_times")?;
    if let Some(v) = t.take::<f64>("regression_tolerance")? {
        out.regression_tolerance = v;
    }
    out.doob = parse_regression(&mut t, "doob", out.doob)?;
    out.doob_times = t.take_times("doob_times")?;
    if let Some(v) = t.take::<f64>("doob_tolerance")? {
        out.doob_tolerance = v;
    }
    t.finish()?;
    Ok(out)
}

fn parse_regression(t: &mut SectionReader<'_>, prefix: &str, mut spec: RegressionSpec) -> Result<RegressionSpec> {
    if let Some((value, line)) = t.take_raw(&format!("{prefix}_state")) {
        spec.state = split_list(&value)
            .map(|s| {
                StateVar::parse(s).ok_or_else(|| LabError::Config {
                    line,
                    message: format!("unknown state variable `{s}` (W, N, Sigma, lnN, lnSigma, t, Z)"),
                })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(d) = t.take::<usize>(&format!("{prefix}_degree"))? {
        spec.basis = Basis::Polynomial { degree: d };
    }
    if let Some(b) = t.take::<usize>(&format!("{prefix}_bins"))? {
        spec.basis = Basis::PiecewiseConstant { bins: b };
    }
    if let Some(r) = t.take::<f64>(&format!("{prefix}_ridge"))? {
        spec.ridge = r;
    }
    spec.validate().map_err(|e| t.error(&format!("{prefix}_state"), &e.to_string()))?;
    Ok(spec)
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_pair(p: &str, line: usize) -> Result<(f64, f64)> {
    let err = || LabError::Config {
        line,
        message: format!("expected a probe pair like 0.25:0.75, got `{p}`"),
    };
    let (a, b) = p.split_once(':').ok_or_else(err)?;
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?);
    if !(a < b) {
        return Err(err());
    }
    Ok((a, b))
}

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

/// Parsed INI text: sections of unique keys.
#[derive(Debug)]
struct Ini {
    sections: Vec<Section>,
}

impl Ini {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| LabError::Config {
                    line,
                    message: format!("unterminated section header `{content}`"),
                })?;
                let name = name.trim().to_string();
                if sections.iter().any(|s| s.name == name) {
                    return Err(LabError::Config {
                        line,
                        message: format!("section [{name}] appears twice"),
                    });
                }
                sections.push(Section {
                    name,
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| LabError::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let section = sections.last_mut().ok_or_else(|| LabError::Config {
                line,
                message: "key outside of any section".into(),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(LabError::Config {
                    line,
                    message: "empty key".into(),
                });
            }
            if section.entries.iter().any(|e| e.key == key) {
                return Err(LabError::Config {
                    line,
                    message: format!("duplicate key `{key}` in [{}]", section.name),
                });
            }
            section.entries.push(Entry {
                key,
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { sections })
    }

    fn has(&self, name: &str) -> bool {
        self.sections.iter().any(|s| s.name == name)
    }

    fn section(&self, name: &str) -> Result<SectionReader<'_>> {
        let section = self.sections.iter().find(|s| s.name == name).ok_or_else(|| LabError::Config {
            line: self.sections.last().map_or(1, |s| s.line),
            message: format!("missing section [{name}]"),
        })?;
        Ok(SectionReader {
            section,
            used: vec![false; section.entries.len()],
        })
    }

    fn error_at(&self, section: &str, key: &str, message: &str) -> LabError {
        let s = self.sections.iter().find(|s| s.name == section);
        let line = s
            .and_then(|s| s.entries.iter().find(|e| e.key == key).map(|e| e.line).or(Some(s.line)))
            .unwrap_or(1);
        LabError::Config {
            line,
            message: message.to_string(),
        }
    }

    fn reject_unknown_sections(&self, known: &[&str]) -> Result<()> {
        match self.sections.iter().find(|s| !known.contains(&s.name.as_str())) {
            Some(s) => Err(LabError::Config {
                line: s.line,
                message: format!("unknown section [{}]", s.name),
            }),
            None => Ok(()),
        }
    }
}

/// Consumes keys of one section; [`SectionReader::finish`] rejects leftovers.
struct SectionReader<'a> {
    section: &'a Section,
    used: Vec<bool>,
}

impl SectionReader<'_> {
    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        let i = self.section.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        let e = &self.section.entries[i];
        Some((e.value.clone(), e.line))
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| LabError::Config {
                line,
                message: format!("cannot parse `{v}` as the value of `{key}`"),
            }),
        }
    }

    fn take_string(&mut self, key: &str) -> Result<Option<String>> {
        Ok(self.take_raw(key).map(|(v, _)| v))
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((v, line)) => split_list(&v)
                .map(|x| {
                    x.parse().map_err(|_| LabError::Config {
                        line,
                        message: format!("cannot parse `{x}` in `{key}`"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// A list of times, or `all` for every grid time.
    fn take_times(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        if let Some(i) = self.section.entries.iter().position(|e| e.key == key) {
            if self.section.entries[i].value == "all" {
                self.used[i] = true;
                return Ok(None);
            }
        }
        self.take_list(key)
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?.ok_or_else(|| self.missing(key))
    }

    fn require_string(&mut self, key: &str) -> Result<String> {
        self.take_string(key)?.ok_or_else(|| self.missing(key))
    }

    fn missing(&self, key: &str) -> LabError {
        LabError::Config {
            line: self.section.line,
            message: format!("[{}] needs `{key}`", self.section.name),
        }
    }

    fn error(&self, key: &str, message: &str) -> LabError {
        let line = self
            .section
            .entries
            .iter()
            .find(|e| e.key == key)
            .map_or(self.section.line, |e| e.line);
        LabError::Config {
            line,
            message: message.to_string(),
        }
    }

    fn finish(self) -> Result<()> {
        match self.used.iter().position(|u| !u) {
            Some(i) => {
                let e = &self.section.entries[i];
                Err(LabError::Config {
                    line: e.line,
                    message: format!("unknown key `{}` in [{}]", e.key, self.section.name),
                })
            }
            None => Ok(()),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} on [0, {}] with {} steps, {} paths, seed {}",
            self.name, self.model, self.grid.horizon, self.grid.steps, self.n_paths, self.seed
        )
    }
}
