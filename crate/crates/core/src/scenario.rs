//! Scenario configuration, dispatch to the checks, and JSON reports.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::decay_fit::{self, TimeWindow, Verdict, DEFAULT_SLACK};
use crate::dispersion::{self, Hypothesis, HypothesisStatus, RelationSpec, DEFAULT_COMPARABILITY};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::SupGrid;
use crate::nonlinear::{self, NonlinearProblem};
use crate::propagator::{self, Flow, GroupDecayConfig, GroupKind, InitialData, SmallTimeConfig};
use crate::special;
use crate::strichartz::{self, HlsCheckConfig, HlsKernelSpec, StrichartzConfig};

fn default_relations() -> Vec<RelationSpec> {
    ["klein_gordon", "beam", "schrodinger4", "wave"]
        .iter()
        .map(|s| RelationSpec::Named(s.to_string()))
        .collect()
}

fn default_comparability() -> f64 {
    DEFAULT_COMPARABILITY
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesesParams {
    #[serde(default = "default_relations")]
    pub relations: Vec<RelationSpec>,
    #[serde(default = "default_comparability")]
    pub comparability: f64,
}

impl Default for HypothesesParams {
    fn default() -> Self {
        HypothesesParams {
            relations: default_relations(),
            comparability: DEFAULT_COMPARABILITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDecayParams {
    pub relation: RelationSpec,
    pub n: usize,
    pub k: i32,
    #[serde(default)]
    pub window: TimeWindow,
    #[serde(default)]
    pub grid: SupGrid,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowFreqParams {
    pub relation: RelationSpec,
    pub n: usize,
    #[serde(default)]
    pub window: TimeWindow,
    #[serde(default)]
    pub grid: SupGrid,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadicParams {
    pub relation: RelationSpec,
    pub n: usize,
    pub t: f64,
    pub scales: Vec<i32>,
    #[serde(default)]
    pub grid: SupGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearParams {
    pub problem: NonlinearProblem,
    /// Also run `M_t`, `2 M_t`, `4 M_t` and report the refinement ratio.
    #[serde(default)]
    pub refine: bool,
    /// `[lo, hi]` bracket for the small-data threshold search.
    #[serde(default)]
    pub threshold: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesselParams {
    pub points: usize,
}

/// One check and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Hypotheses(HypothesesParams),
    KernelDecay(KernelDecayParams),
    LowfreqDecay(LowFreqParams),
    DyadicScaling(DyadicParams),
    GroupDecay(GroupDecayConfig),
    SmallTime(SmallTimeConfig),
    Strichartz(StrichartzConfig),
    Hls(HlsCheckConfig),
    Nonlinear(NonlinearParams),
    BesselSelftest(BesselParams),
}

impl Command {
    pub const NAMES: [&'static str; 10] = [
        "hypotheses",
        "kernel-decay",
        "lowfreq-decay",
        "dyadic-scaling",
        "group-decay",
        "small-time",
        "strichartz",
        "hls",
        "nonlinear",
        "bessel-selftest",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Hypotheses(_) => "hypotheses",
            Command::KernelDecay(_) => "kernel-decay",
            Command::LowfreqDecay(_) => "lowfreq-decay",
            Command::DyadicScaling(_) => "dyadic-scaling",
            Command::GroupDecay(_) => "group-decay",
            Command::SmallTime(_) => "small-time",
            Command::Strichartz(_) => "strichartz",
            Command::Hls(_) => "hls",
            Command::Nonlinear(_) => "nonlinear",
            Command::BesselSelftest(_) => "bessel-selftest",
        }
    }

    /// The default scenario of a command.
    pub fn default_for(name: &str) -> Result<Command> {
        let named = |s: &str| RelationSpec::Named(s.to_string());
        Ok(match name {
            "hypotheses" => Command::Hypotheses(HypothesesParams::default()),
            "kernel-decay" => Command::KernelDecay(KernelDecayParams {
                relation: named("power(2)"),
                n: 1,
                k: 0,
                window: TimeWindow::default(),
                grid: SupGrid::default(),
                slack: DEFAULT_SLACK,
            }),
            "lowfreq-decay" => Command::LowfreqDecay(LowFreqParams {
                relation: named("klein_gordon"),
                n: 1,
                window: TimeWindow::default(),
                grid: SupGrid::default(),
                slack: DEFAULT_SLACK,
            }),
            "dyadic-scaling" => Command::DyadicScaling(DyadicParams {
                relation: named("klein_gordon"),
                n: 3,
                t: 200.0,
                scales: (0..=4).collect(),
                grid: SupGrid::default(),
            }),
            "group-decay" => Command::GroupDecay(kg_group_decay()),
            "small-time" => Command::SmallTime(SmallTimeConfig::default()),
            "strichartz" => Command::Strichartz(StrichartzConfig::schrodinger_1d()),
            "hls" => Command::Hls(HlsCheckConfig::new(HlsKernelSpec {
                gamma1: 0.5,
                gamma2: 2.0,
                p: 2.0,
                q: 2.0,
                n: 1,
            })),
            "nonlinear" => Command::Nonlinear(NonlinearParams {
                problem: NonlinearProblem::kg_1d(),
                refine: false,
                threshold: None,
            }),
            "bessel-selftest" => Command::BesselSelftest(BesselParams { points: 1000 }),
            other => {
                return Err(Error::Config(format!(
                    "unknown command `{other}` (expected one of {})",
                    Command::NAMES.join(", ")
                )))
            }
        })
    }

    /// Replaces the relation of relation-based commands.
    pub fn set_relation(&mut self, rel: RelationSpec) {
        match self {
            Command::Hypotheses(p) => p.relations = vec![rel],
            Command::KernelDecay(p) => p.relation = rel,
            Command::LowfreqDecay(p) => p.relation = rel,
            Command::DyadicScaling(p) => p.relation = rel,
            Command::Strichartz(p) => p.relation = rel,
            _ => {}
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Command::Strichartz(p) => p.seed = seed,
            Command::Hls(p) => p.seed = seed,
            _ => {}
        }
    }

    pub fn set_slack(&mut self, slack: f64) {
        match self {
            Command::KernelDecay(p) => p.slack = slack,
            Command::LowfreqDecay(p) => p.slack = slack,
            Command::GroupDecay(p) => p.slack = slack,
            _ => {}
        }
    }
}

/// Klein-Gordon group `K(t)`, `n = 1`, `p = inf`, `s = 0`, `s' = 1/2` on `t in [10, 1000]`.
pub fn kg_group_decay() -> GroupDecayConfig {
    GroupDecayConfig {
        group: GroupKind::Kg,
        n: 1,
        s: 0.0,
        s_prime: 0.5,
        p: f64::INFINITY,
        q: 2.0,
        flow: Flow::Sine,
        data: InitialData::gaussian(1.0),
        window: TimeWindow::default(),
        grid: None,
        slack: DEFAULT_SLACK,
        period_samples: 1,
    }
}

/// Beam group `B(t)`, `n = 2`, `p = inf`, `s = s' = 0` on `t in [10, 100]`,
/// enveloped over the carrier period.
pub fn beam_group_decay() -> GroupDecayConfig {
    GroupDecayConfig {
        group: GroupKind::Beam,
        n: 2,
        s: 0.0,
        s_prime: 0.0,
        p: f64::INFINITY,
        q: 2.0,
        flow: Flow::Sine,
        data: InitialData::gaussian(1.0),
        window: TimeWindow {
            t_min: 10.0,
            t_max: 100.0,
            samples: 12,
        },
        grid: Some(propagator::GridSpec {
            points: 1024,
            length: 300.0,
        }),
        slack: DEFAULT_SLACK,
        period_samples: 6,
    }
}

/// `e^{i t omega}` for Klein-Gordon at `p = 2`, `s = s' = 0`: a constant ratio.
pub fn unitary_control() -> GroupDecayConfig {
    GroupDecayConfig {
        p: 2.0,
        s_prime: 0.0,
        flow: Flow::Unitary,
        slack: 0.02,
        ..kg_group_decay()
    }
}

/// A named scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Suite {
    scenarios: Vec<Scenario>,
}

/// Parses a config holding one scenario or `{"scenarios": [...]}`; errors
/// keep serde's line and column.
pub fn parse_config(text: &str) -> Result<Vec<Scenario>> {
    let value: Value = serde_json::from_str(text)?;
    if value.get("scenarios").is_some() {
        return Ok(serde_json::from_str::<Suite>(text)?.scenarios);
    }
    Ok(vec![serde_json::from_str::<Scenario>(text)?])
}

/// One verdict with the numbers needed to recheck it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: String,
    pub command: String,
    pub predicted: Option<f64>,
    pub fitted: Option<f64>,
    pub slack: Option<f64>,
    pub verdict: Verdict,
    pub details: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NoData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub generated_at_unix: u64,
    pub seed: Option<u64>,
    pub status: Status,
    pub pass: bool,
    pub records: Vec<Record>,
}

impl Report {
    pub fn new(records: Vec<Record>, seed: Option<u64>) -> Report {
        let generated_at_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let (status, pass) = if records.is_empty() {
            (Status::NoData, true)
        } else if records.iter().all(|r| r.verdict.passed()) {
            (Status::Pass, true)
        } else {
            (Status::Fail, false)
        };
        Report {
            generated_at_unix,
            seed,
            status,
            pass,
            records,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.verdict.passed())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// JSON with the timestamp zeroed, for byte comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        Report {
            generated_at_unix: 0,
            ..self.clone()
        }
        .to_json()
    }
}

/// Concatenates records and recomputes the aggregate flag.
pub fn merge(reports: &[Report]) -> Report {
    let seed = match reports.first() {
        Some(first) if reports.iter().all(|r| r.seed == first.seed) => first.seed,
        _ => None,
    };
    Report::new(reports.iter().flat_map(|r| r.records.iter().cloned()).collect(), seed)
}

/// A CSV file produced by a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn series_csv(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

struct Outcome {
    records: Vec<Record>,
    csv: Option<String>,
}

fn record(scenario: &str, command: &str, predicted: Option<f64>, fitted: Option<f64>, slack: Option<f64>, verdict: Verdict, details: Value) -> Record {
    Record {
        scenario: scenario.to_string(),
        command: command.to_string(),
        predicted,
        fitted,
        slack,
        verdict,
        details,
    }
}

/// Runs one scenario.
pub fn run_scenario(name: &str, command: &Command, exec: Execution) -> Result<(Vec<Record>, Vec<Artifact>)> {
    let cmd = command.name();
    let out = match command {
        Command::Hypotheses(p) => {
            let grid = dispersion::default_hypothesis_grid();
            let mut records = Vec::new();
            let mut csv = String::from("relation,hypothesis,status,ratio_min,ratio_max,normalized_min,normalized_max\n");
            for spec in &p.relations {
                let rel = spec.build()?;
                let rep = dispersion::verify_hypotheses(&rel, p.comparability, &grid)?;
                for h in Hypothesis::ALL {
                    let r = rep.record(h);
                    let spread = if r.status == HypothesisStatus::NotDeclared {
                        None
                    } else {
                        Some(r.normalized_max.max(1.0 / r.normalized_min))
                    };
                    let _ = writeln!(
                        csv,
                        "{},{:?},{:?},{},{},{},{}",
                        rep.relation, h, r.status, r.ratio_min, r.ratio_max, r.normalized_min, r.normalized_max
                    );
                    records.push(record(
                        name,
                        cmd,
                        Some(p.comparability),
                        spread,
                        None,
                        Verdict::from_bool(r.status != HypothesisStatus::Fail),
                        json!({ "relation": rep.relation, "record": r, "metadata_consistent": rep.metadata_consistent }),
                    ));
                }
            }
            Outcome { records, csv: Some(csv) }
        }
        Command::KernelDecay(p) => {
            let rel = p.relation.build()?;
            let grid = SupGrid { exec, ..p.grid.clone() };
            let sweep = decay_fit::kernel_decay(&rel, p.n, p.k, &p.window, &grid, p.slack)?;
            sweep_outcome(name, cmd, &sweep)
        }
        Command::LowfreqDecay(p) => {
            let rel = p.relation.build()?;
            let grid = SupGrid { exec, ..p.grid.clone() };
            let sweep = decay_fit::lowfreq_decay(&rel, p.n, &p.window, &grid, p.slack)?;
            sweep_outcome(name, cmd, &sweep)
        }
        Command::DyadicScaling(p) => {
            let rel = p.relation.build()?;
            let grid = SupGrid { exec, ..p.grid.clone() };
            let fit = decay_fit::dyadic_scaling_fit(&rel, p.n, p.t, &p.scales, &grid)?;
            let csv = series_csv("k,sup", fit.samples.iter().map(|(k, m)| format!("{k},{m}")));
            Outcome {
                records: vec![record(
                    name,
                    cmd,
                    Some(fit.predicted),
                    Some(fit.slope),
                    Some(fit.tolerance),
                    fit.verdict,
                    serde_json::to_value(&fit)?,
                )],
                csv: Some(csv),
            }
        }
        Command::GroupDecay(c) => {
            let r = propagator::group_decay_check(c, exec)?;
            let csv = series_csv("t,ratio", r.series.samples.iter().map(|(t, v)| format!("{t},{v}")));
            Outcome {
                records: vec![record(
                    name,
                    cmd,
                    Some(r.predicted),
                    Some(r.series.fit.slope),
                    Some(c.slack),
                    r.verdict(),
                    serde_json::to_value(&r)?,
                )],
                csv: Some(csv),
            }
        }
        Command::SmallTime(c) => {
            let r = propagator::beam_small_time_check(c, exec)?;
            let csv = series_csv("t,ratio,width", r.samples.iter().map(|(t, v, w)| format!("{t},{v},{w}")));
            Outcome {
                records: vec![record(
                    name,
                    cmd,
                    Some(r.exponent),
                    Some(r.free_slope),
                    None,
                    r.verdict,
                    json!({ "config": c, "result": r }),
                )],
                csv: Some(csv),
            }
        }
        Command::Strichartz(c) => {
            let r = strichartz::strichartz_ratio_check(c, exec)?;
            let hi = r.runs.iter().map(|x| x.max_ratio).fold(0.0, f64::max);
            let csv = series_csv(
                "horizon,points,max_ratio",
                r.runs.iter().map(|x| format!("{},{},{}", x.horizon, x.points, x.max_ratio)),
            );
            Outcome {
                records: vec![record(name, cmd, None, Some(hi), Some(c.stability), r.verdict, serde_json::to_value(&r)?)],
                csv: Some(csv),
            }
        }
        Command::Hls(c) => {
            let r = strichartz::hls_numeric_check(c, exec)?;
            Outcome {
                records: vec![record(
                    name,
                    cmd,
                    Some(r.max_ratio),
                    Some(r.refined_max_ratio),
                    Some(0.2),
                    r.verdict,
                    serde_json::to_value(&r)?,
                )],
                csv: None,
            }
        }
        Command::Nonlinear(p) => {
            let run = nonlinear::picard_iterate(&p.problem, exec)?;
            let rep = &run.report;
            let worst = rep.ratios.iter().cloned().fold(0.0, f64::max);
            let mut records = vec![record(
                name,
                cmd,
                Some(nonlinear::CONTRACTION),
                Some(worst),
                Some(0.0),
                rep.verdict,
                serde_json::to_value(rep)?,
            )];
            if p.refine {
                let ratio = nonlinear::refinement_ratio(&p.problem, exec)?;
                records.push(record(
                    &format!("{name}/refinement"),
                    cmd,
                    Some(4.0),
                    Some(ratio),
                    Some(1.0),
                    Verdict::from_bool((3.0..=5.0).contains(&ratio)),
                    json!({ "steps": [p.problem.steps, 2 * p.problem.steps, 4 * p.problem.steps], "ratio": ratio }),
                ));
            }
            if let Some((lo, hi)) = p.threshold {
                let t = nonlinear::small_data_threshold(&p.problem, lo, hi, 8, exec)?;
                records.push(record(
                    &format!("{name}/threshold"),
                    cmd,
                    None,
                    t.threshold,
                    None,
                    Verdict::from_bool(t.threshold.is_some()),
                    serde_json::to_value(&t)?,
                ));
            }
            let csv = series_csv(
                "iteration,increment,ratio,mixed_norm",
                rep.increments.iter().enumerate().map(|(j, d)| {
                    let ratio = if j == 0 { f64::NAN } else { rep.ratios[j - 1] };
                    format!("{},{},{},{}", j + 1, d, ratio, rep.mixed_norms[j + 1])
                }),
            );
            Outcome { records, csv: Some(csv) }
        }
        Command::BesselSelftest(p) => {
            let r = special::bessel_selftest(p.points)?;
            let worst = r.max_error_integer.max(r.max_error_half);
            Outcome {
                records: vec![record(name, cmd, Some(0.0), Some(worst), Some(1e-10), r.verdict, serde_json::to_value(&r)?)],
                csv: None,
            }
        }
    };
    let artifacts = out
        .csv
        .map(|contents| Artifact {
            file_name: format!("{}.csv", sanitize(name)),
            contents,
        })
        .into_iter()
        .collect();
    Ok((out.records, artifacts))
}

fn sweep_outcome(name: &str, cmd: &str, sweep: &decay_fit::KernelSweep) -> Outcome {
    let r = &sweep.record;
    let csv = series_csv(
        "t,sup,argmax,err_est,converged",
        sweep
            .sups
            .iter()
            .map(|(t, s)| format!("{t},{},{},{},{}", s.value, s.argmax, s.err_est, s.converged)),
    );
    Outcome {
        records: vec![record(
            name,
            cmd,
            Some(r.predicted),
            Some(r.fitted),
            Some(r.slack),
            r.verdict,
            serde_json::to_value(r).unwrap_or(Value::Null),
        )],
        csv: Some(csv),
    }
}

/// Runs scenarios in order; names default to `<command>-<index>`.
pub fn run_suite(scenarios: &[Scenario], seed: Option<u64>, exec: Execution) -> Result<(Report, Vec<Artifact>)> {
    let mut records = Vec::new();
    let mut artifacts = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let name = s.name.clone().unwrap_or_else(|| format!("{}-{i}", s.command.name()));
        let (r, a) = run_scenario(&name, &s.command, exec)?;
        records.extend(r);
        artifacts.extend(a);
    }
    Ok((Report::new(records, seed), artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_and_suite() {
        let one = parse_config(r#"{"command": "bessel-selftest", "points": 10}"#).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].command.name(), "bessel-selftest");
        let suite = parse_config(
            r#"{"scenarios": [
                {"name": "a", "command": "hypotheses"},
                {"command": "kernel-decay", "relation": "power(2)", "n": 1, "k": 0,
                 "window": {"t_min": 10, "t_max": 100, "samples": 8}}
            ]}"#,
        )
        .unwrap();
        assert_eq!(suite.len(), 2);
        assert_eq!(suite[0].name.as_deref(), Some("a"));
    }

    #[test]
    fn rejects_unknown_fields_and_commands() {
        assert!(parse_config(r#"{"command": "bessel-selftest", "points": 10, "bogus": 1}"#).is_err());
        assert!(parse_config(r#"{"command": "nope"}"#).is_err());
        assert!(Command::default_for("nope").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        for name in Command::NAMES {
            let c = Command::default_for(name).unwrap();
            assert_eq!(c.name(), name);
            let s = Scenario { name: None, command: c };
            let text = serde_json::to_string(&s).unwrap();
            assert_eq!(parse_config(&text).unwrap(), vec![s]);
        }
    }

    fn rec(v: Verdict) -> Record {
        record("x", "hls", None, None, None, v, Value::Null)
    }

    #[test]
    fn merging() {
        let pass = Report::new(vec![rec(Verdict::Pass)], Some(0));
        let fail = Report::new(vec![rec(Verdict::Fail)], Some(0));
        assert!(merge(&[pass.clone(), pass.clone()]).pass);
        let m = merge(&[pass.clone(), fail.clone()]);
        assert_eq!(m.status, Status::Fail);
        assert_eq!(m.failures().next().unwrap(), &fail.records[0]);
        let empty = merge(&[]);
        assert_eq!((empty.status, empty.pass), (Status::NoData, true));
    }

    #[test]
    fn hypotheses_on_klein_gordon() {
        let mut c = Command::default_for("hypotheses").unwrap();
        c.set_relation(RelationSpec::Named("klein_gordon".into()));
        let (records, artifacts) = run_scenario("kg", &c, Execution::Sequential).unwrap();
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|r| r.verdict.passed()));
        assert_eq!(artifacts[0].file_name, "kg.csv");
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let mut c = Command::default_for("kernel-decay").unwrap();
        c.set_relation(RelationSpec::Named("nope".into()));
        assert!(matches!(run_scenario("x", &c, Execution::Sequential), Err(Error::UnknownRelation(_))));
    }
}
