//! One function per subcommand. Each returns a [`Report`] carrying both
//! renderings and a verdict; `main` decides where to write and how to exit.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use fermiflow::bounds::{verify_instance, walsh_counterexample, DppBoundsReport, VerifyMode};
use fermiflow::dpp::{
    correlation_function, inclusion_probability, sample_projection_dpp, subsets, tuple_law_capped, Kernel, MixedKernel,
    MixedKernelSpec, PointConfiguration,
};
use fermiflow::ground_space::random_orthonormal;
use fermiflow::rng::{split_seed, stream};
use fermiflow::selftest::{self, chi_square_pvalue, SCHEMA_VERSION};
use fermiflow::slater::projection_kernel;
use fermiflow::w1_bounds::{example_gap_table, EpsilonRule, GapRow};
use fermiflow::w1_exact::{is_monotone, rdm_monotonicity_check};
use fermiflow::{GroundSpace, OrthonormalFamily};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};

/// Stream index of each subcommand under the root seed.
pub mod stream_id {
    pub const VERIFY_LEMMA: u64 = 1;
    pub const BOUNDS: u64 = 3;
    pub const RDM: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    /// A checked mathematical property failed.
    Violation,
    /// Some instance could not be computed (cap, solver).
    Resource,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Ok => 0,
            Verdict::Violation => 1,
            Verdict::Resource => 2,
        }
    }

    fn from_counts(violations: usize, failures: usize) -> Self {
        if violations > 0 {
            Verdict::Violation
        } else if failures > 0 {
            Verdict::Resource
        } else {
            Verdict::Ok
        }
    }
}

#[derive(Debug)]
pub struct Report {
    pub verdict: Verdict,
    pub json: Value,
    pub csv: String,
    /// Human-readable lines for stderr.
    pub notes: Vec<String>,
}

#[derive(Debug)]
pub enum CmdError {
    Config(ConfigError),
    Core(fermiflow::Error),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(e) => write!(f, "config: {e}"),
            CmdError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}

impl From<fermiflow::Error> for CmdError {
    fn from(e: fermiflow::Error) -> Self {
        CmdError::Core(e)
    }
}

type CmdResult = Result<Report, CmdError>;

/// Maps `f` over `0..count` on scoped threads; results stay in index order.
pub fn par_map<T: Send, F: Fn(usize) -> T + Sync>(count: usize, f: F) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let out = f(i);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|x| x.unwrap()).collect()
}

fn header(command: &str, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), json!(cfg.effective()));
    m
}

fn to_value<S: Serialize>(s: &S) -> Value {
    serde_json::to_value(s).expect("report types serialize")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn pair(space: &GroundSpace, n: usize, seed: u64, identical: bool) -> fermiflow::Result<(OrthonormalFamily, OrthonormalFamily)> {
    let a = random_orthonormal(space, n, split_seed(seed, 0))?;
    let b = if identical {
        a.clone()
    } else {
        random_orthonormal(space, n, split_seed(seed, 1))?
    };
    Ok((a, b))
}

// ---------------------------------------------------------------- verify-lemma

#[derive(Debug, Clone, Serialize)]
pub struct LemmaRow {
    pub instance: usize,
    pub seed: u64,
    pub max_minor_error: f64,
    pub diagonal_mass: f64,
    pub mass_error: f64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub samples_outside_support: u64,
    pub passed: bool,
}

impl LemmaRow {
    pub const CSV_HEADER: &'static str = "instance,seed,max_minor_error,diagonal_mass,mass_error,chi_square,\
degrees_of_freedom,p_value,samples_outside_support,passed";

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.instance,
            self.seed,
            self.max_minor_error,
            self.diagonal_mass,
            self.mass_error,
            self.chi_square,
            self.degrees_of_freedom,
            self.p_value,
            self.samples_outside_support,
            self.passed
        )
    }
}

/// Brute-force measurement law against kernel minors, plus a chi-square test
/// of the sampler. With `corrupt` the minors come from `0.9 K` instead.
pub fn verify_lemma(cfg: &RunConfig, corrupt: bool) -> CmdResult {
    let e: usize = cfg.positive("verify.space_size")?;
    let n: usize = cfg.positive("verify.n")?;
    let seeds: usize = cfg.positive("verify.seeds")?;
    let samples: usize = cfg.positive("verify.samples")?;
    let tol: f64 = cfg.get("verify.tol")?;
    // family-wise 1% across instances
    let alpha = 0.01 / seeds as f64;
    let cap = cfg.enumeration_cap;
    let space = GroundSpace::uniform(e)?;
    let root = split_seed(cfg.seed, stream_id::VERIFY_LEMMA);

    let rows = par_map(seeds, |i| -> fermiflow::Result<LemmaRow> {
        let seed = split_seed(root, i as u64);
        let a = random_orthonormal(&space, n, split_seed(seed, 0))?;
        let tl = tuple_law_capped(&a, cap)?;
        let law = tl.configurations()?;
        let kernel: Box<dyn Kernel<f64>> = if corrupt {
            Box::new(MixedKernel::new(&MixedKernelSpec::new(vec![0.9; n], a.clone())?))
        } else {
            Box::new(projection_kernel(&a))
        };
        let mut minor = 0f64;
        for m in 1..=n {
            for set in subsets(e, m) {
                let mu: f64 = set.iter().map(|&x| space.weight(x)).product();
                let want = correlation_function(kernel.as_ref(), &set)? * mu;
                minor = minor.max((inclusion_probability(&law, &set) - want).abs());
            }
        }

        let mut rng = stream(seed, 1);
        let mut counts: BTreeMap<PointConfiguration, u64> = BTreeMap::new();
        for _ in 0..samples {
            *counts.entry(sample_projection_dpp(&a, &mut rng)?).or_default() += 1;
        }
        let outside: u64 = counts.iter().filter(|(c, _)| law.prob(c) == 0.0).map(|(_, k)| k).sum();
        let (obs, probs): (Vec<u64>, Vec<f64>) = law
            .law()
            .iter()
            .map(|(c, p)| (counts.get(c).copied().unwrap_or(0), p))
            .unzip();
        let (stat, df, p) = chi_square_pvalue(&obs, &probs, samples as u64);
        let diag = tl.diagonal_mass();
        let mass_err = (tl.total_mass() - 1.0).abs();
        Ok(LemmaRow {
            instance: i,
            seed,
            max_minor_error: minor,
            diagonal_mass: diag,
            mass_error: mass_err,
            chi_square: stat,
            degrees_of_freedom: df,
            p_value: p,
            samples_outside_support: outside,
            passed: minor <= tol && diag == 0.0 && mass_err <= tol && outside == 0 && p > alpha,
        })
    });
    let rows = rows.into_iter().collect::<fermiflow::Result<Vec<_>>>()?;
    let violations = rows.iter().filter(|r| !r.passed).count();

    let mut j = header("verify-lemma", cfg);
    j.insert("corrupt".into(), json!(corrupt));
    j.insert("p_value_threshold".into(), json!(alpha));
    j.insert("instances".into(), to_value(&rows));
    j.insert(
        "summary".into(),
        json!({
            "instances": rows.len(),
            "violations": violations,
            "max_minor_error": rows.iter().map(|r| r.max_minor_error).fold(0.0, f64::max),
            "min_p_value": rows.iter().map(|r| r.p_value).fold(1.0, f64::min),
        }),
    );
    j.insert("passed".into(), json!(violations == 0));
    let mut csv = vec![LemmaRow::CSV_HEADER.to_string()];
    csv.extend(rows.iter().map(LemmaRow::csv_row));
    Ok(Report {
        verdict: Verdict::from_counts(violations, 0),
        json: Value::Object(j),
        csv: csv.join("\n") + "\n",
        notes: vec![format!("verify-lemma: {violations} of {} instances failed", rows.len())],
    })
}

// ---------------------------------------------------------------- walsh

pub const WALSH_CSV_HEADER: &str =
    "covariance_first,covariance_second,falsified_rhs,falsified_lhs,tv_exact,wsharp_exact,tv_bound,wsharp_bound";

pub fn walsh(cfg: &RunConfig) -> CmdResult {
    let r = walsh_counterexample()?;
    let expected = r.covariance_first == "-1/4" && r.covariance_second == "0" && r.falsified_rhs.abs() < 1e-12 && r.tv_exact > 0.0;
    let mut j = header("walsh", cfg);
    j.insert("report".into(), to_value(&r));
    j.insert("passed".into(), json!(expected));
    let csv = format!(
        "{WALSH_CSV_HEADER}\n{},{},{},{},{},{},{},{}\n",
        r.covariance_first_value,
        r.covariance_second_value,
        r.falsified_rhs,
        r.falsified_lhs,
        r.tv_exact,
        r.wsharp_exact,
        r.tv_bound,
        r.wsharp_bound
    );
    Ok(Report {
        verdict: Verdict::from_counts(!expected as usize, 0),
        json: Value::Object(j),
        csv,
        notes: vec![format!(
            "walsh: covariances ({}, {}), right-hand side {}, exact TV {}",
            r.covariance_first, r.covariance_second, r.falsified_rhs, r.tv_exact
        )],
    })
}

// ---------------------------------------------------------------- bounds

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundsKind {
    Projection,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSummary {
    pub instances: usize,
    pub min_slack_tv: f64,
    pub min_slack_wsharp: f64,
    pub min_slack_wsharp_corrected: f64,
    pub tv_violations: usize,
    pub wsharp_violations: usize,
    pub wsharp_corrected_violations: usize,
}

pub fn bounds(cfg: &RunConfig, mode_override: Option<&str>) -> CmdResult {
    let e: usize = cfg.positive("bounds.space_size")?;
    let n: usize = cfg.positive("bounds.n")?;
    let seeds: usize = cfg.positive("bounds.seeds")?;
    let identical: bool = cfg.get("bounds.identical")?;
    let tol: f64 = cfg.get("bounds.tol")?;
    let kind = match cfg.get::<String>("bounds.kind")?.as_str() {
        "projection" => BoundsKind::Projection,
        "mixed" => BoundsKind::Mixed,
        other => return Err(ConfigError(format!("bounds.kind: expected projection or mixed, got {other:?}")).into()),
    };
    let mode_name = match mode_override {
        Some(m) => m.to_string(),
        None => cfg.get::<String>("bounds.mode")?,
    };
    let empirical = match mode_name.as_str() {
        "exact" => false,
        "empirical" => true,
        other => return Err(ConfigError(format!("bounds.mode: expected exact or empirical, got {other:?}")).into()),
    };
    let samples: usize = cfg.positive("bounds.samples")?;
    let bootstrap: usize = cfg.positive("bounds.bootstrap")?;
    let space = GroundSpace::uniform(e)?;
    let root = split_seed(cfg.seed, stream_id::BOUNDS);

    let reports = par_map(seeds, |i| -> fermiflow::Result<DppBoundsReport> {
        let seed = split_seed(root, i as u64);
        let (a, b) = pair(&space, n, seed, identical)?;
        let (sa, sb) = match kind {
            BoundsKind::Projection => (MixedKernelSpec::projection(a), MixedKernelSpec::projection(b)),
            BoundsKind::Mixed => {
                let mut rng = stream(seed, 2);
                let la: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                let lb = if identical { la.clone() } else { (0..n).map(|_| rng.random()).collect() };
                (MixedKernelSpec::new(la, a)?, MixedKernelSpec::new(lb, b)?)
            }
        };
        let mode = if empirical {
            VerifyMode::Empirical {
                samples,
                seed: split_seed(seed, 3),
                bootstrap,
            }
        } else {
            VerifyMode::Exact
        };
        let mut r = verify_instance(&sa, &sb, mode)?;
        r.seed = Some(seed);
        Ok(r)
    });
    let reports = reports.into_iter().collect::<fermiflow::Result<Vec<_>>>()?;

    let min = |f: fn(&DppBoundsReport) -> f64| reports.iter().map(f).fold(f64::INFINITY, f64::min);
    let count = |f: fn(&DppBoundsReport) -> f64| reports.iter().filter(|r| f(r) < -tol).count();
    let summary = BoundsSummary {
        instances: reports.len(),
        min_slack_tv: min(|r| r.slack_tv),
        min_slack_wsharp: min(|r| r.slack_wsharp),
        min_slack_wsharp_corrected: min(|r| r.slack_wsharp_corrected),
        tv_violations: count(|r| r.slack_tv),
        wsharp_violations: count(|r| r.slack_wsharp),
        wsharp_corrected_violations: count(|r| r.slack_wsharp_corrected),
    };
    // sampling noise can push an estimate past a bound, so only exact mode judges
    let violations = if empirical {
        0
    } else {
        summary.tv_violations + summary.wsharp_violations
    };

    let mut j = header("bounds", cfg);
    j.insert("mode".into(), json!(mode_name));
    j.insert("instances".into(), to_value(&reports));
    j.insert("summary".into(), to_value(&summary));
    j.insert("judged".into(), json!(!empirical));
    j.insert("passed".into(), json!(violations == 0));

    let mut csv = vec![DppBoundsReport::CSV_HEADER.to_string()];
    csv.extend(reports.iter().map(DppBoundsReport::csv_row));
    csv.push(format!(
        ",,,summary,,,,,,{},,,,,,{},,{}",
        summary.min_slack_tv, summary.min_slack_wsharp, summary.min_slack_wsharp_corrected
    ));
    Ok(Report {
        verdict: Verdict::from_counts(violations, 0),
        json: Value::Object(j),
        csv: csv.join("\n") + "\n",
        notes: vec![format!(
            "bounds: {} instances, TV violations {}, W# violations {} (with doubled subset term {}), min slacks {:.3e} / {:.3e}",
            summary.instances,
            summary.tv_violations,
            summary.wsharp_violations,
            summary.wsharp_corrected_violations,
            summary.min_slack_tv,
            summary.min_slack_wsharp
        )],
    })
}

// ---------------------------------------------------------------- rdm-monotonicity

#[derive(Debug, Clone, Serialize)]
pub struct RdmSeedRow {
    pub instance: usize,
    pub seed: u64,
    /// `W1 / k` for `k = 1..=n`
    pub values: Vec<f64>,
    pub w1: Vec<f64>,
    pub gaps: Vec<f64>,
    pub iterations: Vec<usize>,
    pub monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const RDM_CSV_HEADER: &str = "instance,seed,k,w1,value,gap,iterations,monotone";

pub fn rdm_monotonicity(cfg: &RunConfig, identical_flag: bool) -> CmdResult {
    let dim: usize = cfg.positive("rdm.dim")?;
    let n: usize = cfg.positive("rdm.n")?;
    let seeds: usize = cfg.positive("rdm.seeds")?;
    let identical = identical_flag || cfg.get::<bool>("rdm.identical")?;
    let tol: f64 = cfg.get("rdm.tol")?;
    let space = GroundSpace::uniform(dim)?;
    let root = split_seed(cfg.seed, stream_id::RDM);
    let w1cfg = cfg.w1;

    let rows = par_map(seeds, |i| {
        let seed = split_seed(root, i as u64);
        let res = pair(&space, n, seed, identical).and_then(|(a, b)| rdm_monotonicity_check(&a, &b, &w1cfg));
        match res {
            Ok(rs) => RdmSeedRow {
                instance: i,
                seed,
                values: rs.iter().map(|r| r.value).collect(),
                w1: rs.iter().map(|r| r.w1).collect(),
                gaps: rs.iter().map(|r| r.gap).collect(),
                iterations: rs.iter().map(|r| r.iterations).collect(),
                monotone: is_monotone(&rs, 2.0 * tol),
                error: None,
            },
            Err(e) => RdmSeedRow {
                instance: i,
                seed,
                values: vec![],
                w1: vec![],
                gaps: vec![],
                iterations: vec![],
                monotone: false,
                error: Some(e.to_string()),
            },
        }
    });
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let violations = rows.iter().filter(|r| r.error.is_none() && !r.monotone).count();
    let max_value = rows.iter().flat_map(|r| r.values.iter().copied()).fold(0.0, f64::max);

    let mut j = header("rdm-monotonicity", cfg);
    j.insert("identical".into(), json!(identical));
    j.insert("rows".into(), to_value(&rows));
    j.insert(
        "summary".into(),
        json!({
            "instances": rows.len(),
            "non_monotone": violations,
            "solver_failures": failures,
            "max_value": max_value,
        }),
    );
    j.insert("passed".into(), json!(violations == 0 && failures == 0));

    let mut csv = vec![RDM_CSV_HEADER.to_string()];
    for r in &rows {
        for k in 0..r.values.len() {
            csv.push(format!(
                "{},{},{},{},{},{},{},{}",
                r.instance,
                r.seed,
                k + 1,
                r.w1[k],
                r.values[k],
                r.gaps[k],
                r.iterations[k],
                r.monotone
            ));
        }
    }
    let mut notes = vec![format!(
        "rdm-monotonicity: {violations} non-monotone and {failures} failed of {} instances",
        rows.len()
    )];
    notes.extend(rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("instance {}: {e}", r.instance))));
    Ok(Report {
        verdict: Verdict::from_counts(violations, failures),
        json: Value::Object(j),
        csv: csv.join("\n") + "\n",
        notes,
    })
}

// ---------------------------------------------------------------- example-gap

pub fn example_gap(cfg: &RunConfig, n_max_override: Option<usize>) -> CmdResult {
    let n_max = match n_max_override {
        Some(n) if n > 0 => n,
        Some(_) => return Err(ConfigError("--n-max must be positive".into()).into()),
        None => cfg.positive("gap.n_max")?,
    };
    let rule = match cfg.get::<String>("gap.rule")?.as_str() {
        "geometric" => EpsilonRule::Geometric {
            ratio: cfg.get("gap.ratio")?,
        },
        "power" => EpsilonRule::PowerLaw {
            exponent: cfg.get("gap.exponent")?,
        },
        other => return Err(ConfigError(format!("gap.rule: expected geometric or power, got {other:?}")).into()),
    };
    let rows = example_gap_table(n_max, &rule)?;
    let mut j = header("example-gap", cfg);
    j.insert("rule".into(), to_value(&rule));
    j.insert("rows".into(), to_value(&rows));
    let mut csv = vec![GapRow::CSV_HEADER.to_string()];
    csv.extend(rows.iter().map(GapRow::csv_row));
    let last = rows.last().expect("n_max >= 1");
    Ok(Report {
        verdict: Verdict::Ok,
        json: Value::Object(j),
        csv: csv.join("\n") + "\n",
        notes: vec![format!(
            "example-gap: at n = {} trace distance {:.4}, W1 upper bound / n {:.4}",
            last.n, last.trace_distance, last.w1_upper_over_n
        )],
    })
}

// ---------------------------------------------------------------- selftest

pub const SELFTEST_CSV_HEADER: &str = "id,name,passed,runtime_limit_seconds,summary";

pub fn parse_criteria(s: &str) -> Result<Vec<u8>, ConfigError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<u8>() {
            Ok(id) if selftest::CRITERIA.contains(&id) => Ok(id),
            _ => Err(ConfigError(format!("criteria: {t:?} is not one of 1..=9"))),
        })
        .collect()
}

pub fn selftest(cfg: &RunConfig, criteria_override: Option<&str>) -> CmdResult {
    let raw = match criteria_override {
        Some(s) => s.to_string(),
        None => cfg.get::<String>("selftest.criteria")?,
    };
    let ids = parse_criteria(&raw)?;
    if ids.is_empty() {
        return Err(ConfigError("criteria: empty list".into()).into());
    }
    let report = selftest::run(&ids, cfg.seed);
    let mut csv = vec![SELFTEST_CSV_HEADER.to_string()];
    csv.extend(report.criteria.iter().map(|c| {
        format!(
            "{},{},{},{},{}",
            c.id,
            csv_field(&c.name),
            c.passed,
            c.runtime_limit_seconds,
            csv_field(&c.summary)
        )
    }));
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    Ok(Report {
        verdict: Verdict::from_counts(failed, 0),
        json: to_value(&report),
        csv: csv.join("\n") + "\n",
        notes: report.criteria.iter().map(|c| c.line()).collect(),
    })
}
