//! Run specification: a flat `key = value` file plus command-line
//! overrides, resolved against the loaded problem.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use svrg_admm::advisor::{gamma_min, rho_star, ProblemConditioning};
use svrg_admm::metrics::{ReferenceSolution, TraceOptions};
use svrg_admm::problems::{
    build_ggfl, build_lasso, build_tree_guided, build_tv, gen_classification, gen_tv_data, graph_from_correlation,
    parse_edge_list, parse_libsvm,
};
use svrg_admm::solver::{Averaging, EvalCadence, OpgSchedule, WarmStart};
use svrg_admm::{ConstrainedProblem, LossKind, SampleSet, SmoothSum, SolverConfig, UpdateMode, Variant};

use crate::error::{CliError, CliResult};
use crate::reference_file;

/// Every recognised key with a one-line description. Flags are the
/// kebab-case spelling (`batch_size` → `--batch-size`).
pub const KEYS: &[(&str, &str)] = &[
    ("problem", "ggfl | tree | tv | lasso (default ggfl)"),
    ("data", "LIBSVM training file"),
    ("synthetic", "tv | classification: generate data instead of reading it"),
    ("n", "synthetic sample count (before the test split)"),
    ("d", "feature count (synthetic data; optional hint for LIBSVM)"),
    ("data_seed", "seed for synthetic data and the train/test split (default 0)"),
    ("edges", "edge-list file for ggfl/tree (default: correlation graph)"),
    ("graph_threshold", "|correlation| threshold for the default graph (default 0.5)"),
    ("loss", "logistic | squared | sigmoid (default squared for tv, logistic otherwise)"),
    ("lambda", "l1 weight (default 0.1/sqrt(n) for tv, 1e-5 otherwise)"),
    ("l2", "ridge weight inside f (default 0)"),
    ("update", "exact | linearized | practical (default exact)"),
    ("gamma", "linearization constant (default gamma_min; 1 in practical mode)"),
    ("eta", "stepsize (default 0.5/L_f)"),
    ("rho", "penalty (default rho* when defined, else 1)"),
    ("m", "inner iterations per stage (default ceil(2n/b))"),
    ("batch_size", "mini-batch size (default min(100, n))"),
    ("stages", "number of stages S (default 10)"),
    ("variant", "sc | gc | nc | auto (default auto)"),
    ("averaging", "last_iterate | stage_average (default last_iterate)"),
    ("seed", "solver seed (default 0)"),
    ("warm_start", "opg | none (default opg)"),
    ("warm_iters", "OPG-ADMM iterations (default n/b)"),
    ("opg_schedule", "decaying | constant (default decaying)"),
    ("trace_out", "CSV trace path (default stdout)"),
    ("test_split", "held-out fraction, 0 disables (default 0.5)"),
    ("test_data", "LIBSVM test file; replaces the split"),
    ("eval_cadence", "iter | stage (default stage)"),
    ("reference", "reference file enabling the R column"),
    ("prox_grad", "true | false: fill the prox_grad_sq column (default false)"),
    ("kappa_target", "target contraction for advice (default 0.5)"),
    ("r0_over_epsilon", "initial-to-target accuracy ratio for stage counts (default 1e6)"),
    ("delta", "failure probability for high-probability stage counts"),
];

pub fn is_known_key(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Raw key/value pairs; later insertions win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecPairs {
    values: BTreeMap<String, String>,
}

impl SpecPairs {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = key.trim().replace('-', "_");
        if !is_known_key(&key) {
            return Err(CliError::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_text(&mut self, text: &str) -> CliResult<()> {
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn read_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.parse_text(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Ggfl,
    Tree,
    Tv,
    Lasso,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm(PathBuf),
    SyntheticTv { n: usize, d: usize },
    SyntheticClassification { n: usize, d: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestSource {
    None,
    Split(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    Exact,
    Linearized,
    /// `γ = 1` unless given.
    Practical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: ProblemKind,
    pub data: DataSource,
    pub d_hint: Option<usize>,
    pub data_seed: u64,
    pub edges: Option<PathBuf>,
    pub graph_threshold: f64,
    pub loss: LossKind,
    pub lambda: Option<f64>,
    pub l2: f64,
    pub update: UpdateKind,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub rho: Option<f64>,
    pub m: Option<usize>,
    pub batch_size: Option<usize>,
    pub stages: usize,
    pub variant: Option<Variant>,
    pub averaging: Averaging,
    pub seed: u64,
    pub warm_start: bool,
    pub warm_iters: Option<usize>,
    pub opg_schedule: OpgSchedule,
    pub trace_out: Option<PathBuf>,
    pub test: TestSource,
    pub cadence: EvalCadence,
    pub reference: Option<PathBuf>,
    pub prox_grad: bool,
    pub kappa_target: f64,
    pub r0_over_epsilon: f64,
    pub delta: Option<f64>,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn bad_choice<T>(key: &str, v: &str) -> CliResult<T> {
    Err(CliError::Config(format!("{key}: unsupported value {v:?}")))
}

impl RunSpec {
    pub fn from_pairs(pairs: &SpecPairs) -> CliResult<Self> {
        let get = |k: &str| pairs.get(k);
        let num_f = |k: &str| get(k).map(|v| parse_num::<f64>(k, v)).transpose();
        let num_u = |k: &str| get(k).map(|v| parse_num::<usize>(k, v)).transpose();

        let problem = match get("problem").unwrap_or("ggfl") {
            "ggfl" => ProblemKind::Ggfl,
            "tree" => ProblemKind::Tree,
            "tv" => ProblemKind::Tv,
            "lasso" => ProblemKind::Lasso,
            v => return bad_choice("problem", v),
        };
        let n = num_u("n")?;
        let d = num_u("d")?;
        let data = match (get("data"), get("synthetic")) {
            (Some(path), None) => DataSource::Libsvm(PathBuf::from(path)),
            (None, Some(kind)) => {
                let n = n.ok_or_else(|| CliError::Config("synthetic data needs n".into()))?;
                let d = d.ok_or_else(|| CliError::Config("synthetic data needs d".into()))?;
                match kind {
                    "tv" => DataSource::SyntheticTv { n, d },
                    "classification" => DataSource::SyntheticClassification { n, d },
                    v => return bad_choice("synthetic", v),
                }
            }
            (Some(_), Some(_)) => return Err(CliError::Config("give exactly one of data and synthetic".into())),
            (None, None) => return Err(CliError::Config("no dataset: set data or synthetic".into())),
        };
        let loss = match get("loss") {
            None if problem == ProblemKind::Tv => LossKind::Squared,
            None => LossKind::Logistic,
            Some("logistic") => LossKind::Logistic,
            Some("squared") => LossKind::Squared,
            Some("sigmoid") => LossKind::Sigmoid,
            Some(v) => return bad_choice("loss", v),
        };
        if problem == ProblemKind::Tv && loss != LossKind::Squared {
            return Err(CliError::Config("tv regression uses the squared loss".into()));
        }
        let update = match get("update").unwrap_or("exact") {
            "exact" => UpdateKind::Exact,
            "linearized" => UpdateKind::Linearized,
            "practical" => UpdateKind::Practical,
            v => return bad_choice("update", v),
        };
        let variant = match get("variant").unwrap_or("auto") {
            "auto" => None,
            "sc" => Some(Variant::StronglyConvex),
            "gc" => Some(Variant::GeneralConvex),
            "nc" => Some(Variant::Nonconvex),
            v => return bad_choice("variant", v),
        };
        let averaging = match get("averaging").unwrap_or("last_iterate") {
            "last_iterate" => Averaging::LastIterate,
            "stage_average" => Averaging::StageAverage,
            v => return bad_choice("averaging", v),
        };
        let warm_start = match get("warm_start").unwrap_or("opg") {
            "opg" => true,
            "none" => false,
            v => return bad_choice("warm_start", v),
        };
        let opg_schedule = match get("opg_schedule").unwrap_or("decaying") {
            "decaying" => OpgSchedule::Decaying,
            "constant" => OpgSchedule::Constant,
            v => return bad_choice("opg_schedule", v),
        };
        let cadence = match get("eval_cadence").unwrap_or("stage") {
            "stage" => EvalCadence::Stage,
            "iter" => EvalCadence::Iteration,
            v => return bad_choice("eval_cadence", v),
        };
        let test = match (get("test_data"), num_f("test_split")?) {
            (Some(path), None) => TestSource::File(PathBuf::from(path)),
            (Some(_), Some(_)) => return Err(CliError::Config("give at most one of test_data and test_split".into())),
            (None, Some(f)) if f == 0.0 => TestSource::None,
            (None, Some(f)) if f > 0.0 && f < 1.0 => TestSource::Split(f),
            (None, Some(f)) => return Err(CliError::Config(format!("test_split must lie in [0, 1), got {f}"))),
            (None, None) => TestSource::Split(0.5),
        };
        let spec = Self {
            problem,
            data,
            d_hint: d,
            data_seed: get("data_seed").map(|v| parse_num("data_seed", v)).transpose()?.unwrap_or(0),
            edges: get("edges").map(PathBuf::from),
            graph_threshold: num_f("graph_threshold")?.unwrap_or(0.5),
            loss,
            lambda: num_f("lambda")?,
            l2: num_f("l2")?.unwrap_or(0.0),
            update,
            gamma: num_f("gamma")?,
            eta: num_f("eta")?,
            rho: num_f("rho")?,
            m: num_u("m")?,
            batch_size: num_u("batch_size")?,
            stages: num_u("stages")?.unwrap_or(10),
            variant,
            averaging,
            seed: get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0),
            warm_start,
            warm_iters: num_u("warm_iters")?,
            opg_schedule,
            trace_out: get("trace_out").map(PathBuf::from),
            test,
            cadence,
            reference: get("reference").map(PathBuf::from),
            prox_grad: get("prox_grad").map(|v| parse_bool("prox_grad", v)).transpose()?.unwrap_or(false),
            kappa_target: num_f("kappa_target")?.unwrap_or(0.5),
            r0_over_epsilon: num_f("r0_over_epsilon")?.unwrap_or(1e6),
            delta: num_f("delta")?,
        };
        spec.check_paths()?;
        Ok(spec)
    }

    fn check_paths(&self) -> CliResult<()> {
        let mut paths: Vec<&Path> = Vec::new();
        if let DataSource::Libsvm(p) = &self.data {
            paths.push(p);
        }
        if let TestSource::File(p) = &self.test {
            paths.push(p);
        }
        paths.extend(self.edges.as_deref());
        paths.extend(self.reference.as_deref());
        for p in paths {
            if !p.exists() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// A problem built from a [`RunSpec`] together with its held-out samples.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub problem: ConstrainedProblem,
    pub test: Option<SampleSet>,
    pub reference: Option<ReferenceSolution>,
}

fn read_libsvm(path: &Path, d: Option<usize>) -> CliResult<SampleSet> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(parse_libsvm(BufReader::new(file), d)?)
}

fn read_edges(path: &Path) -> CliResult<Vec<(usize, usize)>> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(parse_edge_list(BufReader::new(file))?)
}

/// Samples named by the spec, before any split.
pub fn load_samples(spec: &RunSpec) -> CliResult<SampleSet> {
    Ok(match &spec.data {
        DataSource::Libsvm(path) => read_libsvm(path, spec.d_hint)?,
        DataSource::SyntheticTv { n, d } => gen_tv_data(*n, *d, spec.data_seed)?.samples,
        DataSource::SyntheticClassification { n, d } => gen_classification(*n, *d, spec.data_seed)?,
    })
}

/// Splits off the held-out part, then builds the problem on the training
/// part. The test file (if any) is read with the training dimension.
pub fn load(spec: &RunSpec) -> CliResult<Loaded> {
    let all = load_samples(spec)?;
    let (train, test) = match &spec.test {
        TestSource::None => (all, None),
        TestSource::Split(frac) => {
            let (train, test) = all.split(1.0 - frac, spec.data_seed)?;
            (train, Some(test))
        }
        TestSource::File(path) => {
            let d = all.d();
            (all, Some(read_libsvm(path, Some(d))?))
        }
    };
    let problem = build_problem(spec, train)?;
    let reference = spec
        .reference
        .as_deref()
        .map(|path| reference_file::read(path, problem.d(), problem.rows()))
        .transpose()?;
    Ok(Loaded {
        problem,
        test,
        reference,
    })
}

pub fn build_problem(spec: &RunSpec, train: SampleSet) -> CliResult<ConstrainedProblem> {
    let n = train.n();
    let lambda = spec.lambda.unwrap_or(match spec.problem {
        ProblemKind::Tv => 0.1 / (n as f64).sqrt(),
        _ => 1e-5,
    });
    let edges = || -> CliResult<Vec<(usize, usize)>> {
        match &spec.edges {
            Some(path) => read_edges(path),
            None => Ok(graph_from_correlation(&train, spec.graph_threshold)?),
        }
    };
    Ok(match spec.problem {
        ProblemKind::Ggfl => {
            let e = edges()?;
            build_ggfl(train, &e, spec.loss, lambda, spec.l2)?
        }
        ProblemKind::Tree => {
            let e = edges()?;
            build_tree_guided(train, &e, spec.loss, lambda, spec.l2)?
        }
        ProblemKind::Tv => {
            if spec.l2 != 0.0 {
                return Err(CliError::Config("tv regression has no l2 term".into()));
            }
            build_tv(train, lambda)?
        }
        ProblemKind::Lasso => build_lasso(train, spec.loss, lambda, spec.l2)?,
    })
}

/// `ρ*` when the strongly convex theory applies.
pub fn default_rho(p: &ConstrainedProblem) -> Option<f64> {
    rho_star(&ProblemConditioning::from_problem(p)).ok()
}

pub fn auto_variant(p: &ConstrainedProblem) -> Variant {
    if !p.f().kind().is_convex() {
        Variant::Nonconvex
    } else if p.f().lambda_f() > 0.0 && p.spectra().is_full_row_rank() {
        Variant::StronglyConvex
    } else {
        Variant::GeneralConvex
    }
}

impl RunSpec {
    pub fn resolve_update(&self, eta: f64, rho: f64, norm_ata: f64) -> CliResult<UpdateMode> {
        Ok(match self.update {
            UpdateKind::Exact => {
                if self.gamma.is_some() {
                    return Err(CliError::Config("gamma applies only to linearized updates".into()));
                }
                UpdateMode::Exact
            }
            UpdateKind::Linearized => UpdateMode::Linearized {
                gamma: match self.gamma {
                    Some(g) => g,
                    None => gamma_min(eta, rho, norm_ata)?,
                },
            },
            UpdateKind::Practical => UpdateMode::Linearized {
                gamma: self.gamma.unwrap_or(1.0),
            },
        })
    }

    /// Solver configuration for `p`, with `rho` overriding the spec's value.
    pub fn solver_config(&self, p: &ConstrainedProblem, rho: Option<f64>) -> CliResult<SolverConfig> {
        let n = p.n();
        let b = self.batch_size.unwrap_or(n.min(100));
        if b == 0 || b > n {
            return Err(CliError::Config(format!("batch_size {b} outside 1..={n}")));
        }
        let eta = self.eta.unwrap_or(0.5 / p.f().l_f());
        let rho = rho.or(self.rho).or_else(|| default_rho(p)).unwrap_or(1.0);
        let update = self.resolve_update(eta, rho, p.spectra().norm_ata)?;
        let m = self.m.unwrap_or((2 * n).div_ceil(b));
        let variant = self.variant.unwrap_or_else(|| auto_variant(p));
        let mut cfg = SolverConfig::new(eta, rho, update, m, b, self.stages, variant);
        cfg.averaging = self.averaging;
        cfg.seed = self.seed;
        cfg.cadence = self.cadence;
        cfg.warm_start = if self.warm_start {
            WarmStart::Opg {
                iterations: self.warm_iters.unwrap_or(n / b),
                schedule: self.opg_schedule,
            }
        } else {
            WarmStart::None
        };
        cfg.validate(p)?;
        Ok(cfg)
    }
}

impl Loaded {
    pub fn trace_options(&self, spec: &RunSpec) -> CliResult<TraceOptions> {
        let test = self
            .test
            .clone()
            .map(|t| SmoothSum::new(self.problem.f().kind(), t, 0.0))
            .transpose()?;
        Ok(TraceOptions {
            reference: self.reference.clone(),
            test,
            prox_grad: spec.prox_grad,
        })
    }
}
