//! Entry points behind the `witsen` binary. Each command returns a document
//! plus a success flag; the binary decides where to write it and how to exit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::counterexample::{
    affine_optimal, payoff_mc, payoff_quadrature, stationarity_residual, wit_nonlinear, Estimator, PayoffBreakdown,
    Prior, ProblemParams, StrategyPair,
};
use crate::error::{config, Result};
use crate::fixed_point::{default_grid, merge_grid, picard_iterate, GridStrategy, DEFAULT_DAMPING};
use crate::ghq_solver::{
    collocation_points, euclidean_norm, initial_levels, residual_vector, solve_signaling_levels, CollocationPair,
    InitTag, RootPolicy, SignalingLevels, DEFAULT_TOL, MAX_ITER,
};
use crate::measure_change::{
    brute_force_pbp, payoff_equivalence, verify_martingale, KernelDefect, MartingaleReport, ModelDocument,
    PayoffEquivalence, StrategySpace,
};
use crate::quadrature::{build_hermite_rule, QuadratureRule};
use crate::staircase::{detect, StaircaseSummary};

/// Environment variable naming the directory for results when no output path is given.
pub const OUTPUT_DIR_ENV: &str = "WITSEN_OUTPUT_DIR";
pub const PAYOFF_OUTER_ORDER: usize = 20;
pub const PAYOFF_INNER_ORDER: usize = 64;
pub const PICARD_TOL: f64 = 1e-10;
pub const VERIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Affine,
    Wit,
    Ghq,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: f64,
    pub sigma: f64,
    pub sigma_x: f64,
    pub prior: Prior,
    /// Quadrature order, also the number of signaling levels.
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub method: Method,
    pub init: InitTag,
    /// False evaluates the start point without solving.
    pub iterate: bool,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    /// False writes `timing: null` so identical runs give identical bytes.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 0.2,
            sigma: 1.0,
            sigma_x: 5.0,
            prior: Prior::Gaussian,
            n: 7,
            samples: 600_000,
            seed: 0,
            method: Method::Ghq,
            init: InitTag::Auto,
            iterate: true,
            format: OutputFormat::Json,
            output: None,
            timing: true,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.k, self.sigma, self.sigma_x, self.prior)
    }

    fn rule(&self) -> Result<QuadratureRule> {
        if self.n == 0 {
            return Err(config("quadrature order n must be at least 1"));
        }
        build_hermite_rule(self.n)
    }

    /// Where output goes: the explicit path, else `$WITSEN_OUTPUT_DIR/<default_name>`, else stdout.
    pub fn output_path(&self, default_name: &str) -> Option<PathBuf> {
        self.output.clone().or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV).map(|d| Path::new(&d).join(default_name))
        })
    }
}

/// Parses `auto`, `affine`, `quantizer`, `quantizer:<scale>` or `user:<v1>,<v2>,…`.
pub fn parse_init(s: &str) -> Result<InitTag> {
    let (head, tail) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    match (head, tail) {
        ("auto", None) => Ok(InitTag::Auto),
        ("affine", None) => Ok(InitTag::Affine),
        ("quantizer", None) => Ok(InitTag::quantizer()),
        ("quantizer", Some(v)) => {
            let scale = v.trim().parse::<f64>().map_err(|e| config(format!("bad quantizer scale {v:?}: {e}")))?;
            Ok(InitTag::Quantizer { scale })
        }
        ("user", Some(list)) => {
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| config(format!("bad level {v:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(InitTag::User { values })
        }
        _ => Err(config(format!("unknown init {s:?}; expected auto, affine, quantizer[:scale] or user:v1,v2,…"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffEntry {
    pub stage1: f64,
    pub stage2: f64,
    pub total: f64,
    pub estimator: String,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub std_error: Option<f64>,
    pub outer_order: Option<usize>,
    pub inner_order: Option<usize>,
}

impl From<PayoffBreakdown> for PayoffEntry {
    fn from(p: PayoffBreakdown) -> Self {
        let mut e = Self {
            stage1: p.stage1,
            stage2: p.stage2,
            total: p.total,
            estimator: String::new(),
            samples: None,
            seed: None,
            std_error: p.std_error,
            outer_order: None,
            inner_order: None,
        };
        match p.estimator {
            Estimator::MonteCarlo { samples, seed } => {
                e.estimator = "monte_carlo".into();
                e.samples = Some(samples);
                e.seed = Some(seed);
            }
            Estimator::Quadrature { outer_order, inner_order } => {
                e.estimator = "quadrature".into();
                e.outer_order = Some(outer_order);
                e.inner_order = Some(inner_order);
            }
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payoffs {
    pub quadrature: PayoffEntry,
    pub monte_carlo: PayoffEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub requested: String,
    /// The start that produced the reported levels (differs from `requested` for `auto`).
    pub used: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityEntry {
    pub max_r1: f64,
    pub max_r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub params: ProblemParams,
    pub method: Method,
    pub init: InitReport,
    /// `γ̄₁` at the collocation points `√2 σ_x z_l`.
    pub levels: Vec<f64>,
    /// Euclidean norm of the collocation residual at `levels` (Picard: last step size).
    /// `None` where undefined (two-point prior, un-iterated Picard).
    pub residual_norm: Option<f64>,
    /// `None` when nothing was iterated.
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub payoff: Payoffs,
    /// Only for the affine baseline.
    pub gains: Option<Gains>,
    /// Max residuals of the optimality conditions on the collocation grids.
    pub stationarity: Option<StationarityEntry>,
    pub timing: Option<Timing>,
}

impl ResultDocument {
    pub fn success(&self) -> bool {
        self.converged != Some(false)
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(doc: &ResultDocument) -> String {
    let p = &doc.payoff;
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    let mut s = String::from(
        "k,sigma,sigma_x,prior,method,init,residual_norm,converged,\
         stage1_quadrature,stage2_quadrature,total_quadrature,\
         stage1_mc,stage2_mc,total_mc,std_error_mc,samples,seed,levels\n",
    );
    let levels: Vec<String> = doc.levels.iter().map(|v| fmt_num(*v)).collect();
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_num(doc.params.k),
        fmt_num(doc.params.sigma),
        fmt_num(doc.params.sigma_x),
        serde_json::to_value(doc.params.prior).unwrap().as_str().unwrap(),
        serde_json::to_value(doc.method).unwrap().as_str().unwrap(),
        doc.init.used,
        opt(doc.residual_norm),
        doc.converged.map(|c| c.to_string()).unwrap_or_default(),
        fmt_num(p.quadrature.stage1),
        fmt_num(p.quadrature.stage2),
        fmt_num(p.quadrature.total),
        fmt_num(p.monte_carlo.stage1),
        fmt_num(p.monte_carlo.stage2),
        fmt_num(p.monte_carlo.total),
        opt(p.monte_carlo.std_error),
        p.monte_carlo.samples.unwrap_or_default(),
        p.monte_carlo.seed.unwrap_or_default(),
        levels.join(" "),
    );
    s
}

/// A strategy pair together with how it was obtained.
pub struct Built {
    pub pair: StrategyPair,
    pub levels: Vec<f64>,
    pub residual_norm: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub init_used: String,
    pub gains: Option<Gains>,
}

/// Builds the pair named by `cfg.method` without evaluating payoffs.
pub fn build_pair(cfg: &RunConfig) -> Result<Built> {
    let params = cfg.params()?;
    let rule = cfg.rule()?;
    let x0 = collocation_points(&params, &rule);
    let residual_at = |levels: &[f64]| {
        (params.prior == Prior::Gaussian).then(|| euclidean_norm(&residual_vector(levels, &params, &rule)))
    };
    match cfg.method {
        Method::Affine | Method::Wit => {
            let (pair, gains) = if cfg.method == Method::Affine {
                let pair = affine_optimal(&params)?;
                let StrategyPair::Affine { lambda, mu } = pair else { unreachable!() };
                (pair, Some(Gains { lambda, mu }))
            } else {
                (wit_nonlinear(&params), None)
            };
            let levels: Vec<f64> = x0.iter().map(|&x| pair.gamma1bar(x)).collect();
            Ok(Built {
                residual_norm: residual_at(&levels),
                levels,
                pair,
                converged: None,
                iterations: None,
                init_used: "none".into(),
                gains,
            })
        }
        Method::Ghq => {
            if !cfg.iterate {
                if cfg.init == InitTag::Auto {
                    return Err(config("--no-iterate needs a concrete start (affine, quantizer or user)"));
                }
                let values = initial_levels(&cfg.init, &params, &rule)?;
                let levels = SignalingLevels::new(values.clone(), params)?;
                let pair = CollocationPair::new(levels, rule.clone(), RootPolicy::default())?;
                return Ok(Built {
                    residual_norm: residual_at(&values),
                    levels: values,
                    pair: StrategyPair::Collocation(pair.into()),
                    converged: None,
                    iterations: None,
                    init_used: cfg.init.label(),
                    gains: None,
                });
            }
            let report = solve_signaling_levels(&params, &rule, cfg.init.clone(), DEFAULT_TOL)?;
            let pair = CollocationPair::new(report.levels.clone(), rule.clone(), RootPolicy::default())?;
            Ok(Built {
                levels: report.levels.values.clone(),
                residual_norm: Some(report.residual_norm),
                pair: StrategyPair::Collocation(pair.into()),
                converged: Some(report.converged),
                iterations: Some(report.iterations),
                init_used: report.init.label(),
                gains: None,
            })
        }
        Method::Picard => {
            let (start, used) = match &cfg.init {
                InitTag::Auto | InitTag::Affine => (affine_optimal(&params)?, "affine".to_string()),
                tag => {
                    let values = initial_levels(tag, &params, &rule)?;
                    let levels = SignalingLevels::new(values, params)?;
                    let pair = CollocationPair::new(levels, rule.clone(), RootPolicy::default())?;
                    (StrategyPair::Collocation(pair.into()), tag.label())
                }
            };
            let grid = merge_grid(&default_grid(&params), &x0);
            let init = GridStrategy::from_pair(&start, grid)?;
            let (strategy, residual_norm, converged, iterations) = if cfg.iterate {
                let r = picard_iterate(&init, &params, &rule, DEFAULT_DAMPING, MAX_ITER, PICARD_TOL)?;
                let last = r.steps.last().copied().unwrap_or(0.0);
                (r.strategy, Some(last), Some(r.converged), Some(r.steps.len()))
            } else {
                (init, None, None, None)
            };
            let levels = x0.iter().map(|&x| strategy.gamma1bar(x)).collect();
            Ok(Built {
                levels,
                residual_norm,
                pair: StrategyPair::Grid(strategy.into()),
                converged,
                iterations,
                init_used: used,
                gains: None,
            })
        }
    }
}

fn evaluate(cfg: &RunConfig, built: Built, started: Instant) -> Result<ResultDocument> {
    let params = cfg.params()?;
    let rule = cfg.rule()?;
    let outer = build_hermite_rule(PAYOFF_OUTER_ORDER)?;
    let inner = build_hermite_rule(PAYOFF_INNER_ORDER)?;
    let quad = payoff_quadrature(&params, &built.pair, &outer, &inner)?;
    let mc = payoff_mc(&params, &built.pair, cfg.samples, cfg.seed)?;
    let stationarity = if matches!(cfg.method, Method::Ghq | Method::Picard) && params.prior == Prior::Gaussian {
        let x0 = collocation_points(&params, &rule);
        let s = stationarity_residual(&params, &built.pair, &rule, &x0, &built.levels)?;
        Some(StationarityEntry { max_r1: s.max_r1(), max_r2: s.max_r2() })
    } else {
        None
    };
    Ok(ResultDocument {
        params,
        method: cfg.method,
        init: InitReport { requested: cfg.init.label(), used: built.init_used },
        levels: built.levels,
        residual_norm: built.residual_norm,
        converged: built.converged,
        iterations: built.iterations,
        payoff: Payoffs { quadrature: quad.into(), monte_carlo: mc.into() },
        gains: built.gains,
        stationarity,
        timing: cfg.timing.then(|| Timing { seconds: started.elapsed().as_secs_f64() }),
    })
}

/// Solves for a person-by-person optimal pair (`ghq` or `picard`).
pub fn cmd_solve(cfg: &RunConfig) -> Result<ResultDocument> {
    if !matches!(cfg.method, Method::Ghq | Method::Picard) {
        return Err(config("solve needs --method ghq or picard; use baseline for affine and wit"));
    }
    let started = Instant::now();
    let built = build_pair(cfg)?;
    evaluate(cfg, built, started)
}

/// Evaluates a baseline pair (`affine` or `wit`).
pub fn cmd_baseline(cfg: &RunConfig) -> Result<ResultDocument> {
    if !matches!(cfg.method, Method::Affine | Method::Wit) {
        return Err(config("baseline needs --method affine or wit"));
    }
    let started = Instant::now();
    let built = build_pair(cfg)?;
    evaluate(cfg, built, started)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRequest {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub points: usize,
}

impl CurveRequest {
    /// `±4σ_x` for both curves.
    pub fn default_for(params: &ProblemParams, points: usize) -> Self {
        let a = 4.0 * params.sigma_x;
        Self { x_range: (-a, a), y_range: (-a, a), points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub params: ProblemParams,
    pub method: Method,
    pub x: Vec<f64>,
    pub gamma1bar: Vec<f64>,
    pub y: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub staircase: StaircaseSummary,
    /// False if the underlying solve did not converge.
    pub converged: Option<bool>,
}

impl Curves {
    pub fn to_csv(&self) -> String {
        let st = &self.staircase;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# staircase steps={} jumps_dominate={} linear_rms_ratio={} non_decreasing={}",
            st.steps,
            st.jumps_dominate,
            fmt_num(st.linear_rms_ratio),
            st.non_decreasing
        );
        for (i, t) in st.treads.iter().enumerate() {
            let _ = writeln!(
                s,
                "# tread {i} x_start={} x_end={} level={} slope={}",
                fmt_num(t.x_start),
                fmt_num(t.x_end),
                fmt_num(t.level),
                fmt_num(t.slope)
            );
        }
        s.push_str("x,gamma1bar,y,gamma2\n");
        for i in 0..self.x.len() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_num(self.x[i]),
                fmt_num(self.gamma1bar[i]),
                fmt_num(self.y[i]),
                fmt_num(self.gamma2[i])
            );
        }
        s
    }
}

fn linspace((a, b): (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Samples `γ̄₁` and `γ₂` of the configured pair and summarises the staircase.
pub fn cmd_curves(cfg: &RunConfig, req: &CurveRequest) -> Result<Curves> {
    if req.points < 2 {
        return Err(config("curves need at least 2 points"));
    }
    for (name, (a, b)) in [("x range", req.x_range), ("y range", req.y_range)] {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(config(format!("{name} must be an increasing finite interval")));
        }
    }
    let built = build_pair(cfg)?;
    let x = linspace(req.x_range, req.points);
    let y = linspace(req.y_range, req.points);
    let gamma1bar: Vec<f64> = x.iter().map(|&v| built.pair.gamma1bar(v)).collect();
    let gamma2: Vec<f64> = y.iter().map(|&v| built.pair.gamma2(v)).collect();
    let staircase = detect(&x, &gamma1bar);
    Ok(Curves { params: cfg.params()?, method: cfg.method, x, gamma1bar, y, gamma2, staircase, converged: built.converged })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PbpSummary {
    pub profiles: usize,
    pub person_by_person: usize,
    pub global: Vec<usize>,
    pub global_cost: f64,
    pub global_within_pbp: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub tolerance: f64,
    pub kernel_defects: Vec<KernelDefect>,
    pub martingale: MartingaleReport,
    pub payoff: PayoffEquivalence,
    pub pbp: Option<PbpSummary>,
    pub passed: bool,
}

/// Exact checks on a finite model file.
pub fn cmd_verify(path: &Path, with_pbp: bool, tol: f64) -> Result<VerifyReport> {
    let text = std::fs::read_to_string(path)?;
    verify_text(&text, with_pbp, tol)
}

pub fn verify_text(text: &str, with_pbp: bool, tol: f64) -> Result<VerifyReport> {
    let doc = ModelDocument::from_json(text)?;
    let profile = doc.profile_or_default();
    let kernel_defects = doc.model.kernel_defects(tol);
    let martingale = verify_martingale(&doc.model, &profile)?;
    let payoff = payoff_equivalence(&doc.model, &profile)?;
    let pbp = if with_pbp {
        let space = StrategySpace::full(&doc.model)?;
        let r = brute_force_pbp(&doc.model, &space)?;
        Some(PbpSummary {
            profiles: r.costs.len(),
            person_by_person: r.person_by_person.len(),
            global_within_pbp: r.global_within_pbp(),
            global: r.global,
            global_cost: r.global_cost,
        })
    } else {
        None
    };
    let passed = kernel_defects.is_empty()
        && martingale.holds(tol)
        && payoff.gap() <= tol
        && pbp.as_ref().is_none_or(|p| p.global_within_pbp);
    Ok(VerifyReport { tolerance: tol, kernel_defects, martingale, payoff, pbp, passed })
}
