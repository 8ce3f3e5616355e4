//! Scenario parameters for each suite. Every field has a default, and
//! unknown fields are rejected.

use std::path::{Path, PathBuf};

use pathheat_core::clark_ocone::{DriverKind, SolverSpec};
use pathheat_core::cylindrical::{Basis, Payoff};
use pathheat_core::path::{Atom, Envelope, Grid, PathKind, SampledPath};
use pathheat_core::regcalc::Mode;
use pathheat_core::rng::NormalStream;
use pathheat_core::smooth::Builtin;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The suites the runner knows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Integrate,
    Cylindrical,
    FlowCheck,
    Smooth,
    ClarkOcone,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Integrate => "integrate",
            Suite::Cylindrical => "cylindrical",
            Suite::FlowCheck => "flow-check",
            Suite::Smooth => "smooth",
            Suite::ClarkOcone => "clark-ocone",
            Suite::All => "all",
        }
    }

    /// Shipped default scenario.
    pub fn default_config(self) -> &'static str {
        match self {
            Suite::Integrate => include_str!("../configs/integrate.json"),
            Suite::Cylindrical => include_str!("../configs/cylindrical.json"),
            Suite::FlowCheck => include_str!("../configs/flow-check.json"),
            Suite::Smooth => include_str!("../configs/smooth.json"),
            Suite::ClarkOcone => include_str!("../configs/clark-ocone.json"),
            Suite::All => include_str!("../configs/all.json"),
        }
    }
}

/// A path on `[-T,0]` named in a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Zero,
    Constant { value: f64 },
    /// `amp · cos(freq x) + quad · x²`
    Smooth { amp: f64, freq: f64, quad: f64 },
    /// Brownian-like path of the given scale plus `0.3 sin(2x)`.
    Rough { seed: u64, scale: f64 },
    /// Two-column `x,value` file on the scenario grid, relative to the config file.
    Csv { file: PathBuf },
}

impl PathSpec {
    pub fn build(&self, grid: Grid, base: &Path) -> Result<SampledPath, CliError> {
        Ok(match self {
            PathSpec::Zero => SampledPath::zero(grid),
            PathSpec::Constant { value } => SampledPath::constant(grid, *value),
            PathSpec::Smooth { amp, freq, quad } => SampledPath::from_fn(grid, |x| amp * (freq * x).cos() + quad * x * x),
            PathSpec::Rough { seed, scale } => rough_path(grid, *seed, *scale),
            PathSpec::Csv { file } => {
                let text = std::fs::read_to_string(base.join(file))
                    .map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
                let env = Envelope {
                    horizon: grid.horizon(),
                    n_steps: grid.n_steps(),
                    kind: PathKind::Path,
                    atom0: None,
                    atoms: Vec::new(),
                    density_start: None,
                };
                SampledPath::from_csv(&env, &text)?
            }
        })
    }
}

/// Brownian-like path on `[-T,0]` plus a smooth bump.
pub fn rough_path(grid: Grid, seed: u64, scale: f64) -> SampledPath {
    let mut s = NormalStream::new(seed, 0x7e57, 0);
    let sd = grid.step().sqrt();
    let mut acc = s.normal();
    let mut values = Vec::with_capacity(grid.n_nodes());
    for k in 0..grid.n_nodes() {
        values.push(scale * acc + 0.3 * (2.0 * grid.x(k)).sin());
        acc += sd * s.normal();
    }
    SampledPath::new(grid, values).expect("sized")
}

/// A finite measure given by an optional density plus atoms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSpec {
    pub density: Option<PathSpec>,
    pub atom0: f64,
    pub atoms: Vec<Atom>,
}

/// One explicit forward integral `∫ f d⁻μ` over an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateScenario {
    pub name: String,
    pub mu: MeasureSpec,
    pub f: PathSpec,
    /// Whether `f` has bounded variation; enables the closed forms.
    #[serde(default = "yes")]
    pub bv: bool,
    pub interval: [f64; 2],
    pub mode: Mode,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateParams {
    pub horizon: f64,
    pub n_steps: usize,
    pub cases: usize,
    pub max_degree: usize,
    /// Closed forms must agree with the ε-limit within this multiple of its spread.
    pub spread_factor: f64,
    pub min_slope: f64,
    pub boundary_tol: f64,
    pub scenarios: Vec<IntegrateScenario>,
}

impl Default for IntegrateParams {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_steps: 256,
            cases: 50,
            max_degree: 4,
            spread_factor: 10.0,
            min_slope: 0.9,
            boundary_tol: 1e-10,
            scenarios: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylCase {
    pub label: String,
    pub basis: Vec<Basis>,
    pub payoff: Payoff,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BachelierParams {
    pub n_steps: usize,
    pub points: usize,
    pub y_range: f64,
    pub tolerance: f64,
}

impl Default for BachelierParams {
    fn default() -> Self {
        Self { n_steps: 100, points: 20, y_range: 2.0, tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylMartingaleParams {
    pub n_steps: usize,
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub basis: Vec<Basis>,
    pub payoff: Payoff,
}

impl Default for CylMartingaleParams {
    fn default() -> Self {
        Self {
            n_steps: 64,
            n_paths: 10_000,
            times: vec![0.25, 0.5, 0.75],
            basis: vec![Basis::Constant { value: 1.0 }],
            payoff: Payoff::Square,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylindricalParams {
    pub horizon: f64,
    pub sigma: f64,
    pub n_steps: usize,
    pub points: usize,
    /// Residual points are drawn with `t ≤ t_max_fraction · T`.
    pub t_max_fraction: f64,
    pub cases: Vec<CylCase>,
    pub feature_cases: usize,
    pub feature_tol: f64,
    pub bachelier: BachelierParams,
    pub martingale: CylMartingaleParams,
}

impl Default for CylindricalParams {
    fn default() -> Self {
        let one = Basis::Constant { value: 1.0 };
        let s = Basis::Polynomial { coeffs: vec![0.0, 1.0] };
        Self {
            horizon: 1.0,
            sigma: 1.0,
            n_steps: 400,
            points: 20,
            t_max_fraction: 0.9,
            cases: vec![
                CylCase { label: "square".into(), basis: vec![one.clone()], payoff: Payoff::Square, tolerance: 1e-6 },
                CylCase { label: "sum2".into(), basis: vec![one.clone(), s], payoff: Payoff::Sum2, tolerance: 1e-6 },
                CylCase { label: "call".into(), basis: vec![one], payoff: Payoff::Call { strike: 0.0 }, tolerance: 1e-5 },
            ],
            feature_cases: 20,
            feature_tol: 1e-8,
            bachelier: BachelierParams::default(),
            martingale: CylMartingaleParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsParams {
    pub n_paths: usize,
    pub alpha: f64,
    pub s: f64,
    pub t: f64,
    pub eta: PathSpec,
}

impl Default for KsParams {
    fn default() -> Self {
        Self { n_paths: 10_000, alpha: 0.01, s: 0.25, t: 0.75, eta: PathSpec::Rough { seed: 6, scale: 0.7 } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovianParams {
    pub theta: f64,
    pub sigma: f64,
    pub times: [f64; 3],
    pub coarse: Vec<usize>,
    pub fine: usize,
    pub n_paths: usize,
    pub ratio_target: f64,
    pub ratio_tol: f64,
}

impl Default for MarkovianParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            sigma: 0.3,
            times: [0.25, 0.5, 1.0],
            coarse: vec![16, 32, 64],
            fine: 2048,
            n_paths: 400,
            ratio_target: 2.0,
            ratio_tol: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowCheckParams {
    pub horizon: f64,
    pub n_steps: usize,
    pub tuples: usize,
    pub flow_tol: f64,
    pub continuity_cases: usize,
    pub ks: KsParams,
    pub markovian: MarkovianParams,
}

impl Default for FlowCheckParams {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_steps: 64,
            tuples: 100,
            flow_tol: 1e-12,
            continuity_cases: 50,
            ks: KsParams::default(),
            markovian: MarkovianParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothMartingaleParams {
    pub functional: Builtin,
    pub n_outer: usize,
    pub n_inner: usize,
    pub times: Vec<f64>,
}

impl Default for SmoothMartingaleParams {
    fn default() -> Self {
        Self { functional: Builtin::square_of_integral(), n_outer: 10_000, n_inner: 1_000, times: vec![0.25, 0.5, 0.75] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothParams {
    pub horizon: f64,
    pub sigma: f64,
    pub n_steps: usize,
    /// Functionals whose derivatives are checked against finite differences.
    pub functionals: Vec<Builtin>,
    pub t: f64,
    pub eta: PathSpec,
    pub direction: PathSpec,
    /// Path for the time-difference check.
    pub eta_time: PathSpec,
    pub n_paths: usize,
    pub fd_eps: f64,
    pub fd_tol: f64,
    /// The per-path residual is checked for the first functional.
    pub residual_tol: f64,
    pub residual_times: Vec<f64>,
    pub residual_paths: usize,
    pub moment_paths: usize,
    pub martingale: SmoothMartingaleParams,
}

impl Default for SmoothParams {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            sigma: 1.0,
            n_steps: 64,
            functionals: vec![
                Builtin::square_of_integral(),
                Builtin::Cubic { g: Basis::Sin { amp: 1.0, freq: 1.5, phase: 0.4 } },
            ],
            t: 0.375,
            eta: PathSpec::Rough { seed: 8, scale: 0.5 },
            direction: PathSpec::Smooth { amp: 0.8, freq: 1.7, quad: -0.3 },
            eta_time: PathSpec::Smooth { amp: 1.0, freq: 1.7, quad: 0.5 },
            n_paths: 20_000,
            fd_eps: 1e-3,
            fd_tol: 1e-4,
            residual_tol: 1e-8,
            residual_times: vec![0.0, 0.15625, 0.5, 0.78125, 1.0],
            residual_paths: 2000,
            moment_paths: 100_000,
            martingale: SmoothMartingaleParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverCfg {
    pub kind: DriverKind,
    pub sigma: f64,
    #[serde(default)]
    pub hurst: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationCase {
    pub label: String,
    pub solver: SolverSpec,
    pub driver: DriverCfg,
    pub n_steps: usize,
    #[serde(default)]
    pub n_list: Vec<usize>,
    pub n_paths: usize,
    pub tolerance: f64,
    /// Require the rmse to decrease along `n_list`.
    #[serde(default)]
    pub decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClarkOconeParams {
    pub horizon: f64,
    pub cases: Vec<RepresentationCase>,
}

impl Default for ClarkOconeParams {
    fn default() -> Self {
        let one = vec![Basis::Constant { value: 1.0 }];
        let bm = DriverCfg { kind: DriverKind::Brownian, sigma: 1.0, hurst: None };
        Self {
            horizon: 1.0,
            cases: vec![
                RepresentationCase {
                    label: "linear".into(),
                    solver: SolverSpec::Cylindrical { basis: one.clone(), payoff: Payoff::Linear { coeffs: vec![1.0] } },
                    driver: bm.clone(),
                    n_steps: 512,
                    n_list: vec![],
                    n_paths: 10_000,
                    tolerance: 1e-12,
                    decreasing: false,
                },
                RepresentationCase {
                    label: "quadratic".into(),
                    solver: SolverSpec::Cylindrical { basis: one.clone(), payoff: Payoff::Square },
                    driver: bm,
                    n_steps: 512,
                    n_list: vec![128, 256, 512, 1024],
                    n_paths: 10_000,
                    tolerance: 0.05,
                    decreasing: true,
                },
                RepresentationCase {
                    label: "quadratic_fbm".into(),
                    solver: SolverSpec::Cylindrical { basis: one, payoff: Payoff::Square },
                    driver: DriverCfg { kind: DriverKind::BrownianPlusFbm, sigma: 1.0, hurst: Some(0.75) },
                    n_steps: 1024,
                    n_list: vec![],
                    n_paths: 10_000,
                    tolerance: 0.07,
                    decreasing: false,
                },
            ],
        }
    }
}

/// Parameters of the `all` suite: one optional block per suite.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllParams {
    pub integrate: IntegrateParams,
    pub cylindrical: CylindricalParams,
    #[serde(rename = "flow-check")]
    pub flow_check: FlowCheckParams,
    pub smooth: SmoothParams,
    #[serde(rename = "clark-ocone")]
    pub clark_ocone: ClarkOconeParams,
}

/// Parsed parameters for one suite.
#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Integrate(IntegrateParams),
    Cylindrical(CylindricalParams),
    FlowCheck(FlowCheckParams),
    Smooth(SmoothParams),
    ClarkOcone(ClarkOconeParams),
    All(Box<AllParams>),
}

fn parse_as<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(format!("{origin}: {e}")))
}

impl Params {
    /// Parse and validate the scenario text for `suite`.
    pub fn parse(suite: Suite, text: &str, origin: &str) -> Result<Self, CliError> {
        let p = match suite {
            Suite::Integrate => Params::Integrate(parse_as(text, origin)?),
            Suite::Cylindrical => Params::Cylindrical(parse_as(text, origin)?),
            Suite::FlowCheck => Params::FlowCheck(parse_as(text, origin)?),
            Suite::Smooth => Params::Smooth(parse_as(text, origin)?),
            Suite::ClarkOcone => Params::ClarkOcone(parse_as(text, origin)?),
            Suite::All => Params::All(Box::new(parse_as(text, origin)?)),
        };
        p.validate().map_err(|e| CliError::Parse(format!("{origin}: {e}")))?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Params::Integrate(p) => validate_integrate(p),
            Params::Cylindrical(p) => validate_cylindrical(p),
            Params::FlowCheck(p) => validate_flow(p),
            Params::Smooth(p) => validate_smooth(p),
            Params::ClarkOcone(p) => validate_clark_ocone(p),
            Params::All(a) => {
                validate_integrate(&a.integrate).map_err(|e| format!("integrate.{e}"))?;
                validate_cylindrical(&a.cylindrical).map_err(|e| format!("cylindrical.{e}"))?;
                validate_flow(&a.flow_check).map_err(|e| format!("flow-check.{e}"))?;
                validate_smooth(&a.smooth).map_err(|e| format!("smooth.{e}"))?;
                validate_clark_ocone(&a.clark_ocone).map_err(|e| format!("clark-ocone.{e}"))
            }
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{field}: must be positive, got {v}"))
    }
}

fn nonzero(field: &str, v: usize) -> Result<(), String> {
    if v > 0 {
        Ok(())
    } else {
        Err(format!("{field}: must be positive"))
    }
}

fn validate_integrate(p: &IntegrateParams) -> Result<(), String> {
    positive("horizon", p.horizon)?;
    nonzero("n_steps", p.n_steps)?;
    nonzero("cases", p.cases)?;
    if p.max_degree > 8 {
        return Err(format!("max_degree: at most 8, got {}", p.max_degree));
    }
    Ok(())
}

fn validate_cylindrical(p: &CylindricalParams) -> Result<(), String> {
    positive("horizon", p.horizon)?;
    nonzero("n_steps", p.n_steps)?;
    nonzero("martingale.n_steps", p.martingale.n_steps)?;
    nonzero("martingale.n_paths", p.martingale.n_paths)?;
    nonzero("bachelier.n_steps", p.bachelier.n_steps)?;
    if !(0.0..=1.0).contains(&p.t_max_fraction) {
        return Err(format!("t_max_fraction: must lie in [0, 1], got {}", p.t_max_fraction));
    }
    Ok(())
}

fn validate_flow(p: &FlowCheckParams) -> Result<(), String> {
    positive("horizon", p.horizon)?;
    if p.n_steps < 2 {
        return Err("n_steps: at least 2".into());
    }
    nonzero("ks.n_paths", p.ks.n_paths)?;
    nonzero("markovian.n_paths", p.markovian.n_paths)?;
    if p.markovian.coarse.iter().any(|&n| n == 0 || !p.markovian.fine.is_multiple_of(n)) {
        return Err("markovian.coarse: every entry must divide markovian.fine".into());
    }
    Ok(())
}

fn validate_smooth(p: &SmoothParams) -> Result<(), String> {
    positive("horizon", p.horizon)?;
    nonzero("n_steps", p.n_steps)?;
    nonzero("n_paths", p.n_paths)?;
    nonzero("moment_paths", p.moment_paths)?;
    nonzero("residual_paths", p.residual_paths)?;
    if p.functionals.is_empty() {
        return Err("functionals: at least one functional".into());
    }
    nonzero("martingale.n_outer", p.martingale.n_outer)?;
    nonzero("martingale.n_inner", p.martingale.n_inner)?;
    positive("fd_eps", p.fd_eps)
}

fn validate_clark_ocone(p: &ClarkOconeParams) -> Result<(), String> {
    positive("horizon", p.horizon)?;
    for (i, c) in p.cases.iter().enumerate() {
        nonzero(&format!("cases[{i}].n_steps"), c.n_steps)?;
        nonzero(&format!("cases[{i}].n_paths"), c.n_paths)?;
    }
    Ok(())
}
