//! Run configuration, the problem registry, error norms, convergence studies and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::basis_quadrature::{gauss_legendre, orthonormal_legendre};
use crate::bgk::ManufacturedSolution;
use crate::error::{Error, Result};
use crate::kinetic_state::{moments_from_primitive, primitive_from_moments, PrimitiveState};
use crate::limiters::{LimiterConfig, OscillationBounds, OscillationRule};
use crate::lxw_dg_solver::{
    default_cfl, Boundary, DgSolver, ElementSolution, InterfaceSpeed, Mesh, RunSummary, SolverConfig,
};
use crate::reference_solvers::{euler_exact_riemann, CellAverages, EulerRiemannSolution, EulerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProblemId {
    Smooth,
    Shock1,
    Shock2,
    Vacuum,
    BgkSod,
    Manufactured,
}

impl ProblemId {
    pub const ALL: [ProblemId; 6] = [
        ProblemId::Smooth,
        ProblemId::Shock1,
        ProblemId::Shock2,
        ProblemId::Vacuum,
        ProblemId::BgkSod,
        ProblemId::Manufactured,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Smooth => "smooth",
            ProblemId::Shock1 => "shock1",
            ProblemId::Shock2 => "shock2",
            ProblemId::Vacuum => "vacuum",
            ProblemId::BgkSod => "bgk_sod",
            ProblemId::Manufactured => "manufactured",
        }
    }
}

impl FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem `{s}`")))
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Static description of a test problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub x_low: f64,
    pub x_high: f64,
    pub boundary: Boundary,
    pub t_final: f64,
    /// Whether the final time is a choice of this code rather than a published value.
    pub t_final_assumed: bool,
    pub breaks: Vec<f64>,
    /// Whether the problem carries a BGK collision term.
    pub collisional: bool,
}

fn riemann(left: [f64; 5], right: [f64; 5]) -> impl Fn(f64) -> PrimitiveState {
    move |x| PrimitiveState::from_array(if x < 0.0 { left } else { right })
}

const SHOCK1: ([f64; 5], [f64; 5]) = ([1.5, -0.5, 1.5, 1.0, 7.0 / 3.0], [1.0, -0.5, 1.0, 0.5, 1.75]);
const SHOCK2: ([f64; 5], [f64; 5]) = ([1.0, -0.7, 1.5, 1.5, 1.75], [0.5, -0.9, 1.0, 1.0, 1.0]);
const VACUUM: ([f64; 5], [f64; 5]) = ([1.0, -2.0, 1.0, 0.0, 2.0], [1.0, 2.0, 1.0, 0.0, 2.0]);
const SOD: ([f64; 5], [f64; 5]) = ([1.0, 0.0, 1.0, 0.0, 2.0], [0.125, 0.0, 0.1, 0.0, 0.16]);

/// Exact smooth solution: density wave advected at unit speed with r held constant.
pub fn smooth_solution(t: f64, x: f64) -> PrimitiveState {
    let rho = 2.0 + (2.0 * std::f64::consts::PI * (x - t)).sin();
    PrimitiveState::new(rho, 1.0, 2.0, 4.0, 8.0 - 4.0 / rho)
}

impl ProblemSpec {
    pub fn get(id: ProblemId) -> ProblemSpec {
        let riemann_spec = |x_low: f64, x_high: f64, t_final: f64, assumed: bool, collisional: bool| ProblemSpec {
            id,
            x_low,
            x_high,
            boundary: Boundary::Extrapolation,
            t_final,
            t_final_assumed: assumed,
            breaks: vec![0.0],
            collisional,
        };
        match id {
            ProblemId::Smooth => ProblemSpec {
                id,
                x_low: -1.0,
                x_high: 1.0,
                boundary: Boundary::Periodic,
                t_final: 1.0,
                t_final_assumed: false,
                breaks: vec![],
                collisional: false,
            },
            ProblemId::Shock1 | ProblemId::Shock2 | ProblemId::Vacuum => riemann_spec(-1.2, 1.2, 0.3, true, false),
            ProblemId::BgkSod => riemann_spec(-1.0, 1.0, 0.28, false, true),
            ProblemId::Manufactured => ProblemSpec {
                id,
                x_low: -1.0,
                x_high: 1.0,
                boundary: Boundary::Periodic,
                t_final: 1.0,
                t_final_assumed: true,
                breaks: vec![],
                collisional: true,
            },
        }
    }

    /// Initial primitive fields. The manufactured solution depends on the Knudsen number.
    pub fn initial(&self, eps: f64) -> Result<Box<dyn Fn(f64) -> PrimitiveState>> {
        Ok(match self.id {
            ProblemId::Smooth => Box::new(|x| smooth_solution(0.0, x)),
            ProblemId::Shock1 => Box::new(riemann(SHOCK1.0, SHOCK1.1)),
            ProblemId::Shock2 => Box::new(riemann(SHOCK2.0, SHOCK2.1)),
            ProblemId::Vacuum => Box::new(riemann(VACUUM.0, VACUUM.1)),
            ProblemId::BgkSod => Box::new(riemann(SOD.0, SOD.1)),
            ProblemId::Manufactured => {
                let ms = ManufacturedSolution::new(eps)?;
                Box::new(move |x| ms.state(0.0, x))
            }
        })
    }

    /// Exact primitive fields at time `t`, where known.
    pub fn exact(&self, eps: f64) -> Result<Box<dyn Fn(f64, f64) -> PrimitiveState>> {
        match self.id {
            ProblemId::Smooth => Ok(Box::new(smooth_solution)),
            ProblemId::Manufactured => {
                let ms = ManufacturedSolution::new(eps)?;
                Ok(Box::new(move |t, x| ms.state(t, x)))
            }
            _ => Err(Error::NoExactSolution(self.id.name().into())),
        }
    }

    /// Euler Riemann data (ρ, u, p) of the left and right states, for Riemann problems.
    pub fn riemann_states(&self) -> Option<(EulerState, EulerState)> {
        let (l, r) = match self.id {
            ProblemId::Shock1 => SHOCK1,
            ProblemId::Shock2 => SHOCK2,
            ProblemId::Vacuum => VACUUM,
            ProblemId::BgkSod => SOD,
            _ => return None,
        };
        Some((EulerState::new(l[0], l[1], l[2]), EulerState::new(r[0], r[1], r[2])))
    }

    pub fn mesh(&self, n_elem: usize) -> Result<Mesh> {
        Mesh::new(n_elem, self.x_low, self.x_high, self.boundary)
    }
}

/// Default oscillation offset: 5 for collisionless runs, and larger values for the BGK Sod runs.
pub fn default_a0(problem: ProblemId, eps: Option<f64>) -> f64 {
    match (problem, eps) {
        (ProblemId::BgkSod, Some(e)) if e <= 5e-4 => 350.0,
        (ProblemId::BgkSod, _) => 50.0,
        _ => 5.0,
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub order: usize,
    pub n_elem: usize,
    pub cfl: Option<f64>,
    pub limit_prediction: bool,
    pub limit_mean_flux: bool,
    pub limit_points: bool,
    /// `None` picks the problem default: off for the manufactured solution, on elsewhere.
    pub limit_oscillation: Option<bool>,
    pub pos_floor: f64,
    pub a0: Option<f64>,
    pub oscillation_bounds: OscillationBounds,
    pub oscillation_rule: OscillationRule,
    pub interface_speed: InterfaceSpeed,
    pub eps: Option<f64>,
    pub t_final: Option<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(problem: ProblemId, order: usize, n_elem: usize) -> Self {
        let defaults = LimiterConfig::all_on();
        RunConfig {
            problem,
            order,
            n_elem,
            cfl: None,
            limit_prediction: true,
            limit_mean_flux: true,
            limit_points: true,
            limit_oscillation: None,
            pos_floor: defaults.pos_floor,
            a0: None,
            oscillation_bounds: defaults.oscillation_bounds,
            oscillation_rule: defaults.oscillation_rule,
            interface_speed: InterfaceSpeed::Traces,
            eps: None,
            t_final: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }

    pub fn with_limiters(mut self, on: bool) -> Self {
        self.limit_prediction = on;
        self.limit_mean_flux = on;
        self.limit_points = on;
        self.limit_oscillation = Some(on);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec::get(self.problem)
    }

    pub fn effective_t_final(&self) -> f64 {
        self.t_final.unwrap_or_else(|| self.spec().t_final)
    }

    pub fn effective_eps(&self) -> Option<f64> {
        match (self.spec().collisional, self.eps) {
            (true, Some(e)) => Some(e),
            (true, None) => Some(1e-4),
            (false, e) => e,
        }
    }

    pub fn effective_limit_oscillation(&self) -> bool {
        self.limit_oscillation.unwrap_or(self.problem != ProblemId::Manufactured)
    }

    pub fn limiter_config(&self) -> LimiterConfig {
        LimiterConfig {
            prediction: self.limit_prediction,
            mean_flux: self.limit_mean_flux,
            points: self.limit_points,
            oscillation: self.effective_limit_oscillation(),
            pos_floor: self.pos_floor,
            a0: self.a0.unwrap_or_else(|| default_a0(self.problem, self.effective_eps())),
            mu_aggr: 10.0 / 11.0,
            oscillation_bounds: self.oscillation_bounds,
            oscillation_rule: self.oscillation_rule,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            order: self.order,
            cfl: self.cfl.unwrap_or_else(|| default_cfl(self.order)),
            limiters: self.limiter_config(),
            interface_speed: self.interface_speed,
            knudsen: self.effective_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elem == 0 {
            return Err(Error::Config("nelem must be positive".into()));
        }
        if let Some(t) = self.t_final {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("t_final must be nonnegative, got {t}")));
            }
        }
        self.solver_config().validate()
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid value `{value}` for {what}"));
        let flag = |v: &str| match v {
            "on" | "true" | "1" => Ok(true),
            "off" | "false" | "0" => Ok(false),
            _ => Err(bad(key)),
        };
        let opt_f64 = |v: &str| -> Result<Option<f64>> {
            if v == "default" {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(key))
            }
        };
        match key {
            "problem" => self.problem = value.parse()?,
            "order" => self.order = value.parse().map_err(|_| bad(key))?,
            "nelem" => self.n_elem = value.parse().map_err(|_| bad(key))?,
            "cfl" => self.cfl = opt_f64(value)?,
            "limiters" => {
                let on = flag(value)?;
                *self = self.clone().with_limiters(on);
            }
            "limit_prediction" => self.limit_prediction = flag(value)?,
            "limit_mean_flux" => self.limit_mean_flux = flag(value)?,
            "limit_points" => self.limit_points = flag(value)?,
            "limit_oscillation" => self.limit_oscillation = if value == "default" { None } else { Some(flag(value)?) },
            "pos_floor" => self.pos_floor = value.parse().map_err(|_| bad(key))?,
            "a0" => self.a0 = opt_f64(value)?,
            "oscillation_bounds" => {
                self.oscillation_bounds = match value {
                    "extrema" => OscillationBounds::NeighborExtrema,
                    "means" => OscillationBounds::NeighborMeans,
                    _ => return Err(bad(key)),
                }
            }
            "oscillation_rule" => {
                self.oscillation_rule = match value {
                    "scaled" => OscillationRule::Scaled,
                    "violation" => OscillationRule::ViolationOnly,
                    _ => return Err(bad(key)),
                }
            }
            "interface_speed" => {
                self.interface_speed = match value {
                    "traces" => InterfaceSpeed::Traces,
                    "traces_and_mean" => InterfaceSpeed::TracesAndMean,
                    _ => return Err(bad(key)),
                }
            }
            "eps" => self.eps = opt_f64(value)?,
            "t_final" => self.t_final = opt_f64(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key=value` file; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::new(ProblemId::Smooth, 4, 40);
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        RunConfig::parse(&text)
    }

    /// Key-value listing that `parse` reads back to the same configuration.
    pub fn to_kv(&self) -> String {
        let onoff = |b: bool| if b { "on" } else { "off" };
        let opt = |v: Option<f64>| v.map_or("default".to_string(), |x| format!("{x:e}"));
        let mut s = String::new();
        let _ = writeln!(s, "problem={}", self.problem);
        let _ = writeln!(s, "order={}", self.order);
        let _ = writeln!(s, "nelem={}", self.n_elem);
        let _ = writeln!(s, "cfl={}", opt(self.cfl));
        let _ = writeln!(s, "limit_prediction={}", onoff(self.limit_prediction));
        let _ = writeln!(s, "limit_mean_flux={}", onoff(self.limit_mean_flux));
        let _ = writeln!(s, "limit_points={}", onoff(self.limit_points));
        let _ = writeln!(s, "limit_oscillation={}", self.limit_oscillation.map_or("default", onoff));
        let _ = writeln!(s, "pos_floor={:e}", self.pos_floor);
        let _ = writeln!(s, "a0={}", opt(self.a0));
        let bounds = match self.oscillation_bounds {
            OscillationBounds::NeighborExtrema => "extrema",
            OscillationBounds::NeighborMeans => "means",
        };
        let _ = writeln!(s, "oscillation_bounds={bounds}");
        let rule = match self.oscillation_rule {
            OscillationRule::Scaled => "scaled",
            OscillationRule::ViolationOnly => "violation",
        };
        let _ = writeln!(s, "oscillation_rule={rule}");
        let speed = match self.interface_speed {
            InterfaceSpeed::Traces => "traces",
            InterfaceSpeed::TracesAndMean => "traces_and_mean",
        };
        let _ = writeln!(s, "interface_speed={speed}");
        let _ = writeln!(s, "eps={}", opt(self.eps));
        let _ = writeln!(s, "t_final={}", opt(self.t_final));
        let _ = writeln!(s, "output_dir={}", self.output_dir.display());
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }
}

/// Builds the solver for a configuration, attaching the manufactured forcing when needed.
pub fn build_solver(cfg: &RunConfig) -> Result<DgSolver> {
    cfg.validate()?;
    let spec = cfg.spec();
    let solver = DgSolver::new(spec.mesh(cfg.n_elem)?, cfg.solver_config())?;
    Ok(match spec.id {
        ProblemId::Manufactured => {
            let eps = cfg.effective_eps().unwrap_or(1e-4);
            solver.with_source(Box::new(ManufacturedSolution::new(eps)?))
        }
        _ => solver,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solution: ElementSolution,
    pub mesh: Mesh,
    pub summary: RunSummary,
    pub wall_seconds: f64,
}

/// Projects the initial data and marches to the final time.
pub fn run_solver(cfg: &RunConfig) -> Result<RunOutcome> {
    let solver = build_solver(cfg)?;
    let spec = cfg.spec();
    let init = spec.initial(cfg.effective_eps().unwrap_or(1e-4))?;
    let start = Instant::now();
    let mut solution = solver.project_initial_condition(init, &spec.breaks)?;
    let summary = solver.advance_to(&mut solution, cfg.effective_t_final())?;
    Ok(RunOutcome { solution, mesh: solver.mesh.clone(), summary, wall_seconds: start.elapsed().as_secs_f64() })
}

/// Relative L2 error summed over the five conserved variables, with the exact solution
/// represented by Legendre coefficients one degree beyond the numerical ones.
pub fn compute_error_norm(sol: &ElementSolution, mesh: &Mesh, exact: impl Fn(f64) -> PrimitiveState) -> f64 {
    let rule = gauss_legendre(20);
    let n_modes = sol.order + 1;
    let mut num = [0.0; 5];
    let mut den = [0.0; 5];
    for i in 0..mesh.n_elem {
        let xc = mesh.center(i);
        let mut star = vec![[0.0; 5]; n_modes];
        for (mu, w) in rule.nodes.iter().zip(&rule.weights) {
            let q = moments_from_primitive(&exact(xc + 0.5 * mesh.dx * mu).to_array());
            for (k, row) in star.iter_mut().enumerate() {
                let phi = orthonormal_legendre(k, *mu).0;
                for m in 0..5 {
                    row[m] += 0.5 * w * phi * q[m];
                }
            }
        }
        for m in 0..5 {
            for k in 0..n_modes {
                den[m] += star[k][m] * star[k][m];
                let diff = if k < sol.order { sol.coeffs[i][k][m] - star[k][m] } else { star[k][m] };
                num[m] += diff * diff;
            }
        }
    }
    (0..5).map(|m| if den[m] > 0.0 { (num[m] / den[m]).sqrt() } else { num[m].sqrt() }).sum()
}

/// Four significant digits with a signed two-digit exponent, e.g. `7.500e-10`, `1.143e-01`.
pub fn sci(v: f64) -> String {
    let s = format!("{v:.3e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let (sign, digits) = exp.strip_prefix('-').map_or(("+", exp), |d| ("-", d));
            format!("{mant}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_elem: usize,
    pub error: f64,
    pub ratio: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub label: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n_elem,error,log2_ratio\n");
        for r in &self.rows {
            let ratio = r.ratio.map_or(String::new(), |v| format!("{v:.3}"));
            let _ = writeln!(s, "{},{},{}", r.n_elem, sci(r.error), ratio);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n{:>6}  {:>10}  {:>7}\n", self.label, "N", "error", "order");
        for r in &self.rows {
            let ratio = r.ratio.map_or("--".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(s, "{:>6}  {:>10}  {:>7}", r.n_elem, sci(r.error), ratio);
        }
        s
    }

    /// Observed order between the last two resolutions.
    pub fn finest_ratio(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.ratio)
    }
}

/// Observed order log2(e_{N/2}/e_N) for consecutive rows.
pub fn observed_orders(errors: &[f64]) -> Vec<Option<f64>> {
    std::iter::once(None).chain(errors.windows(2).map(|w| Some((w[0] / w[1]).log2()))).collect()
}

/// Runs the configured problem at each resolution and tabulates the error against the exact solution.
pub fn convergence_study(base: &RunConfig, n_list: &[usize]) -> Result<ConvergenceTable> {
    if n_list.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two resolutions".into()));
    }
    let spec = base.spec();
    let exact = spec.exact(base.effective_eps().unwrap_or(1e-4))?;
    let t_final = base.effective_t_final();
    let mut errors = Vec::new();
    let mut steps = Vec::new();
    for &n in n_list {
        let cfg = RunConfig { n_elem: n, ..base.clone() };
        let out = run_solver(&cfg)?;
        errors.push(compute_error_norm(&out.solution, &out.mesh, |x| exact(t_final, x)));
        steps.push(out.summary.steps);
    }
    let rows = n_list
        .iter()
        .zip(&errors)
        .zip(observed_orders(&errors))
        .zip(&steps)
        .map(|(((&n_elem, &error), ratio), &steps)| ConvergenceRow { n_elem, error, ratio, steps })
        .collect();
    let eps = base.effective_eps().map_or(String::new(), |e| format!(", eps = {e:e}"));
    Ok(ConvergenceTable { label: format!("{} order {}{}", base.problem, base.order, eps), rows })
}

/// One sampled point of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub x: f64,
    pub alpha: PrimitiveState,
}

impl ProfilePoint {
    fn from_moments(x: f64, q: &[f64; 5]) -> Self {
        ProfilePoint { x, alpha: PrimitiveState::from_array(primitive_from_moments(q)) }
    }
}

/// Primitive fields at `per_element` equispaced interior points of every element.
pub fn sample_profile(sol: &ElementSolution, mesh: &Mesh, per_element: usize) -> Vec<ProfilePoint> {
    let mut out = Vec::with_capacity(mesh.n_elem * per_element);
    for i in 0..mesh.n_elem {
        for j in 0..per_element {
            let xi = -1.0 + (2.0 * j as f64 + 1.0) / per_element as f64;
            out.push(ProfilePoint::from_moments(mesh.center(i) + 0.5 * mesh.dx * xi, &sol.eval(i, xi)));
        }
    }
    out
}

/// Cell-center profile of a finite-volume solution.
pub fn sample_cells(cells: &CellAverages) -> Vec<ProfilePoint> {
    cells.cells.iter().enumerate().map(|(i, q)| ProfilePoint::from_moments(cells.mesh.center(i), q)).collect()
}

/// Writes `x,rho,u,p,h,k,r` rows with one header line.
pub fn write_profile<W: Write>(points: &[ProfilePoint], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "rho", "u", "p", "h", "k", "r"])?;
    for pt in points {
        let a = pt.alpha;
        let fields = [pt.x, a.rho, a.u, a.p, a.h, a.k, a.r()];
        w.write_record(fields.iter().map(|v| format!("{v:.12e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_profile(points: &[ProfilePoint], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_profile(points, file).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

/// Reads back a profile written by [`write_profile`].
pub fn read_profile(path: &Path) -> Result<Vec<ProfilePoint>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        let v: Vec<f64> = rec.iter().map(|s| s.parse().unwrap_or(f64::NAN)).collect();
        if v.len() != 7 {
            return Err(Error::Config(format!("{}: expected 7 columns, got {}", path.display(), v.len())));
        }
        out.push(ProfilePoint { x: v[0], alpha: PrimitiveState::new(v[1], v[2], v[3], v[4], v[5]) });
    }
    Ok(out)
}

/// L1 distance in density between a profile and a reference field sampled at the same x.
pub fn l1_density_distance(points: &[ProfilePoint], reference: impl Fn(f64) -> f64, dx_per_point: f64) -> f64 {
    points.iter().map(|p| (p.alpha.rho - reference(p.x)).abs() * dx_per_point).sum()
}

/// Piecewise-constant lookup into a finite-volume solution.
pub fn cell_density_lookup(cells: &CellAverages) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        let m = &cells.mesh;
        let i = (((x - m.x_low) / m.dx).floor().max(0.0) as usize).min(m.n_elem - 1);
        cells.cells[i][0]
    }
}

/// Fine-grid Rusanov reference for a Riemann problem.
pub fn rusanov_reference(problem: ProblemId, n_cells: usize, t_final: f64) -> Result<CellAverages> {
    let spec = ProblemSpec::get(problem);
    let mut cells = CellAverages::from_initial(spec.mesh(n_cells)?, spec.initial(1e-4)?, &spec.breaks)?;
    crate::reference_solvers::rusanov_reference_run(&mut cells, t_final, 0.9)?;
    Ok(cells)
}

/// Exact Euler solution for the Riemann data of a problem, with γ = 3.
pub fn euler_reference(problem: ProblemId) -> Result<EulerRiemannSolution> {
    let (l, r) =
        ProblemSpec::get(problem).riemann_states().ok_or_else(|| Error::NoExactSolution(problem.name().into()))?;
    euler_exact_riemann(l, r, 3.0)
}

/// Metadata written next to every run's outputs.
pub fn run_metadata(cfg: &RunConfig, outcome: &RunOutcome) -> String {
    let mut s = cfg.to_kv();
    let spec = cfg.spec();
    let solver = cfg.solver_config();
    let _ = writeln!(s, "# effective_t_final={:e}", cfg.effective_t_final());
    let _ = writeln!(s, "# effective_cfl={}", solver.cfl);
    let _ = writeln!(s, "# effective_a0={}", solver.limiters.a0);
    let _ = writeln!(s, "# effective_limit_oscillation={}", solver.limiters.oscillation);
    if let Some(eps) = solver.knudsen {
        let _ = writeln!(s, "# effective_eps={eps:e}");
    }
    if spec.t_final_assumed && cfg.t_final.is_none() {
        let _ = writeln!(s, "# t_final is a default of this code, not a published value");
    }
    let _ = writeln!(s, "# steps={}", outcome.summary.steps);
    let _ = writeln!(s, "# wall_seconds={:.3}", outcome.wall_seconds);
    let m = outcome.summary.min_functionals;
    let _ = writeln!(s, "# min_rho={:e} min_p={:e} min_k={:e}", m[0], m[1], m[2]);
    s
}

/// Limiter activity totals as `name count` lines.
pub fn limiter_log(summary: &RunSummary) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        ("steps", summary.steps),
        ("prediction_limited", summary.prediction_limited),
        ("mean_flux_limited", summary.mean_flux_limited),
        ("points_limited", summary.points_limited),
        ("oscillation_limited", summary.oscillation_limited),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let mut cfg = RunConfig::new(ProblemId::BgkSod, 3, 64).with_eps(1e-3);
        cfg.a0 = Some(50.0);
        cfg.limit_points = false;
        cfg.oscillation_bounds = OscillationBounds::NeighborMeans;
        let back = RunConfig::parse(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_errors() {
        assert!(RunConfig::parse("order=4\nbogus=1").is_err());
        assert!(RunConfig::parse("problem=nowhere").is_err());
        assert!(RunConfig::parse("just text").is_err());
        assert!(RunConfig::parse("order=7").unwrap().validate().is_err());
    }

    #[test]
    fn projection_of_exact_has_tiny_error() {
        // exact data polynomial of degree < order: the projection is exact
        let mesh = Mesh::new(6, -1.0, 1.0, Boundary::Periodic).unwrap();
        let solver = DgSolver::new(mesh.clone(), SolverConfig::new(3)).unwrap();
        // linear density, r held constant: every moment is linear in x
        let exact = |x: f64| {
            let rho = 2.0 + 0.1 * x;
            PrimitiveState::new(rho, 0.0, 1.0, 0.0, 3.0 - 1.0 / rho)
        };
        let sol = solver.project_initial_condition(exact, &[]).unwrap();
        assert!(compute_error_norm(&sol, &mesh, exact) < 1e-12);
    }

    #[test]
    fn observed_order_of_halving_errors() {
        let r = observed_orders(&[1.0, 0.25, 0.0625]);
        assert_eq!(r, vec![None, Some(2.0), Some(2.0)]);
    }

    #[test]
    fn table_number_format() {
        assert_eq!(sci(1.143e-1), "1.143e-01");
        assert_eq!(sci(7.5e-10), "7.500e-10");
        assert_eq!(sci(12.0), "1.200e+01");
        assert_eq!(sci(f64::INFINITY), "inf");
    }

    #[test]
    fn oscillation_default_depends_on_problem() {
        assert!(RunConfig::new(ProblemId::Smooth, 2, 10).limiter_config().oscillation);
        assert!(!RunConfig::new(ProblemId::Manufactured, 4, 10).limiter_config().oscillation);
        let mut cfg = RunConfig::new(ProblemId::Manufactured, 4, 10);
        cfg.set("limit_oscillation", "on").unwrap();
        assert!(cfg.limiter_config().oscillation);
    }

    #[test]
    fn a0_defaults() {
        assert_eq!(default_a0(ProblemId::Smooth, None), 5.0);
        assert_eq!(default_a0(ProblemId::BgkSod, Some(1e-2)), 50.0);
        assert_eq!(default_a0(ProblemId::BgkSod, Some(1e-3)), 50.0);
        assert_eq!(default_a0(ProblemId::BgkSod, Some(1e-4)), 350.0);
    }
}
