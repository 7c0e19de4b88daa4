//! Configuration-driven experiment runner: mesh refinement loops,
//! manufactured solutions, error tables, convergence rates and CSV output.
//!
//! Four built-in studies are provided:
//!   I   transient convergence, divergence-free swirl velocity;
//!   II  transient convergence, compressible velocity;
//!   III stability sweep over CFL numbers on a fixed mesh at small epsilon;
//!   IV  stationary convection-diffusion, standard vs upwind stabilization.

use crate::error::{Error, Result};
use crate::manufactured::{
    stationary_exact_form, stationary_source, transient_exact_form, transient_source,
    NamedVelocity,
};
use crate::mesh::{Degree, SimplicialMesh};
use crate::schemes::{
    solve_stationary, DofMap, Formulation, SchemeConfig, SchemeDriver, SchemeKind,
    StationaryVariant, StepSize,
};
use crate::whitney::{derham_interpolate, error_norm, write_cochain_vtk, NormKind};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    I,
    II,
    III,
    IV,
}

impl ExperimentId {
    pub fn parse(s: &str) -> Result<ExperimentId> {
        match s {
            "I" | "i" | "1" => Ok(ExperimentId::I),
            "II" | "ii" | "2" => Ok(ExperimentId::II),
            "III" | "iii" | "3" => Ok(ExperimentId::III),
            "IV" | "iv" | "4" => Ok(ExperimentId::IV),
            other => Err(Error::Parse(format!("unknown experiment '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::I => "I",
            ExperimentId::II => "II",
            ExperimentId::III => "III",
            ExperimentId::IV => "IV",
        }
    }

    fn velocity(self) -> NamedVelocity {
        match self {
            ExperimentId::II => NamedVelocity::Compressible,
            _ => NamedVelocity::Swirl,
        }
    }
}

/// A full experiment specification. `Default`-like constructors fill in the
/// settings of the built-in studies; every field can be overridden.
#[derive(Clone)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub schemes: Vec<SchemeKind>,
    pub epsilons: Vec<f64>,
    pub cfls: Vec<f64>,
    pub refinements: Vec<usize>,
    pub t_end: f64,
    pub out: Option<PathBuf>,
    pub vtk_dir: Option<PathBuf>,
    pub solver_tol: f64,
}

impl ExperimentSpec {
    pub fn defaults(id: ExperimentId) -> ExperimentSpec {
        match id {
            ExperimentId::I | ExperimentId::II => ExperimentSpec {
                id,
                schemes: vec![
                    SchemeKind::SlAdjoint,
                    SchemeKind::EulImplicitStandard,
                    SchemeKind::EulImplicitUpwind,
                ],
                epsilons: vec![1.0],
                cfls: vec![0.1, 0.8],
                refinements: vec![4, 8, 16, 32, 64],
                t_end: 0.25,
                out: None,
                vtk_dir: None,
                solver_tol: 1e-12,
            },
            ExperimentId::III => ExperimentSpec {
                id,
                schemes: vec![
                    SchemeKind::SlAdjoint,
                    SchemeKind::EulImplicitUpwind,
                    SchemeKind::EulSemiImplicitUpwind,
                ],
                epsilons: vec![1e-3, 1e-9],
                cfls: (1..=8).map(|k| 0.1 * k as f64).collect(),
                // mesh size 2 sqrt(2) / 26 = 0.109, the fixed stability mesh
                refinements: vec![26],
                t_end: 0.5,
                out: None,
                vtk_dir: None,
                solver_tol: 1e-12,
            },
            ExperimentId::IV => ExperimentSpec {
                id,
                schemes: vec![],
                epsilons: vec![1.0, 1e-5],
                cfls: vec![],
                refinements: vec![8, 16, 32, 64],
                t_end: 0.0,
                out: None,
                vtk_dir: None,
                solver_tol: 1e-12,
            },
        }
    }
}

/// One output row of a sweep.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub experiment: &'static str,
    pub scheme: String,
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub cfl: f64,
    pub epsilon: f64,
    pub error: f64,
    pub rate: Option<f64>,
    pub solver_iterations: usize,
    pub clamped: usize,
    pub clamp_max: f64,
    pub final_m_norm: f64,
    pub initial_m_norm: f64,
    pub wall_seconds: f64,
    pub status: String,
}

impl CsvRow {
    pub fn header() -> &'static str {
        "experiment,scheme,n,h,dt,cfl,epsilon,error,rate,solver_iterations,clamped,clamp_max,final_m_norm,initial_m_norm,wall_seconds,status"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let rate = self
            .rate
            .map(|r| {
                if r.is_finite() {
                    format!("{r:.6}")
                } else {
                    "saturated".to_string()
                }
            })
            .unwrap_or_default();
        let _ = write!(
            s,
            "{},{},{},{:.8},{:.8},{:.4},{:.3e},{:.10e},{},{},{},{:.3e},{:.6e},{:.6e},{:.3},{}",
            self.experiment,
            self.scheme,
            self.n,
            self.h,
            self.dt,
            self.cfl,
            self.epsilon,
            self.error,
            rate,
            self.solver_iterations,
            self.clamped,
            self.clamp_max,
            self.final_m_norm,
            self.initial_m_norm,
            self.wall_seconds,
            self.status
        );
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<CsvRow>,
    pub all_completed: bool,
}

impl ExperimentReport {
    pub fn write_csv(&self, path: &PathBuf) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{}", CsvRow::header())?;
        for row in &self.rows {
            writeln!(f, "{}", row.to_csv())?;
        }
        Ok(())
    }
}

/// Sentinel reported when an error hits zero and the rate saturates.
pub const SATURATED_RATE: f64 = f64::INFINITY;

/// Pairwise convergence rates `log(e_i/e_{i+1}) / log(h_i/h_{i+1})`.
pub fn convergence_rates(errors: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != h.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument(
            "rate computation needs matching lists of length >= 2".into(),
        ));
    }
    let mut rates = Vec::with_capacity(errors.len() - 1);
    for i in 0..errors.len() - 1 {
        if errors[i + 1] == 0.0 || errors[i] == 0.0 {
            rates.push(SATURATED_RATE);
        } else {
            rates.push((errors[i] / errors[i + 1]).ln() / (h[i] / h[i + 1]).ln());
        }
    }
    Ok(rates)
}

/// Least-squares slope of `log e` against `log h`.
pub fn least_squares_rate(errors: &[f64], h: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Runs one transient cell: returns (error at t_end, iterations, clamp info,
/// initial and final mass norms).
#[allow(clippy::type_complexity)]
fn run_transient_cell(
    id: ExperimentId,
    scheme: SchemeKind,
    n: usize,
    cfl: f64,
    epsilon: f64,
    t_end: f64,
    solver_tol: f64,
    vtk: Option<&PathBuf>,
) -> Result<(f64, usize, usize, f64, f64, f64, f64)> {
    let mesh = SimplicialMesh::structured(n)?;
    let vel = id.velocity();
    let mut config = SchemeConfig::new(scheme, Degree::One, vel.field());
    config.formulation = Formulation::Adjoint;
    config.epsilon = epsilon;
    config.step = StepSize::Cfl(cfl);
    config.t_end = t_end;
    config.solver_tol = solver_tol;
    config.source = Some(transient_source(vel, epsilon));

    let exact = transient_exact_form();
    let mut w0 = derham_interpolate(&mesh, Degree::One, &exact, 0.0, config.quad_order);
    let dofs = DofMap::new(&mesh, Degree::One);
    dofs.zero_constrained(&mut w0.values);

    let mut driver = SchemeDriver::new(&mesh, config)?;
    let dt = driver.config.resolve_dt(&mesh);
    let initial_norm = driver.m_norm(&w0);
    let (state, reports) = driver.run(&w0, 0.0)?;
    let error = error_norm(&mesh, &state, &exact, t_end, NormKind::L2);
    let iterations = reports.iter().map(|r| r.iterations).max().unwrap_or(0);
    let clamped: usize = reports.iter().map(|r| r.clamp.clamped).sum();
    let clamp_max = reports
        .iter()
        .map(|r| r.clamp.max_distance)
        .fold(0.0_f64, f64::max);
    let final_norm = reports.last().map(|r| r.state_m_norm).unwrap_or(initial_norm);
    if let Some(dir) = vtk {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!(
            "{}_{}_n{}_cfl{:.2}_eps{:.0e}.vtk",
            id.name(),
            scheme.name(),
            n,
            cfl,
            epsilon
        ));
        write_cochain_vtk(&mesh, &state, path, "state")?;
    }
    Ok((error, iterations, clamped, clamp_max, initial_norm, final_norm, dt))
}

fn run_stationary_cell(
    variant: StationaryVariant,
    n: usize,
    epsilon: f64,
    vtk: Option<&PathBuf>,
) -> Result<f64> {
    let mesh = SimplicialMesh::structured(n)?;
    let vel = NamedVelocity::Swirl.field();
    let f = stationary_source(NamedVelocity::Swirl, epsilon);
    let w = solve_stationary(&mesh, &vel, epsilon, &f, variant, 1.0, 4)?;
    let exact = stationary_exact_form();
    let err = error_norm(&mesh, &w, &exact, 0.0, NormKind::Hd);
    if let Some(dir) = vtk {
        std::fs::create_dir_all(dir)?;
        let name = match variant {
            StationaryVariant::Standard => "standard",
            StationaryVariant::Upwind => "upwind",
        };
        let path = dir.join(format!("IV_{name}_n{n}_eps{epsilon:.0e}.vtk"));
        write_cochain_vtk(&mesh, &w, path, "state")?;
    }
    Ok(err)
}

/// Runs an experiment specification; per-cell failures are recorded in the
/// corresponding row and the sweep continues.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let mut rows = Vec::new();
    let mut all_ok = true;
    match spec.id {
        ExperimentId::I | ExperimentId::II | ExperimentId::III => {
            for &scheme in &spec.schemes {
                for &eps in &spec.epsilons {
                    for &cfl in &spec.cfls {
                        let mut errors = Vec::new();
                        let mut hs = Vec::new();
                        for &n in &spec.refinements {
                            let start = Instant::now();
                            let h = 2.0 * 2.0_f64.sqrt() / n as f64;
                            let cell = run_transient_cell(
                                spec.id,
                                scheme,
                                n,
                                cfl,
                                eps,
                                spec.t_end,
                                spec.solver_tol,
                                spec.vtk_dir.as_ref(),
                            );
                            let wall = start.elapsed().as_secs_f64();
                            match cell {
                                Ok((err, iters, clamped, clamp_max, n0, n1, dt)) => {
                                    errors.push(err);
                                    hs.push(h);
                                    let rate = if errors.len() >= 2 {
                                        let k = errors.len();
                                        convergence_rates(&errors[k - 2..], &hs[k - 2..])
                                            .ok()
                                            .map(|r| r[0])
                                    } else {
                                        None
                                    };
                                    rows.push(CsvRow {
                                        experiment: spec.id.name(),
                                        scheme: scheme.name().to_string(),
                                        n,
                                        h,
                                        dt,
                                        cfl,
                                        epsilon: eps,
                                        error: err,
                                        rate,
                                        solver_iterations: iters,
                                        clamped,
                                        clamp_max,
                                        final_m_norm: n1,
                                        initial_m_norm: n0,
                                        wall_seconds: wall,
                                        status: "ok".into(),
                                    });
                                }
                                Err(e) => {
                                    all_ok = false;
                                    rows.push(CsvRow {
                                        experiment: spec.id.name(),
                                        scheme: scheme.name().to_string(),
                                        n,
                                        h,
                                        dt: 0.0,
                                        cfl,
                                        epsilon: eps,
                                        error: f64::NAN,
                                        rate: None,
                                        solver_iterations: 0,
                                        clamped: 0,
                                        clamp_max: 0.0,
                                        final_m_norm: f64::NAN,
                                        initial_m_norm: f64::NAN,
                                        wall_seconds: wall,
                                        status: format!("error: {e}"),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        ExperimentId::IV => {
            for variant in [StationaryVariant::Standard, StationaryVariant::Upwind] {
                for &eps in &spec.epsilons {
                    let mut errors = Vec::new();
                    let mut hs = Vec::new();
                    for &n in &spec.refinements {
                        let start = Instant::now();
                        let h = 2.0 * 2.0_f64.sqrt() / n as f64;
                        let name = match variant {
                            StationaryVariant::Standard => "stationary-standard",
                            StationaryVariant::Upwind => "stationary-upwind",
                        };
                        match run_stationary_cell(variant, n, eps, spec.vtk_dir.as_ref()) {
                            Ok(err) => {
                                errors.push(err);
                                hs.push(h);
                                let rate = if errors.len() >= 2 {
                                    let k = errors.len();
                                    convergence_rates(&errors[k - 2..], &hs[k - 2..])
                                        .ok()
                                        .map(|r| r[0])
                                } else {
                                    None
                                };
                                rows.push(CsvRow {
                                    experiment: "IV",
                                    scheme: name.to_string(),
                                    n,
                                    h,
                                    dt: 0.0,
                                    cfl: 0.0,
                                    epsilon: eps,
                                    error: err,
                                    rate,
                                    solver_iterations: 0,
                                    clamped: 0,
                                    clamp_max: 0.0,
                                    final_m_norm: f64::NAN,
                                    initial_m_norm: f64::NAN,
                                    wall_seconds: start.elapsed().as_secs_f64(),
                                    status: "ok".into(),
                                });
                            }
                            Err(e) => {
                                all_ok = false;
                                rows.push(CsvRow {
                                    experiment: "IV",
                                    scheme: name.to_string(),
                                    n,
                                    h,
                                    dt: 0.0,
                                    cfl: 0.0,
                                    epsilon: eps,
                                    error: f64::NAN,
                                    rate: None,
                                    solver_iterations: 0,
                                    clamped: 0,
                                    clamp_max: 0.0,
                                    final_m_norm: f64::NAN,
                                    initial_m_norm: f64::NAN,
                                    wall_seconds: start.elapsed().as_secs_f64(),
                                    status: format!("error: {e}"),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    let report = ExperimentReport {
        rows,
        all_completed: all_ok,
    };
    if let Some(path) = &spec.out {
        report.write_csv(path)?;
    }
    Ok(report)
}

/// Flat `key=value` configuration file; unknown keys are rejected.
pub fn parse_config_file(text: &str, spec: &mut ExperimentSpec) -> Result<()> {
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "experiment" => spec.id = ExperimentId::parse(value)?,
            "schemes" => {
                spec.schemes = value
                    .split(',')
                    .map(|s| SchemeKind::parse(s.trim()))
                    .collect::<Result<_>>()?;
            }
            "cfl" => {
                spec.cfls = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                    .collect::<Result<_>>()?;
            }
            "refinements" => {
                spec.refinements = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
                    .collect::<Result<_>>()?;
            }
            "epsilon" => {
                spec.epsilons = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                    .collect::<Result<_>>()?;
            }
            "t_end" => {
                spec.t_end = value
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
            }
            "out" => spec.out = Some(PathBuf::from(value)),
            "vtk" => spec.vtk_dir = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Parse(format!(
                    "line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}
