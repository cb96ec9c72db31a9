//! Coupled deposit/loan Fokker-Planck system with self-consistent means.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scheme::{edge_weights, implicit_step, Coefficients, LambdaRule};
use crate::density::{Analytic, ShapeError};
use crate::grid::{GridDensity, Mesh1D, MeshError};
use crate::ode::{integrate_means, OdeError, OdeSolverConfig};
use crate::params::{InitialConditions, ModelParams, Risk, Species};
use crate::stats::neumaier;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FpError {
    #[error("negative density after {halvings} step halvings at t = {t}")]
    NonPositiveDensity { t: f64, halvings: u32 },
    #[error("mass drift {drift:e} at t = {t} exceeds 1e-12")]
    MassDrift { t: f64, drift: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("{0}")]
    Invalid(String),
}

/// `(D, B)` of the p = 1/2 equations at `x`.
pub fn fp_coefficients_p12(p: &ModelParams, x: f64, m_f: f64, m_g: f64, species: Species) -> (f64, f64) {
    let c = coefficients(p, species, Risk::Half, m_f, m_g);
    (c.diffusion(x), c.drift(x))
}

/// `(D, B)` of the p = 1 loans equation at `y`.
pub fn fp_coefficients_p1_loans(p: &ModelParams, y: f64, m_f: f64, m_g: f64) -> (f64, f64) {
    let c = coefficients(p, Species::Loans, Risk::One, m_f, m_g);
    (c.diffusion(y), c.drift(y))
}

/// Canonical coefficients; risk One switches the diffusion to `x^2`.
pub fn coefficients(p: &ModelParams, species: Species, risk: Risk, m_f: f64, m_g: f64) -> Coefficients {
    let k = match risk {
        Risk::Half => 1,
        Risk::One => 2,
    };
    match species {
        Species::Deposits => Coefficients {
            k,
            d: 0.5 * p.sigma_f * m_g,
            r: p.beta * m_g + p.alpha * p.chi,
            s: p.alpha * (p.chi + 1.0) * m_f,
        },
        Species::Loans => Coefficients {
            k,
            d: 0.5 * p.sigma_g * m_f,
            r: p.gamma * (p.mu - m_f) + p.nu * p.theta,
            s: p.nu * (p.theta + 1.0) * m_g,
        },
    }
}

/// Coefficients of the single-population wealth equation (mean `m`, noise `sigma`).
pub fn wealth_coefficients(m: f64, sigma: f64) -> Coefficients {
    Coefficients { k: 2, d: 0.5 * sigma, r: 1.0, s: m }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpOptions {
    pub lambda: LambdaRule,
    /// Safety factor in `dt = cfl * min(dx^2 / max D, dx / max |B|)`.
    pub cfl: f64,
    /// Halvings allowed when a step produces a negative value.
    pub max_halvings: u32,
}

impl Default for FpOptions {
    fn default() -> Self {
        FpOptions { lambda: LambdaRule::MeanPreserving, cfl: 0.5, max_halvings: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpState {
    pub t: f64,
    pub f: GridDensity,
    pub g: GridDensity,
}

impl FpState {
    pub fn means(&self) -> (f64, f64) {
        (self.f.mean(), self.g.mean())
    }
}

fn step_dt(mesh: &Mesh1D, cs: &[Coefficients], cfl: f64) -> f64 {
    let dx = mesh.dx();
    let mut dmax: f64 = 0.0;
    let mut bmax: f64 = 0.0;
    for c in cs {
        for i in 0..=mesh.n_cells {
            let x = mesh.edge(i);
            dmax = dmax.max(c.diffusion(x));
            bmax = bmax.max(c.drift(x).abs());
        }
    }
    let a = if dmax > 0.0 { dx * dx / dmax } else { f64::INFINITY };
    let b = if bmax > 0.0 { dx / bmax } else { f64::INFINITY };
    cfl * a.min(b)
}

fn advance(
    rho: &GridDensity,
    c: &Coefficients,
    dt: f64,
    rule: LambdaRule,
) -> Vec<f64> {
    let (up, down) = edge_weights(&rho.mesh, c, rule);
    let mut out = Vec::with_capacity(rho.values.len());
    implicit_step(&rho.values, &up, &down, dt, rho.mesh.dx(), &mut out);
    out
}

fn check_mass(before: f64, after: f64, t: f64) -> Result<(), FpError> {
    let drift = ((after - before) / before).abs();
    if drift > 1e-12 {
        Err(FpError::MassDrift { t, drift })
    } else {
        Ok(())
    }
}

fn frozen(p: &ModelParams, m_f: f64, m_g: f64) -> [Coefficients; 2] {
    [
        coefficients(p, Species::Deposits, p.risk_f, m_f, m_g),
        coefficients(p, Species::Loans, p.risk_g, m_f, m_g),
    ]
}

fn advance_pair(
    state: &FpState,
    cs: &[Coefficients; 2],
    mass: (f64, f64),
    dt: f64,
    rule: LambdaRule,
) -> Result<FpState, FpError> {
    let (nf, ng) = rayon::join(|| advance(&state.f, &cs[0], dt, rule), || advance(&state.g, &cs[1], dt, rule));
    let t = state.t + dt;
    if nf.iter().chain(&ng).any(|v| !(*v >= 0.0)) {
        return Err(FpError::NonPositiveDensity { t, halvings: 0 });
    }
    let f = GridDensity { mesh: state.f.mesh, values: nf, t };
    let g = GridDensity { mesh: state.g.mesh, values: ng, t };
    check_mass(mass.0, f.mass(), t)?;
    check_mass(mass.1, g.mass(), t)?;
    Ok(FpState { t, f, g })
}

/// One implicit step with coefficients frozen at the current means.
pub fn step_fp(p: &ModelParams, state: &FpState, dt: f64, opts: &FpOptions) -> Result<FpState, FpError> {
    let (mass_f, m_f) = state.f.mass_and_mean();
    let (mass_g, m_g) = state.g.mass_and_mean();
    advance_pair(state, &frozen(p, m_f, m_g), (mass_f, mass_g), dt, opts.lambda)
}

fn step_with_retry(
    state: &FpState,
    cs: &[Coefficients; 2],
    mass: (f64, f64),
    dt: f64,
    opts: &FpOptions,
) -> Result<FpState, FpError> {
    let mut h = dt;
    for _ in 0..=opts.max_halvings {
        match advance_pair(state, cs, mass, h, opts.lambda) {
            Err(FpError::NonPositiveDensity { .. }) => h *= 0.5,
            other => return other,
        }
    }
    Err(FpError::NonPositiveDensity { t: state.t, halvings: opts.max_halvings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpMoments {
    pub t: f64,
    pub m_f: f64,
    pub m_g: f64,
    pub v_f: f64,
    pub v_g: f64,
    pub mass_f: f64,
    pub mass_g: f64,
}

impl FpMoments {
    fn of(s: &FpState) -> FpMoments {
        FpMoments {
            t: s.t,
            m_f: s.f.mean(),
            m_g: s.g.mean(),
            v_f: s.f.variance(),
            v_g: s.g.variance(),
            mass_f: s.f.mass(),
            mass_g: s.g.mass(),
        }
    }

    pub fn cv(&self) -> (f64, f64) {
        (self.v_f.sqrt() / self.m_f, self.v_g.sqrt() / self.m_g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Mass the frozen-mean equilibria would put beyond `x_max`.
    pub tail_f: f64,
    pub tail_g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpRun {
    pub mesh: Mesh1D,
    pub moments: Vec<FpMoments>,
    pub snapshots: Vec<FpSnapshot>,
    pub steps: usize,
    /// Mass of the initial densities lost to truncation at `x_max`.
    pub initial_tail: (f64, f64),
    /// Largest relative mass change over the run.
    pub max_mass_drift: f64,
    pub final_state: FpState,
}

/// Default right end of the mesh: 10x the largest mean on the LV orbit (40x with p = 1).
pub fn default_x_max(p: &ModelParams, ic: &InitialConditions) -> Result<f64, FpError> {
    let (fs, gs) = p.fixed_point();
    // one period is plenty; orbits are closed
    let t_end = 4.0 * std::f64::consts::PI / (p.alpha * p.derived_delta()).sqrt();
    let traj = integrate_means(p, ic, &OdeSolverConfig::adaptive(t_end, 1e-8))?;
    let mut peak = fs.max(gs).max(ic.m_f0).max(ic.m_g0);
    for t in traj.step_times() {
        let y = traj.eval(t)?;
        peak = peak.max(y[0]).max(y[1]);
    }
    let factor = if p.risk_f == Risk::One || p.risk_g == Risk::One { 40.0 } else { 10.0 };
    Ok(factor * peak)
}

/// Initial state from the configured density shapes; also returns the truncated tail masses.
pub fn initial_state(ic: &InitialConditions, mesh: Mesh1D) -> Result<(FpState, (f64, f64)), FpError> {
    let df = ic.shape.matched(ic.m_f0, ic.c_f0)?;
    let dg = ic.shape.matched(ic.m_g0, ic.c_g0)?;
    for d in [&df, &dg] {
        if matches!(d, Analytic::Point { .. }) {
            return Err(FpError::Invalid("zero initial CV gives a point mass; the grid cannot hold it".into()));
        }
    }
    let (f, tf) = GridDensity::project(mesh, &df, 0.0);
    let (g, tg) = GridDensity::project(mesh, &dg, 0.0);
    Ok((FpState { t: 0.0, f: f.normalized(), g: g.normalized() }, (tf, tg)))
}

fn snapshot(p: &ModelParams, s: &FpState) -> FpSnapshot {
    let (m_f, m_g) = s.means();
    let x_max = s.f.mesh.x_max;
    let tail = |species, risk| {
        coefficients(p, species, risk, m_f, m_g).equilibrium().map_or(f64::NAN, |d| d.tail_mass(x_max))
    };
    FpSnapshot {
        t: s.t,
        x: s.f.mesh.centers(),
        f: s.f.values.clone(),
        g: s.g.values.clone(),
        tail_f: tail(Species::Deposits, p.risk_f),
        tail_g: tail(Species::Loans, p.risk_g),
    }
}

/// Integrate to `t_end`, recording moments at `moment_times` and snapshots at `snapshot_times`.
pub fn run_fp(
    p: &ModelParams,
    ic: &InitialConditions,
    mesh: Mesh1D,
    t_end: f64,
    moment_times: &[f64],
    snapshot_times: &[f64],
    opts: &FpOptions,
) -> Result<FpRun, FpError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FpError::Invalid(format!("t_end = {t_end}")));
    }
    ic.validate().map_err(|e| FpError::Invalid(e.to_string()))?;
    let (mut state, initial_tail) = initial_state(ic, mesh)?;
    let mass0 = (state.f.mass(), state.g.mass());
    let mut stops: Vec<f64> = moment_times.iter().chain(snapshot_times).copied().filter(|&t| t <= t_end).collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut moments = Vec::new();
    let mut snapshots = Vec::new();
    let mut steps = 0usize;
    let record = |s: &FpState, moments: &mut Vec<FpMoments>, snapshots: &mut Vec<FpSnapshot>| {
        if moment_times.iter().any(|&t| t == s.t) {
            moments.push(FpMoments::of(s));
        }
        if snapshot_times.iter().any(|&t| t == s.t) {
            snapshots.push(snapshot(p, s));
        }
    };
    let mut max_drift: f64 = 0.0;
    for &stop in &stops {
        while state.t < stop {
            let (mass_f, m_f) = state.f.mass_and_mean();
            let (mass_g, m_g) = state.g.mass_and_mean();
            let cs = frozen(p, m_f, m_g);
            let mut dt = step_dt(&mesh, &cs, opts.cfl);
            let remaining = stop - state.t;
            let last = dt >= remaining * (1.0 - 1e-12);
            if last {
                dt = remaining;
            }
            let mut next = step_with_retry(&state, &cs, (mass_f, mass_g), dt, opts)?;
            if last || next.t > stop {
                next.t = stop;
                next.f.t = stop;
                next.g.t = stop;
            }
            max_drift = max_drift.max(((mass_f - mass0.0) / mass0.0).abs()).max(((mass_g - mass0.1) / mass0.1).abs());
            state = next;
            steps += 1;
        }
        record(&state, &mut moments, &mut snapshots);
    }
    max_drift = max_drift
        .max(((state.f.mass() - mass0.0) / mass0.0).abs())
        .max(((state.g.mass() - mass0.1) / mass0.1).abs());
    Ok(FpRun { mesh, moments, snapshots, steps, initial_tail, max_mass_drift: max_drift, final_state: state })
}

/// Long-time limit of one equation with frozen coefficients, by implicit steps with a large `dt`.
pub fn steady_state(mesh: Mesh1D, c: &Coefficients, rule: LambdaRule) -> GridDensity {
    let (up, down) = edge_weights(&mesh, c, rule);
    let dt = 1e6 * step_dt(&mesh, std::slice::from_ref(c), 1.0).min(1.0);
    let dx = mesh.dx();
    let mut f = vec![1.0 / mesh.x_max; mesh.n_cells];
    let mut next = Vec::new();
    for _ in 0..500 {
        implicit_step(&f, &up, &down, dt, dx, &mut next);
        let mass = neumaier(next.iter().map(|v| v * dx));
        next.iter_mut().for_each(|v| *v /= mass);
        let change: f64 = f.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx;
        std::mem::swap(&mut f, &mut next);
        if change < 1e-15 {
            break;
        }
    }
    GridDensity { mesh, values: f, t: f64::INFINITY }
}

/// Analytic equilibrium sampled at the cell centres and normalised to unit discrete mass.
pub fn nodal_reference(mesh: &Mesh1D, d: &Analytic) -> Vec<f64> {
    let v: Vec<f64> = mesh.centers().iter().map(|&x| d.pdf(x)).collect();
    let m = neumaier(v.iter().map(|x| x * mesh.dx()));
    v.into_iter().map(|x| x / m).collect()
}
