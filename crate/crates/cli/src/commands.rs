//! One function per subcommand. Each writes into an [`OutDir`] and finishes with a manifest.

use kinlv_core::fp::{default_x_max, run_fp, FpOptions, FpRun};
use kinlv_core::inequality::{report, Distribution, InequalityReport};
use kinlv_core::mc::{run_mc, Histogram, McConfig, McRun};
use kinlv_core::ode::{
    cv_longtime_band, cv_rows, integrate_cv, integrate_means, integrate_moments, moment_rows, uniform_times,
    OdeSolverConfig,
};
use kinlv_core::inequality::second_moment_condition;
use kinlv_core::{GridDensity, InitialConditions, Mesh1D, ModelParams, RiskMode};
use serde_json::{json, Value};

use crate::config::ConfigFile;
use crate::error::CliError;
use crate::figures;
use crate::output::{num, sha256_hex, Csv, OutDir, RunManifest};
use crate::svg;

pub const ODE_HEADER: [&str; 7] = ["t", "m_f", "m_g", "v_f", "v_g", "c_f", "c_g"];
pub const MC_HEADER: [&str; 10] = ["t", "m_f", "m_g", "v_f", "v_g", "c_f", "c_g", "gini_f", "gini_g", "skipped_events"];
pub const FP_HEADER: [&str; 9] = ["t", "m_f", "m_g", "v_f", "v_g", "c_f", "c_g", "mass_f", "mass_g"];
pub const HIST_HEADER: [&str; 4] = ["bin_left", "bin_right", "density_f", "density_g"];
pub const REPORT_HEADER: [&str; 6] = ["t", "cv", "gini", "gini2", "source", "se"];
pub const SNAPSHOT_HEADER: [&str; 3] = ["x", "f", "g"];

const DEFAULT_TOL: f64 = 1e-10;

fn tol(cfg: &ConfigFile) -> f64 {
    cfg.run.tol.unwrap_or(DEFAULT_TOL)
}

fn steps(t_end: f64, dt: f64) -> Result<usize, CliError> {
    if !(t_end > 0.0 && t_end.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(CliError::Validation(format!("t_end = {t_end}, output_dt = {dt}")));
    }
    Ok(((t_end / dt).round() as usize).max(1))
}

fn ode_csv(rows: &[kinlv_core::ode::MomentState]) -> Csv {
    let mut csv = Csv::new(&ODE_HEADER);
    for r in rows {
        let c = r.cv();
        csv.nums(&[r.t, r.m_f, r.m_g, r.v_f, r.v_g, c.c_f, c.c_g]);
    }
    csv
}

fn config_value(cfg: &ConfigFile) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

pub fn means(cfg: &ConfigFile, out: OutDir) -> Result<RunManifest, CliError> {
    let (p, _) = cfg.model()?;
    let ic = cfg.initial;
    let t_end = cfg.run.t_end.unwrap_or(50.0);
    let times = uniform_times(t_end, steps(t_end, cfg.run.output_dt.unwrap_or(0.05))?);
    let ode = OdeSolverConfig::adaptive(t_end, tol(cfg));
    let means = integrate_means(&p, &ic, &ode)?;
    // variances only exist for the supported risk regimes
    let rows = match integrate_moments(&p, &ic, &ode) {
        Ok(traj) => moment_rows(&traj, &times)?,
        Err(kinlv_core::ode::OdeError::Unsupported(_)) => times
            .iter()
            .map(|&t| {
                let y = means.eval(t)?;
                Ok(kinlv_core::ode::MomentState { t, m_f: y[0], m_g: y[1], v_f: f64::NAN, v_g: f64::NAN })
            })
            .collect::<Result<_, CliError>>()?,
        Err(e) => return Err(e.into()),
    };
    let mut csv = ode_csv(&rows);
    // the mean columns come from the mean system itself
    csv = {
        let mut fixed = Csv::new(&ODE_HEADER);
        for r in &rows {
            let y = means.eval(r.t)?;
            let s = kinlv_core::ode::MomentState { m_f: y[0], m_g: y[1], ..*r };
            let c = s.cv();
            fixed.nums(&[s.t, s.m_f, s.m_g, s.v_f, s.v_g, c.c_f, c.c_g]);
        }
        drop(csv);
        fixed
    };
    let mut out = out;
    out.write("means.csv", csv.as_bytes())?;
    let h0 = kinlv_core::ode::lv_invariant(&p, ic.m_f0, ic.m_g0)?;
    let end = means.eval(t_end)?;
    let h1 = kinlv_core::ode::lv_invariant(&p, end[0], end[1])?;
    let notes = json!({ "fixed_point": p.fixed_point(), "first_integral_rel_drift": ((h1 - h0) / h0).abs() });
    out.finish("means", None, config_value(cfg), notes)
}

pub fn cv(cfg: &ConfigFile, out: OutDir) -> Result<RunManifest, CliError> {
    let (p, _) = cfg.model()?;
    let mode = cfg.run.risk.or(p.risk_mode()).unwrap_or(RiskMode::HalfHalf);
    let p = p.with_risk_mode(mode);
    let t_end = cfg.run.t_end.unwrap_or(50.0);
    let times = uniform_times(t_end, steps(t_end, cfg.run.output_dt.unwrap_or(0.05))?);
    let traj = integrate_cv(&p, &cfg.initial, &OdeSolverConfig::adaptive(t_end, tol(cfg)))?;
    let rows = cv_rows(&traj, &times)?;
    let mut out = out;
    out.write("cv.csv", ode_csv(&rows).as_bytes())?;
    let band = cv_longtime_band(&p, &traj).ok();
    let notes = json!({
        "risk": mode.to_string(),
        "longtime_band": band,
        "second_moment_condition": (mode == RiskMode::HalfOne).then(|| second_moment_condition(&p, &traj)),
    });
    out.finish("cv", None, config_value(cfg), notes)
}

fn histogram_csv(h: &Histogram) -> Csv {
    let mut csv = Csv::new(&HIST_HEADER);
    for i in 0..h.density_f.len() {
        csv.nums(&[h.edges[i], h.edges[i + 1], h.density_f[i], h.density_g[i]]);
    }
    csv
}

fn report_csv(reports: &[InequalityReport]) -> Csv {
    let mut csv = Csv::new(&REPORT_HEADER);
    for r in reports {
        csv.row(&[
            num(r.t),
            num(r.cv),
            num(r.gini),
            num(r.gini2),
            r.source.as_str().to_string(),
            r.se.map(num).unwrap_or_default(),
        ]);
    }
    csv
}

fn inequality(e: kinlv_core::inequality::InequalityError) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn mc_config(cfg: &ConfigFile) -> McConfig {
    let t_end = cfg.run.t_end.unwrap_or(20.0);
    McConfig {
        n_agents: cfg.run.agents.unwrap_or(100_000),
        epsilon: cfg.run.eps.unwrap_or(0.01),
        t_end,
        output_dt: cfg.run.output_dt.unwrap_or(0.5),
        snapshot_times: cfg.run.snapshot_times.clone().unwrap_or_else(|| vec![0.0, t_end]),
        seed: cfg.run.seed.unwrap_or(0),
        noise_scale: cfg.run.noise_scale.unwrap_or_default(),
    }
}

pub fn mc_csv(run: &McRun) -> Csv {
    let mut csv = Csv::new(&MC_HEADER);
    for m in &run.moments {
        let (cf, cg) = m.cv();
        let mut row: Vec<String> = [m.t, m.m_f, m.m_g, m.v_f, m.v_g, cf, cg, m.gini_f, m.gini_g].iter().map(|&x| num(x)).collect();
        row.push(m.skipped_events.to_string());
        csv.row(&row);
    }
    csv
}

pub fn mc(cfg: &ConfigFile, out: OutDir) -> Result<RunManifest, CliError> {
    let (p, _) = cfg.model()?;
    let mcfg = mc_config(cfg);
    let run = run_mc(&p, &cfg.initial, &mcfg)?;
    let mut out = out;
    out.write("mc_moments.csv", mc_csv(&run).as_bytes())?;
    for h in &run.histograms {
        out.write(&format!("mc_histogram_t{:.4}.csv", h.t), histogram_csv(h).as_bytes())?;
    }
    let t = mcfg.t_end;
    let rf = report(&Distribution::Sample(&run.deposits.values), t, mcfg.seed).map_err(inequality)?;
    let rg = report(&Distribution::Sample(&run.loans.values), t, mcfg.seed.wrapping_add(1)).map_err(inequality)?;
    out.write("report_f.csv", report_csv(&[rf]).as_bytes())?;
    out.write("report_g.csv", report_csv(&[rg]).as_bytes())?;
    let notes = json!({ "rounds": run.rounds, "skipped_events": run.skipped_events, "mc": mcfg });
    out.finish("mc", Some(mcfg.seed), config_value(cfg), notes)
}

pub fn fp_setup(cfg: &ConfigFile, p: &ModelParams) -> Result<(Mesh1D, FpOptions), CliError> {
    let x_max = match cfg.run.x_max {
        Some(x) => x,
        None => default_x_max(p, &cfg.initial)?,
    };
    let mesh = Mesh1D::new(cfg.run.cells.unwrap_or(1024), x_max).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut opts = FpOptions::default();
    if let Some(rule) = cfg.run.flux {
        opts.lambda = rule;
    }
    Ok((mesh, opts))
}

pub fn fp_csv(run: &FpRun) -> Csv {
    let mut csv = Csv::new(&FP_HEADER);
    for m in &run.moments {
        let (cf, cg) = m.cv();
        csv.nums(&[m.t, m.m_f, m.m_g, m.v_f, m.v_g, cf, cg, m.mass_f, m.mass_g]);
    }
    csv
}

pub fn fp(cfg: &ConfigFile, out: OutDir) -> Result<RunManifest, CliError> {
    let (p, _) = cfg.model()?;
    let (mesh, opts) = fp_setup(cfg, &p)?;
    let t_end = cfg.run.t_end.unwrap_or(20.0);
    let times = uniform_times(t_end, steps(t_end, cfg.run.output_dt.unwrap_or(0.1))?);
    let snaps = cfg.run.snapshot_times.clone().unwrap_or_else(|| vec![0.0, t_end]);
    let run = run_fp(&p, &cfg.initial, mesh, t_end, &times, &snaps, &opts)?;
    let mut out = out;
    out.write("fp_moments.csv", fp_csv(&run).as_bytes())?;
    let (mut rep_f, mut rep_g) = (Vec::new(), Vec::new());
    let mut tails = Vec::new();
    for s in &run.snapshots {
        let mut csv = Csv::new(&SNAPSHOT_HEADER);
        for i in 0..s.x.len() {
            csv.nums(&[s.x[i], s.f[i], s.g[i]]);
        }
        let name = format!("fp_snapshot_t{:.4}", s.t);
        out.write(&format!("{name}.csv"), csv.as_bytes())?;
        let meta = json!({
            "t": s.t,
            "mesh": run.mesh,
            "dt_policy": format!("dt = {} * min(dx^2 / max D, dx / max |B|), recomputed every step", opts.cfl),
            "flux": opts.lambda,
            "truncated_tail_mass": { "f": s.tail_f, "g": s.tail_g },
        });
        out.write(&format!("{name}.json"), serde_json::to_string_pretty(&meta).expect("json").as_bytes())?;
        tails.push(json!({ "t": s.t, "f": s.tail_f, "g": s.tail_g }));
        let f = GridDensity { mesh: run.mesh, values: s.f.clone(), t: s.t };
        let g = GridDensity { mesh: run.mesh, values: s.g.clone(), t: s.t };
        rep_f.push(report(&Distribution::Grid(&f), s.t, 0).map_err(inequality)?);
        rep_g.push(report(&Distribution::Grid(&g), s.t, 0).map_err(inequality)?);
    }
    out.write("report_f.csv", report_csv(&rep_f).as_bytes())?;
    out.write("report_g.csv", report_csv(&rep_g).as_bytes())?;
    let notes = json!({
        "steps": run.steps,
        "max_mass_drift": run.max_mass_drift,
        "initial_tail_mass": run.initial_tail,
        "snapshot_tail_mass": tails,
        "mesh": run.mesh,
    });
    out.finish("fp", None, config_value(cfg), notes)
}

pub fn figures_cmd(cfg: &ConfigFile, out: OutDir) -> Result<RunManifest, CliError> {
    let (p, _) = cfg.model()?;
    let scale = cfg.run.sigma_scale.unwrap_or(0.1);
    let which: Vec<u8> = match cfg.run.which {
        Some(k) => vec![k],
        None => vec![1, 2, 3, 4],
    };
    let mut out = out;
    let mut checks = serde_json::Map::new();
    for k in which {
        let fig = figures::figure(k, &p, &cfg.initial, scale, tol(cfg))?;
        let mut csv = Csv::new(&fig.header);
        for i in 0..fig.columns[0].len() {
            csv.nums(&fig.columns.iter().map(|c| c[i]).collect::<Vec<_>>());
        }
        let digest = sha256_hex(csv.as_bytes());
        out.write(&format!("fig{k}.csv"), csv.as_bytes())?;
        out.write(&format!("fig{k}.svg"), svg::render(&fig.panels, &digest).as_bytes())?;
        checks.insert(format!("fig{k}"), json!(fig.checks));
    }
    let notes = json!({
        "sigma_scale": scale,
        "transient_end": figures::T_TRANSIENT,
        "quasi_equilibrium_gap_max": figures::QE_GAP_MAX,
        "synchrony_min": figures::SYNC_MIN,
        "checks": checks,
    });
    out.finish("figures", None, config_value(cfg), notes)
}

/// Time-averaged L1 distance between MC means and the LV solution at the MC output times.
pub fn l1_mean_error(p: &ModelParams, ic: &InitialConditions, run: &McRun, tol: f64) -> Result<f64, CliError> {
    let t_end = run.moments.last().map(|m| m.t).unwrap_or(0.0);
    let lv = integrate_means(p, ic, &OdeSolverConfig::adaptive(t_end.max(1e-9), tol))?;
    let mut acc = 0.0;
    for m in &run.moments {
        let y = lv.eval(m.t)?;
        acc += (m.m_f - y[0]).abs() + (m.m_g - y[1]).abs();
    }
    Ok(acc / run.moments.len() as f64)
}

pub fn sweep(cfg: &ConfigFile, out: OutDir) -> Result<RunManifest, CliError> {
    let (p, _) = cfg.model()?;
    let eps_list = cfg.run.eps_list.clone().unwrap_or_else(|| vec![0.1, 0.05, 0.01]);
    let mut base = mc_config(cfg);
    base.n_agents = cfg.run.agents.unwrap_or(20_000);
    base.snapshot_times.clear();
    let mut csv = Csv::new(&["eps", "l1_mean_error", "skipped_events"]);
    let mut errs = Vec::new();
    for &eps in &eps_list {
        let run = run_mc(&p, &cfg.initial, &McConfig { epsilon: eps, ..base.clone() })?;
        let e = l1_mean_error(&p, &cfg.initial, &run, tol(cfg))?;
        csv.row(&[num(eps), num(e), run.skipped_events.to_string()]);
        errs.push(e);
    }
    let mut out = out;
    out.write("sweep.csv", csv.as_bytes())?;
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let notes = json!({ "eps": eps_list, "l1_mean_error": errs, "monotone_improvement": monotone, "agents": base.n_agents });
    out.finish("sweep", Some(base.seed), config_value(cfg), notes)
}
