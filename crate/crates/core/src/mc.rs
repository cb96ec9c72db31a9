//! Agent-based simulation of the binary interaction and redistribution rules
//! in the quasi-invariant scaling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::ShapeError;
use crate::inequality::{gini_of, Distribution};
use crate::params::{InitialConditions, ModelParams, Risk, Species};
use crate::stats::SampleMoments;

const BLOCK: usize = 4096;
const MAX_RESAMPLES: u32 = 100;
/// Abort when more than this fraction of interaction events had to be skipped.
const MAX_SKIP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("{skipped} of {events} interaction events skipped after {MAX_RESAMPLES} resamples (t = {t})")]
    ResampleExhaustion { skipped: u64, events: u64, t: f64 },
}

/// Reference size in the noise amplitude `(x / x_ref)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// `x_ref = 1`; the limit equation has diffusion `sigma m_g x / 2`.
    #[default]
    Unit,
    /// `x_ref` is the current population mean.
    PopulationMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Agents per species.
    pub n_agents: usize,
    pub epsilon: f64,
    pub t_end: f64,
    /// Time between moment rows; a whole number of rounds.
    pub output_dt: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_scale: NoiseScale,
}

impl McConfig {
    pub fn new(n_agents: usize, epsilon: f64, t_end: f64, output_dt: f64, seed: u64) -> Self {
        McConfig { n_agents, epsilon, t_end, output_dt, snapshot_times: Vec::new(), seed, noise_scale: NoiseScale::Unit }
    }

    pub fn validate(&self) -> Result<(), McError> {
        let bad = |m: String| Err(McError::InvalidConfig(m));
        if self.n_agents < 2 {
            return bad(format!("n_agents = {} < 2", self.n_agents));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon = {} outside (0, 1]", self.epsilon));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {}", self.t_end));
        }
        if !(self.output_dt > 0.0) || !is_whole(self.output_dt / self.epsilon) {
            return bad(format!("output_dt = {} is not a positive multiple of epsilon", self.output_dt));
        }
        if !is_whole(self.t_end / self.epsilon) {
            return bad(format!("t_end = {} is not a multiple of epsilon", self.t_end));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(t >= 0.0 && t <= self.t_end) || !is_whole(t / self.epsilon)) {
            return bad(format!("snapshot time {t} is not a round time in [0, t_end]"));
        }
        Ok(())
    }

    fn rounds(&self, t: f64) -> u64 {
        (t / self.epsilon).round() as u64
    }
}

fn is_whole(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9 * x.abs().max(1.0)
}

/// `beta y / (1 + y)`.
pub fn holling_phi(p: &ModelParams, y: f64) -> f64 {
    p.beta * y / (1.0 + y)
}

/// `gamma (x - mu) / (1 + x)`.
pub fn holling_psi(p: &ModelParams, x: f64) -> f64 {
    p.gamma * (x - p.mu) / (1.0 + x)
}

fn phi_eps(p: &ModelParams, y: f64, eps: f64) -> f64 {
    eps * p.beta * y / (1.0 + eps * y)
}

fn psi_eps(p: &ModelParams, x: f64, eps: f64) -> f64 {
    eps * p.gamma * (x - p.mu) / (1.0 + eps * x)
}

/// One binary interaction from unit-variance draws `eta`. `x_ref` is the noise reference
/// size per species. The result may be negative; callers resample.
pub fn interact_pair(p: &ModelParams, x: f64, y: f64, eta: (f64, f64), eps: f64, x_ref: (f64, f64)) -> (f64, f64) {
    let (amp_f, amp_g) = amplitudes(p, x, y, x_ref);
    let sd_f = (eps * p.sigma_f * y / (1.0 + eps * y)).sqrt();
    let sd_g = (eps * p.sigma_g * x / (1.0 + eps * x)).sqrt();
    (
        x - phi_eps(p, y, eps) * x + amp_f * sd_f * eta.0,
        y + psi_eps(p, x, eps) * y + amp_g * sd_g * eta.1,
    )
}

fn amplitudes(p: &ModelParams, x: f64, y: f64, x_ref: (f64, f64)) -> (f64, f64) {
    let amp = |v: f64, r: f64, risk: Risk| {
        let q = risk.exponent();
        if v >= (1.0 - q) * p.s0 {
            (v / r).powf(q)
        } else {
            0.0
        }
    };
    (amp(x, x_ref.0, p.risk_f), amp(y, x_ref.1, p.risk_g))
}

/// Redistribution with resource `z`: `x + eps alpha (z - chi x)` (loans: `nu`, `theta`).
pub fn redistribute(p: &ModelParams, value: f64, z: f64, eps: f64, species: Species) -> f64 {
    match species {
        Species::Deposits => value + eps * p.alpha * (z - p.chi * value),
        Species::Loans => value + eps * p.nu * (z - p.theta * value),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Init = 0,
    Interact = 1,
    Redistribute = 2,
    Pairing = 3,
}

fn stream_rng(seed: u64, round: u64, phase: Phase, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((round << 24) | ((phase as u64) << 20) | block);
    rng
}

/// Nonnegative agent states of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPopulation {
    pub species: Species,
    pub values: Vec<f64>,
}

impl AgentPopulation {
    pub fn moments(&self) -> SampleMoments {
        SampleMoments::of(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McMoments {
    pub t: f64,
    pub m_f: f64,
    pub m_g: f64,
    /// Unbiased variances.
    pub v_f: f64,
    pub v_g: f64,
    pub se_m_f: f64,
    pub se_m_g: f64,
    pub se_v_f: f64,
    pub se_v_g: f64,
    pub gini_f: f64,
    pub gini_g: f64,
    /// Cumulative skipped interaction events.
    pub skipped_events: u64,
}

impl McMoments {
    pub fn cv(&self) -> (f64, f64) {
        (self.v_f.sqrt() / self.m_f, self.v_g.sqrt() / self.m_g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub t: f64,
    /// 201 equal-width edges over `[0, max observed]`.
    pub edges: Vec<f64>,
    pub density_f: Vec<f64>,
    pub density_g: Vec<f64>,
}

pub const HISTOGRAM_BINS: usize = 200;

pub fn histogram(t: f64, f: &[f64], g: &[f64]) -> Histogram {
    let top = f.iter().chain(g).copied().fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let w = top / HISTOGRAM_BINS as f64;
    let edges = (0..=HISTOGRAM_BINS).map(|i| i as f64 * w).collect();
    let bin = |xs: &[f64]| {
        let mut c = vec![0u64; HISTOGRAM_BINS];
        for &x in xs {
            c[((x / w) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        }
        c.into_iter().map(|k| k as f64 / (xs.len() as f64 * w)).collect()
    };
    Histogram { t, edges, density_f: bin(f), density_g: bin(g) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub moments: Vec<McMoments>,
    pub histograms: Vec<Histogram>,
    pub rounds: u64,
    pub skipped_events: u64,
    pub deposits: AgentPopulation,
    pub loans: AgentPopulation,
}

fn initial_population(
    species: Species,
    ic: &InitialConditions,
    n: usize,
    seed: u64,
) -> Result<AgentPopulation, McError> {
    let (m, c, tag) = match species {
        Species::Deposits => (ic.m_f0, ic.c_f0, 0),
        Species::Loans => (ic.m_g0, ic.c_g0, 1 << 19),
    };
    let law = ic.shape.matched(m, c)?;
    let mut values = vec![0.0; n];
    values.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream_rng(seed, 0, Phase::Init, tag | b as u64);
        chunk.iter_mut().for_each(|v| *v = law.sample(&mut rng));
    });
    Ok(AgentPopulation { species, values })
}

fn record(t: f64, f: &AgentPopulation, g: &AgentPopulation, skipped: u64) -> McMoments {
    let (a, b) = rayon::join(|| f.moments(), || g.moments());
    let (gf, gg) = rayon::join(
        || gini_of(&Distribution::Sample(&f.values)).unwrap_or(f64::NAN),
        || gini_of(&Distribution::Sample(&g.values)).unwrap_or(f64::NAN),
    );
    McMoments {
        t,
        m_f: a.mean,
        m_g: b.mean,
        v_f: a.var,
        v_g: b.var,
        se_m_f: a.se_mean,
        se_m_g: b.se_mean,
        se_v_f: a.se_var,
        se_v_g: b.se_var,
        gini_f: gf,
        gini_g: gg,
        skipped_events: skipped,
    }
}

/// One draw with resampling; `None` when every attempt went negative.
fn noisy<R: Rng>(rng: &mut R, base: f64, scale: f64) -> Option<f64> {
    if scale == 0.0 {
        return (base >= 0.0).then_some(base);
    }
    for _ in 0..MAX_RESAMPLES {
        let eta: f64 = rng.sample(StandardNormal);
        let v = base + scale * eta;
        if v >= 0.0 {
            return Some(v);
        }
    }
    None
}

/// Interaction round on pairs `(f[k], g[k])`; returns the number of skipped updates.
fn interaction_round(
    p: &ModelParams,
    f: &mut [f64],
    g: &mut [f64],
    eps: f64,
    x_ref: (f64, f64),
    seed: u64,
    round: u64,
) -> u64 {
    f.par_chunks_mut(BLOCK)
        .zip(g.par_chunks_mut(BLOCK))
        .enumerate()
        .map(|(b, (fc, gc))| {
            let mut rng = stream_rng(seed, round, Phase::Interact, b as u64);
            let mut skipped = 0;
            for (x, y) in fc.iter_mut().zip(gc.iter_mut()) {
                let (x0, y0) = (*x, *y);
                let (det_x, det_y) = interact_pair(p, x0, y0, (0.0, 0.0), eps, x_ref);
                let (amp_f, amp_g) = amplitudes(p, x0, y0, x_ref);
                let sd_f = amp_f * (eps * p.sigma_f * y0 / (1.0 + eps * y0)).sqrt();
                let sd_g = amp_g * (eps * p.sigma_g * x0 / (1.0 + eps * x0)).sqrt();
                match noisy(&mut rng, det_x, sd_f) {
                    Some(v) => *x = v,
                    None => skipped += 1,
                }
                match noisy(&mut rng, det_y, sd_g) {
                    Some(v) => *y = v,
                    None => skipped += 1,
                }
            }
            skipped
        })
        .sum()
}

fn redistribution_round(p: &ModelParams, pop: &mut AgentPopulation, eps: f64, seed: u64, round: u64) {
    let snapshot = pop.values.clone();
    let n = snapshot.len();
    let (lift, tag) = match pop.species {
        Species::Deposits => (1.0 + p.chi, 0),
        Species::Loans => (1.0 + p.theta, 1 << 19),
    };
    let species = pop.species;
    pop.values.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream_rng(seed, round, Phase::Redistribute, tag | b as u64);
        for v in chunk.iter_mut() {
            let z = lift * snapshot[rng.random_range(0..n)];
            *v = redistribute(p, *v, z, eps, species);
        }
    });
}

/// Simulate to `cfg.t_end`. Each unit of time holds `1/eps` rounds; a round pairs every
/// deposit agent with a distinct loan agent at random, then applies redistribution to all.
pub fn run_mc(p: &ModelParams, ic: &InitialConditions, cfg: &McConfig) -> Result<McRun, McError> {
    cfg.validate()?;
    ic.validate().map_err(|e| McError::InvalidConfig(e.to_string()))?;
    let eps = cfg.epsilon;
    let n = cfg.n_agents;
    let mut f = initial_population(Species::Deposits, ic, n, cfg.seed)?;
    let mut g = initial_population(Species::Loans, ic, n, cfg.seed)?;
    let total = cfg.rounds(cfg.t_end);
    let stride = cfg.rounds(cfg.output_dt);
    let snaps: Vec<u64> = cfg.snapshot_times.iter().map(|&t| cfg.rounds(t)).collect();
    let mut moments = vec![record(0.0, &f, &g, 0)];
    let mut histograms = Vec::new();
    if snaps.contains(&0) {
        histograms.push(histogram(0.0, &f.values, &g.values));
    }
    let mut skipped = 0u64;
    let mut pairing = ChaCha8Rng::seed_from_u64(cfg.seed);
    pairing.set_stream((Phase::Pairing as u64) << 20);
    let mut shuffled = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for round in 1..=total {
        // loans are exchangeable, so a random matching is a random reordering of them
        order.shuffle(&mut pairing);
        for (dst, &i) in shuffled.iter_mut().zip(&order) {
            *dst = g.values[i];
        }
        std::mem::swap(&mut g.values, &mut shuffled);
        let x_ref = match cfg.noise_scale {
            NoiseScale::Unit => (1.0, 1.0),
            NoiseScale::PopulationMean => rayon::join(|| f.moments().mean, || g.moments().mean),
        };
        skipped += interaction_round(p, &mut f.values, &mut g.values, eps, x_ref, cfg.seed, round);
        let events = 2 * n as u64 * round;
        let t = round as f64 * eps;
        if skipped as f64 > MAX_SKIP_FRACTION * events as f64 {
            return Err(McError::ResampleExhaustion { skipped, events, t });
        }
        redistribution_round(p, &mut f, eps, cfg.seed, round);
        redistribution_round(p, &mut g, eps, cfg.seed, round);
        if round % stride == 0 {
            moments.push(record(t, &f, &g, skipped));
        }
        if snaps.contains(&round) {
            histograms.push(histogram(t, &f.values, &g.values));
        }
    }
    Ok(McRun { moments, histograms, rounds: total, skipped_events: skipped, deposits: f, loans: g })
}
