//! Stochastic-approximation estimation of Markov graph parameters.
//!
//! Three phases, run on one continuing Metropolis chain that starts at the
//! observed graph:
//!
//! 1. Simulate at the starting values (edge parameter at the logit of the
//!    observed density, all others 0) to estimate the covariance `D` of the
//!    modeled statistics.
//! 2. Robbins–Monro updates `theta <- theta - a_k * D0^-1 (z - z_obs)` with
//!    `D0 = diag(D)`, over sub-phases of halving gain `a_k`; each sub-phase
//!    ends at the average of its iterates.
//! 3. A long simulation at the estimate gives the mean and covariance of the
//!    statistics. Convergence ratios `(mean - observed) / sd` must all be
//!    below 0.10 in absolute value; otherwise a Newton correction
//!    `theta <- theta - Cov^-1 (mean - observed)` is applied and the phase is
//!    repeated, up to `max_phase_iterations` rounds. Standard errors are the
//!    square roots of the diagonal of `Cov^-1`.
//!
//! A non-converged run gets up to `EstimationSettings::restarts` further
//! attempts that continue from its best estimate; the chain is restricted
//! to graphs with at most a multiple of the observed edge count.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampler::{is_degenerate, Sampler};
use super::{count_statistics, DenseGraph, ErgParams, ErgStatistics, ErgmError, McmcConfig, ModelTerm};
use crate::network::Pcn;
use crate::stats::{two_sample_ttest, TTestResult, TestKind};

/// Largest absolute convergence ratio accepted as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 0.10;
/// `|estimate / SE|` at or above which a parameter counts as significant.
pub const SIGNIFICANCE_T: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationSettings {
    /// Phase-1 draws; `None` means `50 + 10 p` for `p` model terms.
    pub phase1_iterations: Option<usize>,
    pub subphases: usize,
    pub initial_gain: f64,
    /// Cap on the absolute change of any parameter in one phase-2 update.
    pub max_step: f64,
    /// Cap on the Mahalanobis length of a phase-3 Newton correction.
    pub max_newton_length: f64,
    /// Cap on the absolute change of any parameter in one Newton correction.
    pub max_newton_step: f64,
    /// Newton steps use `Cov + ridge * diag(Cov)`, which damps moves along
    /// poorly identified directions when statistics are nearly collinear.
    pub newton_ridge: f64,
    /// Consecutive phase-2 draws at an extreme density (with the observed
    /// graph not there) that mark the model as degenerate.
    pub degeneracy_patience: usize,
    /// Restricts simulation during estimation to graphs with at most
    /// `factor * observed edges` edges. Markov models with positive triangle
    /// or star parameters often put almost all mass on near-complete graphs
    /// while the observed graph sits in a sparse metastable mode; the cap
    /// keeps the chain in that mode. `None` disables it.
    pub edge_cap_factor: Option<f64>,
    /// Extra attempts after a non-converged one. Each continues the final
    /// phase from the best estimate so far, or reruns all phases with a
    /// smaller gain if every attempt so far was degenerate.
    pub restarts: usize,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        EstimationSettings {
            phase1_iterations: None,
            subphases: 4,
            initial_gain: 0.1,
            max_step: 0.5,
            max_newton_length: 3.0,
            max_newton_step: 1.0,
            newton_ridge: 0.1,
            degeneracy_patience: 25,
            edge_cap_factor: Some(2.0),
            restarts: 2,
        }
    }
}

/// Serializes non-finite floats as `null` and reads `null` back as NaN.
mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() { s.serialize_f64(*v) } else { s.serialize_none() }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermFit {
    pub term: ModelTerm,
    #[serde(with = "finite_or_null")]
    pub estimate: f64,
    #[serde(with = "finite_or_null")]
    pub std_error: f64,
    #[serde(with = "finite_or_null")]
    pub convergence_ratio: f64,
    #[serde(with = "finite_or_null")]
    pub t_statistic: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgFit {
    pub hospital_id: String,
    pub n_nodes: usize,
    pub terms: Vec<TermFit>,
    pub estimates: ErgParams,
    pub observed: ErgStatistics,
    pub simulated_mean: Vec<f64>,
    pub simulated_sd: Vec<f64>,
    /// Every `|convergence_ratio| < 0.10`.
    pub converged: bool,
    pub degenerate: bool,
    pub refinement_rounds: usize,
    pub acceptance_rate: f64,
    pub diagnostics: Vec<String>,
    pub seed: u64,
    pub mcmc: McmcConfig,
    pub settings: EstimationSettings,
}

impl ErgFit {
    pub fn model(&self) -> Vec<ModelTerm> {
        self.terms.iter().map(|t| t.term).collect()
    }

    pub fn term(&self, term: ModelTerm) -> Option<&TermFit> {
        self.terms.iter().find(|t| t.term == term)
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.std_error).collect()
    }

    pub fn convergence_ratios(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.convergence_ratio).collect()
    }

    pub fn t_statistics(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.t_statistic).collect()
    }

    pub fn max_abs_convergence_ratio(&self) -> f64 {
        self.terms.iter().map(|t| t.convergence_ratio.abs()).fold(0.0, f64::max)
    }
}

/// `|estimate / se| >= 2`.
pub fn is_significant(estimate: f64, std_error: f64) -> bool {
    let t = estimate / std_error;
    t.is_finite() && t.abs() >= SIGNIFICANCE_T || (std_error == 0.0 && estimate != 0.0)
}

pub fn parameter_significance(fit: &ErgFit) -> Vec<(ModelTerm, bool)> {
    fit.terms
        .iter()
        .map(|t| (t.term, is_significant(t.estimate, t.std_error)))
        .collect()
}

/// Two-sample t-test on one parameter's estimates across two groups of fits.
pub fn compare_parameter_groups(
    group_a: &[ErgFit],
    group_b: &[ErgFit],
    term: ModelTerm,
    kind: TestKind,
) -> Result<TTestResult, ErgmError> {
    let values = |group: &[ErgFit]| -> Result<Vec<f64>, ErgmError> {
        group
            .iter()
            .map(|f| {
                if !f.converged {
                    return Err(ErgmError::NotConverged(f.hospital_id.clone()));
                }
                f.term(term).map(|t| t.estimate).ok_or(ErgmError::MissingTerm(term))
            })
            .collect()
    };
    Ok(two_sample_ttest(&values(group_a)?, &values(group_b)?, kind)?)
}

pub fn estimate_parameters(pcn: &Pcn, model: &[ModelTerm], cfg: &McmcConfig) -> Result<ErgFit, ErgmError> {
    estimate_parameters_with(pcn, model, cfg, &EstimationSettings::default())
}

struct Draws {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    mean_density: f64,
    at_cap: usize,
}

fn active(stats: &ErgStatistics, idx: &[usize]) -> DVector<f64> {
    let all = stats.as_array();
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| all[i] as f64))
}

fn draw(sampler: &mut Sampler, idx: &[usize], count: usize, thinning: u64) -> Draws {
    let p = idx.len();
    let mut rows = Vec::with_capacity(count);
    let mut density_sum = 0.0;
    let mut at_cap = 0;
    for _ in 0..count {
        sampler.run(thinning);
        rows.push(active(&sampler.statistics(), idx));
        density_sum += sampler.graph().density();
        at_cap += usize::from(sampler.at_edge_cap());
    }
    let n = count as f64;
    let mean = rows.iter().fold(DVector::zeros(p), |acc, r| acc + r) / n;
    let mut cov = DMatrix::zeros(p, p);
    for r in &rows {
        let d = r - &mean;
        cov += &d * d.transpose();
    }
    if count > 1 {
        cov /= n - 1.0;
    }
    Draws {
        mean,
        cov,
        mean_density: density_sum / n,
        at_cap,
    }
}

/// Inverse of a covariance matrix, with a small ridge when it is singular.
fn invert_covariance(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = cov.clone().cholesky() {
        return Some(ch.inverse());
    }
    let scale = cov.diagonal().max().max(f64::MIN_POSITIVE);
    let ridged = cov + DMatrix::identity(cov.nrows(), cov.ncols()) * (1e-8 * scale);
    ridged.cholesky().map(|ch| ch.inverse())
}

fn set_active(theta: &mut [f64; 4], idx: &[usize], values: &DVector<f64>) {
    for (k, &i) in idx.iter().enumerate() {
        theta[i] = values[k];
    }
}

fn get_active(theta: &[f64; 4], idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| theta[i]))
}

struct Context<'a> {
    idx: Vec<usize>,
    z_obs: DVector<f64>,
    observed_density: f64,
    start_graph: DenseGraph,
    edge_cap: Option<u64>,
    cfg: &'a McmcConfig,
    settings: &'a EstimationSettings,
}

struct Attempt {
    theta: [f64; 4],
    draws: Draws,
    cov_inv: Option<DMatrix<f64>>,
    ratios: Vec<f64>,
    max_ratio: f64,
    rounds: usize,
    converged: bool,
    degenerate: bool,
}

impl Attempt {
    fn better_than(&self, other: &Attempt) -> bool {
        match (self.degenerate, other.degenerate) {
            (false, true) => true,
            (true, false) => false,
            _ => self.max_ratio < other.max_ratio || other.max_ratio.is_nan(),
        }
    }
}

fn convergence_ratios(d: &Draws, z_obs: &DVector<f64>) -> Vec<f64> {
    (0..z_obs.len())
        .map(|k| {
            let sd = d.cov[(k, k)].sqrt();
            let dev = d.mean[k] - z_obs[k];
            if sd > 0.0 {
                dev / sd
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Runs from `start` on the observed graph: all phases when `gain_factor`
/// is given, otherwise only the final phase.
fn run_attempt(
    sampler: &mut Sampler,
    ctx: &Context<'_>,
    start: [f64; 4],
    gain_factor: Option<f64>,
    diagnostics: &mut Vec<String>,
) -> Attempt {
    let cfg = ctx.cfg;
    let mut theta = start;
    sampler.restart_from(ctx.start_graph.clone());
    sampler.set_params(&ErgParams::from_array(theta));
    if let Some(gain_factor) = gain_factor {
        sampler.run(cfg.burn_in);
        theta = approximate(sampler, ctx, theta, gain_factor, diagnostics);
    }
    refine(sampler, ctx, theta, diagnostics)
}

/// Phases 1 and 2.
fn approximate(
    sampler: &mut Sampler,
    ctx: &Context<'_>,
    mut theta: [f64; 4],
    gain_factor: f64,
    diagnostics: &mut Vec<String>,
) -> [f64; 4] {
    let (cfg, settings, idx) = (ctx.cfg, ctx.settings, &ctx.idx);
    let p = idx.len();

    // Phase 1: scaling.
    let n1 = settings.phase1_iterations.unwrap_or(50 + 10 * p).max(2);
    let phase1 = draw(sampler, idx, n1, cfg.thinning);
    let scale: Vec<f64> = (0..p)
        .map(|k| {
            let v = phase1.cov[(k, k)];
            // a statistic that never moved still needs a finite step size
            if v > 1e-12 { v } else { ctx.z_obs[k].abs().max(1.0) }
        })
        .collect();

    // Phase 2: Robbins–Monro with halving gain and iterate averaging.
    let mut extreme_run = 0usize;
    'subphases: for k in 0..settings.subphases {
        let gain = gain_factor * settings.initial_gain / 2f64.powi(k as i32);
        let n_min = (2f64.powf(4.0 * k as f64 / 3.0) * (7 + p) as f64).ceil() as usize;
        let n_max = n_min + 200;
        let sub_start = get_active(&theta, idx);
        let mut sum = DVector::zeros(p);
        let mut count = 0usize;
        let mut first_sign: Vec<f64> = vec![0.0; p];
        let mut crossed = vec![false; p];
        for it in 0..n_max {
            sampler.run(cfg.thinning);
            let dev = active(&sampler.statistics(), idx) - &ctx.z_obs;
            let mut current = get_active(&theta, idx);
            for j in 0..p {
                let step = (gain * dev[j] / scale[j]).clamp(-settings.max_step, settings.max_step);
                current[j] -= step;
                let s = dev[j].signum();
                if first_sign[j] == 0.0 {
                    first_sign[j] = s;
                } else if s != 0.0 && s != first_sign[j] {
                    crossed[j] = true;
                }
            }
            set_active(&mut theta, idx, &current);
            sampler.set_params(&ErgParams::from_array(theta));
            sum += &current;
            count += 1;

            if is_degenerate(sampler.graph().density(), Some(ctx.observed_density)) {
                extreme_run += 1;
                if extreme_run >= settings.degeneracy_patience {
                    diagnostics.push(format!(
                        "chain stuck at density {:.3} during sub-phase {}; reverting to the sub-phase start",
                        sampler.graph().density(),
                        k + 1
                    ));
                    set_active(&mut theta, idx, &sub_start);
                    sampler.set_params(&ErgParams::from_array(theta));
                    sampler.restart_from(ctx.start_graph.clone());
                    break 'subphases;
                }
            } else {
                extreme_run = 0;
            }
            if it + 1 >= n_min && crossed.iter().all(|&c| c) {
                break;
            }
        }
        let avg = sum / count as f64;
        set_active(&mut theta, idx, &avg);
        sampler.set_params(&ErgParams::from_array(theta));
    }

    theta
}

/// Phase 3: long simulation, refined by bounded Newton steps. The round
/// with the smallest largest ratio is kept; a round that degenerates or
/// clearly worsens the fit is discarded and the next step, taken from the
/// kept round, is halved.
fn refine(sampler: &mut Sampler, ctx: &Context<'_>, mut theta: [f64; 4], diagnostics: &mut Vec<String>) -> Attempt {
    let (cfg, settings, idx) = (ctx.cfg, ctx.settings, &ctx.idx);
    let mut best: Option<Attempt> = None;
    let mut step_factor = 1.0f64;
    let mut rounds = 0;
    loop {
        rounds += 1;
        sampler.run(cfg.burn_in);
        let d = draw(sampler, idx, cfg.n_samples, cfg.thinning);
        let cov_inv = invert_covariance(&d.cov);
        let ratios = convergence_ratios(&d, &ctx.z_obs);
        let max_ratio = ratios.iter().map(|r| r.abs()).fold(0.0, f64::max);
        // a chain pinned at the cap is fitting the restriction, not the data
        let pinned = d.at_cap * 20 > cfg.n_samples;
        let extreme = is_degenerate(d.mean_density, Some(ctx.observed_density));
        let bad = pinned || extreme || cov_inv.is_none();
        if bad {
            diagnostics.push(if pinned {
                format!(
                    "round {rounds}: {} of {} draws at the edge cap {}",
                    d.at_cap,
                    cfg.n_samples,
                    ctx.edge_cap.unwrap_or_default()
                )
            } else if extreme {
                format!("round {rounds}: mean simulated density {:.3}", d.mean_density)
            } else {
                format!("round {rounds}: simulated statistics have singular covariance")
            });
            sampler.restart_from(ctx.start_graph.clone());
        }
        let current = Attempt {
            theta,
            draws: d,
            cov_inv,
            ratios,
            max_ratio,
            rounds,
            converged: !bad && max_ratio < CONVERGENCE_THRESHOLD,
            degenerate: bad,
        };
        let improved = match &best {
            None => true,
            Some(b) => !bad && max_ratio <= 1.25 * b.max_ratio + 0.05,
        };
        if improved {
            if best.is_some() {
                step_factor = (step_factor * 2.0).min(1.0);
            }
            best = Some(current);
        } else {
            step_factor *= 0.5;
        }
        let kept = best.as_mut().expect("first round is always kept");
        kept.rounds = rounds;
        if kept.converged || kept.degenerate || rounds >= cfg.max_phase_iterations {
            return best.expect("first round is always kept");
        }

        let dev = &kept.draws.mean - &ctx.z_obs;
        let ridged = &kept.draws.cov + DMatrix::from_diagonal(&kept.draws.cov.diagonal()) * settings.newton_ridge;
        let Some(inv) = invert_covariance(&ridged) else {
            return best.expect("first round is always kept");
        };
        let mut step = &inv * &dev * step_factor;
        let length = (dev.transpose() * &inv * &dev)[(0, 0)].max(0.0).sqrt() * step_factor;
        if length > settings.max_newton_length {
            step *= settings.max_newton_length / length;
        }
        let largest = step.amax();
        if largest > settings.max_newton_step {
            step *= settings.max_newton_step / largest;
        }
        theta = kept.theta;
        let next = get_active(&theta, idx) - step;
        if next.iter().any(|v| !v.is_finite()) {
            diagnostics.push("Newton correction produced non-finite parameters".into());
            return best.expect("first round is always kept");
        }
        set_active(&mut theta, idx, &next);
        sampler.set_params(&ErgParams::from_array(theta));
    }
}

pub fn estimate_parameters_with(
    pcn: &Pcn,
    model: &[ModelTerm],
    cfg: &McmcConfig,
    settings: &EstimationSettings,
) -> Result<ErgFit, ErgmError> {
    cfg.validate()?;
    let mut model = model.to_vec();
    model.sort();
    model.dedup();
    if model.is_empty() {
        return Err(ErgmError::EmptyModel);
    }
    let n = pcn.node_count();
    if n < 3 {
        return Err(ErgmError::TooFewNodes { needed: 3, got: n });
    }
    let observed = count_statistics(pcn);
    let dyads = (n * (n - 1) / 2) as u64;
    if observed.edges == 0 || observed.edges == dyads {
        return Err(ErgmError::Boundary {
            term: ModelTerm::Edge,
            value: observed.edges,
        });
    }
    for &term in &model {
        if observed.get(term) == 0 {
            return Err(ErgmError::Boundary {
                term,
                value: 0,
            });
        }
    }

    let idx: Vec<usize> = model.iter().map(|t| t.index()).collect();
    let p = idx.len();
    let observed_density = observed.edges as f64 / dyads as f64;
    let mut initial = [0.0; 4];
    if model.contains(&ModelTerm::Edge) {
        initial[0] = (observed_density / (1.0 - observed_density)).ln();
    }
    let edge_cap = settings
        .edge_cap_factor
        .map(|f| ((f * observed.edges as f64).ceil() as u64).max(observed.edges))
        .filter(|&cap| cap < dyads);
    let ctx = Context {
        z_obs: active(&observed, &idx),
        idx,
        observed_density,
        start_graph: DenseGraph::from_pcn(pcn),
        edge_cap,
        cfg,
        settings,
    };

    let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler = Sampler::with_rng(ctx.start_graph.clone(), &ErgParams::from_array(initial), rng);
    if let Some(cap) = edge_cap {
        sampler = sampler.with_edge_cap(cap);
    }

    let mut diagnostics = Vec::new();
    let mut best: Option<Attempt> = None;
    for attempt in 0..=settings.restarts {
        // later attempts refine the best usable estimate further, or rerun
        // every phase with a smaller gain when there is none
        let (start, gain) = match &best {
            None => (initial, Some(1.0)),
            Some(b) if !b.degenerate && b.theta.iter().all(|v| v.is_finite()) => (b.theta, None),
            Some(_) => (initial, Some(0.5f64.powi(attempt as i32))),
        };
        let result = run_attempt(&mut sampler, &ctx, start, gain, &mut diagnostics);
        if result.converged {
            best = Some(result);
            break;
        }
        diagnostics.push(format!(
            "attempt {} not converged (max |ratio| {:.3})",
            attempt + 1,
            result.max_ratio
        ));
        if best.as_ref().is_none_or(|b| result.better_than(b)) {
            best = Some(result);
        }
    }
    let best = best.expect("at least one attempt runs");

    let mut terms = Vec::with_capacity(p);
    for (k, &term) in model.iter().enumerate() {
        let std_error = best.cov_inv.as_ref().map_or(f64::INFINITY, |inv| inv[(k, k)].max(0.0).sqrt());
        let estimate = best.theta[term.index()];
        terms.push(TermFit {
            term,
            estimate,
            std_error,
            convergence_ratio: best.ratios[k],
            t_statistic: estimate / std_error,
            significant: is_significant(estimate, std_error),
        });
    }
    let converged = best.converged;
    let degenerate = best.degenerate || !converged;
    if !converged {
        diagnostics.push(format!(
            "not converged after {} attempts; reporting the attempt with max |ratio| {:.3}",
            settings.restarts + 1,
            best.max_ratio
        ));
    }
    let theta = best.theta;
    let final_draws = best.draws;
    let rounds = best.rounds;

    Ok(ErgFit {
        hospital_id: pcn.hospital_id.clone(),
        n_nodes: n,
        terms,
        estimates: ErgParams::from_array(theta),
        observed,
        simulated_mean: final_draws.mean.iter().copied().collect(),
        simulated_sd: (0..p).map(|k| final_draws.cov[(k, k)].sqrt()).collect(),
        converged,
        degenerate,
        refinement_rounds: rounds,
        acceptance_rate: sampler.acceptance_rate(),
        diagnostics,
        seed: cfg.seed,
        mcmc: *cfg,
        settings: *settings,
    })
}
