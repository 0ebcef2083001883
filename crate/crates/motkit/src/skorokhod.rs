//! Brownian realization of a two-map coupling as a barrier-type stopping
//! time.
//!
//! A path started at `x` is stopped when it leaves `[T_d(x), T_u(x)]`; by
//! the gambler's-ruin weights this lands on `T_u(x)` with probability
//! `q(x)` and on `T_d(x)` otherwise, so the pair (start, stop) reproduces
//! the coupling. The same stopping time is the hitting time of the barrier
//!
//! ```text
//!     R = union over grid points of [T_i(x) - x, infinity) x {T_i(x)}
//! ```
//!
//! in the phase plane `(B_t - B_0, B_t)`: a ray `(m, h)` can be hit by a
//! path from `x` only if `h - x >= m` (the first coordinate equals `h - x`
//! the moment the path is at height `h`), and the structure of valid maps
//! puts every such reachable height outside the path's own open interval.
//! Hitting detection therefore reduces to level crossings of the active
//! heights, which is robust under time discretization: a sampled segment
//! that brackets a height counts as a crossing, with the crossing time
//! refined by linear interpolation.
//!
//! All randomness flows through per-path ChaCha streams keyed by
//! `(seed, path index)`, so ensembles are reproducible and statistics do
//! not depend on worker count.

use crate::curtain::{validate_t_maps, TMaps, TMapsViolation};
use crate::measures::{wasserstein1, Measure, MeasureError};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

/// Matching tolerance for exit levels: a sampled path overshoots a level by
/// O(sqrt(dt)) at the crossing step.
pub fn height_tol(dt: f64) -> f64 {
    3.0 * dt.sqrt()
}

#[derive(Debug, Error)]
pub enum SkorokhodError {
    #[error("start point {0} outside the map grid hull")]
    OutsideHull(f64),
    #[error("maps fail structural validation: {0:?}")]
    InvalidMaps(Vec<TMapsViolation>),
    #[error("bad path configuration: {0}")]
    BadConfig(String),
    #[error("time grid entry {0} exceeds the horizon")]
    BeyondHorizon(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Time-stepping and ensemble parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl PathConfig {
    pub fn new(dt: f64, t_max: f64, seed: u64, n_paths: usize) -> Result<Self, SkorokhodError> {
        if !(dt > 0.0 && dt.is_finite()) || t_max < dt || n_paths == 0 {
            return Err(SkorokhodError::BadConfig(format!(
                "dt={dt}, t_max={t_max}, n_paths={n_paths}"
            )));
        }
        Ok(PathConfig {
            dt,
            t_max,
            seed,
            n_paths,
        })
    }

    fn max_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

/// Horizon heuristic: exit times from an interval of half-width `r` have
/// mean at most `r^2`, so ten times the squared maximal half-width censors
/// a negligible tail.
pub fn default_t_max(t: &TMaps) -> f64 {
    let max_half = t
        .grid()
        .iter()
        .enumerate()
        .map(|(i, _)| 0.5 * (t.t_up()[i] - t.t_down()[i]))
        .fold(0.0f64, f64::max);
    (10.0 * max_half * max_half).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineFamily {
    Up,
    Down,
    Stay,
}

/// One ray `[threshold, infinity) x {height}` of the barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierLine {
    pub threshold: f64,
    pub height: f64,
    pub family: LineFamily,
}

/// The right-closed barrier assembled from both map families.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    lines: Vec<BarrierLine>,
}

impl Barrier {
    pub fn lines(&self) -> &[BarrierLine] {
        &self.lines
    }

    /// Heights reachable by a path started at `x`: the ray `(m, h)` is hit
    /// when the path is at height `h` with `h - x >= m`. Sorted, deduplicated.
    pub fn active_heights(&self, x: f64) -> Vec<f64> {
        let mut heights: Vec<f64> = self
            .lines
            .iter()
            .filter(|l| l.height - x >= l.threshold - 1e-12)
            .map(|l| l.height)
            .collect();
        heights.sort_by(f64::total_cmp);
        heights.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        heights
    }
}

/// Builds the barrier of a validated map family: one ray per grid point per
/// family with threshold `T_i(x) - x` at height `T_i(x)`; a stay point
/// contributes the single ray `[0, infinity) x {x}`.
pub fn build_barrier(t: &TMaps) -> Result<Barrier, SkorokhodError> {
    let violations = validate_t_maps(t);
    if !violations.is_empty() {
        return Err(SkorokhodError::InvalidMaps(violations));
    }
    let mut lines = Vec::with_capacity(2 * t.len());
    for (i, &x) in t.grid().iter().enumerate() {
        let (td, tu) = (t.t_down()[i], t.t_up()[i]);
        if tu - td <= 1e-12 {
            lines.push(BarrierLine {
                threshold: 0.0,
                height: x,
                family: LineFamily::Stay,
            });
        } else {
            lines.push(BarrierLine {
                threshold: td - x,
                height: td,
                family: LineFamily::Down,
            });
            lines.push(BarrierLine {
                threshold: tu - x,
                height: tu,
                family: LineFamily::Up,
            });
        }
    }
    Ok(Barrier { lines })
}

fn maps_at_or_err(t: &TMaps, x: f64) -> Result<(f64, f64, f64), SkorokhodError> {
    t.maps_at(x).ok_or(SkorokhodError::OutsideHull(x))
}

/// Draws the exit level of a Brownian path from `[T_d(x), T_u(x)]` exactly:
/// `T_u(x)` with probability `q(x)`, else `T_d(x)`; `x` itself on stay
/// points.
pub fn sample_exit(t: &TMaps, x: f64, rng: &mut impl Rng) -> Result<f64, SkorokhodError> {
    let (td, tu, q) = maps_at_or_err(t, x)?;
    if tu - td <= 1e-12 {
        return Ok(x);
    }
    Ok(if rng.gen::<f64>() < q { tu } else { td })
}

/// Result of a discretized first-exit simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathExit {
    /// Step index at which the path first left the interval (0 on stay
    /// points).
    pub step: usize,
    /// Exit time `step * dt`.
    pub tau: f64,
    /// Exit value, clamped to the crossed boundary.
    pub y: f64,
    pub censored: bool,
}

/// Euler-Maruyama first exit from `[T_d(x), T_u(x)]`: increments
/// `sqrt(dt) * N(0,1)` until the sampled value leaves the interval or the
/// horizon is reached.
pub fn simulate_path_exit(
    t: &TMaps,
    x: f64,
    cfg: &PathConfig,
    rng: &mut impl Rng,
) -> Result<PathExit, SkorokhodError> {
    let (td, tu, _) = maps_at_or_err(t, x)?;
    if tu - td <= 1e-12 {
        return Ok(PathExit {
            step: 0,
            tau: 0.0,
            y: x,
            censored: false,
        });
    }
    let sqrt_dt = cfg.dt.sqrt();
    let mut b = x;
    for step in 1..=cfg.max_steps() {
        let z: f64 = StandardNormal.sample(rng);
        b += sqrt_dt * z;
        if b < td || b > tu {
            return Ok(PathExit {
                step,
                tau: step as f64 * cfg.dt,
                y: if b > tu { tu } else { td },
                censored: false,
            });
        }
    }
    Ok(PathExit {
        step: cfg.max_steps(),
        tau: cfg.t_max,
        y: b,
        censored: true,
    })
}

/// A barrier hit of a sampled path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierHit {
    /// Step index of the segment whose endpoint brackets the height.
    pub step: usize,
    /// Crossing time, linearly interpolated within the step.
    pub tau: f64,
    /// Height of the ray that was hit.
    pub height: f64,
}

/// Streaming detector for the first crossing of any active height.
struct CrossingDetector<'a> {
    heights: &'a [f64],
}

impl<'a> CrossingDetector<'a> {
    /// First height crossed by the segment `[prev, cur]`, i.e. the active
    /// height nearest to `prev` that the segment brackets.
    fn check(&self, prev: f64, cur: f64) -> Option<f64> {
        if cur > prev {
            // Smallest height in (prev, cur].
            let idx = self.heights.partition_point(|&h| h <= prev);
            self.heights.get(idx).copied().filter(|&h| h <= cur)
        } else if cur < prev {
            // Largest height in [cur, prev).
            let idx = self.heights.partition_point(|&h| h < prev);
            idx.checked_sub(1)
                .and_then(|i| self.heights.get(i))
                .copied()
                .filter(|&h| h >= cur)
        } else {
            None
        }
    }
}

fn interp_tau(step: usize, prev: f64, cur: f64, level: f64, dt: f64) -> f64 {
    let frac = if (cur - prev).abs() > 0.0 {
        ((level - prev) / (cur - prev)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    ((step - 1) as f64 + frac) * dt
}

/// First barrier hit of an explicitly sampled path (`path[0]` is the start)
/// on a uniform `dt` grid. A hit at step `k > 0` means the segment from
/// `path[k-1]` to `path[k]` crossed an active height; step 0 reports a start
/// lying on the barrier.
pub fn hit_barrier(b: &Barrier, path: &[f64], dt: f64) -> Option<BarrierHit> {
    let x = *path.first()?;
    let heights = b.active_heights(x);
    if heights.iter().any(|h| (h - x).abs() <= 1e-12) {
        return Some(BarrierHit {
            step: 0,
            tau: 0.0,
            height: x,
        });
    }
    let detector = CrossingDetector { heights: &heights };
    for (k, w) in path.windows(2).enumerate() {
        if let Some(h) = detector.check(w[0], w[1]) {
            return Some(BarrierHit {
                step: k + 1,
                tau: interp_tau(k + 1, w[0], w[1], h, dt),
                height: h,
            });
        }
    }
    None
}

/// Ensemble agreement between the interval exit time and the barrier
/// hitting time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingComparison {
    pub n_paths: usize,
    pub censored: usize,
    /// Fraction of uncensored paths where both stops happen within one step
    /// of each other and at matching levels.
    pub agreement: f64,
    /// Mean of |tau_barrier - tau_exit| over uncensored paths (interpolated
    /// times).
    pub mean_abs_diff: f64,
    pub mean_exit_time: f64,
}

#[derive(Clone, Copy)]
enum PathOutcome {
    Censored,
    Done {
        agree: bool,
        abs_diff: f64,
        tau_exit: f64,
    },
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Per-start data shared by all paths from the same grid point.
struct StartSite {
    x: f64,
    td: f64,
    tu: f64,
    heights: Vec<f64>,
}

fn start_sites(t: &TMaps, barrier: &Barrier, mu: &Measure) -> Result<Vec<StartSite>, SkorokhodError> {
    mu.atoms()
        .iter()
        .map(|&x| {
            let (td, tu, _) = maps_at_or_err(t, x)?;
            Ok(StartSite {
                x,
                td,
                tu,
                heights: barrier.active_heights(x),
            })
        })
        .collect()
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cum.push(acc);
    }
    cum
}

/// Simulates `cfg.n_paths` Brownian paths with starts drawn from `mu` and
/// measures how often the barrier hit and the interval exit coincide (same
/// step within one, levels within [`height_tol`]). With valid maps every
/// reachable height lies outside the start's open interval, so the two
/// stops agree up to discretization; this quantifies the residual gap.
pub fn compare_stopping_times(
    t: &TMaps,
    mu: &Measure,
    cfg: &PathConfig,
) -> Result<StoppingComparison, SkorokhodError> {
    let barrier = build_barrier(t)?;
    let sites = start_sites(t, &barrier, mu)?;
    let cum = cumulative(mu.weights());
    let sqrt_dt = cfg.dt.sqrt();
    let tol = height_tol(cfg.dt);
    let max_steps = cfg.max_steps();

    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let u = rng.gen::<f64>();
            let site = &sites[cum.partition_point(|&c| c < u).min(sites.len() - 1)];
            if site.tu - site.td <= 1e-12 {
                // Stay point: both times are zero by construction.
                return PathOutcome::Done {
                    agree: true,
                    abs_diff: 0.0,
                    tau_exit: 0.0,
                };
            }
            let detector = CrossingDetector {
                heights: &site.heights,
            };
            let mut prev = site.x;
            let mut exit: Option<(usize, f64, f64)> = None; // (step, tau, level)
            let mut hit: Option<(usize, f64, f64)> = None;
            for step in 1..=max_steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                let cur = prev + sqrt_dt * z;
                if hit.is_none() {
                    if let Some(h) = detector.check(prev, cur) {
                        hit = Some((step, interp_tau(step, prev, cur, h, cfg.dt), h));
                    }
                }
                if exit.is_none() && (cur < site.td || cur > site.tu) {
                    let level = if cur > site.tu { site.tu } else { site.td };
                    exit = Some((step, interp_tau(step, prev, cur, level, cfg.dt), level));
                }
                if hit.is_some() && exit.is_some() {
                    break;
                }
                prev = cur;
            }
            match (hit, exit) {
                (Some((hs, ht, hh)), Some((es, et, el))) => PathOutcome::Done {
                    agree: hs.abs_diff(es) <= 1 && (hh - el).abs() <= tol,
                    abs_diff: (ht - et).abs(),
                    tau_exit: et,
                },
                _ => PathOutcome::Censored,
            }
        })
        .collect();

    let mut censored = 0usize;
    let mut agree = 0usize;
    let mut diff_sum = 0.0;
    let mut tau_sum = 0.0;
    for o in &outcomes {
        match o {
            PathOutcome::Censored => censored += 1,
            PathOutcome::Done {
                agree: a,
                abs_diff,
                tau_exit,
            } => {
                agree += *a as usize;
                diff_sum += abs_diff;
                tau_sum += tau_exit;
            }
        }
    }
    let live = cfg.n_paths - censored;
    Ok(StoppingComparison {
        n_paths: cfg.n_paths,
        censored,
        agreement: if live > 0 { agree as f64 / live as f64 } else { 0.0 },
        mean_abs_diff: if live > 0 { diff_sum / live as f64 } else { 0.0 },
        mean_exit_time: if live > 0 { tau_sum / live as f64 } else { 0.0 },
    })
}

/// Law statistics of the exact exit sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingReport {
    /// Empirical law of the stopped value.
    pub empirical_law: Measure,
    pub w1_to_target: f64,
    /// Mean stopping time, from the per-start identity
    /// `E[tau | start] = (x - T_d)(T_u - x)` averaged over the sampled
    /// starts.
    pub mean_tau: f64,
    /// Fraction of samples at stay points (tau = 0).
    pub stay_fraction: f64,
    /// Always zero for exact sampling; kept so downstream reports never
    /// silently drop the field.
    pub censored_fraction: f64,
}

/// Draws `n_samples` starts from `mu`, stops each by the exact Bernoulli
/// exit, and compares the empirical stopped law against `target_nu`.
pub fn embed(
    mu: &Measure,
    t: &TMaps,
    target_nu: &Measure,
    n_samples: usize,
    seed: u64,
) -> Result<EmbeddingReport, SkorokhodError> {
    if n_samples == 0 {
        return Err(SkorokhodError::BadConfig("n_samples = 0".into()));
    }
    // Pre-resolve maps per start atom.
    let maps: Vec<(f64, f64, f64)> = mu
        .atoms()
        .iter()
        .map(|&x| maps_at_or_err(t, x))
        .collect::<Result<_, _>>()?;
    let cum = cumulative(mu.weights());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_samples);
    let mut stay = 0usize;
    let mut tau_sum = 0.0;
    for _ in 0..n_samples {
        let u = rng.gen::<f64>();
        let idx = cum.partition_point(|&c| c < u).min(mu.len() - 1);
        let x = mu.atoms()[idx];
        let (td, tu, q) = maps[idx];
        if tu - td <= 1e-12 {
            stay += 1;
            values.push(x);
        } else {
            tau_sum += (x - td) * (tu - x);
            values.push(if rng.gen::<f64>() < q { tu } else { td });
        }
    }
    values.sort_by(f64::total_cmp);
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j < values.len() && values[j] == values[i] {
            j += 1;
        }
        atoms.push(values[i]);
        weights.push((j - i) as f64 / n_samples as f64);
        i = j;
    }
    let empirical = Measure::new(atoms, weights)?;
    let w1 = wasserstein1(&empirical, target_nu);
    Ok(EmbeddingReport {
        empirical_law: empirical,
        w1_to_target: w1,
        mean_tau: tau_sum / n_samples as f64,
        stay_fraction: stay as f64 / n_samples as f64,
        censored_fraction: 0.0,
    })
}

/// One cell of the uniform-integrability table: Monte Carlo estimates of
/// `E[|B_{t ∧ tau}| 1{|B_{t ∧ tau}| >= c}]` (lhs) and
/// `E[(2 |B_tau| - c)^+]` (rhs) with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UiCheckRow {
    pub t: f64,
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UiCheck {
    pub rows: Vec<UiCheckRow>,
    pub censored_fraction: f64,
}

/// Verifies the stopped-process domination `lhs <= rhs` cell-wise over a
/// `(t, c)` grid, passing when `lhs <= rhs + 3 * combined standard error`.
/// The stopped process is bounded by the exit interval, so both sides
/// vanish for `c` beyond twice the hull.
pub fn check_uniform_integrability(
    t: &TMaps,
    mu: &Measure,
    cfg: &PathConfig,
    t_grid: &[f64],
    c_grid: &[f64],
) -> Result<UiCheck, SkorokhodError> {
    for &tt in t_grid {
        if tt > cfg.t_max + 1e-12 {
            return Err(SkorokhodError::BeyondHorizon(tt));
        }
    }
    let maps: Vec<(f64, f64, f64)> = mu
        .atoms()
        .iter()
        .map(|&x| maps_at_or_err(t, x))
        .collect::<Result<_, _>>()?;
    let cum = cumulative(mu.weights());
    let steps_at: Vec<usize> = t_grid
        .iter()
        .map(|&tt| (tt / cfg.dt).round() as usize)
        .collect();
    let sqrt_dt = cfg.dt.sqrt();
    let max_steps = cfg.max_steps();

    // Per path: the stopped values at each requested time plus the exit
    // value, or None when censored.
    let samples: Vec<Option<(Vec<f64>, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let u = rng.gen::<f64>();
            let idx = cum.partition_point(|&c| c < u).min(mu.len() - 1);
            let x = mu.atoms()[idx];
            let (td, tu, _) = maps[idx];
            if tu - td <= 1e-12 {
                return Some((vec![x; steps_at.len()], x));
            }
            let mut at_times = vec![f64::NAN; steps_at.len()];
            let mut b = x;
            let mut exited: Option<f64> = None;
            for step in 1..=max_steps {
                if exited.is_none() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    b += sqrt_dt * z;
                    if b < td || b > tu {
                        b = if b > tu { tu } else { td };
                        exited = Some(b);
                    }
                }
                for (k, &s) in steps_at.iter().enumerate() {
                    if s == step {
                        at_times[k] = b;
                    }
                }
                if exited.is_some() && steps_at.iter().all(|&s| s <= step) {
                    break;
                }
            }
            let exit = exited?;
            for (k, &s) in steps_at.iter().enumerate() {
                if s == 0 {
                    at_times[k] = x;
                }
                if at_times[k].is_nan() {
                    // Requested time beyond the recorded range: path already
                    // stopped, the stopped value persists.
                    at_times[k] = exit;
                }
            }
            Some((at_times, exit))
        })
        .collect();

    let live: Vec<&(Vec<f64>, f64)> = samples.iter().flatten().collect();
    let censored = cfg.n_paths - live.len();
    let n = live.len().max(1) as f64;

    let mut rows = Vec::with_capacity(t_grid.len() * c_grid.len());
    for (k, &tt) in t_grid.iter().enumerate() {
        for &c in c_grid {
            let (mut ls, mut ls2, mut rs, mut rs2) = (0.0, 0.0, 0.0, 0.0);
            for (at_times, exit) in &live {
                let v = at_times[k].abs();
                let lhs_val = if v >= c { v } else { 0.0 };
                let rhs_val = (2.0 * exit.abs() - c).max(0.0);
                ls += lhs_val;
                ls2 += lhs_val * lhs_val;
                rs += rhs_val;
                rs2 += rhs_val * rhs_val;
            }
            let lhs = ls / n;
            let rhs = rs / n;
            let lhs_se = ((ls2 / n - lhs * lhs).max(0.0) / n).sqrt();
            let rhs_se = ((rs2 / n - rhs * rhs).max(0.0) / n).sqrt();
            let pass = lhs <= rhs + 3.0 * (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
            rows.push(UiCheckRow {
                t: tt,
                c,
                lhs,
                rhs,
                lhs_se,
                rhs_se,
                pass,
            });
        }
    }
    Ok(UiCheck {
        rows,
        censored_fraction: censored as f64 / cfg.n_paths as f64,
    })
}

/// Samples display trajectories for phase-plane plots: each path starts at a
/// `mu`-drawn grid point and runs until its interval exit or the horizon,
/// returned as raw levels on the `dt` grid (index 0 is the start).
pub fn sample_trajectories(
    t: &TMaps,
    mu: &Measure,
    cfg: &PathConfig,
    count: usize,
) -> Result<Vec<Vec<f64>>, SkorokhodError> {
    let maps: Vec<(f64, f64, f64)> = mu
        .atoms()
        .iter()
        .map(|&x| maps_at_or_err(t, x))
        .collect::<Result<_, _>>()?;
    let cum = cumulative(mu.weights());
    let sqrt_dt = cfg.dt.sqrt();
    let mut trajectories = Vec::with_capacity(count);
    for p in 0..count {
        // A salted seed keeps display paths decoupled from the statistics
        // ensembles run with the same configuration.
        let mut rng = path_rng(cfg.seed ^ 0x7472_616a, p);
        let u = rng.gen::<f64>();
        let idx = cum.partition_point(|&c| c < u).min(mu.len() - 1);
        let x = mu.atoms()[idx];
        let (td, tu, _) = maps[idx];
        let mut path = vec![x];
        let mut b = x;
        for _ in 1..=cfg.max_steps() {
            if b < td || b > tu {
                break;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            b += sqrt_dt * z;
            path.push(b);
        }
        trajectories.push(path);
    }
    Ok(trajectories)
}

/// Agreement statistics of two barriers hit by the same path ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierAgreement {
    pub n_paths: usize,
    pub censored: usize,
    pub agreement: f64,
    pub mean_abs_diff: f64,
}

/// Runs one shared ensemble (same seed, same increments) against the
/// barriers of two map families over the same start grid and measures how
/// often the two hitting times coincide. For maps extracted from two
/// optimizers of the same marginals the hitting times agree almost surely.
pub fn compare_barrier_times(
    t1: &TMaps,
    t2: &TMaps,
    mu: &Measure,
    cfg: &PathConfig,
) -> Result<BarrierAgreement, SkorokhodError> {
    let b1 = build_barrier(t1)?;
    let b2 = build_barrier(t2)?;
    let sites1 = start_sites(t1, &b1, mu)?;
    let sites2 = start_sites(t2, &b2, mu)?;
    let cum = cumulative(mu.weights());
    let sqrt_dt = cfg.dt.sqrt();
    let tol = height_tol(cfg.dt);
    let max_steps = cfg.max_steps();

    let outcomes: Vec<Option<(bool, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let u = rng.gen::<f64>();
            let idx = cum.partition_point(|&c| c < u).min(mu.len() - 1);
            let (s1, s2) = (&sites1[idx], &sites2[idx]);
            let stay1 = s1.tu - s1.td <= 1e-12;
            let stay2 = s2.tu - s2.td <= 1e-12;
            let d1 = CrossingDetector {
                heights: &s1.heights,
            };
            let d2 = CrossingDetector {
                heights: &s2.heights,
            };
            let mut hit1: Option<(usize, f64, f64)> = stay1.then_some((0, 0.0, s1.x));
            let mut hit2: Option<(usize, f64, f64)> = stay2.then_some((0, 0.0, s2.x));
            let mut prev = s1.x;
            for step in 1..=max_steps {
                if hit1.is_some() && hit2.is_some() {
                    break;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                let cur = prev + sqrt_dt * z;
                if hit1.is_none() {
                    if let Some(h) = d1.check(prev, cur) {
                        hit1 = Some((step, interp_tau(step, prev, cur, h, cfg.dt), h));
                    }
                }
                if hit2.is_none() {
                    if let Some(h) = d2.check(prev, cur) {
                        hit2 = Some((step, interp_tau(step, prev, cur, h, cfg.dt), h));
                    }
                }
                prev = cur;
            }
            match (hit1, hit2) {
                (Some((k1, tau1, h1)), Some((k2, tau2, h2))) => {
                    Some((k1.abs_diff(k2) <= 1 && (h1 - h2).abs() <= tol, (tau1 - tau2).abs()))
                }
                _ => None,
            }
        })
        .collect();

    let mut censored = 0usize;
    let mut agree = 0usize;
    let mut diff_sum = 0.0;
    for o in &outcomes {
        match o {
            None => censored += 1,
            Some((a, d)) => {
                agree += *a as usize;
                diff_sum += d;
            }
        }
    }
    let live = cfg.n_paths - censored;
    Ok(BarrierAgreement {
        n_paths: cfg.n_paths,
        censored,
        agreement: if live > 0 { agree as f64 / live as f64 } else { 0.0 },
        mean_abs_diff: if live > 0 { diff_sum / live as f64 } else { 0.0 },
    })
}
