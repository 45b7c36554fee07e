//! Seeded walks, cover-time tail probabilities and excursion statistics.
//!
//! Every sample draws from its own ChaCha8 stream: the key is the global
//! seed and the stream id is the sample index, and the step counter is the
//! generator's block position. A sample's trajectory therefore depends only
//! on `(seed, sample)`, never on how samples are scheduled across threads.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{Execution, Moments};
use crate::graph::{Ball, Family, Graph, Region};
use crate::green::GreenTable;
use crate::mdp::{Action, CoverValue, Model};

pub type WalkRng = ChaCha8Rng;

/// Step cap for walks that have no horizon.
pub const SAFETY_CAP: u64 = 1_000_000_000;
/// Widest graph the exact tail dynamic program accepts.
pub const EXACT_CAP: usize = 22;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Independent replicates behind a multilevel splitting interval.
pub const SPLITTING_REPLICATES: usize = 16;
/// 0.975 quantile of Student's t with `SPLITTING_REPLICATES - 1` degrees of
/// freedom.
const T_QUANTILE_15: f64 = 2.131_449_545_559_323;

/// Generator for one sample.
pub fn walk_rng(seed: u64, sample: u64) -> WalkRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

#[inline]
fn uniform_step(g: &Graph, at: usize, rng: &mut WalkRng) -> usize {
    let nb = g.neighbors(at);
    nb[rng.random_range(0..nb.len())]
}

/// A recorded walk `X_0, ..., X_T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub start: usize,
    pub seed: u64,
    pub sample: u64,
    pub steps: Vec<usize>,
    /// First time every vertex has been visited, if reached.
    pub cover_time: Option<usize>,
}

impl Trajectory {
    fn from_steps(g: &Graph, seed: u64, sample: u64, steps: Vec<usize>) -> Self {
        let mut seen = vec![false; g.n()];
        let mut count = 0;
        let mut cover_time = None;
        for (t, &x) in steps.iter().enumerate() {
            if !seen[x] {
                seen[x] = true;
                count += 1;
                if count == g.n() {
                    cover_time = Some(t);
                    break;
                }
            }
        }
        Trajectory { start: steps[0], seed, sample, steps, cover_time }
    }

    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.steps.len() <= 1
    }

    /// `ℓ^v_t = |{s < t : X_s = v}|`.
    pub fn local_time(&self, v: usize, t: usize) -> usize {
        self.steps[..t.min(self.steps.len())].iter().filter(|&&x| x == v).count()
    }

    /// All local times at time `t`.
    pub fn local_times(&self, n: usize, t: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for &x in &self.steps[..t.min(self.steps.len())] {
            out[x] += 1;
        }
        out
    }

    pub fn is_walk_on(&self, g: &Graph) -> bool {
        self.steps.windows(2).all(|w| g.is_adjacent(w[0], w[1]))
    }

    /// `τ*_cov(S)`: first `t` with `X_t ∉ S` and all of `S` visited by `t`.
    pub fn cover_exit_time(&self, region: &Region) -> Option<usize> {
        let mut left = region.len();
        let mut seen = HashMap::with_capacity(left);
        for (t, &x) in self.steps.iter().enumerate() {
            if region.contains(x) {
                if seen.insert(x, ()).is_none() {
                    left -= 1;
                }
            } else if left == 0 {
                return Some(t);
            }
        }
        None
    }
}

pub fn simulate_srw(g: &Graph, start: usize, seed: u64, horizon: usize) -> Trajectory {
    simulate_srw_sample(g, start, seed, 0, horizon)
}

/// Simple random walk for `horizon` steps on stream `sample`.
pub fn simulate_srw_sample(
    g: &Graph,
    start: usize,
    seed: u64,
    sample: u64,
    horizon: usize,
) -> Trajectory {
    let mut rng = walk_rng(seed, sample);
    let mut steps = Vec::with_capacity(horizon + 1);
    let mut at = start;
    steps.push(at);
    for _ in 0..horizon {
        at = uniform_step(g, at, &mut rng);
        steps.push(at);
    }
    Trajectory::from_steps(g, seed, sample, steps)
}

/// Cover time of one walk, run without a horizon.
pub fn cover_time_sample(g: &Graph, start: usize, seed: u64, sample: u64) -> Result<u64> {
    cover_time_sample_capped(g, start, seed, sample, SAFETY_CAP)
}

pub fn cover_time_sample_capped(
    g: &Graph,
    start: usize,
    seed: u64,
    sample: u64,
    cap: u64,
) -> Result<u64> {
    g.check_vertex(start)?;
    let mut rng = walk_rng(seed, sample);
    let mut seen = vec![false; g.n()];
    seen[start] = true;
    let mut left = g.n() - 1;
    let mut at = start;
    let mut t = 0;
    while left > 0 {
        if t >= cap {
            return Err(Error::SafetyCap { cap });
        }
        at = uniform_step(g, at, &mut rng);
        t += 1;
        if !seen[at] {
            seen[at] = true;
            left -= 1;
        }
    }
    Ok(t)
}

/// `P(τ_cov ≤ T)` by forward dynamic programming over `(position, visited)`.
pub fn cover_tail_exact(g: &Graph, start: usize, horizon: usize) -> Result<f64> {
    let n = g.n();
    if n > EXACT_CAP {
        return Err(Error::MaskCapExceeded { size: n, cap: EXACT_CAP });
    }
    g.check_vertex(start)?;
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut covered = 0.0;
    let mut dist: HashMap<(u32, u32), f64> = HashMap::new();
    let m0 = 1u32 << start;
    if m0 == full {
        return Ok(1.0);
    }
    dist.insert((start as u32, m0), 1.0);
    for _ in 0..horizon {
        let mut next: HashMap<(u32, u32), f64> = HashMap::with_capacity(dist.len() * 2);
        for (&(p, m), &mass) in &dist {
            let nb = g.neighbors(p as usize);
            let share = mass / nb.len() as f64;
            for &x in nb {
                let m2 = m | (1u32 << x);
                if m2 == full {
                    covered += share;
                } else {
                    *next.entry((x as u32, m2)).or_insert(0.0) += share;
                }
            }
        }
        dist = next;
        if dist.is_empty() {
            break;
        }
    }
    Ok(covered.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMethod {
    Exact,
    Mc,
    Splitting,
}

impl TailMethod {
    pub fn name(self) -> &'static str {
        match self {
            TailMethod::Exact => "exact",
            TailMethod::Mc => "mc",
            TailMethod::Splitting => "splitting",
        }
    }
}

/// An estimate of `P(τ_cov ≤ T)` from one start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub start: usize,
    pub threshold: usize,
    pub method: TailMethod,
    pub p_hat: f64,
    /// 95% interval; absent for the exact method.
    pub ci: Option<(f64, f64)>,
    /// Total trials (per level for splitting).
    pub samples: u64,
    pub levels: Vec<usize>,
    pub seed: u64,
    /// Set when some splitting level was never reached.
    pub level_unreachable: bool,
}

impl TailEstimate {
    pub fn ci_low(&self) -> f64 {
        self.ci.map_or(self.p_hat, |c| c.0)
    }

    pub fn ci_high(&self) -> f64 {
        self.ci.map_or(self.p_hat, |c| c.1)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low() <= p && p <= self.ci_high()
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

pub fn exact_tail_estimate(g: &Graph, start: usize, horizon: usize) -> Result<TailEstimate> {
    Ok(TailEstimate {
        start,
        threshold: horizon,
        method: TailMethod::Exact,
        p_hat: cover_tail_exact(g, start, horizon)?,
        ci: None,
        samples: 0,
        levels: Vec::new(),
        seed: 0,
        level_unreachable: false,
    })
}

/// Progress of a walk toward covering: time, position and visited set.
#[derive(Debug, Clone)]
struct Snapshot {
    time: usize,
    at: usize,
    visited: Vec<bool>,
    count: usize,
}

impl Snapshot {
    fn start(n: usize, start: usize) -> Self {
        let mut visited = vec![false; n];
        visited[start] = true;
        Snapshot { time: 0, at: start, visited, count: 1 }
    }

    /// Walks until `target` distinct vertices are visited or `horizon` is
    /// reached. Returns whether the target was met.
    fn advance(&mut self, g: &Graph, target: usize, horizon: usize, rng: &mut WalkRng) -> bool {
        while self.count < target && self.time < horizon {
            self.at = uniform_step(g, self.at, rng);
            self.time += 1;
            if !self.visited[self.at] {
                self.visited[self.at] = true;
                self.count += 1;
            }
        }
        self.count >= target
    }
}

pub fn tail_probability_mc(
    g: &Graph,
    start: usize,
    horizon: usize,
    samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    tail_probability_mc_with(g, start, horizon, samples, seed, Execution::default())
}

/// Fraction of `samples` seeded walks covering by `horizon`, Wilson interval.
pub fn tail_probability_mc_with(
    g: &Graph,
    start: usize,
    horizon: usize,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<TailEstimate> {
    g.check_vertex(start)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let n = g.n();
    let hits = exec.count(samples, |i| {
        let mut rng = walk_rng(seed, i);
        Snapshot::start(n, start).advance(g, n, horizon, &mut rng)
    });
    Ok(TailEstimate {
        start,
        threshold: horizon,
        method: TailMethod::Mc,
        p_hat: hits as f64 / samples as f64,
        ci: Some(wilson_interval(hits, samples)),
        samples,
        levels: vec![n],
        seed,
        level_unreachable: false,
    })
}

pub fn tail_probability_splitting(
    g: &Graph,
    start: usize,
    horizon: usize,
    levels: &[usize],
    budget: u64,
    seed: u64,
) -> Result<TailEstimate> {
    tail_probability_splitting_with(g, start, horizon, levels, budget, seed, Execution::default())
}

/// Fixed-effort multilevel splitting on the number of distinct vertices
/// visited by time `horizon`.
///
/// Stage `j` runs `budget` trials. Each trial of a later stage picks a
/// parent uniformly among the previous stage's level-entry snapshots and
/// continues it with fresh randomness. The estimate is the product of stage
/// success fractions. With more than one level the interval comes from
/// [`SPLITTING_REPLICATES`] independent replicates; with a single level the
/// estimator is plain Monte Carlo with a Wilson interval.
pub fn tail_probability_splitting_with(
    g: &Graph,
    start: usize,
    horizon: usize,
    levels: &[usize],
    budget: u64,
    seed: u64,
    exec: Execution,
) -> Result<TailEstimate> {
    g.check_vertex(start)?;
    let n = g.n();
    if budget < 2 {
        return Err(Error::InvalidParameter("splitting budget must be >= 2".into()));
    }
    if levels.is_empty()
        || levels.windows(2).any(|w| w[0] >= w[1])
        || levels[0] == 0
        || *levels.last().unwrap() != n
    {
        return Err(Error::InvalidParameter(format!(
            "levels must increase strictly and end at n = {n}, got {levels:?}"
        )));
    }
    if levels.len() == 1 {
        let mut est = tail_probability_mc_with(g, start, horizon, budget, seed, exec)?;
        est.method = TailMethod::Splitting;
        return Ok(est);
    }

    let replicate = |k: u64| -> f64 {
        let mut parents = vec![Snapshot::start(n, start)];
        let mut estimate = 1.0;
        for (j, &level) in levels.iter().enumerate() {
            let stage = (k * levels.len() as u64 + j as u64) << 32;
            let outcomes: Vec<Option<Snapshot>> = exec.map(budget, |i| {
                let mut rng = walk_rng(seed, stage | i);
                let parent = if j == 0 { 0 } else { rng.random_range(0..parents.len()) };
                let mut snap = parents[parent].clone();
                snap.advance(g, level, horizon, &mut rng).then_some(snap)
            });
            let survivors: Vec<Snapshot> = outcomes.into_iter().flatten().collect();
            estimate *= survivors.len() as f64 / budget as f64;
            if survivors.is_empty() {
                return 0.0;
            }
            parents = survivors;
        }
        estimate
    };

    let mut moments = Moments::default();
    for k in 0..SPLITTING_REPLICATES as u64 {
        moments.push(replicate(k));
    }
    let p_hat = moments.mean();
    let half = T_QUANTILE_15 * moments.std_error();
    Ok(TailEstimate {
        start,
        threshold: horizon,
        method: TailMethod::Splitting,
        p_hat,
        ci: Some(((p_hat - half).max(0.0), (p_hat + half).min(1.0))),
        samples: budget,
        levels: levels.to_vec(),
        seed,
        level_unreachable: p_hat == 0.0,
    })
}

/// Default splitting levels for a graph on `n` vertices: roughly five
/// evenly spaced covered counts ending at `n`.
pub fn default_levels(n: usize) -> Vec<usize> {
    let step = n.div_ceil(5).max(1);
    let mut levels: Vec<usize> = (1..=5).map(|i| (i * step).min(n)).collect();
    levels.dedup();
    if *levels.last().unwrap() != n {
        levels.push(n);
    }
    levels.retain(|&l| l > 1 || n == 1);
    levels
}

/// How tail probabilities are obtained in a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RateMethod {
    Exact,
    Mc { samples: u64, seed: u64 },
    Splitting { budget: u64, seed: u64 },
}

impl RateMethod {
    pub fn kind(&self) -> TailMethod {
        match self {
            RateMethod::Exact => TailMethod::Exact,
            RateMethod::Mc { .. } => TailMethod::Mc,
            RateMethod::Splitting { .. } => TailMethod::Splitting,
        }
    }
}

/// One row of a rate table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub method: TailMethod,
    pub threshold: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `-ln p / n`; infinite when `p = 0`.
    pub alpha_hat: f64,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub rows: Vec<RateRow>,
    /// Least-squares fit of `-ln p(n)` against `n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Sizes dropped from the fit because `p(n) = 0`.
    pub dropped: Vec<usize>,
}

/// Ordinary least squares `y = intercept + slope x` with `R²`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = points.len() as f64;
    if points.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Tail probabilities `P(τ_cov ≤ ⌊C n⌋)` from vertex 0 across sizes, with
/// the empirical rate `-ln p / n` and a linear fit of `-ln p` against `n`.
pub fn rate_curve(
    family: Family,
    c: f64,
    sizes: &[usize],
    method: RateMethod,
) -> Result<RateCurve> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let g = family.build(n)?;
        let horizon = (c * n as f64).floor() as usize;
        let est = match method {
            RateMethod::Exact => exact_tail_estimate(&g, 0, horizon)?,
            RateMethod::Mc { samples, seed } => tail_probability_mc(&g, 0, horizon, samples, seed)?,
            RateMethod::Splitting { budget, seed } => {
                tail_probability_splitting(&g, 0, horizon, &default_levels(n), budget, seed)?
            }
        };
        rows.push(RateRow {
            n,
            method: method.kind(),
            threshold: horizon,
            p_hat: est.p_hat,
            ci_low: est.ci_low(),
            ci_high: est.ci_high(),
            alpha_hat: -est.p_hat.ln() / n as f64,
            samples: est.samples,
            seed: est.seed,
        });
    }
    let dropped: Vec<usize> = rows.iter().filter(|r| r.p_hat <= 0.0).map(|r| r.n).collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.p_hat > 0.0)
        .map(|r| (r.n as f64, -r.p_hat.ln()))
        .collect();
    let (slope, intercept, r_squared) = linear_fit(&points);
    Ok(RateCurve { rows, slope, intercept, r_squared, dropped })
}

/// Chooses the next vertex while the walk is outside its simple region.
pub trait OutsidePolicy: Sync {
    fn choose(&self, g: &Graph, at: usize, visited: &[bool], rng: &mut WalkRng) -> Option<usize>;
}

/// Uniform steps everywhere: the walk is then a simple random walk.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy;

impl OutsidePolicy for UniformPolicy {
    fn choose(&self, g: &Graph, at: usize, _: &[bool], rng: &mut WalkRng) -> Option<usize> {
        Some(uniform_step(g, at, rng))
    }
}

/// The extracted adversary. After the ball is covered and left, the walk
/// steps uniformly.
impl OutsidePolicy for CoverValue {
    fn choose(&self, g: &Graph, at: usize, visited: &[bool], rng: &mut WalkRng) -> Option<usize> {
        let mask = self.mask_of(visited);
        match self.action(at, mask).ok()? {
            Action::Terminate => Some(uniform_step(g, at, rng)),
            Action::Move(y) => match self.model {
                Model::Full => Some(y),
                Model::Collapsed => self.route_step(g, at, y),
            },
        }
    }
}

/// A walk that is uniform inside `region` and follows `policy` outside it,
/// stopped at `τ*_cov(region)` (the stopping position is recorded).
pub fn simulate_policy_walk(
    g: &Graph,
    region: &Region,
    policy: &dyn OutsidePolicy,
    start: usize,
    seed: u64,
    sample: u64,
    cap: u64,
) -> Result<Trajectory> {
    g.check_vertex(start)?;
    let mut rng = walk_rng(seed, sample);
    let mut visited = vec![false; g.n()];
    let mut left = region.len();
    let mut at = start;
    let mut steps = vec![start];
    let mut t = 0u64;
    loop {
        if !visited[at] {
            visited[at] = true;
            if region.contains(at) {
                left -= 1;
            }
        }
        if left == 0 && !region.contains(at) {
            break;
        }
        if t >= cap {
            return Err(Error::SafetyCap { cap });
        }
        at = if region.contains(at) {
            uniform_step(g, at, &mut rng)
        } else {
            let next = policy
                .choose(g, at, &visited, &mut rng)
                .ok_or(Error::PolicyGap { position: at })?;
            if !g.is_adjacent(at, next) {
                return Err(Error::PolicyGap { position: at });
            }
            next
        };
        steps.push(at);
        t += 1;
    }
    Ok(Trajectory::from_steps(g, seed, sample, steps))
}

/// Moments of `ℓ^v` at `τ*_cov(B_v(r))` for walks following the solved
/// adversary from `start`.
pub fn policy_visit_moments(
    g: &Graph,
    value: &CoverValue,
    start: usize,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<Moments> {
    let region = Region::from(&value.ball);
    let v = value.center();
    let counts: Vec<Result<f64>> = exec.map(samples, |i| {
        let traj = simulate_policy_walk(g, &region, value, start, seed, i, SAFETY_CAP)?;
        Ok(traj.local_time(v, traj.len()) as f64)
    });
    let values: Result<Vec<f64>> = counts.into_iter().collect();
    Ok(Moments::from_values(&values?))
}

/// Visits to `v` before the positive hitting time of `A_v(r)`, from `start`.
pub fn killed_visit_sample(
    g: &Graph,
    ball: &Ball,
    start: usize,
    seed: u64,
    sample: u64,
) -> Result<u64> {
    let v = ball.center;
    let mut rng = walk_rng(seed, sample);
    let mut at = start;
    let mut visits = 0;
    let mut t = 0u64;
    loop {
        if t > 0 && ball.distance(at) == ball.radius {
            return Ok(visits);
        }
        if at == v {
            visits += 1;
        }
        if t >= SAFETY_CAP {
            return Err(Error::SafetyCap { cap: SAFETY_CAP });
        }
        at = uniform_step(g, at, &mut rng);
        t += 1;
    }
}

/// Parameters of the excursion decomposition around `A_v(R')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcursionSetup {
    pub center: usize,
    /// `R'`: the annulus whose visits delimit excursions.
    pub inner_radius: usize,
    /// Radius of the ball whose cover-and-exit time stops the decomposition.
    pub cover_radius: usize,
    /// Walk start, outside `B_v(R')`.
    pub start: usize,
    pub k: f64,
    pub epsilon: f64,
}

/// Why the stop index was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Threshold,
    Covered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionRecord {
    /// `t_i`: times the walk stands on `A_v(R')`, up to `t_{I+1}`.
    pub times: Vec<usize>,
    /// `b_i = Σ_{j ≤ i} a^v_{X_{t_j}}(R')` for `i ≤ I`.
    pub b: Vec<f64>,
    /// `c_i = ℓ^v_{t_{i+1}}` for `i ≤ I`.
    pub c: Vec<usize>,
    pub stop_index: usize,
    pub stop_reason: StopReason,
}

impl ExcursionRecord {
    pub fn b_stop(&self) -> f64 {
        self.b[self.stop_index]
    }

    pub fn c_stop(&self) -> usize {
        self.c[self.stop_index]
    }

    pub fn no_visit(&self) -> bool {
        self.c_stop() == 0
    }
}

/// Incremental excursion bookkeeping, fed one position at a time.
struct ExcursionTracker<'a> {
    setup: ExcursionSetup,
    table: &'a GreenTable,
    inner: Ball,
    cover: Region,
    threshold: f64,
    visits: usize,
    seen: Vec<bool>,
    left: usize,
    cover_exit: Option<usize>,
    record: ExcursionRecord,
    stopped: bool,
    done: bool,
    t: usize,
}

impl<'a> ExcursionTracker<'a> {
    fn new(g: &Graph, setup: ExcursionSetup, table: &'a GreenTable) -> Result<Self> {
        if table.center != setup.center || table.radius != setup.inner_radius {
            return Err(Error::InvalidParameter(
                "green table does not match the excursion center and radius".into(),
            ));
        }
        if setup.cover_radius < setup.inner_radius {
            return Err(Error::InvalidParameter("cover radius must be >= R'".into()));
        }
        let inner = Ball::new(g, setup.center, setup.inner_radius)?;
        let cover = Region::from(&Ball::new(g, setup.center, setup.cover_radius)?);
        if cover.len() == g.n() {
            return Err(Error::BallCoversGraph {
                center: setup.center,
                radius: setup.cover_radius,
            });
        }
        if inner.contains(setup.start) {
            return Err(Error::InvalidParameter(format!(
                "start {} lies inside B_v(R')",
                setup.start
            )));
        }
        let d_v = g.degree(setup.center) as f64;
        Ok(ExcursionTracker {
            setup,
            table,
            left: cover.len(),
            inner,
            cover,
            threshold: setup.k * d_v - setup.epsilon,
            visits: 0,
            seen: vec![false; g.n()],
            cover_exit: None,
            record: ExcursionRecord {
                times: Vec::new(),
                b: Vec::new(),
                c: Vec::new(),
                stop_index: 0,
                stop_reason: StopReason::Threshold,
            },
            stopped: false,
            done: false,
            t: 0,
        })
    }

    /// Consumes `X_t`; returns true once `c_I` is known.
    fn push(&mut self, x: usize) -> bool {
        let t = self.t;
        self.t += 1;
        if self.cover_exit.is_none() {
            if self.cover.contains(x) {
                if !self.seen[x] {
                    self.seen[x] = true;
                    self.left -= 1;
                }
            } else if self.left == 0 {
                self.cover_exit = Some(t);
            }
        }
        if self.inner.distance(x) == self.setup.inner_radius {
            // ℓ^v_t counts visits strictly before t.
            if !self.record.times.is_empty() {
                self.record.c.push(self.visits);
            }
            self.record.times.push(t);
            if self.stopped {
                self.done = true;
                return true;
            }
            let a = self.table.annulus_value(x).expect("annulus vertex has a table entry");
            let b = self.record.b.last().copied().unwrap_or(0.0) + a;
            self.record.b.push(b);
            let i = self.record.b.len() - 1;
            if b >= self.threshold {
                self.stopped = true;
                self.record.stop_index = i;
                self.record.stop_reason = StopReason::Threshold;
            } else if self.cover_exit.is_some_and(|ct| ct <= t) {
                self.stopped = true;
                self.record.stop_index = i;
                self.record.stop_reason = StopReason::Covered;
            }
        }
        if x == self.setup.center {
            self.visits += 1;
        }
        false
    }
}

/// Splits a recorded walk into excursions between visits to `A_v(R')` and
/// locates the stop index `I`.
pub fn excursion_decompose(
    traj: &Trajectory,
    g: &Graph,
    table: &GreenTable,
    setup: ExcursionSetup,
) -> Result<ExcursionRecord> {
    let mut tracker = ExcursionTracker::new(g, ExcursionSetup { start: traj.start, ..setup }, table)?;
    for &x in &traj.steps {
        if tracker.push(x) {
            return Ok(tracker.record);
        }
    }
    Err(Error::TrajectoryTooShort)
}

/// Runs a simple random walk until its excursion record is complete.
pub fn sample_excursion(
    g: &Graph,
    table: &GreenTable,
    setup: ExcursionSetup,
    seed: u64,
    sample: u64,
) -> Result<ExcursionRecord> {
    let mut tracker = ExcursionTracker::new(g, setup, table)?;
    let mut rng = walk_rng(seed, sample);
    let mut at = setup.start;
    for _ in 0..SAFETY_CAP {
        if tracker.push(at) {
            debug_assert!(tracker.done);
            return Ok(tracker.record);
        }
        at = uniform_step(g, at, &mut rng);
    }
    Err(Error::SafetyCap { cap: SAFETY_CAP })
}

/// Empirical excursion statistics against their predicted values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionCheck {
    pub samples: u64,
    /// Empirical `P(c_I = 0)` and its standard error.
    pub no_visit: f64,
    pub no_visit_se: f64,
    /// `e^{-3(K d_v + 1)}`.
    pub no_visit_bound: f64,
    /// Empirical mean of `c_I - b_I` and its standard error.
    pub drift: f64,
    pub drift_se: f64,
    /// Largest `b_I` among threshold stops, to compare with `K d_v + 1`.
    pub max_b_stop: f64,
}

impl ExcursionCheck {
    /// `P(c_I = 0) + 3σ ≥ bound`.
    pub fn no_visit_pass(&self) -> bool {
        self.no_visit + 3.0 * self.no_visit_se >= self.no_visit_bound
    }

    /// `|mean(c_I - b_I)| ≤ 3σ`.
    pub fn drift_pass(&self) -> bool {
        self.drift.abs() <= 3.0 * self.drift_se
    }
}

pub fn no_visit_bound(k: f64, d_v: usize) -> f64 {
    (-3.0 * (k * d_v as f64 + 1.0)).exp()
}

/// Samples excursion records and reports `P(c_I = 0)` and `E(c_I - b_I)`.
pub fn check_no_visit(
    g: &Graph,
    table: &GreenTable,
    setup: ExcursionSetup,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<ExcursionCheck> {
    let records: Result<Vec<ExcursionRecord>> =
        exec.map(samples, |i| sample_excursion(g, table, setup, seed, i)).into_iter().collect();
    let records = records?;
    let zero: Vec<f64> = records.iter().map(|r| if r.no_visit() { 1.0 } else { 0.0 }).collect();
    let drift: Vec<f64> = records.iter().map(|r| r.c_stop() as f64 - r.b_stop()).collect();
    let z = Moments::from_values(&zero);
    let d = Moments::from_values(&drift);
    let p = z.mean();
    Ok(ExcursionCheck {
        samples,
        no_visit: p,
        no_visit_se: (p * (1.0 - p) / samples as f64).sqrt(),
        no_visit_bound: no_visit_bound(setup.k, g.degree(setup.center)),
        drift: d.mean(),
        drift_se: d.std_error(),
        max_b_stop: records
            .iter()
            .filter(|r| r.stop_reason == StopReason::Threshold)
            .map(ExcursionRecord::b_stop)
            .fold(0.0, f64::max),
    })
}

/// Both sides of `Π(1 - p_j) ≥ e^{-3 Σ p_j}` for `p_j ∈ [0, 1/2]`.
pub fn bit_process_inequality(ps: &[f64]) -> Result<(f64, f64)> {
    if let Some(&bad) = ps.iter().find(|&&p| !(0.0..=0.5).contains(&p)) {
        return Err(Error::InvalidParameter(format!("p = {bad} outside [0, 1/2]")));
    }
    let product: f64 = ps.iter().map(|p| 1.0 - p).product();
    let bound = (-3.0 * ps.iter().sum::<f64>()).exp();
    Ok((product, bound))
}

/// Outcome of [`check_bit_process_random`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitProcessCheck {
    pub trials: u64,
    /// Smallest `Π(1 - p_j) / e^{-3 Σ p_j}` seen; the inequality says `≥ 1`.
    pub min_ratio: f64,
    pub failures: u64,
}

/// Evaluates [`bit_process_inequality`] on `trials` random sequences of
/// length `1..=max_len` with entries uniform on `[0, 1/2]`.
pub fn check_bit_process_random(
    trials: u64,
    max_len: usize,
    seed: u64,
    exec: Execution,
) -> Result<BitProcessCheck> {
    if max_len == 0 {
        return Err(Error::InvalidParameter("max_len must be >= 1".into()));
    }
    let ratios: Vec<f64> = exec.map(trials, |i| {
        let mut rng = walk_rng(seed, i);
        let len = rng.random_range(1..=max_len);
        let ps: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..=0.5)).collect();
        let (product, bound) = bit_process_inequality(&ps).expect("entries lie in [0, 1/2]");
        product / bound
    });
    Ok(BitProcessCheck {
        trials,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        failures: ratios.iter().filter(|&&r| r < 1.0 - 1e-12).count() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakConcentration {
    pub samples: u64,
    /// `K Σ a_v d_v - ε`.
    pub threshold: f64,
    /// Empirical `P(Σ a_v ℓ^v(r) < threshold)`.
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Weighted local times `Σ_{w ∈ S} a_w ℓ^w(r)` of one walk, where each
/// `ℓ^w(r)` is read at that center's own `τ*_cov(B_w(r))`.
pub fn weighted_local_time(
    g: &Graph,
    traj: &Trajectory,
    centers: &[(usize, f64)],
    r: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for &(w, a) in centers {
        let region = Region::from(&Ball::new(g, w, r)?);
        let stop = traj.cover_exit_time(&region).ok_or(Error::TrajectoryTooShort)?;
        total += a * traj.local_time(w, stop) as f64;
    }
    Ok(total)
}

/// Measures `P(Σ a_v ℓ^v(r) < K Σ a_v d_v - ε)` for a walk that is simple
/// on `B_S(r)` and follows `policy` outside it.
#[allow(clippy::too_many_arguments)]
pub fn check_weak_concentration(
    g: &Graph,
    weights: &[(usize, f64)],
    r: usize,
    k: f64,
    epsilon: f64,
    policy: &dyn OutsidePolicy,
    start: usize,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<WeakConcentration> {
    if weights.is_empty() || weights.iter().any(|&(_, a)| !(a >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be nonnegative and nonempty".into()));
    }
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
    }
    let centers: Vec<usize> = weights.iter().map(|w| w.0).collect();
    let region = Region::ball_union(g, &centers, r)?;
    if region.contains(start) {
        return Err(Error::InvalidParameter(format!("start {start} lies inside B_S(r)")));
    }
    let threshold =
        k * weights.iter().map(|&(w, a)| a * g.degree(w) as f64).sum::<f64>() - epsilon;
    let hits: Result<Vec<bool>> = exec
        .map(samples, |i| {
            let traj = simulate_policy_walk(g, &region, policy, start, seed, i, SAFETY_CAP)?;
            Ok(weighted_local_time(g, &traj, weights, r)? < threshold)
        })
        .into_iter()
        .collect();
    let hits = hits?.into_iter().filter(|&h| h).count() as u64;
    let (ci_low, ci_high) = wilson_interval(hits, samples);
    Ok(WeakConcentration {
        samples,
        threshold,
        probability: hits as f64 / samples as f64,
        ci_low,
        ci_high,
    })
}
