//! The optional-infimum process `L^v_t(r) = ℓ^v_t + V(X_t, covered_t)` and
//! exhaustive checks of its one-step behavior.
//!
//! `V` is the solved cover value: the least expected number of further
//! visits to `v` before covering and leaving `B_v(r)`. The infimum over
//! continuations depends on the history only through the position, the
//! covered part of the ball and `ℓ^v_t`, so every check below enumerates
//! `(position, mask)` pairs of the solved MDP instead of paths.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Ball, Graph};
use crate::mdp::{self, CoverValue, Model};
use crate::walk::Trajectory;

/// Tolerance for the one-step deficit checks.
pub const DEFICIT_TOLERANCE: f64 = 1e-8;
/// Tolerance for zero increments on outside-to-outside steps.
pub const RANGE_TOLERANCE: f64 = 1e-9;
/// Largest difference bound evaluated exactly.
pub const BOUND_LIMIT: u64 = 1 << 63;

/// History summary for one center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LState {
    pub position: usize,
    pub covered: u64,
    /// `ℓ^v_t`: visits to `v` strictly before `t`.
    pub ellv: u64,
}

pub fn l_value(value: &CoverValue, state: LState) -> Result<f64> {
    Ok(state.ellv as f64 + value.value(state.position, state.covered)?)
}

/// One uniform step from `(x, m)`, summarized over neighbors.
fn step_summary(g: &Graph, value: &CoverValue, x: usize, m: u64) -> Result<(f64, f64)> {
    let here = value.value(x, m)?;
    let cost = if x == value.center() { 1.0 } else { 0.0 };
    let mut mean = 0.0;
    let mut max_jump: f64 = 0.0;
    let nb = g.neighbors(x);
    for &y in nb {
        let next = cost + value.value(y, value.step_mask(m, y))?;
        mean += next;
        max_jump = max_jump.max((next - here).abs());
    }
    Ok((here - mean / nb.len() as f64, max_jump))
}

/// Outcome of the one-step submartingale check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmartingaleReport {
    pub states: usize,
    /// `max (L - E[L'])` over non-terminal states; predicted `≤ 0`.
    pub max_deficit: f64,
    /// `max |L - E[L']|` over states inside the ball; predicted `0`.
    pub max_inside_deficit: f64,
    /// The state with the most negative deficit, and that deficit.
    pub strict_witness: Option<(usize, u64, f64)>,
}

impl SubmartingaleReport {
    pub fn pass(&self) -> bool {
        self.max_deficit <= DEFICIT_TOLERANCE && self.max_inside_deficit <= DEFICIT_TOLERANCE
    }
}

/// Ball and full-model cover value for `(v, r)`.
pub fn solve_full(g: &Graph, v: usize, r: usize) -> Result<CoverValue> {
    let ball = Ball::new(g, v, r)?;
    mdp::solve(g, &ball, Model::Full)
}

/// `L - E[L after one simple random walk step]` at every reachable
/// non-terminal state.
pub fn check_submartingale(g: &Graph, value: &CoverValue) -> Result<SubmartingaleReport> {
    let mut report = SubmartingaleReport {
        states: 0,
        max_deficit: f64::NEG_INFINITY,
        max_inside_deficit: 0.0,
        strict_witness: None,
    };
    for (x, m) in value.states() {
        if value.is_terminal(x, m) {
            continue;
        }
        let (deficit, _) = step_summary(g, value, x, m)?;
        report.states += 1;
        report.max_deficit = report.max_deficit.max(deficit);
        if value.ball.contains(x) {
            report.max_inside_deficit = report.max_inside_deficit.max(deficit.abs());
        }
        if deficit < -DEFICIT_TOLERANCE
            && report.strict_witness.is_none_or(|(_, _, d)| deficit < d)
        {
            report.strict_witness = Some((x, m, deficit));
        }
    }
    Ok(report)
}

/// `max |ΔL|` over steps with both endpoints outside the ball; predicted 0.
pub fn check_bounded_range(g: &Graph, value: &CoverValue) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, m) in value.states() {
        if value.ball.contains(x) {
            continue;
        }
        let here = value.value(x, m)?;
        for &y in g.neighbors(x) {
            if !value.ball.contains(y) {
                worst = worst.max((value.value(y, m)? - here).abs());
            }
        }
    }
    Ok(worst)
}

/// The difference bounds for maximum degree `D` and radius `r`. A bound
/// is `None` when it exceeds [`BOUND_LIMIT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundConstants {
    pub max_degree: u64,
    pub radius: u32,
    /// `D^{2 D^{r+1}} + 2 D^{r+1} + 1`.
    pub m_single: Option<u64>,
    /// `D^{r+2} · M_single`.
    pub m_aggregate: Option<u64>,
}

impl BoundConstants {
    pub fn new(max_degree: u64, radius: u32) -> Self {
        let limit = |x: u128| (x <= BOUND_LIMIT as u128).then_some(x as u64);
        let d = max_degree as u128;
        let single = radius
            .checked_add(1)
            .and_then(|e| d.checked_pow(e))
            .and_then(|ball| {
                let e = u32::try_from(ball.checked_mul(2)?).ok()?;
                d.checked_pow(e)?.checked_add(2 * ball)?.checked_add(1)
            })
            .and_then(limit);
        let aggregate = single
            .and_then(|s| {
                let f = d.checked_pow(radius.checked_add(2)?)?;
                f.checked_mul(s as u128)
            })
            .and_then(limit);
        BoundConstants { max_degree, radius, m_single: single, m_aggregate: aggregate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceReport {
    /// Largest `|L_{t+1} - L_t|` over every one-step transition.
    pub observed: f64,
    pub bounds: BoundConstants,
}

impl DifferenceReport {
    /// True when the bound is representable and respected, or when it is
    /// too large to evaluate (the check is then skipped).
    pub fn pass(&self) -> bool {
        self.bounds.m_single.is_none_or(|m| self.observed <= m as f64)
    }

    pub fn skipped(&self) -> bool {
        self.bounds.m_single.is_none()
    }
}

pub fn max_difference(g: &Graph, value: &CoverValue) -> Result<DifferenceReport> {
    let mut observed: f64 = 0.0;
    for (x, m) in value.states() {
        if value.is_terminal(x, m) {
            continue;
        }
        observed = observed.max(step_summary(g, value, x, m)?.1);
    }
    Ok(DifferenceReport {
        observed,
        bounds: BoundConstants::new(g.max_degree() as u64, value.ball.radius as u32),
    })
}

/// Cover values for every `v` whose ball `B_v(r)` does not contain `start`.
pub fn aggregate_values(
    g: &Graph,
    start: usize,
    r: usize,
    model: Model,
) -> Result<BTreeMap<usize, CoverValue>> {
    let dist = g.distances_from(start);
    let mut out = BTreeMap::new();
    for v in (0..g.n()).filter(|&v| dist[v] > r) {
        let ball = Ball::new(g, v, r)?;
        out.insert(v, mdp::solve(g, &ball, model)?);
    }
    Ok(out)
}

/// `L_t = Σ_v L^v_t(r)` along one walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateTrace {
    pub centers: Vec<usize>,
    pub values: Vec<f64>,
    /// First time every tracked ball has been covered and left.
    pub all_stopped: Option<usize>,
    /// `max (L_t - t)` over `t ≥ all_stopped`; predicted `≤ 0`.
    pub max_excess: Option<f64>,
}

/// Each `L^v` is frozen at `τ*_cov(B_v(r))`, where it equals `ℓ^v` at that
/// time.
pub fn aggregate_l(
    g: &Graph,
    traj: &Trajectory,
    values: &BTreeMap<usize, CoverValue>,
) -> Result<AggregateTrace> {
    struct Track<'a> {
        value: &'a CoverValue,
        mask: u64,
        ellv: u64,
        frozen: Option<f64>,
    }
    if !traj.is_walk_on(g) {
        return Err(Error::InvalidParameter("trajectory is not a walk on the graph".into()));
    }
    let mut tracks: Vec<Track> = values
        .values()
        .map(|value| {
            if value.ball.contains(traj.start) {
                return Err(Error::InvalidParameter(format!(
                    "start {} lies inside B_{}(r)",
                    traj.start,
                    value.center()
                )));
            }
            Ok(Track { value, mask: 0, ellv: 0, frozen: None })
        })
        .collect::<Result<_>>()?;
    let mut out = AggregateTrace {
        centers: values.keys().copied().collect(),
        values: Vec::with_capacity(traj.steps.len()),
        all_stopped: None,
        max_excess: None,
    };
    for (t, &x) in traj.steps.iter().enumerate() {
        let mut total = 0.0;
        let mut live = 0;
        for tr in &mut tracks {
            if tr.frozen.is_none() {
                tr.mask = tr.value.step_mask(tr.mask, x);
                if tr.value.is_terminal(x, tr.mask) {
                    tr.frozen = Some(tr.ellv as f64);
                } else {
                    live += 1;
                }
            }
            total += match tr.frozen {
                Some(l) => l,
                None => l_value(tr.value, LState { position: x, covered: tr.mask, ellv: tr.ellv })?,
            };
            if x == tr.value.center() {
                tr.ellv += 1;
            }
        }
        out.values.push(total);
        if live == 0 {
            out.all_stopped.get_or_insert(t);
            let excess = total - t as f64;
            out.max_excess = Some(out.max_excess.map_or(excess, |e: f64| e.max(excess)));
        }
    }
    Ok(out)
}

/// `exp(-x² / (2 t M²))`.
pub fn azuma_bound(x: f64, t: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("difference bound must be positive, got {m}")));
    }
    if !(t >= 1.0) {
        return Err(Error::InvalidParameter(format!("steps must be >= 1, got {t}")));
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("gap must be >= 0, got {x}")));
    }
    Ok((-x * x / (2.0 * t * m * m)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_cycle, make_path};
    use crate::walk::simulate_srw;
    use approx::assert_abs_diff_eq;

    #[test]
    fn l_value_examples() {
        let g = make_path(4).unwrap();
        let value = solve_full(&g, 0, 1).unwrap();
        let at = |position, covered, ellv| l_value(&value, LState { position, covered, ellv });
        assert_abs_diff_eq!(at(1, 0b10, 0).unwrap(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(at(3, 0, 0).unwrap(), 2.0, epsilon = 1e-9);
        assert_eq!(at(2, 0b11, 7).unwrap(), 7.0);
    }

    #[test]
    fn cycle_six_submartingale() {
        let g = make_cycle(6).unwrap();
        let value = solve_full(&g, 0, 1).unwrap();
        let rep = check_submartingale(&g, &value).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!(rep.states > 0);
    }

    #[test]
    fn entry_step_is_strict_with_two_entries() {
        let g = make_cycle(6).unwrap();
        let value = solve_full(&g, 0, 1).unwrap();
        let rep = check_submartingale(&g, &value).unwrap();
        let (x, _, d) = rep.strict_witness.expect("a strictly negative deficit");
        assert!(!value.ball.contains(x));
        assert!(d < 0.0);
    }

    #[test]
    fn single_entry_edge_has_no_strict_step() {
        // From {2, 3, 4} the only way into B_0(1) on P_5 is 2 -> 1, and the
        // adversary can always take it, so entering never costs more.
        let g = make_path(5).unwrap();
        let value = solve_full(&g, 0, 1).unwrap();
        let rep = check_submartingale(&g, &value).unwrap();
        assert!(rep.pass());
        assert_eq!(rep.strict_witness, None);
    }

    #[test]
    fn outside_steps_leave_l_unchanged() {
        let g = make_cycle(8).unwrap();
        let value = solve_full(&g, 0, 1).unwrap();
        assert!(check_bounded_range(&g, &value).unwrap() <= RANGE_TOLERANCE);
        assert_abs_diff_eq!(
            value.value(4, 0).unwrap(),
            value.value(5, 0).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(BoundConstants::new(2, 1).m_single, Some(265));
        assert_eq!(BoundConstants::new(2, 1).m_aggregate, Some(8 * 265));
        assert_eq!(BoundConstants::new(2, 0).m_single, Some(21));
        assert_eq!(BoundConstants::new(3, 2).m_single, None);
        assert_eq!(BoundConstants::new(4, 3).m_aggregate, None);
    }

    #[test]
    fn path_differences_below_bound() {
        let g = make_path(4).unwrap();
        let value = solve_full(&g, 0, 1).unwrap();
        let rep = max_difference(&g, &value).unwrap();
        assert_eq!(rep.bounds.m_single, Some(265));
        assert!(rep.pass() && rep.observed < 265.0);
        assert_eq!(rep, max_difference(&g, &value).unwrap());
    }

    #[test]
    fn aggregate_ends_below_time() {
        let g = make_cycle(6).unwrap();
        let values = aggregate_values(&g, 0, 1, Model::Full).unwrap();
        assert_eq!(values.keys().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
        let psi_sum: f64 = values.values().map(|v| v.psi(0).unwrap()).sum();
        for seed in 0..20 {
            let traj = simulate_srw(&g, 0, seed, 400);
            let trace = aggregate_l(&g, &traj, &values).unwrap();
            assert_abs_diff_eq!(trace.values[0], psi_sum, epsilon = 1e-9);
            assert!(trace.all_stopped.is_some());
            assert!(trace.max_excess.unwrap() <= 1e-9);
        }
    }

    #[test]
    fn azuma_examples() {
        assert_eq!(azuma_bound(0.0, 5.0, 2.0).unwrap(), 1.0);
        assert_abs_diff_eq!(azuma_bound(3.0, 1.0, 3.0).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        let (c, n, m) = (1.5, 20.0, 4.0);
        assert_abs_diff_eq!(
            azuma_bound(c * n, 2.0 * c * n, m).unwrap(),
            (-c * n / (4.0 * m * m)).exp(),
            epsilon = 1e-15
        );
        assert!(azuma_bound(1.0, 1.0, 0.0).is_err());
        assert!(azuma_bound(1.0, 0.5, 1.0).is_err());
    }
}
