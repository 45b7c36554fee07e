//! The lemma suite run by `covertime verify`.

use serde::Serialize;

use covertime_core::graph::{make_cycle, Ball, CorpusGraph, Graph};
use covertime_core::green::{find_small_radius, green_table};
use covertime_core::martingale::{
    check_bounded_range, check_submartingale, max_difference, DEFICIT_TOLERANCE, RANGE_TOLERANCE,
};
use covertime_core::mdp::{self, CoverValue, Model, MASK_CAP};
use covertime_core::walk::{check_bit_process_random, check_no_visit, ExcursionSetup};
use covertime_core::{Error, Execution, Result};

/// Largest ball on which the martingale checks run.
pub const MARTINGALE_BALL_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub lemma: &'static str,
    pub instance: String,
    pub statistic: f64,
    /// Absent when the bound is too large to evaluate.
    pub bound: Option<f64>,
    pub pass: bool,
}

impl Verdict {
    fn new(lemma: &'static str, instance: String, statistic: f64, bound: f64, pass: bool) -> Self {
        Verdict { lemma, instance, statistic, bound: Some(bound), pass }
    }

    /// `statistic ≤ bound`.
    fn at_most(lemma: &'static str, instance: String, statistic: f64, bound: f64) -> Self {
        Verdict::new(lemma, instance, statistic, bound, statistic <= bound)
    }

    /// `statistic ≥ bound`.
    fn at_least(lemma: &'static str, instance: String, statistic: f64, bound: f64) -> Self {
        Verdict::new(lemma, instance, statistic, bound, statistic >= bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteOptions {
    pub tol: f64,
    pub max_radius: usize,
    pub samples: u64,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { tol: 1e-9, max_radius: 3, samples: 20_000, seed: 0 }
    }
}

fn feasible(ball: &Ball) -> bool {
    !ball.covers_graph() && ball.size() <= MASK_CAP
}

/// `max |full - collapsed|` over every full-model state.
pub fn model_discrepancy(full: &CoverValue, collapsed: &CoverValue) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, m) in full.states() {
        worst = worst.max((full.value(x, m)? - collapsed.value(x, m)?).abs());
    }
    Ok(worst)
}

/// `min_s (ψ_{r}(s) - ψ_{r-1}(s))` over starts outside the larger ball.
pub fn radius_increment(g: &Graph, smaller: &CoverValue, larger: &CoverValue) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for s in (0..g.n()).filter(|&s| !larger.ball.contains(s)) {
        worst = worst.min(larger.psi(s)? - smaller.psi(s)?);
    }
    Ok(worst)
}

fn center_checks(name: &str, g: &Graph, v: usize, opts: SuiteOptions) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    let tag = |r: usize| format!("{name} v={v} r={r}");
    let ecc = *g.distances_from(v).iter().max().unwrap();

    for r in 0..=ecc {
        let table = green_table(g, v, r)?;
        out.push(Verdict::at_most("reversibility", tag(r), table.reversibility_residual(g), opts.tol));
    }
    for r in 0..=opts.max_radius.min(ecc.saturating_sub(1)) {
        let verdict = match find_small_radius(g, v, r) {
            Ok(w) => Verdict::new("small_radius", tag(r), w.value, w.bound, true),
            Err(Error::NoWitness(_)) => {
                Verdict { lemma: "small_radius", instance: tag(r), statistic: f64::NAN, bound: None, pass: false }
            }
            Err(e) => return Err(e),
        };
        out.push(verdict);
    }

    let mut previous: Option<CoverValue> = None;
    for r in 0..=opts.max_radius {
        let ball = Ball::new(g, v, r)?;
        if !feasible(&ball) {
            break;
        }
        let full = mdp::solve(g, &ball, Model::Full)?;
        let collapsed = mdp::solve(g, &ball, Model::Collapsed)?;
        let psis: Vec<f64> = (0..g.n())
            .filter(|&s| !ball.contains(s))
            .map(|s| full.psi(s))
            .collect::<Result<_>>()?;
        let min_psi = psis.iter().copied().fold(f64::INFINITY, f64::min);
        out.push(Verdict::at_least("psi_floor", tag(r), min_psi, 1.0 - opts.tol));
        if r == 0 {
            let dev = psis.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
            out.push(Verdict::at_most("psi_base", tag(r), dev, opts.tol));
        }
        out.push(Verdict::at_most(
            "collapsed_equivalence",
            tag(r),
            model_discrepancy(&full, &collapsed)?,
            opts.tol,
        ));
        if let Some(prev) = &previous {
            out.push(Verdict::at_least(
                "monotonicity",
                tag(r),
                radius_increment(g, prev, &full)?,
                -opts.tol,
            ));
        }
        if ball.size() <= MARTINGALE_BALL_LIMIT {
            let sub = check_submartingale(g, &full)?;
            out.push(Verdict::at_most("submartingale", tag(r), sub.max_deficit, DEFICIT_TOLERANCE));
            out.push(Verdict::at_most(
                "martingale_inside",
                tag(r),
                sub.max_inside_deficit,
                DEFICIT_TOLERANCE,
            ));
            out.push(Verdict::at_most(
                "bounded_range",
                tag(r),
                check_bounded_range(g, &full)?,
                RANGE_TOLERANCE,
            ));
            let diff = max_difference(g, &full)?;
            out.push(Verdict {
                lemma: "bounded_differences",
                instance: tag(r),
                statistic: diff.observed,
                bound: diff.bounds.m_single.map(|m| m as f64),
                pass: diff.pass(),
            });
        }
        previous = Some(full);
    }
    Ok(out)
}

/// The excursion setup used by the suite: `C_8`, `v = 0`, `R' = 1`, the
/// cover ball of radius 2, start at the antipode and `K` equal to the
/// instance's normalized value `ψ/d_v`.
pub fn cycle_excursion_setup() -> Result<(Graph, ExcursionSetup)> {
    let g = make_cycle(8)?;
    let k = mdp::psi_normalized(&g, 0, 1)?.psi_normalized;
    let setup =
        ExcursionSetup { center: 0, inner_radius: 1, cover_radius: 2, start: 4, k, epsilon: 0.1 };
    Ok((g, setup))
}

pub fn run_suite(corpus: &[CorpusGraph], opts: SuiteOptions, exec: Execution) -> Result<Vec<Verdict>> {
    let cells: Vec<(usize, usize)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.graph.n()).map(move |v| (i, v)))
        .collect();
    // Cells run in parallel; the MDP solves inside a cell stay sequential.
    let per_cell = exec.map_slice(&cells, |&(i, v)| {
        center_checks(&corpus[i].name, &corpus[i].graph, v, opts)
    });
    let mut out = Vec::new();
    for cell in per_cell {
        out.extend(cell?);
    }

    let (g, setup) = cycle_excursion_setup()?;
    let table = green_table(&g, setup.center, setup.inner_radius)?;
    let check = check_no_visit(&g, &table, setup, opts.samples, opts.seed, exec)?;
    let instance = format!("cycle:8 v=0 R'=1 K={:.6} samples={}", setup.k, opts.samples);
    out.push(Verdict::new(
        "no_visit",
        instance.clone(),
        check.no_visit + 3.0 * check.no_visit_se,
        check.no_visit_bound,
        check.no_visit_pass(),
    ));
    out.push(Verdict::new(
        "excursion_martingale",
        instance,
        check.drift.abs(),
        3.0 * check.drift_se,
        check.drift_pass(),
    ));

    let bits = check_bit_process_random(10_000, 64, opts.seed, exec)?;
    out.push(Verdict::at_least(
        "bit_process",
        format!("random sequences={} max_len=64", bits.trials),
        bits.min_ratio,
        1.0,
    ));
    Ok(out)
}

/// `K_{i+1} = K_i + e^{-3 K_i d - 4}`, returned with `K_0` first.
pub fn iterate_induction(k0: f64, d: usize, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut k = k0;
    out.push(k);
    for _ in 0..steps {
        k += (-3.0 * k * d as f64 - 4.0).exp();
        out.push(k);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use covertime_core::graph::make_path;

    #[test]
    fn induction_examples() {
        assert_eq!(iterate_induction(0.7, 3, 0), vec![0.7]);
        let seq = iterate_induction(0.0, 1, 1);
        assert!((seq[1] - (-4.0f64).exp()).abs() < 1e-15);
        let long = iterate_induction(0.0, 2, 50);
        assert!(long.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn suite_on_small_paths_passes() {
        let corpus = vec![
            CorpusGraph { name: "path:4".into(), graph: make_path(4).unwrap() },
            CorpusGraph { name: "cycle:6".into(), graph: make_cycle(6).unwrap() },
        ];
        let opts = SuiteOptions { samples: 2_000, ..SuiteOptions::default() };
        let verdicts = run_suite(&corpus, opts, Execution::Sequential).unwrap();
        let failed: Vec<_> = verdicts.iter().filter(|v| !v.pass).collect();
        assert!(failed.is_empty(), "{failed:?}");
        for lemma in ["reversibility", "psi_base", "monotonicity", "submartingale", "no_visit"] {
            assert!(verdicts.iter().any(|v| v.lemma == lemma), "{lemma}");
        }
    }
}
