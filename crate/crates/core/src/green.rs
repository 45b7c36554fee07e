//! Expected local times of a simple random walk killed on an annulus.
//!
//! For a center `v` and radius `r >= 1`, `g(u)` is the expected number of
//! visits to `v` (counting time 0) before the walk started at `u ∈ B_v(r-1)`
//! hits `A_v(r)`. It solves `g = e_v + P_int g` where `P_int` is the walk
//! restricted to the interior. From an annulus vertex `w` the positive
//! hitting time forces one step first, so
//! `a_w = (1/d_w) Σ_{x ~ w, x ∈ interior} g(x)`.
//!
//! Radius 0 is the positive-return convention: the annulus is `{v}` and
//! `a_v(0) = 1`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Ball, Graph};

/// Interiors up to this size use dense LU; larger ones use Gauss-Seidel.
pub const DENSE_LIMIT: usize = 2048;
/// Target residual of the linear solves.
pub const SOLVER_TOLERANCE: f64 = 1e-12;
/// Tolerance used when asserting identities built on solved values.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

const GAUSS_SEIDEL_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenTable {
    pub center: usize,
    pub radius: usize,
    /// `u ↦ g(u)` over `B_v(r-1)`, ascending by vertex.
    pub interior_values: Vec<(usize, f64)>,
    /// `w ↦ a^v_w(r)` over `A_v(r)`, ascending by vertex.
    pub annulus_values: Vec<(usize, f64)>,
    /// `a^v_v(r)`.
    pub self_value: f64,
    /// `m^v(r) = max_w a^v_w(r)`.
    pub max_annulus: f64,
    /// Sup-norm residual of the interior solve.
    pub solver_residual: f64,
}

impl GreenTable {
    /// `a^v_w(r)` for an annulus vertex.
    pub fn annulus_value(&self, w: usize) -> Option<f64> {
        self.annulus_values
            .binary_search_by_key(&w, |&(x, _)| x)
            .ok()
            .map(|i| self.annulus_values[i].1)
    }

    pub fn interior_value(&self, u: usize) -> Option<f64> {
        self.interior_values
            .binary_search_by_key(&u, |&(x, _)| x)
            .ok()
            .map(|i| self.interior_values[i].1)
    }

    /// `|Σ_w d_w a^v_w(r) - d_v|`.
    pub fn reversibility_residual(&self, g: &Graph) -> f64 {
        let total: f64 = self
            .annulus_values
            .iter()
            .map(|&(w, a)| g.degree(w) as f64 * a)
            .sum();
        (total - g.degree(self.center) as f64).abs()
    }

    pub fn export(&self, g: &Graph) -> GreenTableExport {
        GreenTableExport {
            center: self.center,
            radius: self.radius,
            self_value: self.self_value,
            annulus: self
                .annulus_values
                .iter()
                .map(|&(vertex, value)| AnnulusEntry { vertex, value })
                .collect(),
            residual: self.reversibility_residual(g),
        }
    }
}

/// JSON shape of an exported table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenTableExport {
    pub center: usize,
    pub radius: usize,
    pub self_value: f64,
    pub annulus: Vec<AnnulusEntry>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusEntry {
    pub vertex: usize,
    pub value: f64,
}

/// `(I - P_int)` over the interior of a ball, factored once and reused for
/// several right-hand sides.
struct InteriorSystem<'a> {
    graph: &'a Graph,
    vertices: Vec<usize>,
    index: HashMap<usize, usize>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> InteriorSystem<'a> {
    fn new(graph: &'a Graph, ball: &Ball) -> Self {
        let vertices = ball.interior.clone();
        let index: HashMap<usize, usize> =
            vertices.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let lu = (vertices.len() <= DENSE_LIMIT).then(|| {
            let k = vertices.len();
            let mut a = DMatrix::<f64>::identity(k, k);
            for (i, &u) in vertices.iter().enumerate() {
                let p = 1.0 / graph.degree(u) as f64;
                for x in graph.neighbors(u) {
                    if let Some(&j) = index.get(x) {
                        a[(i, j)] -= p;
                    }
                }
            }
            a.lu()
        });
        InteriorSystem { graph, vertices, index, lu }
    }

    /// `(I - P_int) x` for residual checks.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let p = 1.0 / self.graph.degree(u) as f64;
                let s: f64 = self
                    .graph
                    .neighbors(u)
                    .iter()
                    .filter_map(|x| self.index.get(x))
                    .map(|&j| x[j])
                    .sum();
                x[i] - p * s
            })
            .collect()
    }

    /// Solves `(I - P_int) x = b`, returning `x` and the sup-norm residual.
    fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let x = match &self.lu {
            Some(lu) => {
                let rhs = DVector::from_column_slice(b);
                lu.solve(&rhs)
                    .expect("I - P_int is nonsingular when the annulus is nonempty")
                    .as_slice()
                    .to_vec()
            }
            None => self.gauss_seidel(b),
        };
        let residual = self
            .apply(&x)
            .iter()
            .zip(b)
            .map(|(ax, bi)| (ax - bi).abs())
            .fold(0.0, f64::max);
        (x, residual)
    }

    fn gauss_seidel(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.vertices.len()];
        for _ in 0..GAUSS_SEIDEL_CAP {
            let mut change: f64 = 0.0;
            for (i, &u) in self.vertices.iter().enumerate() {
                let p = 1.0 / self.graph.degree(u) as f64;
                let s: f64 = self
                    .graph
                    .neighbors(u)
                    .iter()
                    .filter_map(|y| self.index.get(y))
                    .map(|&j| x[j])
                    .sum();
                let next = b[i] + p * s;
                change = change.max((next - x[i]).abs());
                x[i] = next;
            }
            if change < SOLVER_TOLERANCE {
                break;
            }
        }
        x
    }
}

fn annulus_ball(g: &Graph, v: usize, r: usize) -> Result<Ball> {
    let ball = Ball::new(g, v, r)?;
    if ball.annulus.is_empty() {
        return Err(Error::EmptyAnnulus { center: v, radius: r });
    }
    Ok(ball)
}

/// Computes `a^v_w(r)` for every annulus vertex, `a^v_v(r)` and `m^v(r)`.
pub fn green_table(g: &Graph, v: usize, r: usize) -> Result<GreenTable> {
    let ball = annulus_ball(g, v, r)?;
    if r == 0 {
        return Ok(GreenTable {
            center: v,
            radius: 0,
            interior_values: Vec::new(),
            annulus_values: vec![(v, 1.0)],
            self_value: 1.0,
            max_annulus: 1.0,
            solver_residual: 0.0,
        });
    }
    let system = InteriorSystem::new(g, &ball);
    let mut rhs = vec![0.0; system.vertices.len()];
    rhs[system.index[&v]] = 1.0;
    let (values, solver_residual) = system.solve(&rhs);

    let annulus_values: Vec<(usize, f64)> = ball
        .annulus
        .iter()
        .map(|&w| {
            let s: f64 = g
                .neighbors(w)
                .iter()
                .filter_map(|x| system.index.get(x))
                .map(|&j| values[j])
                .sum();
            (w, s / g.degree(w) as f64)
        })
        .collect();
    let max_annulus = annulus_values.iter().map(|&(_, a)| a).fold(0.0, f64::max);
    let self_value = values[system.index[&v]];
    Ok(GreenTable {
        center: v,
        radius: r,
        interior_values: system.vertices.iter().copied().zip(values).collect(),
        annulus_values,
        self_value,
        max_annulus,
        solver_residual,
    })
}

/// Hitting distribution `w ↦ P_v(X_{τ_v(r)} = w)` on the annulus, solved as
/// its own linear system (one right-hand side per annulus vertex).
pub fn exit_distribution(g: &Graph, v: usize, r: usize) -> Result<Vec<(usize, f64)>> {
    let ball = annulus_ball(g, v, r)?;
    if r == 0 {
        return Ok(vec![(v, 1.0)]);
    }
    let system = InteriorSystem::new(g, &ball);
    let vi = system.index[&v];
    Ok(ball
        .annulus
        .iter()
        .map(|&w| {
            let rhs: Vec<f64> = system
                .vertices
                .iter()
                .map(|&u| if g.is_adjacent(u, w) { 1.0 / g.degree(u) as f64 } else { 0.0 })
                .collect();
            let (h, _) = system.solve(&rhs);
            (w, h[vi])
        })
        .collect())
}

pub fn reversibility_residual(g: &Graph, v: usize, r: usize) -> Result<f64> {
    Ok(green_table(g, v, r)?.reversibility_residual(g))
}

/// `max_w |d_w a^v_w(r) - d_v P_v(X_{τ_v(r)} = w)|`.
pub fn edge_identity_discrepancy(g: &Graph, v: usize, r: usize) -> Result<f64> {
    let table = green_table(g, v, r)?;
    let exits = exit_distribution(g, v, r)?;
    let dv = g.degree(v) as f64;
    Ok(table
        .annulus_values
        .iter()
        .zip(&exits)
        .map(|(&(w, a), &(w2, p))| {
            debug_assert_eq!(w, w2);
            (g.degree(w) as f64 * a - dv * p).abs()
        })
        .fold(0.0, f64::max))
}

/// The outcome of the small-radius scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallRadiusWitness {
    pub radius: usize,
    /// `m^v(r')` at the returned radius.
    pub value: f64,
    /// `sqrt(d_v a^v_v(r+1) / r)`; infinite when `r = 0`.
    pub bound: f64,
}

/// Least `r' <= r` with `m^v(r') <= sqrt(d_v a^v_v(r+1) / r)`.
pub fn find_small_radius(g: &Graph, v: usize, r: usize) -> Result<SmallRadiusWitness> {
    let outer = Ball::new(g, v, r + 1)?;
    if outer.annulus.is_empty() {
        return Err(Error::BallCoversGraph { center: v, radius: r });
    }
    let self_value = green_table(g, v, r + 1)?.self_value;
    let bound = (g.degree(v) as f64 * self_value / r as f64).sqrt();
    for radius in 0..=r {
        let value = green_table(g, v, radius)?.max_annulus;
        if value <= bound + IDENTITY_TOLERANCE {
            return Ok(SmallRadiusWitness { radius, value, bound });
        }
    }
    Err(Error::NoWitness(format!("center {v}, radius {r}, bound {bound}")))
}
