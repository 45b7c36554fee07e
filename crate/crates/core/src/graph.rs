//! Undirected bounded-degree graphs, test-family generators, the edge-list
//! text format, and ball / annulus geometry.
//!
//! Vertices are dense indices `0..n`. Adjacency lists are kept sorted, so
//! every iteration order in the crate (and every serialized edge list) is
//! canonical.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Attempts allowed to the pairing model before giving up.
pub const RANDOM_REGULAR_ATTEMPTS: usize = 10_000;

/// An immutable, connected, simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from adjacency lists, checking symmetry, simplicity and
    /// connectivity. Lists are sorted on the way in.
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::InvalidParameter("graph must have at least one vertex".into()));
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            for w in list.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate neighbor {} of vertex {u}",
                        w[0]
                    )));
                }
            }
            for &x in list.iter() {
                if x >= n {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
                if x == u {
                    return Err(Error::InvalidParameter(format!("self-loop at vertex {u}")));
                }
            }
        }
        for u in 0..n {
            for &x in &adjacency[u] {
                if adjacency[x].binary_search(&u).is_err() {
                    return Err(Error::Asymmetric(u, x));
                }
            }
        }
        let graph = Graph { adjacency };
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(graph)
    }

    /// Builds a graph on `n` vertices from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, w) in edges {
            for x in [u, w] {
                if x >= n {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
            }
            adjacency[u].push(w);
            if u != w {
                adjacency[w].push(u);
            }
        }
        Self::from_adjacency(adjacency)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as sorted `(u, w)` pairs with `u < w`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&w| u < w).map(|&w| (u, w)));
        }
        out
    }

    pub fn is_adjacent(&self, u: usize, w: usize) -> bool {
        self.adjacency[u].binary_search(&w).is_ok()
    }

    pub(crate) fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }

    /// BFS distances from `source`; `usize::MAX` marks unreachable vertices.
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &x in &self.adjacency[u] {
                if dist[x] == usize::MAX {
                    dist[x] = dist[u] + 1;
                    queue.push_back(x);
                }
            }
        }
        dist
    }

    fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(|&d| d != usize::MAX)
    }
}

pub fn make_path(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("path needs n >= 2, got {n}")));
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    Graph::from_edges(n, &edges)
}

pub fn make_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("simple cycle needs n >= 3, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::from_edges(n, &edges)
}

/// The `dim`-dimensional discrete torus `(Z/side)^dim`.
pub fn make_torus(side: usize, dim: usize) -> Result<Graph> {
    if side < 3 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "torus needs side >= 3 and dim >= 1, got side={side} dim={dim}"
        )));
    }
    let n = side
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::InvalidParameter("torus too large".into()))?;
    let mut edges = Vec::with_capacity(n * dim);
    for u in 0..n {
        let mut stride = 1;
        for _ in 0..dim {
            let coord = (u / stride) % side;
            let next = if coord + 1 == side { u + stride - side * stride } else { u + stride };
            edges.push((u, next));
            stride *= side;
        }
    }
    Graph::from_edges(n, &edges)
}

/// Complete binary tree with `2^(height+1) - 1` vertices in heap order.
pub fn make_binary_tree(height: usize) -> Result<Graph> {
    if height == 0 || height > 24 {
        return Err(Error::InvalidParameter(format!(
            "binary tree height must be in 1..=24, got {height}"
        )));
    }
    let n = (1usize << (height + 1)) - 1;
    let edges: Vec<_> = (1..n).map(|i| ((i - 1) / 2, i)).collect();
    Graph::from_edges(n, &edges)
}

/// Uniform `d`-regular simple connected graph from the pairing model, with
/// rejection of loops, multi-edges and disconnected outcomes.
pub fn make_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if n < 2 || d == 0 || d >= n || !(n * d).is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "random regular needs n >= 2, 0 < d < n and n*d even, got n={n} d={d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<usize> = (0..n * d).map(|p| p / d).collect();
    'attempt: for _ in 0..RANDOM_REGULAR_ATTEMPTS {
        points.shuffle(&mut rng);
        let mut adjacency = vec![Vec::with_capacity(d); n];
        for pair in points.chunks_exact(2) {
            let (u, w) = (pair[0], pair[1]);
            if u == w || adjacency[u].contains(&w) {
                continue 'attempt;
            }
            adjacency[u].push(w);
            adjacency[w].push(u);
        }
        match Graph::from_adjacency(adjacency) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RejectionBudgetExhausted { attempts: RANDOM_REGULAR_ATTEMPTS })
}

/// Parses the edge-list format: a header line `n m` followed by `m` lines
/// `u v`. Blank trailing lines are ignored.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (header_line, header) = lines
        .next()
        .ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
    let (n, m) = parse_pair(header_line, header)?;
    let mut edges = Vec::with_capacity(m);
    for (line, body) in lines {
        if body.is_empty() {
            continue;
        }
        if edges.len() == m {
            return Err(Error::Parse { line, message: format!("more than {m} edges") });
        }
        let (u, w) = parse_pair(line, body)?;
        if u >= n || w >= n {
            return Err(Error::VertexOutOfRange { vertex: u.max(w), n });
        }
        if u == w {
            return Err(Error::Parse { line, message: format!("self-loop at {u}") });
        }
        edges.push((u.min(w), u.max(w)));
    }
    if edges.len() != m {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: format!("header declares {m} edges, found {}", edges.len()),
        });
    }
    let mut sorted = edges.clone();
    sorted.sort_unstable();
    if let Some(dup) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!(
            "duplicate edge {} {}",
            dup[0].0, dup[0].1
        )));
    }
    Graph::from_edges(n, &edges)
}

fn parse_pair(line: usize, body: &str) -> Result<(usize, usize)> {
    let mut it = body.split_whitespace();
    let mut next = || -> Result<usize> {
        let tok = it
            .next()
            .ok_or_else(|| Error::Parse { line, message: "expected two integers".into() })?;
        tok.parse()
            .map_err(|_| Error::Parse { line, message: format!("not an integer: {tok:?}") })
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse { line, message: "trailing tokens".into() });
    }
    Ok((a, b))
}

/// Canonical edge-list text: sorted `u < v` pairs, newline-terminated.
pub fn serialize_graph(g: &Graph) -> String {
    let edges = g.edges();
    let mut out = String::with_capacity(8 * (edges.len() + 1));
    let _ = writeln!(out, "{} {}", g.n(), edges.len());
    for (u, w) in edges {
        let _ = writeln!(out, "{u} {w}");
    }
    out
}

/// A connected component of `V \ B_v(r)` together with the edges joining it
/// to the ball, as `(outside vertex, ball vertex)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutsideComponent {
    pub vertices: Vec<usize>,
    pub entry_edges: Vec<(usize, usize)>,
}

impl OutsideComponent {
    /// Distinct ball vertices adjacent to this component, ascending.
    pub fn entry_vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.entry_edges.iter().map(|&(_, b)| b).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The ball `B_v(r)` with its annulus, interior and outside components.
///
/// For `r = 0` the annulus is `{v}` and the interior is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ball {
    pub center: usize,
    pub radius: usize,
    pub members: Vec<usize>,
    pub interior: Vec<usize>,
    pub annulus: Vec<usize>,
    pub outside_components: Vec<OutsideComponent>,
    #[serde(skip)]
    distance: Vec<usize>,
    #[serde(skip)]
    bit: Vec<Option<usize>>,
    #[serde(skip)]
    component: Vec<Option<usize>>,
}

impl Ball {
    pub fn new(g: &Graph, center: usize, radius: usize) -> Result<Self> {
        g.check_vertex(center)?;
        let distance = g.distances_from(center);
        let n = g.n();
        let members: Vec<usize> = (0..n).filter(|&w| distance[w] <= radius).collect();
        let interior: Vec<usize> = if radius == 0 {
            Vec::new()
        } else {
            members.iter().copied().filter(|&w| distance[w] < radius).collect()
        };
        let annulus: Vec<usize> =
            members.iter().copied().filter(|&w| distance[w] == radius).collect();
        let mut bit = vec![None; n];
        for (i, &w) in members.iter().enumerate() {
            bit[w] = Some(i);
        }

        let mut component = vec![None; n];
        let mut outside_components = Vec::new();
        for s in 0..n {
            if distance[s] <= radius || component[s].is_some() {
                continue;
            }
            let id = outside_components.len();
            let mut vertices = vec![s];
            let mut entry_edges = Vec::new();
            component[s] = Some(id);
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &x in g.neighbors(u) {
                    if distance[x] <= radius {
                        entry_edges.push((u, x));
                    } else if component[x].is_none() {
                        component[x] = Some(id);
                        vertices.push(x);
                        queue.push_back(x);
                    }
                }
            }
            vertices.sort_unstable();
            entry_edges.sort_unstable();
            outside_components.push(OutsideComponent { vertices, entry_edges });
        }

        Ok(Ball {
            center,
            radius,
            members,
            interior,
            annulus,
            outside_components,
            distance,
            bit,
            component,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, w: usize) -> bool {
        self.distance[w] <= self.radius
    }

    pub fn in_interior(&self, w: usize) -> bool {
        self.radius > 0 && self.distance[w] < self.radius
    }

    /// Graph distance from the center.
    pub fn distance(&self, w: usize) -> usize {
        self.distance[w]
    }

    /// Index of `w` within `members`, which is also its bit in covered masks.
    pub fn bit(&self, w: usize) -> Option<usize> {
        self.bit[w]
    }

    pub fn component_of(&self, w: usize) -> Option<usize> {
        self.component[w]
    }

    pub fn covers_graph(&self) -> bool {
        self.outside_components.is_empty()
    }

    /// Mask with every member bit set.
    pub fn full_mask(&self) -> u64 {
        if self.size() >= 64 {
            u64::MAX
        } else {
            (1u64 << self.size()) - 1
        }
    }
}

/// A vertex set `S` used as the "simple" region of a walk, typically a ball
/// or a union of balls `B_S(r)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub members: Vec<usize>,
    inside: Vec<bool>,
}

impl Region {
    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut inside = vec![false; n];
        for w in members {
            if w >= n {
                return Err(Error::VertexOutOfRange { vertex: w, n });
            }
            inside[w] = true;
        }
        let members = (0..n).filter(|&w| inside[w]).collect();
        Ok(Region { members, inside })
    }

    /// `B_S(r) = ∪_{s ∈ S} B_s(r)`.
    pub fn ball_union(g: &Graph, centers: &[usize], radius: usize) -> Result<Self> {
        let mut inside = vec![false; g.n()];
        for &c in centers {
            g.check_vertex(c)?;
            for (w, d) in g.distances_from(c).into_iter().enumerate() {
                if d <= radius {
                    inside[w] = true;
                }
            }
        }
        let members = (0..g.n()).filter(|&w| inside[w]).collect();
        Ok(Region { members, inside })
    }

    pub fn contains(&self, w: usize) -> bool {
        self.inside[w]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl From<&Ball> for Region {
    fn from(ball: &Ball) -> Self {
        let inside = (0..ball.distance.len()).map(|w| ball.contains(w)).collect();
        Region { members: ball.members.clone(), inside }
    }
}

/// Graph families indexed by vertex count, used by tail-rate sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Path,
    Cycle,
    /// Two-dimensional torus; `n` must be a perfect square.
    Torus,
    /// Random 3-regular graph with the given seed.
    Regular { seed: u64 },
}

impl Family {
    pub fn build(self, n: usize) -> Result<Graph> {
        match self {
            Family::Path => make_path(n),
            Family::Cycle => make_cycle(n),
            Family::Torus => {
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(Error::InvalidParameter(format!("torus size {n} is not a square")));
                }
                make_torus(side, 2)
            }
            Family::Regular { seed } => make_random_regular(n, 3, seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Path => "path",
            Family::Cycle => "cycle",
            Family::Torus => "torus",
            Family::Regular { .. } => "regular",
        }
    }
}

/// A named member of a test corpus.
#[derive(Debug, Clone)]
pub struct CorpusGraph {
    pub name: String,
    pub graph: Graph,
}

/// Paths and cycles on 4..=12 vertices, binary trees of height 2 and 3, the
/// 4x4 torus and random 3-regular graphs on 8, 12 and 16 vertices.
pub fn default_corpus() -> Vec<CorpusGraph> {
    let mut out = Vec::new();
    let mut push = |name: String, g: Result<Graph>| {
        out.push(CorpusGraph { name, graph: g.expect("built-in corpus parameters are valid") });
    };
    for n in 4..=12 {
        push(format!("path:{n}"), make_path(n));
    }
    for n in 4..=12 {
        push(format!("cycle:{n}"), make_cycle(n));
    }
    for h in [2, 3] {
        push(format!("tree:{h}"), make_binary_tree(h));
    }
    push("torus:4,2".into(), make_torus(4, 2));
    for (n, seed) in [(8, 1), (12, 2), (16, 3)] {
        push(format!("regular:{n},3,{seed}"), make_random_regular(n, 3, seed));
    }
    out
}
