//! Flat JSON configuration merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::Args;
use covertime_core::graph::{
    make_binary_tree, make_cycle, make_path, make_random_regular, make_torus, parse_graph,
    CorpusGraph, Family, Graph,
};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "COVERTIME_SEED";

/// Every parameter any command reads. A config file uses the same keys as
/// the long flags; flags win over the file.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Graph spec: path:N, cycle:N, torus:SIDE,DIM, tree:H, regular:N,D,SEED or file:PATH
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    /// Graph specs for sweep and verify (comma separated; numeric pieces
    /// attach to the preceding spec, so `torus:4,2,cycle:5` is two graphs)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graphs: Option<Vec<String>>,
    /// Built-in corpus name (only "default")
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    /// Family for rate: path, cycle, torus or regular
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Ball center
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<usize>,
    /// Ball radius (largest radius for verify)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// Radii for sweep (comma separated)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<usize>>,
    /// Walk start vertex
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    /// Time constant C in T = floor(C n)
    #[arg(long = "C")]
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Time horizon
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    /// Graph sizes for rate (comma separated)
    #[arg(long = "n", value_delimiter = ',')]
    #[serde(rename = "n", skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// Random seed (default: $COVERTIME_SEED, else 0)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Tail method: exact, mc or splitting
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// MDP model: full or collapsed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Splitting levels (comma separated covered counts ending at n)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    /// Splitting trials per level
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Identity tolerance for verify
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Output file (directory for sweep)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($field:ident),* $(,)?) => {
        Params { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Params {
    /// `self` with missing values taken from `base`.
    pub fn over(self, base: Params) -> Params {
        overlay!(
            self, base, graph, graphs, corpus, family, v, r, radii, start, c, t, n_list, samples,
            seed, method, model, levels, budget, tol, out,
        )
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Params> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Merges flags over an optional config file and fills the seed from
    /// the environment when neither sets it.
    pub fn resolve(flags: Params, config: Option<&Path>) -> anyhow::Result<Params> {
        let base = match config {
            Some(path) => Params::from_file(path)?,
            None => Params::default(),
        };
        let mut p = flags.over(base);
        if p.seed.is_none() {
            p.seed = Some(match std::env::var(SEED_ENV) {
                Ok(s) => s.trim().parse().map_err(|_| anyhow!("{SEED_ENV}={s:?} is not a u64"))?,
                Err(_) => 0,
            });
        }
        Ok(p)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn require<T: Clone>(value: &Option<T>, name: &str) -> anyhow::Result<T> {
        value.clone().ok_or_else(|| anyhow!("missing parameter --{name}"))
    }
}

fn numbers(args: &str, count: usize, spec: &str) -> anyhow::Result<Vec<u64>> {
    let parts: Vec<&str> = args.split(',').collect();
    if parts.len() != count {
        bail!("graph spec {spec:?} expects {count} comma separated numbers");
    }
    parts
        .iter()
        .map(|p| p.trim().parse::<u64>().map_err(|_| anyhow!("bad number {p:?} in {spec:?}")))
        .collect()
}

/// Builds a graph from a spec such as `cycle:8` or `file:g.txt`.
pub fn build_graph(spec: &str) -> anyhow::Result<Graph> {
    let (kind, args) = spec.split_once(':').ok_or_else(|| anyhow!("bad graph spec {spec:?}"))?;
    let g = match kind {
        "path" => make_path(numbers(args, 1, spec)?[0] as usize),
        "cycle" => make_cycle(numbers(args, 1, spec)?[0] as usize),
        "tree" => make_binary_tree(numbers(args, 1, spec)?[0] as usize),
        "torus" => {
            let a = numbers(args, 2, spec)?;
            make_torus(a[0] as usize, a[1] as usize)
        }
        "regular" => {
            let a = numbers(args, 3, spec)?;
            make_random_regular(a[0] as usize, a[1] as usize, a[2])
        }
        "file" => {
            let text = std::fs::read_to_string(args)
                .with_context(|| format!("reading graph file {args}"))?;
            parse_graph(&text)
        }
        _ => bail!("unknown graph family {kind:?}"),
    };
    g.with_context(|| format!("building graph {spec:?}"))
}

pub fn build_family(name: &str, seed: u64) -> anyhow::Result<Family> {
    Ok(match name {
        "path" => Family::Path,
        "cycle" => Family::Cycle,
        "torus" => Family::Torus,
        "regular" => Family::Regular { seed },
        _ => bail!("unknown family {name:?}"),
    })
}

/// Splits a comma separated spec list. A piece that is only a number
/// belongs to the spec before it.
pub fn split_specs(list: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match out.last_mut() {
            Some(last) if piece.parse::<u64>().is_ok() => {
                last.push(',');
                last.push_str(piece);
            }
            _ => out.push(piece.to_string()),
        }
    }
    out
}

/// The graphs a corpus-wide command runs on.
pub fn build_corpus(p: &Params) -> anyhow::Result<Vec<CorpusGraph>> {
    if let Some(lists) = &p.graphs {
        return lists
            .iter()
            .flat_map(|l| split_specs(l))
            .map(|s| Ok(CorpusGraph { graph: build_graph(&s)?, name: s }))
            .collect();
    }
    match p.corpus.as_deref() {
        None | Some("default") => Ok(covertime_core::graph::default_corpus()),
        Some(other) => bail!("unknown corpus {other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: Params = serde_json::from_str(r#"{"graph": "cycle:6", "v": 1, "C": 2.0}"#).unwrap();
        let flags = Params { v: Some(3), ..Params::default() };
        let p = flags.over(file);
        assert_eq!(p.graph.as_deref(), Some("cycle:6"));
        assert_eq!(p.v, Some(3));
        assert_eq!(p.c, Some(2.0));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<Params>(r#"{"graph": "cycle:6", "vv": 1}"#).is_err());
    }

    #[test]
    fn spec_lists_keep_multi_number_specs() {
        assert_eq!(split_specs("cycle:6,path:5"), vec!["cycle:6", "path:5"]);
        assert_eq!(
            split_specs("torus:4,2,regular:12,3,7,tree:2"),
            vec!["torus:4,2", "regular:12,3,7", "tree:2"]
        );
    }

    #[test]
    fn graph_specs() {
        assert_eq!(build_graph("path:4").unwrap().n(), 4);
        assert_eq!(build_graph("torus:4,2").unwrap().n(), 16);
        assert_eq!(build_graph("tree:3").unwrap().n(), 15);
        assert_eq!(build_graph("regular:8,3,1").unwrap().max_degree(), 3);
        assert!(build_graph("cycle:2").is_err());
        assert!(build_graph("wheel:5").is_err());
        assert!(build_graph("torus:4").is_err());
    }
}
