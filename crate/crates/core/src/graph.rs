//! Mobility graphs and terminal weights.
//!
//! A [`MobilityGraph`] is a directed graph on `n` terminals plus one positive
//! importance weight per terminal. Self-motion is never stored as an edge:
//! randomized trajectories may put mass on the diagonal regardless of `E`,
//! while deterministic walkers must move along `E` every slot.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::rng;

/// Maximum number of resamples attempted for a connected geometric graph.
pub const GEOMETRIC_MAX_ATTEMPTS: u32 = 100;

/// Provenance of a graph, carried through the JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub family: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl GraphMeta {
    pub fn new(family: &str, seed: Option<u64>, params: Value) -> Self {
        let params = match params {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        GraphMeta {
            family: family.to_string(),
            seed,
            params,
        }
    }
}

/// Directed mobility graph with per-terminal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityGraph {
    n: usize,
    // sorted, deduplicated out-neighbours of each terminal
    out: Vec<Vec<usize>>,
    weights: Vec<f64>,
    coords: Option<Vec<[f64; 2]>>,
    meta: GraphMeta,
}

/// On-disk representation of a [`MobilityGraph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<f64>,
    pub coords: Option<Vec<[f64; 2]>>,
    pub meta: GraphMeta,
}

/// How terminal weights are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    Uniform,
    RandomInterval { lo: f64, hi: f64, seed: u64 },
}

impl MobilityGraph {
    /// Builds a graph from directed edges, checking every invariant.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        weights: Vec<f64>,
        coords: Option<Vec<[f64; 2]>>,
        meta: GraphMeta,
    ) -> Result<Self> {
        let out = adjacency_lists(n, edges)?;
        let graph = MobilityGraph {
            n,
            out,
            weights,
            coords,
            meta,
        };
        graph.validate()?;
        Ok(graph)
    }

    /// Builds a graph with uniform weights from undirected edges, listing
    /// both directions.
    pub fn from_undirected(
        n: usize,
        edges: &[(usize, usize)],
        meta: GraphMeta,
    ) -> Result<Self> {
        let directed = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]);
        MobilityGraph::new(n, directed, vec![1.0; n], None, meta)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidGraph(format!(
                "graph needs at least 2 terminals, got {}",
                self.n
            )));
        }
        if self.weights.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "expected {} weights, got {}",
                self.n,
                self.weights.len()
            )));
        }
        if let Some((i, w)) = self
            .weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidGraph(format!(
                "weight must be positive (terminal {i} has weight {w})"
            )));
        }
        if let Some(coords) = &self.coords {
            if coords.len() != self.n {
                return Err(Error::InvalidGraph(format!(
                    "expected {} coordinates, got {}",
                    self.n,
                    coords.len()
                )));
            }
        }
        if !self.is_strongly_connected() {
            return Err(Error::InvalidGraph("graph is not strongly connected".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    /// Out-neighbours of `i` in increasing order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.out[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Directed edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.iter().map(move |&j| (i, j)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(i, j)| self.has_edge(j, i))
    }

    pub fn is_strongly_connected(&self) -> bool {
        let forward = reachable(self.n, |i| self.out[i].clone());
        if forward.iter().any(|r| !r) {
            return false;
        }
        let mut rev = vec![Vec::new(); self.n];
        for (i, j) in self.edges() {
            rev[j].push(i);
        }
        reachable(self.n, |i| rev[i].clone()).iter().all(|&r| r)
    }

    /// Returns a copy with weights reassigned according to `mode`.
    pub fn with_weights(&self, mode: WeightMode) -> Result<Self> {
        let weights = match mode {
            WeightMode::Uniform => vec![1.0; self.n],
            WeightMode::RandomInterval { lo, hi, seed } => {
                if !(lo.is_finite() && lo > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "weight interval lower end must be positive, got {lo}"
                    )));
                }
                if !(hi.is_finite() && hi >= lo) {
                    return Err(Error::InvalidParameter(format!(
                        "weight interval upper end {hi} is below lower end {lo}"
                    )));
                }
                let mut rng = rng::seeded(seed);
                // u in [0, 1) maps to (lo, hi]
                (0..self.n)
                    .map(|_| hi - (hi - lo) * rng.random::<f64>())
                    .collect()
            }
        };
        let mut g = self.clone();
        g.weights = weights;
        g.meta
            .params
            .insert("weights".into(), serde_json::to_value(mode)?);
        g.validate()?;
        Ok(g)
    }

    /// Returns a copy with explicit weights.
    pub fn with_weight_vector(&self, weights: Vec<f64>) -> Result<Self> {
        let mut g = self.clone();
        g.weights = weights;
        g.validate()?;
        Ok(g)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges().map(|(i, j)| [i, j]).collect(),
            weights: self.weights.clone(),
            coords: self.coords.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        MobilityGraph::new(
            file.n,
            file.edges.into_iter().map(|[i, j]| (i, j)),
            file.weights,
            file.coords,
            file.meta,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        MobilityGraph::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        MobilityGraph::from_json(&fs::read_to_string(path)?)
    }
}

fn adjacency_lists(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Result<Vec<Vec<usize>>> {
    let mut out = vec![Vec::new(); n];
    for (i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::InvalidGraph(format!(
                "endpoint out of range: edge ({i},{j}) on {n} terminals"
            )));
        }
        if i == j {
            return Err(Error::InvalidGraph(format!(
                "self-loop ({i},{i}) is not allowed; staying put is implicit"
            )));
        }
        out[i].push(j);
    }
    for nbrs in &mut out {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    Ok(out)
}

fn reachable(n: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    if n == 0 {
        return seen;
    }
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in next(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Random geometric graph: `n` uniform points in the unit square, joined when
/// within Euclidean distance `r`. Disconnected samples are redrawn with the
/// seed incremented, up to [`GEOMETRIC_MAX_ATTEMPTS`] times.
pub fn random_geometric(n: usize, r: f64, seed: u64) -> Result<MobilityGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "geometric graph needs n >= 2, got {n}"
        )));
    }
    if !(r.is_finite() && (0.0..=std::f64::consts::SQRT_2).contains(&r)) {
        return Err(Error::InvalidParameter(format!(
            "radius must lie in [0, sqrt(2)], got {r}"
        )));
    }
    for attempt in 0..GEOMETRIC_MAX_ATTEMPTS {
        let sample_seed = seed.wrapping_add(u64::from(attempt));
        let mut rng = rng::seeded(sample_seed);
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let edges = geometric_edges(&coords, r);
        let meta = GraphMeta::new(
            "geometric",
            Some(seed),
            json!({ "n": n, "r": r, "attempt": attempt, "sample_seed": sample_seed }),
        );
        match MobilityGraph::new(n, edges, vec![1.0; n], Some(coords), meta) {
            Ok(g) => return Ok(g),
            Err(Error::InvalidGraph(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DisconnectedAfterMaxAttempts {
        attempts: GEOMETRIC_MAX_ATTEMPTS,
        r,
    })
}

/// Default connectivity radius `2/√n` for geometric graphs.
pub fn default_geometric_radius(n: usize) -> f64 {
    (2.0 / (n as f64).sqrt()).min(std::f64::consts::SQRT_2)
}

fn geometric_edges(coords: &[[f64; 2]], r: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (i, a) in coords.iter().enumerate() {
        for (j, b) in coords.iter().enumerate() {
            if i != j && (a[0] - b[0]).hypot(a[1] - b[1]) <= r {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// `side × side` lattice where each node is joined to its (up to) eight
/// horizontal, vertical and diagonal neighbours. Node `(r, c)` has index
/// `r * side + c`.
pub fn grid_with_diagonals(side: usize) -> Result<MobilityGraph> {
    if side < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid side must be >= 2, got {side}"
        )));
    }
    let mut edges = Vec::new();
    for r in 0..side as isize {
        for c in 0..side as isize {
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    let (nr, nc) = (r + dr, c + dc);
                    if (dr, dc) == (0, 0)
                        || nr < 0
                        || nc < 0
                        || nr >= side as isize
                        || nc >= side as isize
                    {
                        continue;
                    }
                    let from = (r as usize) * side + c as usize;
                    let to = (nr as usize) * side + nc as usize;
                    edges.push((from, to));
                }
            }
        }
    }
    let n = side * side;
    let meta = GraphMeta::new("grid", None, json!({ "side": side }));
    MobilityGraph::new(n, edges, vec![1.0; n], None, meta)
}

/// Ring where terminal `i` is joined to `i ± 1, …, i ± k (mod n)`.
pub fn ring(n: usize, k: usize) -> Result<MobilityGraph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "ring needs n >= 3, got {n}"
        )));
    }
    if k < 1 || k > (n - 1) / 2 {
        return Err(Error::InvalidParameter(format!(
            "ring radius must satisfy 1 <= k <= {}, got {k}",
            (n - 1) / 2
        )));
    }
    let mut edges = Vec::with_capacity(2 * n * k);
    for i in 0..n {
        for step in 1..=k {
            edges.push((i, (i + step) % n));
            edges.push((i, (i + n - step) % n));
        }
    }
    let meta = GraphMeta::new("ring", None, json!({ "n": n, "k": k }));
    MobilityGraph::new(n, edges, vec![1.0; n], None, meta)
}

/// Complete graph `K_n`.
pub fn complete(n: usize) -> Result<MobilityGraph> {
    let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
    let meta = GraphMeta::new("complete", None, json!({ "n": n }));
    MobilityGraph::new(n, edges, vec![1.0; n], None, meta)
}

/// Path `0 – 1 – … – (n−1)`.
pub fn path(n: usize) -> Result<MobilityGraph> {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    MobilityGraph::from_undirected(n, &edges, GraphMeta::new("path", None, json!({ "n": n })))
}

/// Complete binary tree with `levels` levels; node `i` has children
/// `2i + 1` and `2i + 2`.
pub fn binary_tree(levels: u32) -> Result<MobilityGraph> {
    if levels < 2 {
        return Err(Error::InvalidParameter("binary tree needs >= 2 levels".into()));
    }
    let n = (1usize << levels) - 1;
    let edges: Vec<_> = (1..n).map(|c| ((c - 1) / 2, c)).collect();
    MobilityGraph::from_undirected(
        n,
        &edges,
        GraphMeta::new("binary_tree", None, json!({ "levels": levels })),
    )
}

/// Star with centre `0` and `leaves` leaves.
pub fn star(leaves: usize) -> Result<MobilityGraph> {
    let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
    MobilityGraph::from_undirected(
        leaves + 1,
        &edges,
        GraphMeta::new("star", None, json!({ "leaves": leaves })),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degrees(g: &MobilityGraph) -> Vec<usize> {
        (0..g.n()).map(|i| g.out_degree(i)).collect()
    }

    #[test]
    fn geometric_two_nodes_full_radius_is_complete() {
        for seed in [0, 1, 99] {
            let g = random_geometric(2, std::f64::consts::SQRT_2, seed).unwrap();
            assert_eq!(g.edge_count(), 2);
            assert!(g.coords().is_some());
        }
    }

    #[test]
    fn geometric_zero_radius_fails_loudly() {
        let err = random_geometric(3, 0.0, 1).unwrap_err();
        assert!(err.to_string().contains("disconnected after max attempts"));
    }

    #[test]
    fn geometric_edges_match_pairwise_distances() {
        let r = 0.2;
        let g = random_geometric(100, r, 7).unwrap();
        let coords = g.coords().unwrap();
        for i in 0..100 {
            for j in 0..100 {
                if i == j {
                    continue;
                }
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                let close = (dx * dx + dy * dy).sqrt() <= r;
                assert_eq!(g.has_edge(i, j), close, "pair ({i},{j})");
            }
        }
        assert!(g.is_strongly_connected());
        assert!(g.is_symmetric());
    }

    #[test]
    fn geometric_rejects_bad_radius() {
        assert!(random_geometric(5, -0.1, 0).is_err());
        assert!(random_geometric(5, 1.5, 0).is_err());
        assert!(random_geometric(1, 0.5, 0).is_err());
    }

    #[test]
    fn grid_side_two_is_k4() {
        let g = grid_with_diagonals(2).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.edge_count(), 12);
    }

    #[test]
    fn grid_side_three_degrees() {
        let g = grid_with_diagonals(3).unwrap();
        // enumerate offsets independently of the generator
        let expected: Vec<usize> = (0..9i32)
            .map(|idx| {
                let (r, c) = (idx / 3, idx % 3);
                let mut d = 0;
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if (dr, dc) != (0, 0) && (0..3).contains(&nr) && (0..3).contains(&nc) {
                            d += 1;
                        }
                    }
                }
                d
            })
            .collect();
        assert_eq!(degrees(&g), expected);
        assert_eq!(g.out_degree(4), 8);
        assert_eq!(g.out_degree(0), 3);
        assert_eq!(g.out_degree(1), 5);
    }

    #[test]
    fn grid_side_nine_has_81_nodes() {
        assert_eq!(grid_with_diagonals(9).unwrap().n(), 81);
    }

    #[test]
    fn ring_degrees() {
        assert_eq!(degrees(&ring(3, 1).unwrap()), vec![2; 3]);
        assert_eq!(degrees(&ring(21, 3).unwrap()), vec![6; 21]);
        assert_eq!(ring(5, 2).unwrap().edge_count(), 20);
        assert!(ring(5, 3).is_err());
        assert!(ring(2, 1).is_err());
    }

    #[test]
    fn weights_modes() {
        let g = complete(4).unwrap().with_weights(WeightMode::Uniform).unwrap();
        assert_eq!(g.weights(), &[1.0; 4]);
        let g = complete(3)
            .unwrap()
            .with_weights(WeightMode::RandomInterval { lo: 1.0, hi: 2.0, seed: 42 })
            .unwrap();
        assert!(g.weights().iter().all(|&w| w > 1.0 && w <= 2.0));
        let err = complete(3)
            .unwrap()
            .with_weights(WeightMode::RandomInterval { lo: 0.0, hi: 2.0, seed: 42 })
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn json_rejects_zero_weight_and_out_of_range_edge() {
        let zero = r#"{"n":2,"edges":[[0,1],[1,0]],"weights":[1.0,0.0],"coords":null,
                      "meta":{"family":"manual","seed":null,"params":{}}}"#;
        let err = MobilityGraph::from_json(zero).unwrap_err();
        assert!(err.to_string().contains("weight must be positive"), "{err}");

        let oob = r#"{"n":3,"edges":[[0,5]],"weights":[1,1,1],"coords":null,
                     "meta":{"family":"manual","seed":null,"params":{}}}"#;
        let err = MobilityGraph::from_json(oob).unwrap_err();
        assert!(err.to_string().contains("endpoint out of range"), "{err}");
    }

    #[test]
    fn disconnected_file_is_rejected() {
        let text = r#"{"n":4,"edges":[[0,1],[1,0],[2,3],[3,2]],"weights":[1,1,1,1],
                      "coords":null,"meta":{"family":"manual","seed":null}}"#;
        let err = MobilityGraph::from_json(text).unwrap_err();
        assert!(err.to_string().contains("not strongly connected"));
    }

    #[test]
    fn save_load_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let a = random_geometric(30, default_geometric_radius(30), 11)
            .unwrap()
            .with_weights(WeightMode::RandomInterval { lo: 1.0, hi: 2.0, seed: 3 })
            .unwrap();
        let b = random_geometric(30, default_geometric_radius(30), 11)
            .unwrap()
            .with_weights(WeightMode::RandomInterval { lo: 1.0, hi: 2.0, seed: 3 })
            .unwrap();
        let pa = dir.path().join("a.json");
        let pb = dir.path().join("b.json");
        a.save(&pa).unwrap();
        b.save(&pb).unwrap();
        assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
        assert_eq!(MobilityGraph::load(&pa).unwrap(), a);
    }

    #[test]
    fn generated_families_are_symmetric() {
        for g in [
            ring(9, 3).unwrap(),
            grid_with_diagonals(4).unwrap(),
            random_geometric(25, default_geometric_radius(25), 2).unwrap(),
            binary_tree(3).unwrap(),
            path(4).unwrap(),
            star(3).unwrap(),
        ] {
            assert!(g.is_symmetric());
            assert!(g.is_strongly_connected());
        }
    }
}
