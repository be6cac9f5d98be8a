use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exact::EnumerableChain;
use super::TransitionOracle;
use crate::error::{Error, OracleError, Result};

const MAX_ATTEMPTS: usize = 1000;

/// Lazy walk on a simple connected `d`-regular graph: stay with probability
/// 1/2, otherwise move to a uniformly chosen neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularGraphChain {
    degree: usize,
    /// `adjacency[x]` lists the `degree` neighbors of `x`, sorted.
    adjacency: Vec<Vec<usize>>,
    seed: u64,
}

impl RegularGraphChain {
    pub fn size(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    /// Writes the edge list, one `u v` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }
}

impl TransitionOracle for RegularGraphChain {
    fn state_space_size(&self) -> usize {
        self.adjacency.len()
    }

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        if rng.random::<f64>() < 0.5 {
            Ok(state)
        } else {
            Ok(self.adjacency[state][rng.random_range(0..self.degree)])
        }
    }
}

impl EnumerableChain for RegularGraphChain {
    fn num_states(&self) -> usize {
        self.adjacency.len()
    }

    fn transition_matrix(&self) -> DMatrix<f64> {
        let n = self.size();
        let step = 0.5 / self.degree as f64;
        let mut p = DMatrix::zeros(n, n);
        for (x, nb) in self.adjacency.iter().enumerate() {
            p[(x, x)] = 0.5;
            for &y in nb {
                p[(x, y)] += step;
            }
        }
        p
    }

    fn stationary_distribution(&self) -> Result<Vec<f64>> {
        Ok(vec![1.0 / self.size() as f64; self.size()])
    }
}

/// Random simple connected `degree`-regular graph on `size` vertices.
///
/// Stubs are paired at random; pairs forming a loop or a repeated edge are
/// put back and re-paired among themselves. A round that leaves no usable
/// pair, or a disconnected result, restarts from scratch.
pub fn generate_regular_graph(size: usize, degree: usize, seed: u64) -> Result<RegularGraphChain> {
    if degree == 0 || degree >= size {
        return Err(Error::Chain(format!(
            "degree must satisfy 1 <= d < |Ω|, got d = {degree}, |Ω| = {size}"
        )));
    }
    if !(size * degree).is_multiple_of(2) {
        return Err(Error::Chain(format!(
            "|Ω| · d = {} is odd, no {degree}-regular graph on {size} vertices",
            size * degree
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let Some(edges) = try_pairing(size, degree, &mut rng) else {
            continue;
        };
        let mut adjacency = vec![Vec::with_capacity(degree); size];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        if is_connected(&adjacency) {
            return Ok(RegularGraphChain {
                degree,
                adjacency,
                seed,
            });
        }
    }
    Err(Error::GraphGeneration {
        size,
        degree,
        attempts: MAX_ATTEMPTS,
    })
}

fn try_pairing(size: usize, degree: usize, rng: &mut ChaCha8Rng) -> Option<BTreeSet<(usize, usize)>> {
    let mut edges = BTreeSet::new();
    let mut stubs: Vec<usize> = (0..size).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    while !stubs.is_empty() {
        stubs.shuffle(rng);
        let mut leftover: BTreeMap<usize, usize> = BTreeMap::new();
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a != b && edges.insert((a, b)) {
                continue;
            }
            *leftover.entry(a).or_default() += 1;
            *leftover.entry(b).or_default() += 1;
        }
        if !leftover.is_empty() && !has_usable_pair(&edges, &leftover) {
            return None;
        }
        stubs = leftover
            .into_iter()
            .flat_map(|(v, c)| std::iter::repeat_n(v, c))
            .collect();
    }
    Some(edges)
}

fn has_usable_pair(edges: &BTreeSet<(usize, usize)>, leftover: &BTreeMap<usize, usize>) -> bool {
    let nodes: Vec<usize> = leftover.keys().copied().collect();
    nodes
        .iter()
        .enumerate()
        .any(|(i, &a)| nodes[i + 1..].iter().any(|&b| !edges.contains(&(a, b))))
}

fn is_connected(adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = stack.pop() {
        for &y in &adjacency[x] {
            if !seen[y] {
                seen[y] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    count == adjacency.len()
}
