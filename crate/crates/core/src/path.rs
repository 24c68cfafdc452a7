//! Shortest covering path solvers and sign/rank extraction.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{observation_of, CostMatrix, CoveringPath, PathMethod, SignRankProfile};

/// Greedy Prim-style covering path.
///
/// Starts from the cheapest allowed edge, then repeatedly attaches the
/// cheapest node `q` whose observation is not yet covered to one of the two
/// path endpoints `r`, until every observation is covered. Ties go to the
/// lexicographically smallest `(q, r)`.
pub fn heuristic_path(cost: &CostMatrix) -> Result<CoveringPath> {
    let n = cost.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, found: n });
    }
    let size = 2 * n;

    let mut seed = (f64::INFINITY, 0, 0);
    for i in 1..=size {
        for j in (i + 1)..=size {
            if cost.is_forbidden(i, j) {
                continue;
            }
            let v = cost.raw(i, j);
            if v < seed.0 {
                seed = (v, i, j);
            }
        }
    }
    let (_, i, j) = seed;

    let mut covered = vec![false; n + 1];
    covered[observation_of(i, n)] = true;
    covered[observation_of(j, n)] = true;
    let mut path = VecDeque::with_capacity(n);
    path.push_back(i);
    path.push_back(j);

    while path.len() < n {
        let front = *path.front().unwrap();
        let back = *path.back().unwrap();
        let ends = if front < back { [front, back] } else { [back, front] };
        let mut best = (f64::INFINITY, 0, 0);
        for q in 1..=size {
            if covered[observation_of(q, n)] {
                continue;
            }
            for &r in &ends {
                let v = cost.raw(q, r);
                if v < best.0 {
                    best = (v, q, r);
                }
            }
        }
        let (_, q, r) = best;
        if q == 0 {
            return Err(Error::Invariant("no admissible extension found".into()));
        }
        if r == front {
            path.push_front(q);
        } else {
            path.push_back(q);
        }
        covered[observation_of(q, n)] = true;
    }

    CoveringPath::new(path.into(), n, PathMethod::Heuristic)
}

/// Number of distinct covering paths, `2^(n-1) n!`.
pub fn distinct_path_count(n: usize) -> u128 {
    if n == 0 {
        return 0;
    }
    let fact: u128 = (1..=n as u128).product();
    fact << (n - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub path: CoveringPath,
    /// Sum of edge costs `exp(log-cost)` along the path.
    pub total_cost: f64,
    pub paths_searched: u64,
}

/// Minimum-cost covering path by complete enumeration.
///
/// Each path and its reversal are counted once by requiring the first
/// observation index to be smaller than the last. The first minimum in
/// lexicographic node order wins ties.
pub fn exact_path(cost: &CostMatrix, cap: usize) -> Result<ExactSolution> {
    let n = cost.n();
    if n > cap {
        return Err(Error::EnumerationCap {
            n,
            cap,
            required: distinct_path_count(n),
        });
    }
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, found: n });
    }

    struct Search<'a> {
        cost: &'a CostMatrix,
        n: usize,
        covered: Vec<bool>,
        current: Vec<usize>,
        best: Vec<usize>,
        best_cost: f64,
        searched: u64,
    }

    impl Search<'_> {
        fn descend(&mut self, partial: f64) {
            let n = self.n;
            let depth = self.current.len();
            if depth == n {
                self.searched += 1;
                if partial < self.best_cost {
                    self.best_cost = partial;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            let first_obs = self.current.first().map(|&v| observation_of(v, n));
            for node in 1..=2 * n {
                let k = observation_of(node, n);
                if self.covered[k] {
                    continue;
                }
                if depth == n - 1 && first_obs.is_some_and(|f| f > k) {
                    continue;
                }
                let step = match self.current.last() {
                    Some(&prev) => self.cost.raw(prev, node).exp(),
                    None => 0.0,
                };
                self.covered[k] = true;
                self.current.push(node);
                self.descend(partial + step);
                self.current.pop();
                self.covered[k] = false;
            }
        }
    }

    let mut s = Search {
        cost,
        n,
        covered: vec![false; n + 1],
        current: Vec::with_capacity(n),
        best: Vec::new(),
        best_cost: f64::INFINITY,
        searched: 0,
    };
    s.descend(0.0);

    let path = CoveringPath::new(s.best, n, PathMethod::Exact)?;
    Ok(ExactSolution {
        path,
        total_cost: s.best_cost,
        paths_searched: s.searched,
    })
}

/// Solves with the requested method.
pub fn solve(cost: &CostMatrix, method: PathMethod, cap: usize) -> Result<CoveringPath> {
    match method {
        PathMethod::Heuristic => heuristic_path(cost),
        PathMethod::Exact => exact_path(cost, cap).map(|s| s.path),
    }
}

/// String signs, anti-ranks and ranks along `path`.
pub fn extract_profile(path: &CoveringPath, n: usize) -> Result<SignRankProfile> {
    extract_from_nodes(path.nodes(), n)
}

pub(crate) fn extract_from_nodes(nodes: &[usize], n: usize) -> Result<SignRankProfile> {
    if nodes.len() != n {
        return Err(Error::Invariant(format!(
            "path has {} nodes for {n} observations",
            nodes.len()
        )));
    }
    let mut signs = vec![0u8; n];
    let mut ranks = vec![0usize; n];
    let mut anti_ranks = Vec::with_capacity(n);
    for (pos, &node) in nodes.iter().enumerate() {
        if !(1..=2 * n).contains(&node) {
            return Err(Error::Invariant(format!("node {node} outside 1..={}", 2 * n)));
        }
        let k = observation_of(node, n);
        if ranks[k - 1] != 0 {
            return Err(Error::Invariant(format!(
                "observation {k} appears twice on the path"
            )));
        }
        ranks[k - 1] = pos + 1;
        signs[k - 1] = u8::from(node <= n);
        anti_ranks.push(k);
    }
    Ok(SignRankProfile {
        signs,
        anti_ranks,
        ranks,
    })
}
