//! Policy-induced Markov chain of the population: exact invariant
//! distribution, Monte Carlo estimate, and ergodicity diagnostics.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use std::collections::VecDeque;
use thiserror::Error;

use crate::model::{PopulationState, SampleView, StationaryPolicy, ModelSpec};
use crate::seed;

/// Residual above which a linear solve is rejected as ill-conditioned.
const SOLVE_REJECT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("chain has {} closed classes; first two: {:?} and {:?}", classes.len(), classes[0], classes[1])]
    NotUnichain { classes: Vec<Vec<usize>> },
    #[error("stationary system is singular (pivot ratio {pivot_ratio:e})")]
    Singular { pivot_ratio: f64 },
    #[error("stationary solve residual {residual:e} exceeds tolerance (pivot ratio {pivot_ratio:e})")]
    IllConditioned { residual: f64, pivot_ratio: f64 },
}

/// Dense row-stochastic matrix with the interaction and policy it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub rows: Vec<Vec<f64>>,
    pub interaction: Vec<f64>,
    pub policy: Option<Vec<usize>>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows, interaction: Vec::new(), policy: None }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `sᵀP`.
    pub fn left_apply(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (x, row) in self.rows.iter().enumerate() {
            let sx = s[x];
            if sx == 0.0 {
                continue;
            }
            for (y, p) in row.iter().enumerate() {
                out[y] += sx * p;
            }
        }
        out
    }

    /// `‖sᵀP − s‖₁`.
    pub fn invariance_residual(&self, s: &[f64]) -> f64 {
        self.left_apply(s).iter().zip(s).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Row `x` is the population transition from `x` under action `g(x)`,
/// including renewal when the model has it.
pub fn build_chain(model: &ModelSpec, g: &StationaryPolicy, m: &[f64]) -> TransitionMatrix {
    let n = model.n_states();
    let rows = (0..n)
        .map(|x| {
            let mut row = vec![0.0; n];
            for (y, p) in model.population_row(x, g.action(x), m) {
                row[y] += p;
            }
            row
        })
        .collect();
    TransitionMatrix { rows, interaction: m.to_vec(), policy: Some(g.action_of.clone()) }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ergodicity {
    Ergodic,
    Periodic { period: usize },
    Reducible { closed_classes: Vec<Vec<usize>>, transient: Vec<usize> },
}

impl Ergodicity {
    pub fn is_ergodic(&self) -> bool {
        matches!(self, Ergodicity::Ergodic)
    }

    /// True when exactly one invariant distribution exists.
    pub fn unique_invariant(&self) -> bool {
        match self {
            Ergodicity::Ergodic | Ergodicity::Periodic { .. } => true,
            Ergodicity::Reducible { closed_classes, .. } => closed_classes.len() == 1,
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Period of a strongly connected class: gcd of `level(u) + 1 − level(v)`
/// over the class's internal edges, levels from a BFS.
fn class_period(p: &TransitionMatrix, class: &[usize]) -> usize {
    let n = p.len();
    let mut member = vec![false; n];
    for &x in class {
        member[x] = true;
    }
    let mut level = vec![usize::MAX; n];
    level[class[0]] = 0;
    let mut queue = VecDeque::from([class[0]]);
    let mut period = 0;
    while let Some(u) = queue.pop_front() {
        for (v, &w) in p.rows[u].iter().enumerate() {
            if w <= 0.0 || !member[v] {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    period.max(1)
}

pub fn ergodicity_check(p: &TransitionMatrix) -> Ergodicity {
    let n = p.len();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (x, row) in p.rows.iter().enumerate() {
        for (y, &w) in row.iter().enumerate() {
            if w > 0.0 {
                graph.add_edge(nodes[x], nodes[y], ());
            }
        }
    }
    let mut comp_of = vec![0; n];
    let sccs: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|i| i.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    for (k, c) in sccs.iter().enumerate() {
        for &x in c {
            comp_of[x] = k;
        }
    }
    let closed: Vec<usize> = (0..sccs.len())
        .filter(|&k| sccs[k].iter().all(|&x| p.rows[x].iter().enumerate().all(|(y, &w)| w <= 0.0 || comp_of[y] == k)))
        .collect();

    if sccs.len() == 1 {
        return match class_period(p, &sccs[0]) {
            1 => Ergodicity::Ergodic,
            d => Ergodicity::Periodic { period: d },
        };
    }
    let mut closed_classes: Vec<Vec<usize>> = closed.iter().map(|&k| sccs[k].clone()).collect();
    closed_classes.sort();
    let mut transient: Vec<usize> = (0..n).filter(|&x| !closed.contains(&comp_of[x])).collect();
    transient.sort_unstable();
    Ergodicity::Reducible { closed_classes, transient }
}

/// Unique invariant distribution via a dense LU solve of `(Pᵀ − I)s = 0`
/// with the last equation replaced by `Σ s = 1`.
///
/// Chains with a single closed class (possibly periodic, possibly with
/// transient states) have a unique invariant law and are accepted.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<PopulationState, ChainError> {
    if let Ergodicity::Reducible { closed_classes, .. } = ergodicity_check(p) {
        if closed_classes.len() > 1 {
            return Err(ChainError::NotUnichain { classes: closed_classes });
        }
    }
    solve_unchecked(p)
}

pub fn solve_unchecked(p: &TransitionMatrix) -> Result<PopulationState, ChainError> {
    let n = p.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (x, row) in p.rows.iter().enumerate() {
        for (y, &w) in row.iter().enumerate() {
            a[(y, x)] = w;
        }
    }
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;

    let lu = a.clone().lu();
    let diag = lu.u().diagonal();
    let max_pivot = diag.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min_pivot = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let pivot_ratio = if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 };
    let mut s = lu.solve(&b).ok_or(ChainError::Singular { pivot_ratio })?;
    // One round of iterative refinement buys back the digits lost to
    // pivoting on larger chains.
    let r = &b - &a * &s;
    if let Some(ds) = lu.solve(&r) {
        s += ds;
    }

    let mut probs: Vec<f64> = s.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|v| *v /= total);
    let residual = p.invariance_residual(&probs);
    if !residual.is_finite() || residual > SOLVE_REJECT {
        return Err(ChainError::IllConditioned { residual, pivot_ratio });
    }
    Ok(PopulationState::new(probs).expect("normalized"))
}

/// Empirical state frequencies of `x_0, …, x_K` simulated under `g`,
/// after discarding `burn_in` initial steps.
pub fn monte_carlo_stationary(
    view: &SampleView<'_>,
    g: &StationaryPolicy,
    m: &[f64],
    k: usize,
    seed: u64,
    x0: usize,
    burn_in: usize,
) -> PopulationState {
    assert!(k >= 1);
    let mut rng = seed::rng_for(seed, &[]);
    let mut x = x0;
    for _ in 0..burn_in {
        x = view.sample_population_transition(x, g.action(x), m, &mut rng);
    }
    let mut counts = vec![0u64; view.n_states()];
    counts[x] += 1;
    for _ in 0..k {
        x = view.sample_population_transition(x, g.action(x), m, &mut rng);
        counts[x] += 1;
    }
    let total = (k + 1) as f64;
    PopulationState::new(counts.into_iter().map(|c| c as f64 / total).collect()).expect("frequencies")
}

/// `s₀ᵀPᵏ`.
pub fn power_iterate(p: &TransitionMatrix, s0: &[f64], k: usize) -> Vec<f64> {
    (0..k).fold(s0.to_vec(), |s, _| p.left_apply(&s))
}
