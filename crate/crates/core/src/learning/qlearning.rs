use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LearningConfig, ReplayBuffer, Transition};
use crate::model::{SampleView, StationaryPolicy};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub epsilon: f64,
}

/// Tabular action values at a fixed interaction. Infeasible pairs hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub q: Vec<Vec<f64>>,
    pub feasible: Vec<Vec<usize>>,
    pub interaction: Vec<f64>,
    pub visits: Vec<Vec<u64>>,
    /// Environment steps taken (equals the configured horizon).
    pub steps: usize,
    /// Replayed tuple updates applied.
    pub updates: usize,
    pub episodes: Vec<EpisodeStats>,
}

impl QTable {
    fn new(view: &SampleView<'_>, m: &[f64]) -> Self {
        let (n, k) = (view.n_states(), view.actions().len());
        let feasible: Vec<Vec<usize>> = (0..n).map(|x| view.feasible(x).to_vec()).collect();
        let mut q = vec![vec![f64::NAN; k]; n];
        for (x, acts) in feasible.iter().enumerate() {
            for &a in acts {
                q[x][a] = 0.0;
            }
        }
        Self { q, feasible, interaction: m.to_vec(), visits: vec![vec![0; k]; n], steps: 0, updates: 0, episodes: Vec::new() }
    }

    /// Lowest-index feasible argmax.
    pub fn greedy_action(&self, x: usize) -> usize {
        let acts = &self.feasible[x];
        let mut best = acts[0];
        for &a in &acts[1..] {
            if self.q[x][a] > self.q[x][best] {
                best = a;
            }
        }
        best
    }

    pub fn max_value(&self, x: usize) -> f64 {
        self.feasible[x].iter().map(|&a| self.q[x][a]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest gap to a reference table over feasible pairs.
    pub fn sup_distance(&self, reference: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for (x, acts) in self.feasible.iter().enumerate() {
            for &a in acts {
                worst = worst.max((self.q[x][a] - reference[x][a]).abs());
            }
        }
        worst
    }
}

pub fn greedy_policy(q: &QTable) -> StationaryPolicy {
    StationaryPolicy::new((0..q.q.len()).map(|x| q.greedy_action(x)).collect(), q.interaction.clone())
}

fn choose(q: &QTable, x: usize, eps: f64, rng: &mut ChaCha8Rng) -> usize {
    if rng.random::<f64>() < eps {
        let acts = &q.feasible[x];
        acts[rng.random_range(0..acts.len())]
    } else {
        q.greedy_action(x)
    }
}

/// Episodic Q-learning with ε-greedy exploration and experience replay.
///
/// Each of the `horizon` environment steps pushes the sampled transition
/// into the replay buffer and then replays a minibatch through the update
/// `Q(x,a) ← (1−γ)Q(x,a) + γ(r + β max_{a'∈Γ(x')} Q(x',a'))`.
/// Episodes restart from a uniformly drawn state.
pub fn q_learning(view: &SampleView<'_>, m: &[f64], cfg: &LearningConfig, seed: u64) -> QTable {
    let mut rng = seed::rng_for(seed, &[]);
    let mut table = QTable::new(view, m);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let beta = view.discount();
    let n = view.n_states();

    let mut x = rng.random_range(0..n);
    let mut episode = 0;
    let mut reward_sum = 0.0;
    let mut in_episode = 0;
    for step in 0..cfg.horizon {
        if step > 0 && step % cfg.episode_length == 0 {
            table.episodes.push(EpisodeStats {
                episode,
                mean_reward: reward_sum / in_episode as f64,
                epsilon: cfg.epsilon(episode),
            });
            episode += 1;
            reward_sum = 0.0;
            in_episode = 0;
            x = rng.random_range(0..n);
        }
        let eps = cfg.epsilon(episode);
        let a = choose(&table, x, eps, &mut rng);
        let (reward, next) = view.sample_step(x, a, m, &mut rng);
        buffer.push(Transition { state: x, action: a, reward, next });
        reward_sum += reward;
        in_episode += 1;
        table.steps += 1;

        for t in buffer.sample(cfg.batch_size, &mut rng) {
            let visits = table.visits[t.state][t.action];
            let rate = cfg.learning_rate.at(visits);
            let target = t.reward + beta * table.max_value(t.next);
            let cell = &mut table.q[t.state][t.action];
            *cell = (1.0 - rate) * *cell + rate * target;
            table.visits[t.state][t.action] += 1;
            table.updates += 1;
        }
        x = next;
    }
    if in_episode > 0 {
        table.episodes.push(EpisodeStats { episode, mean_reward: reward_sum / in_episode as f64, epsilon: cfg.epsilon(episode) });
    }
    table
}
