//! Tabular Q-learning: epsilon-greedy selection, the temporal-difference
//! update, the exponential exploration decay and the training loop.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Execution;
use crate::gridworld::{Action, MapSpec, State};

#[derive(Debug, Error)]
pub enum QError {
    #[error("InvalidHyperparams: {0}")]
    InvalidHyperparams(String),
    #[error("MalformedQTable: line {line}: {reason}")]
    MalformedTable { line: usize, reason: String },
    #[error("QTableShape: table has {found} states, map has {expected}")]
    Shape { expected: usize, found: usize },
    #[error("IoError: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub discount: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub decay_rate: f64,
    pub episodes: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub slippery: bool,
    /// How exploitation steps during training resolve equal Q-values.
    pub tie_break: TieBreak,
}

/// Tie resolution among maximal Q-values during training.
///
/// Extracted policies always use the lowest action code; this only affects
/// the exploitation branch inside [`train`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    Lowest,
    /// Uniform over the maximal actions, drawn from the training rng.
    #[default]
    Random,
}

impl std::str::FromStr for TieBreak {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest" => Ok(TieBreak::Lowest),
            "random" => Ok(TieBreak::Random),
            other => Err(QError::InvalidHyperparams(format!(
                "tie_break must be lowest or random, got {other:?}"
            ))),
        }
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.1,
            discount: 0.99,
            eps_min: 0.01,
            eps_max: 1.0,
            decay_rate: 0.01,
            episodes: 500,
            max_steps: 1000,
            seed: 0,
            slippery: false,
            tie_break: TieBreak::Random,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), QError> {
        let bad = |m: &str| Err(QError::InvalidHyperparams(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps_max && self.eps_max <= 1.0) {
            return bad("need 0 <= eps_min <= eps_max <= 1");
        }
        if !(self.decay_rate > 0.0 && self.decay_rate.is_finite()) {
            return bad("decay_rate must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    /// Exploration rate for a given episode index.
    pub fn epsilon(&self, episode: usize) -> f64 {
        epsilon(episode, self)
    }
}

/// `eps_min + (eps_max - eps_min) * exp(-decay_rate * episode)`
pub fn epsilon(episode: usize, hp: &Hyperparams) -> f64 {
    hp.eps_min + (hp.eps_max - hp.eps_min) * (-hp.decay_rate * episode as f64).exp()
}

/// State-action value table, row-major (`state * 4 + action`).
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize) -> Self {
        QTable {
            n_states,
            values: vec![0.0; n_states * Action::COUNT],
        }
    }

    pub fn for_map(map: &MapSpec) -> Self {
        Self::zeros(map.n_states())
    }

    pub fn from_rows(rows: &[[f64; 4]]) -> Self {
        QTable {
            n_states: rows.len(),
            values: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn get(&self, state: State, action: Action) -> f64 {
        self.values[state * Action::COUNT + action as usize]
    }

    pub fn set(&mut self, state: State, action: Action, value: f64) {
        self.values[state * Action::COUNT + action as usize] = value;
    }

    pub fn row(&self, state: State) -> &[f64] {
        &self.values[state * Action::COUNT..(state + 1) * Action::COUNT]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self, state: State) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest action code.
    pub fn argmax(&self, state: State) -> Action {
        let row = self.row(state);
        let mut best = 0;
        for (i, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = i;
            }
        }
        Action::ALL[best]
    }

    pub fn check_shape(&self, map: &MapSpec) -> Result<(), QError> {
        if self.n_states != map.n_states() {
            return Err(QError::Shape {
                expected: map.n_states(),
                found: self.n_states,
            });
        }
        Ok(())
    }

    /// CSV text: one row per state, four columns, no header. Values use the
    /// shortest round-trip decimal representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n_states {
            let row: Vec<String> = self.row(s).iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, QError> {
        let mut rows = Vec::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let malformed = |reason: String| QError::MalformedTable {
                line: i + 1,
                reason,
            };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != Action::COUNT {
                return Err(malformed(format!(
                    "expected 4 columns, found {}",
                    cols.len()
                )));
            }
            let mut row = [0.0; 4];
            for (slot, tok) in row.iter_mut().zip(cols) {
                *slot = tok
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("{tok:?}: {e}")))?;
                if !slot.is_finite() {
                    return Err(malformed(format!("non-finite value {tok:?}")));
                }
            }
            rows.push(row);
        }
        Ok(QTable::from_rows(&rows))
    }
}

/// Epsilon-greedy action selection.
///
/// A uniform threshold in `[0, 1)` is drawn; at or above `eps` the greedy
/// action is taken, otherwise a uniformly random one. The greedy branch
/// therefore has probability exactly `1 - eps`.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: State, eps: f64, rng: &mut R) -> Action {
    let threshold: f64 = rng.gen();
    if threshold >= eps {
        q.argmax(state)
    } else {
        Action::ALL[rng.gen_range(0..Action::COUNT)]
    }
}

/// Epsilon-greedy selection whose greedy branch picks uniformly among tied
/// maxima. With a fresh all-zero table the lowest-code rule always walks
/// `Left`, which on the default map drifts into the column-0 hole and
/// starves exploration of the goal.
pub fn select_action_random_ties<R: Rng + ?Sized>(
    q: &QTable,
    state: State,
    eps: f64,
    rng: &mut R,
) -> Action {
    let threshold: f64 = rng.gen();
    if threshold >= eps {
        let row = q.row(state);
        let best = q.max_value(state);
        let tied = row.iter().filter(|v| **v == best).count();
        let pick = if tied == 1 { 0 } else { rng.gen_range(0..tied) };
        let idx = (0..Action::COUNT)
            .filter(|&i| row[i] == best)
            .nth(pick)
            .expect("pick < tied");
        Action::ALL[idx]
    } else {
        Action::ALL[rng.gen_range(0..Action::COUNT)]
    }
}

/// Temporal-difference update of a single entry; returns the new value.
///
/// The bootstrap term is the maximum over the successor state's row.
/// Terminal rows are never written, so they contribute zero.
pub fn q_update(
    q: &mut QTable,
    s: State,
    a: Action,
    reward: f64,
    s_next: State,
    hp: &Hyperparams,
) -> f64 {
    let current = q.get(s, a);
    let target = reward + hp.discount * q.max_value(s_next);
    let updated = current + hp.alpha * (target - current);
    q.set(s, a, updated);
    updated
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub reward: f64,
    pub epsilon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainingLog {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.episodes.iter().map(|e| e.reward)
    }

    /// Trailing moving average of episode reward with the given window.
    /// Entries before a full window are averaged over what is available.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let rewards: Vec<f64> = self.rewards().collect();
        let window = window.max(1);
        let mut out = Vec::with_capacity(rewards.len());
        let mut sum = 0.0;
        for i in 0..rewards.len() {
            sum += rewards[i];
            if i >= window {
                sum -= rewards[i - window];
            }
            out.push(sum / (i + 1).min(window) as f64);
        }
        out
    }

    /// Comma-separated text with header `episode,reward,epsilon,steps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,reward,epsilon,steps\n");
        for (i, e) in self.episodes.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", e.reward, e.epsilon, e.steps);
        }
        out
    }
}

pub fn export_log(log: &TrainingLog, path: impl AsRef<Path>) -> Result<(), QError> {
    fs::write(path, log.to_csv())?;
    Ok(())
}

/// Runs epsilon-greedy Q-learning. Fully determined by `(map, hp)`.
pub fn train(map: &MapSpec, hp: &Hyperparams) -> Result<(QTable, TrainingLog), QError> {
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut q = QTable::for_map(map);
    let mut log = TrainingLog {
        episodes: Vec::with_capacity(hp.episodes),
    };
    for episode in 0..hp.episodes {
        let eps = epsilon(episode, hp);
        let mut state = map.start_state();
        let mut total = 0.0;
        let mut steps = 0;
        while steps < hp.max_steps {
            let action = match hp.tie_break {
                TieBreak::Lowest => select_action(&q, state, eps, &mut rng),
                TieBreak::Random => select_action_random_ties(&q, state, eps, &mut rng),
            };
            let out = map
                .step(state, action, hp.slippery, &mut rng)
                .expect("episode loop never steps from a terminal state");
            q_update(&mut q, state, action, out.reward, out.next_state, hp);
            total += out.reward;
            steps += 1;
            state = out.next_state;
            if out.terminated {
                break;
            }
        }
        log.episodes.push(EpisodeRecord {
            reward: total,
            epsilon: eps,
            steps,
        });
    }
    Ok((q, log))
}

/// Trains one independent agent per seed; results are in seed order.
pub fn train_seeds(
    map: &MapSpec,
    hp: &Hyperparams,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<(QTable, TrainingLog)>, QError> {
    hp.validate()?;
    exec.map_slice(seeds, |&seed| {
        let hp = Hyperparams { seed, ..hp.clone() };
        train(map, &hp)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_closed_form() {
        let hp = Hyperparams::default();
        assert_eq!(epsilon(0, &hp), 1.0);
        assert!((epsilon(100, &hp) - 0.374_200_646_8).abs() < 1e-10);
        assert!((epsilon(1_000_000, &hp) - 0.01).abs() < 1e-12);
        for e in 0..2000 {
            assert!(epsilon(e + 1, &hp) < epsilon(e, &hp) || epsilon(e, &hp) == hp.eps_min);
        }
    }

    #[test]
    fn update_arithmetic() {
        let hp = Hyperparams::default();
        let mut q = QTable::zeros(2);
        assert_eq!(q_update(&mut q, 0, Action::Right, 0.0, 1, &hp), 0.0);
        let v = q_update(&mut q, 0, Action::Right, 1.0, 1, &hp);
        assert!((v - 0.1).abs() < 1e-12);

        let mut q = QTable::from_rows(&[[0.0, 0.0, 0.5, 0.0], [1.0, 0.0, 0.0, 0.0]]);
        let v = q_update(&mut q, 0, Action::Right, 0.0, 1, &hp);
        assert!((v - 0.549).abs() < 1e-12);
        // Only the updated entry moves.
        assert_eq!(q.row(1), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(q.row(0), &[0.0, 0.0, v, 0.0]);
    }

    #[test]
    fn greedy_selection_and_ties() {
        let q = QTable::from_rows(&[[0.1, 0.5, 0.2, 0.0], [0.0; 4], [0.0, 0.0, 0.7, 0.7]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&q, 0, 0.0, &mut rng), Action::Down);
        assert_eq!(select_action(&q, 1, 0.0, &mut rng), Action::Left);
        assert_eq!(select_action(&q, 2, 0.0, &mut rng), Action::Right);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = QTable::from_rows(&[[0.0, 9.0, 0.0, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_action(&q, 0, 1.0, &mut rng) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn one_step_task_learns_right() {
        let map = MapSpec::parse("SG").unwrap();
        let hp = Hyperparams {
            episodes: 20,
            ..Hyperparams::default()
        };
        let (q, log) = train(&map, &hp).unwrap();
        assert!(q.get(0, Action::Right) > 0.0);
        assert_eq!(q.argmax(0), Action::Right);
        assert_eq!(log.len(), 20);
    }

    #[test]
    fn random_ties_only_choose_maxima() {
        let q = QTable::from_rows(&[[0.0, 0.7, 0.2, 0.7]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [0usize; 4];
        for _ in 0..10_000 {
            seen[select_action_random_ties(&q, 0, 0.0, &mut rng) as usize] += 1;
        }
        assert_eq!(seen[0] + seen[2], 0);
        assert!(seen[1] > 4_500 && seen[3] > 4_500, "{seen:?}");
    }

    #[test]
    fn training_is_reproducible() {
        let map = MapSpec::default_4x4();
        let hp = Hyperparams {
            seed: 42,
            episodes: 200,
            ..Default::default()
        };
        assert_eq!(train(&map, &hp).unwrap(), train(&map, &hp).unwrap());
        let other = Hyperparams {
            seed: 43,
            ..hp.clone()
        };
        assert_ne!(train(&map, &hp).unwrap().1, train(&map, &other).unwrap().1);
    }

    #[test]
    fn zero_episodes_gives_empty_log_and_zero_table() {
        let map = MapSpec::default_4x4();
        let hp = Hyperparams {
            episodes: 0,
            ..Hyperparams::default()
        };
        let (q, log) = train(&map, &hp).unwrap();
        assert!(log.is_empty());
        assert!(q.values().iter().all(|v| *v == 0.0));
        assert_eq!(log.to_csv(), "episode,reward,epsilon,steps\n");
    }

    #[test]
    fn rejects_bad_hyperparams() {
        let map = MapSpec::default_4x4();
        for hp in [
            Hyperparams {
                alpha: 0.0,
                ..Default::default()
            },
            Hyperparams {
                discount: 1.5,
                ..Default::default()
            },
            Hyperparams {
                eps_min: 0.5,
                eps_max: 0.4,
                ..Default::default()
            },
            Hyperparams {
                decay_rate: 0.0,
                ..Default::default()
            },
            Hyperparams {
                max_steps: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                train(&map, &hp),
                Err(QError::InvalidHyperparams(_))
            ));
        }
    }

    #[test]
    fn qtable_csv_round_trip() {
        let q = QTable::from_rows(&[[0.1, 1.0 / 3.0, 0.0, 1e-300], [0.5, 0.25, 0.125, 0.0625]]);
        let text = q.to_csv();
        assert_eq!(QTable::from_csv(&text).unwrap(), q);
        assert!(QTable::from_csv("1,2,3\n").is_err());
        assert!(QTable::from_csv("1,2,3,x\n").is_err());
        assert!(QTable::from_csv("1,2,3,NaN\n").is_err());
    }

    #[test]
    fn moving_average_partial_windows() {
        let log = TrainingLog {
            episodes: [0.0, 1.0, 1.0, 0.0]
                .iter()
                .map(|&reward| EpisodeRecord {
                    reward,
                    epsilon: 1.0,
                    steps: 1,
                })
                .collect(),
        };
        assert_eq!(log.moving_average(2), vec![0.0, 0.5, 1.0, 0.5]);
    }
}
