//! Greedy policy extraction, deterministic rollout, and a breadth-first
//! shortest-path oracle that is independent of the learning code.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gridworld::{Action, MapSpec, State};
use crate::qlearn::QTable;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SequenceError {
    #[error("IllegalCode: {token:?} at position {index} is not an action code 0-3")]
    IllegalCode { index: usize, token: String },
}

/// Ordered grid actions, serialized as a comma-separated integer line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActionSequence(pub Vec<Action>);

impl ActionSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    pub fn codes(&self) -> Vec<u8> {
        self.0.iter().map(|a| a.code()).collect()
    }
}

impl fmt::Display for ActionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: Vec<String> = self.0.iter().map(|a| a.code().to_string()).collect();
        f.write_str(&codes.join(","))
    }
}

impl FromStr for ActionSequence {
    type Err = SequenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(ActionSequence::default());
        }
        s.split(',')
            .enumerate()
            .map(|(index, tok)| {
                tok.trim()
                    .parse::<u8>()
                    .ok()
                    .and_then(Action::from_code)
                    .ok_or_else(|| SequenceError::IllegalCode {
                        index,
                        token: tok.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ActionSequence)
    }
}

/// Visited states, beginning at the start state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath(pub Vec<State>);

impl GridPath {
    pub fn states(&self) -> &[State] {
        &self.0
    }

    pub fn last(&self) -> State {
        *self.0.last().expect("path always holds the start state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutOutcome {
    ReachedGoal,
    FellInHole,
    LoopDetected,
    StepBudgetExhausted,
}

impl fmt::Display for RolloutOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RolloutOutcome::ReachedGoal => "ReachedGoal",
            RolloutOutcome::FellInHole => "FellInHole",
            RolloutOutcome::LoopDetected => "LoopDetected",
            RolloutOutcome::StepBudgetExhausted => "StepBudgetExhausted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rollout {
    pub actions: ActionSequence,
    pub path: GridPath,
    pub outcome: RolloutOutcome,
}

/// Per-state argmax with lowest-code tie-break.
pub fn greedy_policy(q: &QTable) -> Vec<Action> {
    (0..q.n_states()).map(|s| q.argmax(s)).collect()
}

/// Follows the greedy policy under deterministic transitions.
///
/// A repeated state means the policy cycles forever, reported as
/// `LoopDetected`; the action that closes the cycle is included.
pub fn rollout(map: &MapSpec, q: &QTable, max_steps: usize) -> Rollout {
    let policy = greedy_policy(q);
    let mut visited = vec![false; map.n_states()];
    let mut state = map.start_state();
    visited[state] = true;
    let mut actions = Vec::new();
    let mut path = vec![state];
    let outcome = loop {
        if state == map.goal_state() {
            break RolloutOutcome::ReachedGoal;
        }
        if map.is_hole(state) {
            break RolloutOutcome::FellInHole;
        }
        if actions.len() >= max_steps {
            break RolloutOutcome::StepBudgetExhausted;
        }
        let action = policy[state];
        state = map.neighbor(state, action);
        actions.push(action);
        path.push(state);
        if visited[state] {
            break RolloutOutcome::LoopDetected;
        }
        visited[state] = true;
    };
    Rollout {
        actions: ActionSequence(actions),
        path: GridPath(path),
        outcome,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShortestPath {
    Found {
        length: usize,
        witness: ActionSequence,
    },
    Unreachable,
}

impl ShortestPath {
    pub fn length(&self) -> Option<usize> {
        match self {
            ShortestPath::Found { length, .. } => Some(*length),
            ShortestPath::Unreachable => None,
        }
    }
}

/// Breadth-first search from start to goal over non-hole cells.
pub fn bfs_shortest_path(map: &MapSpec) -> ShortestPath {
    let n = map.n_states();
    let mut parent: Vec<Option<(State, Action)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([map.start_state()]);
    seen[map.start_state()] = true;
    while let Some(s) = queue.pop_front() {
        if s == map.goal_state() {
            let mut witness = Vec::new();
            let mut cur = s;
            while let Some((prev, a)) = parent[cur] {
                witness.push(a);
                cur = prev;
            }
            witness.reverse();
            return ShortestPath::Found {
                length: witness.len(),
                witness: ActionSequence(witness),
            };
        }
        for a in Action::ALL {
            let next = map.neighbor(s, a);
            if !seen[next] && !map.is_hole(next) {
                seen[next] = true;
                parent[next] = Some((s, a));
                queue.push_back(next);
            }
        }
    }
    ShortestPath::Unreachable
}
