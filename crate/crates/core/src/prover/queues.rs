use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::logic::ClauseId;

/// Which queue a selection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueKind {
    Learned,
    Baseline,
}

/// How the next given clause is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Baseline,
    Learned,
    /// Learned queue on even turns, baseline queue on odd turns.
    Coop,
}

#[derive(Debug, Clone, Copy)]
struct LearnedKey(f64, u32);

impl PartialEq for LearnedKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for LearnedKey {}
impl PartialOrd for LearnedKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for LearnedKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// The two unprocessed queues. Entries are removed lazily: a clause
/// selected from one queue stays in the other until it surfaces there and
/// the liveness check rejects it.
#[derive(Debug, Default)]
pub struct Unprocessed {
    baseline: BinaryHeap<Reverse<(u64, u32)>>,
    learned: BinaryHeap<Reverse<LearnedKey>>,
    turn: u64,
}

impl Unprocessed {
    pub fn new() -> Unprocessed {
        Unprocessed::default()
    }

    pub fn push_baseline(&mut self, id: ClauseId, weight: u64) {
        self.baseline.push(Reverse((weight, id.0)));
    }

    /// `key` is the learned priority, lower first: the negated score, or
    /// the penalty weight.
    pub fn push_learned(&mut self, id: ClauseId, key: f64) {
        self.learned.push(Reverse(LearnedKey(key, id.0)));
    }

    pub fn turn(&self) -> u64 {
        self.turn
    }

    fn pop(&mut self, kind: QueueKind, live: &impl Fn(ClauseId) -> bool) -> Option<ClauseId> {
        loop {
            let id = match kind {
                QueueKind::Baseline => ClauseId(self.baseline.pop()?.0 .1),
                QueueKind::Learned => ClauseId(self.learned.pop()?.0 .1),
            };
            if live(id) {
                return Some(id);
            }
        }
    }

    /// Pops the next live clause. The turn counter advances on every
    /// successful selection, including fallbacks to the other queue.
    pub fn select(&mut self, how: Selection, live: impl Fn(ClauseId) -> bool) -> Option<(ClauseId, QueueKind)> {
        let first = match how {
            Selection::Baseline => QueueKind::Baseline,
            Selection::Learned => QueueKind::Learned,
            Selection::Coop if self.turn.is_multiple_of(2) => QueueKind::Learned,
            Selection::Coop => QueueKind::Baseline,
        };
        let picked = match self.pop(first, &live) {
            Some(id) => Some((id, first)),
            None if how == Selection::Coop => {
                let other = match first {
                    QueueKind::Learned => QueueKind::Baseline,
                    QueueKind::Baseline => QueueKind::Learned,
                };
                self.pop(other, &live).map(|id| (id, other))
            }
            None => None,
        };
        if picked.is_some() {
            self.turn += 1;
        }
        picked
    }
}
