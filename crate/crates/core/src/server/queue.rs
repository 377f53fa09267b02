use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// Shared FIFO from which workers take batches.
///
/// A worker that finds fewer than `b` items waits `wait` once, then takes
/// the first `b` items or however many are left.
pub struct BatchQueue<T> {
    state: Mutex<State<T>>,
    ready: Condvar,
}

struct State<T> {
    items: VecDeque<T>,
    closed: bool,
}

impl<T> Default for BatchQueue<T> {
    fn default() -> Self {
        BatchQueue::new()
    }
}

impl<T> BatchQueue<T> {
    pub fn new() -> BatchQueue<T> {
        BatchQueue {
            state: Mutex::new(State {
                items: VecDeque::new(),
                closed: false,
            }),
            ready: Condvar::new(),
        }
    }

    pub fn push(&self, item: T) {
        let mut s = self.state.lock().unwrap();
        s.items.push_back(item);
        drop(s);
        self.ready.notify_one();
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stops accepting the wait-for-more behaviour: once closed and empty,
    /// [`take_batch`](Self::take_batch) returns `None`.
    pub fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    /// Blocks until at least one item is queued, then applies the batching
    /// rule. Returns `None` once the queue is closed and drained.
    pub fn take_batch(&self, b: usize, wait: Duration) -> Option<Vec<T>> {
        let b = b.max(1);
        loop {
            let mut s = self.state.lock().unwrap();
            while s.items.is_empty() && !s.closed {
                s = self.ready.wait(s).unwrap();
            }
            if s.items.is_empty() {
                return None;
            }
            if s.items.len() < b && !s.closed && !wait.is_zero() {
                drop(s);
                std::thread::sleep(wait);
                s = self.state.lock().unwrap();
            }
            let n = s.items.len().min(b);
            if n > 0 {
                let batch: Vec<T> = s.items.drain(..n).collect();
                if !s.items.is_empty() {
                    self.ready.notify_one();
                }
                return Some(batch);
            }
            // another worker drained the queue while we waited
        }
    }
}
