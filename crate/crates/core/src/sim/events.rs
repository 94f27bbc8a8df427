use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::SimTime;

/// A gradient in flight from `from` to `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub sent: SimTime,
    pub gradient: Rc<[f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Deliver(Message),
    Activate { node: usize },
}

impl EventKind {
    /// Deliveries at an instant are applied before activations at it.
    fn rank(&self) -> u8 {
        match self {
            EventKind::Deliver(_) => 0,
            EventKind::Activate { .. } => 1,
        }
    }

    fn source(&self) -> usize {
        match self {
            EventKind::Deliver(msg) => msg.from,
            EventKind::Activate { node } => *node,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: SimTime,
    pub kind: EventKind,
    seq: u64,
}

impl Event {
    pub fn seq(&self) -> u64 {
        self.seq
    }

    fn key(&self) -> (SimTime, u8, usize, u64) {
        (self.time, self.kind.rank(), self.kind.source(), self.seq)
    }
}

impl Eq for Event {}

impl Ord for Event {
    // Reversed: `BinaryHeap` is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-time queue ordered by `(time, kind, source, sequence)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    last_popped: Option<SimTime>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the sequence number assigned to the event.
    ///
    /// # Panics
    /// If `time` precedes an already popped event.
    pub fn push(&mut self, time: SimTime, kind: EventKind) -> u64 {
        if let Some(last) = self.last_popped {
            assert!(time >= last, "event scheduled in the past: {time} < {last}");
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, kind, seq });
        seq
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        self.last_popped = Some(e.time);
        Some(e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deliver(from: usize, sent: u64) -> EventKind {
        EventKind::Deliver(Message {
            from,
            to: 0,
            sent: SimTime(sent),
            gradient: Rc::from(vec![0.0]),
        })
    }

    #[test]
    fn pops_in_key_order() {
        let mut q = EventQueue::new();
        q.push(SimTime(5), EventKind::Activate { node: 0 });
        q.push(SimTime(5), deliver(3, 1));
        q.push(SimTime(5), deliver(1, 2));
        q.push(SimTime(2), EventKind::Activate { node: 9 });
        q.push(SimTime(5), deliver(1, 0));
        let order: Vec<_> = std::iter::from_fn(|| q.pop())
            .map(|e| (e.time.0, e.kind.rank(), e.kind.source(), e.seq()))
            .collect();
        assert_eq!(order, vec![(2, 1, 9, 3), (5, 0, 1, 2), (5, 0, 1, 4), (5, 0, 3, 1), (5, 1, 0, 0)]);
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn refuses_past_events() {
        let mut q = EventQueue::new();
        q.push(SimTime(10), EventKind::Activate { node: 0 });
        q.pop();
        q.push(SimTime(9), EventKind::Activate { node: 0 });
    }
}
