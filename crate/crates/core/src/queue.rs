//! Drop-tail interface queue with a realtime band and a normal band.

use std::collections::VecDeque;

use crate::packet::PacketPriority;

/// Default interface queue length, in packets.
pub const DEFAULT_IFQ_CAPACITY: usize = 20;

#[derive(Debug, PartialEq)]
pub enum EnqueueOutcome<P> {
    Queued,
    /// Admitted after pushing the given normal-band tail packet out.
    QueuedEvicting(P),
    DroppedTail(P),
}

impl<P> EnqueueOutcome<P> {
    pub fn is_queued(&self) -> bool {
        !matches!(self, EnqueueOutcome::DroppedTail(_))
    }
}

/// Capacity is shared by both bands. The realtime band always drains first.
#[derive(Debug, Clone)]
pub struct InterfaceQueue<P> {
    capacity: usize,
    realtime: VecDeque<P>,
    normal: VecDeque<P>,
}

impl<P> InterfaceQueue<P> {
    pub fn new(capacity: usize) -> Self {
        InterfaceQueue {
            capacity,
            realtime: VecDeque::with_capacity(capacity),
            normal: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.realtime.len() + self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn enqueue(&mut self, item: P, band: PacketPriority) -> EnqueueOutcome<P> {
        let outcome = if !self.is_full() {
            self.band_mut(band).push_back(item);
            EnqueueOutcome::Queued
        } else {
            match band {
                PacketPriority::Normal => EnqueueOutcome::DroppedTail(item),
                PacketPriority::Realtime => match self.normal.pop_back() {
                    Some(evicted) => {
                        self.realtime.push_back(item);
                        EnqueueOutcome::QueuedEvicting(evicted)
                    }
                    None => EnqueueOutcome::DroppedTail(item),
                },
            }
        };
        assert!(self.len() <= self.capacity, "interface queue over capacity");
        outcome
    }

    pub fn dequeue(&mut self) -> Option<P> {
        self.realtime.pop_front().or_else(|| self.normal.pop_front())
    }

    /// Removes every queued item matching `pred`, preserving the order of the rest.
    pub fn drain_where<F: FnMut(&P) -> bool>(&mut self, mut pred: F) -> Vec<P> {
        let mut out = Vec::new();
        for band in [&mut self.realtime, &mut self.normal] {
            let mut keep = VecDeque::with_capacity(band.len());
            for item in band.drain(..) {
                if pred(&item) {
                    out.push(item);
                } else {
                    keep.push_back(item);
                }
            }
            *band = keep;
        }
        out
    }

    /// Realtime band first, then normal, each in FIFO order.
    pub fn iter(&self) -> impl Iterator<Item = &P> {
        self.realtime.iter().chain(self.normal.iter())
    }

    fn band_mut(&mut self, band: PacketPriority) -> &mut VecDeque<P> {
        match band {
            PacketPriority::Realtime => &mut self.realtime,
            PacketPriority::Normal => &mut self.normal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PacketPriority::{Normal, Realtime};

    #[test]
    fn room_left_means_queued() {
        let mut q = InterfaceQueue::new(20);
        for i in 0..19 {
            assert_eq!(q.enqueue(i, Normal), EnqueueOutcome::Queued);
        }
        assert_eq!(q.enqueue(19, Normal), EnqueueOutcome::Queued);
        assert!(q.is_full());
    }

    #[test]
    fn realtime_evicts_normal_tail_when_full() {
        let mut q = InterfaceQueue::new(20);
        for i in 0..20 {
            q.enqueue(i, Normal);
        }
        assert_eq!(q.enqueue(100, Realtime), EnqueueOutcome::QueuedEvicting(19));
        assert_eq!(q.len(), 20);
        assert_eq!(q.dequeue(), Some(100));
        assert_eq!(q.dequeue(), Some(0));
        assert!(!q.iter().any(|&x| x == 19));
    }

    #[test]
    fn full_of_realtime_drops_realtime() {
        let mut q = InterfaceQueue::new(20);
        for i in 0..20 {
            q.enqueue(i, Realtime);
        }
        assert_eq!(q.enqueue(99, Realtime), EnqueueOutcome::DroppedTail(99));
        assert_eq!(q.enqueue(98, Normal), EnqueueOutcome::DroppedTail(98));
    }

    #[test]
    fn drain_where_keeps_order() {
        let mut q = InterfaceQueue::new(10);
        for i in 0..6 {
            q.enqueue(i, if i % 2 == 0 { Normal } else { Realtime });
        }
        let removed = q.drain_where(|&x| x == 2 || x == 3);
        assert_eq!(removed, vec![3, 2]);
        assert_eq!(q.iter().copied().collect::<Vec<_>>(), vec![1, 5, 0, 4]);
    }

    proptest! {
        #[test]
        fn bounded_and_realtime_first(ops in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..300)) {
            let mut q = InterfaceQueue::new(20);
            let mut next = 0u32;
            for (push, rt) in ops {
                if push {
                    let band = if rt { Realtime } else { Normal };
                    q.enqueue((next, band), band);
                    next += 1;
                } else if let Some((_, band)) = q.dequeue() {
                    if band == Normal {
                        prop_assert!(q.iter().all(|(_, b)| *b == Normal));
                    }
                }
                prop_assert!(q.len() <= 20);
                // FIFO within each band
                let rts: Vec<u32> = q.iter().filter(|(_, b)| *b == Realtime).map(|(i, _)| *i).collect();
                let nms: Vec<u32> = q.iter().filter(|(_, b)| *b == Normal).map(|(i, _)| *i).collect();
                prop_assert!(rts.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(nms.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
