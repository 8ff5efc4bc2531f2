use bitvec::vec::BitVec;

use crate::traffic::MessageId;

/// One node's copy of a message.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredCopy {
    pub id: MessageId,
    pub size: u64,
    pub tokens: u32,
    pub received_at: f64,
    /// Outgoing transfers currently reading this copy.
    pub sending: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Admission {
    Admitted { evicted: Vec<StoredCopy> },
    Rejected,
}

/// Byte-bounded message store with FIFO eviction.
#[derive(Debug, Clone, Default)]
pub struct Buffer {
    capacity: u64,
    used: u64,
    /// Ordered by arrival.
    copies: Vec<StoredCopy>,
    index: BitVec,
}

impl Buffer {
    pub fn new(capacity: u64) -> Self {
        Buffer {
            capacity,
            ..Default::default()
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredCopy> {
        self.copies.iter()
    }

    pub fn contains(&self, id: MessageId) -> bool {
        let i = id.index();
        if i >= self.index.len() {
            return false;
        }
        let bits = usize::BITS as usize;
        (self.index.as_raw_slice()[i / bits] >> (i % bits)) & 1 == 1
    }

    pub fn get(&self, id: MessageId) -> Option<&StoredCopy> {
        if !self.contains(id) {
            return None;
        }
        self.copies.iter().find(|c| c.id == id)
    }

    pub fn get_mut(&mut self, id: MessageId) -> Option<&mut StoredCopy> {
        if !self.contains(id) {
            return None;
        }
        self.copies.iter_mut().find(|c| c.id == id)
    }

    fn mark(&mut self, id: MessageId, on: bool) {
        let i = id.index();
        if self.index.len() <= i {
            self.index.resize(i + 1, false);
        }
        self.index.set(i, on);
    }

    /// Stores `copy`, evicting the oldest copies not being sent until it fits.
    /// Nothing is evicted when the copy cannot fit at all.
    pub fn admit(&mut self, copy: StoredCopy) -> Admission {
        debug_assert!(!self.contains(copy.id));
        let evictable: u64 = self
            .copies
            .iter()
            .filter(|c| c.sending == 0)
            .map(|c| c.size)
            .sum();
        if copy.size > self.capacity || self.capacity - self.used + evictable < copy.size {
            return Admission::Rejected;
        }
        let mut evicted = Vec::new();
        while self.used + copy.size > self.capacity {
            let i = self
                .copies
                .iter()
                .position(|c| c.sending == 0)
                .expect("space was checked");
            let c = self.copies.remove(i);
            self.used -= c.size;
            self.mark(c.id, false);
            evicted.push(c);
        }
        self.used += copy.size;
        self.mark(copy.id, true);
        self.copies.push(copy);
        Admission::Admitted { evicted }
    }

    pub fn remove(&mut self, id: MessageId) -> Option<StoredCopy> {
        if !self.contains(id) {
            return None;
        }
        let i = self.copies.iter().position(|c| c.id == id)?;
        let c = self.copies.remove(i);
        self.used -= c.size;
        self.mark(id, false);
        Some(c)
    }

    /// Removes and returns every copy for which `expired` holds.
    pub fn sweep(&mut self, mut expired: impl FnMut(MessageId) -> bool) -> Vec<StoredCopy> {
        let mut out = Vec::new();
        let mut kept = Vec::with_capacity(self.copies.len());
        for c in self.copies.drain(..) {
            if expired(c.id) {
                out.push(c);
            } else {
                kept.push(c);
            }
        }
        self.copies = kept;
        for c in &out {
            self.used -= c.size;
            let i = c.id.index();
            self.index.set(i, false);
        }
        out
    }
}
