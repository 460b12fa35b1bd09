use std::sync::{Condvar, Mutex};

/// Bounds the number of requests in flight against one endpoint.
#[derive(Debug)]
pub struct InflightLimiter {
    capacity: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

pub struct Slot<'a> {
    limiter: &'a InflightLimiter,
}

impl InflightLimiter {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            in_use: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    /// Blocks until a slot is free; the slot is released on drop.
    pub fn acquire(&self) -> Slot<'_> {
        let mut in_use = self.in_use.lock().unwrap_or_else(|p| p.into_inner());
        while *in_use >= self.capacity {
            in_use = self.freed.wait(in_use).unwrap_or_else(|p| p.into_inner());
        }
        *in_use += 1;
        Slot { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.in_use.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        let mut in_use = self.limiter.in_use.lock().unwrap_or_else(|p| p.into_inner());
        *in_use -= 1;
        self.limiter.freed.notify_one();
    }
}
