use std::sync::{Arc, Condvar, Mutex};

/// Counting semaphore bounding concurrent backend processes.
#[derive(Debug)]
pub struct InvocationLimiter {
    max: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

impl InvocationLimiter {
    pub fn new(max: usize) -> Arc<Self> {
        Arc::new(Self {
            max: max.max(1),
            in_use: Mutex::new(0),
            freed: Condvar::new(),
        })
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn acquire(self: &Arc<Self>) -> Permit {
        let mut n = self.in_use.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit { owner: Arc::clone(self) }
    }

    pub fn in_use(&self) -> usize {
        *self.in_use.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug)]
pub struct Permit {
    owner: Arc<InvocationLimiter>,
}

impl Drop for Permit {
    fn drop(&mut self) {
        let mut n = self.owner.in_use.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.owner.freed.notify_one();
    }
}
