use std::sync::{Arc, Condvar, Mutex};

/// Caps the number of in-flight provider requests.
#[derive(Debug, Clone)]
pub struct ConcurrencyLimit {
    inner: Arc<(Mutex<usize>, Condvar)>,
    max: usize,
}

impl ConcurrencyLimit {
    pub fn new(max: usize) -> Self {
        let max = max.max(1);
        Self {
            inner: Arc::new((Mutex::new(0), Condvar::new())),
            max,
        }
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn in_flight(&self) -> usize {
        *self.inner.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> Permit {
        let (lock, cvar) = &*self.inner;
        let mut n = lock.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = cvar.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit {
            inner: Arc::clone(&self.inner),
        }
    }
}

#[must_use]
pub struct Permit {
    inner: Arc<(Mutex<usize>, Condvar)>,
}

impl Drop for Permit {
    fn drop(&mut self) {
        let (lock, cvar) = &*self.inner;
        let mut n = lock.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        cvar.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn never_exceeds_cap() {
        let limit = ConcurrencyLimit::new(2);
        let peak = Arc::new(AtomicUsize::new(0));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let limit = limit.clone();
                let peak = Arc::clone(&peak);
                s.spawn(move || {
                    let _p = limit.acquire();
                    peak.fetch_max(limit.in_flight(), Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(limit.in_flight(), 0);
    }
}
