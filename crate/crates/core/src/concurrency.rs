use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Map `f` over `items` on at most `max_in_flight` threads. Output order
/// matches input order regardless of completion order.
pub fn bounded_map<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = max_in_flight.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect()
}

/// Counting semaphore that also spaces out acquisitions by a minimum interval.
#[derive(Debug)]
pub struct Throttle {
    permits: Mutex<usize>,
    freed: Condvar,
    min_interval: Option<Duration>,
    last_start: Mutex<Option<Instant>>,
}

pub struct Permit<'a>(&'a Throttle);

impl Throttle {
    pub fn new(max_in_flight: usize, min_interval: Option<Duration>) -> Self {
        Self {
            permits: Mutex::new(max_in_flight.max(1)),
            freed: Condvar::new(),
            min_interval,
            last_start: Mutex::new(None),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.freed.wait(p).unwrap();
        }
        *p -= 1;
        drop(p);
        if let Some(gap) = self.min_interval {
            let mut last = self.last_start.lock().unwrap();
            if let Some(prev) = *last {
                let ready = prev + gap;
                let now = Instant::now();
                if ready > now {
                    std::thread::sleep(ready - now);
                }
            }
            *last = Some(Instant::now());
        }
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}
