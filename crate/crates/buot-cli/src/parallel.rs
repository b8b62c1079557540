//! Bounded worker fan-out for sweeps. Results come back indexed so output
//! order is deterministic no matter how work is scheduled; the worker count
//! is capped by the `BUOT_THREADS` environment variable (default 1, which
//! keeps runs bit-reproducible on a single thread).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub fn thread_cap() -> usize {
    std::env::var("BUOT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Runs `f(0..count)` on up to `threads` workers, returning results in index
/// order.
pub fn run_indexed<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = threads.max(1).min(count.max(1));
    if workers <= 1 {
        return (0..count).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> =
        Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let result = f(i);
                slots.lock().expect("worker panicked")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|slot| slot.expect("all indices filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_ordered() {
        let out = run_indexed(16, 4, |i| {
            std::thread::sleep(std::time::Duration::from_millis((16 - i as u64) % 5));
            i * i
        });
        assert_eq!(out, (0..16).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn single_thread_path() {
        assert_eq!(run_indexed(4, 1, |i| i + 1), vec![1, 2, 3, 4]);
    }
}
