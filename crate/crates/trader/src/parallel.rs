//! Deterministic worker pool for independent per-symbol tasks.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

/// A failed task, identified by its key.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskFailure<E> {
    pub key: String,
    pub error: E,
}

/// Runs `task` on every item with up to `workers` threads. Results come
/// back in item order whatever the scheduling. If any task fails, the
/// failure of the earliest item (in input order) is returned.
pub fn parallel_map<T, R, E, K, F>(items: &[T], workers: usize, key: K, task: F) -> Result<Vec<R>, TaskFailure<E>>
where
    T: Sync,
    R: Send,
    E: Send,
    K: Fn(&T) -> String,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let n = items.len();
    let workers = workers.max(1).min(n.max(1));
    let slots: Vec<Mutex<Option<Result<R, E>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    if workers == 1 {
        for (item, slot) in items.iter().zip(&slots) {
            *slot.lock().expect("slot lock") = Some(task(item));
        }
    } else {
        let next = AtomicUsize::new(0);
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let out = task(&items[i]);
                    *slots[i].lock().expect("slot lock") = Some(out);
                });
            }
        });
    }
    let mut results = Vec::with_capacity(n);
    for (item, slot) in items.iter().zip(slots) {
        match slot.into_inner().expect("slot lock").expect("every slot filled") {
            Ok(r) => results.push(r),
            Err(error) => return Err(TaskFailure { key: key(item), error }),
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symbols(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i:03}")).collect()
    }

    fn work(s: &String) -> Result<(String, u64), String> {
        let mut h: u64 = 1469598103934665603;
        for b in s.bytes().cycle().take(20_000) {
            h = (h ^ u64::from(b)).wrapping_mul(1099511628211);
        }
        Ok((s.clone(), h))
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let items = symbols(8);
        let one = parallel_map(&items, 1, String::clone, work).unwrap();
        for w in [2, 3, 4, 16] {
            assert_eq!(parallel_map(&items, w, String::clone, work).unwrap(), one);
        }
    }

    #[test]
    fn empty_input() {
        let items: Vec<String> = Vec::new();
        assert!(parallel_map(&items, 4, String::clone, work).unwrap().is_empty());
    }

    #[test]
    fn many_symbols_keyed_in_order() {
        let items = symbols(150);
        let out = parallel_map(&items, 4, String::clone, work).unwrap();
        assert_eq!(out.len(), 150);
        assert!(out.iter().zip(&items).all(|((k, _), s)| k == s));
    }

    #[test]
    fn earliest_failure_is_reported() {
        let items = symbols(10);
        let failing = |s: &String| -> Result<(), String> {
            if s == "S007" || s == "S003" {
                Err(format!("boom {s}"))
            } else {
                Ok(())
            }
        };
        for w in [1, 4] {
            let err = parallel_map(&items, w, String::clone, failing).unwrap_err();
            assert_eq!(err.key, "S003");
            assert_eq!(err.error, "boom S003");
        }
    }
}
