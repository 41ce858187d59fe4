//! Content-addressed LRU result cache with single-flight computation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};

use sha2::{Digest, Sha256};

/// Cache key: a digest of the request payload plus a digest of the
/// configuration it was processed under. Any config change changes the key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub content_hash: String,
    pub config_hash: String,
}

impl CacheKey {
    pub fn new(content: &[u8], config_hash: impl Into<String>) -> Self {
        Self { content_hash: sha256_hex(content), config_hash: config_hash.into() }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

struct CacheState<V> {
    entries: HashMap<CacheKey, (V, u64)>,
    recency: BTreeMap<u64, CacheKey>,
    tick: u64,
    in_flight: HashSet<CacheKey>,
}

/// Bounded LRU cache. Concurrent misses on the same key compute once; a
/// capacity of zero disables caching and every call computes.
pub struct ResultCache<V: Clone> {
    capacity: usize,
    state: Mutex<CacheState<V>>,
    ready: Condvar,
    hits: AtomicU64,
    computes: AtomicU64,
}

impl<V: Clone> ResultCache<V> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            state: Mutex::new(CacheState {
                entries: HashMap::new(),
                recency: BTreeMap::new(),
                tick: 0,
                in_flight: HashSet::new(),
            }),
            ready: Condvar::new(),
            hits: AtomicU64::new(0),
            computes: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    /// Number of times the compute closure actually ran.
    pub fn computes(&self) -> u64 {
        self.computes.load(Ordering::Relaxed)
    }

    pub fn get_or_compute(&self, key: &CacheKey, compute: impl FnOnce() -> V) -> V {
        if self.capacity == 0 {
            self.computes.fetch_add(1, Ordering::Relaxed);
            return compute();
        }

        let mut state = self.state.lock().expect("cache lock");
        loop {
            if let Some((value, old_tick)) = state.entries.get(key).map(|(v, t)| (v.clone(), *t)) {
                state.recency.remove(&old_tick);
                state.tick += 1;
                let tick = state.tick;
                state.recency.insert(tick, key.clone());
                state.entries.get_mut(key).expect("present").1 = tick;
                self.hits.fetch_add(1, Ordering::Relaxed);
                return value;
            }
            if state.in_flight.contains(key) {
                state = self.ready.wait(state).expect("cache lock");
                continue;
            }
            state.in_flight.insert(key.clone());
            break;
        }
        drop(state);

        self.computes.fetch_add(1, Ordering::Relaxed);
        let value = compute();

        let mut state = self.state.lock().expect("cache lock");
        state.tick += 1;
        let tick = state.tick;
        state.entries.insert(key.clone(), (value.clone(), tick));
        state.recency.insert(tick, key.clone());
        while state.entries.len() > self.capacity {
            let (&oldest, _) = state.recency.iter().next().expect("non-empty recency");
            let evicted = state.recency.remove(&oldest).expect("present");
            state.entries.remove(&evicted);
        }
        state.in_flight.remove(key);
        self.ready.notify_all();
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn key(s: &str) -> CacheKey {
        CacheKey::new(s.as_bytes(), "cfg")
    }

    #[test]
    fn hit_returns_stored_value_without_recompute() {
        let cache: ResultCache<u32> = ResultCache::new(4);
        assert_eq!(cache.get_or_compute(&key("a"), || 1), 1);
        assert_eq!(cache.get_or_compute(&key("a"), || panic!("must not recompute")), 1);
        assert_eq!(cache.computes(), 1);
        assert_eq!(cache.hits(), 1);
    }

    #[test]
    fn lru_evicts_least_recently_used() {
        let cache: ResultCache<u32> = ResultCache::new(1);
        cache.get_or_compute(&key("a"), || 1);
        cache.get_or_compute(&key("b"), || 2);
        // a was evicted and must recompute
        cache.get_or_compute(&key("a"), || 3);
        assert_eq!(cache.computes(), 3);
    }

    #[test]
    fn recent_use_protects_from_eviction() {
        let cache: ResultCache<u32> = ResultCache::new(2);
        cache.get_or_compute(&key("a"), || 1);
        cache.get_or_compute(&key("b"), || 2);
        cache.get_or_compute(&key("a"), || 99); // refresh a
        cache.get_or_compute(&key("c"), || 3); // evicts b
        assert_eq!(cache.get_or_compute(&key("a"), || 100), 1);
        cache.get_or_compute(&key("b"), || 4);
        assert_eq!(cache.computes(), 4); // a, b, c, then b again
    }

    #[test]
    fn zero_capacity_always_computes() {
        let cache: ResultCache<u32> = ResultCache::new(0);
        assert_eq!(cache.get_or_compute(&key("a"), || 1), 1);
        assert_eq!(cache.get_or_compute(&key("a"), || 2), 2);
        assert_eq!(cache.computes(), 2);
        assert_eq!(cache.hits(), 0);
    }

    #[test]
    fn config_change_changes_key() {
        let a = CacheKey::new(b"payload", "cfg1");
        let b = CacheKey::new(b"payload", "cfg2");
        assert_eq!(a.content_hash, b.content_hash);
        assert_ne!(a, b);
    }

    #[test]
    fn concurrent_identical_misses_compute_once() {
        let cache: Arc<ResultCache<u64>> = Arc::new(ResultCache::new(8));
        let threads: Vec<_> = (0..8)
            .map(|_| {
                let cache = Arc::clone(&cache);
                std::thread::spawn(move || {
                    cache.get_or_compute(&key("shared"), || {
                        std::thread::sleep(std::time::Duration::from_millis(30));
                        42
                    })
                })
            })
            .collect();
        for t in threads {
            assert_eq!(t.join().unwrap(), 42);
        }
        assert_eq!(cache.computes(), 1);
        assert_eq!(cache.hits(), 7);
    }
}
