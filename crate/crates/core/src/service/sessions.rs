use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::ragchat::Session;

pub type SharedSession = Arc<tokio::sync::Mutex<Session>>;

/// Source of session ids: random, or `sha256(seed || counter)` for replayable runs.
#[derive(Debug)]
pub enum SessionIds {
    Random,
    Seeded { seed: String, counter: AtomicU64 },
}

impl SessionIds {
    pub fn seeded(seed: impl Into<String>) -> Self {
        SessionIds::Seeded { seed: seed.into(), counter: AtomicU64::new(0) }
    }

    pub fn next_id(&self) -> String {
        match self {
            SessionIds::Random => uuid::Uuid::new_v4().simple().to_string(),
            SessionIds::Seeded { seed, counter } => {
                let n = counter.fetch_add(1, Ordering::Relaxed);
                let mut h = Sha256::new();
                h.update(seed.as_bytes());
                h.update(n.to_be_bytes());
                h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
            }
        }
    }
}

struct Slot {
    session: SharedSession,
    last_used: Instant,
}

/// In-memory sessions that expire after `ttl` without use.
pub struct SessionRegistry {
    slots: Mutex<HashMap<String, Slot>>,
    ttl: Duration,
    ids: SessionIds,
}

impl SessionRegistry {
    pub fn new(ttl: Duration, ids: SessionIds) -> Self {
        SessionRegistry { slots: Mutex::new(HashMap::new()), ttl, ids }
    }

    pub fn next_id(&self) -> String {
        self.ids.next_id()
    }

    pub fn insert(&self, session: Session) -> SharedSession {
        let now = Instant::now();
        let mut slots = self.slots.lock().expect("session registry poisoned");
        slots.retain(|_, s| now.duration_since(s.last_used) < self.ttl);
        let id = session.session_id.clone();
        let shared = Arc::new(tokio::sync::Mutex::new(session));
        slots.insert(id, Slot { session: shared.clone(), last_used: now });
        shared
    }

    /// Looks a session up and refreshes its idle timer. Expired sessions are dropped.
    pub fn get(&self, id: &str) -> Option<SharedSession> {
        let now = Instant::now();
        let mut slots = self.slots.lock().expect("session registry poisoned");
        let expired = slots.get(id).is_some_and(|s| now.duration_since(s.last_used) >= self.ttl);
        if expired {
            slots.remove(id);
            return None;
        }
        let slot = slots.get_mut(id)?;
        slot.last_used = now;
        Some(slot.session.clone())
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("session registry poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_ids_repeat_across_instances() {
        let a = SessionIds::seeded("s");
        let b = SessionIds::seeded("s");
        let xs: Vec<_> = (0..3).map(|_| a.next_id()).collect();
        let ys: Vec<_> = (0..3).map(|_| b.next_id()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs[0], xs[1]);
        assert_eq!(xs[0].len(), 32);
    }

    #[test]
    fn random_ids_differ() {
        let r = SessionIds::Random;
        assert_ne!(r.next_id(), r.next_id());
    }

    #[test]
    fn expiry() {
        let reg = SessionRegistry::new(Duration::from_millis(30), SessionIds::Random);
        reg.insert(Session::new("a", 5, vec![]));
        assert!(reg.get("a").is_some());
        std::thread::sleep(Duration::from_millis(60));
        assert!(reg.get("a").is_none());
        assert!(reg.is_empty());
        assert!(reg.get("missing").is_none());
    }
}
