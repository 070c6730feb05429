//! Digests, replayable traces and seeded random walks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::program::{FullState, Program};
use crate::kernel::render::render_system;

/// Hex of the first 16 bytes of SHA-256.
pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..16])
}

pub fn state_digest(p: &Program, s: &FullState) -> String {
    digest_bytes(&p.encode(s))
}

/// Identifies the system a trace was produced from: the digest of its
/// canonical rendering.
pub fn config_digest(p: &Program) -> String {
    digest_bytes(render_system(&p.sys).as_bytes())
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TraceStep {
    pub task: usize,
    pub label: String,
    /// Digest of the state after the step.
    pub digest: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Trace {
    pub config_digest: String,
    pub init_digest: String,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn empty(p: &Program) -> Self {
        Trace {
            config_digest: config_digest(p),
            init_digest: state_digest(p, &p.initial()),
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("trace was recorded against a different system")]
    ConfigMismatch,
    #[error("initial state digest differs")]
    InitMismatch,
    #[error("step {index}: no enabled transition of that task and label reaches the recorded state")]
    DigestMismatch { index: usize },
}

/// Re-executes `t` from the initial state. Each step must be an enabled
/// transition of the named task at the named point whose post-state has the
/// recorded digest. Returns the visited states, initial state first.
pub fn replay(p: &Program, t: &Trace) -> Result<Vec<FullState>, ReplayError> {
    if t.config_digest != config_digest(p) {
        return Err(ReplayError::ConfigMismatch);
    }
    let mut s = p.initial();
    if state_digest(p, &s) != t.init_digest {
        return Err(ReplayError::InitMismatch);
    }
    let mut states = vec![s.clone()];
    for (index, step) in t.steps.iter().enumerate() {
        let next = p
            .successors(&s)
            .into_iter()
            .filter(|x| x.task == step.task && p.label(x.task, x.pc) == step.label)
            .filter_map(|x| x.result.ok())
            .find(|n| state_digest(p, n) == step.digest)
            .ok_or(ReplayError::DigestMismatch { index })?;
        states.push(next.clone());
        s = next;
    }
    Ok(states)
}

pub fn replays(p: &Program, t: &Trace) -> bool {
    replay(p, t).is_ok()
}

/// Picks uniformly among the enabled, error-free transitions at each step,
/// using ChaCha8 seeded with `seed`. Stops early when nothing is enabled.
pub fn random_walk(p: &Program, seed: u64, max_steps: usize) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Trace::empty(p);
    let mut s = p.initial();
    for _ in 0..max_steps {
        let mut options: Vec<_> = p
            .successors(&s)
            .into_iter()
            .filter_map(|x| x.result.ok().map(|n| (x.task, x.pc, n)))
            .collect();
        if options.is_empty() {
            break;
        }
        let (task, pc, next) = options.swap_remove(rng.gen_range(0..options.len()));
        trace.steps.push(TraceStep {
            task,
            label: p.label(task, pc).to_string(),
            digest: state_digest(p, &next),
        });
        s = next;
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echronos::{build_system, SystemConfig};

    fn desk() -> Program {
        Program::new(build_system(&SystemConfig::new(2, 1, 1)).unwrap())
    }

    #[test]
    fn walks_are_seeded_and_replay() {
        let p = desk();
        let a = random_walk(&p, 7, 500);
        assert_eq!(a, random_walk(&p, 7, 500));
        assert_ne!(a, random_walk(&p, 8, 500));
        assert_eq!(a.len(), 500);
        assert!(replays(&p, &a));
        assert!(random_walk(&p, 7, 0).is_empty());
    }

    #[test]
    fn perturbed_digest_is_caught_at_its_index() {
        let p = desk();
        let mut t = random_walk(&p, 1, 20);
        t.steps[5].digest = "00".repeat(16);
        assert_eq!(replay(&p, &t), Err(ReplayError::DigestMismatch { index: 5 }));
    }

    #[test]
    fn empty_trace_checks_init() {
        let p = desk();
        let mut t = Trace::empty(&p);
        assert!(replays(&p, &t));
        t.init_digest = "ff".repeat(16);
        assert_eq!(replay(&p, &t), Err(ReplayError::InitMismatch));
    }
}
