//! Keyed random streams.
//!
//! A [`RandomStream`] is identified by a 64-bit run seed and a string label.
//! The generator behind it is a ChaCha8 instance keyed by the SHA-256 digest
//! of `(seed, label)`, so any consumer can reconstruct exactly the stream it
//! needs without coordinating with other consumers. Parallel rollouts key
//! each episode by its index and become independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    seed: u64,
    stream_id: String,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: impl Into<String>) -> Self {
        Self {
            seed,
            stream_id: stream_id.into(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    /// Derived stream labelled `<parent>/<label>`.
    pub fn child(&self, label: impl AsRef<str>) -> Self {
        let label = label.as_ref();
        let stream_id = if self.stream_id.is_empty() {
            label.to_owned()
        } else {
            format!("{}/{}", self.stream_id, label)
        };
        Self {
            seed: self.seed,
            stream_id,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update((self.stream_id.len() as u64).to_le_bytes());
        hasher.update(self.stream_id.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(key)
    }
}
