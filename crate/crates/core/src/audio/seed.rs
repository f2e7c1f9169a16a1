use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Identifies one stochastic operation: a global run seed, the utterance and the attack.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedContext {
    pub global_seed: u64,
    pub utt_id: String,
    pub attack_tag: String,
}

impl SeedContext {
    pub fn new(global_seed: u64, utt_id: impl Into<String>, attack_tag: impl Into<String>) -> Self {
        Self { global_seed, utt_id: utt_id.into(), attack_tag: attack_tag.into() }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self))
    }
}

/// Stream seed for a context.
///
/// SHA-256 over `seed (u64 LE) || len(utt) (u64 LE) || utt || len(tag) (u64 LE) || tag`,
/// truncated to the first eight bytes read little-endian. The length prefixes keep
/// `("a", "b")` and `("ab", "")` apart.
pub fn derive_seed(ctx: &SeedContext) -> u64 {
    let mut h = Sha256::new();
    h.update(ctx.global_seed.to_le_bytes());
    for field in [ctx.utt_id.as_bytes(), ctx.attack_tag.as_bytes()] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field);
    }
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}
