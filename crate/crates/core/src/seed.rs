//! Deterministic derivation of per-task random generator seeds.

use dstream::StableHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for one unit of work, fully determined by the global seed and
/// the parts naming the unit.
pub fn rng_for(seed: u64, parts: &[&dyn HashPart]) -> ChaCha8Rng {
    let mut h = StableHasher::with_seed(seed);
    for p in parts {
        p.feed(&mut h);
    }
    ChaCha8Rng::seed_from_u64(std::hash::Hasher::finish(&h))
}

/// Values that can name a unit of work.
pub trait HashPart {
    fn feed(&self, h: &mut StableHasher);
}

impl HashPart for u64 {
    fn feed(&self, h: &mut StableHasher) {
        std::hash::Hasher::write_u64(h, *self);
    }
}

impl HashPart for u32 {
    fn feed(&self, h: &mut StableHasher) {
        std::hash::Hasher::write_u32(h, *self);
    }
}

impl HashPart for f64 {
    fn feed(&self, h: &mut StableHasher) {
        std::hash::Hasher::write_u64(h, self.to_bits());
    }
}

impl HashPart for &str {
    fn feed(&self, h: &mut StableHasher) {
        std::hash::Hasher::write(h, self.as_bytes());
        std::hash::Hasher::write_u8(h, 0xff);
    }
}
