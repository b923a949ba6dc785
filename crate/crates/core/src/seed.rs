//! Stable seed derivation.
//!
//! Seeds are derived from content (global seed, question id, attempt number)
//! rather than from call order, so results do not depend on how work is
//! scheduled across threads or batches.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a hasher with a splitmix64 finalizer.
#[derive(Clone, Debug)]
pub struct SeedHasher(u64);

impl Default for SeedHasher {
    fn default() -> Self {
        SeedHasher(FNV_OFFSET)
    }
}

impl SeedHasher {
    pub fn new(seed: u64) -> Self {
        let mut h = SeedHasher::default();
        h.write_u64(seed);
        h
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        // length delimiter so ("ab","c") != ("a","bc")
        self.0 ^= 0xff;
        self.0 = self.0.wrapping_mul(FNV_PRIME);
        self
    }

    pub fn write_str(&mut self, s: &str) -> &mut Self {
        self.write_bytes(s.as_bytes())
    }

    pub fn write_u64(&mut self, v: u64) -> &mut Self {
        self.write_bytes(&v.to_le_bytes())
    }

    pub fn finish(&self) -> u64 {
        splitmix64(self.0)
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one sampling attempt of one question.
pub fn attempt_seed(global: u64, question_id: &str, attempt: usize) -> u64 {
    SeedHasher::new(global)
        .write_str(question_id)
        .write_u64(attempt as u64)
        .finish()
}
