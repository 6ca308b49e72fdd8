//! Splittable deterministic random streams.
//!
//! A [`Stream`] names a ChaCha8 key and stream id. Children are derived by
//! hashing, so the random numbers a task sees depend only on its position in
//! the task tree and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
    id: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { key: seed, id: 0 }
    }

    /// Stream with an explicit ChaCha stream id under `seed`. Distinct ids
    /// under the same key never share output.
    pub fn with_id(seed: u64, id: u64) -> Self {
        Self { key: seed, id }
    }

    /// Child stream `index`. Pure function of `(self, index)`.
    pub fn split(&self, index: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(self.id.wrapping_add(0x5851_f42d_4c95_7f2d))),
            id: index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(self.id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_stream_same_numbers() {
        let s = Stream::new(7).split(3).split(11);
        let a: Vec<u64> = (0..8).map({
            let mut r = s.rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = s.rng();
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn siblings_differ() {
        let root = Stream::new(7);
        let x: u64 = root.split(0).rng().random();
        let y: u64 = root.split(1).rng().random();
        assert_ne!(x, y);
        let p: u64 = Stream::with_id(1, 0).rng().random();
        let q: u64 = Stream::with_id(1, 1).rng().random();
        assert_ne!(p, q);
    }
}
