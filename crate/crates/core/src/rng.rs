//! Reproducible random numbers.
//!
//! Everything random in the crate (dataset generation, weight init, splits,
//! batch order) draws from [`SplitMix64`], so results are bitwise stable and
//! can be reproduced from another language with a few lines of code:
//!
//! * state advance: `state += 0x9E3779B97F4A7C15` (wrapping)
//! * output mix: `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//!   `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`
//! * uniform `f64` in `[0, 1)`: `(next_u64() >> 11) * 2^-53`
//! * standard normal: Box–Muller cosine branch,
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)`, consuming two uniforms per sample
//! * shuffle: Fisher–Yates from the back, `j = next_u64() % (i + 1)`

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-stream `stream` of `base`.
///
/// Used for per-epoch batch order and for the split/init streams of a run.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix(base ^ mix(stream.wrapping_add(1).wrapping_mul(GAMMA)))
}
