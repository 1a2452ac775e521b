//! Counter-based random numbers (Philox4x32-10).
//!
//! Every Gaussian draw is a pure function of the master seed and a key
//! `(sample, mode, channel, step)`, so results do not depend on the order in
//! which parallel workers consume them.

use std::f64::consts::TAU;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// Philox4x32 with 10 rounds.
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for i in 0..10 {
        if i > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let p0 = (M0 as u64) * (c[0] as u64);
        let p1 = (M1 as u64) * (c[2] as u64);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Channels used in stream keys.
pub mod channel {
    pub const COS: u8 = 0;
    pub const SIN: u8 = 1;
    pub const PERMUTATION: u8 = 200;
    pub const AUXILIARY: u8 = 201;
}

/// Position of one block in the key space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub sample: u32,
    /// Mode identifier; only the low 56 bits are used.
    pub mode: u64,
    pub channel: u8,
    pub step: u32,
}

/// Master seed plus the `(sample, mode, channel, step)` key schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SeedSpec {
    pub master: u64,
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        SeedSpec { master }
    }

    pub fn block(&self, key: StreamKey) -> [u32; 4] {
        let mode = key.mode & ((1u64 << 56) - 1);
        let counter = [
            key.sample,
            key.step,
            mode as u32,
            (((mode >> 32) as u32) << 8) | key.channel as u32,
        ];
        philox4x32(counter, [self.master as u32, (self.master >> 32) as u32])
    }

    /// Two uniforms in the open interval (0, 1).
    pub fn uniform_pair(&self, key: StreamKey) -> [f64; 2] {
        let b = self.block(key);
        [to_open_unit((b[0] as u64) << 32 | b[1] as u64), to_open_unit((b[2] as u64) << 32 | b[3] as u64)]
    }

    /// Two independent standard normal variates (Box-Muller).
    pub fn normal_pair(&self, key: StreamKey) -> [f64; 2] {
        let [u1, u2] = self.uniform_pair(key);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        [r * c, r * s]
    }

    /// Sequential stream of uniforms under a fixed `(sample, mode, channel)` prefix.
    pub fn stream(&self, sample: u32, mode: u64, channel: u8) -> UniformStream {
        UniformStream { seed: *self, sample, mode, channel, step: 0, buf: [0.0; 2], pos: 2 }
    }
}

fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Iterator over uniforms drawn from consecutive steps of one key prefix.
#[derive(Debug, Clone)]
pub struct UniformStream {
    seed: SeedSpec,
    sample: u32,
    mode: u64,
    channel: u8,
    step: u32,
    buf: [f64; 2],
    pos: usize,
}

impl UniformStream {
    pub fn next_uniform(&mut self) -> f64 {
        if self.pos == 2 {
            let key = StreamKey { sample: self.sample, mode: self.mode, channel: self.channel, step: self.step };
            self.buf = self.seed.uniform_pair(key);
            self.step = self.step.wrapping_add(1);
            self.pos = 0;
        }
        self.pos += 1;
        self.buf[self.pos - 1]
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_uniform() * n as f64) as usize).min(n - 1)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mode identifier derived from integer lattice coordinates, so that two
/// lattices with the same spacing assign the same random stream to the same
/// frequency cell.
pub fn lattice_key(j: &[i64]) -> u64 {
    let d = j.len();
    let bits = 56 / d.max(1);
    let half = 1i64 << (bits - 1);
    if j.iter().all(|&v| v > -half && v < half) {
        let mask = (1u64 << bits) - 1;
        j.iter().fold(0u64, |acc, &v| (acc << bits) | ((v + half) as u64 & mask))
    } else {
        j.iter().fold(0x5eed_u64, |acc, &v| splitmix(acc ^ v as u64)) & ((1u64 << 56) - 1)
    }
}
