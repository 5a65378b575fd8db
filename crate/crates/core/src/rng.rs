//! Counter-based pseudorandom numbers.
//!
//! Every draw is a pure function of `(key, stream, counter)`, so the value
//! used at step `j` of a run never depends on how many draws were made
//! before it. This is what lets the simulator and the serial reference agree
//! bit-for-bit regardless of checkpoint stride or diagnostic settings.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_MUL: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named streams so that independent consumers of one seed never collide.
pub mod streams {
    pub const COORDINATE: u64 = 1;
    pub const DELAY: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const MATRIX: u64 = 10;
    pub const TRUE_MODEL: u64 = 11;
    pub const NOISE: u64 = 12;
    pub const GRAPH: u64 = 13;
    pub const START: u64 = 14;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: splitmix(seed ^ 0x6A09_E667_F3BC_C909),
        }
    }

    /// 64 random bits at position `counter` of `stream`.
    #[inline]
    pub fn bits(&self, stream: u64, counter: u64) -> u64 {
        let z = splitmix(self.key ^ stream.wrapping_mul(STREAM_MUL));
        splitmix(z ^ splitmix(counter))
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, stream: u64, counter: u64) -> f64 {
        ((self.bits(stream, counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` by multiply-high. The bias is at most n / 2^64.
    #[inline]
    pub fn index(&self, stream: u64, counter: u64, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.bits(stream, counter) as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box–Muller on two uniforms at `2c` and `2c + 1`.
    pub fn normal(&self, stream: u64, counter: u64) -> f64 {
        let u1 = self.uniform(stream, counter.wrapping_mul(2));
        let u2 = self.uniform(stream, counter.wrapping_mul(2).wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn stream(&self, stream: u64) -> Stream {
        Stream {
            rng: *self,
            stream,
            counter: 0,
        }
    }
}

/// Sequential cursor over one stream of a [`CounterRng`].
#[derive(Debug, Clone)]
pub struct Stream {
    rng: CounterRng,
    stream: u64,
    counter: u64,
}

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        let v = self.rng.bits(self.stream, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_uniform(&mut self) -> f64 {
        let v = self.rng.uniform(self.stream, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_index(&mut self, n: usize) -> usize {
        let v = self.rng.index(self.stream, self.counter, n);
        self.counter += 1;
        v
    }

    pub fn next_normal(&mut self) -> f64 {
        let v = self.rng.normal(self.stream, self.counter);
        self.counter += 1;
        v
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}
