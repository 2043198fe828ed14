//! In-place iterative radix-2 FFT for power-of-two lengths.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

/// Precomputed twiddles and bit-reversal table for one transform length.
#[derive(Debug, Clone)]
pub struct Radix2 {
    n: usize,
    /// Stage twiddles `exp(−2πik/len)` for `len = 2, 4, …, n`, concatenated; stage `len`
    /// starts at offset `len/2 − 1`.
    forward: Vec<C64>,
    inverse: Vec<C64>,
    bitrev: Vec<u32>,
}

impl Radix2 {
    /// Panics unless `n` is a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
        let mut forward = Vec::with_capacity(n.saturating_sub(1));
        let mut len = 2;
        while len <= n {
            for k in 0..len / 2 {
                let theta = -2.0 * PI * k as f64 / len as f64;
                forward.push(C64::new(theta.cos(), theta.sin()));
            }
            len <<= 1;
        }
        let inverse = forward.iter().map(|w| w.conj()).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Self {
            n,
            forward,
            inverse,
            bitrev,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X_j = Σ_m x_m e^{−2πi jm/n}`, unnormalized.
    pub fn forward(&self, buf: &mut [C64]) {
        self.transform(buf, &self.forward);
    }

    /// `x_m = Σ_j X_j e^{+2πi jm/n}`, unnormalized.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.transform(buf, &self.inverse);
    }

    /// Forward transform of every column of a row-major `n × cols` matrix.
    pub fn forward_columns(&self, data: &mut [C64], cols: usize) {
        self.transform_columns(data, cols, &self.forward);
    }

    /// Inverse transform of every column of a row-major `n × cols` matrix.
    pub fn inverse_columns(&self, data: &mut [C64], cols: usize) {
        self.transform_columns(data, cols, &self.inverse);
    }

    fn transform(&self, buf: &mut [C64], table: &[C64]) {
        let n = self.n;
        assert_eq!(buf.len(), n, "buffer length does not match FFT plan");
        for (i, &j) in self.bitrev.iter().enumerate() {
            let j = j as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let tw = &table[half - 1..len - 1];
            for chunk in buf.chunks_exact_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
            len <<= 1;
        }
    }

    /// Same butterflies with whole rows as the elements.
    fn transform_columns(&self, data: &mut [C64], cols: usize, table: &[C64]) {
        let n = self.n;
        assert_eq!(data.len(), n * cols, "matrix shape does not match FFT plan");
        for (i, &j) in self.bitrev.iter().enumerate() {
            let j = j as usize;
            if i < j {
                let (top, bottom) = data.split_at_mut(j * cols);
                top[i * cols..(i + 1) * cols].swap_with_slice(&mut bottom[..cols]);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let tw = &table[half - 1..len - 1];
            for block in data.chunks_exact_mut(len * cols) {
                let (lo, hi) = block.split_at_mut(half * cols);
                for ((ra, rb), w) in lo.chunks_exact_mut(cols).zip(hi.chunks_exact_mut(cols)).zip(tw) {
                    for (a, b) in ra.iter_mut().zip(rb.iter_mut()) {
                        let t = *b * w;
                        *b = *a - t;
                        *a += t;
                    }
                }
            }
            len <<= 1;
        }
    }
}
