//! In-place iterative radix-2 FFT.

use num_complex::Complex64;

use crate::math::{self, TAU};

/// Forward transform `X_k = Σ_j x_j e^{-2πi jk/n}`; `n` must be a power of
/// two.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -TAU / len as f64;
        for k in 0..half {
            // twiddles evaluated directly rather than by recurrence
            let w = Complex64::new(math::cos(step * k as f64), math::sin(step * k as f64));
            for start in (0..n).step_by(len) {
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}
