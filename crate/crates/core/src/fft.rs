//! Spectral operations on uniformly sampled periodic signals.
//!
//! Power-of-two lengths use an iterative radix-2 FFT; other lengths fall back
//! to a direct DFT. The Nyquist mode of even-length signals is treated as the
//! real cosine `û_N cos(k_N x)`: a shift multiplies it by `cos(k_N s)` and the
//! derivative drops it.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

fn bit_reverse(data: &mut [Complex64]) {
    let n = data.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
}

/// In-place transform. `inverse` uses `e^{+i…}` and divides by `n`.
pub fn fft(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    if !n.is_power_of_two() {
        let out = dft(data, inverse);
        data.copy_from_slice(&out);
        return;
    }
    bit_reverse(data);
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let w_len = Complex64::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = data[start + k];
                let v = data[start + k + len / 2] * w;
                data[start + k] = u + v;
                data[start + k + len / 2] = u - v;
                w *= w_len;
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

fn dft(data: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = data.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); n];
    for (k, o) in out.iter_mut().enumerate() {
        for (j, v) in data.iter().enumerate() {
            let ang = sign * 2.0 * PI * ((k * j) % n) as f64 / n as f64;
            *o += v * Complex64::new(ang.cos(), ang.sin());
        }
        if inverse {
            *o /= n as f64;
        }
    }
    out
}

/// Signed wavenumber of bin `k` for length `n`; `None` for the Nyquist bin.
fn wavenumber(k: usize, n: usize) -> Option<f64> {
    if n % 2 == 0 && k == n / 2 {
        None
    } else if k <= n / 2 {
        Some(k as f64)
    } else {
        Some(k as f64 - n as f64)
    }
}

fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft(&mut c, false);
    c
}

fn backward_real(mut c: Vec<Complex64>) -> Vec<f64> {
    fft(&mut c, true);
    c.into_iter().map(|z| z.re).collect()
}

/// Samples of `u(x + s)` for `u` sampled on `n` points over one `period`.
pub fn spectral_shift(values: &[f64], period: f64, s: f64) -> Vec<f64> {
    let n = values.len();
    if n == 0 || s == 0.0 {
        return values.to_vec();
    }
    let mut c = forward(values);
    let base = 2.0 * PI / period;
    for (k, z) in c.iter_mut().enumerate() {
        match wavenumber(k, n) {
            Some(m) => {
                let ang = base * m * s;
                *z *= Complex64::new(ang.cos(), ang.sin());
            }
            None => *z *= (base * (n / 2) as f64 * s).cos(),
        }
    }
    backward_real(c)
}

/// Samples of `u'(x)`.
pub fn spectral_derivative(values: &[f64], period: f64) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = forward(values);
    let base = 2.0 * PI / period;
    for (k, z) in c.iter_mut().enumerate() {
        match wavenumber(k, n) {
            Some(m) => *z *= Complex64::new(0.0, base * m),
            None => *z = Complex64::new(0.0, 0.0),
        }
    }
    backward_real(c)
}

/// Samples of `u'(x + s)`, computed in one pass.
pub fn spectral_shifted_derivative(values: &[f64], period: f64, s: f64) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = forward(values);
    let base = 2.0 * PI / period;
    for (k, z) in c.iter_mut().enumerate() {
        match wavenumber(k, n) {
            Some(m) => {
                let ang = base * m * s;
                *z *= Complex64::new(ang.cos(), ang.sin()) * Complex64::new(0.0, base * m);
            }
            None => *z = Complex64::new(0.0, 0.0),
        }
    }
    backward_real(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
    }

    #[test]
    fn fft_matches_dft() {
        let data: Vec<Complex64> = (0..16).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut a = data.clone();
        fft(&mut a, false);
        let b = dft(&data, false);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
        fft(&mut a, true);
        for (x, y) in a.iter().zip(&data) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn quarter_period_shift_turns_sine_into_cosine() {
        for n in [64, 256, 30] {
            let xs = grid(n);
            let u: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
            let shifted = spectral_shift(&u, 2.0 * PI, PI / 2.0);
            for (x, v) in xs.iter().zip(&shifted) {
                assert!((v - x.cos()).abs() < 1e-10, "n = {n}");
            }
        }
    }

    #[test]
    fn derivative_of_trig_polynomial() {
        let xs = grid(128);
        let u: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + 0.5 * (7.0 * x).cos()).collect();
        let du = spectral_derivative(&u, 2.0 * PI);
        for (x, d) in xs.iter().zip(&du) {
            let exact = 3.0 * (3.0 * x).cos() - 3.5 * (7.0 * x).sin();
            assert!((d - exact).abs() < 1e-10);
        }
        let sd = spectral_shifted_derivative(&u, 2.0 * PI, 0.4);
        let dd = spectral_derivative(&spectral_shift(&u, 2.0 * PI, 0.4), 2.0 * PI);
        for (a, b) in sd.iter().zip(&dd) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
