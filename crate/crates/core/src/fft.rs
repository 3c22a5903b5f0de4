//! Small complex FFT: iterative radix-2 for power-of-two lengths, direct DFT otherwise.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, inverse);
    } else {
        let out = dft(buf, inverse);
        buf.copy_from_slice(&out);
    }
    if inverse {
        let k = 1.0 / n as f64;
        buf.iter_mut().for_each(|v| *v *= k);
    }
}

fn dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| v * Complex64::from_polar(1.0, sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let step = Complex64::from_polar(1.0, sign * 2.0 * PI / len as f64);
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * w;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
                w *= step;
            }
        }
        len <<= 1;
    }
}

/// 2-D transform of a row-major `h x w` grid.
pub fn fft2(data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    for row in data.chunks_mut(w) {
        fft_in_place(row, inverse);
    }
    let mut col = Vec::with_capacity(h);
    for x in 0..w {
        col.clear();
        col.extend((0..h).map(|y| data[y * w + x]));
        fft_in_place(&mut col, inverse);
        for (y, v) in col.iter().enumerate() {
            data[y * w + x] = *v;
        }
    }
}
