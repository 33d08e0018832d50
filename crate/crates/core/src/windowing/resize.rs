//! Separable bicubic resampling with the Keys kernel (a = -0.5).
//!
//! Pixel centres are aligned (`src = (dst + 0.5) * scale - 0.5`), indices
//! outside the source are clamped to the border, and the two passes stay in
//! f64 until the final round-half-up.

use super::{GrayscaleImage, Result, WindowingError};

const KEYS_A: f64 = -0.5;

pub fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Four source indices and weights per output coordinate.
fn contributions(in_len: usize, out_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = in_len as f64 / out_len as f64;
    let last = in_len as isize - 1;
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                idx[k] = (base - 1 + k as isize).clamp(0, last) as usize;
                w[k] = keys_kernel(t - (k as f64 - 1.0));
            }
            (idx, w)
        })
        .collect()
}

pub fn round_pixel(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn resize_bicubic(img: &GrayscaleImage, out_h: usize, out_w: usize) -> Result<GrayscaleImage> {
    if out_h == 0 || out_w == 0 {
        return Err(WindowingError::InvalidParam(format!("target size {out_h}x{out_w} must be positive")));
    }
    let (in_h, in_w) = (img.height(), img.width());
    if in_h < 2 || in_w < 2 {
        return Err(WindowingError::InvalidParam(format!("source {in_h}x{in_w} is smaller than 2x2")));
    }
    let src = img.pixels();

    let cols = contributions(in_w, out_w);
    let mut horizontal = vec![0.0f64; in_h * out_w];
    for y in 0..in_h {
        let row = &src[y * in_w..(y + 1) * in_w];
        let out = &mut horizontal[y * out_w..(y + 1) * out_w];
        for (o, (idx, w)) in out.iter_mut().zip(&cols) {
            *o = w[0] * row[idx[0]] as f64
                + w[1] * row[idx[1]] as f64
                + w[2] * row[idx[2]] as f64
                + w[3] * row[idx[3]] as f64;
        }
    }

    let rows = contributions(in_h, out_h);
    let mut pixels = vec![0u8; out_h * out_w];
    let mut acc = vec![0.0f64; out_w];
    for (y, (idx, w)) in rows.iter().enumerate() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for k in 0..4 {
            let line = &horizontal[idx[k] * out_w..(idx[k] + 1) * out_w];
            for (a, v) in acc.iter_mut().zip(line) {
                *a += w[k] * v;
            }
        }
        for (p, a) in pixels[y * out_w..(y + 1) * out_w].iter_mut().zip(&acc) {
            *p = round_pixel(*a);
        }
    }
    GrayscaleImage::new(out_h, out_w, pixels, img.start_sec)
}
