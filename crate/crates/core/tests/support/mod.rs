//! Brute-force reference implementations. Deliberately slow and written
//! without reference to the library code.

#![allow(dead_code)]

use std::f64::consts::PI;

pub const RATE: f64 = 16_000.0;
pub const FRAME: usize = 400;
pub const HOP: usize = 160;
pub const NFFT: usize = 512;
pub const FILTERS: usize = 40;
pub const FLOOR: f64 = 1e-10;

/// Linear interpolation at `i * from / to`, indices computed in integers.
pub fn resample(input: &[f64], from: u64, to: u64) -> Vec<f64> {
    let out_len = ((input.len() as u64 * to) as f64 / from as f64).round() as u64;
    (0..out_len)
        .map(|i| {
            let num = i * from;
            let idx = (num / to) as usize;
            let frac = (num % to) as f64 / to as f64;
            let a = input[idx.min(input.len() - 1)];
            let b = input[(idx + 1).min(input.len() - 1)];
            a + (b - a) * frac
        })
        .collect()
}

/// `(re, im)` of the zero-padded DFT, every bin computed directly.
pub fn naive_dft(frame: &[f64], n: usize) -> Vec<(f64, f64)> {
    let twiddle: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / n as f64;
            (a.cos(), -a.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &x) in frame.iter().enumerate() {
                let (c, s) = twiddle[(k * t) % n];
                re += x * c;
                im += x * s;
            }
            (re, im)
        })
        .collect()
}

pub fn naive_power(frame: &[f64], n: usize) -> Vec<f64> {
    naive_dft(frame, n)[..n / 2 + 1]
        .iter()
        .map(|(re, im)| (re * re + im * im) / n as f64)
        .collect()
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Filter `m` as explicit rising / falling branches in Hz.
pub fn filter_weights(m: usize, filters: usize, n: usize, rate: f64) -> Vec<f64> {
    let step = mel(rate / 2.0) / (filters + 1) as f64;
    let lo = inv_mel(step * m as f64);
    let mid = inv_mel(step * (m + 1) as f64);
    let hi = inv_mel(step * (m + 2) as f64);
    (0..=n / 2)
        .map(|k| {
            let f = k as f64 * rate / n as f64;
            if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            }
        })
        .collect()
}

pub fn filter_areas(filters: usize, n: usize, rate: f64) -> Vec<f64> {
    (0..filters)
        .map(|m| filter_weights(m, filters, n, rate).iter().sum())
        .collect()
}

pub fn naive_dct(x: &[f64], keep: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..keep)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI / n * (i as f64 + 0.5) * k as f64).cos())
                .sum();
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            scale * s
        })
        .collect()
}

/// Per-frame cepstra of a 16 kHz signal with the default frame settings.
pub fn frame_cepstra(signal: &[f64]) -> Vec<Vec<f64>> {
    let bank: Vec<Vec<f64>> = (0..FILTERS)
        .map(|m| filter_weights(m, FILTERS, NFFT, RATE))
        .collect();
    let window: Vec<f64> = (0..FRAME)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (FRAME - 1) as f64).cos()))
        .collect();
    let mut emph = vec![0.0; signal.len()];
    for i in 0..signal.len() {
        emph[i] = if i == 0 {
            signal[0]
        } else {
            signal[i] - 0.97 * signal[i - 1]
        };
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + FRAME <= emph.len() {
        let frame: Vec<f64> = (0..FRAME).map(|i| emph[start + i] * window[i]).collect();
        let power = naive_power(&frame, NFFT);
        let logs: Vec<f64> = bank
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(&power).map(|(a, b)| a * b).sum();
                e.max(FLOOR).ln()
            })
            .collect();
        out.push(naive_dct(&logs, 40));
        start += HOP;
    }
    out
}

pub fn mfcc(signal: &[f64]) -> Vec<f64> {
    let frames = frame_cepstra(signal);
    let n = frames.len() as f64;
    (0..40)
        .map(|c| frames.iter().map(|f| f[c]).sum::<f64>() / n)
        .collect()
}

pub fn sine(freq: f64, amp: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / RATE).sin())
        .collect()
}

/// y = act(x W + b) per layer, W row-major `rows x cols`.
/// `(rows, cols, relu, weights, biases)`.
pub type Layer = (usize, usize, bool, Vec<f32>, Vec<f32>);

pub fn dense_forward(x: &[f64], layers: &[Layer]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for (rows, cols, relu, w, b) in layers {
        assert_eq!(cur.len(), *rows);
        let mut next = vec![0.0; *cols];
        for (j, out) in next.iter_mut().enumerate() {
            let mut acc = b[j] as f64;
            for (r, xr) in cur.iter().enumerate() {
                acc += xr * w[r * cols + j] as f64;
            }
            *out = if *relu { acc.max(0.0) } else { acc };
        }
        cur = next;
    }
    cur
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Best pair by exhaustive scan of all 15 unordered index pairs: the pair
/// with the largest probability sum, ties resolved lexicographically, then
/// ordered by probability with the lower index first on ties.
pub fn best_pair(p: &[f64; 6]) -> (usize, usize) {
    let mut best: Option<(usize, usize)> = None;
    for a in 0..6 {
        for b in a + 1..6 {
            let beats = |(x, y): (usize, usize)| {
                // a pair dominates if its members are the two largest
                let mine = [a, b];
                let theirs = [x, y];
                let rank = |set: [usize; 2]| {
                    let mut s = set.map(|i| (p[i], std::cmp::Reverse(i)));
                    s.sort_by(|u, v| v.partial_cmp(u).unwrap());
                    s
                };
                rank(mine) > rank(theirs)
            };
            if best.is_none_or(beats) {
                best = Some((a, b));
            }
        }
    }
    let (a, b) = best.unwrap();
    if p[b] > p[a] {
        (b, a)
    } else {
        (a, b)
    }
}
