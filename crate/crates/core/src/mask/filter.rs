//! Laplacian edge response and exact Euclidean distance transform.

use super::{BitMask, FloatGrid, MaskError};

/// Side of the Laplacian kernel: all taps −1 with +24 at the center.
pub const LAPLACIAN_SIZE: u32 = 5;
pub const LAPLACIAN_CENTER: f64 = 24.0;

/// Absolute response of the 5×5 Laplacian, zero padded.
pub fn laplacian(input: &FloatGrid) -> FloatGrid {
    let signed = laplacian_signed(input);
    let (w, h) = signed.dims();
    FloatGrid::from_fn(w, h, |row, col| signed.get(row, col).abs())
}

/// Signed response of the 5×5 Laplacian, zero padded.
///
/// The kernel is `25·δ − box5`, so the response is computed as
/// `25·x − Σ_{5×5} x` with a separable box sum. The kernel is symmetric,
/// so this is also its own adjoint.
pub fn laplacian_signed(input: &FloatGrid) -> FloatGrid {
    let (w, h) = input.dims();
    let r = (LAPLACIAN_SIZE / 2) as i64;
    let at = |row: i64, col: i64| -> f64 {
        if row < 0 || col < 0 || row >= h as i64 || col >= w as i64 {
            0.0
        } else {
            input.get(row as u32, col as u32)
        }
    };
    let rows = FloatGrid::from_fn(w, h, |row, col| {
        (col as i64 - r..=col as i64 + r).map(|c| at(row as i64, c)).sum()
    });
    let row_at = |row: i64, col: u32| -> f64 {
        if row < 0 || row >= h as i64 {
            0.0
        } else {
            rows.get(row as u32, col)
        }
    };
    FloatGrid::from_fn(w, h, |row, col| {
        let boxed: f64 = (row as i64 - r..=row as i64 + r).map(|rr| row_at(rr, col)).sum();
        let center = input.get(row, col);
        (LAPLACIAN_CENTER + 1.0) * center - boxed
    })
}

/// Exact Euclidean distance from every pixel to the nearest set pixel of
/// `sites`.
///
/// Two-pass lower-envelope-of-parabolas algorithm (Felzenszwalb and
/// Huttenlocher): squared distances are integers and stay exact in f64.
pub fn distance_transform(sites: &BitMask) -> Result<FloatGrid, MaskError> {
    if sites.is_empty() {
        return Err(MaskError::EmptyMask("distance transform needs at least one site"));
    }
    let (w, h) = (sites.width() as usize, sites.height() as usize);
    let mut sq = vec![FAR; w * h];
    for (row, col) in sites.iter_set() {
        sq[row as usize * w + col as usize] = 0.0;
    }

    let n = w.max(h);
    let mut scratch = Envelope::with_capacity(n);
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];

    for col in 0..w {
        for row in 0..h {
            line[row] = sq[row * w + col];
        }
        scratch.transform(&line[..h], &mut out[..h]);
        for row in 0..h {
            sq[row * w + col] = out[row];
        }
    }
    for row in 0..h {
        line[..w].copy_from_slice(&sq[row * w..(row + 1) * w]);
        scratch.transform(&line[..w], &mut out[..w]);
        sq[row * w..(row + 1) * w].copy_from_slice(&out[..w]);
    }

    let values = sq.into_iter().map(f64::sqrt).collect();
    FloatGrid::from_vec(sites.width(), sites.height(), values)
}

const FAR: f64 = 1e20;

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    /// 1-D squared distance transform of sampled function `f`.
    fn transform(&mut self, f: &[f64], d: &mut [f64]) {
        let n = f.len();
        let (v, z) = (&mut self.v, &mut self.z);
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        let intersect = |q: usize, p: usize| -> f64 {
            let (qf, pf) = (q as f64, p as f64);
            ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
        };
        for q in 1..n {
            let mut s = intersect(q, v[k]);
            while s <= z[k] {
                k -= 1;
                s = intersect(q, v[k]);
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for (q, out) in d.iter_mut().enumerate().take(n) {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let diff = q as f64 - v[k] as f64;
            *out = diff * diff + f[v[k]];
        }
    }
}

/// Pixels whose max-normalized distance is below one half.
pub fn threshold_band(distance: &FloatGrid) -> Result<BitMask, MaskError> {
    let max = distance.max();
    if !(max > 0.0) {
        return Err(MaskError::DegenerateField);
    }
    Ok(BitMask::from_fn(distance.width(), distance.height(), |r, c| {
        distance.get(r, c) / max < 0.5
    }))
}
