//! Run-length encoding in column-major scan order.
//!
//! Runs alternate zero, one, zero, ... starting with a (possibly empty) run
//! of zeros, which is the layout used by COCO-style annotation files. The
//! compressed string form of those files is supported as well.

use serde::{Deserialize, Serialize};

use super::{BitMask, MaskError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl RleMask {
    /// Validating constructor.
    pub fn new(width: u32, height: u32, counts: Vec<u32>) -> Result<Self, MaskError> {
        let rle = Self { width, height, counts };
        rle.validate()?;
        Ok(rle)
    }

    /// Builds an RLE from counts that may contain interior zero runs,
    /// merging them away. The pixel total must still match.
    pub fn normalized(width: u32, height: u32, counts: &[u32]) -> Result<Self, MaskError> {
        let mut out: Vec<u32> = Vec::with_capacity(counts.len());
        // parity == false means the next run pushed is a zero-run.
        let mut parity = false;
        for &c in counts {
            if c == 0 && !out.is_empty() {
                parity = !parity;
                continue;
            }
            let run_is_one = out.len() % 2 == 1;
            if out.is_empty() || run_is_one == parity {
                out.push(c);
            } else {
                let last = out.last_mut().expect("non-empty");
                *last = last.checked_add(c).ok_or(MaskError::Overflow)?;
            }
            parity = !parity;
        }
        if out.is_empty() {
            out.push(0);
        }
        Self::new(width, height, out)
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        if self.width == 0 || self.height == 0 {
            return Err(MaskError::ZeroDimension {
                width: self.width,
                height: self.height,
            });
        }
        let expected = self.width as u64 * self.height as u64;
        let total: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if total != expected {
            return Err(MaskError::MalformedRle(format!(
                "run lengths sum to {total}, expected {expected} for {}x{}",
                self.width, self.height
            )));
        }
        if let Some(pos) = self.counts.iter().skip(1).position(|&c| c == 0) {
            return Err(MaskError::MalformedRle(format!(
                "zero-length run at position {}",
                pos + 1
            )));
        }
        Ok(())
    }

    pub fn encode(mask: &BitMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for col in 0..w {
            for row in 0..h {
                let v = mask.get(row, col);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Self {
            width: w,
            height: h,
            counts,
        }
    }

    pub fn decode(&self) -> Result<BitMask, MaskError> {
        self.validate()?;
        let h = self.height as usize;
        let w = self.width as usize;
        let mut mask = BitMask::new(self.width, self.height);
        let mut pos = 0usize;
        for (i, &c) in self.counts.iter().enumerate() {
            let c = c as usize;
            if i % 2 == 1 {
                for p in pos..pos + c {
                    let (col, row) = (p / h, p % h);
                    mask.set_index(row * w + col, true);
                }
            }
            pos += c;
        }
        Ok(mask)
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    /// COCO compressed-string form of the counts.
    pub fn to_coco_string(&self) -> String {
        let mut s = String::new();
        for (i, &c) in self.counts.iter().enumerate() {
            let mut x = c as i64;
            if i > 2 {
                x -= self.counts[i - 2] as i64;
            }
            loop {
                let mut ch = (x & 0x1f) as u8;
                x >>= 5;
                let more = if ch & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    ch |= 0x20;
                }
                s.push((ch + 48) as char);
                if !more {
                    break;
                }
            }
        }
        s
    }

    /// Parses the COCO compressed-string form.
    pub fn from_coco_string(width: u32, height: u32, s: &str) -> Result<Self, MaskError> {
        let counts = decode_coco_counts(s.as_bytes())?;
        Self::normalized(width, height, &counts)
    }
}

/// Decodes COCO's LEB128-like delta string into raw run lengths.
pub fn decode_coco_counts(bytes: &[u8]) -> Result<Vec<u32>, MaskError> {
    let bad = |msg: &str| MaskError::MalformedRle(format!("compressed counts: {msg}"));
    let mut counts: Vec<u32> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            let byte = *bytes.get(p).ok_or_else(|| bad("truncated run"))?;
            if !(48..48 + 64).contains(&byte) {
                return Err(bad("byte outside the encoding alphabet"));
            }
            if k >= 12 {
                return Err(bad("run length overflows"));
            }
            let c = (byte - 48) as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let m = counts.len();
        if m > 2 {
            x = x
                .checked_add(counts[m - 2] as i64)
                .ok_or_else(|| bad("run length overflows"))?;
        }
        let run = u32::try_from(x).map_err(|_| bad("negative or oversized run"))?;
        counts.push(run);
    }
    Ok(counts)
}
