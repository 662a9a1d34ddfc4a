use serde::{Deserialize, Serialize};

use super::{MaskError, SoftMask};

const WORD: usize = 64;

/// Dense binary mask, row-major, packed 64 pixels per word.
///
/// Pixel `(row, col)` lives at flat index `row * width + col`. Bits past
/// `width * height` in the last word are always zero, so word-wise
/// popcounts never need masking.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitMask({}x{}, area={})", self.width, self.height, self.area())?;
        if self.len() <= 256 {
            for row in 0..self.height {
                f.write_str("\n  ")?;
                for col in 0..self.width {
                    f.write_str(if self.get(row, col) { "#" } else { "." })?;
                }
            }
        }
        Ok(())
    }
}

impl BitMask {
    /// All-zero mask. Panics on a zero dimension.
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            words: vec![0; n.div_ceil(WORD)],
        }
    }

    pub fn try_new(width: u32, height: u32) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroDimension { width, height });
        }
        Ok(Self::new(width, height))
    }

    pub fn full(width: u32, height: u32) -> Self {
        let mut m = Self::new(width, height);
        m.words.iter_mut().for_each(|w| *w = u64::MAX);
        m.clear_tail();
        m
    }

    /// Builds a mask from a row-major boolean slice.
    pub fn from_bools(width: u32, height: u32, bits: &[bool]) -> Result<Self, MaskError> {
        let mut m = Self::try_new(width, height)?;
        if bits.len() != m.len() {
            return Err(MaskError::LengthMismatch {
                expected: m.len(),
                actual: bits.len(),
            });
        }
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            m.words[i / WORD] |= 1 << (i % WORD);
        }
        Ok(m)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for row in 0..height {
            for col in 0..width {
                if f(row, col) {
                    m.set(row, col, true);
                }
            }
        }
        m
    }

    /// Filled axis-aligned rectangle, clipped to the image.
    pub fn rect(width: u32, height: u32, x: i64, y: i64, w: i64, h: i64) -> Self {
        Self::from_fn(width, height, |row, col| {
            let (r, c) = (row as i64, col as i64);
            c >= x && c < x + w && r >= y && r < y + h
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Number of pixels, `width * height`.
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> bool {
        debug_assert!(row < self.height && col < self.width);
        self.get_index(row as usize * self.width as usize + col as usize)
    }

    /// Like [`get`](Self::get) but returns false outside the image.
    #[inline]
    pub fn get_signed(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && row < self.height as i64 && col < self.width as i64 && self.get(row as u32, col as u32)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        assert!(row < self.height && col < self.width, "pixel out of bounds");
        let i = row as usize * self.width as usize + col as usize;
        self.set_index(i, value);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: bool) {
        let bit = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= bit;
        } else {
            self.words[i / WORD] &= !bit;
        }
    }

    /// Count of set pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Row-major iterator over `(row, col)` of set pixels.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * WORD + tz;
                Some(((i / w) as u32, (i % w) as u32))
            })
        })
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get_index(i)).collect()
    }

    pub fn to_soft(&self) -> SoftMask {
        SoftMask::from_fn(self.width, self.height, |r, c| if self.get(r, c) { 1.0 } else { 0.0 })
    }

    #[cfg(test)]
    fn words(&self) -> &[u64] {
        &self.words
    }

    fn clear_tail(&mut self) {
        let rem = self.len() % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub(crate) fn check_same_dims(&self, other: &BitMask) -> Result<(), MaskError> {
        if self.dims() != other.dims() {
            return Err(MaskError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    fn zip_words(&self, other: &BitMask, f: impl Fn(u64, u64) -> u64) -> Result<BitMask, MaskError> {
        self.check_same_dims(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| f(*a, *b)).collect();
        Ok(BitMask {
            width: self.width,
            height: self.height,
            words,
        })
    }

    pub fn union(&self, other: &BitMask) -> Result<BitMask, MaskError> {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BitMask) -> Result<BitMask, MaskError> {
        self.zip_words(other, |a, b| a & b)
    }

    /// Pixels of `self` not in `other`.
    pub fn difference(&self, other: &BitMask) -> Result<BitMask, MaskError> {
        self.zip_words(other, |a, b| a & !b)
    }

    /// Pixels set in exactly one of the two masks.
    pub fn symmetric_difference(&self, other: &BitMask) -> Result<BitMask, MaskError> {
        self.zip_words(other, |a, b| a ^ b)
    }

    pub(crate) fn intersection_area(&self, other: &BitMask) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum()
    }

    pub(crate) fn union_area(&self, other: &BitMask) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as u64)
            .sum()
    }

    pub fn is_subset_of(&self, other: &BitMask) -> Result<bool, MaskError> {
        self.check_same_dims(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    /// Shifts every set pixel by `dx` columns and `dy` rows; pixels leaving
    /// the image are dropped.
    pub fn translate(&self, dx: i64, dy: i64) -> BitMask {
        let mut out = BitMask::new(self.width, self.height);
        for (row, col) in self.iter_set() {
            let (r, c) = (row as i64 + dy, col as i64 + dx);
            if r >= 0 && c >= 0 && r < self.height as i64 && c < self.width as i64 {
                out.set(r as u32, c as u32, true);
            }
        }
        out
    }

    /// Morphological dilation with a `(2r+1)²` square structuring element.
    pub fn dilate(&self, radius: u32) -> BitMask {
        if radius == 0 {
            return self.clone();
        }
        self.separable_square(radius, true)
    }

    /// Morphological erosion with a `(2r+1)²` square structuring element;
    /// pixels outside the image count as unset.
    pub fn erode(&self, radius: u32) -> BitMask {
        if radius == 0 {
            return self.clone();
        }
        self.separable_square(radius, false)
    }

    // Square structuring elements separate into a row pass and a column pass.
    fn separable_square(&self, radius: u32, dilate: bool) -> BitMask {
        let r = radius as i64;
        let rows = BitMask::from_fn(self.width, self.height, |row, col| {
            let c = col as i64;
            let mut it = (c - r..=c + r).map(|cc| self.get_signed(row as i64, cc));
            if dilate {
                it.any(|b| b)
            } else {
                it.all(|b| b)
            }
        });
        BitMask::from_fn(self.width, self.height, |row, col| {
            let rr = row as i64;
            let mut it = (rr - r..=rr + r).map(|x| rows.get_signed(x, col as i64));
            if dilate {
                it.any(|b| b)
            } else {
                it.all(|b| b)
            }
        })
    }
}

/// Serialized as its RLE form.
impl Serialize for BitMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        super::RleMask::encode(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rle = super::RleMask::deserialize(d)?;
        rle.decode().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_bits_stay_clear() {
        let m = BitMask::full(3, 3);
        assert_eq!(m.area(), 9);
        assert_eq!(m.words().len(), 1);
        assert_eq!(m.words()[0], 0x1ff);
    }

    #[test]
    fn set_ops_idempotence() {
        let a = BitMask::rect(6, 5, 1, 1, 3, 2);
        assert_eq!(a.union(&a).unwrap(), a);
        assert!(a.difference(&a).unwrap().is_empty());
        assert_eq!(a.intersection(&a).unwrap(), a);
    }

    #[test]
    fn set_ops_reject_mismatched_dims() {
        let a = BitMask::new(3, 3);
        let b = BitMask::new(3, 4);
        assert!(matches!(a.union(&b), Err(MaskError::DimensionMismatch { .. })));
        assert!(a.intersection(&b).is_err());
        assert!(a.difference(&b).is_err());
    }

    #[test]
    fn translate_examples() {
        let mut m = BitMask::new(4, 4);
        m.set(0, 0, true);
        assert_eq!(m.translate(0, 0), m);
        let t = m.translate(2, 1);
        assert_eq!(t.iter_set().collect::<Vec<_>>(), vec![(1, 2)]);
        assert!(m.translate(-1, 0).is_empty());
    }

    #[test]
    fn dilate_single_pixel_is_clipped_block() {
        let mut m = BitMask::new(5, 5);
        m.set(0, 0, true);
        let d = m.dilate(1);
        assert_eq!(d.area(), 4);
        m.set(0, 0, false);
        m.set(2, 2, true);
        assert_eq!(m.dilate(1), BitMask::rect(5, 5, 1, 1, 3, 3));
    }

    #[test]
    fn erode_removes_rim() {
        let m = BitMask::rect(8, 8, 1, 1, 5, 5);
        assert_eq!(m.erode(1), BitMask::rect(8, 8, 2, 2, 3, 3));
        assert!(BitMask::full(3, 3).erode(1).area() == 1);
    }

    #[test]
    fn iter_set_is_row_major() {
        let m = BitMask::from_fn(70, 2, |r, c| (r == 1 && c == 65) || (r == 0 && c == 3));
        assert_eq!(m.iter_set().collect::<Vec<_>>(), vec![(0, 3), (1, 65)]);
    }
}
