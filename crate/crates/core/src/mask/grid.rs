use super::{BitMask, MaskError};

/// Real-valued row-major grid. Used for filter responses and distance fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatGrid {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl FloatGrid {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, values: Vec<f64>) -> Result<Self, MaskError> {
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(MaskError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self { width, height, values }
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

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.values[row as usize * self.width as usize + col as usize]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, v: f64) {
        self.values[row as usize * self.width as usize + col as usize] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Real-valued mask with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask(FloatGrid);

/// Default cut used to turn soft masks into binary ones.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

impl SoftMask {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroDimension { width, height });
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MaskError::OutOfRange(*bad));
        }
        FloatGrid::from_vec(width, height, values).map(SoftMask)
    }

    /// Values are clamped into `[0, 1]`; NaN becomes 0.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        SoftMask(FloatGrid::from_fn(width, height, |r, c| {
            let v = f(r, c);
            if v.is_nan() {
                0.0
            } else {
                v.clamp(0.0, 1.0)
            }
        }))
    }

    pub fn grid(&self) -> &FloatGrid {
        &self.0
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn height(&self) -> u32 {
        self.0.height
    }

    pub fn dims(&self) -> (u32, u32) {
        self.0.dims()
    }

    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.0.get(row, col)
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    /// Pixels with value `>= threshold` are set.
    pub fn binarize(&self, threshold: f64) -> BitMask {
        BitMask::from_fn(self.width(), self.height(), |r, c| self.get(r, c) >= threshold)
    }
}

impl From<&BitMask> for SoftMask {
    fn from(m: &BitMask) -> Self {
        m.to_soft()
    }
}
