//! Reference implementations of the training losses over soft masks,
//! locations and scalars, with analytic gradients where the loss has real
//! inputs.

pub mod check;

use serde::Serialize;
use thiserror::Error;

use crate::association::{ClassVector, Point};
use crate::mask::{
    distance_transform, laplacian, laplacian_signed, mask_iou, threshold_band, BitMask, FloatGrid, MaskError, SoftMask,
    BINARIZE_THRESHOLD,
};

/// Added to both sides of the dice ratio.
pub const DICE_EPS: f64 = 1e-5;
/// Weight of the thin boundary term.
pub const BOUNDARY_WEIGHT: f64 = 5.0;
/// Laplacian response above which a ground-truth pixel is on the boundary.
pub const BOUNDARY_RESPONSE: f64 = 1e-6;
/// Iteration from which the mask IoU term is used.
pub const MASKIOU_WARMUP: u64 = 5_000;
/// Iteration from which the thin boundary term is used.
pub const THIN_BOUNDARY_WARMUP: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("predicted and target IoU lists differ in length ({predicted} vs {target})")]
    LengthMismatch { predicted: usize, target: usize },
    #[error("mask IoU loss needs at least one sample")]
    NoSamples,
    #[error("IoU value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("degenerate boundary target: {0}")]
    DegenerateTarget(&'static str),
    #[error("loss component {name} is {value}, expected a finite non-negative value")]
    InvalidComponent { name: &'static str, value: f64 },
}

/// One offset regression sample: predicted offset `O`, class vector `C`,
/// predicted partner location `L` and its ground truth `L̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetSample {
    pub offset: Point,
    pub class: ClassVector,
    pub location: Point,
    pub target: Point,
}

/// Partial derivatives of [`offset_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetGradient {
    pub offset: Point,
    pub location: Point,
}

impl OffsetSample {
    /// `u = O ⊙ C`.
    pub fn u(&self) -> Point {
        let c = self.class.value();
        Point::new(self.offset.x * c, self.offset.y * c)
    }

    /// `v = L̃ − L`.
    pub fn v(&self) -> Point {
        self.target - self.location
    }
}

pub fn smooth_l1(r: f64) -> f64 {
    if r.abs() < 1.0 {
        0.5 * r * r
    } else {
        r.abs() - 0.5
    }
}

fn smooth_l1_grad(r: f64) -> f64 {
    r.clamp(-1.0, 1.0)
}

/// Smooth L1 between `u` and `v`, summed over x and y.
pub fn offset_loss(s: &OffsetSample) -> f64 {
    let r = s.u() - s.v();
    smooth_l1(r.x) + smooth_l1(r.y)
}

pub fn offset_loss_grad(s: &OffsetSample) -> OffsetGradient {
    let r = s.u() - s.v();
    let g = Point::new(smooth_l1_grad(r.x), smooth_l1_grad(r.y));
    let c = s.class.value();
    // r = O·C − L̃ + L
    OffsetGradient {
        offset: Point::new(g.x * c, g.y * c),
        location: g,
    }
}

fn dice_parts(pred: &[f64], gt: &BitMask) -> (f64, f64) {
    let mut inter = 0.0;
    let mut p2 = 0.0;
    for (i, &p) in pred.iter().enumerate() {
        if gt.get_index(i) {
            inter += p;
        }
        p2 += p * p;
    }
    let g2 = gt.area() as f64;
    (2.0 * inter + DICE_EPS, p2 + g2 + DICE_EPS)
}

fn check_dims(pred: (u32, u32), gt: (u32, u32)) -> Result<(), LossError> {
    if pred != gt {
        return Err(MaskError::DimensionMismatch { left: pred, right: gt }.into());
    }
    Ok(())
}

/// `1 − (2·Σpg + ε)/(Σp² + Σg² + ε)`.
pub fn dice_loss(pred: &SoftMask, gt: &BitMask) -> Result<f64, LossError> {
    check_dims(pred.dims(), gt.dims())?;
    let (num, den) = dice_parts(pred.values(), gt);
    Ok(1.0 - num / den)
}

/// Gradient of [`dice_loss`] with respect to each predicted value.
pub fn dice_loss_grad(pred: &SoftMask, gt: &BitMask) -> Result<FloatGrid, LossError> {
    check_dims(pred.dims(), gt.dims())?;
    let (num, den) = dice_parts(pred.values(), gt);
    let values = pred
        .values()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let g = if gt.get_index(i) { 1.0 } else { 0.0 };
            -(2.0 * g * den - num * 2.0 * p) / (den * den)
        })
        .collect();
    Ok(FloatGrid::from_vec(pred.width(), pred.height(), values)?)
}

fn check_ious(predicted: &[f64], target: &[f64]) -> Result<(), LossError> {
    if predicted.len() != target.len() {
        return Err(LossError::LengthMismatch {
            predicted: predicted.len(),
            target: target.len(),
        });
    }
    if predicted.is_empty() {
        return Err(LossError::NoSamples);
    }
    if let Some(&bad) = predicted.iter().chain(target).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(LossError::OutOfRange(bad));
    }
    Ok(())
}

/// Mean squared error between predicted and target mask IoUs.
pub fn maskiou_loss(predicted: &[f64], target: &[f64]) -> Result<f64, LossError> {
    check_ious(predicted, target)?;
    let sum: f64 = predicted.iter().zip(target).map(|(i, t)| (i - t) * (i - t)).sum();
    Ok(sum / predicted.len() as f64)
}

pub fn maskiou_loss_grad(predicted: &[f64], target: &[f64]) -> Result<Vec<f64>, LossError> {
    check_ious(predicted, target)?;
    let n = predicted.len() as f64;
    Ok(predicted.iter().zip(target).map(|(i, t)| 2.0 * (i - t) / n).collect())
}

/// Regression target of the mask IoU head.
pub fn maskiou_target(pred: &SoftMask, gt: &BitMask) -> Result<f64, LossError> {
    Ok(mask_iou(&pred.binarize(BINARIZE_THRESHOLD), gt)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BoundaryLoss {
    pub thin: f64,
    pub thick: f64,
}

impl BoundaryLoss {
    pub fn total(&self) -> f64 {
        self.thin + self.thick
    }
}

/// Ground-truth boundary pixels: nonzero Laplacian response.
pub fn boundary_pixels(gt: &BitMask) -> BitMask {
    let resp = laplacian(gt.to_soft().grid());
    BitMask::from_fn(gt.width(), gt.height(), |r, c| resp.get(r, c) > BOUNDARY_RESPONSE)
}

/// Target of the thick boundary map: pixels whose distance to the
/// ground-truth boundary is below half the maximum.
pub fn thick_boundary_target(gt: &BitMask) -> Result<BitMask, LossError> {
    if gt.is_empty() {
        return Err(LossError::DegenerateTarget("empty ground-truth mask"));
    }
    let boundary = boundary_pixels(gt);
    if boundary.is_empty() {
        return Err(LossError::DegenerateTarget("ground truth has no Laplacian response"));
    }
    let dist = distance_transform(&boundary)?;
    threshold_band(&dist).map_err(|_| LossError::DegenerateTarget("every pixel is on the boundary"))
}

fn thin_parts(pred: &FloatGrid, gt: &BitMask) -> Result<(FloatGrid, FloatGrid, f64), LossError> {
    if gt.is_empty() {
        return Err(LossError::DegenerateTarget("empty ground-truth mask"));
    }
    let target = laplacian(gt.to_soft().grid());
    let energy = target.sum();
    if !(energy > BOUNDARY_RESPONSE) {
        return Err(LossError::DegenerateTarget("ground truth has no Laplacian response"));
    }
    Ok((target, laplacian_signed(pred), energy))
}

/// `β · Σ| |l(m̃)| − |l(m)| | / Σ|l(m̃)|`.
pub fn thin_boundary_loss(pred: &SoftMask, gt: &BitMask) -> Result<f64, LossError> {
    check_dims(pred.dims(), gt.dims())?;
    let (target, resp, energy) = thin_parts(pred.grid(), gt)?;
    let num: f64 = target
        .values()
        .iter()
        .zip(resp.values())
        .map(|(a, l)| (a - l.abs()).abs())
        .sum();
    Ok(BOUNDARY_WEIGHT * num / energy)
}

/// Gradient of [`thin_boundary_loss`] with respect to the predicted mask,
/// taking the sign of zero as zero.
pub fn thin_boundary_grad(pred: &SoftMask, gt: &BitMask) -> Result<FloatGrid, LossError> {
    check_dims(pred.dims(), gt.dims())?;
    let (target, resp, energy) = thin_parts(pred.grid(), gt)?;
    let (w, h) = pred.dims();
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let s = FloatGrid::from_fn(w, h, |r, c| {
        let (a, l) = (target.get(r, c), resp.get(r, c));
        -sign(a - l.abs()) * sign(l)
    });
    let back = laplacian_signed(&s);
    let scale = BOUNDARY_WEIGHT / energy;
    Ok(FloatGrid::from_fn(w, h, |r, c| back.get(r, c) * scale))
}

/// Thin term on the predicted mask plus dice between the predicted thick
/// boundary map and the distance band around the ground-truth boundary.
pub fn boundary_loss(pred: &SoftMask, pred_thick_boundary: &SoftMask, gt: &BitMask) -> Result<BoundaryLoss, LossError> {
    check_dims(pred.dims(), gt.dims())?;
    check_dims(pred_thick_boundary.dims(), gt.dims())?;
    let thin = thin_boundary_loss(pred, gt)?;
    let band = thick_boundary_target(gt)?;
    let thick = dice_loss(pred_thick_boundary, &band)?;
    Ok(BoundaryLoss { thin, thick })
}

/// Loss terms that can be switched by the training schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Cls,
    Center,
    Box,
    Offset,
    Mask,
    AssociatedMask,
    MaskIou,
    ThinBoundary,
    ThickBoundary,
}

/// Whether `term` contributes at training `iteration` (counted from 0).
pub fn loss_active(term: LossTerm, iteration: u64) -> bool {
    match term {
        LossTerm::MaskIou => iteration >= MASKIOU_WARMUP,
        LossTerm::ThinBoundary => iteration >= THIN_BOUNDARY_WARMUP,
        _ => true,
    }
}

/// Inputs of [`compose_losses`]. `cls`, `center` and `bbox` come from the
/// detector and are taken as given.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub cls: f64,
    pub center: f64,
    pub bbox: f64,
    pub offset: f64,
    pub mask: f64,
    pub associated_mask: f64,
    pub maskiou: f64,
    pub boundary: BoundaryLoss,
    pub associated_boundary: BoundaryLoss,
}

impl LossParts {
    /// Copy with the terms inactive at `iteration` set to zero.
    pub fn scheduled(&self, iteration: u64) -> LossParts {
        let on = |t| if loss_active(t, iteration) { 1.0 } else { 0.0 };
        let thin = on(LossTerm::ThinBoundary);
        let mut p = *self;
        p.maskiou *= on(LossTerm::MaskIou);
        p.boundary.thin *= thin;
        p.associated_boundary.thin *= thin;
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionLoss {
    pub cls: f64,
    pub center: f64,
    #[serde(rename = "box")]
    pub bbox: f64,
    pub offset: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskLoss {
    pub mask: f64,
    pub associated: f64,
    pub maskiou: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryBreakdown {
    /// Thin terms of both mask outputs.
    pub thin: f64,
    /// Thick terms of both mask outputs.
    pub thick: f64,
    pub own: f64,
    pub associated: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub detection: DetectionLoss,
    pub mask: MaskLoss,
    pub boundary: BoundaryBreakdown,
    pub total: f64,
}

/// Sums the parts into detection, mask and boundary losses and their total.
pub fn compose_losses(p: &LossParts) -> Result<LossBreakdown, LossError> {
    let named = [
        ("cls", p.cls),
        ("center", p.center),
        ("box", p.bbox),
        ("offset", p.offset),
        ("mask", p.mask),
        ("associated_mask", p.associated_mask),
        ("maskiou", p.maskiou),
        ("boundary.thin", p.boundary.thin),
        ("boundary.thick", p.boundary.thick),
        ("associated_boundary.thin", p.associated_boundary.thin),
        ("associated_boundary.thick", p.associated_boundary.thick),
    ];
    if let Some(&(name, value)) = named.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
        return Err(LossError::InvalidComponent { name, value });
    }
    let detection = DetectionLoss {
        cls: p.cls,
        center: p.center,
        bbox: p.bbox,
        offset: p.offset,
        total: p.cls + p.center + p.bbox + p.offset,
    };
    let mask = MaskLoss {
        mask: p.mask,
        associated: p.associated_mask,
        maskiou: p.maskiou,
        total: p.mask + p.associated_mask + p.maskiou,
    };
    let own = p.boundary.total();
    let associated = p.associated_boundary.total();
    let boundary = BoundaryBreakdown {
        thin: p.boundary.thin + p.associated_boundary.thin,
        thick: p.boundary.thick + p.associated_boundary.thick,
        own,
        associated,
        total: own + associated,
    };
    Ok(LossBreakdown {
        detection,
        mask,
        boundary,
        total: detection.total + mask.total + boundary.total,
    })
}
