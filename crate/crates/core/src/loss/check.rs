//! Runtime self-checks of the loss kernels: analytic gradients against
//! central finite differences, and the boundary loss against a second,
//! deliberately naive implementation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::*;

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-3;
pub const ORACLE_TOL: f64 = 1e-9;
const TRIALS: usize = 20;
const SIDE: u32 = 16;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed error (relative for gradients, absolute otherwise).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Relative error with an absolute floor so that zero gradients compare
/// absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

fn outcome(name: &'static str, worst: f64, tolerance: f64, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= tolerance,
        worst,
        tolerance,
        detail,
    }
}

fn random_soft(rng: &mut ChaCha8Rng, w: u32, h: u32) -> SoftMask {
    SoftMask::from_fn(w, h, |_, _| rng.gen_range(0.05..0.95))
}

fn random_gt(rng: &mut ChaCha8Rng, w: u32, h: u32) -> BitMask {
    let mut m = BitMask::new(w, h);
    for _ in 0..2 {
        let rw = rng.gen_range(2..w / 2);
        let rh = rng.gen_range(2..h / 2);
        let x = rng.gen_range(1..w - rw);
        let y = rng.gen_range(1..h - rh);
        m = m
            .union(&BitMask::rect(w, h, x as i64, y as i64, rw as i64, rh as i64))
            .expect("same dims");
    }
    m
}

fn with_value(m: &SoftMask, i: usize, v: f64) -> SoftMask {
    let mut values = m.values().to_vec();
    values[i] = v;
    SoftMask::new(m.width(), m.height(), values).expect("perturbation stays in [0, 1]")
}

fn check_offset(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let p = |rng: &mut ChaCha8Rng| Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let s = OffsetSample {
            offset: p(rng),
            class: if rng.gen_bool(0.5) {
                ClassVector::OBJECT
            } else {
                ClassVector::SHADOW
            },
            location: p(rng),
            target: p(rng),
        };
        let g = offset_loss_grad(&s);
        let pairs = [
            (
                g.offset.x,
                central(
                    |x| {
                        offset_loss(&OffsetSample {
                            offset: Point::new(x, s.offset.y),
                            ..s
                        })
                    },
                    s.offset.x,
                ),
            ),
            (
                g.offset.y,
                central(
                    |y| {
                        offset_loss(&OffsetSample {
                            offset: Point::new(s.offset.x, y),
                            ..s
                        })
                    },
                    s.offset.y,
                ),
            ),
            (
                g.location.x,
                central(
                    |x| {
                        offset_loss(&OffsetSample {
                            location: Point::new(x, s.location.y),
                            ..s
                        })
                    },
                    s.location.x,
                ),
            ),
            (
                g.location.y,
                central(
                    |y| {
                        offset_loss(&OffsetSample {
                            location: Point::new(s.location.x, y),
                            ..s
                        })
                    },
                    s.location.y,
                ),
            ),
        ];
        for (a, n) in pairs {
            worst = worst.max(relative_error(a, n));
        }
    }
    outcome(
        "offset gradient",
        worst,
        FD_REL_TOL,
        format!("{TRIALS} samples, 4 partials each"),
    )
}

fn check_dice(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS / 4 {
        let pred = random_soft(rng, SIDE, SIDE);
        let gt = random_gt(rng, SIDE, SIDE);
        let grad = dice_loss_grad(&pred, &gt).expect("same dims");
        for (i, &p) in pred.values().iter().enumerate() {
            let n = central(|v| dice_loss(&with_value(&pred, i, v), &gt).expect("same dims"), p);
            worst = worst.max(relative_error(grad.values()[i], n));
        }
    }
    outcome(
        "dice gradient",
        worst,
        FD_REL_TOL,
        format!("{} masks of {SIDE}x{SIDE}", TRIALS / 4),
    )
}

fn check_maskiou(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let n = rng.gen_range(1..8);
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        let target: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let grad = maskiou_loss_grad(&pred, &target).expect("valid");
        for i in 0..n {
            let numeric = central(
                |v| {
                    let mut p = pred.clone();
                    p[i] = v;
                    maskiou_loss(&p, &target).expect("valid")
                },
                pred[i],
            );
            worst = worst.max(relative_error(grad[i], numeric));
        }
    }
    outcome("maskiou gradient", worst, FD_REL_TOL, format!("{TRIALS} lists"))
}

/// Coordinates whose 5×5 neighbourhood holds a response within reach of a
/// kink of the absolute values are skipped: the loss is not differentiable
/// there.
fn check_thin_boundary(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let margin = 4.0 * (crate::mask::LAPLACIAN_CENTER * FD_STEP);
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0usize, 0usize);
    for _ in 0..TRIALS / 4 {
        let pred = random_soft(rng, SIDE, SIDE);
        let gt = random_gt(rng, SIDE, SIDE);
        let target = laplacian(gt.to_soft().grid());
        let resp = laplacian_signed(pred.grid());
        let grad = thin_boundary_grad(&pred, &gt).expect("non-degenerate");
        for row in 0..SIDE {
            for col in 0..SIDE {
                let near_kink = neighbourhood(row, col).any(|(r, c)| {
                    let (a, l) = (target.get(r, c), resp.get(r, c));
                    l.abs() < margin || (l.abs() - a).abs() < margin
                });
                if near_kink {
                    skipped += 1;
                    continue;
                }
                checked += 1;
                let i = (row * SIDE + col) as usize;
                let n = central(
                    |v| thin_boundary_loss(&with_value(&pred, i, v), &gt).expect("non-degenerate"),
                    pred.values()[i],
                );
                worst = worst.max(relative_error(grad.get(row, col), n));
            }
        }
    }
    outcome(
        "thin boundary gradient",
        worst,
        FD_REL_TOL,
        format!("{checked} coordinates, {skipped} near a kink skipped"),
    )
}

fn neighbourhood(row: u32, col: u32) -> impl Iterator<Item = (u32, u32)> {
    let rows = row.saturating_sub(2)..(row + 3).min(SIDE);
    rows.flat_map(move |r| (col.saturating_sub(2)..(col + 3).min(SIDE)).map(move |c| (r, c)))
}

/// Boundary loss evaluated directly from the definitions: explicit 5×5
/// convolution, brute-force nearest-boundary distances and the dice ratio
/// written out.
pub fn reference_boundary_loss(pred: &[f64], thick: &[f64], gt: &[bool], w: usize, h: usize) -> (f64, f64) {
    let conv = |x: &dyn Fn(usize) -> f64, row: usize, col: usize| {
        let mut acc = 0.0;
        for r in row as i64 - 2..=row as i64 + 2 {
            for c in col as i64 - 2..=col as i64 + 2 {
                if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
                    continue;
                }
                let k = if r == row as i64 && c == col as i64 { 24.0 } else { -1.0 };
                acc += k * x(r as usize * w + c as usize);
            }
        }
        acc
    };
    let g = |i: usize| if gt[i] { 1.0 } else { 0.0 };
    let p = |i: usize| pred[i];
    let mut num = 0.0;
    let mut den = 0.0;
    let mut boundary = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let a = conv(&g, row, col).abs();
            let l = conv(&p, row, col).abs();
            num += (a - l).abs();
            den += a;
            if a > 1e-6 {
                boundary.push((row as f64, col as f64));
            }
        }
    }
    let thin = 5.0 * num / den;

    let mut dist = vec![f64::INFINITY; w * h];
    for row in 0..h {
        for col in 0..w {
            for &(br, bc) in &boundary {
                let d = ((row as f64 - br).powi(2) + (col as f64 - bc).powi(2)).sqrt();
                if d < dist[row * w + col] {
                    dist[row * w + col] = d;
                }
            }
        }
    }
    let max = dist.iter().cloned().fold(0.0, f64::max);
    let band: Vec<bool> = dist.iter().map(|d| d / max < 0.5).collect();
    let mut inter = 0.0;
    let mut p2 = 0.0;
    let mut g2 = 0.0;
    for i in 0..w * h {
        let b = if band[i] { 1.0 } else { 0.0 };
        inter += thick[i] * b;
        p2 += thick[i] * thick[i];
        g2 += b * b;
    }
    let thick_loss = 1.0 - (2.0 * inter + 1e-5) / (p2 + g2 + 1e-5);
    (thin, thick_loss)
}

fn check_boundary_oracle(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS / 4 {
        let pred = random_soft(rng, SIDE, SIDE);
        let thick = random_soft(rng, SIDE, SIDE);
        let gt = random_gt(rng, SIDE, SIDE);
        let got = boundary_loss(&pred, &thick, &gt).expect("non-degenerate");
        let (thin, thick_ref) = reference_boundary_loss(
            pred.values(),
            thick.values(),
            &gt.to_bools(),
            SIDE as usize,
            SIDE as usize,
        );
        worst = worst.max((got.thin - thin).abs()).max((got.thick - thick_ref).abs());
    }
    outcome(
        "boundary loss vs reference",
        worst,
        ORACLE_TOL,
        format!("{} random {SIDE}x{SIDE} cases", TRIALS / 4),
    )
}

/// Runs every check with a deterministic stream for `seed`.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check_offset(&mut rng),
        check_dice(&mut rng),
        check_maskiou(&mut rng),
        check_thin_boundary(&mut rng),
        check_boundary_oracle(&mut rng),
    ]
}
