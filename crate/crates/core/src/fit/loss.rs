//! Image losses with gradients, and evaluation metrics.

use crate::buffer::Image;
use crate::error::Result;

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const MASK_LOG_EPS: f64 = 1e-6;

/// Mean absolute difference over all pixels and channels.
pub fn l1_loss(a: &Image, b: &Image) -> Result<f64> {
    a.check_shape(b)?;
    if a.data.is_empty() {
        return Ok(0.0);
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data.len() as f64)
}

/// L1 loss and its gradient with respect to `a`.
pub fn l1_loss_grad(a: &Image, b: &Image) -> Result<(f64, Image)> {
    let loss = l1_loss(a, b)?;
    let n = a.data.len().max(1) as f64;
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = x - y;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss, Image::from_data(a.width, a.height, a.channels, data)?))
}

fn gaussian_taps() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut taps = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - SSIM_RADIUS as f64;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| t / sum)
}

/// Separable Gaussian blur of one plane with zero padding, output the same size.
fn blur(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = x as isize + k as isize - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += t * plane[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yy = y as isize + k as isize - r;
                if yy >= 0 && (yy as usize) < h {
                    acc += t * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn plane(img: &Image, c: usize) -> Vec<f64> {
    img.data.iter().skip(c).step_by(img.channels).copied().collect()
}

/// Mean SSIM, and optionally its gradient with respect to `a`.
fn ssim_impl(a: &Image, b: &Image, want_grad: bool) -> Result<(f64, Option<Image>)> {
    a.check_shape(b)?;
    let (w, h, ch) = (a.width, a.height, a.channels);
    let n = (w * h * ch) as f64;
    if n == 0.0 {
        return Ok((1.0, want_grad.then(|| a.clone())));
    }
    let taps = gaussian_taps();
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::new(w, h, ch));
    for c in 0..ch {
        let x = plane(a, c);
        let y = plane(b, c);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = blur(&x, w, h, &taps);
        let my = blur(&y, w, h, &taps);
        let exx = blur(&xx, w, h, &taps);
        let eyy = blur(&yy, w, h, &taps);
        let exy = blur(&xy, w, h, &taps);
        let mut d_mx = vec![0.0; w * h];
        let mut d_exx = vec![0.0; w * h];
        let mut d_exy = vec![0.0; w * h];
        for i in 0..w * h {
            let (ux, uy) = (mx[i], my[i]);
            let a1 = 2.0 * ux * uy + SSIM_C1;
            let a2 = 2.0 * (exy[i] - ux * uy) + SSIM_C2;
            let b1 = ux * ux + uy * uy + SSIM_C1;
            let b2 = (exx[i] - ux * ux) + (eyy[i] - uy * uy) + SSIM_C2;
            let (r1, r2) = (a1 / b1, a2 / b2);
            let s = r1 * r2;
            total += s;
            if want_grad {
                // arranged so identical inputs give an exactly zero gradient
                d_mx[i] = 2.0 * uy * (r2 / b1 - r1 / b2) - 2.0 * ux * s * (1.0 / b1 - 1.0 / b2);
                d_exx[i] = -s / b2;
                d_exy[i] = 2.0 * r1 / b2;
            }
        }
        if let Some(g) = grad.as_mut() {
            // the blur is self-adjoint for a symmetric kernel with zero padding
            let g_mx = blur(&d_mx, w, h, &taps);
            let g_exx = blur(&d_exx, w, h, &taps);
            let g_exy = blur(&d_exy, w, h, &taps);
            for i in 0..w * h {
                g.data[i * ch + c] = (g_mx[i] + 2.0 * x[i] * g_exx[i] + y[i] * g_exy[i]) / n;
            }
        }
    }
    Ok((total / n, grad))
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5).
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    Ok(ssim_impl(a, b, false)?.0)
}

/// `1 − SSIM`.
pub fn ssim_loss(a: &Image, b: &Image) -> Result<f64> {
    Ok(1.0 - ssim(a, b)?)
}

/// `1 − SSIM` and its gradient with respect to `a`.
pub fn ssim_loss_grad(a: &Image, b: &Image) -> Result<(f64, Image)> {
    let (s, g) = ssim_impl(a, b, true)?;
    let mut g = g.expect("gradient requested");
    g.data.iter_mut().for_each(|v| *v = -*v);
    Ok((1.0 - s, g))
}

/// Binary cross-entropy between accumulated alpha and an object mask.
pub fn mask_entropy_loss(alpha: &Image, mask: &Image) -> Result<f64> {
    Ok(mask_entropy_impl(alpha, mask, false)?.0)
}

/// Mask cross-entropy and its gradient with respect to `alpha`.
pub fn mask_entropy_loss_grad(alpha: &Image, mask: &Image) -> Result<(f64, Image)> {
    let (l, g) = mask_entropy_impl(alpha, mask, true)?;
    Ok((l, g.expect("gradient requested")))
}

fn mask_entropy_impl(alpha: &Image, mask: &Image, want_grad: bool) -> Result<(f64, Option<Image>)> {
    alpha.check_shape(mask)?;
    let n = alpha.data.len().max(1) as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::new(alpha.width, alpha.height, alpha.channels));
    for (i, (&b, &m)) in alpha.data.iter().zip(&mask.data).enumerate() {
        let p = b.clamp(MASK_LOG_EPS, 1.0 - MASK_LOG_EPS);
        total += -m * p.ln() - (1.0 - m) * (1.0 - p).ln();
        if let Some(g) = grad.as_mut() {
            if b > MASK_LOG_EPS && b < 1.0 - MASK_LOG_EPS {
                g.data[i] = (-m / p + (1.0 - m) / (1.0 - p)) / n;
            }
        }
    }
    Ok((total / n, grad))
}

/// Mean per-pixel L2 distance between normal maps over pixels whose coverage
/// exceeds `threshold`. Zero when nothing is covered.
pub fn normal_consistency_loss(normal: &Image, target: &Image, alpha: &Image, threshold: f64) -> Result<f64> {
    Ok(normal_impl(normal, target, alpha, threshold, false)?.0)
}

/// Normal consistency and its gradient with respect to `normal`; `target` is
/// treated as a constant.
pub fn normal_consistency_loss_grad(
    normal: &Image,
    target: &Image,
    alpha: &Image,
    threshold: f64,
) -> Result<(f64, Image)> {
    let (l, g) = normal_impl(normal, target, alpha, threshold, true)?;
    Ok((l, g.expect("gradient requested")))
}

fn normal_impl(
    normal: &Image,
    target: &Image,
    alpha: &Image,
    threshold: f64,
    want_grad: bool,
) -> Result<(f64, Option<Image>)> {
    normal.check_shape(target)?;
    if alpha.width != normal.width || alpha.height != normal.height || alpha.channels != 1 {
        return Err(crate::Error::DimensionMismatch {
            expected: format!("{}x{}x1", normal.width, normal.height),
            got: alpha.shape_string(),
        });
    }
    let ch = normal.channels;
    let covered: Vec<usize> = (0..alpha.data.len()).filter(|&i| alpha.data[i] > threshold).collect();
    let mut grad = want_grad.then(|| Image::new(normal.width, normal.height, ch));
    if covered.is_empty() {
        return Ok((0.0, grad));
    }
    let n = covered.len() as f64;
    let mut total = 0.0;
    for &i in &covered {
        let d: Vec<f64> = (0..ch).map(|c| normal.data[i * ch + c] - target.data[i * ch + c]).collect();
        let len = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        total += len;
        if let Some(g) = grad.as_mut() {
            if len > 0.0 {
                for c in 0..ch {
                    g.data[i * ch + c] = d[c] / (len * n);
                }
            }
        }
    }
    Ok((total / n, grad))
}

/// Peak signal-to-noise ratio in decibels for images in `[0, 1]`;
/// `f64::INFINITY` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.check_shape(b)?;
    let n = a.data.len().max(1) as f64;
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}
