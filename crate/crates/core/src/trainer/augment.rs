//! Training-time image augmentation.
//!
//! Order is fixed: crop to 95% of each side at a random offset, resize back
//! (bilinear), rotate by a uniform angle in [−5°, +5°] (nearest-neighbor —
//! appropriate at this resolution), then per-channel brightness/contrast and
//! channel-mix saturation jitter, clamped to [0, 1]. Augmentation touches
//! images only; actions, proprioception, and text labels are never altered.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::world::render::Image;

pub const CROP_FRAC: f64 = 0.95;
pub const MAX_ROT_DEG: f64 = 5.0;
pub const BRIGHTNESS_JITTER: f64 = 0.3;
pub const CONTRAST_JITTER: f64 = 0.4;
pub const SATURATION_JITTER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Linear crop fraction (side of the crop window / side of the image).
    pub crop_frac: f64,
    /// Crop-window placement in [0, 1] of the available slack.
    pub off_x: f64,
    pub off_y: f64,
    pub angle_deg: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl AugmentParams {
    /// Parameters that reproduce the input exactly.
    pub fn identity() -> Self {
        AugmentParams {
            crop_frac: 1.0,
            off_x: 0.0,
            off_y: 0.0,
            angle_deg: 0.0,
            brightness: 1.0,
            contrast: 1.0,
            saturation: 1.0,
        }
    }

    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        AugmentParams {
            crop_frac: CROP_FRAC,
            off_x: rng.gen_range(0.0..=1.0),
            off_y: rng.gen_range(0.0..=1.0),
            angle_deg: rng.gen_range(-MAX_ROT_DEG..=MAX_ROT_DEG),
            brightness: rng.gen_range(1.0 - BRIGHTNESS_JITTER..=1.0 + BRIGHTNESS_JITTER),
            contrast: rng.gen_range(1.0 - CONTRAST_JITTER..=1.0 + CONTRAST_JITTER),
            saturation: rng.gen_range(1.0 - SATURATION_JITTER..=1.0 + SATURATION_JITTER),
        }
    }
}

fn bilinear(img: &Image, y: f64, x: f64, c: usize) -> f32 {
    let ymax = (img.h - 1) as f64;
    let xmax = (img.w - 1) as f64;
    let y = y.clamp(0.0, ymax);
    let x = x.clamp(0.0, xmax);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(img.h - 1);
    let x1 = (x0 + 1).min(img.w - 1);
    let fy = (y - y0 as f64) as f32;
    let fx = (x - x0 as f64) as f32;
    let p00 = img.get(y0, x0)[c];
    let p01 = img.get(y0, x1)[c];
    let p10 = img.get(y1, x0)[c];
    let p11 = img.get(y1, x1)[c];
    p00 * (1.0 - fy) * (1.0 - fx) + p01 * (1.0 - fy) * fx + p10 * fy * (1.0 - fx) + p11 * fy * fx
}

pub fn augment_with(img: &Image, p: &AugmentParams) -> Image {
    let h = img.h;
    let w = img.w;

    // 1. Crop and resize back. Window side = crop_frac*side; origin chosen
    //    within the slack. Destination pixel i samples the window at the
    //    proportional position so crop_frac=1, offset 0 is the identity.
    let mut cropped = Image::filled(h, w, [0.0; 3]);
    let win_h = p.crop_frac * h as f64;
    let win_w = p.crop_frac * w as f64;
    let oy = p.off_y * (h as f64 - win_h);
    let ox = p.off_x * (w as f64 - win_w);
    for y in 0..h {
        for x in 0..w {
            let sy = oy + (y as f64 + 0.5) / h as f64 * win_h - 0.5;
            let sx = ox + (x as f64 + 0.5) / w as f64 * win_w - 0.5;
            let mut px = [0.0f32; 3];
            for (c, v) in px.iter_mut().enumerate() {
                *v = bilinear(img, sy, sx, c);
            }
            cropped.set(y, x, px);
        }
    }

    // 2. Rotate about the image center, nearest-neighbor, edge-clamped.
    let mut rotated = Image::filled(h, w, [0.0; 3]);
    let theta = p.angle_deg.to_radians();
    let (sin_t, cos_t) = theta.sin_cos();
    let cy = h as f64 / 2.0;
    let cx = w as f64 / 2.0;
    for y in 0..h {
        for x in 0..w {
            let py = y as f64 + 0.5 - cy;
            let px = x as f64 + 0.5 - cx;
            let sy = -sin_t * px + cos_t * py + cy - 0.5;
            let sx = cos_t * px + sin_t * py + cx - 0.5;
            let iy = (sy.round() as i64).clamp(0, h as i64 - 1) as usize;
            let ix = (sx.round() as i64).clamp(0, w as i64 - 1) as usize;
            rotated.set(y, x, cropped.get(iy, ix));
        }
    }

    // 3. Color jitter: brightness scale, per-channel affine contrast about
    //    the channel mean, then saturation mix toward per-pixel gray.
    let mut means = [0.0f64; 3];
    for px in rotated.data.chunks_exact(3) {
        for c in 0..3 {
            means[c] += px[c] as f64;
        }
    }
    let n_px = (h * w) as f64;
    for m in means.iter_mut() {
        *m /= n_px;
    }
    let mut out = rotated.clone();
    for px in out.data.chunks_exact_mut(3) {
        let mut v = [0.0f64; 3];
        for c in 0..3 {
            v[c] = px[c] as f64 * p.brightness;
        }
        for c in 0..3 {
            let m = means[c] * p.brightness;
            v[c] = m + (v[c] - m) * p.contrast;
        }
        let gray = (v[0] + v[1] + v[2]) / 3.0;
        for c in 0..3 {
            v[c] = gray + (v[c] - gray) * p.saturation;
            px[c] = v[c].clamp(0.0, 1.0) as f32;
        }
    }
    out
}

/// Sample parameters from the configured ranges and apply them.
pub fn augment_image(img: &Image, rng: &mut ChaCha8Rng) -> Image {
    augment_with(img, &AugmentParams::sample(rng))
}
