//! sRGB <-> CIE-Lab conversion under the D65 white point, plus the affine
//! [0, 1] normalization of the chromaticity planes used by the transfer
//! pipeline.

use super::{ImagingError, RasterImage};

const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];
const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// Converts one sRGB byte triple to (L, a, b).
pub fn srgb_to_lab(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let rl = srgb_to_linear(r as f64 / 255.0);
    let gl = srgb_to_linear(g as f64 / 255.0);
    let bl = srgb_to_linear(b as f64 / 255.0);

    let x = 0.412_456_4 * rl + 0.357_576_1 * gl + 0.180_437_5 * bl;
    let y = 0.212_672_9 * rl + 0.715_152_2 * gl + 0.072_175_0 * bl;
    let z = 0.019_333_9 * rl + 0.119_192_0 * gl + 0.950_304_1 * bl;

    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);

    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Converts one (L, a, b) triple back to sRGB bytes, clamping to gamut.
pub fn lab_to_srgb(l: f64, a: f64, b: f64) -> (u8, u8, u8) {
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;

    let x = WHITE[0] * lab_f_inv(fx);
    let y = WHITE[1] * lab_f_inv(fy);
    let z = WHITE[2] * lab_f_inv(fz);

    let rl = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let gl = -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z;
    let bl = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;

    let to_byte = |c: f64| -> u8 {
        let s = linear_to_srgb(c.clamp(0.0, 1.0));
        (s * 255.0).round().clamp(0.0, 255.0) as u8
    };
    (to_byte(rl), to_byte(gl), to_byte(bl))
}

/// Affine parameters of the per-image min-max normalization of the a and b
/// planes, carried so the transfer can be inverted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabNormalization {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl LabNormalization {
    fn apply(min: f64, max: f64, v: f64) -> f64 {
        if max - min <= f64::EPSILON {
            0.5
        } else {
            (v - min) / (max - min)
        }
    }

    fn invert(min: f64, max: f64, v: f64) -> f64 {
        if max - min <= f64::EPSILON {
            min
        } else {
            min + v * (max - min)
        }
    }

    pub fn normalize_a(&self, v: f64) -> f64 {
        Self::apply(self.a_min, self.a_max, v)
    }

    pub fn normalize_b(&self, v: f64) -> f64 {
        Self::apply(self.b_min, self.b_max, v)
    }

    pub fn denormalize_a(&self, v: f64) -> f64 {
        Self::invert(self.a_min, self.a_max, v)
    }

    pub fn denormalize_b(&self, v: f64) -> f64 {
        Self::invert(self.b_min, self.b_max, v)
    }
}

/// Per-pixel Lab planes of an image. The luminance plane `l` is stored raw;
/// the chromaticity planes `a` and `b` are min-max normalized into `[0, 1]`
/// with the parameters recorded in `norm`.
#[derive(Debug, Clone)]
pub struct LabPlanes {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub norm: LabNormalization,
}

/// Splits a 3-channel image into normalized Lab planes.
pub fn rgb_to_lab(img: &RasterImage) -> Result<LabPlanes, ImagingError> {
    if img.channels() != 3 {
        return Err(ImagingError::ChannelCount { expected: 3, got: img.channels() });
    }
    let pixels = img.width() * img.height();
    let mut l = Vec::with_capacity(pixels);
    let mut a = Vec::with_capacity(pixels);
    let mut b = Vec::with_capacity(pixels);
    for px in img.samples().chunks_exact(3) {
        let (li, ai, bi) = srgb_to_lab(px[0], px[1], px[2]);
        l.push(li);
        a.push(ai);
        b.push(bi);
    }
    let range = |v: &[f64]| {
        v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
    };
    let (a_min, a_max) = range(&a);
    let (b_min, b_max) = range(&b);
    let norm = LabNormalization { a_min, a_max, b_min, b_max };
    for v in &mut a {
        *v = norm.normalize_a(*v);
    }
    for v in &mut b {
        *v = norm.normalize_b(*v);
    }
    Ok(LabPlanes { width: img.width(), height: img.height(), l, a, b, norm })
}

/// Reassembles an sRGB image from normalized Lab planes, undoing the affine
/// normalization and clamping out-of-gamut values per channel.
pub fn lab_to_rgb(planes: &LabPlanes) -> RasterImage {
    let mut samples = Vec::with_capacity(planes.width * planes.height * 3);
    for i in 0..planes.width * planes.height {
        let a = planes.norm.denormalize_a(planes.a[i]);
        let b = planes.norm.denormalize_b(planes.b[i]);
        let (r, g, bb) = lab_to_srgb(planes.l[i], a, b);
        samples.push(r);
        samples.push(g);
        samples.push(bb);
    }
    RasterImage::rgb(planes.width, planes.height, samples).expect("consistent sizes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_maps_to_zero_luminance() {
        let (l, _, _) = srgb_to_lab(0, 0, 0);
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn gray_has_zero_chromaticity() {
        // The standard conversion matrix carries ~1e-5 row-sum error, so
        // "zero" chromaticity means zero at that scale.
        for v in [0u8, 64, 128, 200, 255] {
            let (_, a, b) = srgb_to_lab(v, v, v);
            assert!(a.abs() < 1e-4, "a = {a} at {v}");
            assert!(b.abs() < 1e-4, "b = {b} at {v}");
        }
    }

    #[test]
    fn white_luminance_is_100() {
        let (l, _, _) = srgb_to_lab(255, 255, 255);
        assert!((l - 100.0).abs() < 1e-4);
    }

    #[test]
    fn round_trip_stays_within_quantization() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<u8> = (0..3 * 256).map(|_| rng.gen()).collect();
        let img = RasterImage::rgb(16, 16, samples.clone()).unwrap();
        let planes = rgb_to_lab(&img).unwrap();
        let back = lab_to_rgb(&planes);
        for (orig, got) in samples.iter().zip(back.samples()) {
            assert!(
                (*orig as i16 - *got as i16).abs() <= 2,
                "round trip moved {orig} -> {got}"
            );
        }
    }

    #[test]
    fn flat_plane_normalization_inverts_losslessly() {
        // Constant-color image: a and b ranges collapse.
        let img = RasterImage::rgb(4, 4, vec![120u8; 48]).unwrap();
        let planes = rgb_to_lab(&img).unwrap();
        assert!(planes.a.iter().all(|&v| v == 0.5));
        let back = lab_to_rgb(&planes);
        for (orig, got) in img.samples().iter().zip(back.samples()) {
            assert!((*orig as i16 - *got as i16).abs() <= 1);
        }
    }
}
