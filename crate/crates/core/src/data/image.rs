use crate::error::{Error, Result};

/// `H×W×C` image with values in `[0, 1]`, row-major, channels interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub values: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "{} values for {height}x{width}x{channels}",
                values.len()
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!("{channels} channels, expected 1 or 3")));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn gray(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        Self::new(height, width, 1, values)
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.values[(y * self.width + x) * self.channels + c]
    }
}

/// Rec.601 luminance; single-channel input passes through.
pub fn to_grayscale(img: &ImageTensor) -> ImageTensor {
    if img.channels == 1 {
        return img.clone();
    }
    let values = img
        .values
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
        .collect();
    ImageTensor {
        height: img.height,
        width: img.width,
        channels: 1,
        values,
    }
}

/// Bilinear resize sampling at pixel centres (`align_corners = false`),
/// source coordinates clamped to the image.
pub fn resize_bilinear(img: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    if img.height < 2 || img.width < 2 {
        return Err(Error::Dimension(format!(
            "cannot resize degenerate {}x{} image",
            img.height, img.width
        )));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::Dimension(format!("target size {out_h}x{out_w}")));
    }
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f32)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let ys = axis(out_h, img.height);
    let xs = axis(out_w, img.width);
    let c = img.channels;
    let mut values = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let top = img.at(y0, x0, ch) * (1.0 - fx) + img.at(y0, x1, ch) * fx;
                let bot = img.at(y1, x0, ch) * (1.0 - fx) + img.at(y1, x1, ch) * fx;
                values.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
            }
        }
    }
    Ok(ImageTensor {
        height: out_h,
        width: out_w,
        channels: c,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_coefficients() {
        let white = ImageTensor::new(1, 1, 3, vec![1.0; 3]).unwrap();
        assert!((to_grayscale(&white).values[0] - 1.0).abs() < 1e-6);
        let red = ImageTensor::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((to_grayscale(&red).values[0] - 0.299).abs() < 1e-7);
        let gray = ImageTensor::gray(1, 2, vec![0.25, 0.5]).unwrap();
        assert_eq!(to_grayscale(&gray), gray);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = ImageTensor::gray(5, 7, vec![0.375; 35]).unwrap();
        let out = resize_bilinear(&img, 64, 64).unwrap();
        assert!(out.values.iter().all(|&v| (v - 0.375).abs() < 1e-7));
    }

    #[test]
    fn identity_scale() {
        let mut rng = crate::rng::SeededRng::new(3);
        let vals: Vec<f32> = (0..64 * 64).map(|_| rng.unit_f64() as f32).collect();
        let img = ImageTensor::gray(64, 64, vals).unwrap();
        let out = resize_bilinear(&img, 64, 64).unwrap();
        for (a, b) in out.values.iter().zip(&img.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn checkerboard_upsample_by_hand() {
        // Source sample points for 2 -> 4: 0 (clamped), 0.25, 0.75, 1 (clamped).
        let img = ImageTensor::gray(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = resize_bilinear(&img, 4, 4).unwrap();
        #[rustfmt::skip]
        let want = [
            0.0,  0.25,  0.75,  1.0,
            0.25, 0.375, 0.625, 0.75,
            0.75, 0.625, 0.375, 0.25,
            1.0,  0.75,  0.25,  0.0,
        ];
        for (a, b) in out.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{:?}", out.values);
        }
    }

    #[test]
    fn degenerate_source() {
        let img = ImageTensor::gray(1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(resize_bilinear(&img, 4, 4), Err(Error::Dimension(_))));
    }
}
