//! Binary PPM/PGM (P6/P5) with maxval 255.

use super::image::ImageTensor;
use crate::error::{Error, Result};

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    data_offset: usize,
}

fn decode_err(msg: impl Into<String>) -> Error {
    Error::Decode(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(m) => {
            return Err(decode_err(format!(
                "unsupported magic {:?}, expected P5 or P6",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(decode_err("file shorter than magic number")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(decode_err(format!("header truncated before {name}"))),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(decode_err(format!("{name} is not a number")));
        }
        fields[i] = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_err(format!("{name} out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(decode_err("missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(decode_err(format!("degenerate dimensions {width}x{height}")));
    }
    if maxval != 255 {
        return Err(decode_err(format!("maxval {maxval} unsupported, expected 255")));
    }
    Ok(Header {
        channels,
        width,
        height,
        data_offset: pos,
    })
}

/// Decode to `[0, 1]` floats (byte / 255).
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageTensor> {
    let h = parse_header(bytes)?;
    let len = h.width * h.height * h.channels;
    let payload = bytes
        .get(h.data_offset..h.data_offset + len)
        .ok_or_else(|| {
            decode_err(format!(
                "payload truncated: need {len} bytes, have {}",
                bytes.len().saturating_sub(h.data_offset)
            ))
        })?;
    let values = payload.iter().map(|&b| b as f32 / 255.0).collect();
    ImageTensor::new(h.height, h.width, h.channels, values)
}

/// `(height, width)` from the header alone.
pub fn read_ppm_dims(bytes: &[u8]) -> Result<(usize, usize)> {
    let h = parse_header(bytes)?;
    Ok((h.height, h.width))
}

/// Encode raw 8-bit samples (1 or 3 channels, row-major).
pub fn encode_ppm(width: usize, height: usize, channels: usize, samples: &[u8]) -> Result<Vec<u8>> {
    let magic = match channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Dimension(format!("PPM needs 1 or 3 channels, got {c}"))),
    };
    if samples.len() != width * height * channels {
        return Err(Error::Dimension(format!(
            "{} samples for {width}x{height}x{channels}",
            samples.len()
        )));
    }
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p5_scaling() {
        let img = decode_ppm(b"P5\n2 1\n255\n\x00\xff").unwrap();
        assert_eq!((img.height, img.width, img.channels), (1, 2, 1));
        assert_eq!(img.values, vec![0.0, 1.0]);
    }

    #[test]
    fn p6_pixel() {
        let img = decode_ppm(b"P6 1 1 255\n\xff\x00\x00").unwrap();
        assert_eq!(img.values, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn comments_in_header() {
        let img = decode_ppm(b"P5\n# made by hand\n1 1\n# c\n255\n\x80").unwrap();
        assert_eq!(img.values, vec![128.0 / 255.0]);
    }

    #[test]
    fn malformed_inputs() {
        let cases: [(&[u8], &str); 5] = [
            (b"P6 0 0 255\n", "degenerate"),
            (b"P3 1 1 255\n", "magic"),
            (b"P5 2 2 65535\n\x00\x00", "maxval"),
            (b"P5 2 2 255\n\x00", "truncated"),
            (b"P5 x 2 255\n", "width"),
        ];
        for (bytes, needle) in cases {
            let err = decode_ppm(bytes).unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} should mention {needle}");
        }
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(w in 1usize..9, h in 1usize..9, gray in any::<bool>(), seed in any::<u64>()) {
            let c = if gray { 1 } else { 3 };
            let mut rng = crate::rng::SeededRng::new(seed);
            let samples: Vec<u8> = (0..w * h * c).map(|_| rng.next_u64() as u8).collect();
            let bytes = encode_ppm(w, h, c, &samples).unwrap();
            let img = decode_ppm(&bytes).unwrap();
            let back: Vec<u8> = img.values.iter().map(|v| (v * 255.0).round() as u8).collect();
            prop_assert_eq!(encode_ppm(img.width, img.height, img.channels, &back).unwrap(), bytes);
        }
    }
}
