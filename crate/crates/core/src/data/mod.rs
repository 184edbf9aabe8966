//! Dataset ingestion: PPM decoding, grayscale, resizing, manifests and
//! stratified splits.

mod image;
mod manifest;
mod ppm;

pub use image::{resize_bilinear, to_grayscale, ImageTensor};
pub use manifest::{
    filter_by_size, load_preprocessed, native_dims, scan_dataset_dir, split_dataset, subsample_stratified,
    DatasetManifest, ManifestRecord, Split, SplitRatios, INPUT_SIZE, MIN_PER_CLASS,
};
pub use ppm::{decode_ppm, encode_ppm, read_ppm_dims};

use crate::error::{Error, Result};

/// `n_classes`-long vector with a single 1.0 at `class_id`.
pub fn one_hot(class_id: usize, n_classes: usize) -> Result<Vec<f32>> {
    if class_id >= n_classes {
        return Err(Error::Validation(format!(
            "class id {class_id} out of range for {n_classes} classes"
        )));
    }
    let mut v = vec![0.0; n_classes];
    v[class_id] = 1.0;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_bounds() {
        let v = one_hot(0, 43).unwrap();
        assert_eq!(v.len(), 43);
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
        let v = one_hot(42, 43).unwrap();
        assert_eq!(v[42], 1.0);
        assert_eq!(v.iter().sum::<f32>(), 1.0);
        assert!(matches!(one_hot(43, 43), Err(Error::Validation(_))));
    }
}
