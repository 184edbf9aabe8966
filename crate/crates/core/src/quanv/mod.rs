//! Quanvolution: each non-overlapping 2×2 patch is angle-embedded into a
//! 4-qubit register, passed through a fixed seeded random circuit, and read
//! out as one `⟨Z⟩` value per qubit, giving a 4-channel feature map at half
//! resolution.

mod cache;
mod filter;

pub(crate) use cache::partial_path;

pub use cache::{
    quanv_dataset, read_cache, write_cache, CacheIndex, FeatureCache, FeatureRecord, SplitCache,
    CACHE_MAGIC, CACHE_VERSION,
};
pub use filter::{
    build_filter_circuits, build_random_circuit, clamp_warnings, embed_patch, quanv_image,
    quanv_patch, FeatureMap, QuanvFilterSpec,
};
