//! 64-bit content hashes (truncated SHA-256) used to tag artifacts.

use sha2::{Digest, Sha256};

#[derive(Clone, Default)]
pub struct ContentHasher(Sha256);

impl ContentHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: impl AsRef<[u8]>) -> &mut Self {
        self.0.update(bytes.as_ref());
        self
    }

    /// Length-prefixed field, so concatenations stay unambiguous.
    pub fn field(&mut self, bytes: impl AsRef<[u8]>) -> &mut Self {
        let b = bytes.as_ref();
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn finish(&self) -> u64 {
        let d = self.0.clone().finalize();
        u64::from_le_bytes(d[..8].try_into().expect("sha256 is 32 bytes"))
    }
}

pub fn hash_bytes(bytes: impl AsRef<[u8]>) -> u64 {
    ContentHasher::new().update(bytes).finish()
}

pub fn to_hex(h: u64) -> String {
    format!("{h:016x}")
}

pub fn from_hex(s: &str) -> Option<u64> {
    u64::from_str_radix(s.trim(), 16).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_prefix_free() {
        assert_eq!(hash_bytes("abc"), hash_bytes("abc"));
        let a = ContentHasher::new().field("ab").field("c").finish();
        let b = ContentHasher::new().field("a").field("bc").finish();
        assert_ne!(a, b);
        assert_eq!(from_hex(&to_hex(a)), Some(a));
    }
}
