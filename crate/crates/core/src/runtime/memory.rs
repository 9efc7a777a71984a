use std::path::Path;
use std::sync::atomic::{AtomicI64, Ordering};

use super::RuntimeError;

/// Flat word-addressed memory shared by all tasks.
///
/// Loads and stores are relaxed; `xchg` is an atomic read-modify-write.
/// Ordering between tasks comes from the closure table, not from memory.
#[derive(Debug, Default)]
pub struct GlobalMemory {
    words: Vec<AtomicI64>,
}

impl Clone for GlobalMemory {
    fn clone(&self) -> Self {
        GlobalMemory::from_words(&self.to_vec())
    }
}

impl PartialEq for GlobalMemory {
    fn eq(&self, other: &Self) -> bool {
        self.to_vec() == other.to_vec()
    }
}

impl GlobalMemory {
    pub fn new(size: usize) -> Self {
        GlobalMemory { words: (0..size).map(|_| AtomicI64::new(0)).collect() }
    }

    pub fn from_words(words: &[i64]) -> Self {
        GlobalMemory { words: words.iter().map(|w| AtomicI64::new(*w)).collect() }
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn to_vec(&self) -> Vec<i64> {
        self.words.iter().map(|w| w.load(Ordering::Relaxed)).collect()
    }

    fn word(&self, addr: i64) -> Result<&AtomicI64, RuntimeError> {
        usize::try_from(addr)
            .ok()
            .and_then(|a| self.words.get(a))
            .ok_or(RuntimeError::OutOfBounds { addr, size: self.words.len() })
    }

    pub fn load(&self, addr: i64) -> Result<i64, RuntimeError> {
        Ok(self.word(addr)?.load(Ordering::Relaxed))
    }

    pub fn store(&self, addr: i64, value: i64) -> Result<(), RuntimeError> {
        self.word(addr)?.store(value, Ordering::Relaxed);
        Ok(())
    }

    pub fn xchg(&self, addr: i64, value: i64) -> Result<i64, RuntimeError> {
        Ok(self.word(addr)?.swap(value, Ordering::AcqRel))
    }

    /// Decodes a raw image of little-endian 64-bit words, zero-extended to
    /// `min_size` words.
    pub fn from_image(bytes: &[u8], min_size: usize) -> std::io::Result<Self> {
        if !bytes.len().is_multiple_of(8) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("memory image length {} is not a multiple of 8", bytes.len()),
            ));
        }
        let mut words: Vec<i64> =
            bytes.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        if words.len() < min_size {
            words.resize(min_size, 0);
        }
        Ok(GlobalMemory::from_words(&words))
    }

    pub fn to_image(&self) -> Vec<u8> {
        self.to_vec().iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn load_file(path: &Path, min_size: usize) -> std::io::Result<Self> {
        GlobalMemory::from_image(&std::fs::read(path)?, min_size)
    }

    pub fn save_file(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_image())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_bounds_is_trapped() {
        let m = GlobalMemory::new(4);
        assert!(m.load(3).is_ok());
        assert_eq!(m.load(4), Err(RuntimeError::OutOfBounds { addr: 4, size: 4 }));
        assert!(m.store(-1, 0).is_err());
        assert!(m.xchg(i64::MAX, 0).is_err());
    }

    #[test]
    fn xchg_returns_previous() {
        let m = GlobalMemory::new(1);
        assert_eq!(m.xchg(0, 1).unwrap(), 0);
        assert_eq!(m.xchg(0, 1).unwrap(), 1);
    }

    #[test]
    fn image_round_trip() {
        let m = GlobalMemory::from_words(&[1, -2, i64::MAX]);
        let img = m.to_image();
        assert_eq!(&img[..8], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(GlobalMemory::from_image(&img, 5).unwrap().to_vec(), vec![1, -2, i64::MAX, 0, 0]);
        assert!(GlobalMemory::from_image(&[0; 7], 0).is_err());
    }
}
