//! Deterministic stand-in streams for unit tests.

use rand::RngCore;

/// Yields a fixed sequence of uniforms in [0,1), then panics.
///
/// Relies on the standard 53-bit float construction `(next_u64 >> 11) * 2^-53`;
/// `pins_float_construction` below fails loudly if the rand crate ever changes it.
pub struct ForcedUniforms {
    words: Vec<u64>,
    next: usize,
}

impl ForcedUniforms {
    pub fn new(uniforms: &[f64]) -> Self {
        let words = uniforms
            .iter()
            .map(|&u| {
                assert!((0.0..1.0).contains(&u), "forced uniform out of [0,1): {u}");
                ((u * (1u64 << 53) as f64) as u64) << 11
            })
            .collect();
        Self { words, next: 0 }
    }
}

impl RngCore for ForcedUniforms {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let word = *self
            .words
            .get(self.next)
            .expect("ForcedUniforms ran out of scripted values");
        self.next += 1;
        word
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pins_float_construction() {
        let mut rng = ForcedUniforms::new(&[0.0, 0.5, 0.8, 0.999999]);
        assert_eq!(rng.random::<f64>(), 0.0);
        assert_eq!(rng.random::<f64>(), 0.5);
        assert!((rng.random::<f64>() - 0.8).abs() < 1e-15);
        assert!((rng.random::<f64>() - 0.999999).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "ran out of scripted values")]
    fn panics_when_exhausted() {
        let mut rng = ForcedUniforms::new(&[0.5]);
        let _ = rng.random::<f64>();
        let _ = rng.random::<f64>();
    }
}
