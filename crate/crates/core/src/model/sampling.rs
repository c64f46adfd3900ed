use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One uniformly random frame per segment (training augmentation).
    RandomInSegment,
    MiddleOfSegment,
}

/// Half-open frame ranges of `t` uniform segments: `[i*n/t, (i+1)*n/t)`.
pub fn segment_bounds(n_frames: usize, t: usize) -> Result<Vec<(usize, usize)>, ModelError> {
    if t == 0 || n_frames < t {
        return Err(ModelError::TooFewFrames { n_frames, t });
    }
    Ok((0..t).map(|i| (i * n_frames / t, (i + 1) * n_frames / t)).collect())
}

pub fn sample_segments<R: Rng + ?Sized>(
    n_frames: usize,
    t: usize,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<Vec<usize>, ModelError> {
    let bounds = segment_bounds(n_frames, t)?;
    Ok(bounds
        .into_iter()
        .map(|(lo, hi)| match mode {
            SamplingMode::MiddleOfSegment => lo + (hi - lo) / 2,
            SamplingMode::RandomInSegment => rng.random_range(lo..hi),
        })
        .collect())
}

pub fn middle_frames(n_frames: usize, t: usize) -> Result<Vec<usize>, ModelError> {
    Ok(segment_bounds(n_frames, t)?
        .into_iter()
        .map(|(lo, hi)| lo + (hi - lo) / 2)
        .collect())
}

/// Seeded segment sampler; the mode is fixed for the sampler's lifetime.
#[derive(Debug, Clone)]
pub struct FrameSampler {
    mode: SamplingMode,
    rng: ChaCha8Rng,
}

impl FrameSampler {
    pub fn new(mode: SamplingMode, seed: u64) -> Self {
        Self { mode, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn sample(&mut self, n_frames: usize, t: usize) -> Result<Vec<usize>, ModelError> {
        sample_segments(n_frames, t, self.mode, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_of_ten_in_five() {
        assert_eq!(middle_frames(10, 5).unwrap(), vec![1, 3, 5, 7, 9]);
    }

    #[test]
    fn singleton_segments_are_forced() {
        let mut s = FrameSampler::new(SamplingMode::RandomInSegment, 3);
        assert_eq!(s.sample(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(middle_frames(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn random_indices_stay_in_their_segments() {
        // oracle: recompute floor(i*n/T) bounds independently
        let mut s = FrameSampler::new(SamplingMode::RandomInSegment, 11);
        for _ in 0..200 {
            let idx = s.sample(7, 5).unwrap();
            for (i, &f) in idx.iter().enumerate() {
                let lo = (i as f64 * 7.0 / 5.0).floor() as usize;
                let hi = ((i + 1) as f64 * 7.0 / 5.0).floor() as usize;
                assert!(f >= lo && f < hi, "segment {i}: {f} not in [{lo},{hi})");
            }
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn too_few_frames() {
        assert!(matches!(middle_frames(3, 5), Err(ModelError::TooFewFrames { n_frames: 3, t: 5 })));
    }
}
