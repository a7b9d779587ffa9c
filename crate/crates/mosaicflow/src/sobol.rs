//! Low-discrepancy Sobol sequence (gray-code construction, unscrambled) for
//! deterministic hyperparameter sweeps. Supports up to 6 dimensions, which is
//! plenty for kernel hyperparameter sampling.

/// Primitive-polynomial parameters (degree, coefficient bits, initial
/// direction numbers) for dimensions 2..=6; dimension 1 is van der Corput.
const PARAMS: [(u32, u32, &[u32]); 5] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
];

const BITS: u32 = 32;

pub const MAX_DIMENSIONS: usize = PARAMS.len() + 1;

/// Gray-code Sobol sequence generator.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS as usize]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    /// # Panics
    /// Panics if `dimensions` is 0 or exceeds [`MAX_DIMENSIONS`].
    pub fn new(dimensions: usize) -> Self {
        assert!(
            dimensions >= 1 && dimensions <= MAX_DIMENSIONS,
            "sobol sequence supports 1..={MAX_DIMENSIONS} dimensions, got {dimensions}"
        );
        let mut directions = Vec::with_capacity(dimensions);
        // First dimension: van der Corput in base 2.
        let mut v = [0u32; BITS as usize];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k as u32);
        }
        directions.push(v);
        for &(s, a, m_init) in PARAMS.iter().take(dimensions - 1) {
            let s = s as usize;
            let mut m = vec![0u32; BITS as usize];
            m[..s].copy_from_slice(m_init);
            for k in s..BITS as usize {
                let mut mk = m[k - s] ^ (m[k - s] << s);
                for i in 1..s {
                    let a_i = (a >> (s - 1 - i)) & 1;
                    if a_i == 1 {
                        mk ^= m[k - i] << i;
                    }
                }
                m[k] = mk;
            }
            let mut v = [0u32; BITS as usize];
            for k in 0..BITS as usize {
                v[k] = m[k] << (BITS - 1 - k as u32);
            }
            directions.push(v);
        }
        Self {
            state: vec![0; directions.len()],
            directions,
            index: 0,
        }
    }

    pub fn dimensions(&self) -> usize {
        self.state.len()
    }

    /// Next point in [0, 1)^d. The first point is the origin.
    pub fn next_point(&mut self) -> Vec<f64> {
        if self.index > 0 {
            let c = (self.index - 1).trailing_ones() as usize;
            for (d, v) in self.directions.iter().enumerate() {
                self.state[d] ^= v[c];
            }
        }
        self.index += 1;
        self.state
            .iter()
            .map(|&x| x as f64 / (1u64 << BITS) as f64)
            .collect()
    }

    /// The k-th point of the sequence (k = 0 is the origin).
    pub fn point(k: u64, dimensions: usize) -> Vec<f64> {
        let mut seq = Self::new(dimensions);
        for _ in 0..k {
            seq.next_point();
        }
        seq.next_point()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_match_reference_sequence() {
        let expected: [[f64; 2]; 8] = [
            [0.0, 0.0],
            [0.5, 0.5],
            [0.75, 0.25],
            [0.25, 0.75],
            [0.375, 0.375],
            [0.875, 0.875],
            [0.625, 0.125],
            [0.125, 0.625],
        ];
        let mut seq = SobolSequence::new(2);
        for row in expected {
            assert_eq!(seq.next_point(), row.to_vec());
        }
    }

    #[test]
    fn random_access_matches_iteration() {
        let mut seq = SobolSequence::new(3);
        for k in 0..50u64 {
            assert_eq!(seq.next_point(), SobolSequence::point(k, 3));
        }
    }

    #[test]
    fn discrepancy_decreases_with_length() {
        // Max deviation of 4x4-bin counts from the uniform expectation,
        // normalized by n; should shrink as the sequence fills the square.
        let bin_dev = |n: usize| {
            let mut seq = SobolSequence::new(2);
            let mut counts = [[0usize; 4]; 4];
            for _ in 0..n {
                let p = seq.next_point();
                let bx = ((p[0] * 4.0) as usize).min(3);
                let by = ((p[1] * 4.0) as usize).min(3);
                counts[bx][by] += 1;
            }
            let expect = n as f64 / 16.0;
            counts
                .iter()
                .flatten()
                .map(|&c| (c as f64 - expect).abs() / n as f64)
                .fold(0.0, f64::max)
        };
        let d64 = bin_dev(64);
        let d1024 = bin_dev(1024);
        assert!(
            d1024 < d64,
            "bin deviation should shrink: {d64} -> {d1024}"
        );
        assert!(d1024 < 0.01);
    }
}
