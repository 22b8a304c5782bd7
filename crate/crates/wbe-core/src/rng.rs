//! Self-contained deterministic pseudo-random stream.
//!
//! The synthetic-scenario contract promises bit-identical output for a given
//! seed, independent of library versions, so the generator is pinned here
//! rather than taken from an external crate. The stream is SplitMix64
//! (Steele, Lea & Flood 2014): state advances by 0x9E3779B97F4A7C15 and the
//! output is the standard two-round xor-shift-multiply finalizer. Uniforms
//! take the top 53 bits; normals use the Box-Muller cosine branch and consume
//! exactly two uniforms per call.

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in the half-open interval (0, 1].
    ///
    /// The open lower end keeps `ln` in Box-Muller finite.
    pub fn uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) / (1u64 << 53) as f64
    }

    /// Standard normal draw (Box-Muller, cosine branch).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Multiplicative lognormal noise factor with unit mean.
    ///
    /// `rel_sd` is interpreted as the sigma of the underlying normal; the
    /// -sigma^2/2 shift keeps the expectation at one, and `rel_sd = 0`
    /// returns exactly 1 so noiseless scenarios stay exact.
    pub fn lognormal_factor(&mut self, rel_sd: f64) -> f64 {
        let z = self.normal();
        if rel_sd == 0.0 {
            1.0
        } else {
            (rel_sd * z - 0.5 * rel_sd * rel_sd).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = Rng::new(42);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn normal_moments_roughly_standard() {
        let mut rng = Rng::new(1);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn zero_noise_factor_is_exactly_one() {
        let mut rng = Rng::new(3);
        assert_eq!(rng.lognormal_factor(0.0), 1.0);
    }
}
