use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Uniform};

use crate::model::Dist;

/// Sampler for a normalized (mean one) renewal distribution.
#[derive(Clone, Debug)]
pub enum Sampler {
    Exponential,
    Uniform(Uniform<f64>),
    Deterministic,
    Gamma(Gamma<f64>),
}

impl Sampler {
    pub fn new(dist: Dist) -> Sampler {
        match dist {
            Dist::Exponential => Sampler::Exponential,
            Dist::Deterministic => Sampler::Deterministic,
            Dist::Uniform { half_width } if half_width == 0.0 => Sampler::Deterministic,
            Dist::Uniform { half_width } => Sampler::Uniform(
                Uniform::new_inclusive(1.0 - half_width, 1.0 + half_width)
                    .expect("validated uniform bounds"),
            ),
            Dist::Gamma { shape } => {
                Sampler::Gamma(Gamma::new(shape, 1.0 / shape).expect("validated gamma shape"))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Exponential => Exp1.sample(rng),
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::Deterministic => 1.0,
            Sampler::Gamma(g) => g.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moments_match_descriptors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dist in [
            Dist::Exponential,
            Dist::Uniform { half_width: 0.6 },
            Dist::Gamma { shape: 4.0 },
            Dist::Deterministic,
        ] {
            let s = Sampler::new(dist);
            let m = 200_000;
            let xs: Vec<f64> = (0..m).map(|_| s.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / m as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
            assert!((mean - 1.0).abs() < 0.01, "{dist:?} mean {mean}");
            assert!((var - dist.variance()).abs() < 0.02, "{dist:?} var {var}");
            assert!(xs.iter().all(|&x| x >= 0.0));
        }
    }
}
