//! Small numeric helpers shared across indicator modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `log(Σ exp(xᵢ))`, stable for large magnitudes. Returns `-∞` for an empty
/// slice or when every term is `-∞`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// splitmix64 finalizer; decorrelates nearby seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for a work item, independent of scheduling order.
pub fn stream_rng(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    let s = stream.iter().fold(mix(seed), |acc, &x| mix(acc ^ mix(x)));
    ChaCha8Rng::seed_from_u64(s)
}

/// Derived seed for sub-stream `stream` of `seed`.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ mix(stream))
}

/// Rounds to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let v = [0.1, -2.0, 3.5];
        let direct = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - direct).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn stream_rng_depends_on_stream() {
        use rand::Rng;
        let a: u64 = stream_rng(7, &[1]).gen();
        let b: u64 = stream_rng(7, &[2]).gen();
        let c: u64 = stream_rng(7, &[1]).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn rounding_keeps_nine_digits() {
        assert_eq!(round_significant(1.234_567_891_23, 9), 1.234_567_89);
        assert_eq!(round_significant(-0.000_123_456_789_9, 9), -0.000_123_456_790);
        assert_eq!(round_significant(0.0, 9), 0.0);
    }
}
