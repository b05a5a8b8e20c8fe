//! Normal-distribution helpers that stay accurate in the far tails.


pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `phi(z) / Phi(z)`, the mean shift of a standard normal truncated to
/// `[-z, inf)`. Uses a continued fraction for the Mills ratio when `Phi(z)`
/// would underflow.
pub fn inverse_mills(z: f64) -> f64 {
    if z > -30.0 {
        return normal_pdf(z) / normal_cdf(z);
    }
    // Phi(-t)/phi(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...))))
    let t = -z;
    let mut tail = t;
    for k in (1..=200).rev() {
        tail = t + k as f64 / tail;
    }
    tail
}

/// Mean of `N(mean, 1)` truncated to `[lower, upper]`.
pub fn truncated_normal_mean(mean: f64, lower: f64, upper: f64) -> f64 {
    let a = lower - mean;
    let b = upper - mean;
    if b == f64::INFINITY {
        return mean + inverse_mills(-a);
    }
    if a == f64::NEG_INFINITY {
        return mean - inverse_mills(b);
    }
    // both finite: compute in whichever tail keeps the mass representable
    let (pa, pb) = (normal_pdf(a), normal_pdf(b));
    let mass = if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    };
    mean + (pa - pb) / mass
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mills_at_zero() {
        assert!((inverse_mills(0.0) - 0.797_884_560_802_865_4).abs() < 1e-14);
    }

    #[test]
    fn mills_continuous_across_switch() {
        let a = normal_pdf(-29.999) / normal_cdf(-29.999);
        let b = inverse_mills(-30.001);
        assert!((a - b).abs() / a < 1e-3);
        // asymptotically -z
        let far = inverse_mills(-200.0);
        assert!((far - 200.005).abs() < 1e-3);
    }

    #[test]
    fn truncated_mean_matches_reference() {
        // −3 + φ(3)/Φ(−3)
        assert!((truncated_normal_mean(-3.0, 0.0, f64::INFINITY) - 0.283_098_654_930_44).abs() < 1e-10);
        assert!((truncated_normal_mean(10.0, 0.0, 1.0) - 0.891_543_711_987_521_8).abs() < 1e-9);
    }
}
