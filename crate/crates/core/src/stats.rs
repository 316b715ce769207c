//! Small numeric helpers shared across modules.

/// Standard logistic function, stable for large |x|.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln Σ e^{x_i}` with max subtraction. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Binary entropy in bits. `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`, summed in log space.
///
/// Stable for `n` up to well beyond 10^4; the degenerate cases `p = 0` and
/// `p = 1` are handled exactly.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut log_choose = 0.0_f64;
    let mut terms = Vec::with_capacity(k as usize + 1);
    for i in 0..=k {
        if i > 0 {
            log_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        terms.push(log_choose + i as f64 * lp + (n - i) as f64 * lq);
    }
    log_sum_exp(&terms).exp().min(1.0)
}

/// KL divergence between Bernoulli(p) and Bernoulli(q), in nats.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a <= 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial_cdf_direct(k: u64, n: u64, p: f64) -> f64 {
        let mut total = 0.0;
        let mut choose = 1.0_f64;
        for i in 0..=k.min(n) {
            if i > 0 {
                choose *= (n - i + 1) as f64 / i as f64;
            }
            total += choose * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
        }
        total
    }

    #[test]
    fn cdf_matches_direct_summation() {
        for n in [1u64, 2, 5, 10, 17, 40] {
            for k in 0..=n {
                for p in [0.1, 0.3, 0.5, 0.7, 0.95] {
                    let a = binomial_cdf(k, n, p);
                    let b = binomial_cdf_direct(k, n, p);
                    assert!((a - b).abs() < 1e-12, "n={n} k={k} p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn cdf_large_n_is_finite() {
        let c = binomial_cdf(5_000, 10_000, 0.7);
        assert!(c.is_finite() && c < 1e-100);
        let c = binomial_cdf(7_000, 10_000, 0.7);
        assert!((c - 0.5).abs() < 0.01);
    }

    #[test]
    fn logistic_tails() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(800.0) == 1.0);
        assert!(logistic(-800.0) >= 0.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_endpoints() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
    }
}
