//! Univariate and bivariate standard normal helpers.
//!
//! The bivariate CDF follows the Drezner–Wesolowsky reduction with
//! Gauss–Legendre quadrature whose order adapts to |rho| (6, 12, or 20
//! points), switching to the singularity-corrected expansion when |rho|
//! is close to one. Absolute accuracy is around 1e-15.

use statrs::distribution::{ContinuousCDF, Normal};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `Phi(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// `Phi^{-1}(p)` for `p` in (0, 1); clamps the argument into the open
/// interval so boundary probabilities do not produce infinities.
pub fn std_normal_quantile(p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    standard_normal().inverse_cdf(p)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Gauss-Legendre nodes/weights on (-1, 1), stored as (weight, node) for the
// positive half; the rule is applied symmetrically.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, -0.9931285991850949),
    (0.04060142980038694, -0.9639719272779138),
    (0.06267204833410906, -0.9122344282513259),
    (0.08327674157670475, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.07652652113349733),
];

fn quadrature(rho_abs: f64) -> &'static [(f64, f64)] {
    if rho_abs < 0.3 {
        &GL6
    } else if rho_abs < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// Upper-quadrant probability `P(X > h, Y > k)` for standard normals with
/// correlation `rho`.
fn bvn_upper(h: f64, k: f64, rho: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let rule = quadrature(rho.abs());

    let h = h;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;

    if rho.abs() < 0.925 {
        if rho.abs() > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = rho.asin();
            for &(w, x) in rule {
                for sign in [-1.0, 1.0] {
                    let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn = bvn * asr / (2.0 * two_pi);
        }
        bvn + std_normal_cdf(-h) * std_normal_cdf(-k)
    } else {
        if rho < 0.0 {
            k = -k;
            hk = -hk;
        }
        if rho.abs() < 1.0 {
            let a_sq = (1.0 - rho) * (1.0 + rho);
            let mut a = a_sq.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / a_sq + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - a_sq) * (1.0 - d * bs / 5.0) / 3.0
                    + c * d * a_sq * a_sq / 5.0);
            }
            if -hk < 100.0 {
                let b = bs.sqrt();
                let sp = two_pi.sqrt() * std_normal_cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for &(w, x) in rule {
                for sign in [-1.0, 1.0] {
                    let xs = (a * (sign * x + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    let asr1 = -(bs / xs + hk) / 2.0;
                    if asr1 > -100.0 {
                        let sp1 = 1.0 + c * xs * (1.0 + d * xs);
                        let ep = (-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs;
                        bvn += a * w * asr1.exp() * (ep - sp1);
                    }
                }
            }
            bvn = -bvn / two_pi;
        }
        if rho > 0.0 {
            bvn + std_normal_cdf(-h.max(k))
        } else {
            let mut out = -bvn;
            if k > h {
                out += std_normal_cdf(k) - std_normal_cdf(h);
            }
            out
        }
    }
}

/// Bivariate standard normal CDF `P(X <= a, Y <= b)` with correlation `rho`.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            return 0.0;
        }
        if a == f64::INFINITY {
            return std_normal_cdf(b);
        }
        return std_normal_cdf(a);
    }
    let rho = rho.clamp(-1.0, 1.0);
    if rho == 1.0 {
        return std_normal_cdf(a.min(b));
    }
    if rho == -1.0 {
        return (std_normal_cdf(a) + std_normal_cdf(b) - 1.0).max(0.0);
    }
    bvn_upper(-a, -b, rho).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-6, 0.01, 0.25, 0.5, 0.9, 0.999999] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn bivariate_zero_correlation_factorizes() {
        for &(a, b) in &[(0.0, 0.0), (1.0, -0.5), (-2.0, 0.3), (2.5, 2.5)] {
            let lhs = bivariate_normal_cdf(a, b, 0.0);
            let rhs = std_normal_cdf(a) * std_normal_cdf(b);
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn bivariate_origin_arcsine_identity() {
        // P(X<=0, Y<=0) = 1/4 + asin(rho)/(2 pi).
        for &rho in &[-0.95, -0.5, -0.1, 0.0, 0.2, 0.5, 0.8, 0.925, 0.99] {
            let got = bivariate_normal_cdf(0.0, 0.0, rho);
            let want = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            assert!((got - want).abs() < 1e-12, "rho = {rho}: {got} vs {want}");
        }
    }

    #[test]
    fn bivariate_perfect_correlation_limits() {
        assert!((bivariate_normal_cdf(0.3, 1.2, 1.0) - std_normal_cdf(0.3)).abs() < 1e-15);
        let want = (std_normal_cdf(0.3) + std_normal_cdf(-0.1) - 1.0).max(0.0);
        assert!((bivariate_normal_cdf(0.3, -0.1, -1.0) - want).abs() < 1e-15);
    }

    /// Simpson-rule oracle integrating Phi(conditional) over one margin.
    fn bvn_oracle(a: f64, b: f64, rho: f64) -> f64 {
        let lo = -9.0;
        let steps = 4000;
        let h = (a - lo) / steps as f64;
        let integrand = |x: f64| {
            let cond = (b - rho * x) / (1.0 - rho * rho).sqrt();
            std_normal_pdf(x) * std_normal_cdf(cond)
        };
        let mut acc = integrand(lo) + integrand(a);
        for i in 1..steps {
            let x = lo + i as f64 * h;
            acc += integrand(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn bivariate_matches_quadrature_oracle() {
        for &rho in &[-0.85, -0.4, 0.15, 0.6, 0.95] {
            for &(a, b) in &[(0.7, -0.3), (-1.1, 1.4), (0.0, 2.1), (-2.0, -1.5)] {
                let got = bivariate_normal_cdf(a, b, rho);
                let want = bvn_oracle(a, b, rho);
                assert!(
                    (got - want).abs() < 5e-9,
                    "a={a} b={b} rho={rho}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn bivariate_monotone_in_rho() {
        let mut last = -1.0;
        for i in 0..=40 {
            let rho = -0.999 + 1.998 * i as f64 / 40.0;
            let v = bivariate_normal_cdf(0.4, -0.2, rho);
            assert!(v >= last - 1e-12);
            last = v;
        }
    }
}
