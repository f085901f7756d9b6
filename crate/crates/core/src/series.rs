//! Power-series coefficients in δ of the densities and the recombination
//! term, by Faà di Bruno composition.
//!
//! For f analytic and g(δ) = Σ a_k δᵏ, the k-th coefficient of f(g(δ)) is
//! Σ_J f⁽ʲ⁾(a₀) Π_m a_mʲᵐ / j_m!, summed over the index sets J = (j₁..j_k)
//! with j₁ + 2j₂ + … + k·j_k = k and j = Σ j_m.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::physics::Recombination;

/// Largest supported expansion order.
pub const MAX_ORDER: usize = 8;

/// Solutions of j₁ + 2j₂ + … + k·j_k = k, each as `[j₁, …, j_k]`.
pub fn index_sets(k: usize) -> Result<&'static [Vec<usize>]> {
    static TABLE: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    if k > MAX_ORDER {
        return Err(Error::OrderOutOfRange(k));
    }
    let table = TABLE.get_or_init(|| (0..=MAX_ORDER).map(enumerate).collect());
    Ok(&table[k])
}

fn enumerate(k: usize) -> Vec<Vec<usize>> {
    // descend from the largest part m = k, choosing j_m, down to m = 1
    fn go(m: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for j in 0..=left / m {
            cur[m - 1] = j;
            go(m - 1, left - j * m, cur, out);
        }
        cur[m - 1] = 0;
    }
    let mut out = Vec::new();
    go(k, k, &mut vec![0; k], &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Coefficients of f(Σ a_k δᵏ) given `deriv(j) = f⁽ʲ⁾(a₀)`.
fn compose(a: &[f64], deriv: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: "need at least the order-0 coefficient".into(),
        });
    }
    let order = a.len() - 1;
    if order > MAX_ORDER {
        return Err(Error::OrderOutOfRange(order));
    }
    let mut out = vec![deriv(0)];
    for k in 1..=order {
        let mut sum = 0.0;
        for set in index_sets(k)? {
            let j: usize = set.iter().sum();
            let mut term = deriv(j);
            for (m, &jm) in set.iter().enumerate() {
                if jm > 0 {
                    term *= a[m + 1].powi(jm as i32) / factorial(jm);
                }
            }
            sum += term;
        }
        out.push(sum);
    }
    Ok(out)
}

/// Coefficients of exp(Σ a_k δᵏ).
pub fn expand_exponential(a: &[f64]) -> Result<Vec<f64>> {
    let e = a.first().map(|v| v.exp()).unwrap_or(0.0);
    compose(a, |_| e)
}

/// Coefficients of 1 / Σ a_k δᵏ.
pub fn expand_reciprocal(a: &[f64]) -> Result<Vec<f64>> {
    let a0 = a.first().copied().unwrap_or(0.0);
    if a0 == 0.0 {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: "reciprocal needs a nonzero leading coefficient".into(),
        });
    }
    // f(z) = 1/z: f⁽ʲ⁾(z) = (−1)ʲ j! z^(−j−1)
    compose(a, |j| {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        s * factorial(j) / a0.powi(j as i32 + 1)
    })
}

/// Coefficients of the product of two series truncated at the shorter length.
pub fn cauchy_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = a.len().min(b.len());
    (0..k).map(|m| (0..=m).map(|j| a[j] * b[m - j]).sum()).collect()
}

/// Expansion of n, p̂ = p/δ², r_δ and R/δ² for given potential coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoeffs {
    pub order: usize,
    pub psi: Vec<f64>,
    pub phi_n: Vec<f64>,
    pub phi_p: Vec<f64>,
    pub n: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub big_r: Vec<f64>,
    /// ∂R⁽ᵏ⁾/∂n⁽ᵏ⁾ for k ≥ 1.
    pub s_n: f64,
    /// ∂R⁽ᵏ⁾/∂p⁽ᵏ⁾ for k ≥ 1.
    pub s_p: f64,
    /// n⁽ᵏ⁾/n⁽⁰⁾ − (ψ⁽ᵏ⁾ − φₙ⁽ᵏ⁾); zero for k ≤ 1.
    pub f_n: Vec<f64>,
    /// p⁽ᵏ⁾/p⁽⁰⁾ − (φₚ⁽ᵏ⁾ − ψ⁽ᵏ⁾); zero for k ≤ 1.
    pub f_p: Vec<f64>,
    /// r⁽ᵏ⁾ − c(n⁽⁰⁾) n⁽ᵏ⁾ for k ≥ 1.
    pub f_r: Vec<f64>,
    /// R⁽ᵏ⁾ − s_n n⁽ᵏ⁾ − s_p p⁽ᵏ⁾ for k ≥ 1.
    pub f_big_r: Vec<f64>,
}

/// s_n(n, p) = r₀(n) p + c(n)(np − 1).
pub fn s_n(rec: &Recombination, n: f64, p: f64) -> f64 {
    rec.r0_unchecked(n) * p + rec.r0_prime(n) * (n * p - 1.0)
}

/// The same quantity in expanded form, C_d p + 2C_n np − C_n + 1/(τ_p n²).
pub fn s_n_expanded(rec: &Recombination, n: f64, p: f64) -> f64 {
    rec.c_d * p + 2.0 * rec.c_n * n * p - rec.c_n + 1.0 / (rec.tau_p * n * n)
}

/// s_p(n) = r₀(n) n.
pub fn s_p(rec: &Recombination, n: f64) -> f64 {
    rec.r0_unchecked(n) * n
}

pub fn expand_nr(psi: &[f64], phi_n: &[f64], phi_p: &[f64], rec: &Recombination) -> Result<SeriesCoeffs> {
    if psi.len() != phi_n.len() || psi.len() != phi_p.len() || psi.is_empty() {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: format!(
                "coefficient sequences must share a nonzero length, got {}, {}, {}",
                psi.len(),
                phi_n.len(),
                phi_p.len()
            ),
        });
    }
    let order = psi.len() - 1;
    if order > MAX_ORDER {
        return Err(Error::OrderOutOfRange(order));
    }
    let a_n: Vec<f64> = psi.iter().zip(phi_n).map(|(a, b)| a - b).collect();
    let a_p: Vec<f64> = phi_p.iter().zip(psi).map(|(a, b)| a - b).collect();
    let n = expand_exponential(&a_n)?;
    let p = expand_exponential(&a_p)?;
    let (n0, p0) = (n[0], p[0]);

    // denominator τ_p(n + δ n_T) + τ_n(δ² p̂ + δ p_T)
    let d: Vec<f64> = (0..=order)
        .map(|k| {
            let mut v = rec.tau_p * n[k];
            if k == 1 {
                v += rec.tau_p * rec.n_t + rec.tau_n * rec.p_t;
            }
            if k >= 2 {
                v += rec.tau_n * p[k - 2];
            }
            v
        })
        .collect();
    let recip = expand_reciprocal(&d)?;
    let r: Vec<f64> = (0..=order)
        .map(|k| {
            let mut v = rec.c_n * n[k] + recip[k];
            if k == 0 {
                v += rec.c_d;
            }
            if k >= 2 {
                v += rec.c_p * p[k - 2];
            }
            v
        })
        .collect();
    let np = cauchy_product(&n, &p);
    let rnp = cauchy_product(&r, &np);
    let big_r: Vec<f64> = rnp.iter().zip(&r).map(|(a, b)| a - b).collect();

    let sn = s_n(rec, n0, p0);
    let sp = s_p(rec, n0);
    let c = rec.r0_prime(n0);
    let zero_low = |k: usize, v: f64| if k <= 1 { 0.0 } else { v };
    Ok(SeriesCoeffs {
        order,
        f_n: (0..=order).map(|k| zero_low(k, n[k] / n0 - a_n[k])).collect(),
        f_p: (0..=order).map(|k| zero_low(k, p[k] / p0 - a_p[k])).collect(),
        f_r: (0..=order).map(|k| if k == 0 { 0.0 } else { r[k] - c * n[k] }).collect(),
        f_big_r: (0..=order)
            .map(|k| if k == 0 { 0.0 } else { big_r[k] - sn * n[k] - sp * p[k] })
            .collect(),
        psi: psi.to_vec(),
        phi_n: phi_n.to_vec(),
        phi_p: phi_p.to_vec(),
        n,
        p,
        r,
        big_r,
        s_n: sn,
        s_p: sp,
    })
}

/// Central finite-difference oracle for Taylor coefficients at δ = 0.
///
/// The k-th central difference with step h has O(h²) error; one Richardson
/// step over the pair of steps cancels it.
pub mod oracle {
    /// Successively halved δ-steps; two Richardson levels leave an O(h⁶) remainder.
    pub const STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
    /// Orders above this use steps scaled by 2^(k − 3), since rounding grows like h⁻ᵏ.
    pub const STEP_SCALING_FROM: usize = 3;

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn central(f: &impl Fn(f64) -> f64, k: usize, h: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..=k {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom(k, i) * f((k as f64 / 2.0 - i as f64) * h);
        }
        s / h.powi(k as i32)
    }

    /// k-th Taylor coefficient f⁽ᵏ⁾(0)/k!.
    pub fn taylor_coefficient(f: impl Fn(f64) -> f64, k: usize) -> f64 {
        if k == 0 {
            return f(0.0);
        }
        let scale = 2f64.powi(k.saturating_sub(STEP_SCALING_FROM) as i32);
        let [d1, d2, d3] = STEPS.map(|h| central(&f, k, scale * h));
        let (r1, r2) = ((4.0 * d2 - d1) / 3.0, (4.0 * d3 - d2) / 3.0);
        let fact: f64 = (1..=k).map(|v| v as f64).product();
        (16.0 * r2 - r1) / 15.0 / fact
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec() -> Recombination {
        Recombination { c_d: 0.7, c_n: 0.4, c_p: 0.3, tau_n: 0.8, tau_p: 1.3, n_t: 0.5, p_t: 0.9 }
    }

    fn poly(c: &[f64], d: f64) -> f64 {
        // constant term added last so the δ-dependent part is not rounded against it
        c[1..].iter().rev().fold(0.0, |acc, v| acc * d + v) * d + c[0]
    }

    #[test]
    fn partition_counts() {
        let counts: Vec<usize> = (1..=6).map(|k| index_sets(k).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 2, 3, 5, 7, 11]);
        for k in 1..=MAX_ORDER {
            for set in index_sets(k).unwrap() {
                let s: usize = set.iter().enumerate().map(|(m, j)| (m + 1) * j).sum();
                assert_eq!(s, k);
            }
        }
        assert!(matches!(index_sets(9), Err(Error::OrderOutOfRange(9))));
    }

    #[test]
    fn exponential_examples() {
        let c = expand_exponential(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        let want = [1.0, 1.0, 0.5, 1.0 / 6.0];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = expand_exponential(&[0.3, 0.0, 0.0]).unwrap();
        assert_eq!(c, vec![0.3f64.exp(), 0.0, 0.0]);
        assert!(matches!(expand_exponential(&[0.0; 10]), Err(Error::OrderOutOfRange(9))));
    }

    #[test]
    fn reciprocal_examples() {
        assert_eq!(expand_reciprocal(&[2.0, 0.0, 0.0]).unwrap(), vec![0.5, 0.0, 0.0]);
        let g = expand_reciprocal(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g, vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        assert!(expand_reciprocal(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn exponential_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c = expand_exponential(&a).unwrap();
            // differences annihilate the constant, so difference e^{a0}·expm1(Σ_{k≥1} a_k δᵏ)
            // to keep the rounding floor far below the tolerance
            let tail = |d: f64| a[0].exp() * (poly(&a, d) - a[0]).exp_m1();
            assert_eq!(c[0], a[0].exp());
            for (k, ck) in c.iter().enumerate().skip(1) {
                let o = oracle::taylor_coefficient(tail, k);
                assert!((ck - o).abs() <= 1e-6 * ck.abs(), "k={k}: {ck} vs {o}");
            }
        }
    }

    proptest! {
        #[test]
        fn reciprocal_inverts_series(a0 in 0.5f64..3.0, rest in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let mut a = vec![a0];
            a.extend(rest);
            let b = expand_reciprocal(&a).unwrap();
            let prod = cauchy_product(&a, &b);
            prop_assert!((prod[0] - 1.0).abs() <= 1e-12);
            for v in &prod[1..] {
                prop_assert!(v.abs() <= 1e-12 * (1.0 + b.iter().map(|x| x.abs()).sum::<f64>()));
            }
        }

        #[test]
        fn truncation_is_stable(coefs in proptest::collection::vec(-0.5f64..0.5, 18)) {
            let (psi, rest) = coefs.split_at(6);
            let (pn, pp) = rest.split_at(6);
            let full = expand_nr(psi, pn, pp, &rec()).unwrap();
            let short = expand_nr(&psi[..3], &pn[..3], &pp[..3], &rec()).unwrap();
            prop_assert_eq!(&full.n[..3], &short.n[..]);
            prop_assert_eq!(&full.p[..3], &short.p[..]);
            prop_assert_eq!(&full.r[..3], &short.r[..]);
            prop_assert_eq!(&full.big_r[..3], &short.big_r[..]);
        }
    }

    #[test]
    fn leading_orders_match_closed_forms() {
        let rc = rec();
        let s = expand_nr(&[0.2, 0.1, -0.3], &[0.0, 0.4, 0.2], &[-0.1, 0.3, 0.5], &rc).unwrap();
        let n0 = (0.2f64).exp();
        let p0 = (-0.3f64).exp();
        assert!((s.n[0] - n0).abs() < 1e-15);
        assert!((s.n[1] - n0 * (0.1 - 0.4)).abs() < 1e-15);
        assert!((s.p[1] - p0 * (0.3 - 0.1)).abs() < 1e-15);
        assert!((s.big_r[0] - rc.r0(n0).unwrap() * (n0 * p0 - 1.0)).abs() < 1e-14);
        assert!(s.f_n[..2].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_order_with_constant_potentials() {
        let rc = rec();
        let s = expand_nr(&[0.3, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.5, 0.0, 0.0], &rc).unwrap();
        let (n0, p0) = (s.n[0], s.p[0]);
        assert_eq!(&s.n[1..], &[0.0, 0.0]);
        assert_eq!(&s.p[1..], &[0.0, 0.0]);
        let want = -(rc.tau_p * rc.n_t + rc.tau_n * rc.p_t) / (rc.tau_p * rc.tau_p * n0 * n0) * (n0 * p0 - 1.0);
        assert!((s.big_r[1] - want).abs() < 1e-14 * want.abs().max(1.0));
        assert!((s.f_big_r[1] - want).abs() < 1e-14 * want.abs().max(1.0));
    }

    #[test]
    fn equilibrium_kills_leading_recombination() {
        // n0 p0 = 1 when φp⁽⁰⁾ = φn⁽⁰⁾
        let s = expand_nr(&[0.8, 0.2, 0.0], &[0.1, 0.0, 0.1], &[0.1, 0.3, 0.0], &rec()).unwrap();
        assert!(s.big_r[0].abs() < 1e-15);
        assert!(s.f_big_r[1].abs() < 1e-15);
    }

    #[test]
    fn s_n_identity_agrees_with_expanded_form() {
        let rc = rec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n: f64 = rng.gen_range(0.1..10.0);
            let p: f64 = rng.gen_range(0.0..10.0);
            let a = s_n(&rc, n, p);
            let b = s_n_expanded(&rc, n, p);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn decomposition_is_linear_in_top_order() {
        let rc = rec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let pn: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let pp: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let base = expand_nr(&psi, &pn, &pp, &rc).unwrap();
        for k in 1..=3 {
            // shifting φn⁽ᵏ⁾ moves only n⁽ᵏ⁾ at order k; φp⁽ᵏ⁾ only p⁽ᵏ⁾
            let eps = 0.37;
            let mut pn2 = pn.clone();
            pn2[k] += eps;
            let s = expand_nr(&psi, &pn2, &pp, &rc).unwrap();
            let dn = s.n[k] - base.n[k];
            assert!((dn + base.n[0] * eps).abs() < 1e-13);
            assert!((s.big_r[k] - base.big_r[k] - base.s_n * dn).abs() < 1e-12, "k={k}");
            assert!((s.f_big_r[k] - base.f_big_r[k]).abs() < 1e-12);

            let mut pp2 = pp.clone();
            pp2[k] += eps;
            let s = expand_nr(&psi, &pn, &pp2, &rc).unwrap();
            let dp = s.p[k] - base.p[k];
            assert!((s.big_r[k] - base.big_r[k] - base.s_p * dp).abs() < 1e-12, "k={k}");
            assert!((s.f_big_r[k] - base.f_big_r[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn recombination_matches_oracle() {
        let rc = rec();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let psi: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let pn: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let pp: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let s = expand_nr(&psi, &pn, &pp, &rc).unwrap();
            let big_r = |d: f64| {
                let n = (poly(&psi, d) - poly(&pn, d)).exp();
                let ph = (poly(&pp, d) - poly(&psi, d)).exp();
                let denom = rc.tau_p * (n + d * rc.n_t) + rc.tau_n * (d * d * ph + d * rc.p_t);
                let r = rc.c_d + rc.c_n * n + rc.c_p * d * d * ph + 1.0 / denom;
                r * (n * ph - 1.0)
            };
            for k in 0..=3 {
                let o = oracle::taylor_coefficient(big_r, k);
                let scale = s.big_r[k].abs().max(1e-2);
                assert!((s.big_r[k] - o).abs() <= 1e-6 * scale, "k={k}: {} vs {o}", s.big_r[k]);
            }
        }
    }
}
