//! Weighted cluster generating functions.
//!
//! Rooted animals on the 3-regular tree weighted by `3^i 4^m 12^t` have
//! generating function `f = 12x + 8xf + 3xf²`; animals about the origin cell
//! (which may also grow across the origin's edge) have `g = f + f²`.
//!
//! Coefficients grow like `20^n n^{-3/2}`. Exact values come from either the
//! quadratic recurrence or the linear recurrence satisfied by
//! `S = √(1 − 16x − 80x²)`, and the scaled values `b_n / 20^n` from the same
//! linear recurrence in floating point.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filling;

/// `a_0..=a_n`, the coefficients of `f`, by the quadratic recurrence.
pub fn f_coeffs(n: usize) -> Vec<BigUint> {
    let mut a = vec![BigUint::zero(); n + 1];
    if n >= 1 {
        a[1] = BigUint::from(12u32);
    }
    for k in 2..=n {
        let conv: BigUint = (1..k - 1).map(|i| &a[i] * &a[k - 1 - i]).sum();
        a[k] = &a[k - 1] * 8u32 + conv * 3u32;
    }
    a
}

/// `b_0..=b_n`, the coefficients of `g = f + f²`.
pub fn g_coeffs(n: usize) -> Vec<BigUint> {
    let a = f_coeffs(n);
    (0..=n)
        .map(|k| {
            let conv: BigUint = (1..k).map(|i| &a[i] * &a[k - i]).sum();
            &a[k] + conv
        })
        .collect()
}

/// `s_0..=s_n` for `S = √(1 − 16x − 80x²)`, from
/// `(n+1) s_{n+1} = (16n − 8) s_n + 80 (n − 2) s_{n−1}`.
fn sqrt_coeffs(n: usize) -> Vec<BigInt> {
    let mut s = vec![BigInt::one(), BigInt::from(-8)];
    while s.len() <= n {
        let k = s.len() - 1;
        let next = (BigInt::from(16 * k as i64 - 8) * &s[k]
            + BigInt::from(80 * (k as i64 - 2)) * &s[k - 1])
            / BigInt::from(k as i64 + 1);
        s.push(next);
    }
    s.truncate(n + 1);
    s
}

fn to_biguint(v: BigInt) -> BigUint {
    match v.sign() {
        Sign::Minus => panic!("series coefficients are nonnegative"),
        _ => v.magnitude().clone(),
    }
}

/// `a_0..=a_n` in linear time per term, via `a_n = −s_{n+1} / 6`.
pub fn f_coeffs_fast(n: usize) -> Vec<BigUint> {
    let s = sqrt_coeffs(n + 1);
    let mut a = vec![BigUint::zero()];
    a.extend((1..=n).map(|k| to_biguint(-&s[k + 1] / 6)));
    a
}

/// `b_0..=b_n` via `Σ_{i+j=n} a_i a_j = (a_{n+1} − 8a_n) / 3` for `n ≥ 1`.
pub fn g_coeffs_fast(n: usize) -> Vec<BigUint> {
    let a = f_coeffs_fast(n + 1);
    let mut b = vec![BigUint::zero()];
    b.extend((1..=n).map(|k| &a[k] + (&a[k + 1] - &a[k] * 8u32) / 3u32));
    b
}

/// Power series of `√p` for `p_0 = 1`, in exact rationals.
pub fn sqrt_series(p: &[BigRational], n: usize) -> Vec<BigRational> {
    assert!(
        p.first().is_some_and(One::is_one),
        "constant term must be 1"
    );
    let coeff = |k: usize| p.get(k).cloned().unwrap_or_else(BigRational::zero);
    let two = BigRational::from_integer(2.into());
    let mut s = vec![BigRational::one()];
    for k in 1..=n {
        let conv: BigRational = (1..k).map(|i| &s[i] * &s[k - i]).sum();
        s.push((coeff(k) - conv) / &two);
    }
    s
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

/// `a_0..=a_n` from the closed form `(1 − 8x − √(1 − 16x − 80x²)) / (6x)`.
pub fn closed_form_f_coeffs(n: usize) -> Vec<BigRational> {
    let s = sqrt_series(&[int(1), int(-16), int(-80)], n + 1);
    let mut num: Vec<BigRational> = s.iter().map(|c| -c).collect();
    num[0] += int(1);
    num[1] -= int(8);
    debug_assert!(num[0].is_zero());
    (0..=n).map(|k| &num[k + 1] / int(6)).collect()
}

/// The constant, `1/x` and `1/x²` coefficients of the regular part of `g` in
/// `g = (5x − 1)/(18x²) · √(1+4x) · √(1 − 20x) + regular`.
pub fn g_regular_part() -> [BigRational; 3] {
    [
        BigRational::new((-16).into(), 9.into()),
        BigRational::new((-13).into(), 18.into()),
        BigRational::new(1.into(), 18.into()),
    ]
}

/// Expands `(5x − 1)/(18x²) · S + r_0 + r_1/x + r_2/x²` and returns its
/// coefficients of `x^0..=x^n`, or `None` when the negative powers of `x`
/// fail to cancel.
pub fn g_from_decomposition(regular: &[BigRational; 3], n: usize) -> Option<Vec<BigRational>> {
    let s = sqrt_series(&[int(1), int(-16), int(-80)], n + 2);
    // coefficient of x^k in (5x − 1) S / 18, shifted down by two
    let at = |k: usize| {
        let mut v = -&s[k];
        if k >= 1 {
            v += &s[k - 1] * int(5);
        }
        v / int(18)
    };
    if !(at(0) + &regular[2]).is_zero() || !(at(1) + &regular[1]).is_zero() {
        return None;
    }
    Some(
        (0..=n)
            .map(|k| {
                if k == 0 {
                    at(2) + &regular[0]
                } else {
                    at(k + 2)
                }
            })
            .collect(),
    )
}

/// `g(x) = f(x) + f(x)²` from the closed form of `f`, for `0 < x ≤ 1/20`.
pub fn g_closed(x: f64) -> f64 {
    let f = (1.0 - 8.0 * x - (1.0 - 16.0 * x - 80.0 * x * x).sqrt()) / (6.0 * x);
    f + f * f
}

/// The singular decomposition of `g` at `x`, with regular part
/// `r_0 + r_1/x + r_2/x²`.
pub fn g_decomposed(x: f64, regular: [f64; 3]) -> f64 {
    let singular =
        (5.0 * x - 1.0) / (18.0 * x * x) * (1.0 + 4.0 * x).sqrt() * (1.0 - 20.0 * x).sqrt();
    singular + regular[0] + regular[1] / x + regular[2] / (x * x)
}

/// Largest `|g_closed − g_decomposed|` over a grid approaching `1/20`.
pub fn g_decomposition_residual(regular: [f64; 3]) -> f64 {
    (1..=100)
        .map(|k| ALPHA * (1.0 - 0.5f64.powi(k % 40 + 1)))
        .map(|x| (g_closed(x) - g_decomposed(x, regular)).abs())
        .fold(0.0, f64::max)
}

/// `t_n = s_n / 20^n` for `n = 0..=n`, by the scaled linear recurrence.
fn scaled_sqrt(n: usize) -> Vec<f64> {
    let mut t = vec![1.0, -8.0 / 20.0];
    while t.len() <= n {
        let k = t.len() - 1;
        let kf = k as f64;
        let next =
            ((16.0 * kf - 8.0) * t[k] + 80.0 * (kf - 2.0) * t[k - 1] / 20.0) / (20.0 * (kf + 1.0));
        t.push(next);
    }
    t.truncate(n + 1);
    t
}

/// `a_n / 20^n` for `n = 0..=n`.
pub fn scaled_f_coeffs(n: usize) -> Vec<f64> {
    let t = scaled_sqrt(n + 1);
    let mut a = vec![0.0];
    a.extend((1..=n).map(|k| -t[k + 1] * 20.0 / 6.0));
    a
}

/// `c_n = b_n / 20^n` for `n = 0..=n`.
pub fn scaled_coeffs(n: usize) -> Vec<f64> {
    let a = scaled_f_coeffs(n + 1);
    let mut c = vec![0.0];
    c.extend((1..=n).map(|k| a[k] + (20.0 * a[k + 1] - 8.0 * a[k]) / 3.0));
    c
}

/// `x / 20^n` as a float, for exact coefficients of any size.
pub fn scale_exact(x: &BigUint, n: usize) -> f64 {
    let r = BigRational::new(BigInt::from(x.clone()), BigInt::from(20u32).pow(n as u32));
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact and scaled coefficients side by side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesTable {
    #[serde(serialize_with = "crate::text::display_seq")]
    pub a: Vec<BigUint>,
    #[serde(serialize_with = "crate::text::display_seq")]
    pub b: Vec<BigUint>,
    pub c: Vec<f64>,
}

impl SeriesTable {
    pub fn new(n: usize) -> Self {
        SeriesTable {
            a: f_coeffs_fast(n),
            b: g_coeffs_fast(n),
            c: scaled_coeffs(n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (usize, usize),
}

/// Least-squares line through `(log n, log series[n])` for `n_min ≤ n ≤ n_max`.
pub fn fit_exponent(series: &[f64], n_min: usize, n_max: usize) -> Result<ExponentFit> {
    if n_min < 2 || n_max <= n_min {
        return Err(Error::InvalidArgument(format!(
            "degenerate fit window [{n_min}, {n_max}]"
        )));
    }
    if n_max >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "series has no term {n_max}"
        )));
    }
    let pts: Vec<(f64, f64)> = (n_min..=n_max)
        .map(|k| ((k as f64).ln(), series[k].ln()))
        .collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::InvalidArgument(
            "series must be positive on the fit window".into(),
        ));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (rss / (m - 2.0) / sxx).sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
        window: (n_min, n_max),
    })
}

/// Singularity of `f` and `g`.
pub const ALPHA: f64 = 1.0 / 20.0;

/// `Γ(−1/2) = −2√π`.
fn gamma_minus_half() -> f64 {
    -2.0 * std::f64::consts::PI.sqrt()
}

/// `h(α) / Γ(−1/2)` for `f = h(x) (1 − 20x)^{1/2} + regular`, where
/// `h(x) = −√(1+4x) / (6x)`: the limit of `a_n n^{3/2} / 20^n`.
pub fn polya_constant_f() -> f64 {
    let h = -(1.0 + 4.0 * ALPHA).sqrt() / (6.0 * ALPHA);
    h / gamma_minus_half()
}

/// The same for `g`, with `h(x) = (5x − 1) √(1+4x) / (18x²)`.
pub fn polya_constant_g() -> f64 {
    let h = (5.0 * ALPHA - 1.0) * (1.0 + 4.0 * ALPHA).sqrt() / (18.0 * ALPHA * ALPHA);
    h / gamma_minus_half()
}

/// Largest `n` for which [`pcf_bounds`] uses the exact `φ_n`.
pub const EXACT_PHI_MAX: usize = 6;

/// Bounds on the probability that the first wave topples exactly `n` cells:
/// `φ · b_n / (5 · 20^n)` with `φ` between `7/48` and 1, or the exact `φ_n`
/// for small `n`. `c` holds the scaled coefficients.
pub fn pcf_bounds(c: &[f64], n: usize) -> Result<(f64, f64)> {
    let cn = *c
        .get(n)
        .ok_or_else(|| Error::InvalidArgument(format!("series has no term {n}")))?;
    let upper = cn / 5.0;
    if (1..=EXACT_PHI_MAX).contains(&n) {
        let phi = filling::phi_n(n)?.to_f64().unwrap_or(f64::NAN);
        return Ok((phi * upper, phi * upper));
    }
    Ok((upper * 7.0 / 48.0, upper))
}
