//! Scalar oracle: the bounded solution of `u″ + ((1−2s)/t) u′ = a u`,
//! `u(0) = φ`, namely
//!
//! ```text
//! u(t) = φ · 2^{1−s}/Γ(s) · x^s K_s(x),   x = √a·t
//! ```
//!
//! with `K_ν(x) = ∫₀^∞ e^{−x cosh τ} cosh(ντ) dτ` evaluated by the
//! trapezoidal rule (exponentially convergent for this integrand).

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Exponent below which `e^{·}` underflows.
const UNDERFLOW: f64 = -740.0;

/// `e^x K_ν(x)` for `x > 0`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k_scaled needs x > 0");
    let nu = nu.abs();
    let f = |tau: f64| (-x * (tau.cosh() - 1.0)).exp() * (nu * tau).cosh();
    // truncate where the integrand is below e^{-45} of its peak scale
    let mut tmax = 1.0;
    while -x * (f64::cosh(tmax) - 1.0) + nu * tmax > -45.0 {
        tmax *= 1.25;
    }
    let mut h = tmax / 16.0;
    let mut sum = 0.5 * (f(0.0) + f(tmax));
    let mut k = 1;
    while (k as f64) * h < tmax {
        sum += f(k as f64 * h);
        k += 1;
    }
    let mut est = sum * h;
    for _ in 0..14 {
        // refine: add midpoints
        let mut mid = 0.0;
        let mut t = 0.5 * h;
        while t < tmax {
            mid += f(t);
            t += h;
        }
        sum += mid;
        h *= 0.5;
        let next = sum * h;
        let done = (next - est).abs() <= 4e-15 * next.abs();
        est = next;
        if done {
            break;
        }
    }
    est
}

/// `K_ν(x)`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselValue {
    pub u: f64,
    pub du: f64,
    /// `x^s e^{−x}` underflowed; `u` and `du` were set to zero.
    pub underflow: bool,
}

fn check(a: f64, s: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// `u(t)` and `u′(t)` of the bounded scalar extension with `A = a·id`.
///
/// Uses `(x^ν K_ν)′ = −x^ν K_{ν−1}` and `K_{−ν} = K_ν`.
pub fn bessel_scalar_extension(a: f64, s: f64, phi: f64, t: f64) -> Result<BesselValue> {
    check(a, s)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(
            "t",
            format!("must be finite and nonnegative, got {t}"),
        ));
    }
    let ra = a.sqrt();
    if t == 0.0 {
        let du = if phi == 0.0 || s > 0.5 {
            0.0
        } else if s == 0.5 {
            -ra * phi
        } else {
            f64::NEG_INFINITY * phi.signum()
        };
        return Ok(BesselValue {
            u: phi,
            du,
            underflow: false,
        });
    }
    let x = ra * t;
    let log_scale = s * x.ln() - x;
    if log_scale < UNDERFLOW {
        return Ok(BesselValue {
            u: 0.0,
            du: 0.0,
            underflow: true,
        });
    }
    let pref = phi * 2f64.powf(1.0 - s) / gamma(s) * log_scale.exp();
    Ok(BesselValue {
        u: pref * bessel_k_scaled(s, x),
        du: -pref * ra * bessel_k_scaled(1.0 - s, x),
        underflow: false,
    })
}

/// `C(s) = lim_{t→0} −t^{1−2s}u′(t)/φ` for `a = 1`, by Richardson
/// extrapolation of `x^ν K_ν(x)`, `ν = 1 − s`, whose small-`x` expansion
/// has exponents `0, 2ν, 2, 2ν+2, 4`.
pub fn frac_constant(s: f64) -> Result<f64> {
    check(1.0, s)?;
    let nu = 1.0 - s;
    let mut exps: Vec<f64> = Vec::new();
    for e in [2.0 * nu, 2.0, 2.0 * nu + 2.0, 4.0, 2.0 * nu + 4.0] {
        if exps.iter().all(|p| (p - e).abs() > 0.05) {
            exps.push(e);
        }
    }
    let x0 = 0.05;
    let levels = exps.len() + 1;
    let mut col: Vec<f64> = (0..levels)
        .map(|k| {
            let x = x0 * 0.5f64.powi(k as i32);
            x.powf(nu) * bessel_k(nu, x)
        })
        .collect();
    for p in exps {
        let r = 2f64.powf(p);
        col = col
            .windows(2)
            .map(|w| (r * w[1] - w[0]) / (r - 1.0))
            .collect();
    }
    Ok(2f64.powf(1.0 - s) / gamma(s) * col[0])
}

/// Integrates `u″ = a u − ((1−2s)/t) u′` from `t0` to `t1` with classical RK4,
/// starting from the oracle values at `t0`; returns `(u, u′)` at `t1`.
pub fn bessel_ode_transport(
    a: f64,
    s: f64,
    phi: f64,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(f64, f64)> {
    check(a, s)?;
    if !(t0 > 0.0 && t1 > 0.0) || steps == 0 {
        return Err(Error::param(
            "t",
            "endpoints must be positive and steps nonzero",
        ));
    }
    let start = bessel_scalar_extension(a, s, phi, t0)?;
    let alpha = 1.0 - 2.0 * s;
    let rhs = |t: f64, y: [f64; 2]| [y[1], a * y[0] - alpha / t * y[1]];
    let h = (t1 - t0) / steps as f64;
    let mut y = [start.u, start.du];
    let mut t = t0;
    for _ in 0..steps {
        let k1 = rhs(t, y);
        let k2 = rhs(
            t + 0.5 * h,
            [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
        );
        let k3 = rhs(
            t + 0.5 * h,
            [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]],
        );
        let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    Ok((y[0], y[1]))
}

/// `|u″ + ((1−2s)/t) u′ − a u|` at `t > 0`, with `u″` from Richardson-extrapolated
/// central differences of `u′`.
pub fn bessel_ode_residual(a: f64, s: f64, phi: f64, t: f64) -> Result<f64> {
    let diff = |h: f64| -> Result<f64> {
        let p = bessel_scalar_extension(a, s, phi, t + h)?;
        let m = bessel_scalar_extension(a, s, phi, t - h)?;
        Ok((p.du - m.du) / (2.0 * h))
    };
    let h = 2e-3 * t;
    let d2 = (4.0 * diff(0.5 * h)? - diff(h)?) / 3.0;
    let c = bessel_scalar_extension(a, s, phi, t)?;
    Ok((d2 + (1.0 - 2.0 * s) / t * c.du - a * c.u).abs())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    /// `K_ν = π/(2 sin νπ)·(I_{−ν} − I_ν)` from the power series of `I`.
    fn k_series(nu: f64, x: f64) -> f64 {
        let i = |mu: f64| {
            let mut sum = 0.0;
            for k in 0..60 {
                let kf = k as f64;
                sum += (0.5 * x).powf(2.0 * kf + mu) / (gamma(kf + 1.0) * gamma(kf + mu + 1.0));
            }
            sum
        };
        PI / (2.0 * (nu * PI).sin()) * (i(-nu) - i(nu))
    }

    #[test]
    fn half_order_closed_form() {
        for x in [1e-3, 0.1, 1.0, 7.5, 40.0] {
            let exact = (PI / (2.0 * x)).sqrt() * (-x as f64).exp();
            assert!((bessel_k(0.5, x) / exact - 1.0).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn series_cross_check() {
        for nu in [0.25, 0.4, 0.75] {
            for x in [0.05, 0.3, 1.0, 2.5] {
                let a = bessel_k(nu, x);
                let b = k_series(nu, x);
                assert!((a / b - 1.0).abs() < 1e-11, "nu={nu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn exponential_case() {
        let v = bessel_scalar_extension(4.0, 0.5, 1.0, 1.0).unwrap();
        assert!((v.u - (-2.0f64).exp()).abs() < 1e-14);
        assert!((v.du + 2.0 * (-2.0f64).exp()).abs() < 1e-13);
        let v0 = bessel_scalar_extension(3.0, 0.3, 1.7, 0.0).unwrap();
        assert_eq!(v0.u, 1.7);
        assert!(bessel_scalar_extension(3.0, 0.3, 1.7, 1e-12).unwrap().u > 1.69);
    }

    #[test]
    fn agrees_with_ode_integration() {
        let oracle = bessel_scalar_extension(1.0, 0.25, 1.0, 0.7).unwrap();
        let (u, du) = bessel_ode_transport(1.0, 0.25, 1.0, 0.05, 0.7, 20000).unwrap();
        assert!((u - oracle.u).abs() < 1e-8, "{u} vs {}", oracle.u);
        assert!((du - oracle.du).abs() < 1e-8);
        for s in [0.2, 0.5, 0.8] {
            for t in [0.1, 0.9, 3.0] {
                assert!(bessel_ode_residual(2.0, s, 1.0, t).unwrap() <= 1e-8 * 2.0);
            }
        }
    }

    #[test]
    fn derived_constant_matches_gamma_formula() {
        assert!((frac_constant(0.5).unwrap() - 1.0).abs() < 1e-12);
        for s in [0.1, 0.25, 0.4, 0.6, 0.75, 0.9] {
            let formula = 2f64.powf(1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s);
            let c = frac_constant(s).unwrap();
            assert!((c / formula - 1.0).abs() < 1e-8, "s={s}: {c} vs {formula}");
        }
    }

    #[test]
    fn bounded_decreasing_and_underflow() {
        let mut prev = 1.0;
        for k in 1..40 {
            let v = bessel_scalar_extension(1.0, 0.3, 1.0, k as f64 * 0.25).unwrap();
            assert!(v.u < prev && v.u > 0.0 && v.du < 0.0);
            prev = v.u;
        }
        let far = bessel_scalar_extension(1.0, 0.3, 1.0, 2000.0).unwrap();
        assert!(far.underflow && far.u == 0.0);
    }
}
