//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1); odd indices are the embedded Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Absolute error target for the whole integral.
    pub abs_tol: f64,
    /// Maximum number of subinterval evaluations before giving up.
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-15, max_panels: 2_000_000 }
    }
}

fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let estimate = kronrod * half;
    let error = ((kronrod - gauss) * half).magnitude();
    (estimate, error)
}

/// Integrates `f` over `[a, b]`, starting from the panels delimited by
/// `breakpoints` (sorted, all inside `[a, b]`) each further split so that
/// no initial panel is wider than `max_initial_width`.
///
/// Panels are bisected until their Kronrod/Gauss discrepancy drops below a
/// share of `abs_tol` proportional to their width.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    max_initial_width: f64,
    opts: QuadratureOptions,
) -> Result<T> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::InvalidInput(format!("bad integration interval [{a}, {b}]")));
    }
    let mut edges = vec![a];
    edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(|x, y| x.total_cmp(y));
    edges.dedup();

    let total_width = b - a;
    let mut stack: Vec<(f64, f64)> = Vec::new();
    for w in edges.windows(2).rev() {
        let (lo, hi) = (w[0], w[1]);
        let pieces = if max_initial_width > 0.0 {
            ((hi - lo) / max_initial_width).ceil().max(1.0) as usize
        } else {
            1
        };
        let step = (hi - lo) / pieces as f64;
        for i in (0..pieces).rev() {
            let x0 = lo + step * i as f64;
            let x1 = if i + 1 == pieces { hi } else { lo + step * (i + 1) as f64 };
            stack.push((x0, x1));
        }
    }

    let mut sum = T::zero();
    let mut panels = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        panels += 1;
        if panels > opts.max_panels {
            return Err(Error::QuadratureNotConverged(format!(
                "exceeded {} panels on [{a:.3e}, {b:.3e}]",
                opts.max_panels
            )));
        }
        let (est, err) = gk15(&f, lo, hi);
        let local_tol = opts.abs_tol * (hi - lo) / total_width;
        let mid = 0.5 * (lo + hi);
        if err <= local_tol || !(mid > lo && mid < hi) {
            if err > local_tol && err > 1e3 * local_tol {
                return Err(Error::QuadratureNotConverged(format!(
                    "panel [{lo:.6e}, {hi:.6e}] cannot be refined (error {err:.3e})"
                )));
            }
            sum = sum + est;
        } else {
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    Ok(sum)
}

/// Integrates `f` over `[0, ∞)` via the map ω = x / (1 − x).
/// Suitable for non-oscillatory integrands decaying at least like 1/ω².
pub fn integrate_half_line<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    opts: QuadratureOptions,
) -> Result<T> {
    let mapped = |x: f64| {
        if x >= 1.0 {
            return T::zero();
        }
        let one_minus = 1.0 - x;
        let w = x / one_minus;
        f(w) * (1.0 / (one_minus * one_minus))
    };
    integrate(mapped, 0.0, 1.0, &[], 0.01, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x: f64| 3.0 * x * x, 0.0, 2.0, &[], 0.0, QuadratureOptions::default())
            .unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex() {
        let t = 50.0;
        let v = integrate(
            |w: f64| Complex64::new(0.0, -w * t).exp(),
            -1.0,
            1.0,
            &[],
            0.1,
            QuadratureOptions { abs_tol: 1e-13, ..Default::default() },
        )
        .unwrap();
        let exact = 2.0 * (t as f64).sin() / t;
        assert!((v.re - exact).abs() < 1e-12 && v.im.abs() < 1e-12, "{v}");
    }

    #[test]
    fn half_line_lorentzian() {
        let v = integrate_half_line(
            |w: f64| 1.0 / (1.0 + w * w),
            QuadratureOptions { abs_tol: 1e-12, ..Default::default() },
        )
        .unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn refuses_to_loop_forever() {
        let err = integrate(
            |x: f64| if x > 1.0 / 3.0 { 1.0 } else { 0.0 },
            0.0,
            1.0,
            &[],
            0.0,
            QuadratureOptions { abs_tol: 1e-30, max_panels: 100 },
        );
        assert!(matches!(err, Err(Error::QuadratureNotConverged(_))));
    }
}
