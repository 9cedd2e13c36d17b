//! Second-order forward-mode differentiation.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `P` input variables. Pushing jets through the closed-form
//! unit-ball flight yields the exact Jacobian and Laplacian of the
//! end-point map wherever the flight is smooth, with no step-size error.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::{cst, Real};

#[derive(Clone, Copy, Debug)]
pub struct Jet<T, const P: usize> {
    pub v: T,
    pub g: [T; P],
    pub h: [[T; P]; P],
}

impl<T: Real, const P: usize> Jet<T, P> {
    pub fn constant(v: T) -> Self {
        Jet {
            v,
            g: [T::zero(); P],
            h: [[T::zero(); P]; P],
        }
    }

    /// The `i`-th input variable.
    pub fn variable(v: T, i: usize) -> Self {
        let mut jet = Self::constant(v);
        jet.g[i] = T::one();
        jet
    }

    /// A value with a prescribed (constant) gradient row, zero curvature.
    pub fn linear(v: T, g: [T; P]) -> Self {
        Jet {
            v,
            g,
            h: [[T::zero(); P]; P],
        }
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let mut out = Jet::constant(s);
        let half_inv = (cst::<T>(2.0) * s).recip();
        for i in 0..P {
            out.g[i] = self.g[i] * half_inv;
        }
        for i in 0..P {
            for j in 0..P {
                out.h[i][j] = (self.h[i][j] - cst::<T>(2.0) * out.g[i] * out.g[j]) * half_inv;
            }
        }
        out
    }

    pub fn scale(self, c: T) -> Self {
        let mut out = self;
        out.v *= c;
        for i in 0..P {
            out.g[i] *= c;
            for j in 0..P {
                out.h[i][j] *= c;
            }
        }
        out
    }

    /// Trace of the Hessian.
    pub fn laplacian(&self) -> T {
        let mut acc = T::zero();
        for i in 0..P {
            acc += self.h[i][i];
        }
        acc
    }
}

impl<T: Real, const P: usize> Add for Jet<T, P> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..P {
            self.g[i] += rhs.g[i];
            for j in 0..P {
                self.h[i][j] += rhs.h[i][j];
            }
        }
        self
    }
}

impl<T: Real, const P: usize> Sub for Jet<T, P> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for i in 0..P {
            self.g[i] -= rhs.g[i];
            for j in 0..P {
                self.h[i][j] -= rhs.h[i][j];
            }
        }
        self
    }
}

impl<T: Real, const P: usize> Neg for Jet<T, P> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real, const P: usize> Mul for Jet<T, P> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Jet::constant(self.v * rhs.v);
        for i in 0..P {
            out.g[i] = self.g[i] * rhs.v + self.v * rhs.g[i];
        }
        for i in 0..P {
            for j in 0..P {
                out.h[i][j] = self.h[i][j] * rhs.v
                    + self.g[i] * rhs.g[j]
                    + self.g[j] * rhs.g[i]
                    + self.v * rhs.h[i][j];
            }
        }
        out
    }
}

impl<T: Real, const P: usize> Div for Jet<T, P> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.v.recip();
        let v = self.v * inv;
        let mut out = Jet::constant(v);
        for i in 0..P {
            out.g[i] = (self.g[i] - v * rhs.g[i]) * inv;
        }
        for i in 0..P {
            for j in 0..P {
                out.h[i][j] = (self.h[i][j]
                    - out.g[i] * rhs.g[j]
                    - out.g[j] * rhs.g[i]
                    - v * rhs.h[i][j])
                    * inv;
            }
        }
        out
    }
}

/// `(cos k d, sin k d)` from jet-valued `(cos d, sin d)` by binary powering.
pub fn rotation_power_jet<T: Real, const P: usize>(
    cos_d: Jet<T, P>,
    sin_d: Jet<T, P>,
    mut k: usize,
) -> (Jet<T, P>, Jet<T, P>) {
    let mut base = (cos_d, sin_d);
    let mut acc = (Jet::constant(T::one()), Jet::constant(T::zero()));
    while k > 0 {
        if k & 1 == 1 {
            acc = (
                acc.0 * base.0 - acc.1 * base.1,
                acc.0 * base.1 + acc.1 * base.0,
            );
        }
        base = (
            base.0 * base.0 - base.1 * base.1,
            (base.0 * base.1).scale(cst(2.0)),
        );
        k >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x, y) = x^2 y + sqrt(x / y)
    fn f(x: f64, y: f64) -> f64 {
        x * x * y + (x / y).sqrt()
    }

    #[test]
    fn jet_matches_finite_differences() {
        let (x0, y0) = (1.3, 0.7);
        let x = Jet::<f64, 2>::variable(x0, 0);
        let y = Jet::<f64, 2>::variable(y0, 1);
        let out = x * x * y + (x / y).sqrt();

        let h = 1e-5;
        let gx = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
        let gy = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);
        assert!((out.g[0] - gx).abs() < 1e-9);
        assert!((out.g[1] - gy).abs() < 1e-9);

        let hxx = (f(x0 + h, y0) - 2.0 * f(x0, y0) + f(x0 - h, y0)) / (h * h);
        let hyy = (f(x0, y0 + h) - 2.0 * f(x0, y0) + f(x0, y0 - h)) / (h * h);
        let hxy = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) - f(x0 - h, y0 + h)
            + f(x0 - h, y0 - h))
            / (4.0 * h * h);
        assert!((out.h[0][0] - hxx).abs() < 1e-5);
        assert!((out.h[1][1] - hyy).abs() < 1e-5);
        assert!((out.h[0][1] - hxy).abs() < 1e-5);
        assert!((out.h[0][1] - out.h[1][0]).abs() < 1e-12);
    }

    #[test]
    fn rotation_power_matches_trig() {
        let theta = 0.37f64;
        let c = Jet::<f64, 1>::variable(theta.cos(), 0);
        let s = Jet::<f64, 1>::constant(theta.sin());
        for k in [0usize, 1, 2, 5, 17, 1000] {
            let (ck, _sk) = rotation_power_jet(c, s, k);
            assert!(
                (ck.v - (k as f64 * theta).cos()).abs() < 1e-10,
                "k = {k}"
            );
        }
    }
}
