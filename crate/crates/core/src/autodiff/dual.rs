//! Forward-mode duals carrying first and (optionally) second derivatives with
//! respect to the two spatial inputs.

use std::ops::{Add, Mul, Neg, Sub};

use super::Real;

/// A value together with its spatial gradient and, when requested, its
/// Hessian (`d_xy` stored once).
///
/// Second-order channels are only propagated when at least one operand was
/// created in second-order mode; otherwise they stay at zero and cost nothing
/// beyond the copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2<T> {
    pub value: T,
    pub d_x: T,
    pub d_y: T,
    pub d_xx: T,
    pub d_xy: T,
    pub d_yy: T,
    second: bool,
}

impl<T: Real> Dual2<T> {
    pub fn constant(value: T) -> Self {
        let z = T::zero();
        Dual2 {
            value,
            d_x: z,
            d_y: z,
            d_xx: z,
            d_xy: z,
            d_yy: z,
            second: false,
        }
    }

    /// The input coordinate `x` (unit `d_x` seed).
    pub fn var_x(x: T, second_order: bool) -> Self {
        Dual2 {
            d_x: T::constant(1.0),
            second: second_order,
            ..Self::constant(x)
        }
    }

    /// The input coordinate `y` (unit `d_y` seed).
    pub fn var_y(y: T, second_order: bool) -> Self {
        Dual2 {
            d_y: T::constant(1.0),
            second: second_order,
            ..Self::constant(y)
        }
    }

    /// Build from explicit channels. Passing any second-order channel turns
    /// on second-order propagation.
    pub fn from_parts(value: T, grad: [T; 2], hessian: Option<[T; 3]>) -> Self {
        let z = T::zero();
        let (h, second) = match hessian {
            Some(h) => (h, true),
            None => ([z, z, z], false),
        };
        Dual2 {
            value,
            d_x: grad[0],
            d_y: grad[1],
            d_xx: h[0],
            d_xy: h[1],
            d_yy: h[2],
            second,
        }
    }

    pub fn is_second_order(&self) -> bool {
        self.second
    }

    /// Apply a scalar function given its value and first two derivatives at
    /// `self.value`.
    #[inline]
    pub fn chain(self, f: T, f1: T, f2: T) -> Self {
        let mut out = Dual2 {
            value: f,
            d_x: f1 * self.d_x,
            d_y: f1 * self.d_y,
            d_xx: T::zero(),
            d_xy: T::zero(),
            d_yy: T::zero(),
            second: self.second,
        };
        if self.second {
            out.d_xx = f2 * self.d_x * self.d_x + f1 * self.d_xx;
            out.d_xy = f2 * self.d_x * self.d_y + f1 * self.d_xy;
            out.d_yy = f2 * self.d_y * self.d_y + f1 * self.d_yy;
        }
        out
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        let f1 = -(t * t) + 1.0;
        let f2 = t * f1 * -2.0;
        self.chain(t, f1, f2)
    }

    pub fn sin(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn recip(self) -> Self {
        let r = T::constant(1.0) / self.value;
        let r2 = r * r;
        self.chain(r, -r2, r2 * r * 2.0)
    }

    /// Multiply every channel by a scalar of the underlying type.
    pub fn scale(self, c: T) -> Self {
        Dual2 {
            value: self.value * c,
            d_x: self.d_x * c,
            d_y: self.d_y * c,
            d_xx: self.d_xx * c,
            d_xy: self.d_xy * c,
            d_yy: self.d_yy * c,
            second: self.second,
        }
    }

    pub fn grad(&self) -> [T; 2] {
        [self.d_x, self.d_y]
    }

    /// Laplacian `d_xx + d_yy`; zero unless second-order mode is active.
    pub fn laplacian(&self) -> T {
        self.d_xx + self.d_yy
    }
}

impl<T: Real> Add for Dual2<T> {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Dual2 {
            value: self.value + o.value,
            d_x: self.d_x + o.d_x,
            d_y: self.d_y + o.d_y,
            d_xx: self.d_xx + o.d_xx,
            d_xy: self.d_xy + o.d_xy,
            d_yy: self.d_yy + o.d_yy,
            second: self.second || o.second,
        }
    }
}

impl<T: Real> Sub for Dual2<T> {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<T: Real> Neg for Dual2<T> {
    type Output = Self;

    fn neg(self) -> Self {
        Dual2 {
            value: -self.value,
            d_x: -self.d_x,
            d_y: -self.d_y,
            d_xx: -self.d_xx,
            d_xy: -self.d_xy,
            d_yy: -self.d_yy,
            second: self.second,
        }
    }
}

impl<T: Real> Mul for Dual2<T> {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        let second = self.second || o.second;
        let mut out = Dual2 {
            value: self.value * o.value,
            d_x: self.d_x * o.value + self.value * o.d_x,
            d_y: self.d_y * o.value + self.value * o.d_y,
            d_xx: T::zero(),
            d_xy: T::zero(),
            d_yy: T::zero(),
            second,
        };
        if second {
            out.d_xx = self.d_xx * o.value + self.d_x * o.d_x * 2.0 + self.value * o.d_xx;
            out.d_xy = self.d_xy * o.value
                + self.d_x * o.d_y
                + self.d_y * o.d_x
                + self.value * o.d_xy;
            out.d_yy = self.d_yy * o.value + self.d_y * o.d_y * 2.0 + self.value * o.d_yy;
        }
        out
    }
}

impl<T: Real> std::ops::Div for Dual2<T> {
    type Output = Self;

    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Real> Add<f64> for Dual2<T> {
    type Output = Self;

    fn add(self, c: f64) -> Self {
        Dual2 {
            value: self.value + c,
            ..self
        }
    }
}

impl<T: Real> Sub<f64> for Dual2<T> {
    type Output = Self;

    fn sub(self, c: f64) -> Self {
        Dual2 {
            value: self.value - c,
            ..self
        }
    }
}

impl<T: Real> Mul<f64> for Dual2<T> {
    type Output = Self;

    fn mul(self, c: f64) -> Self {
        Dual2 {
            value: self.value * c,
            d_x: self.d_x * c,
            d_y: self.d_y * c,
            d_xx: self.d_xx * c,
            d_xy: self.d_xy * c,
            d_yy: self.d_yy * c,
            second: self.second,
        }
    }
}

/// `tanh` lifted to duals.
pub fn dual_tanh<T: Real>(x: Dual2<T>) -> Dual2<T> {
    x.tanh()
}
