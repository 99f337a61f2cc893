//! Forward-mode automatic differentiation up to second order.
//!
//! [`Jet1`] carries value + gradient, [`Jet2`] additionally the full
//! (symmetric) Hessian. Propagation rules are exact to machine precision;
//! there is no expression swell because jets are evaluated, not rewritten.

use nalgebra::{DMatrix, DVector};

/// Arithmetic shared by plain values and jets so a single expression walker
/// serves orders 0, 1 and 2.
pub trait JetArith: Clone {
    /// Highest derivative order carried (0 for `f64`).
    const ORDER: usize;

    /// Lifts a constant into the arithmetic; `like` fixes dimensions.
    fn constant(c: f64, like: &[Self]) -> Self;
    /// The underlying scalar value.
    fn value(&self) -> f64;

    fn neg(&self) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    /// Power with constant exponent.
    fn powc(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn ln(&self) -> Self;
}

impl JetArith for f64 {
    const ORDER: usize = 0;

    fn constant(c: f64, _like: &[Self]) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn neg(&self) -> Self {
        -self
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn powc(&self, c: f64) -> Self {
        if c.fract() == 0.0 && c.abs() < 64.0 {
            self.powi(c as i32)
        } else {
            self.powf(c)
        }
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
}

/// First-order jet: value and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub g: DVector<f64>,
}

impl Jet1 {
    /// Seeds the `n` coordinate jets at ambient position `coords`.
    pub fn seed(coords: &[f64]) -> Vec<Jet1> {
        let n = coords.len();
        coords
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut g = DVector::zeros(n);
                g[i] = 1.0;
                Jet1 { v: c, g }
            })
            .collect()
    }

    /// Applies the chain rule for a unary map with derivative `d1`.
    fn chain(&self, v: f64, d1: f64) -> Jet1 {
        Jet1 {
            v,
            g: &self.g * d1,
        }
    }
}

impl JetArith for Jet1 {
    const ORDER: usize = 1;

    fn constant(c: f64, like: &[Self]) -> Self {
        let n = like.first().map_or(0, |j| j.g.len());
        Jet1 {
            v: c,
            g: DVector::zeros(n),
        }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn neg(&self) -> Self {
        Jet1 {
            v: -self.v,
            g: -&self.g,
        }
    }
    fn add(&self, rhs: &Self) -> Self {
        Jet1 {
            v: self.v + rhs.v,
            g: &self.g + &rhs.g,
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Jet1 {
            v: self.v - rhs.v,
            g: &self.g - &rhs.g,
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        Jet1 {
            v: self.v * rhs.v,
            g: &self.g * rhs.v + &rhs.g * self.v,
        }
    }
    fn div(&self, rhs: &Self) -> Self {
        let v = self.v / rhs.v;
        Jet1 {
            v,
            g: (&self.g - &rhs.g * v) / rhs.v,
        }
    }
    fn powc(&self, c: f64) -> Self {
        let v = JetArith::powc(&self.v, c);
        self.chain(v, c * JetArith::powc(&self.v, c - 1.0))
    }
    fn sin(&self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(&self) -> Self {
        let v = self.v.exp();
        self.chain(v, v)
    }
    fn sqrt(&self) -> Self {
        let v = self.v.sqrt();
        self.chain(v, 0.5 / v)
    }
    fn ln(&self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
}

/// Second-order jet: value, gradient and symmetric Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl Jet2 {
    /// Seeds the `n` coordinate jets at ambient position `coords`.
    pub fn seed(coords: &[f64]) -> Vec<Jet2> {
        let n = coords.len();
        coords
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut g = DVector::zeros(n);
                g[i] = 1.0;
                Jet2 {
                    v: c,
                    g,
                    h: DMatrix::zeros(n, n),
                }
            })
            .collect()
    }

    /// Chain rule for a unary map: `h -> d1·h + d2·g gᵀ`.
    fn chain(&self, v: f64, d1: f64, d2: f64) -> Jet2 {
        Jet2 {
            v,
            g: &self.g * d1,
            h: &self.h * d1 + &self.g * self.g.transpose() * d2,
        }
    }
}

impl JetArith for Jet2 {
    const ORDER: usize = 2;

    fn constant(c: f64, like: &[Self]) -> Self {
        let n = like.first().map_or(0, |j| j.g.len());
        Jet2 {
            v: c,
            g: DVector::zeros(n),
            h: DMatrix::zeros(n, n),
        }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn neg(&self) -> Self {
        Jet2 {
            v: -self.v,
            g: -&self.g,
            h: -&self.h,
        }
    }
    fn add(&self, rhs: &Self) -> Self {
        Jet2 {
            v: self.v + rhs.v,
            g: &self.g + &rhs.g,
            h: &self.h + &rhs.h,
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Jet2 {
            v: self.v - rhs.v,
            g: &self.g - &rhs.g,
            h: &self.h - &rhs.h,
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        let cross = &self.g * rhs.g.transpose();
        Jet2 {
            v: self.v * rhs.v,
            g: &self.g * rhs.v + &rhs.g * self.v,
            h: &self.h * rhs.v + &rhs.h * self.v + &cross + cross.transpose(),
        }
    }
    fn div(&self, rhs: &Self) -> Self {
        // f = a/b  =>  a = f b, solve for f's jet.
        let v = self.v / rhs.v;
        let g = (&self.g - &rhs.g * v) / rhs.v;
        let cross = &g * rhs.g.transpose();
        let h = (&self.h - &cross - cross.transpose() - &rhs.h * v) / rhs.v;
        Jet2 { v, g, h }
    }
    fn powc(&self, c: f64) -> Self {
        let v = JetArith::powc(&self.v, c);
        let d1 = c * JetArith::powc(&self.v, c - 1.0);
        let d2 = c * (c - 1.0) * JetArith::powc(&self.v, c - 2.0);
        self.chain(v, d1, d2)
    }
    fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn exp(&self) -> Self {
        let v = self.v.exp();
        self.chain(v, v, v)
    }
    fn sqrt(&self) -> Self {
        let v = self.v.sqrt();
        let d1 = 0.5 / v;
        self.chain(v, d1, -0.5 * d1 / self.v)
    }
    fn ln(&self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(self.v.ln(), inv, -inv * inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScalarField;

    /// Central finite differences of order 2 used as the independent check.
    fn fd_grad(f: &ScalarField, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn fd_hess(f: &ScalarField, x: &[f64], h: f64) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut out = vec![vec![0.0; n]; n];
        let at = |dx: &[f64]| {
            let y: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
            f.value(&y).unwrap()
        };
        for i in 0..n {
            for j in 0..n {
                let mut d = vec![0.0; n];
                d[i] += h;
                d[j] += h;
                let fpp = at(&d);
                d[i] -= 2.0 * h;
                let fmp = at(&d);
                d[j] -= 2.0 * h;
                let fmm = at(&d);
                d[i] += 2.0 * h;
                let fpm = at(&d);
                out[i][j] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            }
        }
        out
    }

    #[test]
    fn jets_match_finite_differences() {
        let fields = [
            "x1^2 + x2^2",
            "sin(x1)*cos(x2) + exp(x3/4)",
            "(sqrt(x1^2 + x2^2) - 2)^2 + x3^2 - 1",
            "x1*x2*x3 - x2/x3 + x1^3",
        ];
        let probes = [[0.7, -0.4, 1.3], [1.1, 0.9, -0.6], [2.5, 0.1, 0.8]];
        for src in fields {
            let f = ScalarField::parse("t", src).unwrap();
            for p in &probes {
                let j = f.eval_jet_arith(&Jet2::seed(p)).unwrap();
                let g = fd_grad(&f, p, 1e-5);
                let h = fd_hess(&f, p, 1e-4);
                for i in 0..3 {
                    let scale = 1.0 + g[i].abs();
                    assert!(
                        (j.g[i] - g[i]).abs() / scale < 1e-6,
                        "{src}: grad[{i}] jet={} fd={}",
                        j.g[i],
                        g[i]
                    );
                    for k in 0..3 {
                        let scale = 1.0 + h[i][k].abs();
                        assert!(
                            (j.h[(i, k)] - h[i][k]).abs() / scale < 1e-6,
                            "{src}: hess[{i}{k}] jet={} fd={}",
                            j.h[(i, k)],
                            h[i][k]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let f = ScalarField::parse("t", "x1^2*x2 + sin(x1*x3) - exp(x2)").unwrap();
        let j = f.eval_jet_arith(&Jet2::seed(&[0.3, 1.2, -0.7])).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(j.h[(i, k)], j.h[(k, i)]);
            }
        }
    }

    #[test]
    fn jet1_matches_jet2_gradient() {
        let f = ScalarField::parse("t", "x1/x2 + x2^3 - sqrt(x1)").unwrap();
        let p = [2.0, 0.5];
        let j1 = f.eval_jet_arith(&Jet1::seed(&p)).unwrap();
        let j2 = f.eval_jet_arith(&Jet2::seed(&p)).unwrap();
        assert_eq!(j1.v, j2.v);
        assert_eq!(j1.g, j2.g);
    }
}
