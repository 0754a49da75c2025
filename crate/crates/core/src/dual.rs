//! Forward-mode scalar and 3-vector duals over the registered parameter
//! vector.
//!
//! The gradient part is a dense vector aligned with the `ParameterRegistry`.
//! An empty gradient vector means "identically zero" so constants cost
//! nothing. This is deliberately not a general AD engine: only the shading
//! chain of this renderer is evaluated with these types.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub v: f64,
    /// Empty means zero gradient.
    pub g: Vec<f64>,
}

fn lincomb(a: &[f64], ca: f64, b: &[f64], cb: f64) -> Vec<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.iter().map(|x| x * ca).collect(),
        (true, false) => b.iter().map(|x| x * cb).collect(),
        (false, false) => a.iter().zip(b).map(|(x, y)| x * ca + y * cb).collect(),
    }
}

impl Dual {
    pub fn constant(v: f64) -> Dual {
        Dual { v, g: Vec::new() }
    }

    /// A parameter variable: value `v`, unit gradient in slot `index`.
    pub fn variable(v: f64, index: usize, dim: usize) -> Dual {
        let mut g = vec![0.0; dim];
        g[index] = 1.0;
        Dual { v, g }
    }

    pub fn grad_component(&self, i: usize) -> f64 {
        self.g.get(i).copied().unwrap_or(0.0)
    }

    pub fn sqrt(&self) -> Dual {
        let s = self.v.sqrt();
        Dual { v: s, g: lincomb(&self.g, 0.5 / s, &[], 0.0) }
    }

    pub fn recip(&self) -> Dual {
        Dual { v: 1.0 / self.v, g: lincomb(&self.g, -1.0 / (self.v * self.v), &[], 0.0) }
    }

    /// Power with a constant exponent.
    pub fn powf(&self, e: f64) -> Dual {
        Dual {
            v: self.v.powf(e),
            g: lincomb(&self.g, e * self.v.powf(e - 1.0), &[], 0.0),
        }
    }

    /// Clamp below at a constant; gradient is zero on the clamped branch.
    pub fn max_const(&self, lo: f64) -> Dual {
        if self.v > lo {
            self.clone()
        } else {
            Dual::constant(lo)
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, g: lincomb(&self.g, 1.0, &o.g, 1.0) }
    }
}

impl Add<&Dual> for &Dual {
    type Output = Dual;
    fn add(self, o: &Dual) -> Dual {
        Dual { v: self.v + o.v, g: lincomb(&self.g, 1.0, &o.g, 1.0) }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, g: lincomb(&self.g, 1.0, &o.g, -1.0) }
    }
}

impl Sub<&Dual> for &Dual {
    type Output = Dual;
    fn sub(self, o: &Dual) -> Dual {
        Dual { v: self.v - o.v, g: lincomb(&self.g, 1.0, &o.g, -1.0) }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, g: lincomb(&self.g, o.v, &o.g, self.v) }
    }
}

impl Mul<&Dual> for &Dual {
    type Output = Dual;
    fn mul(self, o: &Dual) -> Dual {
        Dual { v: self.v * o.v, g: lincomb(&self.g, o.v, &o.g, self.v) }
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, s: f64) -> Dual {
        Dual { v: self.v * s, g: lincomb(&self.g, s, &[], 0.0) }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        Dual {
            v: self.v * inv,
            g: lincomb(&self.g, inv, &o.g, -self.v * inv * inv),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, g: lincomb(&self.g, -1.0, &[], 0.0) }
    }
}

/// 3-vector of duals.
#[derive(Debug, Clone)]
pub struct DVec3 {
    pub x: Dual,
    pub y: Dual,
    pub z: Dual,
}

impl DVec3 {
    pub fn constant(v: Vec3) -> DVec3 {
        DVec3 {
            x: Dual::constant(v.x),
            y: Dual::constant(v.y),
            z: Dual::constant(v.z),
        }
    }

    pub fn new(x: Dual, y: Dual, z: Dual) -> DVec3 {
        DVec3 { x, y, z }
    }

    pub fn value(&self) -> Vec3 {
        Vec3::new(self.x.v, self.y.v, self.z.v)
    }

    /// Gradient of each component with respect to parameter `i`.
    pub fn grad_component(&self, i: usize) -> Vec3 {
        Vec3::new(
            self.x.grad_component(i),
            self.y.grad_component(i),
            self.z.grad_component(i),
        )
    }

    pub fn dot(&self, o: &DVec3) -> Dual {
        &(&self.x * &o.x) + &(&(&self.y * &o.y) + &(&self.z * &o.z))
    }

    pub fn dot_const(&self, o: Vec3) -> Dual {
        self.x.clone() * o.x + self.y.clone() * o.y + self.z.clone() * o.z
    }

    pub fn cross(&self, o: &DVec3) -> DVec3 {
        DVec3 {
            x: &(&self.y * &o.z) - &(&self.z * &o.y),
            y: &(&self.z * &o.x) - &(&self.x * &o.z),
            z: &(&self.x * &o.y) - &(&self.y * &o.x),
        }
    }

    pub fn length_squared(&self) -> Dual {
        self.dot(self)
    }

    pub fn length(&self) -> Dual {
        self.length_squared().sqrt()
    }

    pub fn normalized(&self) -> DVec3 {
        let inv = self.length().recip();
        self.scale(&inv)
    }

    pub fn scale(&self, s: &Dual) -> DVec3 {
        DVec3 {
            x: &self.x * s,
            y: &self.y * s,
            z: &self.z * s,
        }
    }

    pub fn scale_const(&self, s: f64) -> DVec3 {
        DVec3 {
            x: self.x.clone() * s,
            y: self.y.clone() * s,
            z: self.z.clone() * s,
        }
    }

    pub fn add(&self, o: &DVec3) -> DVec3 {
        DVec3 { x: &self.x + &o.x, y: &self.y + &o.y, z: &self.z + &o.z }
    }

    pub fn sub(&self, o: &DVec3) -> DVec3 {
        DVec3 { x: &self.x - &o.x, y: &self.y - &o.y, z: &self.z - &o.z }
    }

    pub fn neg(&self) -> DVec3 {
        DVec3 {
            x: self.x.clone() * -1.0,
            y: self.y.clone() * -1.0,
            z: self.z.clone() * -1.0,
        }
    }

    /// Componentwise product (RGB throughput).
    pub fn mul_componentwise(&self, o: &DVec3) -> DVec3 {
        DVec3 { x: &self.x * &o.x, y: &self.y * &o.y, z: &self.z * &o.z }
    }
}
