//! Double-double Taylor references for `Υ`, `℧` and `sinhc`.
//!
//! Double-double numbers carry about 32 significant digits, so rounding in
//! the reference is far below the f64 tolerances it is compared against.

#![allow(dead_code)]

use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn abs(self) -> f64 {
        self.to_f64().abs()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub fn from(z: Complex64) -> CDd {
        CDd { re: Dd::from(z.re), im: Dd::from(z.im) }
    }

    pub fn one() -> CDd {
        CDd { re: Dd::from(1.0), im: Dd::ZERO }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(self, o: CDd) -> CDd {
        CDd { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn mul(self, o: CDd) -> CDd {
        CDd { re: self.re.mul(o.re).sub(self.im.mul(o.im)), im: self.re.mul(o.im).add(self.im.mul(o.re)) }
    }

    pub fn div_real(self, d: f64) -> CDd {
        CDd { re: self.re.div(Dd::from(d)), im: self.im.div(Dd::from(d)) }
    }

    pub fn recip(self) -> CDd {
        let norm = self.re.mul(self.re).add(self.im.mul(self.im));
        CDd { re: self.re.div(norm), im: self.im.neg().div(norm) }
    }

    pub fn modulus(self) -> f64 {
        self.to_c64().norm()
    }
}

/// `Σ_k z^k/(k+1)!`.
pub fn ups_reference(z: Complex64) -> CDd {
    let zd = CDd::from(z);
    let mut sum = CDd::one();
    let mut term = CDd::one();
    for k in 1..200 {
        term = term.mul(zd).div_real(k as f64 + 1.0);
        sum = sum.add(term);
        if k as f64 > z.norm() && term.modulus() < 1e-34 * sum.modulus().max(1e-300) {
            break;
        }
    }
    sum
}

/// `Σ_k z^{2k}/(2k+1)!`.
pub fn sinhc_reference(z: Complex64) -> CDd {
    let zd = CDd::from(z);
    let z2 = zd.mul(zd);
    let mut sum = CDd::one();
    let mut term = CDd::one();
    for k in 1..200 {
        term = term.mul(z2).div_real(((2 * k) * (2 * k + 1)) as f64);
        sum = sum.add(term);
        if (2 * k) as f64 > z.norm() && term.modulus() < 1e-34 * sum.modulus().max(1e-300) {
            break;
        }
    }
    sum
}

/// `1/Υ(z)`, evaluated in double-double.
pub fn mho_reference(z: Complex64) -> CDd {
    ups_reference(z).recip()
}

/// Relative error of an f64 value against a reference.
pub fn relative_error(value: Complex64, reference: CDd) -> f64 {
    let r = reference.to_c64();
    let diff = CDd::from(value).add(CDd { re: reference.re.neg(), im: reference.im.neg() }).to_c64();
    diff.norm() / r.norm()
}

/// Sample points on `|z| ≤ radius`: polar rings plus the axes, skipping the origin.
pub fn disc_samples(radius: f64, rings: usize, per_ring: usize) -> Vec<Complex64> {
    let mut out = Vec::new();
    for r in 1..=rings {
        let rho = radius * r as f64 / rings as f64;
        for k in 0..per_ring {
            let arg = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / per_ring as f64;
            out.push(Complex64::from_polar(rho, arg));
        }
    }
    for x in [1e-6, 1e-4, 9e-4, 1.1e-3, 0.01, 0.5, 2.0, 4.99] {
        out.push(Complex64::new(x, 0.0));
        out.push(Complex64::new(-x, 0.0));
        out.push(Complex64::new(0.0, x));
        out.push(Complex64::new(0.0, -x));
    }
    out
}
