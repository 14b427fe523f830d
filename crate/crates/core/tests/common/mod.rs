#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volfractal::pricing::{Market, OptionSpec, Parity};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn atm_market() -> Market {
    Market::new(102.10, 0.0268, 0.0271, 1.0).unwrap()
}

pub fn spec(strike: f64, parity: Parity) -> OptionSpec {
    OptionSpec::new(atm_market(), strike, parity).unwrap()
}

/// Uniform point in the annulus `r_min ≤ |z| ≤ r_max`.
pub fn annulus(rng: &mut impl Rng, r_min: f64, r_max: f64) -> Complex64 {
    let r = rng.gen_range(r_min..=r_max);
    let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    Complex64::from_polar(r, phi)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-17 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

/// `exp(−(tz)²/2)` with the exponent carried to about twice working precision.
fn integrand(t: f64, z: Complex64) -> Complex64 {
    let (u, v) = (t * z.re, t * z.im);
    let (ue, ve) = (t.mul_add(z.re, -u), t.mul_add(z.im, -v));
    // Re = (v² − u²)/2, Im = −uv, each with its rounding error.
    let (v2, u2) = (v * v, u * u);
    let (v2e, u2e) = (
        v.mul_add(v, -v2) + 2.0 * v * ve,
        u.mul_add(u, -u2) + 2.0 * u * ue,
    );
    let d = v2 - u2;
    let bb = d - v2;
    let de = (v2 - (d - bb)) + (-u2 - bb);
    let re = 0.5 * d;
    let re_lo = 0.5 * (de + v2e - u2e);
    let uv = u * v;
    let im = -uv;
    let im_lo = -(u.mul_add(v, -uv) + u * ve + ue * v);
    let mag = re.exp() * (1.0 + re_lo);
    let (s, c) = im.sin_cos();
    Complex64::new(mag * (c - s * im_lo), mag * (s + c * im_lo))
}

/// Independent normal CDF: `½ + z/√(2π) ∫₀¹ exp(−t²z²/2) dt` by composite
/// Gauss-Legendre with compensated summation.
pub fn phi_oracle(z: Complex64) -> Complex64 {
    phi_oracle_panels(z, 32)
}

pub fn phi_oracle_panels(z: Complex64, panels: usize) -> Complex64 {
    thread_local! {
        static RULE: Vec<(f64, f64)> = gauss_legendre(20);
    }
    RULE.with(|rule| {
        let mut re = Neumaier { sum: 0.0, c: 0.0 };
        let mut im = Neumaier { sum: 0.0, c: 0.0 };
        let h = 1.0 / panels as f64;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for &(x, w) in rule {
                let f = integrand(mid + 0.5 * h * x, z) * (0.5 * h * w);
                re.add(f.re);
                im.add(f.im);
            }
        }
        let integral = Complex64::new(re.sum + re.c, im.sum + im.c);
        let frac_1_sqrt_2pi = 0.398_942_280_401_432_7;
        Complex64::new(0.5, 0.0) + z * integral * frac_1_sqrt_2pi
    })
}
