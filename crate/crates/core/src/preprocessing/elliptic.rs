//! Elliptic integrals and Jacobi elliptic functions (parameter convention:
//! `m = k^2`).

use std::f64::consts::PI;

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a.abs() {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    a
}

/// Complete elliptic integral of the first kind `K(m)`, `0 <= m < 1`.
pub fn ellipk(m: f64) -> f64 {
    PI / (2.0 * agm(1.0, (1.0 - m).sqrt()))
}

/// `K(1 - p)`, accurate for small `p`.
pub fn ellipkm1(p: f64) -> f64 {
    PI / (2.0 * agm(1.0, p.sqrt()))
}

/// Carlson's symmetric integral `R_F(x, y, z)`.
pub fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    for _ in 0..100 {
        let mu = (x + y + z) / 3.0;
        let dx = 1.0 - x / mu;
        let dy = 1.0 - y / mu;
        let dz = 1.0 - z / mu;
        let e = dx.abs().max(dy.abs()).max(dz.abs());
        if e < 1e-4 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0)
                / mu.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let l = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + l);
        y = 0.25 * (y + l);
        z = 0.25 * (z + l);
    }
    1.0 / ((x + y + z) / 3.0).sqrt()
}

/// Incomplete elliptic integral of the first kind `F(phi | m)`,
/// `|phi| <= pi/2`.
pub fn ellipf(phi: f64, m: f64) -> f64 {
    let s = phi.sin();
    let c = phi.cos();
    s * carlson_rf(c * c, 1.0 - m * s * s, 1.0)
}

/// Jacobi elliptic functions `(sn, cn, dn)` at `u` for parameter `m`,
/// via the descending Landen / AGM recursion.
pub fn ellipj(u: f64, m: f64) -> (f64, f64, f64) {
    if m < 1e-9 {
        let (s, c) = u.sin_cos();
        let t = 0.25 * m * (u - s * c);
        return (s - t * c, c + t * s, 1.0 - 0.5 * m * s * s);
    }
    if m >= 1.0 - 1e-9 {
        let ai = 0.25 * (1.0 - m);
        let b = u.cosh();
        let t = u.tanh();
        let sech = 1.0 / b;
        let twon = b * u.sinh();
        let sn = t + ai * (twon - u) / (b * b);
        let aj = ai * t * sech;
        return (sn, sech - aj * (twon - u), sech + aj * (twon + u));
    }
    let mut a = [0.0f64; 16];
    let mut c = [0.0f64; 16];
    a[0] = 1.0;
    c[0] = m.sqrt();
    let mut b = (1.0 - m).sqrt();
    let mut twon = 1.0;
    let mut i = 0;
    while (c[i] / a[i]).abs() > f64::EPSILON && i < 15 {
        let ai = a[i];
        i += 1;
        c[i] = 0.5 * (ai - b);
        let t = (ai * b).sqrt();
        a[i] = 0.5 * (ai + b);
        b = t;
        twon *= 2.0;
    }
    let mut phi = twon * a[i] * u;
    let mut prev = phi;
    while i > 0 {
        let t = c[i] * phi.sin() / a[i];
        prev = phi;
        phi = 0.5 * (t.asin() + phi);
        i -= 1;
    }
    let sn = phi.sin();
    let cn = phi.cos();
    (sn, cn, cn / (prev - phi).cos())
}

/// Solves the degree equation: the modulus parameter `m` of an order-`n`
/// elliptic filter whose discrimination parameter is `m1`.
pub fn ellipdeg(n: usize, m1: f64) -> f64 {
    const MMAX: i32 = 7;
    let k1 = ellipk(m1);
    let k1p = ellipkm1(m1);
    let q1 = (-PI * k1p / k1).exp();
    let q = q1.powf(1.0 / n as f64);
    let num: f64 = (0..=MMAX).map(|j| q.powi(j * (j + 1))).sum();
    let den: f64 = 1.0 + 2.0 * (1..=MMAX + 1).map(|j| q.powi(j * j)).sum::<f64>();
    16.0 * q * (num / den).powi(4)
}

/// Real `u` with `sc(u | 1 - m) = w`.
pub fn arc_jac_sc1(w: f64, m: f64) -> f64 {
    ellipf(w.atan(), 1.0 - m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_reference_values() {
        assert!((ellipk(0.0) - PI / 2.0).abs() < 1e-15);
        // K(0.5) = Gamma(1/4)^2 / (4 sqrt(pi))
        assert!((ellipk(0.5) - 1.854_074_677_301_372).abs() < 1e-13);
        assert!((ellipkm1(0.5) - ellipk(0.5)).abs() < 1e-14);
    }

    #[test]
    fn f_at_half_pi_is_k() {
        for m in [0.1, 0.5, 0.9, 0.999] {
            assert!((ellipf(PI / 2.0, m) - ellipk(m)).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn jacobi_identities() {
        for &m in &[0.0, 0.2, 0.7, 0.99] {
            for &u in &[0.0, 0.3, 1.1, 2.5] {
                let (s, c, d) = ellipj(u, m);
                assert!((s * s + c * c - 1.0).abs() < 1e-12);
                assert!((d * d + m * s * s - 1.0).abs() < 1e-12);
            }
            // sn(K) = 1
            if m > 0.0 {
                let (s, _, _) = ellipj(ellipk(m), m);
                assert!((s - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_inverts_f() {
        let m = 0.6;
        let phi = 0.9;
        let u = ellipf(phi, m);
        let (s, _, _) = ellipj(u, m);
        assert!((s - phi.sin()).abs() < 1e-12);
    }

    #[test]
    fn arc_sc_inverts_sc() {
        let m = 0.3;
        let w = 1.7;
        let u = arc_jac_sc1(w, m);
        let (s, c, _) = ellipj(u, 1.0 - m);
        assert!((s / c - w).abs() < 1e-10);
    }

    #[test]
    fn degree_equation_consistent() {
        // n K'(m)/K(m) = K'(m1)/K(m1)
        let m1 = 1e-4;
        for n in [3usize, 5, 8] {
            let m = ellipdeg(n, m1);
            let lhs = n as f64 * ellipkm1(m) / ellipk(m);
            let rhs = ellipkm1(m1) / ellipk(m1);
            assert!((lhs - rhs).abs() < 1e-9 * rhs, "n={n}");
        }
    }
}
