//! Plane-wave scattering by a rigid (sound-hard) sphere.
//!
//! The incident plane wave `exp(+j k u·r)` expands as
//! `Σ (2n+1) jⁿ j_n(kr) P_n(cos γ)`, where `γ` is the angle between the
//! observation point and the arrival direction. The scattered field must be
//! outgoing under the `exp(+jωt)` time convention implied by that spatial
//! phase, which selects the spherical Hankel function of the second kind,
//! `h_n = j_n - j·y_n ~ exp(-jkr)/kr`.
//!
//! On the surface the Wronskian `j_n y_n' - j_n' y_n = 1/x²` collapses each
//! modal term to `(2n+1) jⁿ · (-j) / ((ka)² h_n'(ka))`, which avoids the
//! cancellation between incident and scattered parts.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Sign of the imaginary part in `h_n = j_n + HANKEL_SIGN·j·y_n`.
/// `-1` selects the second kind, outgoing for `exp(+jωt)`.
pub const HANKEL_SIGN: f64 = -1.0;

/// Largest `ka` the truncation rule is validated for.
pub const MAX_KA: f64 = 40.0;

/// Convergence threshold on the magnitude of the last retained modal term.
pub const CONVERGENCE_TOL: f64 = 1e-10;

/// Number of modal terms retained at a given `ka`.
pub fn n_terms(ka: f64) -> usize {
    (ka + 10.0 * ka.cbrt()).ceil() as usize + 10
}

/// Spherical Bessel functions of the first kind `j_0..j_{count-1}` at `x > 0`.
///
/// Miller's downward recurrence with periodic rescaling, normalized against
/// whichever of `j_0`, `j_1` is better conditioned at `x`.
pub fn spherical_jn(count: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; count.max(2)];
    if x == 0.0 {
        out[0] = 1.0;
        out.truncate(count);
        return out;
    }
    let start = count + x.abs() as usize + 40;
    let mut next = 0.0; // j_{k+1}
    let mut cur = 1e-300; // j_k
    for k in (0..start).rev() {
        // j_{k-1} = (2k+1)/x j_k - j_{k+1}, stepping from k+1 down to k
        let prev = (2 * k + 3) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k < out.len() {
            out[k] = cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            for v in out.iter_mut().skip(k) {
                *v *= s;
            }
        }
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if j0.abs() >= j1.abs() {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out.truncate(count);
    out
}

/// Spherical Bessel functions of the second kind `y_0..y_{count-1}` at `x > 0`.
pub fn spherical_yn(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let (s, c) = x.sin_cos();
    out.push(-c / x);
    if count > 1 {
        out.push(-c / (x * x) - s / x);
    }
    for n in 2..count {
        let v = (2 * n - 1) as f64 / x * out[n - 1] - out[n - 2];
        out.push(v);
    }
    out
}

/// Derivatives from values `f_0..f_{count}`; returns `f'_0..f'_{count-1}`.
fn derivatives(f: &[f64], x: f64) -> Vec<f64> {
    let count = f.len() - 1;
    (0..count)
        .map(|n| {
            if n == 0 {
                -f[1]
            } else {
                f[n - 1] - (n as f64 + 1.0) / x * f[n]
            }
        })
        .collect()
}

fn hankel(j: f64, y: f64) -> Complex64 {
    Complex64::new(j, HANKEL_SIGN * y)
}

/// `jⁿ` for integer n.
fn j_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Evaluate `Σ c_n P_n(x)` by the three-term Legendre recurrence.
fn legendre_sum(coeffs: &[Complex64], x: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut p_prev = 1.0;
    let mut p = x;
    for (n, c) in coeffs.iter().enumerate() {
        let pn = match n {
            0 => 1.0,
            1 => x,
            _ => {
                let nf = n as f64;
                let next = ((2.0 * nf - 1.0) * x * p - (nf - 1.0) * p_prev) / nf;
                p_prev = p;
                p = next;
                next
            }
        };
        acc += c * pn;
    }
    acc
}

/// Surface modal coefficients of a rigid sphere at one `ka`, ready to be
/// summed against Legendre polynomials of `cos γ`.
#[derive(Debug, Clone)]
pub struct RigidSphereModes {
    ka: f64,
    coeffs: Vec<Complex64>,
}

impl RigidSphereModes {
    pub fn new(ka: f64, n_terms: usize) -> Result<Self> {
        if !ka.is_finite() || ka < 0.0 {
            return Err(Error::invalid(format!(
                "ka = {ka} must be finite and non-negative"
            )));
        }
        if n_terms == 0 {
            return Err(Error::invalid("at least one modal term is required"));
        }
        if ka == 0.0 {
            return Ok(Self {
                ka,
                coeffs: vec![Complex64::new(1.0, 0.0)],
            });
        }
        let jn = spherical_jn(n_terms + 1, ka);
        let yn = spherical_yn(n_terms + 1, ka);
        let djn = derivatives(&jn, ka);
        let dyn_ = derivatives(&yn, ka);
        let minus_j = Complex64::new(0.0, -1.0);
        let coeffs: Vec<Complex64> = (0..n_terms)
            .map(|n| {
                let dh = hankel(djn[n], dyn_[n]);
                if !dh.re.is_finite() || !dh.im.is_finite() {
                    return Complex64::new(0.0, 0.0);
                }
                // h_n' of the second kind carries -j·y_n'; the Wronskian sign
                // follows HANKEL_SIGN.
                let w = minus_j * (-HANKEL_SIGN);
                j_pow(n) * (2 * n + 1) as f64 * w / (dh * ka * ka)
            })
            .collect();
        let last = coeffs.last().map(|c| c.norm()).unwrap_or(0.0);
        if last.is_nan() || last >= CONVERGENCE_TOL {
            return Err(Error::SeriesNotConverged {
                ka,
                n_terms,
                last_term: last,
            });
        }
        Ok(Self { ka, coeffs })
    }

    /// Modes with the default truncation rule.
    pub fn with_default_terms(ka: f64) -> Result<Self> {
        Self::new(ka, n_terms(ka))
    }

    pub fn ka(&self) -> f64 {
        self.ka
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Total surface pressure for included angle with `cos γ = cos_gamma`.
    pub fn eval(&self, cos_gamma: f64) -> Complex64 {
        if self.ka == 0.0 {
            return self.coeffs[0];
        }
        legendre_sum(&self.coeffs, cos_gamma.clamp(-1.0, 1.0))
    }
}

/// Total pressure on the surface of a rigid sphere due to a unit plane wave.
pub fn sphere_surface_pressure(ka: f64, cos_gamma: f64, n_terms: usize) -> Result<Complex64> {
    if !cos_gamma.is_finite() || cos_gamma.abs() > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "cos γ = {cos_gamma} outside [-1, 1]"
        )));
    }
    Ok(RigidSphereModes::new(ka, n_terms)?.eval(cos_gamma))
}

/// Total pressure at radius `r ≥ a` (given as `kr`) outside a rigid sphere of
/// radius `a` (given as `ka`), from the non-simplified incident-plus-scattered
/// series.
pub fn rigid_sphere_field(ka: f64, kr: f64, cos_gamma: f64, n_terms: usize) -> Result<Complex64> {
    if !(ka > 0.0 && kr >= ka) || n_terms == 0 {
        return Err(Error::invalid(
            "rigid sphere field needs 0 < ka <= kr and n_terms >= 1",
        ));
    }
    let ja = spherical_jn(n_terms + 1, ka);
    let ya = spherical_yn(n_terms + 1, ka);
    let dja = derivatives(&ja, ka);
    let dya = derivatives(&ya, ka);
    let jr = spherical_jn(n_terms, kr);
    let yr = spherical_yn(n_terms, kr);
    let coeffs: Vec<Complex64> = (0..n_terms)
        .map(|n| {
            let scatter = dja[n] / hankel(dja[n], dya[n]);
            let radial = jr[n] - scatter * hankel(jr[n], yr[n]);
            if !radial.re.is_finite() || !radial.im.is_finite() {
                return Complex64::new(0.0, 0.0);
            }
            j_pow(n) * (2 * n + 1) as f64 * radial
        })
        .collect();
    Ok(legendre_sum(&coeffs, cos_gamma.clamp(-1.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_closed_forms() {
        let x: f64 = 0.01;
        let series = x * x / 15.0 * (1.0 - x * x / 14.0);
        assert_relative_eq!(spherical_jn(3, x)[2], series, max_relative = 1e-9);
        for &x in &[0.5, 1.0, 3.2, 7.3, 25.0] {
            let j = spherical_jn(3, x);
            let y = spherical_yn(3, x);
            let (s, c) = f64::sin_cos(x);
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            let y2 = -(3.0 / (x * x) - 1.0) * c / x - 3.0 * s / (x * x);
            assert_relative_eq!(j[0], s / x, max_relative = 1e-12);
            assert_relative_eq!(j[2], j2, max_relative = 1e-8, epsilon = 1e-14);
            assert_relative_eq!(y[2], y2, max_relative = 1e-10);
        }
    }

    #[test]
    fn bessel_wronskian() {
        for &x in &[0.05, 1.0, 4.0, 19.0, 35.0] {
            let n = 40;
            let j = spherical_jn(n + 1, x);
            let y = spherical_yn(n + 1, x);
            let dj = derivatives(&j, x);
            let dy = derivatives(&y, x);
            for k in 0..n {
                if !y[k].is_finite() || y[k].abs() > 1e200 {
                    continue;
                }
                let w = j[k] * dy[k] - dj[k] * y[k];
                assert_relative_eq!(w, 1.0 / (x * x), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn small_ka_recovers_incident_field() {
        for &ka in &[1e-4, 1e-5, 1e-6] {
            for &c in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
                let p = sphere_surface_pressure(ka, c, n_terms(ka)).unwrap();
                assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-3);
            }
        }
    }

    #[test]
    fn small_ka_dipole_slope() {
        // rigid sphere: p ≈ 1 + j·(3/2)·ka·cos γ to first order
        let ka = 1e-3;
        for &c in &[-1.0, 0.0, 0.6, 1.0] {
            let p = sphere_surface_pressure(ka, c, n_terms(ka)).unwrap();
            assert!((p.norm() - 1.0).abs() < 1e-3);
            assert!((p.im - 1.5 * ka * c).abs() < 1e-6, "c={c} p={p}");
        }
    }

    #[test]
    fn zero_ka_is_exact() {
        assert_eq!(
            sphere_surface_pressure(0.0, 0.2, 1).unwrap(),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn wronskian_form_matches_full_series_on_surface() {
        for &ka in &[0.1, 1.0, 2.0, 7.5, 19.0] {
            for &c in &[-1.0, -0.2, 0.5, 1.0] {
                let n = n_terms(ka);
                let a = sphere_surface_pressure(ka, c, n).unwrap();
                let b = rigid_sphere_field(ka, ka, c, n).unwrap();
                assert!((a - b).norm() < 1e-9 * a.norm().max(1.0), "ka={ka} c={c}");
            }
        }
    }

    #[test]
    fn too_few_terms_is_diagnosed() {
        match sphere_surface_pressure(5.0, 0.3, 3) {
            Err(Error::SeriesNotConverged { n_terms: 3, .. }) => {}
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(sphere_surface_pressure(-1.0, 0.0, 10).is_err());
        assert!(sphere_surface_pressure(1.0, 1.5, 10).is_err());
        assert!(sphere_surface_pressure(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn scattered_wave_is_outgoing() {
        // far from the sphere the scattered part behaves like exp(-jkr)/r,
        // so its phase decreases with radius
        let ka = 2.0;
        let n = n_terms(40.0);
        let inc = |kr: f64| Complex64::from_polar(1.0, kr * 0.4);
        let s1 = rigid_sphere_field(ka, 30.0, 0.4, n).unwrap() - inc(30.0);
        let s2 = rigid_sphere_field(ka, 30.01, 0.4, n).unwrap() - inc(30.01);
        let dphase = (s2 / s1).arg() / 0.01;
        assert!((dphase + 1.0).abs() < 0.05, "phase slope {dphase}");
    }

    /// Radial derivative of the total field at the surface from a one-sided
    /// sixth-order difference in `kr`.
    fn surface_radial_derivative(ka: f64, c: f64, n: usize) -> Complex64 {
        const W: [f64; 7] = [
            -49.0 / 20.0,
            6.0,
            -15.0 / 2.0,
            20.0 / 3.0,
            -15.0 / 4.0,
            6.0 / 5.0,
            -1.0 / 6.0,
        ];
        let h = 2e-3;
        W.iter()
            .enumerate()
            .map(|(i, w)| *w * rigid_sphere_field(ka, ka + i as f64 * h, c, n).unwrap())
            .sum::<Complex64>()
            / h
    }

    #[test]
    fn normal_velocity_vanishes_on_surface() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let ka = rng.gen_range(0.05..20.0);
            let c = rng.gen_range(-1.0..1.0);
            let d = surface_radial_derivative(ka, c, n_terms(ka + 0.05));
            assert!(d.norm() <= 1e-6, "ka={ka} c={c} dp/dkr={d}");
        }
    }

    #[test]
    fn truncation_converges() {
        for &ka in &[0.5, 4.0, 12.0, 20.0] {
            let n = n_terms(ka);
            let a = sphere_surface_pressure(ka, 0.3, n).unwrap();
            let b = sphere_surface_pressure(ka, 0.3, n + 20).unwrap();
            assert!((a - b).norm() < 1e-10, "ka={ka}");
        }
    }
}
