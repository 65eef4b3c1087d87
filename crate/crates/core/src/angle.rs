//! Angle wrapping helpers. Internal arithmetic is in radians, reported
//! phases are in degrees.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

/// Wraps radians to `[0, 2π)`.
#[inline]
pub fn wrap_tau(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps radians to `(-π, π]`.
#[inline]
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_tau(x);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps degrees to `[0, 360)`.
#[inline]
pub fn wrap_deg(x: f64) -> f64 {
    let r = x.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Shortest signed arc `a - b` in degrees, in `(-180, 180]`.
#[inline]
pub fn diff_deg(a: f64, b: f64) -> f64 {
    let d = wrap_deg(a - b);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// `(sin, cos)` of an angle in degrees. Arguments are reduced to
/// `[-45, 45]` first, so complementary and supplementary angles share
/// bit-identical values.
pub fn sincos_deg(x: f64) -> (f64, f64) {
    let r = wrap_deg(x);
    let q = ((r + 45.0) / 90.0).floor() as i32;
    let t = r - 90.0 * q as f64;
    let (s, c) = if t.abs() == 45.0 {
        (t.signum() * FRAC_1_SQRT_2, FRAC_1_SQRT_2)
    } else {
        t.to_radians().sin_cos()
    };
    match q.rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Four-quadrant arctangent in degrees, `[0, 360)`; exact on the diagonals
/// and axes. Returns 0 for the origin.
pub fn atan2_deg(y: f64, x: f64) -> f64 {
    let (ax, ay) = (x.abs(), y.abs());
    if ax == 0.0 && ay == 0.0 {
        return 0.0;
    }
    let a = if ay <= ax {
        (ay / ax).atan().to_degrees()
    } else {
        90.0 - (ax / ay).atan().to_degrees()
    };
    let a = if x < 0.0 { 180.0 - a } else { a };
    wrap_deg(if y < 0.0 { -a } else { a })
}

#[inline]
pub fn rad_to_deg_wrapped(x: f64) -> f64 {
    wrap_deg(x.to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_trig_exact_cases() {
        assert_eq!(sincos_deg(90.0), (1.0, 0.0));
        assert_eq!(sincos_deg(45.0).0, sincos_deg(45.0).1);
        assert_eq!(sincos_deg(50.0), (sincos_deg(40.0).1, sincos_deg(40.0).0));
        for a in [0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0] {
            let (s, c) = sincos_deg(a);
            assert_eq!(atan2_deg(s, c), a);
        }
    }

    proptest! {
        #[test]
        fn degree_trig_matches_libm(a in -720.0f64..720.0) {
            let (s, c) = sincos_deg(a);
            let (s0, c0) = a.to_radians().sin_cos();
            prop_assert!((s - s0).abs() < 1e-12 && (c - c0).abs() < 1e-12);
            prop_assert!(diff_deg(atan2_deg(s, c), a).abs() < 1e-9);
        }
    }

    #[test]
    fn wraps() {
        assert_eq!(wrap_deg(-10.0), 350.0);
        assert_eq!(wrap_deg(720.0), 0.0);
        assert_eq!(diff_deg(350.0, 10.0), -20.0);
        assert_eq!(diff_deg(10.0, 350.0), 20.0);
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!(wrap_tau(-1e-18) < TAU);
    }
}
