//! Independent numerical oracles shared by the test suites.
//!
//! Nothing here is used by the library itself: these are deliberately naive,
//! self-contained routines (adaptive Gauss-Kronrod quadrature, dense
//! Gauss-Jordan inversion, closed-form Student-t cdfs) against which the
//! optimized code paths are checked.

pub mod dense;
pub mod quad;

pub use dense::{dense_inverse, dense_log_det};
pub use quad::{integrate, integrate_to_infinity, integrate_whole_line};

/// Student-t cdf for ν ∈ {1, 2, 3} from elementary closed forms.
pub fn student_t_cdf_small_dof(t: f64, dof: u32) -> f64 {
    use std::f64::consts::PI;
    match dof {
        1 => 0.5 + t.atan() / PI,
        2 => 0.5 + t / (2.0 * (2.0 + t * t).sqrt()),
        3 => {
            let s = 3f64.sqrt();
            0.5 + (t / (s * (1.0 + t * t / 3.0)) + (t / s).atan()) / PI
        }
        _ => panic!("closed form only for 1, 2 or 3 degrees of freedom"),
    }
}
