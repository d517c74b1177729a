use rand::Rng;

use super::Decision;

/// Half-width of the slice of the standard erfc mapped onto `[Δ_min, Δ_max]`.
const ERFC_HALF_SPAN: f64 = 12.0;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Interference-avoidance probability for a node with discrepancy `delta`.
///
/// `½ · erfc((Δ − c)/m)` where `c` is the midpoint of the bounds,
/// `n = (Δ_max − Δ_min)/24` maps `[−12, 12]` onto the bounds, and `m = K·n`.
pub fn f_erfc(delta: f64, k: f64, bounds: (f64, f64)) -> f64 {
    let (lo, hi) = bounds;
    let center = 0.5 * (lo + hi);
    let n = (hi - lo) / (2.0 * ERFC_HALF_SPAN);
    let m = k * n;
    0.5 * erfc((delta - center) / m)
}

pub fn center_of(bounds: (f64, f64)) -> f64 {
    0.5 * (bounds.0 + bounds.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PGrabState {
    pub k: f64,
    pub p_ia: f64,
}

impl PGrabState {
    pub fn new(k: f64, delta: f64, bounds: (f64, f64)) -> Self {
        PGrabState { k, p_ia: f_erfc(delta, k, bounds) }
    }
}

/// Forward iff a uniform draw falls below `P_FW = P_IA · P_LD`.
/// Returns the decision and `P_FW`.
pub fn p_grab_decide<R: Rng + ?Sized>(p_ia: f64, p_ld: f64, rng: &mut R) -> (Decision, f64) {
    let p_fw = (p_ia * p_ld).clamp(0.0, 1.0);
    let u: f64 = rng.gen();
    let d = if u < p_fw { Decision::Forward } else { Decision::Drop };
    (d, p_fw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{RngStream, StreamPurpose};

    #[test]
    fn center_gives_one_half() {
        for k in [1.0, 2.0, 4.0, 8.0, 16.0] {
            assert!((f_erfc(-10.0, k, (-60.0, 40.0)) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn endpoints_at_k1() {
        let b = (-60.0, 40.0);
        assert!(f_erfc(40.0, 1.0, b) < 1e-6);
        assert!(f_erfc(-60.0, 1.0, b) > 1.0 - 1e-6);
    }

    #[test]
    fn certain_forward_and_certain_drop() {
        let mut rng = RngStream::new(3, 1, StreamPurpose::Policy).rng();
        for _ in 0..1000 {
            assert_eq!(p_grab_decide(1.0, 1.0, &mut rng).0, Decision::Forward);
            assert_eq!(p_grab_decide(0.9, 0.0, &mut rng).0, Decision::Drop);
        }
    }
}
