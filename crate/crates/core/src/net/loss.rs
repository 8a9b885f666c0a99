use serde::{Deserialize, Serialize};

/// Losses that are nonnegative, convex, piecewise linear, with infimum zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossL0 {
    /// `max(0, 1 - y s)`
    Hinge,
    /// `|s - y|`
    Absolute,
}

impl LossL0 {
    pub fn name(self) -> &'static str {
        match self {
            LossL0::Hinge => "hinge",
            LossL0::Absolute => "absolute",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "hinge" => Some(LossL0::Hinge),
            "absolute" | "abs" => Some(LossL0::Absolute),
            _ => None,
        }
    }
}

/// Loss value and its derivative in the score.
///
/// The subgradient at a kink is 0 for both losses, so the zero-loss region is
/// an exact stationary set.
pub fn loss(l: LossL0, score: f64, y: f64) -> (f64, f64) {
    match l {
        LossL0::Hinge => {
            let margin = 1.0 - y * score;
            if margin > 0.0 {
                (margin, -y)
            } else {
                (0.0, 0.0)
            }
        }
        LossL0::Absolute => {
            let r = score - y;
            let d = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            (r.abs(), d)
        }
    }
}

/// Distance from the score to the loss's kink, used to keep finite-difference
/// probes on one linear piece.
pub fn kink_distance(l: LossL0, score: f64, y: f64) -> f64 {
    match l {
        LossL0::Hinge => (1.0 - y * score).abs(),
        LossL0::Absolute => (score - y).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hinge_cases() {
        assert_eq!(loss(LossL0::Hinge, 2.0, 1.0), (0.0, 0.0));
        assert_eq!(loss(LossL0::Hinge, 0.0, 1.0), (1.0, -1.0));
        assert_eq!(loss(LossL0::Hinge, 0.5, -1.0), (1.5, 1.0));
        // kink
        assert_eq!(loss(LossL0::Hinge, 1.0, 1.0), (0.0, 0.0));
    }

    #[test]
    fn absolute_cases() {
        assert_eq!(loss(LossL0::Absolute, 1.0, 1.0), (0.0, 0.0));
        assert_eq!(loss(LossL0::Absolute, -1.0, -1.0), (0.0, 0.0));
        assert_eq!(loss(LossL0::Absolute, 0.5, 1.0), (0.5, -1.0));
        assert_eq!(loss(LossL0::Absolute, 2.0, 1.0), (1.0, 1.0));
    }

    #[test]
    fn parse_names() {
        assert_eq!(LossL0::parse("hinge"), Some(LossL0::Hinge));
        assert_eq!(LossL0::parse("absolute"), Some(LossL0::Absolute));
        assert_eq!(LossL0::parse("mse"), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        // The four defining conditions: nonnegative, convex, zero curvature
        // away from the kink, zero infimum (attained).
        #[test]
        fn l0_class_conditions(a in -5.0f64..5.0, b in -5.0f64..5.0, t in 0.0f64..1.0, pos in any::<bool>()) {
            let y = if pos { 1.0 } else { -1.0 };
            for l in [LossL0::Hinge, LossL0::Absolute] {
                let f = |s: f64| loss(l, s, y).0;
                prop_assert!(f(a) >= 0.0);
                let mid = t * a + (1.0 - t) * b;
                prop_assert!(f(mid) <= t * f(a) + (1.0 - t) * f(b) + 1e-12);
                let h = 1e-3;
                if kink_distance(l, a, y) > 2.0 * h {
                    let second = f(a + h) - 2.0 * f(a) + f(a - h);
                    prop_assert!(second.abs() < 1e-9);
                }
                prop_assert_eq!(f(y), 0.0);
            }
        }
    }
}
