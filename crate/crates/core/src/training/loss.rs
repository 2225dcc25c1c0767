/// `ln(1 + e^x)` without overflow or cancellation.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `-ln sigma(pos - neg)`.
#[inline]
pub fn bpr_loss(pos_score: f64, neg_score: f64) -> f64 {
    softplus(neg_score - pos_score)
}

/// Binary cross-entropy on a logit: `-[y ln sigma(z) + (1 - y) ln(1 - sigma(z))]`.
#[inline]
pub fn bce_loss(logit: f64, label: u8) -> f64 {
    if label == 1 {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn reference_values() {
        assert!((bpr_loss(0.0, 0.0) - LN_2).abs() < 1e-12);
        assert!(bpr_loss(40.0, 0.0) < 1e-15);
        assert!((bpr_loss(1.0, -1.0) - 0.126_928_011_042_972_5).abs() < 1e-12);
        assert!((bce_loss(0.0, 1) - LN_2).abs() < 1e-12);
        assert!(bce_loss(40.0, 1) < 1e-15);
        assert!((bce_loss(2.0, 0) - 2.126_928_011_042_972_5).abs() < 1e-12);
    }

    #[test]
    fn extremes_stay_finite() {
        for x in [-700.0, -300.0, 0.0, 300.0, 700.0] {
            for y in [-700.0, 0.0, 700.0] {
                assert!(bpr_loss(x, y).is_finite());
            }
            assert!(bce_loss(x, 0).is_finite() && bce_loss(x, 1).is_finite());
        }
    }

    proptest! {
        #[test]
        fn losses_positive(a in -30.0f64..30.0, b in -30.0f64..30.0) {
            prop_assert!(bpr_loss(a, b) > 0.0);
            prop_assert!(bce_loss(a, 0) > 0.0 && bce_loss(a, 1) > 0.0);
        }

        #[test]
        fn bpr_symmetric_sum(a in -30.0f64..30.0, b in -30.0f64..30.0) {
            let s = bpr_loss(a, b) + bpr_loss(b, a);
            prop_assert!(s >= 2.0 * LN_2 - 1e-12);
            if a == b {
                prop_assert!((s - 2.0 * LN_2).abs() < 1e-12);
            }
        }

        #[test]
        fn bce_matches_probability_form(z in -20.0f64..20.0) {
            let s = 1.0 / (1.0 + (-z).exp());
            let one_minus_s = 1.0 / (1.0 + z.exp());
            prop_assert!((bce_loss(z, 1) + s.ln()).abs() < 1e-9);
            prop_assert!((bce_loss(z, 0) + one_minus_s.ln()).abs() < 1e-9);
        }
    }
}
