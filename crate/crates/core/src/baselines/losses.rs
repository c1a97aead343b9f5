//! Pointwise contrastive and triplet losses, with their derivatives in the
//! distance arguments.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exponent constant of the exponential Siamese loss.
pub const SIAMESE_EXP_RATE: f64 = 2.77;

fn check_dist<T: Real>(name: &str, d: T) -> Result<()> {
    if !(d >= T::zero()) {
        return Err(Error::Domain(format!("{name} must be >= 0, got {d}")));
    }
    Ok(())
}

fn check_positive<T: Real>(name: &str, v: T) -> Result<()> {
    if !(v > T::zero()) {
        return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

/// Contrastive loss: `½d²` for a matching pair, `½max(0, m − d)²` otherwise.
pub fn siamese_loss_v1<T: Real>(dist: T, same_class: bool, margin: T) -> Result<T> {
    Ok(siamese_v1_with_grad(dist, same_class, margin)?.0)
}

/// Value and `∂/∂dist` of [`siamese_loss_v1`].
pub fn siamese_v1_with_grad<T: Real>(dist: T, same_class: bool, margin: T) -> Result<(T, T)> {
    check_dist("dist", dist)?;
    check_positive("margin", margin)?;
    let half = T::lit(0.5);
    if same_class {
        Ok((half * dist * dist, dist))
    } else {
        let gap = (margin - dist).max(T::zero());
        Ok((half * gap * gap, -gap))
    }
}

/// Exponential variant: `(2/Q)d²` for a matching pair, `2Q·exp(−2.77·d/Q)`
/// otherwise.
pub fn siamese_loss_v2<T: Real>(dist: T, same_class: bool, q: T) -> Result<T> {
    Ok(siamese_v2_with_grad(dist, same_class, q)?.0)
}

pub fn siamese_v2_with_grad<T: Real>(dist: T, same_class: bool, q: T) -> Result<(T, T)> {
    check_dist("dist", dist)?;
    check_positive("q", q)?;
    let two = T::lit(2.0);
    if same_class {
        Ok((two / q * dist * dist, T::lit(4.0) / q * dist))
    } else {
        let rate = T::lit(SIAMESE_EXP_RATE);
        let e = (-rate * dist / q).exp();
        Ok((two * q * e, -two * rate * e))
    }
}

/// `max(0, m + d_pos − d_neg)`.
pub fn triplet_loss<T: Real>(d_pos: T, d_neg: T, margin: T) -> T {
    (margin + d_pos - d_neg).max(T::zero())
}

/// Whether the hinge of [`triplet_loss`] is active, i.e. the loss has
/// derivative `+1` in `d_pos` and `−1` in `d_neg`.
pub fn triplet_active<T: Real>(d_pos: T, d_neg: T, margin: T) -> bool {
    margin + d_pos - d_neg > T::zero()
}
