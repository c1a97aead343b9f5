use crate::scalar::Real;

/// `KL(N(μ, diag(exp(logvar))) ‖ N(0, I))`.
pub fn gaussian_kl<T: Real>(mu: &[T], logvar: &[T]) -> T {
    let half = T::lit(0.5);
    mu.iter()
        .zip(logvar)
        .map(|(&m, &lv)| half * (m * m + lv.exp() - T::one() - lv))
        .sum()
}

/// Partial derivatives of [`gaussian_kl`] with respect to `μ` and `logvar`.
pub fn gaussian_kl_grad<T: Real>(mu: &[T], logvar: &[T]) -> (Vec<T>, Vec<T>) {
    let half = T::lit(0.5);
    (
        mu.to_vec(),
        logvar.iter().map(|&lv| half * (lv.exp() - T::one())).collect(),
    )
}
