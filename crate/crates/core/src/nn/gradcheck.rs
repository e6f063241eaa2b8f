//! Finite-difference verification of analytic gradients.

use super::ParamStore;

/// Compares the gradients accumulated in `store` against central finite
/// differences of `f`, perturbing every parameter element by `eps`.
///
/// Returns the maximum relative error, with denominator
/// `max(|analytic|, |numeric|, 1e-8)`. The store's values are restored
/// exactly before returning.
pub fn grad_check<F>(store: &mut ParamStore, mut f: F, eps: f64) -> f64
where
    F: FnMut(&ParamStore) -> f64,
{
    let mut max_rel = 0.0f64;
    for id in store.ids().collect::<Vec<_>>() {
        let dim = store.value(id).raw_dim();
        for i in 0..dim[0] {
            for j in 0..dim[1] {
                let orig = store.value(id)[[i, j]];
                store.value_mut(id)[[i, j]] = orig + eps;
                let f_plus = f(store);
                store.value_mut(id)[[i, j]] = orig - eps;
                let f_minus = f(store);
                store.value_mut(id)[[i, j]] = orig;

                let numeric = (f_plus - f_minus) / (2.0 * eps);
                let analytic = store.grad(id)[[i, j]];
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                max_rel = max_rel.max((analytic - numeric).abs() / denom);
            }
        }
    }
    max_rel
}
