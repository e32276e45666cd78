//! Finite-difference verification of backward passes.

use super::params::{GradMap, ParamStore};

/// Compares analytic gradients against central finite differences.
///
/// `f` evaluates the model end to end on the given parameters and returns the
/// scalar loss together with the analytic gradients from one backward pass.
/// Every component of every parameter is perturbed by `±h`; the relative
/// error of a component is `|a − n| / max(1, |a|, |n|)`, and the maximum over
/// all components is returned.
pub fn grad_check<F>(store: &mut ParamStore, h: f64, mut f: F) -> f64
where
    F: FnMut(&ParamStore) -> (f64, GradMap),
{
    assert!(h > 0.0);
    let (_, analytic) = f(store);
    let names: Vec<String> = store.names().map(str::to_string).collect();
    let mut max_rel = 0.0f64;
    for name in &names {
        let len = store.get(name).data().len();
        for i in 0..len {
            let orig = store.get(name).data()[i];

            let mut t = store.get(name).clone();
            t.data_mut()[i] = orig + h;
            store.set(name, t);
            let (loss_plus, _) = f(store);

            let mut t = store.get(name).clone();
            t.data_mut()[i] = orig - h;
            store.set(name, t);
            let (loss_minus, _) = f(store);

            let mut t = store.get(name).clone();
            t.data_mut()[i] = orig;
            store.set(name, t);

            let numeric = (loss_plus - loss_minus) / (2.0 * h);
            let exact = analytic.get(name).map_or(0.0, |g| g.data()[i]);
            let rel = (exact - numeric).abs() / 1.0f64.max(exact.abs()).max(numeric.abs());
            max_rel = max_rel.max(rel);
        }
    }
    max_rel
}
