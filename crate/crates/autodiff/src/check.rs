//! Finite-difference gradient checking.

use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|a - n| / max(|a|, |n|, 1e-8)` over all coordinates.
    pub max_rel_error: f64,
    /// Coordinate achieving it: parameter and flat index.
    pub worst: Option<(ParamId, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

fn evaluate<F>(store: &ParamStore, f: &F) -> f64
where
    F: Fn(&mut Tape, &ParamStore) -> Var,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, store);
    tape.scalar(out)
}

/// Compare backward gradients of `f` against central differences with step
/// `eps`, over every coordinate of every parameter in `store`.
///
/// `f` must be deterministic. On return the store holds the analytic
/// gradients and its original values.
pub fn grad_check<F>(store: &mut ParamStore, f: F, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Var,
{
    store.zero_grad();
    {
        let mut tape = Tape::new();
        let out = f(&mut tape, store);
        tape.backward(out, store)?;
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let len = store.value(id).len();
        for k in 0..len {
            let original = flat(store, id, k);
            set_flat(store, id, k, original + eps);
            let plus = evaluate(store, &f);
            set_flat(store, id, k, original - eps);
            let minus = evaluate(store, &f);
            set_flat(store, id, k, original);

            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = {
                let g = store.grad(id);
                g[[k / g.ncols(), k % g.ncols()]]
            };
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            report.coordinates += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some((id, k));
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

fn flat(store: &ParamStore, id: ParamId, k: usize) -> f64 {
    let v = store.value(id);
    v[[k / v.ncols(), k % v.ncols()]]
}

fn set_flat(store: &mut ParamStore, id: ParamId, k: usize, x: f64) {
    let v = &mut store.get_mut(id).value;
    let cols = v.ncols();
    v[[k / cols, k % cols]] = x;
}
