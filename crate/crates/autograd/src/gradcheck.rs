use crate::error::{AutogradError, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct GradcheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Differences at or below this magnitude count as exact agreement.
    pub abs_floor: f64,
    /// Check at most this many evenly spaced entries of each parameter.
    pub max_entries_per_param: Option<usize>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            abs_floor: 1e-10,
            max_entries_per_param: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    /// Largest per-parameter relative error.
    pub max_rel_error: f64,
    /// `(name, relative error)` for every parameter, in registration order.
    pub per_param: Vec<(String, f64)>,
    pub entries_checked: usize,
}

impl GradcheckReport {
    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn sample_indices(len: usize, limit: Option<usize>) -> Vec<usize> {
    match limit {
        Some(m) if m < len => {
            let m = m.max(1);
            (0..m).map(|i| i * len / m + (len / m) / 2).collect()
        }
        _ => (0..len).collect(),
    }
}

/// Compares reverse-mode parameter gradients with central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε`.
///
/// `forward` rebuilds the loss on a fresh graph from the given parameters.
/// The error for one parameter tensor is
/// `max|g − ĝ| / max(max|g|, max|ĝ|)` over the checked entries, and is zero
/// when `max|g − ĝ|` does not exceed `abs_floor`.
pub fn gradcheck<T, F>(
    params: &ParamStore<T>,
    forward: F,
    opts: GradcheckOptions,
) -> Result<GradcheckReport>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &ParamStore<T>) -> Result<Var>,
{
    if !T::IS_F64 {
        return Err(AutogradError::PrecisionNotF64);
    }
    let eval = |store: &ParamStore<T>| -> Result<f64> {
        let mut g = Graph::new();
        let loss = forward(&mut g, store)?;
        let shape = g.shape(loss);
        if shape.iter().product::<usize>() != 1 {
            return Err(AutogradError::NonScalarLoss(shape.to_vec()));
        }
        Ok(g.value(loss).item().to_f64())
    };

    let mut g = Graph::new();
    let loss = forward(&mut g, params)?;
    let grads = g.backward(loss)?;

    let mut work = params.clone();
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        per_param: Vec::with_capacity(params.len()),
        entries_checked: 0,
    };
    for id in params.ids() {
        let len = params.get(id).len();
        let analytic = grads.param(id);
        let (mut max_diff, mut max_a, mut max_n) = (0.0f64, 0.0f64, 0.0f64);
        for idx in sample_indices(len, opts.max_entries_per_param) {
            let orig = params.get(id).data()[idx];
            set(&mut work, id, idx, T::from_f64(orig.to_f64() + opts.eps));
            let fp = eval(&work)?;
            set(&mut work, id, idx, T::from_f64(orig.to_f64() - opts.eps));
            let fm = eval(&work)?;
            set(&mut work, id, idx, orig);
            let numeric = (fp - fm) / (2.0 * opts.eps);
            let a = analytic.map_or(0.0, |t| t.data()[idx].to_f64());
            max_diff = max_diff.max((a - numeric).abs());
            max_a = max_a.max(a.abs());
            max_n = max_n.max(numeric.abs());
            report.entries_checked += 1;
        }
        let rel = if max_diff <= opts.abs_floor {
            0.0
        } else {
            max_diff / max_a.max(max_n)
        };
        report.max_rel_error = report.max_rel_error.max(rel);
        report.per_param.push((params.name(id).to_string(), rel));
    }
    Ok(report)
}

fn set<T: Scalar>(store: &mut ParamStore<T>, id: ParamId, idx: usize, v: T) {
    store.get_mut(id).data_mut()[idx] = v;
}
