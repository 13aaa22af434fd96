//! Central finite-difference verification of reverse-mode gradients.

use std::collections::BTreeMap;

use crate::graph::{Graph, Var};
use crate::params::{Bound, ParameterStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// Perturbation `h` of the central difference `(f(x+h) - f(x-h)) / 2h`.
    pub step: f64,
    /// Allowed `|analytic - numeric| / max(|analytic|, |numeric|, abs_floor)`.
    pub rel_tol: f64,
    /// Scale below which differences are judged absolutely, since relative
    /// error is meaningless for derivatives that are zero.
    pub abs_floor: f64,
    /// Check at most this many evenly spaced elements per tensor.
    pub max_per_tensor: Option<usize>,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-3,
            abs_floor: 1e-6,
            max_per_tensor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub failures: Vec<Mismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

impl GradCheck {
    fn indices(&self, numel: usize) -> Vec<usize> {
        match self.max_per_tensor {
            Some(m) if m < numel => {
                let m = m.max(1);
                (0..m).map(|i| i * numel / m).collect()
            }
            _ => (0..numel).collect(),
        }
    }

    /// Checks the gradient of the scalar `f` with respect to every input.
    pub fn run<F>(&self, inputs: &[Tensor], f: F) -> GradCheckReport
    where
        F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Var<'g>,
    {
        let named: BTreeMap<String, Tensor> = inputs
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("{i:04}"), t.clone()))
            .collect();
        self.run_named(&named, |g, vars| {
            let ordered: Vec<Var<'_>> = vars.values().copied().collect();
            f(g, &ordered)
        })
    }

    /// Checks the gradient of the scalar `f` with respect to every tensor of
    /// a parameter store.
    pub fn run_store<F>(&self, store: &ParameterStore, f: F) -> GradCheckReport
    where
        F: for<'g> Fn(&'g Graph, &Bound<'g>) -> Var<'g>,
    {
        let named: BTreeMap<String, Tensor> = store
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        self.run_named(&named, |g, vars| f(g, &Bound::from_vars(vars.clone())))
    }

    fn run_named<F>(&self, inputs: &BTreeMap<String, Tensor>, f: F) -> GradCheckReport
    where
        F: for<'g> Fn(&'g Graph, &BTreeMap<String, Var<'g>>) -> Var<'g>,
    {
        let eval = |inputs: &BTreeMap<String, Tensor>| -> f64 {
            let g = Graph::new();
            let vars = inputs
                .iter()
                .map(|(k, t)| (k.clone(), g.constant(t.clone())))
                .collect();
            let out = f(&g, &vars).value().item();
            out
        };

        let g = Graph::new();
        let vars: BTreeMap<String, Var<'_>> = inputs
            .iter()
            .map(|(k, t)| (k.clone(), g.param(t.clone())))
            .collect();
        let loss = f(&g, &vars);
        let grads = g.backward(loss);

        let mut report = GradCheckReport::default();
        let mut probe = inputs.clone();
        for (name, var) in &vars {
            let analytic = grads.get_or_zeros(*var);
            for idx in self.indices(analytic.numel()) {
                let orig = inputs[name].data()[idx];
                probe.get_mut(name).unwrap().data_mut()[idx] = orig + self.step;
                let plus = eval(&probe);
                probe.get_mut(name).unwrap().data_mut()[idx] = orig - self.step;
                let minus = eval(&probe);
                probe.get_mut(name).unwrap().data_mut()[idx] = orig;

                let numeric = (plus - minus) / (2.0 * self.step);
                let a = analytic.data()[idx];
                let scale = a.abs().max(numeric.abs()).max(self.abs_floor);
                let rel = (a - numeric).abs() / scale;
                report.checked += 1;
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel > self.rel_tol || !rel.is_finite() {
                    report.failures.push(Mismatch {
                        tensor: name.clone(),
                        index: idx,
                        analytic: a,
                        numeric,
                        rel_error: rel,
                    });
                }
            }
        }
        report
    }
}
