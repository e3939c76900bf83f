//! Python bindings for `graphprox`.

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use ::graphprox as core;
use core::grid::GridSpec;
use core::regression::{fista_fit, DenseMatrix, FitOptions, RegressionProblem};
use core::{NodeSet, PiecewiseLinearPenalty, ProxProblem, WeightVector};

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::NodeOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sorted(s: NodeSet) -> Vec<usize> {
    s.into_iter().collect()
}

type PenaltyArg = Option<Vec<Option<(Vec<f64>, Vec<f64>)>>>;

fn penalties(p: PenaltyArg) -> PyResult<Vec<Option<PiecewiseLinearPenalty>>> {
    p.unwrap_or_default()
        .into_iter()
        .map(|x| {
            x.map(|(b, s)| PiecewiseLinearPenalty::new(b, s))
                .transpose()
                .map_err(err)
        })
        .collect()
}

/// Submodular quadratic binary problem `sum q_ij x_i x_j + sum q_ii x_i`.
#[pyclass(name = "QuadraticBinaryProblem", module = "graphprox", frozen)]
struct PyProblem {
    inner: core::QuadraticBinaryProblem,
}

#[pymethods]
impl PyProblem {
    /// `couplings` holds `(i, j, q_ij)` with `q_ij <= 0`.
    #[new]
    #[pyo3(signature = (diag, couplings=Vec::new()))]
    fn new(diag: Vec<f64>, couplings: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        core::QuadraticBinaryProblem::new(diag, couplings)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn diag(&self) -> Vec<f64> {
        self.inner.diag().to_vec()
    }

    #[getter]
    fn couplings(&self) -> Vec<(usize, usize, f64)> {
        self.inner.couplings().iter().map(|c| (c.i, c.j, c.q)).collect()
    }

    /// `f(S) - beta * w(S)`; unit weights when `weights` is omitted.
    #[pyo3(signature = (nodes, beta=0.0, weights=None))]
    fn evaluate(&self, nodes: Vec<usize>, beta: f64, weights: Option<Vec<f64>>) -> PyResult<f64> {
        let n = self.inner.len();
        if let Some(&i) = nodes.iter().find(|&&i| i >= n) {
            return Err(err(core::Error::NodeOutOfRange { index: i, n }));
        }
        let w = weights.unwrap_or_else(|| vec![1.0; n]);
        if w.len() != n {
            return Err(err(core::Error::DimensionMismatch { expected: n, got: w.len() }));
        }
        Ok(core::evaluate(&self.inner, &nodes.into_iter().collect(), beta, &w))
    }

    /// Minimum-norm reduction vector; unit weights when `weights` is omitted.
    #[pyo3(signature = (weights=None))]
    fn reductions(&self, weights: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let alpha = match weights {
            None => core::alpha_reduction(&self.inner),
            Some(w) => {
                let w = WeightVector::new(w).map_err(err)?;
                core::find_weighted_reductions(&self.inner, &w).map_err(err)?
            }
        };
        core::reductions(&self.inner, &alpha).map_err(err)
    }

    /// Smallest and largest minimizers of `f(S) - beta * w(S)`.
    #[pyo3(signature = (beta, weights=None))]
    fn minimizers(&self, beta: f64, weights: Option<Vec<f64>>) -> PyResult<(Vec<usize>, Vec<usize>)> {
        let n = self.inner.len();
        let w = weights.clone().unwrap_or_else(|| vec![1.0; n]);
        let r = self.reductions(weights)?;
        let (u1, u2) = core::level_sets(&r, &w, beta);
        Ok((sorted(u1), sorted(u2)))
    }

    fn __repr__(&self) -> String {
        format!(
            "QuadraticBinaryProblem(n={}, couplings={})",
            self.inner.len(),
            self.inner.couplings().len()
        )
    }
}

/// Level sets `{r < beta w}` and `{r <= beta w}` of a reduction vector.
#[pyfunction]
#[pyo3(signature = (r, beta, weights=None))]
fn level_sets(r: Vec<f64>, beta: f64, weights: Option<Vec<f64>>) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let w = weights.unwrap_or_else(|| vec![1.0; r.len()]);
    if w.len() != r.len() {
        return Err(err(core::Error::DimensionMismatch { expected: r.len(), got: w.len() }));
    }
    let (u1, u2) = core::level_sets(&r, &w, beta);
    Ok((sorted(u1), sorted(u2)))
}

/// Sorted distinct values of `beta` at which the minimizer changes.
#[pyfunction]
#[pyo3(signature = (r, weights=None))]
fn breakpoints(r: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let w = weights.unwrap_or_else(|| vec![1.0; r.len()]);
    if w.len() != r.len() {
        return Err(err(core::Error::DimensionMismatch { expected: r.len(), got: w.len() }));
    }
    Ok(core::breakpoints(&r, &w))
}

/// `argmin_u sum (u_i - a_i)^2 + lambda (sum w_ij |u_i - u_j| + sum g_i(u_i))`.
///
/// `penalties` is a per-node list of `None` or `(breakpoints, slopes)`.
#[pyfunction(name = "prox")]
#[pyo3(signature = (center, edges=Vec::new(), lam=1.0, penalties=None))]
fn py_prox(
    center: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    lam: f64,
    penalties: PenaltyArg,
) -> PyResult<Vec<f64>> {
    let p = ProxProblem::new(center, edges, lam, self::penalties(penalties)?).map_err(err)?;
    Ok(core::prox(&p))
}

/// Optimality residual of `u` for the same problem `prox` solves.
#[pyfunction(name = "certificate")]
#[pyo3(signature = (u, center, edges=Vec::new(), lam=1.0, penalties=None))]
fn py_certificate(
    u: Vec<f64>,
    center: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    lam: f64,
    penalties: PenaltyArg,
) -> PyResult<f64> {
    let p = ProxProblem::new(center, edges, lam, self::penalties(penalties)?).map_err(err)?;
    if u.len() != p.len() {
        return Err(err(core::Error::DimensionMismatch { expected: p.len(), got: u.len() }));
    }
    Ok(core::certificate(&p, &u))
}

/// Anisotropic TV denoising of a row-major image given as a list of rows.
#[pyfunction]
#[pyo3(signature = (image, lam, weight=1.0))]
fn denoise(image: Vec<Vec<f64>>, lam: f64, weight: f64) -> PyResult<Vec<Vec<f64>>> {
    let height = image.len();
    let width = image.first().map_or(0, Vec::len);
    if image.iter().any(|row| row.len() != width) {
        return Err(PyValueError::new_err("image rows have different lengths"));
    }
    let grid = GridSpec::new(height, width, weight).map_err(err)?;
    let flat: Vec<f64> = image.into_iter().flatten().collect();
    let out = core::grid::denoise(&grid, &flat, lam).map_err(err)?;
    Ok(out.chunks(width.max(1)).map(<[f64]>::to_vec).collect())
}

/// Graph-fused least squares. Returns `(coefficients, trace, converged)`.
#[pyfunction]
#[pyo3(signature = (design, response, edges=Vec::new(), lam=1.0, penalties=None, tol=1e-8, max_iter=10000))]
#[allow(clippy::too_many_arguments)]
fn fit(
    design: Vec<Vec<f64>>,
    response: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    lam: f64,
    penalties: PenaltyArg,
    tol: f64,
    max_iter: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, bool)> {
    let design = DenseMatrix::from_rows(&design).map_err(err)?;
    let problem =
        RegressionProblem::new(design, response, edges, lam, self::penalties(penalties)?).map_err(err)?;
    let options = FitOptions {
        max_iter,
        tol,
        ..FitOptions::default()
    };
    let r = fista_fit(&problem, &options).map_err(err)?;
    Ok((r.coefficients, r.trace, r.converged))
}

#[pymodule]
fn graphprox(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(level_sets, m)?)?;
    m.add_function(wrap_pyfunction!(breakpoints, m)?)?;
    m.add_function(wrap_pyfunction!(py_prox, m)?)?;
    m.add_function(wrap_pyfunction!(py_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
