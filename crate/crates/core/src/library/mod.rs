//! Candidate feature libraries.
//!
//! A [`LibrarySpec`] is first compiled into a list of symbolic terms, each a
//! product of pointwise functions of the inputs and (optionally) partial
//! derivatives of state variables. Column names, widths and evaluation all
//! come from that single term list, so they cannot disagree.
//!
//! Inputs are the state variables `q0..q{n-1}` followed by the controls
//! `u0..u{r-1}`. Names follow a fixed grammar: derivatives append `_` and
//! the axis name once per order (`q0_xx`, `q1_t`), powers use `^`
//! (`q0^2`), and products join factors with a single space.

mod weak;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Mutex;

use nalgebra::DMatrix;
use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::data::{array_to_matrix, Dataset};
use crate::diff::{differentiate_dataset, DiffMethod};
use crate::error::{Error, Result};

/// Declarative description of a candidate library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LibrarySpec {
    /// All monomials up to `degree`. Without interactions only pure powers
    /// of single inputs are produced.
    Polynomial {
        degree: usize,
        #[serde(default = "yes")]
        include_bias: bool,
        #[serde(default = "yes")]
        include_interactions: bool,
    },
    /// `sin(k q)` and `cos(k q)` for integer `k = 1..=n_frequencies`.
    Fourier {
        n_frequencies: usize,
        #[serde(default = "yes")]
        include_sin: bool,
        #[serde(default = "yes")]
        include_cos: bool,
    },
    /// Named scalar functions applied to every input.
    Custom { functions: Vec<CustomFunction> },
    /// Partial derivatives of the states along `axes` up to
    /// `derivative_order`, the `multiply_by` state functions, and their
    /// products.
    Pde {
        derivative_order: usize,
        axes: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiply_by: Option<Box<LibrarySpec>>,
        /// Differentiation engine for these derivatives; defaults to the
        /// method passed to evaluation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diff: Option<DiffMethod>,
    },
    /// Integral (weak) form of `inner` against compactly supported
    /// polynomial test functions on random subdomains.
    WeakPde {
        inner: Box<LibrarySpec>,
        n_subdomains: usize,
        test_poly_order: u32,
        /// Grid points per subdomain along each axis, spatial axes first
        /// and time last.
        subdomain_size: Vec<usize>,
        #[serde(default)]
        seed: u64,
    },
    Concat { libraries: Vec<LibrarySpec> },
    Tensor {
        left: Box<LibrarySpec>,
        right: Box<LibrarySpec>,
    },
    /// Evaluate `inner` on the selected inputs only.
    InputSubset { inner: Box<LibrarySpec>, inputs: Vec<usize> },
}

fn yes() -> bool {
    true
}

impl LibrarySpec {
    pub fn polynomial(degree: usize) -> Self {
        LibrarySpec::Polynomial {
            degree,
            include_bias: true,
            include_interactions: true,
        }
    }

    pub fn polynomial_no_bias(degree: usize) -> Self {
        LibrarySpec::Polynomial {
            degree,
            include_bias: false,
            include_interactions: true,
        }
    }

    pub fn fourier(n_frequencies: usize) -> Self {
        LibrarySpec::Fourier {
            n_frequencies,
            include_sin: true,
            include_cos: true,
        }
    }

    /// PDE library along `axes` with optional state-function factors.
    pub fn pde(derivative_order: usize, axes: &[&str], multiply_by: Option<LibrarySpec>) -> Self {
        LibrarySpec::Pde {
            derivative_order,
            axes: axes.iter().map(|s| s.to_string()).collect(),
            multiply_by: multiply_by.map(Box::new),
            diff: None,
        }
    }

    pub fn is_weak(&self) -> bool {
        matches!(self, LibrarySpec::WeakPde { .. })
    }

    /// True when any term needs derivatives of the data.
    pub fn has_derivatives(&self) -> bool {
        match self {
            LibrarySpec::Pde { .. } | LibrarySpec::WeakPde { .. } => true,
            LibrarySpec::Concat { libraries } => libraries.iter().any(Self::has_derivatives),
            LibrarySpec::Tensor { left, right } => left.has_derivatives() || right.has_derivatives(),
            LibrarySpec::InputSubset { inner, .. } => inner.has_derivatives(),
            _ => false,
        }
    }

    /// Check parameter ranges for `n_inputs` inputs.
    pub fn validate(&self, n_inputs: usize) -> Result<()> {
        compile(self, &default_inputs(n_inputs)).map(|_| ())
    }
}

/// Scalar functions available to [`LibrarySpec::Custom`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomFunction {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
    Sigmoid,
    Recip,
}

impl CustomFunction {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            CustomFunction::Sin => x.sin(),
            CustomFunction::Cos => x.cos(),
            CustomFunction::Exp => x.exp(),
            CustomFunction::Tanh => x.tanh(),
            CustomFunction::Abs => x.abs(),
            CustomFunction::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            CustomFunction::Recip => 1.0 / x,
        }
    }
}

impl fmt::Display for CustomFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CustomFunction::Sin => "sin",
            CustomFunction::Cos => "cos",
            CustomFunction::Exp => "exp",
            CustomFunction::Tanh => "tanh",
            CustomFunction::Abs => "abs",
            CustomFunction::Sigmoid => "sigmoid",
            CustomFunction::Recip => "recip",
        };
        f.write_str(s)
    }
}

/// One library input variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDesc {
    pub name: String,
    /// Index of the state variable this input is, if any.
    pub state: Option<usize>,
}

/// Inputs `q0..q{n-1}` followed by `u0..u{r-1}`.
pub fn inputs_for(n_states: usize, n_controls: usize) -> Vec<InputDesc> {
    let states = (0..n_states).map(|i| InputDesc {
        name: format!("q{i}"),
        state: Some(i),
    });
    let controls = (0..n_controls).map(|i| InputDesc {
        name: format!("u{i}"),
        state: None,
    });
    states.chain(controls).collect()
}

fn default_inputs(n: usize) -> Vec<InputDesc> {
    inputs_for(n, 0)
}

/// Pointwise factor of a term, referring to a global input index.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Atom {
    Pow { input: usize, power: u32 },
    Sin { input: usize, freq: u32 },
    Cos { input: usize, freq: u32 },
    Func { input: usize, func: CustomFunction },
}

impl Atom {
    fn eval(&self, inputs: &[&[f64]], row: usize) -> f64 {
        match *self {
            Atom::Pow { input, power } => inputs[input][row].powi(power as i32),
            Atom::Sin { input, freq } => (freq as f64 * inputs[input][row]).sin(),
            Atom::Cos { input, freq } => (freq as f64 * inputs[input][row]).cos(),
            Atom::Func { input, func } => func.apply(inputs[input][row]),
        }
    }
}

/// Partial derivative of a state variable.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Deriv {
    pub state: usize,
    pub axis: String,
    pub order: usize,
    pub method: Option<DiffMethod>,
}

/// One library column: product of atoms and derivatives.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Term {
    pub name: String,
    pub atoms: Vec<Atom>,
    pub derivs: Vec<Deriv>,
}

impl Term {
    fn one() -> Self {
        Term {
            name: "1".into(),
            atoms: Vec::new(),
            derivs: Vec::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.atoms.is_empty() && self.derivs.is_empty()
    }

    fn product(a: &Term, b: &Term) -> Term {
        let name = match (a.is_constant(), b.is_constant()) {
            (true, _) => b.name.clone(),
            (_, true) => a.name.clone(),
            _ => format!("{} {}", a.name, b.name),
        };
        Term {
            name,
            atoms: a.atoms.iter().chain(&b.atoms).cloned().collect(),
            derivs: a.derivs.iter().chain(&b.derivs).cloned().collect(),
        }
    }

    /// Pointwise factor value at `row`.
    fn factor(&self, inputs: &[&[f64]], row: usize) -> f64 {
        self.atoms.iter().map(|a| a.eval(inputs, row)).product()
    }
}

/// Symbolic column list of a spec over the given inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledLibrary {
    pub(crate) terms: Vec<Term>,
    weak: Option<weak::WeakSpec>,
}

impl CompiledLibrary {
    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn has_derivatives(&self) -> bool {
        self.weak.is_some() || self.terms.iter().any(|t| !t.derivs.is_empty())
    }

    /// Evaluate all columns at one input row (no derivative terms allowed).
    pub fn eval_row(&self, input_row: &[f64]) -> Result<Vec<f64>> {
        if self.has_derivatives() {
            return Err(Error::Library(
                "library with derivative terms cannot be evaluated pointwise".into(),
            ));
        }
        let cols: Vec<&[f64]> = input_row.iter().map(std::slice::from_ref).collect();
        Ok(self.terms.iter().map(|t| t.factor(&cols, 0)).collect())
    }
}

/// Compile `spec` for the given inputs.
pub fn compile(spec: &LibrarySpec, inputs: &[InputDesc]) -> Result<CompiledLibrary> {
    let global: Vec<usize> = (0..inputs.len()).collect();
    if let LibrarySpec::WeakPde {
        inner,
        n_subdomains,
        test_poly_order,
        subdomain_size,
        seed,
    } = spec
    {
        let terms = compile_terms(inner, inputs, &global)?;
        check_unique(&terms)?;
        let max_moved = terms
            .iter()
            .flat_map(|t| t.derivs.iter().map(|d| d.order))
            .max()
            .unwrap_or(0)
            .max(1);
        if *n_subdomains == 0 {
            return Err(Error::param("n_subdomains", "must be >= 1"));
        }
        if *test_poly_order < 2 {
            return Err(Error::param("test_poly_order", "must be >= 2"));
        }
        if (*test_poly_order as usize) < max_moved {
            return Err(Error::param(
                "test_poly_order",
                format!("{test_poly_order} cannot absorb derivatives of order {max_moved}"),
            ));
        }
        return Ok(CompiledLibrary {
            terms,
            weak: Some(weak::WeakSpec {
                n_subdomains: *n_subdomains,
                poly_order: *test_poly_order,
                subdomain_size: subdomain_size.clone(),
                seed: *seed,
            }),
        });
    }
    let terms = compile_terms(spec, inputs, &global)?;
    check_unique(&terms)?;
    Ok(CompiledLibrary { terms, weak: None })
}

fn check_unique(terms: &[Term]) -> Result<()> {
    let mut seen = HashSet::new();
    for t in terms {
        if !seen.insert(t.name.as_str()) {
            return Err(Error::Library(format!("duplicate feature name `{}`", t.name)));
        }
    }
    Ok(())
}

/// `visible` maps the spec's local input indices to global input indices.
fn compile_terms(spec: &LibrarySpec, inputs: &[InputDesc], visible: &[usize]) -> Result<Vec<Term>> {
    let name = |local: usize| inputs[visible[local]].name.as_str();
    let k = visible.len();
    match spec {
        LibrarySpec::Polynomial {
            degree,
            include_bias,
            include_interactions,
        } => {
            let mut out = Vec::new();
            if *include_bias {
                out.push(Term::one());
            }
            for deg in 1..=*degree {
                let combos: Vec<Vec<usize>> = if *include_interactions {
                    combinations_with_replacement(k, deg)
                } else {
                    (0..k).map(|i| vec![i; deg]).collect()
                };
                for combo in combos {
                    let mut atoms = Vec::new();
                    let mut parts = Vec::new();
                    let mut i = 0;
                    while i < combo.len() {
                        let v = combo[i];
                        let mut p = 0;
                        while i < combo.len() && combo[i] == v {
                            p += 1;
                            i += 1;
                        }
                        atoms.push(Atom::Pow {
                            input: visible[v],
                            power: p,
                        });
                        parts.push(if p == 1 {
                            name(v).to_string()
                        } else {
                            format!("{}^{p}", name(v))
                        });
                    }
                    out.push(Term {
                        name: parts.join(" "),
                        atoms,
                        derivs: Vec::new(),
                    });
                }
            }
            Ok(out)
        }
        LibrarySpec::Fourier {
            n_frequencies,
            include_sin,
            include_cos,
        } => {
            if *n_frequencies == 0 {
                return Err(Error::param("n_frequencies", "must be >= 1"));
            }
            if !include_sin && !include_cos {
                return Err(Error::param("include_sin", "Fourier library needs sin or cos terms"));
            }
            let mut out = Vec::new();
            for f in 1..=*n_frequencies as u32 {
                for v in 0..k {
                    let input = visible[v];
                    if *include_sin {
                        out.push(Term {
                            name: format!("sin({f} {})", name(v)),
                            atoms: vec![Atom::Sin { input, freq: f }],
                            derivs: Vec::new(),
                        });
                    }
                    if *include_cos {
                        out.push(Term {
                            name: format!("cos({f} {})", name(v)),
                            atoms: vec![Atom::Cos { input, freq: f }],
                            derivs: Vec::new(),
                        });
                    }
                }
            }
            Ok(out)
        }
        LibrarySpec::Custom { functions } => {
            if functions.is_empty() {
                return Err(Error::param("functions", "custom library needs at least one function"));
            }
            let mut out = Vec::new();
            for func in functions {
                for v in 0..k {
                    out.push(Term {
                        name: format!("{func}({})", name(v)),
                        atoms: vec![Atom::Func {
                            input: visible[v],
                            func: *func,
                        }],
                        derivs: Vec::new(),
                    });
                }
            }
            Ok(out)
        }
        LibrarySpec::Pde {
            derivative_order,
            axes,
            multiply_by,
            diff,
        } => {
            if *derivative_order == 0 {
                return Err(Error::param("derivative_order", "must be >= 1"));
            }
            if axes.is_empty() {
                return Err(Error::param("axes", "PDE library needs at least one axis"));
            }
            if let Some(m) = diff {
                m.validate(1)?;
            }
            let mut derivs = Vec::new();
            for v in 0..k {
                let Some(state) = inputs[visible[v]].state else {
                    continue;
                };
                for axis in axes {
                    for order in 1..=*derivative_order {
                        derivs.push(Term {
                            name: format!("{}_{}", name(v), axis.repeat(order)),
                            atoms: Vec::new(),
                            derivs: vec![Deriv {
                                state,
                                axis: axis.clone(),
                                order,
                                method: *diff,
                            }],
                        });
                    }
                }
            }
            let funcs = match multiply_by {
                Some(m) => {
                    let f = compile_terms(m, inputs, visible)?;
                    if f.iter().any(|t| !t.derivs.is_empty()) {
                        return Err(Error::Library(
                            "PDE `multiply_by` must contain state functions only".into(),
                        ));
                    }
                    f
                }
                None => Vec::new(),
            };
            let mut out = derivs.clone();
            for f in funcs.iter().filter(|f| !f.is_constant()) {
                for d in &derivs {
                    out.push(Term::product(f, d));
                }
            }
            out.extend(funcs);
            Ok(out)
        }
        LibrarySpec::WeakPde { .. } => Err(Error::Library(
            "weak-form library is only allowed at the top level".into(),
        )),
        LibrarySpec::Concat { libraries } => {
            if libraries.is_empty() {
                return Err(Error::param("libraries", "concat needs at least one library"));
            }
            let mut out = Vec::new();
            for l in libraries {
                out.extend(compile_terms(l, inputs, visible)?);
            }
            Ok(out)
        }
        LibrarySpec::Tensor { left, right } => {
            let a = compile_terms(left, inputs, visible)?;
            let b = compile_terms(right, inputs, visible)?;
            let mut out = Vec::with_capacity(a.len() * b.len());
            for ta in &a {
                for tb in &b {
                    out.push(Term::product(ta, tb));
                }
            }
            Ok(out)
        }
        LibrarySpec::InputSubset { inner, inputs: sel } => {
            if sel.is_empty() {
                return Err(Error::param("inputs", "subset must select at least one input"));
            }
            if let Some(&bad) = sel.iter().find(|&&i| i >= k) {
                return Err(Error::param("inputs", format!("index {bad} out of range ({k} inputs)")));
            }
            let sub: Vec<usize> = sel.iter().map(|&i| visible[i]).collect();
            compile_terms(inner, inputs, &sub)
        }
    }
}

/// Sorted multisets of size `deg` drawn from `0..n`, in lexicographic order.
fn combinations_with_replacement(n: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut cur = vec![0; deg];
    loop {
        out.push(cur.clone());
        // Advance the rightmost index that can still grow.
        let mut i = deg;
        while i > 0 && cur[i - 1] == n - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        let v = cur[i - 1];
        for c in cur.iter_mut().skip(i) {
            *c = v;
        }
    }
}

/// Column count produced for `n_inputs` state inputs.
pub fn predict_width(spec: &LibrarySpec, n_inputs: usize) -> Result<usize> {
    Ok(compile(spec, &default_inputs(n_inputs))?.width())
}

/// Column names produced for the given inputs, without evaluating data.
pub fn feature_names(spec: &LibrarySpec, inputs: &[InputDesc]) -> Result<Vec<String>> {
    Ok(compile(spec, inputs)?.names())
}

/// Evaluated library.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// One row per sample (or per weak subdomain), one column per feature.
    pub values: DMatrix<f64>,
    pub names: Vec<String>,
    pub spec: LibrarySpec,
    /// Weak-form left-hand side `-∫ φ_t q` (subdomains x states); present
    /// only for weak libraries.
    pub weak_lhs: Option<DMatrix<f64>>,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Caches derivative arrays of the states keyed by axis, order and method.
struct DerivCache<'a> {
    dataset: &'a Dataset,
    default: DiffMethod,
    cache: Mutex<HashMap<(String, usize, String), std::sync::Arc<DMatrix<f64>>>>,
}

impl<'a> DerivCache<'a> {
    fn new(dataset: &'a Dataset, default: DiffMethod) -> Self {
        Self {
            dataset,
            default,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Flattened derivative matrix (samples x states).
    fn get(&self, d: &Deriv) -> Result<std::sync::Arc<DMatrix<f64>>> {
        let method = d.method.unwrap_or(self.default);
        let key = (d.axis.clone(), d.order, method.to_string());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let axis = self.dataset.grid().find(&d.axis).ok_or_else(|| {
            Error::Library(format!("dataset has no axis named `{}`", d.axis))
        })?;
        let arr: ArrayD<f64> = differentiate_dataset(self.dataset, method, axis, d.order)?;
        let mat = std::sync::Arc::new(array_to_matrix(&arr));
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, mat.clone());
        Ok(mat)
    }
}

/// Input columns of a dataset: states then controls, one slice per input.
fn input_columns(dataset: &Dataset) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
    (
        array_to_matrix(dataset.states()),
        dataset.controls().map(array_to_matrix),
    )
}

fn column_slices<'m>(states: &'m DMatrix<f64>, controls: Option<&'m DMatrix<f64>>) -> Vec<&'m [f64]> {
    let m = states.nrows();
    let mut cols: Vec<&[f64]> = (0..states.ncols())
        .map(|j| &states.as_slice()[j * m..(j + 1) * m])
        .collect();
    if let Some(c) = controls {
        cols.extend((0..c.ncols()).map(|j| &c.as_slice()[j * m..(j + 1) * m]));
    }
    cols
}

/// Evaluate `spec` on every sample of `dataset`. Rows follow the dataset's
/// flattening order (all samples, none dropped); weak libraries produce one
/// row per subdomain instead.
pub fn evaluate(spec: &LibrarySpec, dataset: &Dataset, diff: DiffMethod) -> Result<FeatureMatrix> {
    let inputs = inputs_for(dataset.n_states(), dataset.n_controls());
    let lib = compile(spec, &inputs)?;
    let (states, controls) = input_columns(dataset);
    let cols = column_slices(&states, controls.as_ref());
    let cache = DerivCache::new(dataset, diff);
    // Resolve all derivative arrays up front so errors surface early.
    for t in &lib.terms {
        for d in &t.derivs {
            cache.get(d)?;
        }
    }

    if let Some(w) = &lib.weak {
        let (values, lhs) = weak::evaluate(w, &lib.terms, dataset, &cols, &cache)?;
        return Ok(FeatureMatrix {
            values,
            names: lib.names(),
            spec: spec.clone(),
            weak_lhs: Some(lhs),
        });
    }

    let m = states.nrows();
    let mut values = DMatrix::zeros(m, lib.width());
    for (j, t) in lib.terms.iter().enumerate() {
        let derivs: Vec<(std::sync::Arc<DMatrix<f64>>, usize)> = t
            .derivs
            .iter()
            .map(|d| cache.get(d).map(|mat| (mat, d.state)))
            .collect::<Result<_>>()?;
        let mut col = values.column_mut(j);
        for i in 0..m {
            let mut v = t.factor(&cols, i);
            for (mat, s) in &derivs {
                v *= mat[(i, *s)];
            }
            col[i] = v;
        }
    }
    if !dataset.allows_missing() && values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("library features".into()));
    }
    Ok(FeatureMatrix {
        values,
        names: lib.names(),
        spec: spec.clone(),
        weak_lhs: None,
    })
}

/// One feature row from a single state (and control) sample.
pub fn evaluate_pointwise(
    spec: &LibrarySpec,
    state_row: &[f64],
    control_row: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let r = control_row.map_or(0, <[f64]>::len);
    let lib = compile(spec, &inputs_for(state_row.len(), r))?;
    let mut row = state_row.to_vec();
    if let Some(c) = control_row {
        row.extend_from_slice(c);
    }
    lib.eval_row(&row)
}
