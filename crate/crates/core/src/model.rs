//! Periodic linear FDE models `ẋ(t) = L(t)x_t` and their ingestion.
//!
//! A model is a period, a state dimension, and the functional `L(t)`
//! represented by point masses (delay/advance terms with `T`-periodic matrix
//! coefficients) plus quadrature-integrable distributed kernels. Three kinds
//! are supported:
//!
//! * `dde`  — finite delays, lags `τ > 0`, history `[−h, 0]`;
//! * `idde` — unbounded delay on the exponentially weighted state space with
//!   weight `ρ > 0`, history truncated at a recorded `s_max`;
//! * `mfde` — mixed advance/delay with signed shifts in `[r₋, r₊]`.
//!
//! Sign conventions: `dde`/`idde` terms store positive lags `τ` and act as
//! `A(t)x(t−τ)`; `mfde` terms store signed shifts `θ` and act as
//! `A(t)x(t+θ)`. [`signed_shift`] is the single conversion point between the
//! two conventions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Deserialize;

use crate::expr::{Expr, Var};
use crate::grid::{HistoryField, ThetaGrid};
use crate::periodic::PeriodicFunction;
use crate::quad::{composite_gauss_on, gauss_legendre_on};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Dde,
    Idde,
    Mfde,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Dde => "dde",
            Kind::Idde => "idde",
            Kind::Mfde => "mfde",
        }
    }
}

/// Map a stored shift to the signed history argument `θ` so that every term
/// reads `A(t) x(t+θ)` with weight `e^{zθ}` in the characteristic operator.
/// Retarded kinds store lags `τ > 0` (argument `t − τ`), mixed models store
/// `θ` directly.
pub fn signed_shift(kind: Kind, stored: f64) -> f64 {
    match kind {
        Kind::Dde | Kind::Idde => -stored,
        Kind::Mfde => stored,
    }
}

/// A `T`-periodic matrix coefficient, either a matrix of closed-form
/// expressions in `t` or a finite Fourier-mode table.
#[derive(Debug, Clone)]
pub enum Coefficient {
    Exprs(Vec<Vec<Expr>>),
    Modes(Vec<(i64, DMatrix<Complex64>)>),
}

impl Coefficient {
    pub fn scalar(src: &str) -> Result<Self> {
        Self::from_exprs(&[vec![src.to_string()]])
    }

    pub fn from_exprs(rows: &[Vec<String>]) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut erow = Vec::with_capacity(row.len());
            for (j, src) in row.iter().enumerate() {
                let e = Expr::parse(src, &[Var::T])
                    .map_err(|e| Error::Parse(format!("coefficient entry ({i},{j}): {e}")))?;
                erow.push(e);
            }
            out.push(erow);
        }
        Ok(Coefficient::Exprs(out))
    }

    pub fn nrows(&self) -> usize {
        match self {
            Coefficient::Exprs(rows) => rows.len(),
            Coefficient::Modes(modes) => modes.first().map_or(0, |(_, m)| m.nrows()),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Coefficient::Exprs(rows) => rows.first().map_or(0, |r| r.len()),
            Coefficient::Modes(modes) => modes.first().map_or(0, |(_, m)| m.ncols()),
        }
    }

    /// Exact evaluation at time `t` for a model of period `period`.
    pub fn eval(&self, t: f64, period: f64) -> DMatrix<Complex64> {
        match self {
            Coefficient::Exprs(rows) => {
                let n = rows.len();
                let m = rows[0].len();
                DMatrix::from_fn(n, m, |i, j| Complex64::new(rows[i][j].eval(t, f64::NAN), 0.0))
            }
            Coefficient::Modes(modes) => {
                let n = self.nrows();
                let m = self.ncols();
                let mut out = DMatrix::zeros(n, m);
                for (k, mat) in modes {
                    let phase = Complex64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * *k as f64 * t / period,
                    );
                    out += mat * phase;
                }
                out
            }
        }
    }

    pub fn constant_in_time(&self) -> bool {
        match self {
            Coefficient::Exprs(rows) => {
                rows.iter().all(|r| r.iter().all(|e| !e.uses(Var::T)))
            }
            Coefficient::Modes(modes) => modes.iter().all(|(k, _)| *k == 0),
        }
    }

    /// `max_t ‖A(t)‖_∞` estimated on a sample grid (induced sup-norm = max
    /// absolute row sum).
    pub fn sup_opnorm(&self, period: f64) -> f64 {
        let samples = 256;
        (0..samples)
            .map(|j| {
                let t = period * j as f64 / samples as f64;
                let a = self.eval(t, period);
                (0..a.nrows())
                    .map(|i| (0..a.ncols()).map(|c| a[(i, c)].norm()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// One point mass of the Stieltjes measure: coefficient `A(t)` acting at a
/// single shifted argument.
#[derive(Debug, Clone)]
pub struct DelayTerm {
    pub shift: f64,
    pub coeff: Coefficient,
}

/// Matrix-valued kernel density `(t, s) ↦ k(t, s)`.
#[derive(Debug, Clone)]
pub struct Density {
    exprs: Vec<Vec<Expr>>,
}

impl Density {
    pub fn scalar(src: &str) -> Result<Self> {
        Self::from_exprs(&[vec![src.to_string()]])
    }

    pub fn from_exprs(rows: &[Vec<String>]) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut erow = Vec::with_capacity(row.len());
            for (j, src) in row.iter().enumerate() {
                let e = Expr::parse(src, &[Var::T, Var::S])
                    .map_err(|e| Error::Parse(format!("density entry ({i},{j}): {e}")))?;
                erow.push(e);
            }
            out.push(erow);
        }
        Ok(Density { exprs: out })
    }

    pub fn nrows(&self) -> usize {
        self.exprs.len()
    }

    pub fn ncols(&self) -> usize {
        self.exprs.first().map_or(0, |r| r.len())
    }

    pub fn eval(&self, t: f64, s: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| {
            Complex64::new(self.exprs[i][j].eval(t, s), 0.0)
        })
    }

    pub fn constant_in_time(&self) -> bool {
        self.exprs.iter().all(|r| r.iter().all(|e| !e.uses(Var::T)))
    }

    fn sup_rowsum(&self, t: f64, s: f64) -> f64 {
        let a = self.eval(t, s);
        (0..a.nrows())
            .map(|i| (0..a.ncols()).map(|c| a[(i, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Absolutely continuous part of the measure on `[lo, hi]` (in the stored
/// shift convention); `hi = None` means unbounded support (`idde` only).
#[derive(Debug, Clone)]
pub struct DistributedKernel {
    pub density: Density,
    pub lo: f64,
    pub hi: Option<f64>,
    pub order: usize,
}

impl DistributedKernel {
    /// Quadrature nodes/weights in the stored shift variable. Unbounded
    /// supports are truncated at the model's recorded `s_max`.
    pub fn quadrature(&self, s_max_model: Option<f64>) -> (Vec<f64>, Vec<f64>) {
        match self.hi {
            Some(hi) => {
                let len = hi - self.lo;
                if len > 4.0 {
                    composite_gauss_on(self.order, self.lo, hi, 2.0)
                } else {
                    gauss_legendre_on(self.order.max(4), self.lo, hi)
                }
            }
            None => {
                let hi = s_max_model.expect("unbounded kernel requires a truncation point");
                composite_gauss_on(self.order.max(8), self.lo, hi, 2.0)
            }
        }
    }
}

/// A validated periodic linear FDE model.
#[derive(Debug, Clone)]
pub struct FdeModel {
    pub kind: Kind,
    pub period: f64,
    pub dim: usize,
    pub terms: Vec<DelayTerm>,
    pub kernels: Vec<DistributedKernel>,
    pub rho: Option<f64>,
    r_minus: f64,
    r_plus: f64,
    s_max: Option<f64>,
    norm_l: f64,
    mfde_gap_condition: Option<bool>,
}

impl FdeModel {
    /// Build and validate a model. `history` optionally widens the retarded
    /// history interval beyond the largest lag (needed e.g. for models with
    /// no terms at all).
    pub fn new(
        kind: Kind,
        period: f64,
        dim: usize,
        terms: Vec<DelayTerm>,
        kernels: Vec<DistributedKernel>,
        rho: Option<f64>,
        history: Option<f64>,
    ) -> Result<Self> {
        let mut errors = Vec::new();
        if period <= 0.0 {
            errors.push(format!("period must be positive, got {period}"));
        }
        if dim == 0 {
            errors.push("state dimension must be at least 1".into());
        }

        for (i, term) in terms.iter().enumerate() {
            if term.coeff.nrows() != dim || term.coeff.ncols() != dim {
                errors.push(format!(
                    "term {i}: coefficient is {}x{}, expected {dim}x{dim}",
                    term.coeff.nrows(),
                    term.coeff.ncols()
                ));
            }
            match kind {
                Kind::Dde | Kind::Idde => {
                    if term.shift <= 0.0 {
                        errors.push(format!("term {i}: lag must be positive, got {}", term.shift));
                    }
                }
                Kind::Mfde => {}
            }
        }
        for (i, kernel) in kernels.iter().enumerate() {
            if kernel.density.nrows() != dim || kernel.density.ncols() != dim {
                errors.push(format!(
                    "kernel {i}: density is {}x{}, expected {dim}x{dim}",
                    kernel.density.nrows(),
                    kernel.density.ncols()
                ));
            }
            if kernel.order == 0 {
                errors.push(format!("kernel {i}: quadrature order must be positive"));
            }
            match (kind, kernel.hi) {
                (Kind::Idde, _) => {
                    if kernel.lo < 0.0 {
                        errors.push(format!("kernel {i}: idde support must start at s >= 0"));
                    }
                }
                (_, None) => {
                    errors.push(format!("kernel {i}: unbounded support is only valid for idde"));
                }
                (Kind::Dde, Some(hi)) => {
                    if kernel.lo < 0.0 || hi <= kernel.lo {
                        errors.push(format!("kernel {i}: invalid dde support [{}, {hi}]", kernel.lo));
                    }
                }
                (Kind::Mfde, Some(hi)) => {
                    if hi <= kernel.lo {
                        errors.push(format!("kernel {i}: invalid support [{}, {hi}]", kernel.lo));
                    }
                }
            }
        }

        match kind {
            Kind::Idde => match rho {
                None => errors.push("idde models require the state-space weight rho".into()),
                Some(r) if r <= 0.0 => errors.push(format!("rho must be positive, got {r}")),
                _ => {}
            },
            _ => {
                if rho.is_some() {
                    errors.push("rho is only meaningful for idde models".into());
                }
            }
        }

        // Coefficient periodicity: expressions in t are only constrained
        // numerically; catch e.g. sin(t) declared with period 1.
        if errors.is_empty() {
            for (i, term) in terms.iter().enumerate() {
                let a0 = term.coeff.eval(0.25 * period, period);
                let a1 = term.coeff.eval(0.25 * period + period, period);
                let scale = 1.0 + crate::periodic::max_abs(&a0);
                if crate::periodic::max_abs(&(a0 - a1)) > 1e-9 * scale {
                    errors.push(format!("term {i}: coefficient is not {period}-periodic in t"));
                }
            }
            for (i, kernel) in kernels.iter().enumerate() {
                let s_probe = kernel.lo + 0.3;
                let a0 = kernel.density.eval(0.25 * period, s_probe);
                let a1 = kernel.density.eval(0.25 * period + period, s_probe);
                let scale = 1.0 + crate::periodic::max_abs(&a0);
                if crate::periodic::max_abs(&(a0 - a1)) > 1e-9 * scale {
                    errors.push(format!("kernel {i}: density is not {period}-periodic in t"));
                }
            }
        }

        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }

        // Truncation point for unbounded kernels: extend until the
        // rho-weighted tail drops below 1e-12 (weight margin 0.01 keeps the
        // bound valid up to the domain boundary Re z -> -rho).
        let s_max = if kind == Kind::Idde {
            let rho = rho.unwrap();
            let mut s_needed: f64 = 1.0;
            for kernel in kernels.iter().filter(|k| k.hi.is_none()) {
                match truncation_point(kernel, rho, period) {
                    Some(s) => s_needed = s_needed.max(s),
                    None => {
                        return Err(Error::Validation(vec![
                            "kernel tail is not integrable against the rho weight".into(),
                        ]))
                    }
                }
            }
            for kernel in kernels.iter().filter(|k| k.hi.is_some()) {
                s_needed = s_needed.max(kernel.hi.unwrap());
            }
            for term in &terms {
                s_needed = s_needed.max(term.shift);
            }
            Some(s_needed)
        } else {
            None
        };

        // History/anticipation interval.
        let mut r_minus: f64 = 0.0;
        let mut r_plus: f64 = 0.0;
        for term in &terms {
            let th = signed_shift(kind, term.shift);
            r_minus = r_minus.min(th);
            r_plus = r_plus.max(th);
        }
        for kernel in &kernels {
            let hi = kernel.hi.unwrap_or_else(|| s_max.unwrap());
            for s in [kernel.lo, hi] {
                let th = signed_shift(kind, s);
                r_minus = r_minus.min(th);
                r_plus = r_plus.max(th);
            }
        }
        if let Some(s) = s_max {
            r_minus = r_minus.min(-s);
        }
        if let Some(h) = history {
            if h < -r_minus {
                return Err(Error::Validation(vec![format!(
                    "explicit history {h} is smaller than the largest lag {}",
                    -r_minus
                )]));
            }
            r_minus = -h;
        }
        if r_minus == 0.0 && r_plus == 0.0 {
            // No functional part at all; keep a one-period history so the
            // tensor-grid operators remain well-defined.
            r_minus = -period;
        }
        // Normalize negative zeros out of the derived bounds.
        r_minus += 0.0;
        r_plus += 0.0;

        let mut model = FdeModel {
            kind,
            period,
            dim,
            terms,
            kernels,
            rho,
            r_minus,
            r_plus,
            s_max,
            norm_l: 0.0,
            mfde_gap_condition: None,
        };
        model.norm_l = model.estimate_norm_l();
        if kind == Kind::Mfde {
            let reach = (-model.r_minus).min(model.r_plus);
            model.mfde_gap_condition =
                Some(reach < 1.0 / (std::f64::consts::E * model.norm_l.max(1e-300)));
        }
        Ok(model)
    }

    pub fn r_minus(&self) -> f64 {
        self.r_minus
    }

    pub fn r_plus(&self) -> f64 {
        self.r_plus
    }

    /// Truncation point of the history interval for `idde` models.
    pub fn s_max(&self) -> Option<f64> {
        self.s_max
    }

    /// Estimate of `‖L‖_∞ = sup_t ‖L(t)‖`.
    pub fn norm_l(&self) -> f64 {
        self.norm_l
    }

    /// For `mfde`: whether the sufficient condition
    /// `min{−r₋, r₊} < 1/(e‖L‖_∞)` for a nonempty resolvent set holds.
    pub fn mfde_gap_condition(&self) -> Option<bool> {
        self.mfde_gap_condition
    }

    /// Weight for sup norms on history fields (`idde` only).
    pub fn rho_weight(&self) -> Option<f64> {
        match self.kind {
            Kind::Idde => self.rho,
            _ => None,
        }
    }

    fn estimate_norm_l(&self) -> f64 {
        let mut total = 0.0;
        for term in &self.terms {
            total += term.coeff.sup_opnorm(self.period);
        }
        for kernel in &self.kernels {
            let (nodes, weights) = kernel.quadrature(self.s_max);
            let mut worst: f64 = 0.0;
            for j in 0..16 {
                let t = self.period * j as f64 / 16.0;
                let mass: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&s, &w)| w.abs() * kernel.density.sup_rowsum(t, s))
                    .sum();
                worst = worst.max(mass);
            }
            total += worst;
        }
        total
    }

    /// Signed shifts and exact-time coefficient evaluations of all point
    /// masses, plus quadrature atoms of the kernels: everything the
    /// characteristic operator needs, in one list of `(θ, weight, coeff)`
    /// where the action is `weight · coeff(t) · x(t+θ)`.
    pub fn atoms(&self) -> Vec<Atom<'_>> {
        let mut out = Vec::new();
        for term in &self.terms {
            out.push(Atom {
                theta: signed_shift(self.kind, term.shift),
                weight: 1.0,
                source: AtomSource::Term(&term.coeff),
            });
        }
        for kernel in &self.kernels {
            let (nodes, weights) = kernel.quadrature(self.s_max);
            for (s, w) in nodes.into_iter().zip(weights) {
                out.push(Atom {
                    theta: signed_shift(self.kind, s),
                    weight: w,
                    source: AtomSource::Kernel(&kernel.density, s),
                });
            }
        }
        out
    }

    /// Apply `L(t)` to a history segment sampled on `grid`.
    pub fn apply_l_segment(
        &self,
        t: f64,
        grid: &ThetaGrid,
        values: &DMatrix<Complex64>,
    ) -> Result<DVector<Complex64>> {
        assert_eq!(values.nrows(), grid.len());
        assert_eq!(values.ncols(), self.dim);
        let mut out = DVector::zeros(self.dim);
        for atom in self.atoms() {
            if atom.theta < grid.r_minus() - 1e-12 || atom.theta > grid.r_plus() + 1e-12 {
                return Err(Error::Domain(format!(
                    "theta grid [{}, {}] does not cover requested shift {}",
                    grid.r_minus(),
                    grid.r_plus(),
                    atom.theta
                )));
            }
            let w = grid.interp_weights(atom.theta);
            let mut seg = DVector::zeros(self.dim);
            for (idx, wi) in w {
                for c in 0..self.dim {
                    seg[c] += values[(idx, c)] * Complex64::from(wi);
                }
            }
            out += atom.coeff(t, self.period) * seg * Complex64::from(atom.weight);
        }
        Ok(out)
    }

    /// Apply `L(t)` along a whole field: returns `t ↦ L(t)ψ(t)`.
    pub fn apply_l_field(&self, psi: &HistoryField) -> Result<PeriodicFunction> {
        let n_time = psi.n_time();
        let times = psi.col(0).grid_times();
        let grid = psi.grid();
        let mut out = DMatrix::zeros(n_time, self.dim);
        for atom in self.atoms() {
            if atom.theta < grid.r_minus() - 1e-12 || atom.theta > grid.r_plus() + 1e-12 {
                return Err(Error::Domain(format!(
                    "field grid [{}, {}] does not cover requested shift {}",
                    grid.r_minus(),
                    grid.r_plus(),
                    atom.theta
                )));
            }
            let col = psi.interp_col(atom.theta);
            for (j, &t) in times.iter().enumerate() {
                let a = atom.coeff(t, self.period);
                let mut x = DVector::zeros(self.dim);
                for c in 0..self.dim {
                    x[c] = col.values()[(j, c)];
                }
                let y = a * x * Complex64::from(atom.weight);
                for c in 0..self.dim {
                    out[(j, c)] += y[c];
                }
            }
        }
        Ok(PeriodicFunction::from_values(self.period, out))
    }

    /// Theta grid suited to this model with `m` nodes per panel.
    pub fn theta_grid(&self, m: usize) -> std::sync::Arc<ThetaGrid> {
        ThetaGrid::for_interval(self.r_minus, self.r_plus, m)
    }
}

/// One additive contribution `weight · coeff(t) · x(t+θ)` to `L(t)x_t`.
pub struct Atom<'a> {
    pub theta: f64,
    pub weight: f64,
    source: AtomSource<'a>,
}

enum AtomSource<'a> {
    Term(&'a Coefficient),
    Kernel(&'a Density, f64),
}

impl Atom<'_> {
    pub fn coeff(&self, t: f64, period: f64) -> DMatrix<Complex64> {
        match &self.source {
            AtomSource::Term(c) => c.eval(t, period),
            AtomSource::Kernel(d, s) => d.eval(t, *s),
        }
    }

    pub fn constant_in_time(&self) -> bool {
        match &self.source {
            AtomSource::Term(c) => c.constant_in_time(),
            AtomSource::Kernel(d, _) => d.constant_in_time(),
        }
    }
}

/// Find `S` with `∫_S^∞ ‖k(t,s)‖ e^{(ρ−0.01)s} ds < 1e−12`, probing the tail
/// in panels. Returns `None` when the weighted tail does not decay.
fn truncation_point(kernel: &DistributedKernel, rho: f64, period: f64) -> Option<f64> {
    let margin = 0.01_f64.min(0.2 * rho);
    let w = rho - margin;
    let panel_len = 5.0;
    let mut s = kernel.lo.max(0.0);
    let mut prev_mass = f64::INFINITY;
    let cap = 400.0 / rho;
    while s < cap {
        let (nodes, weights) = gauss_legendre_on(24, s, s + panel_len);
        let mass: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &wt)| {
                let density: f64 = (0..4)
                    .map(|j| kernel.density.sup_rowsum(period * j as f64 / 4.0, x))
                    .fold(0.0, f64::max);
                wt * density * (w * x).exp()
            })
            .sum();
        if mass < 1e-13 && mass <= prev_mass {
            return Some(s + panel_len);
        }
        prev_mass = mass;
        s += panel_len;
    }
    None
}

// ---------------------------------------------------------------------------
// File ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: String,
    period: f64,
    dim: usize,
    #[serde(default)]
    rho: Option<f64>,
    #[serde(default)]
    history: Option<f64>,
    #[serde(default, rename = "term")]
    terms: Vec<TermFile>,
    #[serde(default, rename = "kernel")]
    kernels: Vec<KernelFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    shift: f64,
    coeff: CoeffFile,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CoeffFile {
    Scalar(String),
    Matrix(Vec<Vec<String>>),
    Modes(ModesFile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModesFile {
    modes: Vec<ModeFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeFile {
    k: i64,
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    density: DensityFile,
    lo: f64,
    #[serde(default)]
    hi: Option<f64>,
    #[serde(default = "default_order")]
    order: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DensityFile {
    Scalar(String),
    Matrix(Vec<Vec<String>>),
}

fn default_order() -> usize {
    32
}

impl CoeffFile {
    fn build(self) -> Result<Coefficient> {
        match self {
            CoeffFile::Scalar(src) => Coefficient::scalar(&src),
            CoeffFile::Matrix(rows) => Coefficient::from_exprs(&rows),
            CoeffFile::Modes(m) => {
                let mut out = Vec::new();
                for mode in m.modes {
                    let nr = mode.re.len();
                    let nc = mode.re.first().map_or(0, |r| r.len());
                    if mode.re.iter().any(|r| r.len() != nc) {
                        return Err(Error::Parse("ragged mode matrix".into()));
                    }
                    let im = mode.im.unwrap_or_else(|| vec![vec![0.0; nc]; nr]);
                    if im.len() != nr || im.iter().any(|r| r.len() != nc) {
                        return Err(Error::Parse("mode im shape differs from re".into()));
                    }
                    let mat = DMatrix::from_fn(nr, nc, |i, j| Complex64::new(mode.re[i][j], im[i][j]));
                    out.push((mode.k, mat));
                }
                Ok(Coefficient::Modes(out))
            }
        }
    }
}

/// Parse a model document (TOML). Unknown keys are rejected; parse errors
/// carry line/column context from the TOML parser.
pub fn parse_model_str(src: &str) -> Result<FdeModel> {
    let file: ModelFile =
        toml::from_str(src).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let kind = match file.kind.as_str() {
        "dde" => Kind::Dde,
        "idde" => Kind::Idde,
        "mfde" => Kind::Mfde,
        other => return Err(Error::Parse(format!("unknown kind `{other}`"))),
    };
    let mut terms = Vec::new();
    for t in file.terms {
        terms.push(DelayTerm { shift: t.shift, coeff: t.coeff.build()? });
    }
    let mut kernels = Vec::new();
    for k in file.kernels {
        let density = match k.density {
            DensityFile::Scalar(src) => Density::scalar(&src)?,
            DensityFile::Matrix(rows) => Density::from_exprs(&rows)?,
        };
        kernels.push(DistributedKernel { density, lo: k.lo, hi: k.hi, order: k.order });
    }
    FdeModel::new(kind, file.period, file.dim, terms, kernels, file.rho, file.history)
}

/// Load and validate a model from a file path.
pub fn load_model(path: &std::path::Path) -> Result<FdeModel> {
    let src = std::fs::read_to_string(path)?;
    parse_model_str(&src)
}
