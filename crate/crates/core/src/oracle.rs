//! Independent ground truth: monodromy operator by time integration for
//! retarded problems, and characteristic roots of constant-coefficient
//! models by Newton search on the autonomous characteristic function.
//!
//! Nothing here touches the characteristic-operator discretization; the
//! spectrum pipeline is validated against these generators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::ThetaGrid;
use crate::model::{FdeModel, Kind};
use crate::spectrum::strip_reduce;
use crate::{Error, Result};

/// Dense-output solution of a retarded initial value problem on `[0, t_end]`,
/// integrated with the classical fixed-step fourth-order scheme and cubic
/// Hermite interpolation between steps.
pub struct Trajectory {
    step: f64,
    xs: Vec<DVector<Complex64>>,
    fs: Vec<DVector<Complex64>>,
    history: Box<dyn Fn(f64) -> DVector<Complex64>>,
    r_minus: f64,
}

impl Trajectory {
    /// Solution value at any `u ∈ [r_minus, t_end]`.
    pub fn eval(&self, u: f64) -> DVector<Complex64> {
        if u <= 0.0 {
            let clamped = u.max(self.r_minus);
            return (self.history)(clamped);
        }
        let n_steps = self.xs.len() - 1;
        let pos = u / self.step;
        let mut k = pos.floor() as usize;
        if k >= n_steps {
            k = n_steps - 1;
        }
        let s = pos - k as f64;
        hermite(&self.xs[k], &self.fs[k], &self.xs[k + 1], &self.fs[k + 1], self.step, s)
    }

    pub fn t_end(&self) -> f64 {
        self.step * (self.xs.len() - 1) as f64
    }
}

fn hermite(
    x0: &DVector<Complex64>,
    f0: &DVector<Complex64>,
    x1: &DVector<Complex64>,
    f1: &DVector<Complex64>,
    h: f64,
    s: f64,
) -> DVector<Complex64> {
    let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
    let h10 = s * s * s - 2.0 * s * s + s;
    let h01 = -2.0 * s * s * s + 3.0 * s * s;
    let h11 = s * s * s - s * s;
    x0 * Complex64::from(h00)
        + f0 * Complex64::from(h10 * h)
        + x1 * Complex64::from(h01)
        + f1 * Complex64::from(h11 * h)
}

/// Integrate `ẋ = L(t)x_t` from the initial history `φ₀` on `[r₋, 0]`.
///
/// Fixed-step RK4; delayed arguments are read from the dense output (or from
/// the initial history). Stage times may momentarily need values a fraction
/// of a step ahead of the last completed node (lags smaller than the step);
/// those are served by extrapolating the last Hermite piece, which keeps the
/// local order. Mixed-type equations are rejected: their initial value
/// problem is ill-posed.
pub fn integrate_dde<F>(
    m: &FdeModel,
    history: F,
    t_end: f64,
    steps_per_period: usize,
) -> Result<Trajectory>
where
    F: Fn(f64) -> DVector<Complex64> + 'static,
{
    if m.kind == Kind::Mfde {
        return Err(Error::Domain(
            "time integration of mixed functional differential equations is ill-posed".into(),
        ));
    }
    let step = m.period / steps_per_period as f64;
    let n_steps = (t_end / step).ceil() as usize;
    let atoms = m.atoms();
    let dim = m.dim;
    let r_minus = m.r_minus();

    let mut xs: Vec<DVector<Complex64>> = Vec::with_capacity(n_steps + 1);
    let mut fs: Vec<DVector<Complex64>> = Vec::with_capacity(n_steps + 1);

    // Value of the (partially computed) solution at time u.
    let value_at = |xs: &Vec<DVector<Complex64>>,
                    fs: &Vec<DVector<Complex64>>,
                    u: f64|
     -> DVector<Complex64> {
        if u <= 0.0 {
            return history(u.max(r_minus));
        }
        let completed = xs.len() - 1;
        if completed == 0 {
            // First step still in progress (lag below the step size):
            // forward-Euler extrapolation from the initial point.
            return &xs[0] + &fs[0] * Complex64::from(u);
        }
        // Overlap with the step in progress extrapolates the last piece.
        let pos = u / step;
        let k = (pos.floor() as usize).min(completed - 1);
        let s = pos - k as f64;
        hermite(&xs[k], &fs[k], &xs[k + 1], &fs[k + 1], step, s)
    };

    let rhs = |xs: &Vec<DVector<Complex64>>,
               fs: &Vec<DVector<Complex64>>,
               t: f64,
               x_now: &DVector<Complex64>|
     -> DVector<Complex64> {
        let mut out = DVector::zeros(dim);
        for atom in &atoms {
            let arg = t + atom.theta;
            let x = if (arg - t).abs() < 1e-14 {
                x_now.clone()
            } else {
                value_at(xs, fs, arg)
            };
            out += atom.coeff(t, m.period) * x * Complex64::from(atom.weight);
        }
        out
    };

    let x0 = history(0.0);
    let f0 = rhs(&xs, &fs, 0.0, &x0);
    xs.push(x0);
    fs.push(f0);

    for k in 0..n_steps {
        let t = k as f64 * step;
        let xk = xs[k].clone();
        let k1 = fs[k].clone();
        let x2 = &xk + &k1 * Complex64::from(0.5 * step);
        let k2 = rhs(&xs, &fs, t + 0.5 * step, &x2);
        let x3 = &xk + &k2 * Complex64::from(0.5 * step);
        let k3 = rhs(&xs, &fs, t + 0.5 * step, &x3);
        let x4 = &xk + &k3 * Complex64::from(step);
        let k4 = rhs(&xs, &fs, t + step, &x4);
        let xn = &xk
            + (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4)
                * Complex64::from(step / 6.0);
        let fn_ = rhs(&xs, &fs, t + step, &xn);
        xs.push(xn);
        fs.push(fn_);
    }

    Ok(Trajectory { step, xs, fs, history: Box::new(history), r_minus })
}

/// Collocated monodromy operator `U(T, 0)` on a Chebyshev–Lobatto history
/// grid: column `j` is the period map applied to the `j`-th Lagrange basis
/// function.
pub struct MonodromyMatrix {
    pub matrix: DMatrix<Complex64>,
    pub theta_nodes: Vec<f64>,
    pub period: f64,
    pub steps_per_period: usize,
    /// Order of the time-integration scheme behind the columns.
    pub scheme_order: usize,
}

/// Default integration resolution: fine enough that defective multiplier
/// pairs split by less than the documented 1e-4 clustering radius.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 256;

pub fn monodromy_matrix(m: &FdeModel, m_h: usize, steps_per_period: usize) -> Result<MonodromyMatrix> {
    if m.kind == Kind::Mfde {
        return Err(Error::Domain(
            "no monodromy operator: mixed-type initial value problems are ill-posed".into(),
        ));
    }
    let grid = ThetaGrid::for_interval(m.r_minus(), 0.0, m_h);
    let nodes: Vec<f64> = grid.nodes().to_vec();
    let dim = m.dim;
    let size = m_h * dim;
    // Column integrations are independent; run them concurrently and write
    // them back in index order (deterministic assembly).
    let columns: Result<Vec<Vec<Complex64>>> = (0..size)
        .into_par_iter()
        .map(|col| {
            let (j, c) = (col / dim, col % dim);
            let grid_cl = grid.clone();
            let basis = move |theta: f64| -> DVector<Complex64> {
                let mut v = DVector::zeros(dim);
                for (idx, wi) in grid_cl.interp_weights(theta) {
                    if idx == j {
                        v[c] = Complex64::from(wi);
                    }
                }
                v
            };
            let traj = integrate_dde(m, basis, m.period, steps_per_period)?;
            let mut out = vec![Complex64::default(); size];
            for (i, &theta) in nodes.iter().enumerate() {
                let x = traj.eval(m.period + theta);
                for cc in 0..dim {
                    out[i * dim + cc] = x[cc];
                }
            }
            Ok(out)
        })
        .collect();
    let columns = columns?;
    let mut matrix = DMatrix::zeros(size, size);
    for (col, values) in columns.iter().enumerate() {
        for (row, &v) in values.iter().enumerate() {
            matrix[(row, col)] = v;
        }
    }
    Ok(MonodromyMatrix {
        matrix,
        theta_nodes: nodes,
        period: m.period,
        steps_per_period,
        scheme_order: 4,
    })
}

impl MonodromyMatrix {
    /// Floquet multipliers (eigenvalues of the collocated period map).
    pub fn multipliers(&self) -> Result<Vec<Complex64>> {
        let schur = self.matrix.clone().schur();
        let eigs = schur
            .eigenvalues()
            .ok_or_else(|| Error::Numerics("Schur iteration failed on monodromy matrix".into()))?;
        let mut v: Vec<Complex64> = eigs.iter().copied().collect();
        v.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
        Ok(v)
    }
}

/// A monodromy-derived exponent with its clustered multiplicity.
#[derive(Debug, Clone)]
pub struct OracleExponent {
    pub sigma: Complex64,
    pub multiplicity: usize,
}

/// Exponents `σ = log(μ)/T` (principal branch, strip-reduced) of all
/// multipliers with `|μ| > cutoff`; eigenvalues are clustered with radius
/// 1e-4 to infer multiplicities (defective pairs split numerically).
pub fn exponents_from_monodromy(
    mono: &MonodromyMatrix,
    cutoff: f64,
) -> Result<Vec<OracleExponent>> {
    let mus = mono.multipliers()?;
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for mu in mus.into_iter().filter(|mu| mu.norm() > cutoff) {
        match clusters.iter_mut().find(|(c, _)| (*c - mu).norm() < 1e-4) {
            Some((c, count)) => {
                // Running mean keeps the cluster centroid stable.
                *c = (*c * Complex64::from(*count as f64) + mu)
                    / Complex64::from((*count + 1) as f64);
                *count += 1;
            }
            None => clusters.push((mu, 1)),
        }
    }
    let mut out: Vec<OracleExponent> = clusters
        .into_iter()
        .map(|(mu, multiplicity)| {
            let sigma = strip_reduce(mu.ln() / Complex64::from(mono.period), mono.period);
            OracleExponent { sigma, multiplicity }
        })
        .collect();
    out.sort_by(|a, b| {
        crate::spectrum::sort_key(a.sigma)
            .partial_cmp(&crate::spectrum::sort_key(b.sigma))
            .unwrap()
    });
    Ok(out)
}

/// Constant-coefficient characteristic matrix
/// `D(λ) = λI − Σ_j A_j e^{λθ_j} − Σ kernels`, along with its first two
/// `λ`-derivatives.
fn autonomous_char(m: &FdeModel, lambda: Complex64) -> (DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = m.dim;
    let mut d0 = DMatrix::zeros(n, n);
    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        d0[(i, i)] = lambda;
        d1[(i, i)] = Complex64::from(1.0);
    }
    for atom in m.atoms() {
        let a = atom.coeff(0.0, m.period);
        let e = (lambda * atom.theta).exp() * Complex64::from(atom.weight);
        d0 -= &a * e;
        d1 -= &a * (e * Complex64::from(atom.theta));
        d2 -= &a * (e * Complex64::from(atom.theta * atom.theta));
    }
    (d0, d1, d2)
}

/// Roots of the autonomous characteristic equation inside
/// `[re_min, re_max] × [−im_max, im_max]`, by Newton iteration on
/// `det D/(det D)'` from a seed lattice. Only valid for models whose
/// coefficients are constant in time.
pub fn closed_form_roots(
    m: &FdeModel,
    re_min: f64,
    re_max: f64,
    im_max: f64,
) -> Result<Vec<Complex64>> {
    if m.atoms().iter().any(|a| !a.constant_in_time()) {
        return Err(Error::Domain(
            "closed-form characteristic roots need constant-in-time coefficients".into(),
        ));
    }
    let mut roots: Vec<Complex64> = Vec::new();
    let spacing = 0.4;
    let nx = (((re_max - re_min) / spacing).ceil() as usize + 2).min(64);
    let ny = ((2.0 * im_max / spacing).ceil() as usize + 2).min(256);
    for ix in 0..=nx {
        for iy in 0..=ny {
            let seed = Complex64::new(
                re_min + (re_max - re_min) * ix as f64 / nx as f64,
                -im_max + 2.0 * im_max * iy as f64 / ny as f64,
            );
            if let Some(root) = newton_char_root(m, seed) {
                let inside = root.re >= re_min - 1e-9
                    && root.re <= re_max + 1e-9
                    && root.im.abs() <= im_max + 1e-9;
                let admissible =
                    inside && (m.kind != Kind::Idde || root.re > -m.rho.unwrap());
                if admissible
                    && !roots.iter().any(|r| (r - root).norm() < 1e-7 * (1.0 + root.norm()))
                {
                    roots.push(root);
                }
            }
        }
    }
    roots.sort_by(|a, b| {
        crate::spectrum::sort_key(*a).partial_cmp(&crate::spectrum::sort_key(*b)).unwrap()
    });
    Ok(roots)
}

/// Im-window that certainly contains every characteristic root with real
/// part in `[re_min, re_max]`: from `λ = Σ A e^{λθ}`-type bounds,
/// `|λ| ≤ ‖L‖ max(e^{−re_min·h}, e^{re_max·r₊})`, padded and capped.
pub fn im_search_bound(m: &FdeModel, re_min: f64, re_max: f64) -> f64 {
    let h = -m.r_minus();
    let growth = (-re_min * h).exp().max((re_max * m.r_plus()).exp());
    (m.norm_l() * growth + 1.0).min(60.0 / m.period)
}

/// Roots of the autonomous characteristic equation whose strip reduction
/// lands in `[re_min, re_max] × (−π/T, π/T]`, deduplicated.
pub fn closed_form_strip_roots(m: &FdeModel, re_min: f64, re_max: f64) -> Result<Vec<Complex64>> {
    let im_max = im_search_bound(m, re_min, re_max);
    let raw = closed_form_roots(m, re_min, re_max, im_max)?;
    let mut out: Vec<Complex64> = Vec::new();
    for r in raw {
        let s = strip_reduce(r, m.period);
        if !out.iter().any(|o| (o - s).norm() < 1e-7 * (1.0 + s.norm())) {
            out.push(s);
        }
    }
    out.sort_by(|a, b| {
        crate::spectrum::sort_key(*a).partial_cmp(&crate::spectrum::sort_key(*b)).unwrap()
    });
    Ok(out)
}

fn newton_char_root(m: &FdeModel, seed: Complex64) -> Option<Complex64> {
    let mut z = seed;
    let mut best: Option<(Complex64, f64)> = None;
    for _ in 0..40 {
        let (d0, d1, d2) = autonomous_char(m, z);
        let lu = d0.clone().lu();
        let Some(x) = lu.solve(&d1) else { return Some(z) };
        let Some(y) = lu.solve(&d2) else { return Some(z) };
        let g = x.diagonal().sum();
        if !g.is_finite() || g.norm() > 1e15 {
            return Some(z);
        }
        let tr_x2: Complex64 = {
            let mut acc = Complex64::default();
            for i in 0..x.nrows() {
                for jj in 0..x.ncols() {
                    acc += x[(i, jj)] * x[(jj, i)];
                }
            }
            acc
        };
        let u = Complex64::from(1.0) / g;
        let up = Complex64::from(1.0) - (y.diagonal().sum() + g * g - tr_x2) / (g * g);
        if best.as_ref().map_or(true, |(_, bu)| u.norm() < *bu) {
            best = Some((z, u.norm()));
        }
        let step = u / up;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() < 1e-13 * (1.0 + z.norm()) {
            return verify_char_root(m, z);
        }
    }
    match best {
        Some((z, ub)) if ub < 1e-8 => verify_char_root(m, z),
        _ => None,
    }
}

fn verify_char_root(m: &FdeModel, z: Complex64) -> Option<Complex64> {
    let (d0, _, _) = autonomous_char(m, z);
    let svd = nalgebra::linalg::SVD::new(d0, false, false);
    let smin = svd.singular_values.min();
    let smax = svd.singular_values.max().max(1e-300);
    if smin / smax < 1e-9 {
        Some(z)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coefficient, DelayTerm, Density, DistributedKernel};

    const PI: f64 = std::f64::consts::PI;

    fn scalar_dde(a: &str, tau: f64, period: f64) -> FdeModel {
        FdeModel::new(
            Kind::Dde,
            period,
            1,
            vec![DelayTerm { shift: tau, coeff: Coefficient::scalar(a).unwrap() }],
            vec![],
            None,
            None,
        )
        .unwrap()
    }

    fn one() -> DVector<Complex64> {
        DVector::from_element(1, Complex64::new(1.0, 0.0))
    }

    #[test]
    fn free_motion_is_constant() {
        let m = FdeModel::new(Kind::Dde, 1.0, 1, vec![], vec![], None, Some(1.0)).unwrap();
        let traj = integrate_dde(&m, |_| one() * Complex64::new(2.5, -1.0), 3.0, 64).unwrap();
        let x = traj.eval(2.7);
        assert!((x[0] - Complex64::new(2.5, -1.0)).norm() < 1e-13);
    }

    #[test]
    fn method_of_steps_closed_form() {
        // ẋ = -x(t-1), φ ≡ 1: x(t) = 1 - t on [0, 1], so x(1) = 0.
        let m = scalar_dde("-1", 1.0, 1.0);
        let traj = integrate_dde(&m, |_| one(), 1.0, 128).unwrap();
        assert!(traj.eval(1.0)[0].norm() < 1e-12);
        assert!((traj.eval(0.5)[0] - Complex64::from(0.5)).norm() < 1e-12);
    }

    #[test]
    fn floquet_eigensolution_reproduced() {
        // a = -pi/2: x(t) = e^{i pi t/2} solves the equation; check at t = 2.
        let m = scalar_dde("-pi/2", 1.0, 1.0);
        let traj = integrate_dde(
            &m,
            |theta| DVector::from_element(1, Complex64::from_polar(1.0, PI * theta / 2.0)),
            2.0,
            256,
        )
        .unwrap();
        let got = traj.eval(2.0)[0];
        assert!((got - Complex64::new(-1.0, 0.0)).norm() < 1e-8, "x(2) = {got}");
    }

    #[test]
    fn integration_error_drops_fourth_order() {
        let m = scalar_dde("-pi/2", 1.0, 1.0);
        let exact = |t: f64| Complex64::from_polar(1.0, PI * t / 2.0);
        let err_at = |steps: usize| -> f64 {
            let traj = integrate_dde(
                &m,
                |theta| DVector::from_element(1, Complex64::from_polar(1.0, PI * theta / 2.0)),
                1.0,
                steps,
            )
            .unwrap();
            (traj.eval(1.0)[0] - exact(1.0)).norm()
        };
        let e32 = err_at(32);
        let e64 = err_at(64);
        let ratio = e32 / e64;
        assert!(ratio > 10.0 && ratio < 30.0, "e32={e32:e} e64={e64:e} ratio={ratio}");
    }

    #[test]
    fn monodromy_of_free_model() {
        // ẋ = 0 freezes at φ(0): U has eigenvalue 1, all others ~0.
        let m = FdeModel::new(Kind::Dde, 1.0, 1, vec![], vec![], None, Some(1.0)).unwrap();
        let mono = monodromy_matrix(&m, 24, 64).unwrap();
        let mus = mono.multipliers().unwrap();
        assert!((mus[0] - Complex64::from(1.0)).norm() < 1e-10);
        for mu in &mus[1..] {
            assert!(mu.norm() < 1e-10, "spurious multiplier {mu}");
        }
        // mu = 1 maps to the exponent sigma = 0.
        let exps = exponents_from_monodromy(&mono, 1e-6).unwrap();
        assert_eq!(exps.len(), 1);
        assert!(exps[0].sigma.norm() < 1e-10);
    }

    #[test]
    fn monodromy_pi_half_multipliers() {
        let m = scalar_dde("-pi/2", 1.0, 1.0);
        let mono = monodromy_matrix(&m, 64, DEFAULT_STEPS_PER_PERIOD).unwrap();
        let mus = mono.multipliers().unwrap();
        // Leading pair is ±i = e^{±iπ/2}.
        let top: Vec<Complex64> = mus.iter().take(2).copied().collect();
        for expected in [Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)] {
            assert!(
                top.iter().any(|mu| (mu - expected).norm() < 1e-6),
                "missing {expected} in {top:?}"
            );
        }
    }

    #[test]
    fn monodromy_defective_pair_at_double_root() {
        let m = scalar_dde("-1/exp(1)", 1.0, 1.0);
        let mono = monodromy_matrix(&m, 64, DEFAULT_STEPS_PER_PERIOD).unwrap();
        let mus = mono.multipliers().unwrap();
        let target = Complex64::from((-1.0f64).exp());
        let close: Vec<&Complex64> = mus.iter().filter(|mu| (*mu - target).norm() < 1e-4).collect();
        assert_eq!(close.len(), 2, "expected a defective pair near e^-1, got {close:?}");
    }

    #[test]
    fn exponents_from_known_multipliers() {
        let m = scalar_dde("-pi/2", 1.0, 1.0);
        let mono = monodromy_matrix(&m, 48, DEFAULT_STEPS_PER_PERIOD).unwrap();
        let exps = exponents_from_monodromy(&mono, 1e-6).unwrap();
        for expected in [Complex64::new(0.0, PI / 2.0), Complex64::new(0.0, -PI / 2.0)] {
            assert!(
                exps.iter().any(|e| (e.sigma - expected).norm() < 1e-6),
                "missing {expected}"
            );
        }
    }

    #[test]
    fn closed_form_roots_pi_half() {
        let m = scalar_dde("-pi/2", 1.0, 1.0);
        let roots = closed_form_strip_roots(&m, -1.0, 1.0).unwrap();
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0] - Complex64::new(0.0, -PI / 2.0)).norm() < 1e-10);
        assert!((roots[1] - Complex64::new(0.0, PI / 2.0)).norm() < 1e-10);
    }

    #[test]
    fn closed_form_roots_idde_quadratic() {
        // Kernel 2e^{-s}: z(z+1) = 2, roots 1 and -2; only z = 1 lies in the
        // admissible half-plane Re z > -1/2.
        let m = FdeModel::new(
            Kind::Idde,
            1.0,
            1,
            vec![],
            vec![DistributedKernel {
                density: Density::scalar("2*exp(-s)").unwrap(),
                lo: 0.0,
                hi: None,
                order: 16,
            }],
            Some(0.5),
            None,
        )
        .unwrap();
        let roots = closed_form_roots(&m, -3.0, 3.0, 3.0).unwrap();
        assert_eq!(roots.len(), 1, "{roots:?}");
        assert!((roots[0] - Complex64::from(1.0)).norm() < 1e-7, "{}", roots[0]);
    }

    #[test]
    fn closed_form_roots_mfde_gap() {
        // z + 0.2 sinh z = 0: only z = 0 in [-2, 2] x (-pi, pi].
        let m = FdeModel::new(
            Kind::Mfde,
            1.0,
            1,
            vec![
                DelayTerm { shift: -1.0, coeff: Coefficient::scalar("0.1").unwrap() },
                DelayTerm { shift: 1.0, coeff: Coefficient::scalar("-0.1").unwrap() },
            ],
            vec![],
            None,
            None,
        )
        .unwrap();
        let roots = closed_form_roots(&m, -2.0, 2.0, PI).unwrap();
        assert_eq!(roots.len(), 1, "{roots:?}");
        assert!(roots[0].norm() < 1e-10);
        // Simple root: derivative 1 + 0.2 cosh(0) = 1.2 != 0.
        let (_, d1, _) = autonomous_char(&m, Complex64::default());
        assert!((d1[(0, 0)] - Complex64::from(1.2)).norm() < 1e-12);
    }

    #[test]
    fn oracle_self_consistency_constant_dde() {
        // Constant-coefficient model: monodromy exponents and closed-form
        // roots agree in the strip.
        let m = scalar_dde("-0.8", 1.0, 1.0);
        let mono = monodromy_matrix(&m, 48, DEFAULT_STEPS_PER_PERIOD).unwrap();
        let exps = exponents_from_monodromy(&mono, 1e-2).unwrap();
        let roots = closed_form_strip_roots(&m, -4.0, 2.0).unwrap();
        assert!(!exps.is_empty());
        for e in exps.into_iter().filter(|e| e.sigma.re > -3.0) {
            let nearest = roots
                .iter()
                .map(|r| (r - e.sigma).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 1e-5, "monodromy exponent {} vs roots {roots:?}", e.sigma);
        }
    }

    #[test]
    fn mfde_integration_rejected() {
        let m = FdeModel::new(
            Kind::Mfde,
            1.0,
            1,
            vec![DelayTerm { shift: 1.0, coeff: Coefficient::scalar("0.1").unwrap() }],
            vec![],
            None,
            None,
        )
        .unwrap();
        assert!(matches!(integrate_dde(&m, |_| one(), 1.0, 32), Err(Error::Domain(_))));
        assert!(matches!(monodromy_matrix(&m, 16, 32), Err(Error::Domain(_))));
    }
}
