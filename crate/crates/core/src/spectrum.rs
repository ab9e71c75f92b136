//! Characteristic values of `Δ` in a region: location, refinement, strip
//! reduction, and Jordan-chain structure.
//!
//! Location uses a moment-based contour-integral method on the collocation
//! matrix `Δ_N(z)`: quadrature of `z^p Δ_N(z)^{-1}V` against random probing
//! columns, block-Hankel rank reduction, then a small dense eigenproblem.
//! Since `Δ` is holomorphic with isolated characteristic values of finite
//! type in the admissible region, every value inside the contour is captured
//! (defective ones through the higher moments). Candidates are polished by
//! Newton iteration and re-verified on a doubled grid; collocation artifacts
//! fail one of the two checks and are discarded.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::charop::{assemble_delta, assemble_delta_derivative};
use crate::model::{FdeModel, Kind};
use crate::periodic::PeriodicFunction;
use crate::quad::gauss_legendre_on;
use crate::{Error, Result};

/// Map an exponent into the fundamental strip `Im(z) ∈ (−π/T, π/T]`
/// (half-open; the lower boundary maps to `+π/T`).
pub fn strip_reduce(sigma: Complex64, period: f64) -> Complex64 {
    let x = sigma.im * period / (2.0 * std::f64::consts::PI);
    let k = (x - 0.5).ceil();
    sigma - Complex64::new(0.0, 2.0 * std::f64::consts::PI * k / period)
}

/// Search region in the complex plane.
#[derive(Debug, Clone)]
pub enum RegionKind {
    Rect { re_min: f64, re_max: f64, im_min: f64, im_max: f64 },
    Disk { center: Complex64, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Region {
    pub kind: RegionKind,
    /// Total number of contour quadrature nodes.
    pub contour_order: usize,
    /// Relative rank tolerance of the moment method.
    pub rank_tol: f64,
}

impl Region {
    pub fn rect(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Region {
            kind: RegionKind::Rect { re_min, re_max, im_min, im_max },
            contour_order: 64,
            rank_tol: 1e-8,
        }
    }

    pub fn disk(center: Complex64, radius: f64) -> Self {
        Region { kind: RegionKind::Disk { center, radius }, contour_order: 64, rank_tol: 1e-8 }
    }

    /// Default search window: `[−5/T, 5/T] × (−π/T, π/T]`.
    pub fn default_for(period: f64) -> Self {
        Region::rect(
            -5.0 / period,
            5.0 / period,
            -std::f64::consts::PI / period,
            std::f64::consts::PI / period,
        )
    }

    pub fn contains(&self, z: Complex64, margin: f64) -> bool {
        match self.kind {
            RegionKind::Rect { re_min, re_max, im_min, im_max } => {
                z.re >= re_min - margin
                    && z.re <= re_max + margin
                    && z.im >= im_min - margin
                    && z.im <= im_max + margin
            }
            RegionKind::Disk { center, radius } => (z - center).norm() <= radius + margin,
        }
    }

    /// Check admissibility for the model (infinite-delay models must stay in
    /// the right half-plane `Re z > −ρ`).
    pub fn validate_for(&self, m: &FdeModel) -> Result<()> {
        if m.kind == Kind::Idde {
            let rho = m.rho.expect("validated idde");
            let re_min = match self.kind {
                RegionKind::Rect { re_min, .. } => re_min,
                RegionKind::Disk { center, radius } => center.re - radius,
            };
            if re_min < -rho - 1e-12 {
                return Err(Error::Domain(format!(
                    "region reaches Re z = {re_min} <= -rho = {}; spectra of infinite-delay \
                     models are only characterized for Re z > -rho",
                    -rho
                )));
            }
        }
        Ok(())
    }

    /// Contour nodes `(z_j, w_j)` such that `(1/2πi)∮ f dz ≈ Σ w_j f(z_j)`.
    /// Rectangles use Gauss–Legendre per edge; disks use the trapezoid rule.
    /// `left_clip` raises the left edge (used to inset iDDE contours into the
    /// admissible half-plane).
    fn contour(&self, left_clip: Option<f64>, grow: f64) -> Vec<(Complex64, Complex64)> {
        let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        match self.kind {
            RegionKind::Rect { re_min, re_max, im_min, im_max } => {
                let (cx, cy) = (0.5 * (re_min + re_max), 0.5 * (im_min + im_max));
                let (hx, hy) = (0.5 * (re_max - re_min) * grow, 0.5 * (im_max - im_min) * grow);
                let mut re_lo = cx - hx;
                let re_hi = cx + hx;
                let im_lo = cy - hy;
                let im_hi = cy + hy;
                if let Some(clip) = left_clip {
                    re_lo = re_lo.max(clip);
                }
                let corners = [
                    Complex64::new(re_lo, im_lo),
                    Complex64::new(re_hi, im_lo),
                    Complex64::new(re_hi, im_hi),
                    Complex64::new(re_lo, im_hi),
                ];
                let per_edge = (self.contour_order / 4).max(4);
                let (xs, ws) = gauss_legendre_on(per_edge, 0.0, 1.0);
                let mut out = Vec::with_capacity(4 * per_edge);
                for e in 0..4 {
                    let a = corners[e];
                    let b = corners[(e + 1) % 4];
                    let dz = b - a;
                    for (&x, &w) in xs.iter().zip(&ws) {
                        out.push((a + dz * Complex64::from(x), dz * Complex64::from(w) / two_pi_i));
                    }
                }
                out
            }
            RegionKind::Disk { center, radius } => {
                let q = self.contour_order.max(8);
                let r = radius * grow;
                (0..q)
                    .map(|j| {
                        let phi = 2.0 * std::f64::consts::PI * j as f64 / q as f64;
                        let e = Complex64::from_polar(1.0, phi);
                        (center + e * Complex64::from(r), e * Complex64::from(r / q as f64))
                    })
                    .collect()
            }
        }
    }
}

/// One located characteristic value with its multiplicity data. Produced
/// with `σ` and `m_g` by [`find_exponents`]; [`jordan_chains`] fills the
/// partial multiplicities and canonical chains.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    pub sigma: Complex64,
    /// Geometric multiplicity (kernel dimension of `Δ_N(σ)`).
    pub m_g: usize,
    /// Partial multiplicities `k_1 ≤ … ≤ k_p` (empty until chains are built).
    pub partials: Vec<usize>,
    /// Algebraic multiplicity `Σ k_j` (0 until chains are built).
    pub m_a: usize,
    /// Canonical Jordan chains, one per partial multiplicity.
    pub chains: Vec<Vec<PeriodicFunction>>,
    /// Per-chain defect norms.
    pub chain_defects: Vec<f64>,
    /// `‖Δ_N(σ)q‖/‖q‖` at the reporting grid.
    pub residual: f64,
    /// `|σ_N − σ_{2N}|` from the doubled-grid re-verification.
    pub refine_delta: Option<f64>,
    /// A kernel vector of `Δ_N(σ)`.
    pub eigvec: Option<PeriodicFunction>,
}

/// Options for [`find_exponents`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Number of random probing columns.
    pub probes: usize,
    /// Half the number of contour moments (`2·moments` moments are taken);
    /// values above 1 capture defective exponents.
    pub moments: usize,
    /// Acceptance threshold for `‖Δ_N(σ)q‖/‖q‖`.
    pub residual_tol: f64,
    /// Spurious-mode threshold for `|σ_N − σ_{2N}|`.
    pub persist_tol: f64,
    /// Map results into the fundamental strip and deduplicate.
    pub strip: bool,
    /// RNG seed for the probing matrix.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            probes: 16,
            moments: 2,
            residual_tol: 1e-8,
            persist_tol: 1e-6,
            strip: false,
            seed: 0,
        }
    }
}

pub struct SpectrumResult {
    pub points: Vec<SpectralPoint>,
    pub warnings: Vec<String>,
}

/// All characteristic values of `Δ` inside `region`, located on an `n_time`
/// collocation grid and re-verified at `2·n_time`.
pub fn find_exponents(
    m: &FdeModel,
    region: &Region,
    n_time: usize,
    opts: &SolveOptions,
) -> Result<SpectrumResult> {
    region.validate_for(m)?;
    let mut warnings = Vec::new();
    if m.kind == Kind::Mfde {
        if let Some(false) = m.mfde_gap_condition() {
            warnings.push(
                "mfde sufficient condition min{-r-, r+} < 1/(e‖L‖) fails; a nonempty resolvent \
                 set is not guaranteed and results are conditional"
                    .into(),
            );
        }
    }
    let left_clip = m.rho.map(|rho| -rho + 1e-6);

    let mut probes = opts.probes;
    let mut grow_attempt = 0usize;
    let candidates = loop {
        let contour = region.contour(left_clip, grow_factor(grow_attempt));
        match contour_candidates(m, &contour, n_time, probes, opts, region.rank_tol) {
            Ok(c) => break c,
            Err(ContourFailure::NearSingular(z)) => {
                grow_attempt += 1;
                if grow_attempt > 3 {
                    return Err(Error::Numerics(format!(
                        "contour passes within tolerance of an eigenvalue near z = {z} \
                         after 3 perturbation retries"
                    )));
                }
            }
            Err(ContourFailure::RankSaturated) => {
                let d = n_time * m.dim;
                if probes >= d.min(96) {
                    return Err(Error::Numerics(
                        "moment rank saturated the probing space; the region likely contains \
                         more characteristic values than the solver can resolve — shrink the \
                         region or raise the probe count"
                            .into(),
                    ));
                }
                probes = (probes * 2).min(d.min(96));
            }
            Err(ContourFailure::Fatal(e)) => return Err(e),
        }
    };

    // Newton-polish candidates at N, then cluster and filter.
    let mut polished: Vec<(Complex64, PeriodicFunction, f64)> = Vec::new();
    for z0 in candidates {
        let Ok(refined) = refine(m, z0, None, n_time) else { continue };
        if refined.residual > opts.residual_tol {
            continue;
        }
        let mut sigma = refined.sigma;
        if opts.strip {
            sigma = strip_reduce(sigma, m.period);
            if !region.contains(sigma, 1e-9) {
                // The strip image may leave a non-strip-aligned window.
                continue;
            }
        } else if !region.contains(sigma, 1e-7) {
            continue;
        }
        polished.push((sigma, refined.q, refined.residual));
    }
    // Deduplicate clusters (defective values produce several candidates).
    polished.sort_by(|a, b| sort_key(a.0).partial_cmp(&sort_key(b.0)).unwrap());
    let mut unique: Vec<(Complex64, PeriodicFunction, f64)> = Vec::new();
    for (sigma, q, res) in polished {
        match unique.iter_mut().find(|(s, _, _)| (*s - sigma).norm() < 1e-6) {
            Some(slot) => {
                if res < slot.2 {
                    *slot = (sigma, q, res);
                }
            }
            None => unique.push((sigma, q, res)),
        }
    }

    // Doubled-grid persistence check.
    let mut points = Vec::new();
    for (sigma, q, res) in unique {
        let q2 = q.resample(2 * n_time);
        let Ok(re2) = refine(m, sigma, Some(&q2), 2 * n_time) else {
            continue;
        };
        let delta = (sigma - re2.sigma).norm();
        if delta > opts.persist_tol {
            continue;
        }
        let dm = assemble_delta(m, sigma, n_time)?;
        let kernel = dm.kernel(region.rank_tol);
        let m_g = kernel.len().max(1);
        points.push(SpectralPoint {
            sigma,
            m_g,
            partials: Vec::new(),
            m_a: 0,
            chains: Vec::new(),
            chain_defects: Vec::new(),
            residual: res,
            refine_delta: Some(delta),
            eigvec: Some(q),
        });
    }
    points.sort_by(|a, b| sort_key(a.sigma).partial_cmp(&sort_key(b.sigma)).unwrap());
    Ok(SpectrumResult { points, warnings })
}

/// Deterministic ordering key: real part quantized at 1e-9 so that
/// round-off-level asymmetries do not scramble conjugate pairs.
pub(crate) fn sort_key(z: Complex64) -> (f64, f64) {
    ((z.re / 1e-9).round() * 1e-9, z.im)
}

fn grow_factor(attempt: usize) -> f64 {
    match attempt {
        0 => 1.0,
        1 => 1.03,
        2 => 0.985,
        _ => 1.06,
    }
}

enum ContourFailure {
    NearSingular(Complex64),
    RankSaturated,
    Fatal(Error),
}

/// Raw candidate eigenvalues from the block-Hankel moment method.
fn contour_candidates(
    m: &FdeModel,
    contour: &[(Complex64, Complex64)],
    n_time: usize,
    probes: usize,
    opts: &SolveOptions,
    rank_tol: f64,
) -> std::result::Result<Vec<Complex64>, ContourFailure> {
    let d = n_time * m.dim;
    let ell = probes.min(d);
    let p_moms = 2 * opts.moments;
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let v = DMatrix::from_fn(d, ell, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });

    // Node factorizations are independent; run them concurrently and reduce
    // in fixed node order so results stay bit-deterministic.
    let node_results: std::result::Result<Vec<DMatrix<Complex64>>, ContourFailure> = contour
        .par_iter()
        .map(|&(z, _)| {
            let dm = assemble_delta(m, z, n_time).map_err(ContourFailure::Fatal)?;
            let smin = dm.smallest_singular_value();
            if smin < 1e-6 * dm.opnorm_estimate() * 1e-3 {
                return Err(ContourFailure::NearSingular(z));
            }
            let lu = dm.matrix.clone().lu();
            lu.solve(&v).ok_or(ContourFailure::NearSingular(z))
        })
        .collect();
    let node_results = node_results?;

    let mut moments: Vec<DMatrix<Complex64>> = (0..p_moms).map(|_| DMatrix::zeros(d, ell)).collect();
    let mut solve_scale = 0.0f64;
    for (&(z, w), x) in contour.iter().zip(&node_results) {
        solve_scale = solve_scale.max(x.norm());
        let mut zp = Complex64::from(1.0);
        for p in 0..p_moms {
            moments[p] += x * (w * zp);
            zp *= z;
        }
    }

    // Block Hankel matrices H0 = [A_{i+j}], H1 = [A_{i+j+1}].
    let pm = opts.moments;
    let mut h0 = DMatrix::zeros(pm * d, pm * ell);
    let mut h1 = DMatrix::zeros(pm * d, pm * ell);
    for i in 0..pm {
        for j in 0..pm {
            h0.view_mut((i * d, j * ell), (d, ell)).copy_from(&moments[i + j]);
            h1.view_mut((i * d, j * ell), (d, ell)).copy_from(&moments[i + j + 1]);
        }
    }

    let svd = nalgebra::linalg::SVD::new(h0, true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.max();
    // An eigenvalue-free region leaves only quadrature noise in the moments;
    // measure emptiness against the size of the resolvent solves.
    if smax <= 1e-12 * solve_scale.max(1e-300) {
        return Ok(Vec::new());
    }
    let k = svd.singular_values.iter().filter(|&&s| s > rank_tol * smax).count();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k >= pm * ell {
        return Err(ContourFailure::RankSaturated);
    }

    let uk = u.columns(0, k);
    let vk = vt.rows(0, k).adjoint();
    let mut b = uk.adjoint() * h1 * vk;
    for j in 0..k {
        let s = svd.singular_values[j];
        for i in 0..k {
            b[(i, j)] /= Complex64::from(s);
        }
    }
    let schur = b.schur();
    let eigs = schur
        .eigenvalues()
        .ok_or_else(|| ContourFailure::Fatal(Error::Numerics("Schur iteration failed".into())))?;
    Ok(eigs.iter().copied().collect())
}

/// Result of Newton refinement.
#[derive(Debug, Clone)]
pub struct Refined {
    pub sigma: Complex64,
    pub q: PeriodicFunction,
    pub residual: f64,
    pub iterations: usize,
    /// True when the defective-root path (Newton on `det/det'` via the trace
    /// formula) was used.
    pub used_extended: bool,
}

/// Newton refinement of a characteristic-value candidate.
///
/// Primary path: Newton on the bordered system `[Δ_N(z)q; c*q − 1] = 0` with
/// the analytic `Δ'(z)q` in the Jacobian. When convergence degrades (multiple
/// root), switches to Newton on `det Δ/​(det Δ)'` computed through LU and the
/// trace identities, which restores quadratic convergence for any
/// multiplicity.
pub fn refine(
    m: &FdeModel,
    sigma0: Complex64,
    q0: Option<&PeriodicFunction>,
    n_time: usize,
) -> Result<Refined> {
    let d = n_time * m.dim;
    let mut sigma = sigma0;

    let mut q = match q0 {
        Some(q) => q.to_stacked(),
        None => {
            let dm = assemble_delta(m, sigma, n_time)?;
            smallest_right_singular_vector(&dm.matrix)
        }
    };
    normalize(&mut q);
    let c = q.clone();

    let mut prev_step: Option<f64> = None;
    let mut slow_count = 0usize;
    let used_extended = false;

    for it in 0..20 {
        let dm = assemble_delta(m, sigma, n_time)?;
        let dmp = assemble_delta_derivative(m, sigma, 1, n_time)?;
        let f1 = &dm.matrix * &q;
        let f2 = c.dotc(&q) - Complex64::from(1.0);
        let res_norm = f1.norm() / q.norm();

        if res_norm < 1e-12 && f2.norm() < 1e-10 {
            return finish(m, sigma, n_time, it, used_extended);
        }

        // Bordered Jacobian [[Δ, Δ'q], [c^H, 0]].
        let mut jac = DMatrix::zeros(d + 1, d + 1);
        jac.view_mut((0, 0), (d, d)).copy_from(&dm.matrix);
        let dpq = &dmp.matrix * &q;
        for i in 0..d {
            jac[(i, d)] = dpq[i];
            jac[(d, i)] = c[i].conj();
        }
        let mut rhs = DVector::zeros(d + 1);
        for i in 0..d {
            rhs[i] = -f1[i];
        }
        rhs[d] = -f2;
        let lu = jac.lu();
        let Some(delta) = lu.solve(&rhs) else {
            return extended_refine(m, sigma, n_time, it);
        };
        let dsigma = delta[d];
        for i in 0..d {
            q[i] += delta[i];
        }
        sigma += dsigma;

        if !sigma.re.is_finite() || !sigma.im.is_finite() {
            return Err(Error::Numerics("Newton refinement diverged to non-finite values".into()));
        }

        // Linear-rate stagnation signals a multiple root; switch paths.
        let step = dsigma.norm();
        if let Some(prev) = prev_step {
            if prev > 0.0 && step > 0.25 * prev && step > 1e-12 {
                slow_count += 1;
            } else {
                slow_count = 0;
            }
        }
        prev_step = Some(step);
        if slow_count >= 3 {
            return extended_refine(m, sigma, n_time, it);
        }
        if step < 1e-14 * (1.0 + sigma.norm()) {
            return finish(m, sigma, n_time, it, used_extended);
        }
    }
    // One more chance through the multiplicity-robust path before giving up.
    extended_refine(m, sigma0, n_time, 20)
        .map_err(|_| Error::Numerics("Newton refinement diverged after 20 iterations".into()))
}

/// Newton on `u(z) = det Δ(z)/(det Δ)'(z) = 1/tr(Δ^{-1}Δ')`, which has a
/// simple zero at a characteristic value of any multiplicity. The derivative
/// uses `u' = 1 − [tr(Δ^{-1}Δ'') + g² − tr((Δ^{-1}Δ')²)]/g²` with
/// `g = tr(Δ^{-1}Δ')`.
fn extended_refine(
    m: &FdeModel,
    sigma0: Complex64,
    n_time: usize,
    base_iterations: usize,
) -> Result<Refined> {
    let mut sigma = sigma0;
    // Track the best iterate by |u| ≈ |z − σ|/multiplicity: near a multiple
    // root the trace solves lose accuracy and the iteration dances on a
    // noise floor instead of contracting further.
    let mut best: Option<(Complex64, f64)> = None;
    let mut prev_step = f64::INFINITY;
    for it in 0..30 {
        let dm = assemble_delta(m, sigma, n_time)?;
        let d1 = assemble_delta_derivative(m, sigma, 1, n_time)?;
        let d2 = assemble_delta_derivative(m, sigma, 2, n_time)?;
        let lu = dm.matrix.clone().lu();
        let Some(x) = lu.solve(&d1.matrix) else {
            // Exactly singular: we are on the root.
            return finish(m, sigma, n_time, base_iterations + it, true);
        };
        let Some(y) = lu.solve(&d2.matrix) else {
            return finish(m, sigma, n_time, base_iterations + it, true);
        };
        let g = x.diagonal().sum();
        if !g.is_finite() || g.norm() > 1e14 {
            return finish(m, sigma, n_time, base_iterations + it, true);
        }
        let tr_x2: Complex64 = {
            let mut acc = Complex64::default();
            for i in 0..x.nrows() {
                for j in 0..x.ncols() {
                    acc += x[(i, j)] * x[(j, i)];
                }
            }
            acc
        };
        let tr_y = y.diagonal().sum();
        let u = Complex64::from(1.0) / g;
        let up = Complex64::from(1.0) - (tr_y + g * g - tr_x2) / (g * g);
        if best.as_ref().map_or(true, |(_, bu)| u.norm() < *bu) {
            best = Some((sigma, u.norm()));
        }
        let step = u / up;
        sigma -= step;
        if !sigma.re.is_finite() || !sigma.im.is_finite() {
            return Err(Error::Numerics("determinant Newton diverged".into()));
        }
        if step.norm() < 1e-14 * (1.0 + sigma.norm()) {
            return finish(m, sigma, n_time, base_iterations + it, true);
        }
        // Stagnation at small steps: accept the best iterate seen.
        if step.norm() < 1e-5 && prev_step < 1e-5 && step.norm() >= 0.5 * prev_step {
            let (s, _) = best.unwrap();
            return finish(m, s, n_time, base_iterations + it, true);
        }
        prev_step = step.norm();
    }
    match best {
        Some((s, ubest)) if ubest < 1e-5 => finish(m, s, n_time, base_iterations + 30, true),
        _ => Err(Error::Numerics("determinant Newton did not converge within 30 iterations".into())),
    }
}

fn finish(
    m: &FdeModel,
    sigma: Complex64,
    n_time: usize,
    iterations: usize,
    used_extended: bool,
) -> Result<Refined> {
    let dm = assemble_delta(m, sigma, n_time)?;
    let qv = smallest_right_singular_vector(&dm.matrix);
    let residual = (&dm.matrix * &qv).norm() / qv.norm();
    let scale = dm.opnorm_estimate();
    if residual > 1e-8 * (1.0 + scale) {
        return Err(Error::Numerics(format!(
            "refinement stalled: residual {residual:.3e} at sigma = {sigma}"
        )));
    }
    let q = PeriodicFunction::from_stacked(m.period, m.dim, &qv);
    Ok(Refined { sigma, q, residual, iterations, used_extended })
}

fn smallest_right_singular_vector(a: &DMatrix<Complex64>) -> DVector<Complex64> {
    let svd = nalgebra::linalg::SVD::new(a.clone(), false, true);
    let vt = svd.v_t.as_ref().unwrap();
    let mut idx = 0;
    let mut smin = f64::INFINITY;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < smin {
            smin = s;
            idx = i;
        }
    }
    vt.row(idx).adjoint()
}

fn normalize(v: &mut DVector<Complex64>) {
    let n = v.norm();
    if n > 0.0 {
        *v /= Complex64::from(n);
    }
}

/// Canonical Jordan-chain structure of `Δ` at `σ`.
///
/// Builds the block-Toeplitz systems with blocks `(1/l!)Δ^{(l)}_N(σ)`; the
/// null-space dimensions `ν_k = Σ_j min(k, k_j)` determine the partial
/// multiplicities, and a canonical system is extracted greedily from the
/// longest chains down (ranks maximized sequentially).
pub fn jordan_chains(m: &FdeModel, sigma: Complex64, n_time: usize, rank_tol: f64) -> Result<SpectralPoint> {
    let d = n_time * m.dim;
    let delta0 = assemble_delta(m, sigma, n_time)?;
    let scale = delta0.opnorm_estimate();
    let smin = delta0.smallest_singular_value();
    let residual = smin / scale;
    if residual > 1e-6 {
        return Err(Error::Numerics(format!(
            "sigma = {sigma} is not a characteristic value (residual = {residual:.3e})"
        )));
    }

    // Blocks (1/l!) Δ^{(l)}(σ).
    let max_k = 8usize;
    let mut blocks: Vec<DMatrix<Complex64>> = vec![delta0.matrix.clone()];
    let mut factorial = 1.0;
    for l in 1..max_k {
        factorial *= l as f64;
        let dl = assemble_delta_derivative(m, sigma, l, n_time)?;
        blocks.push(dl.matrix * Complex64::from(1.0 / factorial));
    }

    // Null-space dimensions of the nested Toeplitz systems at two tolerance
    // extremes; a mismatch means the rank decision is numerically ambiguous.
    let mut nus: Vec<usize> = Vec::new();
    let mut nus_lo: Vec<usize> = Vec::new();
    let mut nus_hi: Vec<usize> = Vec::new();
    let mut null_bases: Vec<Vec<DVector<Complex64>>> = Vec::new();
    let mut k = 1usize;
    loop {
        let tk = toeplitz(&blocks, k, d);
        let svd = nalgebra::linalg::SVD::new(tk, false, true);
        let smax = svd.singular_values.max();
        let count = |tol: f64| svd.singular_values.iter().filter(|&&s| s < tol * smax).count();
        let nu = count(rank_tol);
        nus_lo.push(count(rank_tol / 10.0));
        nus_hi.push(count(rank_tol * 10.0));
        let vt = svd.v_t.as_ref().unwrap();
        let mut basis = Vec::new();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap()
        });
        for &i in order.iter().take(nu) {
            basis.push(vt.row(i).adjoint());
        }
        null_bases.push(basis);
        nus.push(nu);
        if k >= 2 && nus[k - 1] == nus[k - 2] {
            break;
        }
        if k == max_k - 1 {
            return Err(Error::Numerics(format!(
                "Jordan structure at sigma = {sigma} did not stabilize up to chain length {max_k}"
            )));
        }
        k += 1;
    }

    if nus_lo != nus || nus_hi != nus {
        let gap_ratio = 10.0;
        return Err(Error::AmbiguousRank {
            tol: rank_tol,
            gap_ratio,
            lower: partials_from_nus(&nus_lo),
            upper: partials_from_nus(&nus_hi),
        });
    }

    let partials = partials_from_nus(&nus);
    let m_g = partials.len();
    let m_a: usize = partials.iter().sum();
    let k_max = *partials.iter().max().unwrap_or(&0);

    // Counts per length: delta_k = #{j : k_j >= k}.
    let mut delta = vec![0usize; k_max + 2];
    for kk in 1..=k_max {
        delta[kk] = partials.iter().filter(|&&p| p >= kk).count();
    }

    // Greedy canonical extraction, longest chains first. The q0-components of
    // chains of length > L span exactly the part of the null space of T_L
    // that must be projected away when selecting length-L chains.
    let mut chosen_q0: Vec<DVector<Complex64>> = Vec::new();
    let mut chains_desc: Vec<Vec<PeriodicFunction>> = Vec::new();
    for length in (1..=k_max).rev() {
        let need = delta[length] - delta.get(length + 1).copied().unwrap_or(0);
        if need == 0 {
            continue;
        }
        let basis = &null_bases[length - 1];
        let mut candidates: Vec<DVector<Complex64>> = basis.clone();
        for _ in 0..need {
            // Pick the candidate whose q0 has the largest component outside
            // the span of already-chosen q0 directions.
            let mut best: Option<(usize, f64, DVector<Complex64>)> = None;
            for (i, cand) in candidates.iter().enumerate() {
                let mut q0 = cand.rows(0, d).into_owned();
                for c in &chosen_q0 {
                    let proj = c.dotc(&q0);
                    q0 -= c * proj;
                }
                let norm = q0.norm();
                if best.as_ref().map_or(true, |(_, n, _)| norm > *n) {
                    best = Some((i, norm, q0));
                }
            }
            let Some((idx, norm, q0_perp)) = best else { break };
            if norm < 1e-10 {
                break;
            }
            let raw = candidates.remove(idx);
            // Normalize the chain so the projected leading vector has unit
            // norm (keeps q0 directions well-conditioned across chains).
            let chain_vec = raw * Complex64::from(1.0 / norm);
            let mut chain = Vec::with_capacity(length);
            for part in 0..length {
                let seg = chain_vec.rows(part * d, d).into_owned();
                chain.push(PeriodicFunction::from_stacked(m.period, m.dim, &seg));
            }
            chosen_q0.push(q0_perp * Complex64::from(1.0 / norm));
            chains_desc.push(chain);
        }
    }

    // Report partials ascending with chains in matching order.
    chains_desc.reverse();
    let chain_defects: Vec<f64> = chains_desc
        .iter()
        .map(|chain| chain_defect(&blocks, chain, d))
        .collect();

    Ok(SpectralPoint {
        sigma,
        m_g,
        partials,
        m_a,
        chains: chains_desc,
        chain_defects,
        residual,
        refine_delta: None,
        eigvec: None,
    })
}

/// `max_i ‖Σ_{l≤i} (1/l!) Δ^{(l)}(σ) q_{i−l}‖ / ‖q_0‖` for one chain.
fn chain_defect(blocks: &[DMatrix<Complex64>], chain: &[PeriodicFunction], d: usize) -> f64 {
    let stacked: Vec<DVector<Complex64>> = chain.iter().map(|q| q.to_stacked()).collect();
    let q0_norm = stacked[0].norm().max(1e-300);
    let mut worst = 0.0f64;
    for i in 0..chain.len() {
        let mut acc = DVector::zeros(d);
        for l in 0..=i {
            acc += &blocks[l] * &stacked[i - l];
        }
        worst = worst.max(acc.norm() / q0_norm);
    }
    worst
}

fn toeplitz(blocks: &[DMatrix<Complex64>], k: usize, d: usize) -> DMatrix<Complex64> {
    let mut t = DMatrix::zeros(k * d, k * d);
    for row in 0..k {
        for col in 0..=row {
            t.view_mut((row * d, col * d), (d, d)).copy_from(&blocks[row - col]);
        }
    }
    t
}

/// Partial multiplicities (ascending) from the null dimensions
/// `ν_k = Σ_j min(k, k_j)`.
fn partials_from_nus(nus: &[usize]) -> Vec<usize> {
    if nus.is_empty() {
        return Vec::new();
    }
    let mut deltas = Vec::with_capacity(nus.len());
    let mut prev = 0usize;
    for &nu in nus {
        deltas.push(nu.saturating_sub(prev));
        prev = nu;
    }
    // deltas[k-1] = #{j : k_j >= k}; chains with length exactly L:
    // deltas[L-1] - deltas[L].
    let mut partials = Vec::new();
    for len in 1..=deltas.len() {
        let here = deltas[len - 1];
        let next = deltas.get(len).copied().unwrap_or(0);
        for _ in 0..here.saturating_sub(next) {
            partials.push(len);
        }
    }
    partials.sort_unstable();
    partials
}
