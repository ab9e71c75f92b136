//! Command implementations behind the `floquet` binary: model ingestion,
//! spectral computations, verification suites, and plot-data emission.
//!
//! Every command produces a serializable report carrying the full
//! configuration echo and the tool version, so a structured output document
//! is reproducible from its own metadata. Reports contain no timestamps or
//! other run-dependent data: identical configuration and seed give
//! byte-identical documents.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use crate::charop::{
    delta_apply, equivalence_check, r_d0_apply, resolvent_apply, resolvent_d0_bound,
    zi_minus_a_apply,
};
use crate::grid::HistoryField;
use crate::model::{load_model, FdeModel, Kind};
use crate::oracle::{
    closed_form_strip_roots, exponents_from_monodromy, monodromy_matrix, DEFAULT_STEPS_PER_PERIOD,
};
use crate::periodic::PeriodicFunction;
use crate::solutions::{elementary_solution, residual_fde};
use crate::spectrum::{
    find_exponents, jordan_chains, strip_reduce, Region, RegionKind, SolveOptions, SpectralPoint,
};
use crate::{Error, Result};

/// Run configuration shared by all commands.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model_path: PathBuf,
    /// Rectangle `re_min, re_max, im_min, im_max`, if given.
    pub region_rect: Option<[f64; 4]>,
    /// Disk `center_re, center_im, radius`, if given.
    pub region_disk: Option<[f64; 3]>,
    pub n_time: usize,
    pub m_theta: usize,
    pub m_history: usize,
    pub tol: f64,
    pub contour_order: usize,
    pub rank_tol: f64,
    pub strip: bool,
    pub oracle: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(model_path: PathBuf) -> Self {
        RunConfig {
            model_path,
            region_rect: None,
            region_disk: None,
            n_time: 64,
            m_theta: 64,
            m_history: 128,
            tol: 1e-8,
            contour_order: 64,
            rank_tol: 1e-8,
            strip: false,
            oracle: false,
            seed: 0,
            out: None,
        }
    }

    fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.tol <= 0.0 || self.rank_tol <= 0.0 {
            return Err(Error::Validation(vec!["tolerances must be positive".into()]));
        }
        for (name, v) in [("N", self.n_time), ("M", self.m_theta)] {
            if !v.is_power_of_two() {
                warnings.push(format!("{name} = {v} is not a power of two"));
            }
        }
        Ok(warnings)
    }

    fn region(&self, m: &FdeModel) -> Region {
        let mut region = if let Some([re0, re1, im0, im1]) = self.region_rect {
            Region::rect(re0, re1, im0, im1)
        } else if let Some([cx, cy, r]) = self.region_disk {
            Region::disk(Complex64::new(cx, cy), r)
        } else {
            Region::default_for(m.period)
        };
        region.contour_order = self.contour_order;
        region.rank_tol = self.rank_tol;
        region
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            residual_tol: self.tol.max(1e-12),
            strip: self.strip,
            seed: self.seed,
            ..SolveOptions::default()
        }
    }
}

/// Model facts echoed into every report (includes the recorded truncation
/// point of unbounded kernels).
#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub kind: String,
    pub period: f64,
    pub dim: usize,
    pub rho: Option<f64>,
    pub s_max: Option<f64>,
    pub r_minus: f64,
    pub r_plus: f64,
    pub norm_l: f64,
    pub mfde_gap_condition: Option<bool>,
}

impl ModelEcho {
    fn of(m: &FdeModel) -> Self {
        ModelEcho {
            kind: m.kind.as_str().to_string(),
            period: m.period,
            dim: m.dim,
            rho: m.rho,
            s_max: m.s_max(),
            r_minus: m.r_minus(),
            r_plus: m.r_plus(),
            norm_l: m.norm_l(),
            mfde_gap_condition: m.mfde_gap_condition(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub model: ModelEcho,
}

fn meta(command: &str, cfg: &RunConfig, m: &FdeModel) -> ReportMeta {
    ReportMeta {
        tool: "floquet".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: cfg.clone(),
        model: ModelEcho::of(m),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRow {
    pub sigma: [f64; 2],
    pub m_g: usize,
    pub partials: Vec<usize>,
    pub m_a: usize,
    pub residual: f64,
    pub refine_delta: Option<f64>,
    pub chain_defect: Option<f64>,
    pub fde_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub method: String,
    /// Max over both directions of the strip distance between the sets.
    pub max_distance: Option<f64>,
    pub oracle_count: usize,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub meta: ReportMeta,
    pub points: Vec<PointRow>,
    pub oracle: Option<OracleComparison>,
    pub warnings: Vec<String>,
}

/// Locate exponents, attach multiplicity structure and solution residuals.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<SpectrumReport> {
    let mut warnings = cfg.validate()?;
    let m = load_model(&cfg.model_path)?;
    let region = cfg.region(&m);
    let result = find_exponents(&m, &region, cfg.n_time, &cfg.solve_options())?;
    warnings.extend(result.warnings.clone());

    let mut rows = Vec::new();
    for p in &result.points {
        rows.push(enrich_point(&m, p, cfg, &mut warnings));
    }

    let oracle = if cfg.oracle {
        Some(oracle_comparison(&m, &region, &result.points, cfg)?)
    } else {
        None
    };

    Ok(SpectrumReport { meta: meta("spectrum", cfg, &m), points: rows, oracle, warnings })
}

/// Jordan structure + FDE residual for one located exponent.
fn enrich_point(
    m: &FdeModel,
    p: &SpectralPoint,
    cfg: &RunConfig,
    warnings: &mut Vec<String>,
) -> PointRow {
    match jordan_chains(m, p.sigma, cfg.n_time, cfg.rank_tol) {
        Ok(full) => {
            let defect = full.chain_defects.iter().copied().fold(0.0, f64::max);
            let fde_res = full.chains.last().map(|chain| {
                let x = elementary_solution(p.sigma, chain, 0.0);
                residual_fde(m, &x, 0.0, 3.0 * m.period, 96).unwrap_or(f64::NAN)
            });
            PointRow {
                sigma: [p.sigma.re, p.sigma.im],
                m_g: full.m_g,
                partials: full.partials.clone(),
                m_a: full.m_a,
                residual: p.residual,
                refine_delta: p.refine_delta,
                chain_defect: Some(defect),
                fde_residual: fde_res,
            }
        }
        Err(e) => {
            warnings.push(format!("jordan structure at sigma = {}: {e}", p.sigma));
            PointRow {
                sigma: [p.sigma.re, p.sigma.im],
                m_g: p.m_g,
                partials: Vec::new(),
                m_a: 0,
                residual: p.residual,
                refine_delta: p.refine_delta,
                chain_defect: None,
                fde_residual: None,
            }
        }
    }
}

/// Cross-check located exponents against an independent oracle.
///
/// Classical DDEs use the monodromy operator; constant-coefficient models of
/// any kind use the autonomous characteristic roots; time-varying mixed
/// models have no oracle (ill-posed initial value problem).
fn oracle_comparison(
    m: &FdeModel,
    region: &Region,
    points: &[SpectralPoint],
    cfg: &RunConfig,
) -> Result<OracleComparison> {
    let constant = m.atoms().iter().all(|a| a.constant_in_time());
    let (method, oracle_set): (String, Vec<Complex64>) = if m.kind == Kind::Dde {
        let mono = monodromy_matrix(m, cfg.m_history, DEFAULT_STEPS_PER_PERIOD)?;
        let exps = exponents_from_monodromy(&mono, 1e-6)?;
        ("monodromy".into(), exps.into_iter().map(|e| e.sigma).collect())
    } else if constant {
        let (re_min, re_max) = match region.kind {
            RegionKind::Rect { re_min, re_max, .. } => (re_min, re_max),
            RegionKind::Disk { center, radius } => (center.re - radius, center.re + radius),
        };
        ("closed-form".into(), closed_form_strip_roots(m, re_min, re_max)?)
    } else {
        return Ok(OracleComparison {
            method: "skipped".into(),
            max_distance: None,
            oracle_count: 0,
            detail: "skipped: ill-posed (no forward evolution for time-varying mixed models)"
                .into(),
        });
    };

    // Compare strip-reduced sets inside the (strip-reduced) region.
    let reduced_points: Vec<Complex64> =
        points.iter().map(|p| strip_reduce(p.sigma, m.period)).collect();
    let oracle_inside: Vec<Complex64> = oracle_set
        .iter()
        .copied()
        .filter(|s| region.contains(*s, -1e-6))
        .collect();
    let mut max_d = 0.0f64;
    for &s in &reduced_points {
        let d = oracle_inside
            .iter()
            .map(|o| (o - s).norm())
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            max_d = max_d.max(d);
        }
    }
    for &o in &oracle_inside {
        let d = reduced_points
            .iter()
            .map(|s| (s - o).norm())
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            max_d = max_d.max(d);
        }
    }
    let detail = format!(
        "{} oracle exponents inside region, {} located points",
        oracle_inside.len(),
        reduced_points.len()
    );
    Ok(OracleComparison {
        method,
        max_distance: Some(max_d),
        oracle_count: oracle_inside.len(),
        detail,
    })
}

#[derive(Debug, Serialize)]
pub struct ChainSample {
    pub times: Vec<f64>,
    /// `values[member][time][component] = [re, im]`.
    pub values: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Serialize)]
pub struct JordanReport {
    pub meta: ReportMeta,
    pub sigma: [f64; 2],
    pub m_g: usize,
    pub partials: Vec<usize>,
    pub m_a: usize,
    pub chain_defects: Vec<f64>,
    pub chains: Vec<ChainSample>,
    /// Pole-order hypothesis `k(σ, 𝒜) = r(Δ(σ))` is outside the computed
    /// rank data.
    pub pole_order: String,
    pub warnings: Vec<String>,
}

pub fn cmd_jordan(cfg: &RunConfig, sigma: Complex64) -> Result<JordanReport> {
    let warnings = cfg.validate()?;
    let m = load_model(&cfg.model_path)?;
    let point = jordan_chains(&m, sigma, cfg.n_time, cfg.rank_tol)?;
    let chains = point
        .chains
        .iter()
        .map(|chain| {
            let times = chain[0].grid_times();
            let values = chain
                .iter()
                .map(|q| {
                    (0..q.n_grid())
                        .map(|j| {
                            (0..q.dim())
                                .map(|c| {
                                    let v = q.values()[(j, c)];
                                    [v.re, v.im]
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            ChainSample { times, values }
        })
        .collect();
    Ok(JordanReport {
        meta: meta("jordan", cfg, &m),
        sigma: [point.sigma.re, point.sigma.im],
        m_g: point.m_g,
        partials: point.partials.clone(),
        m_a: point.m_a,
        chain_defects: point.chain_defects.clone(),
        chains,
        pole_order: "not verified".into(),
        warnings,
    })
}

/// Emit per-chain sample files next to `out` (TSV, full precision).
pub fn write_chain_files(report: &JordanReport, out: &Path) -> Result<Vec<PathBuf>> {
    let stem = out.with_extension("");
    let mut written = Vec::new();
    for (ci, chain) in report.chains.iter().enumerate() {
        for (mi, member) in chain.values.iter().enumerate() {
            let path = PathBuf::from(format!("{}_chain{}_q{}.tsv", stem.display(), ci, mi));
            let mut body = String::from("t");
            for c in 0..member[0].len() {
                body.push_str(&format!("\tre{c}\tim{c}"));
            }
            body.push('\n');
            for (j, t) in chain.times.iter().enumerate() {
                body.push_str(&format!("{t}"));
                for comp in &member[j] {
                    body.push_str(&format!("\t{}\t{}", comp[0], comp[1]));
                }
                body.push('\n');
            }
            std::fs::write(&path, body)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub status: String,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl CheckRow {
    fn pass_fail(name: &str, measured: f64, threshold: f64, detail: String) -> Self {
        CheckRow {
            name: name.into(),
            status: if measured <= threshold { "pass" } else { "fail" }.into(),
            measured: Some(measured),
            threshold: Some(threshold),
            detail,
        }
    }

    fn skipped(name: &str, detail: String) -> Self {
        CheckRow { name: name.into(), status: "skipped".into(), measured: None, threshold: None, detail }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub meta: ReportMeta,
    pub checks: Vec<CheckRow>,
    pub passed: bool,
    pub warnings: Vec<String>,
}

/// Run the applicable property suites for the model kind.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let mut warnings = cfg.validate()?;
    let m = load_model(&cfg.model_path)?;
    let mut checks = Vec::new();
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let grid = m.theta_grid(cfg.m_theta);
    let weight = m.rho_weight();

    // Probe points inside the admissible half-plane.
    let shift = m.rho.map_or(0.0, |rho| (-rho + 0.4).max(0.0));
    let zs = [
        Complex64::new(0.3 + shift, 0.2),
        Complex64::new(-0.1 + shift.max(0.0) + if m.kind == Kind::Idde { 0.3 } else { 0.0 }, 0.6),
    ];
    // Time-oscillatory fields shift along characteristics and cannot be
    // resolved by polynomial collocation over the long truncated history of
    // an infinite-delay model; identity probes there are time-constant.
    let probe_kmax = if m.kind == Kind::Idde { 0 } else { 6 };

    // Equivalence identity diag(Δ(z), I) = F(z)(zI − Â)E(z).
    let mut worst_eq = 0.0f64;
    for &z in &zs {
        for _ in 0..3 {
            let q = PeriodicFunction::random_band_limited(m.period, m.dim, cfg.n_time, probe_kmax, &mut rng);
            let phi = HistoryField::random_smooth(
                grid.clone(),
                m.period,
                m.dim,
                cfg.n_time,
                probe_kmax,
                4,
                &mut rng,
            );
            worst_eq = worst_eq.max(equivalence_check(&m, z, &q, &phi)?);
        }
    }
    checks.push(CheckRow::pass_fail(
        "equivalence-identity",
        worst_eq,
        1e-8,
        format!(
            "max residual over {} random (q, phi) pairs (t-band-limit {probe_kmax})",
            3 * zs.len()
        ),
    ));

    // Resolvent identity (zI − 𝒜)R(z, 𝒜) = I.
    let mut worst_res = 0.0f64;
    let mut res_checked = 0usize;
    for &z in &zs {
        for _ in 0..2 {
            let phi = HistoryField::random_smooth(
                grid.clone(),
                m.period,
                m.dim,
                cfg.n_time,
                probe_kmax,
                4,
                &mut rng,
            );
            match resolvent_apply(&m, z, &phi) {
                Ok(r) => {
                    let back = zi_minus_a_apply(&m, z, &r)?;
                    worst_res = worst_res.max(back.minus(&phi).sup_norm(weight));
                    res_checked += 1;
                }
                Err(Error::InSpectrum { .. }) => {
                    warnings.push(format!("resolvent probe z = {z} fell on the spectrum; skipped"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if res_checked > 0 {
        checks.push(CheckRow::pass_fail(
            "resolvent-identity",
            worst_res,
            1e-7,
            format!("max ‖(zI−A)R(z,A)φ − φ‖ over {res_checked} random fields"),
        ));
    } else {
        checks.push(CheckRow::skipped("resolvent-identity", "all probe points hit spectrum".into()));
    }

    // Resolvent bound of R(z, D0).
    {
        let z = zs[0];
        let phi = HistoryField::random_smooth(
            grid.clone(),
            m.period,
            m.dim,
            cfg.n_time,
            probe_kmax,
            3,
            &mut rng,
        );
        let rd0 = r_d0_apply(&m, z, &phi)?;
        let h = m.r_plus() - m.r_minus();
        let bound = resolvent_d0_bound(h, z) * phi.sup_norm(weight);
        let measured = rd0.sup_norm(weight);
        checks.push(CheckRow::pass_fail(
            "rd0-norm-bound",
            measured,
            bound * (1.0 + 1e-6) + 1e-12,
            format!("‖R(z,D0)φ‖ vs M_z‖φ‖ at z = {z}"),
        ));
    }

    // 2πi/T spectral periodicity: singular values and conjugation identity.
    {
        let z = zs[0];
        let base = crate::charop::assemble_delta(&m, z, cfg.n_time)?.smallest_singular_value();
        let mut worst = 0.0f64;
        let q = PeriodicFunction::random_band_limited(m.period, m.dim, cfg.n_time, 5, &mut rng);
        for k in [-2i64, -1, 1, 2] {
            let zk = z + Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64 / m.period);
            let sk = crate::charop::assemble_delta(&m, zk, cfg.n_time)?.smallest_singular_value();
            worst = worst.max((sk - base).abs());
            // ε_k Δ(z + 2πik/T) ε_k^{-1} = Δ(z) on a band-limited probe.
            let ek = |sign: f64, f: &PeriodicFunction| -> PeriodicFunction {
                let mut vals = f.values().clone();
                for (j, t) in f.grid_times().iter().enumerate() {
                    let phase = Complex64::from_polar(
                        1.0,
                        sign * 2.0 * std::f64::consts::PI * k as f64 * t / m.period,
                    );
                    for c in 0..f.dim() {
                        vals[(j, c)] *= phase;
                    }
                }
                PeriodicFunction::from_values(f.period(), vals)
            };
            let conj = ek(1.0, &delta_apply(&m, zk, &ek(-1.0, &q))?);
            let direct = delta_apply(&m, z, &q)?;
            worst = worst.max(conj.minus(&direct).sup_norm());
        }
        checks.push(CheckRow::pass_fail(
            "spectral-periodicity",
            worst,
            1e-8,
            "σ_min match and ε_k conjugation over k = ±1, ±2".into(),
        ));
    }

    // Spectrum, chain defects, solution residuals.
    let region = cfg.region(&m);
    let mut spectrum_points = Vec::new();
    match find_exponents(&m, &region, cfg.n_time, &cfg.solve_options()) {
        Ok(result) => {
            warnings.extend(result.warnings.clone());
            let mut worst_residual = 0.0f64;
            let mut worst_defect = 0.0f64;
            let mut worst_fde = 0.0f64;
            for p in &result.points {
                worst_residual = worst_residual.max(p.residual);
                if let Ok(full) = jordan_chains(&m, p.sigma, cfg.n_time, cfg.rank_tol) {
                    for (chain, defect) in full.chains.iter().zip(&full.chain_defects) {
                        worst_defect = worst_defect.max(*defect);
                        let x = elementary_solution(p.sigma, chain, 0.0);
                        worst_fde =
                            worst_fde.max(residual_fde(&m, &x, 0.0, 3.0 * m.period, 96)?);
                    }
                }
            }
            checks.push(CheckRow::pass_fail(
                "spectrum-residuals",
                worst_residual,
                cfg.tol,
                format!("{} exponents located", result.points.len()),
            ));
            checks.push(CheckRow::pass_fail(
                "chain-defects",
                worst_defect,
                1e-7,
                "max block-Toeplitz defect over all chains".into(),
            ));
            checks.push(CheckRow::pass_fail(
                "elementary-solution-residuals",
                worst_fde,
                1e-6,
                "max FDE residual over a 3-period window".into(),
            ));
            spectrum_points = result.points;
        }
        Err(e) => {
            checks.push(CheckRow {
                name: "spectrum-residuals".into(),
                status: "fail".into(),
                measured: None,
                threshold: None,
                detail: format!("{e}"),
            });
        }
    }

    // Oracle comparison.
    {
        let cmp = oracle_comparison(&m, &region, &spectrum_points, cfg)?;
        match (cmp.method.as_str(), cmp.max_distance) {
            ("skipped", _) => checks.push(CheckRow::skipped("oracle-comparison", cmp.detail)),
            (_, Some(d)) => checks.push(CheckRow::pass_fail(
                "oracle-comparison",
                d,
                1e-6,
                format!("{} ({})", cmp.detail, cmp.method),
            )),
            _ => checks.push(CheckRow::skipped("oracle-comparison", cmp.detail)),
        }
    }

    let passed = checks.iter().all(|c| c.status != "fail");
    Ok(VerifyReport { meta: meta("verify", cfg, &m), checks, passed, warnings })
}

#[derive(Debug, Serialize)]
pub struct ResolventReport {
    pub meta: ReportMeta,
    pub z: [f64; 2],
    pub identity_residual: f64,
    pub d0_bound: f64,
    pub warnings: Vec<String>,
}

/// Apply the resolvent at `z` to a seeded smooth field and report the
/// identity residual.
pub fn cmd_resolvent(cfg: &RunConfig, z: Complex64) -> Result<ResolventReport> {
    let warnings = cfg.validate()?;
    let m = load_model(&cfg.model_path)?;
    let grid = m.theta_grid(cfg.m_theta);
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let phi = HistoryField::random_smooth(grid, m.period, m.dim, cfg.n_time, 5, 4, &mut rng);
    let r = resolvent_apply(&m, z, &phi)?;
    let back = zi_minus_a_apply(&m, z, &r)?;
    let residual = back.minus(&phi).sup_norm(m.rho_weight());
    let h = m.r_plus() - m.r_minus();
    Ok(ResolventReport {
        meta: meta("resolvent", cfg, &m),
        z: [z.re, z.im],
        identity_residual: residual,
        d0_bound: resolvent_d0_bound(h, z),
        warnings,
    })
}

#[derive(Debug, Serialize)]
pub struct ExportReport {
    pub meta: ReportMeta,
    pub files: Vec<PathBuf>,
    pub points: usize,
    pub warnings: Vec<String>,
}

/// Emit spectrum scatter data, strip boundaries, and eigenfunction heat-map
/// grids as delimited text (no rendering).
pub fn cmd_export_plot(cfg: &RunConfig) -> Result<ExportReport> {
    let mut warnings = cfg.validate()?;
    let m = load_model(&cfg.model_path)?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Validation(vec!["export-plot requires --out".into()]))?;
    let stem = out.with_extension("");
    let region = cfg.region(&m);
    let result = find_exponents(&m, &region, cfg.n_time, &cfg.solve_options())?;
    warnings.extend(result.warnings.clone());

    let mut files = Vec::new();

    // Scatter: one row per exponent.
    let scatter = PathBuf::from(format!("{}_spectrum.tsv", stem.display()));
    let mut body = String::from("re\tim\tm_g\tm_a\n");
    for p in &result.points {
        let m_a = jordan_chains(&m, p.sigma, cfg.n_time, cfg.rank_tol)
            .map(|f| f.m_a)
            .unwrap_or(0);
        body.push_str(&format!("{}\t{}\t{}\t{}\n", p.sigma.re, p.sigma.im, p.m_g, m_a));
    }
    std::fs::write(&scatter, body)?;
    files.push(scatter);

    // Strip boundaries Im = ±π/T.
    let strip = PathBuf::from(format!("{}_strip.tsv", stem.display()));
    let b = std::f64::consts::PI / m.period;
    std::fs::write(&strip, format!("boundary\tim\nlower\t{}\nupper\t{}\n", -b, b))?;
    files.push(strip);

    // Eigenfunction heat maps |φ(t)(θ)| for each exponent.
    let grid = m.theta_grid(cfg.m_theta);
    for (i, p) in result.points.iter().enumerate() {
        if let Some(q) = &p.eigvec {
            let field = crate::charop::q_iota_apply(&m, p.sigma, q, &grid)?;
            let path = PathBuf::from(format!("{}_eigfun{}.tsv", stem.display(), i));
            let mut body = String::from("t\ttheta\tre\tim\tabs\n");
            for (mi, &theta) in grid.nodes().iter().enumerate() {
                let col = field.col(mi);
                for (j, &t) in col.grid_times().iter().enumerate() {
                    let v = col.values()[(j, 0)];
                    body.push_str(&format!("{t}\t{theta}\t{}\t{}\t{}\n", v.re, v.im, v.norm()));
                }
            }
            std::fs::write(&path, body)?;
            files.push(path);
        }
    }

    Ok(ExportReport {
        meta: meta("export-plot", cfg, &m),
        files,
        points: result.points.len(),
        warnings,
    })
}

/// Serialize a report to pretty JSON (deterministic for fixed input).
pub fn report_json<T: Serialize>(report: &T) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Numerics(format!("serialization failed: {e}")))
}

pub fn write_report<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    std::fs::write(path, report_json(report)?)?;
    Ok(())
}

/// Format with 10 significant digits for console tables.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.9e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
    }

    #[test]
    fn spectrum_on_pi_half_fixture() {
        let mut cfg = RunConfig::new(fixture("dde_pi_half.toml"));
        cfg.region_rect = Some([-1.0, 1.0, -3.0, 3.0]);
        let report = cmd_spectrum(&cfg).unwrap();
        assert_eq!(report.points.len(), 2);
        let pi_2 = std::f64::consts::FRAC_PI_2;
        assert!((report.points[0].sigma[1] + pi_2).abs() < 1e-8);
        assert!((report.points[1].sigma[1] - pi_2).abs() < 1e-8);
        assert_eq!(report.points[0].partials, vec![1]);
    }

    #[test]
    fn spectrum_on_idde_fixture() {
        let mut cfg = RunConfig::new(fixture("idde_quad.toml"));
        cfg.region_rect = Some([-0.5, 3.0, -3.0, 3.0]);
        let report = cmd_spectrum(&cfg).unwrap();
        assert_eq!(report.points.len(), 1);
        assert!((report.points[0].sigma[0] - 1.0).abs() < 1e-6);
        assert!(report.points[0].sigma[1].abs() < 1e-6);
    }

    #[test]
    fn spectrum_with_oracle_on_periodic_fixture() {
        let mut cfg = RunConfig::new(fixture("dde_periodic.toml"));
        let pi = std::f64::consts::PI;
        cfg.region_rect = Some([-2.2, 1.0, -pi, pi]);
        cfg.strip = true;
        cfg.oracle = true;
        let report = cmd_spectrum(&cfg).unwrap();
        let oracle = report.oracle.unwrap();
        assert_eq!(oracle.method, "monodromy");
        assert!(oracle.max_distance.unwrap() <= 1e-6, "{oracle:?}");
        assert_eq!(report.points.len(), oracle.oracle_count);
    }

    #[test]
    fn non_power_of_two_resolution_warns() {
        let mut cfg = RunConfig::new(fixture("dde_pi_half.toml"));
        cfg.region_rect = Some([-1.0, 1.0, -3.0, 3.0]);
        cfg.n_time = 60;
        let report = cmd_spectrum(&cfg).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("not a power of two")));
    }

    #[test]
    fn jordan_on_double_root_fixture() {
        let cfg = RunConfig::new(fixture("dde_double_root.toml"));
        let report = cmd_jordan(&cfg, Complex64::new(-1.0, 0.0)).unwrap();
        assert_eq!(report.partials, vec![2]);
        assert_eq!(report.m_a, 2);
        assert_eq!(report.chains.len(), 1);
        assert_eq!(report.chains[0].values.len(), 2);
        assert!(report.chain_defects[0] <= 1e-7);
        assert_eq!(report.pole_order, "not verified");
    }

    #[test]
    fn jordan_rejects_regular_point() {
        let cfg = RunConfig::new(fixture("dde_pi_half.toml"));
        let err = cmd_jordan(&cfg, Complex64::new(0.5, 0.1));
        match err {
            Err(Error::Numerics(msg)) => assert!(msg.contains("not a characteristic value")),
            other => panic!("expected numerics error, got {other:?}"),
        }
    }

    #[test]
    fn verify_passes_on_pi_half() {
        let mut cfg = RunConfig::new(fixture("dde_pi_half.toml"));
        cfg.region_rect = Some([-1.0, 1.0, -3.0, 3.0]);
        cfg.oracle = true;
        let report = cmd_verify(&cfg).unwrap();
        assert!(report.passed, "{:#?}", report.checks);
    }

    #[test]
    fn verify_is_deterministic() {
        let mut cfg = RunConfig::new(fixture("dde_pi_half.toml"));
        cfg.region_rect = Some([-1.0, 1.0, -3.0, 3.0]);
        cfg.seed = 7;
        let a = report_json(&cmd_verify(&cfg).unwrap()).unwrap();
        let b = report_json(&cmd_verify(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verify_mfde_skips_oracle_only_if_time_varying() {
        let mut cfg = RunConfig::new(fixture("mfde_gap.toml"));
        let pi = std::f64::consts::PI;
        cfg.region_rect = Some([-2.0, 2.0, -pi, pi]);
        let report = cmd_verify(&cfg).unwrap();
        // Constant-coefficient mfde still has the closed-form oracle.
        let oracle = report.checks.iter().find(|c| c.name == "oracle-comparison").unwrap();
        assert_eq!(oracle.status, "pass", "{oracle:?}");
        assert!(report.passed, "{:#?}", report.checks);
    }

    #[test]
    fn verify_time_varying_mfde_skips_oracle() {
        let dir = std::env::temp_dir().join("floquet_mfde_tv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mfde_tv.toml");
        std::fs::write(
            &path,
            "kind = \"mfde\"\nperiod = 1.0\ndim = 1\n\n[[term]]\nshift = -1.0\ncoeff = \"0.1+0.05*cos(2*pi*t)\"\n\n[[term]]\nshift = 1.0\ncoeff = \"-0.1\"\n",
        )
        .unwrap();
        let mut cfg = RunConfig::new(path);
        let pi = std::f64::consts::PI;
        cfg.region_rect = Some([-1.5, 1.5, -pi, pi]);
        let report = cmd_verify(&cfg).unwrap();
        let oracle = report.checks.iter().find(|c| c.name == "oracle-comparison").unwrap();
        assert_eq!(oracle.status, "skipped");
        assert!(oracle.detail.contains("ill-posed"), "{oracle:?}");
    }

    #[test]
    fn export_plot_writes_files() {
        let dir = std::env::temp_dir().join("floquet_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let mut cfg = RunConfig::new(fixture("dde_pi_half.toml"));
        cfg.region_rect = Some([-1.0, 1.0, -3.0, 3.0]);
        cfg.out = Some(dir.join("run.json"));
        let report = cmd_export_plot(&cfg).unwrap();
        assert!(report.files.len() >= 4);
        let scatter = std::fs::read_to_string(&report.files[0]).unwrap();
        assert!(scatter.starts_with("re\tim\t"));
        assert_eq!(scatter.lines().count(), 3);
        // Empty spectrum still produces a header and exit success.
        let mut cfg2 = cfg.clone();
        cfg2.region_rect = Some([3.0, 4.0, 0.4, 0.9]);
        cfg2.out = Some(dir.join("empty.json"));
        let report2 = cmd_export_plot(&cfg2).unwrap();
        assert_eq!(report2.points, 0);
        let scatter2 = std::fs::read_to_string(&report2.files[0]).unwrap();
        assert_eq!(scatter2, "re\tim\tm_g\tm_a\n");
    }

    #[test]
    fn corrupted_model_fails_validation() {
        let dir = std::env::temp_dir().join("floquet_badmodel_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(
            &path,
            "kind = \"dde\"\nperiod = 1.0\ndim = 1\n\n[[term]]\nshift = -0.5\ncoeff = \"1\"\n",
        )
        .unwrap();
        let cfg = RunConfig::new(path);
        let err = cmd_spectrum(&cfg);
        match err {
            Err(e @ Error::Validation(_)) => assert_eq!(e.exit_code(), 1),
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
