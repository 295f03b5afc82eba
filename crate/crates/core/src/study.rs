//! Capacity sweeps, broadening optimization, scaling fits, and a spectrum
//! cache.
//!
//! A sweep point is one spectrum evaluation; spectra are expensive and
//! deterministic, so they are cached on disk keyed by a canonical hash of the
//! protocol spec, the grid sizes, and the crate version.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::grid::{gauss_legendre_grid, uniform_grid, Axis, Grid};
use crate::kernel::{
    afc_total_kernel, raman_storage_kernel, tcrib_total_kernel, unbroadened_antinormal_kernel,
};
use crate::protocol::{Protocol, ProtocolSpec};
use crate::schmidt::{capacity, hermitian_eigen_spectrum, singular_spectrum, CapacityResult,
    SingularSpectrum};
use crate::solver::{lcrib_greens_function, SolverConfig};
use crate::Result;

/// Cache entries from older code versions are never reused.
pub const VERSION_TAG: &str = concat!("memcap-", env!("CARGO_PKG_VERSION"));

/// Grid sizes used to discretize each protocol's kernel. `refine` scales
/// every resolution knob; 2 is the stability-check setting.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridConfig {
    /// Spatial nodes (unbroadened eigenproblem; lCRIB solver collocation).
    pub n_z: usize,
    /// Frequency nodes for tCRIB and AFC total kernels (kept odd).
    pub n_w: usize,
    /// Time nodes (Raman) or solver time cells (lCRIB).
    pub n_t: usize,
    /// Half-count override for the Raman spatial-frequency comb.
    pub n_k: Option<usize>,
    pub refine: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_z: 400,
            n_w: 801,
            n_t: 600,
            n_k: None,
            refine: 1,
        }
    }
}

impl GridConfig {
    pub fn refined(&self, factor: u32) -> Self {
        let mut g = self.clone();
        g.refine = self.refine * factor;
        g
    }

    fn eff_n_z(&self) -> usize {
        self.n_z * self.refine as usize
    }

    fn eff_n_w(&self) -> usize {
        (self.n_w * self.refine as usize) | 1
    }

    fn eff_n_t(&self) -> usize {
        self.n_t * self.refine as usize
    }
}

/// Frequency window for the broadened-ensemble total kernels: the comb span
/// plus a homogeneous-linewidth margin.
pub fn frequency_window(spec: &ProtocolSpec) -> f64 {
    0.5 * spec.delta0 + 20.0 * spec.gamma
}

/// Frequency grid for the AFC total kernel: a fine uniform core over the
/// comb plus Gauss-Legendre tail segments. The kernel's Lorentzian tails
/// carry weight out to hundreds of linewidths, and truncating them at the
/// comb span underestimates every mode efficiency.
fn afc_frequency_grid(spec: &ProtocolSpec, grids: &GridConfig) -> Result<Grid> {
    let core = frequency_window(spec);
    let outer = core + 50.0 * spec.d * spec.gamma;
    let n_core = grids.eff_n_w();
    let n_tail = (n_core / 16).max(24);
    let mut grid = uniform_grid(n_core, -core, core, Axis::Frequency)?;
    let left = gauss_legendre_grid(n_tail, -outer, -core, Axis::Frequency)?;
    let right = gauss_legendre_grid(n_tail, core, outer, Axis::Frequency)?;
    let mut nodes = left.nodes;
    let mut weights = left.weights;
    nodes.append(&mut grid.nodes);
    weights.append(&mut grid.weights);
    nodes.extend(right.nodes);
    weights.extend(right.weights);
    Ok(Grid {
        nodes,
        weights,
        axis: Axis::Frequency,
        bounds: (-outer, outer),
    })
}

/// Spacing of the Raman spin-wave frequency band, in units of gamma.
const RAMAN_DK: f64 = 0.9;
/// Cap on the swept band, as a multiple of (d*gamma/|Gamma|)^2: beyond this
/// span the integrated two-photon absorption cannot saturate any new channel.
const RAMAN_SPAN_C: f64 = 0.31;

/// Spin-wave frequency band for the broadened Raman protocol: a uniform grid
/// centred on the two-photon resonance k* = d*gamma*Delta/|Gamma|^2, covering
/// the frequencies the broadening sweeps through resonance during the time
/// window, capped by the absorption budget of the Raman line.
fn raman_band_grid(spec: &ProtocolSpec, grids: &GridConfig) -> Result<Grid> {
    let dk = RAMAN_DK;
    let span_c = RAMAN_SPAN_C;
    let gamma2 = spec.gamma * spec.gamma + spec.delta * spec.delta;
    let kstar = spec.d * spec.gamma * spec.delta / gamma2;
    let budget = span_c * (spec.d * spec.gamma).powi(2) / gamma2;
    let half_span = 0.5 * spec.delta0.min(budget);
    let n_half = if let Some(n) = grids.n_k {
        n
    } else {
        (half_span / dk).round() as usize
    };
    if n_half == 0 {
        // Unbroadened limit: the stationary two-photon line is one channel.
        return Ok(Grid {
            nodes: vec![kstar],
            weights: vec![dk],
            axis: Axis::SpatialFrequency,
            bounds: (kstar - 0.5 * dk, kstar + 0.5 * dk),
        });
    }
    let reach = dk * n_half as f64;
    let mut grid = uniform_grid(2 * n_half + 1, kstar - reach, kstar + reach, Axis::SpatialFrequency)?;
    // Each band sample is a full channel of width dk (midpoint convention),
    // not a trapezoid node: endpoint rows carry full weight.
    for w in &mut grid.weights {
        *w = dk;
    }
    Ok(grid)
}

/// Solver discretization for the numeric lCRIB Green's function. Resolution
/// follows the spin-wave spatial-frequency content delta0 * t_end.
pub fn lcrib_solver_config(spec: &ProtocolSpec, grids: &GridConfig) -> SolverConfig {
    let t_end = if spec.delta0 >= 10.0 * spec.gamma {
        2.0 / spec.gamma
    } else {
        4.0 / spec.gamma
    };
    let k_content = spec.delta0 * t_end;
    let n_z = ((0.5 * k_content) as usize + 120)
        .max(grids.n_z.min(200))
        .min(1400)
        * grids.refine as usize;
    let n_cells = (((0.5 * k_content) as usize + 64).min(900)).max(grids.n_t.min(128))
        * grids.refine as usize;
    let mut cfg = SolverConfig::auto_with_window(spec, n_z, n_cells, (0.0, t_end));
    if grids.refine > 1 {
        cfg.n_t *= grids.refine as usize;
    }
    cfg
}

/// Singular or eigen spectrum of the protocol's kernel at the given grids.
pub fn spectrum_for(spec: &ProtocolSpec, grids: &GridConfig) -> Result<SingularSpectrum> {
    spec.validate()?;
    match spec.protocol {
        Protocol::Unbroadened => {
            let zgrid = gauss_legendre_grid(grids.eff_n_z(), 0.0, 1.0, Axis::Position)?;
            let kernel = unbroadened_antinormal_kernel(spec, &zgrid)?;
            hermitian_eigen_spectrum(&kernel)
        }
        Protocol::Tcrib => {
            let w = frequency_window(spec);
            let wgrid = uniform_grid(grids.eff_n_w(), -w, w, Axis::Frequency)?;
            let kernel = tcrib_total_kernel(spec, &wgrid)?;
            singular_spectrum(&kernel)
        }
        Protocol::Afc => {
            let wgrid = afc_frequency_grid(spec, grids)?;
            let kernel = afc_total_kernel(spec, &wgrid)?;
            singular_spectrum(&kernel)
        }
        Protocol::Raman => {
            let kgrid = raman_band_grid(spec, grids)?;
            // The swept quasi-resonance of g is the sharpest time structure;
            // sample at least twice per crossing width or the quadrature
            // inflates the resonance rows.
            let res = crate::kernel::raman_time_resolution(spec);
            let n_t = grids
                .eff_n_t()
                .max(((2.0 / res).ceil() as usize).min(8000) * grids.refine as usize);
            let tgrid = uniform_grid(n_t, -0.5, 0.5, Axis::Time)?;
            let mut kernel = raman_storage_kernel(spec, &kgrid, &tgrid)?;
            // Passivity normalization: rescale each sample so a fully swept
            // row's squared norm equals its absorbed fraction 1 - e^{-2R}
            // instead of the adiabatic formula's d/(2 k^2) saturation, which
            // exceeds unity near the two-photon resonance where the
            // adiabatic elimination breaks down. The factor matches the
            // sample amplitude to twice the local absorption rate.
            let scale = (4.0 * PI / (RAMAN_DK * spec.d)).sqrt();
            for (i, &k) in kernel.row_grid.nodes.clone().iter().enumerate() {
                for (j, &tau) in kernel.col_grid.nodes.clone().iter().enumerate() {
                    let kappa = (k + spec.delta0 * tau).abs() / spec.gamma;
                    kernel.values[[i, j]] *= Complex64::new(scale * kappa, 0.0);
                }
            }
            singular_spectrum(&kernel)
        }
        Protocol::LcribNumeric => {
            let cfg = lcrib_solver_config(spec, grids);
            let kernel = lcrib_greens_function(spec, &cfg)?;
            singular_spectrum(&kernel)
        }
        Protocol::LcribAnalytic => Err(Error::InvalidSpec(
            "the analytic lCRIB form is a pointwise validation oracle; \
             use lcrib-numeric for spectra"
                .into(),
        )),
    }
}

/// Canonical, hashable description of one spectrum request.
#[derive(Debug, Clone, Serialize)]
pub struct CacheRequest<'a> {
    pub version: &'static str,
    pub spec: &'a ProtocolSpec,
    pub grids: &'a GridConfig,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: serde_json::Value,
    spectrum: SingularSpectrum,
}

fn cache_path(dir: &Path, canonical: &str) -> PathBuf {
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    dir.join(format!("{:x}.json", hasher.finalize()))
}

/// Content-addressed spectrum cache. Corrupt entries are recomputed and
/// overwritten, with a warning attached to the result. Writes go through a
/// temp file and rename, so concurrent writers of the same key are safe.
pub fn cached_evaluate(
    cache_dir: Option<&Path>,
    request: &CacheRequest,
    compute: impl FnOnce() -> Result<SingularSpectrum>,
) -> Result<SingularSpectrum> {
    let Some(dir) = cache_dir else {
        return compute();
    };
    let canonical =
        serde_json::to_string(request).map_err(|e| Error::Cache(format!("serialize: {e}")))?;
    let path = cache_path(dir, &canonical);
    let mut corrupt = None;
    if let Ok(text) = fs::read_to_string(&path) {
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(entry) => return Ok(entry.spectrum),
            Err(e) => corrupt = Some(format!("cache entry {} corrupt ({e}); recomputed", path.display())),
        }
    }
    let mut spectrum = compute()?;
    fs::create_dir_all(dir)?;
    let entry = CacheEntry {
        request: serde_json::from_str(&canonical)
            .map_err(|e| Error::Cache(format!("canonical form: {e}")))?,
        spectrum: spectrum.clone(),
    };
    let body = serde_json::to_string_pretty(&entry)
        .map_err(|e| Error::Cache(format!("serialize entry: {e}")))?;
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    fs::write(&tmp, body)?;
    fs::rename(&tmp, &path)?;
    // The persisted entry stays clean; the warning is for this caller only.
    if let Some(msg) = corrupt {
        spectrum.warnings.push(msg);
    }
    Ok(spectrum)
}

/// One spectrum-plus-capacity evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub spectrum: SingularSpectrum,
    pub capacity: CapacityResult,
}

pub fn evaluate(
    spec: &ProtocolSpec,
    theta: f64,
    grids: &GridConfig,
    cache_dir: Option<&Path>,
) -> Result<Evaluation> {
    let request = CacheRequest {
        version: VERSION_TAG,
        spec,
        grids,
    };
    let spectrum = cached_evaluate(cache_dir, &request, || spectrum_for(spec, grids))?;
    let cap = capacity(&spectrum, theta)?;
    Ok(Evaluation {
        spectrum,
        capacity: cap,
    })
}

/// Broadening-width search bounds and budget.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub lo: f64,
    pub hi: f64,
    pub coarse_points: usize,
    pub refine_iters: usize,
}

impl SearchConfig {
    /// Default bounds bracket both reported optimum scalings with margin.
    pub fn default_for(spec: &ProtocolSpec) -> Self {
        let dg = spec.d * spec.gamma;
        SearchConfig {
            lo: spec.gamma.max(dg / 200.0),
            hi: 10.0 * dg,
            coarse_points: 25,
            refine_iters: 20,
        }
    }
}

/// Scalar search objective: the capacity, tie-broken by how close the next
/// mode is to threshold. N plateaus on integers; the tie-break orders points
/// within a plateau.
fn score(cap: &CapacityResult) -> f64 {
    let next = cap
        .lambda_bar
        .get(cap.n_modes)
        .copied()
        .unwrap_or(cap.theta);
    cap.n_modes as f64 + next.clamp(0.0, 1.0)
}

/// Optimization result carrying the full winning evaluation.
#[derive(Debug, Clone)]
pub struct OptimizedPoint {
    pub delta0: f64,
    pub eval: Evaluation,
    pub warnings: Vec<String>,
}

fn optimizable(protocol: Protocol) -> bool {
    matches!(
        protocol,
        Protocol::Tcrib | Protocol::LcribNumeric | Protocol::Raman
    )
}

/// Maximize capacity over the broadening width: logarithmic coarse scan, then
/// golden-section refinement of the scalar objective around the best sample.
pub fn optimize_broadening_full(
    template: &ProtocolSpec,
    theta: f64,
    search: &SearchConfig,
    grids: &GridConfig,
    cache_dir: Option<&Path>,
) -> Result<OptimizedPoint> {
    if !optimizable(template.protocol) {
        return Err(Error::InvalidSpec(format!(
            "broadening optimization applies to tcrib, lcrib-numeric, raman; got {}",
            template.protocol.name()
        )));
    }
    if !(search.lo > 0.0 && search.hi >= search.lo) {
        return Err(Error::InvalidArgument(
            "search bounds need 0 < lo <= hi".into(),
        ));
    }
    let probe = |delta0: f64| -> Result<(f64, Evaluation)> {
        let spec = template.clone().with_delta0(delta0);
        let eval = evaluate(&spec, theta, grids, cache_dir)?;
        Ok((score(&eval.capacity), eval))
    };
    if search.hi == search.lo {
        let (_, eval) = probe(search.lo)?;
        return Ok(OptimizedPoint {
            delta0: search.lo,
            eval,
            warnings: Vec::new(),
        });
    }
    let (ln_lo, ln_hi) = (search.lo.ln(), search.hi.ln());
    let n = search.coarse_points.max(2);
    let mut best: Option<(f64, f64, Evaluation)> = None;
    for i in 0..n {
        let x = ln_lo + (ln_hi - ln_lo) * i as f64 / (n - 1) as f64;
        let delta0 = x.exp();
        let (s, eval) = probe(delta0)?;
        if best.as_ref().map_or(true, |(bs, _, _)| s > *bs) {
            best = Some((s, delta0, eval));
        }
    }
    let (mut best_s, mut best_d, mut best_eval) = best.unwrap();
    // Golden-section refinement in log space around the winning sample.
    let step = (ln_hi - ln_lo) / (n - 1) as f64;
    let mut a = (best_d.ln() - step).max(ln_lo);
    let mut b = (best_d.ln() + step).min(ln_hi);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut s1, mut e1) = probe(x1.exp())?;
    let (mut s2, mut e2) = probe(x2.exp())?;
    for _ in 0..search.refine_iters {
        if s1 >= s2 {
            b = x2;
            x2 = x1;
            s2 = s1;
            e2 = e1;
            x1 = b - phi * (b - a);
            let r = probe(x1.exp())?;
            s1 = r.0;
            e1 = r.1;
        } else {
            a = x1;
            x1 = x2;
            s1 = s2;
            e1 = e2;
            x2 = a + phi * (b - a);
            let r = probe(x2.exp())?;
            s2 = r.0;
            e2 = r.1;
        }
        let (s, x, e) = if s1 >= s2 {
            (s1, x1, &e1)
        } else {
            (s2, x2, &e2)
        };
        if s > best_s {
            best_s = s;
            best_d = x.exp();
            best_eval = e.clone();
        }
    }
    let mut warnings = Vec::new();
    if best_eval.capacity.n_modes == 0 {
        warnings.push(format!(
            "no broadening in [{:.3e}, {:.3e}] stores a mode above theta={theta}; \
             widen the search bounds",
            search.lo, search.hi
        ));
    }
    Ok(OptimizedPoint {
        delta0: best_d,
        eval: best_eval,
        warnings,
    })
}

/// Contract-level wrapper returning only the optimum and its capacity.
pub fn optimize_broadening(
    template: &ProtocolSpec,
    theta: f64,
    search: &SearchConfig,
    grids: &GridConfig,
    cache_dir: Option<&Path>,
) -> Result<(f64, CapacityResult)> {
    let opt = optimize_broadening_full(template, theta, search, grids, cache_dir)?;
    Ok((opt.delta0, opt.eval.capacity))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub d: f64,
    pub delta0_used: f64,
    pub n_modes: usize,
    /// Leading running-average efficiency.
    pub lambda1: f64,
    /// Leading singular or eigen value.
    pub sigma1: f64,
    /// Kernel resolution, rows x cols.
    pub grid: (usize, usize),
    /// Grid-refinement stability: None when not checked.
    pub stable: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub theta: f64,
    pub points: Vec<SweepPoint>,
    /// Hash of the inputs and outputs, for provenance lines in emitted files.
    pub provenance: String,
}

/// Capacity versus depth. `make_spec` materializes the protocol at each d
/// (fixing control shapes, tooth counts and so on); when `optimize` is given
/// the broadening width is tuned per point, otherwise the template's delta0
/// is used as-is. Per-point failures are recorded in-place.
pub fn capacity_curve(
    make_spec: &dyn Fn(f64) -> ProtocolSpec,
    d_list: &[f64],
    theta: f64,
    optimize: Option<&SearchConfig>,
    grids: &GridConfig,
    cache_dir: Option<&Path>,
    check_stability: bool,
) -> Result<SweepResult> {
    if d_list.is_empty() {
        return Err(Error::InvalidArgument("empty d list".into()));
    }
    if d_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "d list must be strictly ascending".into(),
        ));
    }
    let protocol = make_spec(d_list[0]).protocol;
    let mut points = Vec::with_capacity(d_list.len());
    for &d in d_list {
        let template = make_spec(d);
        let outcome: Result<(f64, Evaluation)> = match optimize {
            Some(search) => optimize_broadening_full(&template, theta, search, grids, cache_dir)
                .map(|o| (o.delta0, o.eval)),
            None => evaluate(&template, theta, grids, cache_dir).map(|e| (template.delta0, e)),
        };
        let point = match outcome {
            Ok((delta0, eval)) => {
                let stable = if check_stability {
                    let spec = template.clone().with_delta0(delta0);
                    let refined = evaluate(&spec, theta, &grids.refined(2), cache_dir)?;
                    Some(refined.capacity.n_modes == eval.capacity.n_modes)
                } else {
                    None
                };
                SweepPoint {
                    d,
                    delta0_used: delta0,
                    n_modes: eval.capacity.n_modes,
                    lambda1: eval.capacity.lambda_bar.first().copied().unwrap_or(0.0),
                    sigma1: eval.spectrum.values.first().copied().unwrap_or(0.0),
                    grid: eval.spectrum.resolution,
                    stable,
                    error: None,
                }
            }
            Err(e) => SweepPoint {
                d,
                delta0_used: template.delta0,
                n_modes: 0,
                lambda1: 0.0,
                sigma1: 0.0,
                grid: (0, 0),
                stable: None,
                error: Some(e.to_string()),
            },
        };
        points.push(point);
    }
    let mut hasher = Sha256::new();
    hasher.update(VERSION_TAG.as_bytes());
    hasher.update(protocol.name().as_bytes());
    hasher.update(theta.to_le_bytes());
    for p in &points {
        hasher.update(
            serde_json::to_string(p)
                .map_err(|e| Error::Cache(format!("provenance: {e}")))?
                .as_bytes(),
        );
    }
    Ok(SweepResult {
        protocol,
        theta,
        points,
        provenance: format!("{:x}", hasher.finalize()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingModel {
    Sqrt,
    Linear,
}

impl ScalingModel {
    pub fn name(self) -> &'static str {
        match self {
            ScalingModel::Sqrt => "sqrt",
            ScalingModel::Linear => "linear",
        }
    }

    fn feature(self, d: f64) -> f64 {
        match self {
            ScalingModel::Sqrt => d.sqrt(),
            ScalingModel::Linear => d,
        }
    }
}

impl std::str::FromStr for ScalingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(ScalingModel::Sqrt),
            "linear" => Ok(ScalingModel::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown scaling model '{other}' (sqrt, linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ScalingModel,
    /// Slope of the through-origin fit N = a f(d).
    pub coefficient: f64,
    pub residual_norm: f64,
    /// Clamped to [0, 1]; a through-origin fit can be worse than the mean.
    pub r_squared: f64,
}

/// Least squares through the origin on the model feature.
pub fn fit_scaling(points: &[(f64, f64)], model: ScalingModel) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints(points.len()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(d, n) in points {
        let f = model.feature(d);
        num += f * n;
        den += f * f;
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("degenerate fit features".into()));
    }
    let a = num / den;
    // Uncentered R^2, the standard definition for through-origin models:
    // centering would degenerate on flat capacity data.
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(d, n) in points {
        let r = n - a * model.feature(d);
        ss_res += r * r;
        ss_tot += n * n;
    }
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        // All-zero data: any through-origin model with zero residual is exact.
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    };
    Ok(FitResult {
        model,
        coefficient: a.max(0.0),
        residual_norm: ss_res.sqrt(),
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn temp_cache(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "memcap-study-{tag}-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    fn small_grids() -> GridConfig {
        GridConfig {
            n_z: 80,
            n_w: 101,
            n_t: 80,
            n_k: Some(12),
            refine: 1,
        }
    }

    #[test]
    fn fit_recovers_exact_sqrt_law() {
        let fit = fit_scaling(&[(1.0, 2.0), (4.0, 4.0), (9.0, 6.0)], ScalingModel::Sqrt).unwrap();
        assert_relative_eq!(fit.coefficient, 2.0, epsilon = 1e-12);
        assert!(fit.residual_norm < 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_capacity_data_prefers_the_flatter_model() {
        // Constant N across a wide depth range: the slower-growing sqrt model
        // must win. A centered R^2 would degenerate to 0 for both fits here.
        let pts: Vec<(f64, f64)> = [600.0, 1200.0, 1800.0, 2400.0, 3000.0]
            .iter()
            .map(|&d| (d, 1.0))
            .collect();
        let sqrt_fit = fit_scaling(&pts, ScalingModel::Sqrt).unwrap();
        let lin_fit = fit_scaling(&pts, ScalingModel::Linear).unwrap();
        assert!(sqrt_fit.r_squared > lin_fit.r_squared);
        assert!(sqrt_fit.r_squared > 0.9);
    }

    #[test]
    fn fit_recovers_exact_linear_law() {
        let fit = fit_scaling(
            &[(10.0, 1.0), (20.0, 2.0), (30.0, 3.0)],
            ScalingModel::Linear,
        )
        .unwrap();
        assert_relative_eq!(fit.coefficient, 0.1, epsilon = 1e-12);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(matches!(
            fit_scaling(&[(1.0, 1.0), (2.0, 2.0)], ScalingModel::Linear),
            Err(Error::InsufficientPoints(2))
        ));
    }

    #[test]
    fn fit_r_squared_is_clamped() {
        // Strongly decreasing data fit through the origin with positive slope.
        let fit = fit_scaling(
            &[(1.0, 30.0), (2.0, 2.0), (3.0, 1.0)],
            ScalingModel::Linear,
        )
        .unwrap();
        assert!(fit.r_squared >= 0.0 && fit.r_squared <= 1.0);
    }

    #[test]
    fn cache_hit_skips_recompute_and_matches() {
        let dir = temp_cache("hit");
        let spec = ProtocolSpec::new(Protocol::Unbroadened, 20.0);
        let grids = small_grids();
        let first = evaluate(&spec, 0.7, &grids, Some(&dir)).unwrap();
        // A compute closure that would fail proves the second call is a hit.
        let request = CacheRequest {
            version: VERSION_TAG,
            spec: &spec,
            grids: &grids,
        };
        let second = cached_evaluate(Some(&dir), &request, || {
            panic!("cache miss on identical request")
        })
        .unwrap();
        assert_eq!(first.spectrum.values, second.values);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn cache_key_tracks_grid_sizes() {
        let dir = temp_cache("key");
        let spec = ProtocolSpec::new(Protocol::Unbroadened, 20.0);
        let coarse = small_grids();
        let mut fine = small_grids();
        fine.n_z = 120;
        evaluate(&spec, 0.7, &coarse, Some(&dir)).unwrap();
        evaluate(&spec, 0.7, &fine, Some(&dir)).unwrap();
        let entries = fs::read_dir(&dir).unwrap().count();
        assert_eq!(entries, 2);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn corrupt_cache_entry_is_recomputed_with_warning() {
        let dir = temp_cache("corrupt");
        let spec = ProtocolSpec::new(Protocol::Unbroadened, 20.0);
        let grids = small_grids();
        evaluate(&spec, 0.7, &grids, Some(&dir)).unwrap();
        let entry = fs::read_dir(&dir).unwrap().next().unwrap().unwrap().path();
        fs::write(&entry, "not json").unwrap();
        let again = evaluate(&spec, 0.7, &grids, Some(&dir)).unwrap();
        assert!(again
            .spectrum
            .warnings
            .iter()
            .any(|w| w.contains("corrupt")));
        // The overwritten entry is valid again.
        let healed = evaluate(&spec, 0.7, &grids, Some(&dir)).unwrap();
        assert!(healed.spectrum.warnings.iter().all(|w| !w.contains("corrupt")));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn degenerate_search_returns_the_single_point() {
        let spec = ProtocolSpec::new(Protocol::Tcrib, 30.0);
        let search = SearchConfig {
            lo: 40.0,
            hi: 40.0,
            coarse_points: 25,
            refine_iters: 5,
        };
        let (delta0, _) =
            optimize_broadening(&spec, 0.7, &search, &small_grids(), None).unwrap();
        assert_eq!(delta0, 40.0);
    }

    #[test]
    fn optimizer_rejects_fixed_profile_protocols() {
        let spec = ProtocolSpec::new(Protocol::Unbroadened, 30.0);
        let search = SearchConfig::default_for(&spec);
        assert!(optimize_broadening(&spec, 0.7, &search, &small_grids(), None).is_err());
    }

    #[test]
    fn sweep_requires_ascending_depths() {
        let make = |d: f64| ProtocolSpec::new(Protocol::Unbroadened, d);
        let err = capacity_curve(&make, &[10.0, 5.0], 0.7, None, &small_grids(), None, false);
        assert!(err.is_err());
    }

    #[test]
    fn negligible_coupling_stores_nothing() {
        let make = |d: f64| ProtocolSpec::new(Protocol::Tcrib, d).with_delta0(10.0);
        let sweep =
            capacity_curve(&make, &[1e-6], 0.7, None, &small_grids(), None, false).unwrap();
        assert_eq!(sweep.points[0].n_modes, 0);
        assert!(sweep.points[0].error.is_none());
    }

    #[test]
    fn sweep_provenance_is_deterministic() {
        let make = |d: f64| ProtocolSpec::new(Protocol::Unbroadened, d);
        let grids = small_grids();
        let a = capacity_curve(&make, &[20.0, 40.0], 0.7, None, &grids, None, false).unwrap();
        let b = capacity_curve(&make, &[20.0, 40.0], 0.7, None, &grids, None, false).unwrap();
        assert_eq!(a.provenance, b.provenance);
        assert_eq!(a.points.len(), 2);
        assert!(a.points[0].n_modes <= a.points[1].n_modes);
    }
}
