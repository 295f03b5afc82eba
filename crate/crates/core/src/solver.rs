//! Maxwell-Bloch construction of the lCRIB storage Green's function.
//!
//! Integrates the linear two-level storage model with a longitudinally
//! varying detuning,
//!
//! ```text
//!   dA/dz   = -sqrt(d g) P
//!   dP/dtau = -(g + i Delta(z)) P + sqrt(d g) A,   Delta(z) = Delta0 (z - 1/2)
//! ```
//!
//! on `z in [0, 1]`, `A(0, tau) = A_in(tau)`, `P(z, 0) = 0`. The spatial
//! integration uses a collocation antiderivative matrix (Chebyshev-Lobatto by
//! default), the time stepping is explicit midpoint (second order). The
//! stored spin wave is `B(z) = P(z, t_end)`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::Error;
use crate::grid::{chebyshev_lobatto_grid, uniform_grid, Axis, Grid};
use crate::kernel::{DiscretizedKernel, KernelKind};
use crate::protocol::{Protocol, ProtocolSpec};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialBasis {
    /// Chebyshev-Lobatto collocation with the spectral antiderivative matrix.
    Chebyshev,
    /// Uniform nodes with a cumulative-trapezoid antiderivative; needed when
    /// the kernel will be Fourier-conjugated along z.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputBasis {
    /// Unit-area boxcar over each time cell (default).
    Boxcar,
    /// Unit-area pulse over the first step of each cell.
    Impulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeStepper {
    /// Explicit midpoint; the production method.
    Rk2,
    /// Classical fourth-order; reference oracle for convergence checks.
    Rk4,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Spatial collocation points.
    pub n_z: usize,
    /// Time steps across the window.
    pub n_t: usize,
    /// Storage window `(t_start, t_end)` in units of 1/gamma.
    pub t_window: (f64, f64),
    /// Input-basis time cells for the Green's function.
    pub n_cells: usize,
    pub input_basis: InputBasis,
    pub basis: SpatialBasis,
    pub stepper: TimeStepper,
    /// Fraction of the stability-limited time step actually used.
    pub cfl_safety: f64,
}

impl SolverConfig {
    /// Stiffness-limited maximum step for a protocol spec.
    pub fn cfl_limit(spec: &ProtocolSpec, cfl_safety: f64) -> f64 {
        let mut scale = (1.0 / spec.gamma).min(1.0 / (spec.d * spec.gamma));
        if spec.delta0 > 0.0 {
            scale = scale.min(1.0 / spec.delta0);
        }
        cfl_safety * scale
    }

    /// Default configuration for a spec: window `[0, 2/gamma]` (longer at
    /// small broadening so slow modes decay), step at the CFL limit rounded
    /// onto `n_cells` cells.
    pub fn auto(spec: &ProtocolSpec, n_z: usize, n_cells: usize) -> Self {
        let t_end = if spec.delta0 >= 10.0 * spec.gamma {
            2.0 / spec.gamma
        } else {
            4.0 / spec.gamma
        };
        Self::auto_with_window(spec, n_z, n_cells, (0.0, t_end))
    }

    pub fn auto_with_window(
        spec: &ProtocolSpec,
        n_z: usize,
        n_cells: usize,
        t_window: (f64, f64),
    ) -> Self {
        let span = t_window.1 - t_window.0;
        let cfl_safety = 0.5;
        let limit = Self::cfl_limit(spec, cfl_safety);
        let steps_per_cell = (span / (n_cells as f64) / limit).ceil().max(1.0) as usize;
        SolverConfig {
            n_z,
            n_t: steps_per_cell * n_cells,
            t_window,
            n_cells,
            input_basis: InputBasis::Boxcar,
            basis: SpatialBasis::Chebyshev,
            stepper: TimeStepper::Rk2,
            cfl_safety,
        }
    }

    fn validate(&self, spec: &ProtocolSpec) -> Result<()> {
        spec.validate()?;
        if self.n_z < 16 {
            return Err(Error::InvalidArgument("solver needs n_z >= 16".into()));
        }
        if !(self.t_window.1 > self.t_window.0) {
            return Err(Error::InvalidArgument("empty time window".into()));
        }
        if self.n_t == 0 || self.n_cells == 0 || self.n_t % self.n_cells != 0 {
            return Err(Error::InvalidArgument(
                "n_t must be a positive multiple of n_cells".into(),
            ));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument("cfl_safety must be in (0, 1]".into()));
        }
        let dt = self.dt();
        let limit = Self::cfl_limit(spec, self.cfl_safety);
        if dt > limit * (1.0 + 1e-9) {
            return Err(Error::CflViolation { dt, limit });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t_window.1 - self.t_window.0) / self.n_t as f64
    }
}

/// Spatial discretization: grid plus antiderivative-from-zero matrix.
pub struct SpatialOperator {
    pub grid: Grid,
    /// `(J f)(z_i) = int_0^{z_i} f(z') dz'` for f sampled on the grid.
    pub antiderivative: Array2<f64>,
}

impl SpatialOperator {
    pub fn new(basis: SpatialBasis, n_z: usize) -> Result<Self> {
        match basis {
            SpatialBasis::Uniform => {
                let grid = uniform_grid(n_z, 0.0, 1.0, Axis::Position)?;
                let h = 1.0 / (n_z - 1) as f64;
                let mut j = Array2::zeros((n_z, n_z));
                for i in 1..n_z {
                    // Cumulative trapezoid up to node i.
                    for l in 0..i {
                        j[[i, l]] += 0.5 * h;
                        j[[i, l + 1]] += 0.5 * h;
                    }
                }
                Ok(SpatialOperator {
                    grid,
                    antiderivative: j,
                })
            }
            SpatialBasis::Chebyshev => {
                let grid = chebyshev_lobatto_grid(n_z, 0.0, 1.0, Axis::Position)?;
                Ok(SpatialOperator {
                    grid,
                    antiderivative: chebyshev_antiderivative_matrix(n_z),
                })
            }
        }
    }
}

/// Antiderivative matrix on `n` Chebyshev-Lobatto nodes mapped to [0, 1],
/// nodes in ascending order: values -> Chebyshev coefficients ->
/// term-by-term antiderivative -> values, anchored at z = 0.
fn chebyshev_antiderivative_matrix(n: usize) -> Array2<f64> {
    let deg = n - 1;
    let pi = std::f64::consts::PI;
    // Ascending nodes correspond to x_j = -cos(pi j / deg); sample order in
    // the classical DCT is reversed, handled by index flips below.
    // coeff[k][j]: a_k from values at ascending nodes.
    let mut coeff = Array2::zeros((n, n));
    for k in 0..n {
        for j in 0..n {
            // Classical: a_k = (2/deg) sum'' f(cos(pi m/deg)) cos(pi k m/deg),
            // m = deg - j maps ascending index j to the classical order.
            let m = deg - j;
            let mut c = 2.0 / deg as f64 * (pi * (k * m) as f64 / deg as f64).cos();
            if m == 0 || m == deg {
                c *= 0.5;
            }
            if k == 0 || k == deg {
                c *= 0.5;
            }
            coeff[[k, j]] = c;
        }
    }
    // Antiderivative in coefficient space: if F = int f, F's Chebyshev
    // coefficients b satisfy b_k = (a_{k-1} - a_{k+1}) / (2k), k >= 1, with
    // the constant coefficient entering doubled (int T_0 = T_1).
    let mut anti = Array2::zeros((n + 1, n));
    for k in 1..=n {
        for j in 0..n {
            let lower = if k == 1 {
                2.0 * coeff[[0, j]]
            } else {
                coeff[[k - 1, j]]
            };
            let upper = if k + 1 < n { coeff[[k + 1, j]] } else { 0.0 };
            anti[[k, j]] = (lower - upper) / (2.0 * k as f64);
        }
    }
    // Evaluate sum_k b_k T_k at each ascending node and subtract the value at
    // x = -1 (z = 0); the interval map [0,1] -> [-1,1] contributes 1/2.
    let mut jmat = Array2::zeros((n, n));
    for i in 0..n {
        let x = -(pi * i as f64 / deg as f64).cos();
        for j in 0..n {
            let mut val = 0.0;
            let mut at_zero = 0.0;
            // T_k via recurrence at x and at -1 (T_k(-1) = (-1)^k).
            let mut t_prev = 1.0;
            let mut t_cur = x;
            for k in 1..=n {
                val += anti[[k, j]] * t_cur;
                at_zero += anti[[k, j]] * if k % 2 == 0 { 1.0 } else { -1.0 };
                let t_next = 2.0 * x * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = t_next;
            }
            jmat[[i, j]] = 0.5 * (val - at_zero);
        }
    }
    jmat
}

struct Propagator<'a> {
    op: &'a SpatialOperator,
    coupling: f64,
    decay: Vec<Complex64>,
}

impl<'a> Propagator<'a> {
    fn new(spec: &'a ProtocolSpec, op: &'a SpatialOperator) -> Self {
        let coupling = (spec.d * spec.gamma).sqrt();
        let decay = op
            .grid
            .nodes
            .iter()
            .map(|&z| Complex64::new(spec.gamma, spec.delta0 * (z - 0.5)))
            .collect();
        Propagator { op, coupling, decay }
    }

    /// Field profile A(z) given the polarization state and boundary value.
    fn field(&self, p: &[Complex64], a_in: Complex64) -> Vec<Complex64> {
        let n = p.len();
        let j = &self.op.antiderivative;
        let mut a = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            let row = j.row(i);
            for (l, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    acc += w * p[l];
                }
            }
            a[i] = a_in - self.coupling * acc;
        }
        a
    }

    fn rhs(&self, p: &[Complex64], a_in: Complex64) -> (Vec<Complex64>, Complex64) {
        let a = self.field(p, a_in);
        let out = a[p.len() - 1];
        let dp = (0..p.len())
            .map(|i| -self.decay[i] * p[i] + self.coupling * a[i])
            .collect();
        (dp, out)
    }
}

/// Outcome of a signal propagation: the stored spin wave and the transmitted
/// envelope sampled at every time step.
pub struct PropagationResult {
    pub zgrid: Grid,
    pub spin_wave: Vec<Complex64>,
    pub transmitted: Vec<Complex64>,
    /// Step-grid times at which `transmitted` is sampled.
    pub times: Vec<f64>,
    /// Accumulated polarization-decay loss `2 gamma int int |P|^2 dz dtau`.
    pub decay_loss: f64,
}

/// Propagate a signal envelope through the medium.
///
/// `a_in` is sampled on the step grid: `n_t + 1` values at times
/// `t_start + k dt`. Returns the spin wave at `t_end`, the transmitted field
/// on the step grid, and the bookkeeping decay loss.
pub fn propagate_signal(
    spec: &ProtocolSpec,
    a_in: &[Complex64],
    cfg: &SolverConfig,
) -> Result<PropagationResult> {
    if a_in.len() != cfg.n_t + 1 {
        return Err(Error::InvalidArgument(format!(
            "A_in must have n_t + 1 = {} samples, got {}",
            cfg.n_t + 1,
            a_in.len()
        )));
    }
    // Linear interpolation for stage times between step samples.
    let input = |k: usize, frac: f64| -> Complex64 {
        if frac == 0.0 {
            a_in[k]
        } else {
            a_in[k] * (1.0 - frac) + a_in[k + 1] * frac
        }
    };
    propagate_with(spec, &input, cfg)
}

/// Propagate with the input given as a function of (step index, fraction of
/// a step); exact for inputs with discontinuities at step boundaries.
pub fn propagate_with(
    spec: &ProtocolSpec,
    input: &dyn Fn(usize, f64) -> Complex64,
    cfg: &SolverConfig,
) -> Result<PropagationResult> {
    if spec.protocol != Protocol::LcribNumeric {
        return Err(Error::InvalidSpec(format!(
            "solver requires protocol lcrib-numeric, got {}",
            spec.protocol.name()
        )));
    }
    cfg.validate(spec)?;
    let op = SpatialOperator::new(cfg.basis, cfg.n_z)?;
    let mut state = run(spec, &op, cfg, input, None)?;
    Ok(PropagationResult {
        zgrid: op.grid,
        spin_wave: std::mem::take(&mut state.p),
        transmitted: state.transmitted,
        times: (0..=cfg.n_t)
            .map(|k| cfg.t_window.0 + k as f64 * cfg.dt())
            .collect(),
        decay_loss: state.decay_loss,
    })
}

struct RunState {
    p: Vec<Complex64>,
    transmitted: Vec<Complex64>,
    decay_loss: f64,
    snapshots: Vec<Vec<Complex64>>,
}

/// Time-march the polarization. `input(k, frac)` returns A_in at time
/// `t_start + (k + frac) dt`. If `snapshot_every` is set, records P after
/// every such number of steps.
fn run(
    spec: &ProtocolSpec,
    op: &SpatialOperator,
    cfg: &SolverConfig,
    input: &dyn Fn(usize, f64) -> Complex64,
    snapshot_every: Option<usize>,
) -> Result<RunState> {
    let n = cfg.n_z;
    let dt = cfg.dt();
    let prop = Propagator::new(spec, op);
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    let mut transmitted = Vec::with_capacity(cfg.n_t + 1);
    let mut decay_loss = 0.0;
    let mut snapshots = Vec::new();
    let norm_p = |p: &[Complex64]| -> f64 {
        op.grid
            .weights
            .iter()
            .zip(p)
            .map(|(w, v)| w * v.norm_sqr())
            .sum()
    };
    let (_, out0) = prop.rhs(&p, input(0, 0.0));
    transmitted.push(out0);
    for k in 0..cfg.n_t {
        let loss_before = norm_p(&p);
        match cfg.stepper {
            TimeStepper::Rk2 => {
                let (k1, _) = prop.rhs(&p, input(k, 0.0));
                let mid: Vec<Complex64> =
                    (0..n).map(|i| p[i] + 0.5 * dt * k1[i]).collect();
                let (k2, _) = prop.rhs(&mid, input(k, 0.5));
                for i in 0..n {
                    p[i] += dt * k2[i];
                }
            }
            TimeStepper::Rk4 => {
                let (k1, _) = prop.rhs(&p, input(k, 0.0));
                let s1: Vec<Complex64> = (0..n).map(|i| p[i] + 0.5 * dt * k1[i]).collect();
                let (k2, _) = prop.rhs(&s1, input(k, 0.5));
                let s2: Vec<Complex64> = (0..n).map(|i| p[i] + 0.5 * dt * k2[i]).collect();
                let (k3, _) = prop.rhs(&s2, input(k, 0.5));
                let s3: Vec<Complex64> = (0..n).map(|i| p[i] + dt * k3[i]).collect();
                let (k4, _) = prop.rhs(&s3, input(k, 1.0));
                for i in 0..n {
                    p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        if p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SolverDiverged { step: k });
        }
        decay_loss += 2.0 * spec.gamma * 0.5 * (loss_before + norm_p(&p)) * dt;
        let (_, out) = prop.rhs(&p, input(k + 1, 0.0));
        transmitted.push(out);
        if let Some(every) = snapshot_every {
            if (k + 1) % every == 0 {
                snapshots.push(p.clone());
            }
        }
    }
    Ok(RunState {
        p,
        transmitted,
        decay_loss,
        snapshots,
    })
}

/// Green's function K(z, tau) of lCRIB storage, columns indexed by input time
/// cells.
///
/// The governing system is autonomous, so the response to the basis function
/// of cell `j`, measured at `t_end`, equals the response to the same function
/// placed in the first cell after an elapsed time `t_end - t_j`. One
/// propagation with snapshots therefore yields every column exactly.
pub fn lcrib_greens_function(spec: &ProtocolSpec, cfg: &SolverConfig) -> Result<DiscretizedKernel> {
    if spec.protocol != Protocol::LcribNumeric {
        return Err(Error::InvalidSpec(format!(
            "solver requires protocol lcrib-numeric, got {}",
            spec.protocol.name()
        )));
    }
    cfg.validate(spec)?;
    let op = SpatialOperator::new(cfg.basis, cfg.n_z)?;
    let steps_per_cell = cfg.n_t / cfg.n_cells;
    let dt = cfg.dt();
    let cell_width = dt * steps_per_cell as f64;
    // Unit-area basis input occupying the first cell.
    let amp = match cfg.input_basis {
        InputBasis::Boxcar => 1.0 / cell_width,
        InputBasis::Impulse => 1.0 / dt,
    };
    let active_steps = match cfg.input_basis {
        InputBasis::Boxcar => steps_per_cell,
        InputBasis::Impulse => 1,
    };
    let input = move |k: usize, frac: f64| -> Complex64 {
        let t = k as f64 + frac;
        if t < active_steps as f64 {
            Complex64::new(amp, 0.0)
        } else if t == active_steps as f64 {
            // Trailing edge: the midpoint interpolation never lands here with
            // frac in {0, 0.5, 1}, treat as outside.
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let state = run(spec, &op, cfg, &input, Some(steps_per_cell))?;
    // snapshot[s] = P after (s+1) cells of elapsed time; column j needs
    // elapsed (n_cells - j) cells.
    let n_z = cfg.n_z;
    let mut values = Array2::zeros((n_z, cfg.n_cells));
    for j in 0..cfg.n_cells {
        let snap = &state.snapshots[cfg.n_cells - 1 - j];
        for i in 0..n_z {
            values[[i, j]] = snap[i];
        }
    }
    // Time grid: cell centers, cell-width weights.
    let t0 = cfg.t_window.0;
    let tgrid = Grid {
        nodes: (0..cfg.n_cells)
            .map(|j| t0 + (j as f64 + 0.5) * cell_width)
            .collect(),
        weights: vec![cell_width; cfg.n_cells],
        axis: Axis::Time,
        bounds: (t0, cfg.t_window.1),
    };
    DiscretizedKernel::new(
        values,
        op.grid,
        tgrid,
        KernelKind::Storage,
        format!(
            "lcrib-numeric d={} delta0={} nz={} cells={} dt={:.3e}",
            spec.d, spec.delta0, cfg.n_z, cfg.n_cells, dt
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lcrib_spec(d: f64, delta0: f64) -> ProtocolSpec {
        ProtocolSpec::new(Protocol::LcribNumeric, d).with_delta0(delta0)
    }

    #[test]
    fn chebyshev_antiderivative_is_spectrally_accurate() {
        let op = SpatialOperator::new(SpatialBasis::Chebyshev, 48).unwrap();
        // int_0^z cos(5 z') dz' = sin(5 z)/5.
        let f: Vec<Complex64> = op
            .grid
            .nodes
            .iter()
            .map(|&z| Complex64::new((5.0 * z).cos(), 0.0))
            .collect();
        for (i, &z) in op.grid.nodes.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, &w) in op.antiderivative.row(i).iter().enumerate() {
                acc += w * f[l];
            }
            assert_relative_eq!(acc.re, (5.0 * z).sin() / 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_antiderivative_is_second_order() {
        let op = SpatialOperator::new(SpatialBasis::Uniform, 401).unwrap();
        let f: Vec<Complex64> = op
            .grid
            .nodes
            .iter()
            .map(|&z| Complex64::new((3.0 * z).cos(), 0.0))
            .collect();
        let i = 400;
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, &w) in op.antiderivative.row(i).iter().enumerate() {
            acc += w * f[l];
        }
        assert_relative_eq!(acc.re, 3f64.sin() / 3.0, epsilon = 1e-5);
    }

    #[test]
    fn zero_input_stays_zero() {
        let spec = lcrib_spec(50.0, 40.0);
        let cfg = SolverConfig::auto(&spec, 32, 16);
        let a_in = vec![Complex64::new(0.0, 0.0); cfg.n_t + 1];
        let r = propagate_signal(&spec, &a_in, &cfg).unwrap();
        assert!(r.spin_wave.iter().all(|z| z.norm() == 0.0));
        assert!(r.transmitted.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn transparent_at_negligible_depth() {
        let spec = lcrib_spec(1e-12, 0.0);
        let mut cfg = SolverConfig::auto(&spec, 32, 16);
        cfg.t_window = (0.0, 1.0);
        cfg.n_t = 800;
        let a_in: Vec<Complex64> = (0..=cfg.n_t)
            .map(|k| {
                let t = k as f64 * cfg.dt();
                Complex64::new((-(t - 0.5) * (t - 0.5) / 0.01).exp(), 0.0)
            })
            .collect();
        let r = propagate_signal(&spec, &a_in, &cfg).unwrap();
        for (a, b) in a_in.iter().zip(&r.transmitted) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn energy_bookkeeping_balances() {
        let spec = lcrib_spec(30.0, 100.0);
        let mut cfg = SolverConfig::auto(&spec, 200, 50);
        cfg.t_window = (0.0, 1.0);
        let spc = cfg.n_t / cfg.n_cells;
        cfg.n_t = spc.max(1) * cfg.n_cells;
        let dt = cfg.dt();
        let a_in: Vec<Complex64> = (0..=cfg.n_t)
            .map(|k| {
                let t = k as f64 * dt;
                Complex64::new((-(t - 0.3) * (t - 0.3) / 0.005).exp(), 0.0)
            })
            .collect();
        let r = propagate_signal(&spec, &a_in, &cfg).unwrap();
        // Trapezoid norms on the step grid.
        let step_norm = |v: &[Complex64]| -> f64 {
            let mut s = 0.0;
            for k in 0..v.len() - 1 {
                s += 0.5 * (v[k].norm_sqr() + v[k + 1].norm_sqr()) * dt;
            }
            s
        };
        let e_in = step_norm(&a_in);
        let e_out = step_norm(&r.transmitted);
        let e_spin: f64 = r
            .zgrid
            .weights
            .iter()
            .zip(&r.spin_wave)
            .map(|(w, v)| w * v.norm_sqr())
            .sum();
        assert!(
            e_in >= e_out + e_spin - 1e-6 * e_in,
            "energy gained: in {e_in}, out {e_out}, spin {e_spin}"
        );
        // Including the tracked decay loss the balance closes.
        let balance = (e_out + e_spin + r.decay_loss) / e_in;
        assert!(
            (balance - 1.0).abs() < 0.02,
            "balance off by {:.3}%",
            (balance - 1.0) * 100.0
        );
    }

    #[test]
    fn greens_function_columns_match_direct_propagation() {
        // Column j of the kernel equals the response to the j-th boxcar.
        let spec = lcrib_spec(20.0, 30.0);
        let cfg = SolverConfig::auto_with_window(&spec, 48, 8, (0.0, 0.8));
        let kernel = lcrib_greens_function(&spec, &cfg).unwrap();
        let spc = cfg.n_t / cfg.n_cells;
        let cell_width = cfg.dt() * spc as f64;
        for j in [0usize, 3, 7] {
            let input = move |k: usize, frac: f64| -> Complex64 {
                let t = k as f64 + frac;
                if t >= (j * spc) as f64 && t < ((j + 1) * spc) as f64 {
                    Complex64::new(1.0 / cell_width, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            };
            let r = propagate_with(&spec, &input, &cfg).unwrap();
            for i in 0..cfg.n_z {
                assert!(
                    (kernel.values[[i, j]] - r.spin_wave[i]).norm() < 1e-10,
                    "column {j} mismatch at node {i}"
                );
            }
        }
    }

    #[test]
    fn greens_function_is_linear_in_the_input() {
        let spec = lcrib_spec(20.0, 30.0);
        let cfg = SolverConfig::auto_with_window(&spec, 48, 8, (0.0, 0.8));
        let kernel = lcrib_greens_function(&spec, &cfg).unwrap();
        let spc = cfg.n_t / cfg.n_cells;
        let cell_width = cfg.dt() * spc as f64;
        // Superposition of two basis inputs.
        let (j1, j2) = (1usize, 5usize);
        let input = move |k: usize, frac: f64| -> Complex64 {
            let t = k as f64 + frac;
            let mut v = Complex64::new(0.0, 0.0);
            if t >= (j1 * spc) as f64 && t < ((j1 + 1) * spc) as f64 {
                v += Complex64::new(1.0 / cell_width, 0.0);
            }
            if t >= (j2 * spc) as f64 && t < ((j2 + 1) * spc) as f64 {
                v += Complex64::new(0.7 / cell_width, 0.0);
            }
            v
        };
        let r = propagate_with(&spec, &input, &cfg).unwrap();
        for i in 0..cfg.n_z {
            let expect = kernel.values[[i, j1]] + 0.7 * kernel.values[[i, j2]];
            assert!((expect - r.spin_wave[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let spec = lcrib_spec(100.0, 500.0);
        let mut cfg = SolverConfig::auto(&spec, 32, 8);
        cfg.n_t = cfg.n_cells; // absurdly coarse step
        let a_in = vec![Complex64::new(0.0, 0.0); cfg.n_t + 1];
        assert!(matches!(
            propagate_signal(&spec, &a_in, &cfg),
            Err(Error::CflViolation { .. })
        ));
    }
}
