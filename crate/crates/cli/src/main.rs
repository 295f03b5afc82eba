// Command-line surface over the memcap library: single-point spectra and
// capacities, depth sweeps, and scaling-law fits, emitted as CSV, JSON or a
// minimal SVG chart. Exit codes: 0 success, 2 validation error, 3 numerical
// failure.
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use memcap::error::Error;
use memcap::protocol::{Protocol, ProtocolSpec};
use memcap::study::{
    capacity_curve, evaluate, fit_scaling, optimize_broadening_full, GridConfig, ScalingModel,
    SearchConfig, SweepResult,
};

#[derive(Parser)]
#[command(name = "memcap", about = "Multimode memory capacity calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singular spectrum and per-mode efficiencies at one parameter point.
    Spectrum(PointArgs),
    /// Mode capacity (threshold rule) at one parameter point.
    Capacity(PointArgs),
    /// Capacity versus depth over a d-range.
    Sweep(SweepArgs),
    /// Fit a scaling model to a sweep CSV.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Unbroadened,
    Tcrib,
    LcribNumeric,
    LcribAnalytic,
    Raman,
    Afc,
}

impl ProtocolArg {
    fn protocol(self) -> Protocol {
        match self {
            ProtocolArg::Unbroadened => Protocol::Unbroadened,
            ProtocolArg::Tcrib => Protocol::Tcrib,
            ProtocolArg::LcribNumeric => Protocol::LcribNumeric,
            ProtocolArg::LcribAnalytic => Protocol::LcribAnalytic,
            ProtocolArg::Raman => Protocol::Raman,
            ProtocolArg::Afc => Protocol::Afc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Sqrt,
    Linear,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// Broadening width Delta0 in units of gamma.
    #[arg(long)]
    delta0: Option<f64>,
    /// Optimize Delta0 per point instead of using --delta0.
    #[arg(long)]
    optimize_delta0: bool,
    /// AFC tooth count.
    #[arg(long, short = 'M')]
    m_teeth: Option<u32>,
    /// AFC finesse; with --M it fixes Delta0 = 2 gamma F (M - 1).
    #[arg(long)]
    finesse: Option<f64>,
    /// Capacity threshold.
    #[arg(long, default_value_t = 0.7)]
    theta: f64,
    #[arg(long)]
    grid_nz: Option<usize>,
    #[arg(long)]
    grid_nt: Option<usize>,
    #[arg(long)]
    grid_nw: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Re-evaluate on doubled grids and report whether N is stable.
    #[arg(long)]
    seed_check: bool,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Optical depth (per tooth for afc).
    #[arg(long)]
    d: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Depth range lo:hi:steps.
    #[arg(long)]
    d_range: String,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV path, or - for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long, value_enum)]
    model: ModelArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::Capacity(a) => cmd_capacity(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Fit(a) => cmd_fit(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Validation problems are the caller's fault (2); the rest are numerical (3).
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_)
        | Error::InvalidSpec(_)
        | Error::KindMismatch { .. }
        | Error::GridMismatch(_)
        | Error::InsufficientPoints(_) => 2,
        _ => 3,
    }
}

fn build_spec(common: &CommonArgs, d: f64) -> Result<ProtocolSpec, Error> {
    let protocol = common.protocol.protocol();
    let mut spec = match protocol {
        Protocol::Raman => ProtocolSpec::raman_reference(d, common.delta0.unwrap_or(0.0)),
        Protocol::Afc => {
            let m = common.m_teeth.ok_or_else(|| {
                Error::InvalidArgument("afc requires --M (tooth count >= 1)".into())
            })?;
            let finesse = common.finesse.unwrap_or(40.0);
            ProtocolSpec::afc_from_finesse(d, m, finesse)
        }
        _ => ProtocolSpec::new(protocol, d),
    };
    if protocol != Protocol::Afc {
        if let Some(delta0) = common.delta0 {
            spec = spec.with_delta0(delta0);
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn grids(common: &CommonArgs) -> GridConfig {
    let mut g = GridConfig::default();
    if let Some(n) = common.grid_nz {
        g.n_z = n;
    }
    if let Some(n) = common.grid_nt {
        g.n_t = n;
    }
    if let Some(n) = common.grid_nw {
        g.n_w = n;
    }
    g
}

/// Evaluate one point, optimizing Delta0 when asked. Returns the spec
/// actually evaluated (with the Delta0 that was used).
fn evaluate_point(
    common: &CommonArgs,
    d: f64,
) -> Result<(ProtocolSpec, memcap::study::Evaluation), Error> {
    let spec = build_spec(common, d)?;
    let g = grids(common);
    let cache = common.cache_dir.as_deref();
    if common.optimize_delta0 {
        let search = SearchConfig::default_for(&spec);
        let opt = optimize_broadening_full(&spec, common.theta, &search, &g, cache)?;
        let spec = spec.with_delta0(opt.delta0);
        Ok((spec, opt.eval))
    } else {
        let eval = evaluate(&spec, common.theta, &g, cache)?;
        Ok((spec, eval))
    }
}

fn stability(common: &CommonArgs, spec: &ProtocolSpec, n_modes: usize) -> Result<Option<bool>, Error> {
    if !common.seed_check {
        return Ok(None);
    }
    let refined = evaluate(
        spec,
        common.theta,
        &grids(common).refined(2),
        common.cache_dir.as_deref(),
    )?;
    Ok(Some(refined.capacity.n_modes == n_modes))
}

fn cmd_spectrum(args: &PointArgs) -> Result<(), Error> {
    let (spec, eval) = evaluate_point(&args.common, args.d)?;
    let stable = stability(&args.common, &spec, eval.capacity.n_modes)?;
    match args.common.format {
        Format::Csv => {
            println!("k,sigma,efficiency");
            for (i, (s, eff)) in eval
                .spectrum
                .values
                .iter()
                .zip(&eval.capacity.efficiencies)
                .enumerate()
            {
                println!("{},{},{}", i + 1, s, eff);
            }
        }
        Format::Json => {
            let doc = serde_json::json!({
                "spec": spec,
                "theta": args.common.theta,
                "sigma": eval.spectrum.values,
                "efficiency": eval.capacity.efficiencies,
                "resolution": eval.spectrum.resolution,
                "warnings": eval.spectrum.warnings,
                "stable": stable,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        Format::Svg => {
            let pts: Vec<(f64, f64)> = eval
                .capacity
                .efficiencies
                .iter()
                .enumerate()
                .map(|(i, &e)| ((i + 1) as f64, e))
                .collect();
            println!("{}", svg_chart(&pts, "mode k", "efficiency"));
        }
    }
    Ok(())
}

fn cmd_capacity(args: &PointArgs) -> Result<(), Error> {
    let (spec, eval) = evaluate_point(&args.common, args.d)?;
    let stable = stability(&args.common, &spec, eval.capacity.n_modes)?;
    match args.common.format {
        Format::Csv => {
            println!("k,lambda_bar");
            for (i, l) in eval.capacity.lambda_bar.iter().enumerate() {
                println!("{},{}", i + 1, l);
            }
        }
        _ => {
            let doc = serde_json::json!({
                "spec": spec,
                "theta": args.common.theta,
                "n_modes": eval.capacity.n_modes,
                "lambda_bar": eval.capacity.lambda_bar,
                "resolution": eval.spectrum.resolution,
                "warnings": eval.spectrum.warnings,
                "stable": stable,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    Ok(())
}

fn parse_range(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::InvalidArgument(format!("bad --d-range '{text}', expected lo:hi:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    if steps < 1 || !(hi > lo) {
        return Err(bad());
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let h = (hi - lo) / (steps - 1) as f64;
    Ok((0..steps).map(|i| lo + i as f64 * h).collect())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let common = &args.common;
    let d_list = parse_range(&args.d_range)?;
    build_spec(common, d_list[0])?;
    let g = grids(common);
    let search = if common.optimize_delta0 {
        Some(SearchConfig::default_for(&build_spec(common, d_list[0])?))
    } else {
        None
    };
    let make_spec = |d: f64| build_spec(common, d).expect("validated above");
    let sweep = capacity_curve(
        &make_spec,
        &d_list,
        common.theta,
        search.as_ref(),
        &g,
        common.cache_dir.as_deref(),
        common.seed_check,
    )?;
    emit_sweep(&sweep, common.format);
    Ok(())
}

fn emit_sweep(sweep: &SweepResult, format: Format) {
    match format {
        Format::Csv => {
            println!("d,delta0,n_modes,lambda1,sigma1,stable");
            for p in &sweep.points {
                let stable = p.stable.map_or(String::new(), |s| s.to_string());
                println!(
                    "{},{},{},{},{},{}",
                    p.d, p.delta0_used, p.n_modes, p.lambda1, p.sigma1, stable
                );
            }
        }
        Format::Json => {
            println!("{}", serde_json::to_string_pretty(sweep).unwrap());
        }
        Format::Svg => {
            let pts: Vec<(f64, f64)> = sweep
                .points
                .iter()
                .map(|p| (p.d, p.n_modes as f64))
                .collect();
            println!("{}", svg_chart(&pts, "d", "N"));
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), Error> {
    let text = if args.input == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::InvalidArgument(format!("reading stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(&args.input)
            .map_err(|e| Error::InvalidArgument(format!("reading {}: {e}", args.input)))?
    };
    let mut points = Vec::new();
    for (row, line) in text.lines().enumerate() {
        if row == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = (|| -> Option<(f64, f64)> {
            let d: f64 = fields.first()?.parse().ok()?;
            let n: f64 = fields.get(2)?.parse().ok()?;
            Some((d, n))
        })();
        let (d, n) = parsed.ok_or_else(|| {
            Error::InvalidArgument(format!("malformed sweep CSV at row {}: '{line}'", row + 1))
        })?;
        points.push((d, n));
    }
    let model = match args.model {
        ModelArg::Sqrt => ScalingModel::Sqrt,
        ModelArg::Linear => ScalingModel::Linear,
    };
    let fit = fit_scaling(&points, model)?;
    println!("{}", serde_json::to_string_pretty(&fit).unwrap());
    Ok(())
}

/// Minimal static SVG line chart: axes, tick labels, one polyline.
fn svg_chart(points: &[(f64, f64)], xlabel: &str, ylabel: &str) -> String {
    let (w, h, ml, mb) = (640.0, 480.0, 60.0, 40.0);
    let xmax = points.iter().map(|p| p.0).fold(1.0_f64, f64::max);
    let ymax = points.iter().map(|p| p.1).fold(1.0_f64, f64::max);
    let sx = |x: f64| ml + x / xmax * (w - ml - 20.0);
    let sy = |y: f64| (h - mb) - y / ymax * (h - mb - 20.0);
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
            "<line x1=\"{ml}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<line x1=\"{ml}\" y1=\"{yb}\" x2=\"{ml}\" y2=\"20\" stroke=\"black\"/>\n",
            "<text x=\"{xmid}\" y=\"{h}\" text-anchor=\"middle\">{xlabel}</text>\n",
            "<text x=\"15\" y=\"{ymid}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {ymid})\">{ylabel}</text>\n",
            "<text x=\"{xr}\" y=\"{yb2}\">{xmax}</text>\n",
            "<text x=\"20\" y=\"30\">{ymax}</text>\n",
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{path}\"/>\n",
            "</svg>"
        ),
        w = w,
        h = h,
        ml = ml,
        yb = h - mb,
        yb2 = h - mb + 16.0,
        xr = w - 20.0,
        xmid = (ml + w) / 2.0,
        ymid = (h - mb) / 2.0,
        xlabel = xlabel,
        ylabel = ylabel,
        xmax = xmax,
        ymax = ymax,
        path = path.join(" ")
    )
}
