use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nystrom_filter::io::TargetFormat;
use nystrom_filter::{
    brute_force_filter, build_guide, fast_filter, fit_guide, kernel_error, load_image, psnr, save_image, Error,
    FilterMode, FilterParams, FilterReport, Image, QualityScore, RangeKernel, SpatialKernel,
};
use serde_json::Value;

use crate::args::{
    BenchArgs, BilateralArgs, BlfArgs, CompareArgs, DiagArgs, InputArgs, LandmarkArgs, NlmArgs, NlmShape,
    OracleArgs, SpatialChoice,
};
use crate::report::Report;

/// Exit status and message of a failed command.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Decode { .. } | Error::UnsupportedFormat(_) | Error::HeaderMismatch { .. } => {
                EXIT_IO
            }
            Error::DimensionMismatch(_) | Error::InvalidParameter(_) | Error::TooLarge { .. } => EXIT_USAGE,
            Error::NonFinite(_) | Error::Degenerate(_) => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path, input: &InputArgs) -> Result<Image, Failure> {
    let img = load_image(path)?;
    Ok(match input.range_max {
        Some(r) => img.with_range_max(r)?,
        None => img,
    })
}

/// Fails before any computation if `output` cannot hold an image shaped like `like`.
fn check_output(output: &Path, like: &Image) -> CmdResult {
    TargetFormat::from_path(output)?.check(like)?;
    Ok(())
}

fn write_report(report: &Report, path: Option<&Path>) -> CmdResult {
    if let Some(path) = path {
        fs::write(path, report.render_for(path)).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("i/o error on {}: {e}", path.display()),
        })?;
    }
    Ok(())
}

/// Bilateral defaults `(sigma, theta, m0)`: color settings, or the
/// hyperspectral ones for inputs with more than three channels.
fn bilateral_defaults(channels: usize) -> (f64, f64, usize) {
    if channels > 3 {
        (3.0, 100.0, 32)
    } else {
        (5.0, 50.0, 15)
    }
}

fn spatial_kernel(choice: SpatialChoice, sigma: f64) -> Result<SpatialKernel, Failure> {
    Ok(match choice {
        SpatialChoice::Fir => SpatialKernel::gaussian_fir_3sigma(sigma)?,
        SpatialChoice::Recursive => SpatialKernel::gaussian_recursive(sigma)?,
    })
}

fn apply_landmark_args(params: &mut FilterParams, args: &LandmarkArgs) {
    if let Some(m0) = args.m0 {
        params.m0 = m0;
    }
    params.seed = args.seed;
    params.strategy = args.strategy;
    params.max_iter = args.max_iter;
    params.eps_drop = args.eps_drop;
}

fn bilateral_params(
    b: &BilateralArgs,
    channels: usize,
    spatial: SpatialChoice,
    landmarks: Option<&LandmarkArgs>,
) -> Result<FilterParams, Failure> {
    let (sigma0, theta0, m00) = bilateral_defaults(channels);
    let sigma = b.sigma.unwrap_or(sigma0);
    let theta = b.theta.unwrap_or(theta0);
    let mut params = FilterParams::new(spatial_kernel(spatial, sigma)?, RangeKernel::gaussian(theta)?, m00);
    if let Some(l) = landmarks {
        apply_landmark_args(&mut params, l);
    }
    params.mode = if b.guide.is_some() {
        FilterMode::Joint
    } else {
        FilterMode::Bilateral
    };
    params.validate()?;
    Ok(params)
}

fn nlm_params(shape: &NlmShape, theta: Option<f64>) -> Result<FilterParams, Failure> {
    if !(shape.noise.is_finite() && shape.noise > 0.0) {
        return Err(Failure::usage(format!("--noise must be positive, got {}", shape.noise)));
    }
    let mut params = FilterParams::nlm_defaults(shape.noise)?;
    if let Some(t) = theta {
        params.range = RangeKernel::gaussian(t)?;
    }
    params.spatial = SpatialKernel::box_kernel(shape.search_radius);
    params.mode = FilterMode::Nlm {
        patch_radius: shape.patch_radius,
        pca_dim: shape.pca_dim,
    };
    params.validate()?;
    Ok(params)
}

fn spatial_label(k: &SpatialKernel) -> &'static str {
    match k {
        SpatialKernel::Box { .. } => "box",
        SpatialKernel::GaussianFir { .. } => "gaussian-fir",
        SpatialKernel::GaussianRecursive { .. } => "gaussian-recursive",
    }
}

fn spatial_sigma(k: &SpatialKernel) -> Value {
    match *k {
        SpatialKernel::Box { .. } => Value::Null,
        SpatialKernel::GaussianFir { sigma, .. } | SpatialKernel::GaussianRecursive { sigma, .. } => sigma.into(),
    }
}

fn mode_label(mode: FilterMode) -> &'static str {
    match mode {
        FilterMode::Bilateral => "bilateral",
        FilterMode::Joint => "joint",
        FilterMode::Nlm { .. } => "nlm",
    }
}

fn base_report(command: &str, input: &Path, output: &Path, f: &Image, guide: &Image, params: &FilterParams) -> Report {
    let mut r = Report::new(command);
    r.set("input", input.display().to_string());
    r.set("output", output.display().to_string());
    r.set("mode", mode_label(params.mode));
    r.set("width", f.width());
    r.set("height", f.height());
    r.set("channels", f.channels());
    r.set("guide_channels", guide.channels());
    r.set("range_max", f.range_max());
    r.set("spatial", spatial_label(&params.spatial));
    r.set("sigma", spatial_sigma(&params.spatial));
    r.set("radius", params.spatial.radius());
    r.set("theta", params.range.theta());
    if let FilterMode::Nlm { patch_radius, pca_dim } = params.mode {
        r.set("patch_radius", patch_radius);
        r.set("pca_dim", pca_dim);
    }
    r
}

fn fast_report(mut r: Report, params: &FilterParams, rep: &FilterReport) -> Report {
    r.set("m0", params.m0);
    r.set("strategy", params.strategy.to_string());
    r.set("seed", params.seed);
    r.set("max_iter", params.max_iter);
    r.set("eps_drop", params.eps_drop);
    r.set("retained_rank", rep.retained_rank);
    r.set("quant_error", rep.quant_error);
    r.set("min_denominator", rep.min_denominator);
    r.set("guarded_pixels", rep.guarded_pixels);
    r.set("convolutions", rep.convolutions);
    r
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn describe(f: &Image, params: &FilterParams) -> String {
    let spatial = match params.spatial {
        SpatialKernel::Box { radius } => format!("box S={radius}"),
        SpatialKernel::GaussianFir { sigma, radius } => format!("sigma {sigma} (fir, S={radius})"),
        SpatialKernel::GaussianRecursive { sigma, .. } => format!("sigma {sigma} (recursive)"),
    };
    format!(
        "{}x{}x{}, {}, {spatial}, theta {}",
        f.width(),
        f.height(),
        f.channels(),
        mode_label(params.mode),
        params.range.theta()
    )
}

fn print_fast_summary(command: &str, f: &Image, params: &FilterParams, rep: &FilterReport) {
    let t = &rep.timings;
    eprintln!(
        "{command}: {}, m0 {} ({}, seed {})",
        describe(f, params),
        params.m0,
        params.strategy,
        params.seed
    );
    for (name, d) in [
        ("clustering", t.clustering),
        ("eigendecomposition", t.eigendecomposition),
        ("extrapolation", t.extrapolation),
        ("convolutions", t.convolutions),
        ("normalization", t.normalization),
        ("total", t.total()),
    ] {
        eprintln!("  {name:<20}{:>10.2} ms", ms(d));
    }
    eprintln!(
        "  retained rank {}, quantization error {:.4e}, {} convolutions, {} guarded pixels",
        rep.retained_rank, rep.quant_error, rep.convolutions, rep.guarded_pixels
    );
}

pub fn blf(a: &BlfArgs) -> CmdResult {
    let f = load(&a.input, &a.input_args)?;
    let external = a.bilateral.guide.as_deref().map(|p| load(p, &a.input_args)).transpose()?;
    check_output(&a.output, &f)?;
    let params = bilateral_params(&a.bilateral, f.channels(), a.spatial, Some(&a.landmarks))?;
    let guide = build_guide(&f, params.mode, external.as_ref())?;
    let rep = fast_filter(&f, &guide, &params)?;
    print_fast_summary("blf", &f, &params, &rep);

    let mut report = fast_report(base_report("blf", &a.input, &a.output, &f, &guide, &params), &params, &rep);
    report.set("guide", a.bilateral.guide.as_ref().map(|p| p.display().to_string()));
    save_image(&rep.output, &a.output)?;
    write_report(&report, a.report.as_deref())
}

pub fn nlm(a: &NlmArgs) -> CmdResult {
    let f = load(&a.input, &a.input_args)?;
    check_output(&a.output, &f)?;
    let mut params = nlm_params(&a.shape, a.shape.theta)?;
    apply_landmark_args(&mut params, &a.landmarks);
    params.validate()?;
    let guide = build_guide(&f, params.mode, None)?;
    let rep = fast_filter(&f, &guide, &params)?;
    print_fast_summary("nlm", &f, &params, &rep);

    let mut report = fast_report(base_report("nlm", &a.input, &a.output, &f, &guide, &params), &params, &rep);
    report.set("noise", a.shape.noise);
    save_image(&rep.output, &a.output)?;
    write_report(&report, a.report.as_deref())
}

pub fn oracle(a: &OracleArgs) -> CmdResult {
    let f = load(&a.input, &a.input_args)?;
    check_output(&a.output, &f)?;
    let (params, external) = match a.noise {
        Some(noise) => {
            let shape = NlmShape {
                noise,
                theta: a.nlm_theta,
                search_radius: a.search_radius,
                patch_radius: a.patch_radius,
                pca_dim: a.pca_dim,
            };
            (nlm_params(&shape, a.nlm_theta)?, None)
        }
        None => {
            let external = a.bilateral.guide.as_deref().map(|p| load(p, &a.input_args)).transpose()?;
            (bilateral_params(&a.bilateral, f.channels(), SpatialChoice::Fir, None)?, external)
        }
    };
    let guide = build_guide(&f, params.mode, external.as_ref())?;
    let t = Instant::now();
    let out = brute_force_filter(&f, &guide, &params)?;
    let elapsed = t.elapsed();
    eprintln!("oracle: {}", describe(&f, &params));
    eprintln!("  {:<20}{:>10.2} ms", "brute force", ms(elapsed));

    let mut report = base_report("oracle", &a.input, &a.output, &f, &guide, &params);
    report.set("guide", a.bilateral.guide.as_ref().map(|p| p.display().to_string()));
    save_image(&out, &a.output)?;
    write_report(&report, a.report.as_deref())
}

pub fn compare(a: &CompareArgs) -> CmdResult {
    let x = load(&a.a, &a.input_args)?;
    let y = load(&a.b, &a.input_args)?;
    let score = QualityScore::compute(&x, &y)?;
    println!("{}", score.csv());
    Ok(())
}

pub fn bench(a: &BenchArgs) -> CmdResult {
    let f = load(&a.input, &a.input_args)?;
    let external = a.guide.as_deref().map(|p| load(p, &a.input_args)).transpose()?;
    if a.sigma.is_empty() || a.m0.is_empty() || a.strategy.is_empty() {
        return Err(Failure::usage("sweep lists must not be empty"));
    }
    let mode = if external.is_some() {
        FilterMode::Joint
    } else {
        FilterMode::Bilateral
    };
    let guide = build_guide(&f, mode, external.as_ref())?;
    // Validate every configuration before the first (slow) oracle run.
    let mut configs = Vec::new();
    for &sigma in &a.sigma {
        let base = FilterParams::new(spatial_kernel(a.spatial, sigma)?, RangeKernel::gaussian(a.theta)?, 1)
            .with_mode(mode)
            .with_seed(a.seed);
        for &strategy in &a.strategy {
            for &m0 in &a.m0 {
                let p = base.clone().with_strategy(strategy).with_m0(m0);
                p.validate()?;
                if m0 > f.pixel_count() {
                    return Err(Failure::usage(format!("m0 = {m0} exceeds the pixel count {}", f.pixel_count())));
                }
                configs.push(p);
            }
        }
    }

    println!(
        "sigma,radius,m0,strategy,quant_error,psnr_vs_oracle,clustering_ms,eigendecomposition_ms,\
         extrapolation_ms,convolutions_ms,normalization_ms,fast_ms,oracle_ms,speedup"
    );
    let per_sigma = a.strategy.len() * a.m0.len();
    for (chunk, &sigma) in configs.chunks(per_sigma).zip(&a.sigma) {
        let t = Instant::now();
        let reference = brute_force_filter(&f, &guide, &chunk[0])?;
        let oracle_ms = ms(t.elapsed());
        eprintln!("bench: sigma {sigma}, oracle {oracle_ms:.1} ms");
        for params in chunk {
            let t = Instant::now();
            let rep = fast_filter(&f, &guide, params)?;
            let fast_ms = ms(t.elapsed());
            let q = psnr(&reference, &rep.output)?;
            let s = &rep.timings;
            println!(
                "{sigma},{},{},{},{:.6e},{q:.4},{:.3},{:.3},{:.3},{:.3},{:.3},{fast_ms:.3},{oracle_ms:.3},{:.2}",
                params.spatial.radius(),
                params.m0,
                params.strategy,
                rep.quant_error,
                ms(s.clustering),
                ms(s.eigendecomposition),
                ms(s.extrapolation),
                ms(s.convolutions),
                ms(s.normalization),
                oracle_ms / fast_ms,
            );
        }
    }
    Ok(())
}

pub fn diag(a: &DiagArgs) -> CmdResult {
    let p = load(&a.guide, &a.input_args)?;
    let (_, theta0, m00) = bilateral_defaults(p.channels());
    // The spatial kernel does not enter the diagnostics.
    let mut params = FilterParams::new(
        SpatialKernel::box_kernel(0),
        RangeKernel::gaussian(a.theta.unwrap_or(theta0))?,
        m00,
    );
    apply_landmark_args(&mut params, &a.landmarks);
    let (range_list, model, timings) = fit_guide(&p, &params)?;
    let landmarks = model.landmarks();
    let alphas = model.alphas();

    println!("key,value");
    println!("points,{}", range_list.len());
    println!("guide_dim,{}", range_list.dim());
    println!("theta,{}", params.range.theta());
    println!("m0,{}", params.m0);
    println!("strategy,{}", params.strategy);
    println!("seed,{}", params.seed);
    println!("iterations,{}", landmarks.iterations());
    println!("quant_error,{:.6e}", landmarks.quant_error());
    println!("retained_rank,{}", model.retained_rank());
    println!("alpha_max,{:.6e}", alphas.first().copied().unwrap_or(0.0));
    println!("alpha_min,{:.6e}", alphas.last().copied().unwrap_or(0.0));
    match kernel_error(&model, &range_list, &params.range) {
        Ok(e) => println!("kernel_error,{e:.6e}"),
        Err(Error::TooLarge { limit, .. }) => println!("kernel_error,skipped (more than {limit} points)"),
        Err(e) => return Err(e.into()),
    }
    let history: Vec<String> = landmarks.history().iter().map(|e| format!("{e:.6e}")).collect();
    println!("quant_error_history,{}", history.join(";"));

    eprintln!(
        "diag: {} points of dimension {}, clustering {:.2} ms, eigendecomposition {:.2} ms, extrapolation {:.2} ms",
        range_list.len(),
        range_list.dim(),
        ms(timings.clustering),
        ms(timings.eigendecomposition),
        ms(timings.extrapolation)
    );
    Ok(())
}
