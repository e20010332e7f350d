//! Command-line front end: simulation, distance/embedding computation,
//! reconstruction, Lyapunov estimation, and the end-to-end pipeline.
//!
//! Every subcommand exits 0 on success and nonzero with a stage-tagged
//! `error:` line on stderr otherwise. File formats are the library's: series
//! directories (`manifest.json` + `frame_*.dmsf`), `.dmsd` distance matrices,
//! `.dmse` embeddings, OFF meshes, and PGM/PPM images with `.range` sidecars.

use clap::{Args, Parser, Subcommand};
use lpq::cgle::{self, CglePreset, CgleScalar};
use lpq::gray_scott::{self, GsIntegrator, GsPreset, GsSpecies};
use lpq::io;
use lpq::pipeline::{self, PipelineConfig};
use lpq::reconstruct;
use lpq::{
    Boundary, Error, Exponent, FieldSeries, LyapunovParams, PQ, Result, SpaceKind,
    estimate_lyapunov,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "lpq",
    version,
    about = "Spatio-temporal pattern analysis: L^{p,q} distances, MDS embeddings, \
             reconstruction, and reference simulators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the complex Ginzburg–Landau equation on a periodic lattice.
    SimulateCgle(SimulateCgleArgs),
    /// Simulate the Gray–Scott system on a geodesic sphere.
    SimulateGs(SimulateGsArgs),
    /// Differentiate every frame of a lattice series (per-pixel gradients).
    Gradient(GradientArgs),
    /// Compute the pairwise L^{p,q} distance matrix of a series.
    Distmat(DistmatArgs),
    /// Embed a distance matrix with classical MDS.
    Mds(MdsArgs),
    /// Reconstruct frames from k principal coordinates and report errors.
    Reconstruct(ReconstructArgs),
    /// Estimate the largest Lyapunov exponent of a scalar series.
    Lyapunov(LyapunovArgs),
    /// Run the full pipeline from a TOML config or a previous manifest.
    Pipeline(PipelineArgs),
    /// Generate an icosphere mesh in OFF format.
    Mesh(MeshArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::SimulateCgle(a) => simulate_cgle(a).map_err(|e| e.in_stage("simulate-cgle")),
        Cmd::SimulateGs(a) => simulate_gs(a).map_err(|e| e.in_stage("simulate-gs")),
        Cmd::Gradient(a) => gradient(a).map_err(|e| e.in_stage("gradient")),
        Cmd::Distmat(a) => distmat(a).map_err(|e| e.in_stage("distmat")),
        Cmd::Mds(a) => mds(a).map_err(|e| e.in_stage("mds")),
        Cmd::Reconstruct(a) => reconstruct_cmd(a).map_err(|e| e.in_stage("reconstruct")),
        Cmd::Lyapunov(a) => lyapunov(a).map_err(|e| e.in_stage("lyapunov")),
        Cmd::Pipeline(a) => pipeline_cmd(a),
        Cmd::Mesh(a) => mesh(a).map_err(|e| e.in_stage("mesh")),
    }
}

fn parse_pq(p: &str, q: &str) -> Result<PQ> {
    let p = Exponent::parse(p)?;
    let q = Exponent::parse(q)?;
    PQ::new(p.as_f64(), q.as_f64())
}

fn parse_boundary(name: &str) -> Result<Boundary> {
    match name {
        "periodic" => Ok(Boundary::Periodic),
        "clamp" => Ok(Boundary::Clamp),
        other => Err(Error::InvalidArgument(format!(
            "unknown boundary `{other}` (expected `periodic` or `clamp`)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// simulate-cgle

#[derive(Args)]
struct SimulateCgleArgs {
    /// Preset: frozen | defect-turbulence | spiral-defect-turbulence |
    /// defect-turbulence-hires.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output series directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    domain_side: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Time between emitted frames.
    #[arg(long)]
    stride: Option<f64>,
    /// First emitted time.
    #[arg(long)]
    start: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    noise_amplitude: Option<f64>,
    /// Store a scalar view (re | abs) instead of the raw (Re, Im) field.
    #[arg(long)]
    scalar: Option<String>,
}

fn simulate_cgle(a: SimulateCgleArgs) -> Result<()> {
    let mut p = CglePreset::from_name(&a.preset)?.params(a.seed);
    if let Some(v) = a.width {
        p.width = v;
    }
    if let Some(v) = a.height {
        p.height = v;
    }
    if let Some(v) = a.domain_side {
        p.domain_side = v;
    }
    if let Some(v) = a.dt {
        p.dt = v;
    }
    if let Some(v) = a.t_end {
        p.t_end = v;
    }
    if let Some(v) = a.stride {
        p.output_stride = v;
    }
    if let Some(v) = a.start {
        p.output_start = v;
    }
    if let Some(amp) = a.noise_amplitude {
        p.init = cgle::CgleInit::SeededNoise {
            seed: a.seed,
            amplitude: amp,
        };
    }
    let mut series = cgle::simulate(&p)?;
    if let Some(name) = &a.scalar {
        series = cgle::scalar_series(&series, CgleScalar::from_name(name)?)?;
    }
    io::write_series(&a.out, &series)?;
    report_series("simulated", &series, &a.out);
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate-gs

#[derive(Args)]
struct SimulateGsArgs {
    /// Preset: dots | stripes | turbulent.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output series directory.
    #[arg(long)]
    out: PathBuf,
    /// Icosphere subdivision level.
    #[arg(long)]
    level: Option<u32>,
    /// Explicit step size (defaults to the diffusion stability bound).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Time between emitted frames.
    #[arg(long)]
    stride: Option<f64>,
    /// First emitted time.
    #[arg(long)]
    start: Option<f64>,
    /// Feed rate A.
    #[arg(long)]
    a: Option<f64>,
    /// Kill rate B.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    noise_amplitude: Option<f64>,
    /// Integrator: euler | imex.
    #[arg(long, default_value = "euler")]
    integrator: String,
    /// Store one species (u | v) instead of the raw (u, v) field.
    #[arg(long)]
    species: Option<String>,
}

fn simulate_gs(a: SimulateGsArgs) -> Result<()> {
    let mut p = GsPreset::from_name(&a.preset)?.params(a.seed);
    if let Some(v) = a.level {
        p.level = v;
    }
    if let Some(v) = a.dt {
        p.dt = Some(v);
    }
    if let Some(v) = a.t_end {
        p.t_end = v;
    }
    if let Some(v) = a.stride {
        p.output_stride = v;
    }
    if let Some(v) = a.start {
        p.output_start = v;
    }
    if let Some(v) = a.a {
        p.a = v;
    }
    if let Some(v) = a.b {
        p.b = v;
    }
    if let Some(amp) = a.noise_amplitude {
        p.init = gray_scott::GsInit::Patch {
            seed: a.seed,
            noise_amplitude: amp,
        };
    }
    p.integrator = match a.integrator.as_str() {
        "euler" => GsIntegrator::Euler,
        "imex" => GsIntegrator::Imex,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown integrator `{other}` (expected `euler` or `imex`)"
            )));
        }
    };
    let run = gray_scott::simulate(&p)?;
    println!("step size dt = {}", run.dt());
    let series = match &a.species {
        Some(name) => run.scalar_series(GsSpecies::from_name(name)?),
        None => run.into_series(),
    };
    io::write_series(&a.out, &series)?;
    report_series("simulated", &series, &a.out);
    Ok(())
}

// ---------------------------------------------------------------------------
// gradient

#[derive(Args)]
struct GradientArgs {
    /// Input series directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output series directory.
    #[arg(long)]
    out: PathBuf,
    /// Boundary handling: periodic | clamp.
    #[arg(long, default_value = "periodic")]
    boundary: String,
}

fn gradient(a: GradientArgs) -> Result<()> {
    let series = io::read_series(&a.input)?;
    let boundary = parse_boundary(&a.boundary)?;
    let frames = match series.space().kind() {
        SpaceKind::Lattice { .. } => series
            .frames()
            .iter()
            .map(|f| f.lattice_gradient(boundary))
            .collect::<Result<Vec<_>>>()?,
        _ => {
            return Err(Error::UnsupportedSpace(
                "per-frame gradients of stored series are defined on lattices; mesh \
                 gradients need vertex data (use the pipeline with a simulation preset)"
                    .into(),
            ));
        }
    };
    let grad = FieldSeries::new(frames, series.timestamps().to_vec())?;
    io::write_series(&a.out, &grad)?;
    report_series("differentiated", &grad, &a.out);
    Ok(())
}

// ---------------------------------------------------------------------------
// distmat

#[derive(Args)]
struct DistmatArgs {
    /// Input series directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output .dmsd file.
    #[arg(long)]
    out: PathBuf,
    /// Outer exponent p (a number ≥ 1, or `inf`).
    #[arg(long, default_value = "2")]
    p: String,
    /// Inner exponent q (a number ≥ 1, or `inf`).
    #[arg(long, default_value = "2")]
    q: String,
}

fn distmat(a: DistmatArgs) -> Result<()> {
    let series = io::read_series(&a.input)?;
    let pq = parse_pq(&a.p, &a.q)?;
    let dm = lpq::distance_matrix(series.frames(), pq)?;
    io::write_distance_matrix(&a.out, &dm)?;
    println!(
        "wrote {}x{} distance matrix at (p, q) = {} to {}",
        dm.n(),
        dm.n(),
        pq,
        a.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// mds

#[derive(Args)]
struct MdsArgs {
    /// Input .dmsd file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output .dmse file.
    #[arg(long)]
    out: PathBuf,
    /// Relative eigenvalue cutoff for retained coordinates.
    #[arg(long, default_value_t = lpq::DEFAULT_EPS_KEEP)]
    eps_keep: f64,
    /// Also write the eigenvalue spectrum as CSV.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Also write the retained coordinates as CSV.
    #[arg(long)]
    coords: Option<PathBuf>,
}

fn mds(a: MdsArgs) -> Result<()> {
    let dm = io::read_distance_matrix(&a.input)?;
    let emb = lpq::embed(&dm, a.eps_keep)?;
    io::write_embedding(&a.out, &emb)?;
    if let Some(path) = &a.spectrum {
        let rows: Vec<Vec<f64>> = emb
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(j, &l)| vec![(j + 1) as f64, l])
            .collect();
        io::write_csv(path, &["mode", "eigenvalue"], &rows)?;
    }
    if let Some(path) = &a.coords {
        let mut header: Vec<String> = vec!["frame".into()];
        for j in 0..emb.k_retained() {
            header.push(format!("coord_{}", j + 1));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = (0..emb.n())
            .map(|i| {
                let mut row = vec![i as f64];
                row.extend_from_slice(emb.point(i));
                row
            })
            .collect();
        io::write_csv(path, &header_refs, &rows)?;
    }
    let captured = if emb.k_retained() > 0 {
        emb.variance_captured(emb.k_retained().min(3))?
    } else {
        0.0
    };
    println!(
        "retained {} of {} coordinates; negative mass {}; top-3 variance captured {}",
        emb.k_retained(),
        emb.n(),
        emb.negative_mass(),
        captured
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// reconstruct

#[derive(Args)]
struct ReconstructArgs {
    /// Series directory the embedding was computed from.
    #[arg(long)]
    series: PathBuf,
    /// Embedding (.dmse) file.
    #[arg(long)]
    embedding: PathBuf,
    /// Reconstruction order (number of principal coordinates).
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<()> {
    if a.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let series = io::read_series(&a.series)?;
    let emb = io::read_embedding(&a.embedding)?;
    let model = reconstruct::fit(&series, &emb, reconstruct::DEFAULT_MODE_BUDGET_BYTES)?;
    let k_eff = a.k.min(emb.k_retained());
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    let mut max_err = 0.0_f64;
    let mut rows = Vec::with_capacity(series.n_frames());
    for i in 0..series.n_frames() {
        let err = reconstruct::reconstruction_error(&model, &series, i, k_eff)?;
        max_err = max_err.max(err);
        rows.push(vec![i as f64, series.timestamps()[i], err]);
    }
    io::write_csv(
        a.out.join("reconstruction_errors.csv"),
        &["frame", "t", "relative_error"],
        &rows,
    )?;
    for j in 0..k_eff {
        io::write_field(
            a.out.join(format!("mode_{:02}.dmsf", j + 1)),
            &model.mode_field(j)?,
        )?;
    }
    for i in [0, series.n_frames() / 2, series.n_frames() - 1] {
        let rec = model.reconstruct_frame(i, k_eff)?;
        io::write_field(a.out.join(format!("frame_{i:06}.dmsf")), &rec)?;
    }
    if model.is_heuristic() {
        println!("note: embedding metric is not (2, 2); reconstruction is heuristic");
    }
    println!(
        "reconstructed {} frames at order {k_eff}; max relative error {max_err}; wrote {}",
        series.n_frames(),
        a.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// lyapunov

#[derive(Args)]
struct LyapunovArgs {
    /// Take the series from an embedding (.dmse) coordinate.
    #[arg(long, conflicts_with = "series")]
    embedding: Option<PathBuf>,
    /// 1-based principal-coordinate index (with --embedding).
    #[arg(long, default_value_t = 1)]
    coord: usize,
    /// Take the per-frame L^{p,q} norm series of a series directory.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Outer exponent for the norm series.
    #[arg(long, default_value = "2")]
    p: String,
    /// Inner exponent for the norm series.
    #[arg(long, default_value = "2")]
    q: String,
    /// Sample spacing in time units (defaults to the series stride, or 1).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long)]
    delay: Option<usize>,
    #[arg(long)]
    theiler: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Write the mean log-separation curve as CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

fn lyapunov(a: LyapunovArgs) -> Result<()> {
    let (samples, dt) = match (&a.embedding, &a.series) {
        (Some(path), None) => {
            if a.coord == 0 {
                return Err(Error::InvalidArgument("--coord is 1-based".into()));
            }
            let emb = io::read_embedding(path)?;
            (emb.coordinate_series(a.coord - 1)?, a.dt.unwrap_or(1.0))
        }
        (None, Some(dir)) => {
            let series = io::read_series(dir)?;
            let pq = parse_pq(&a.p, &a.q)?;
            let dt = match a.dt {
                Some(v) => v,
                None => series.uniform_stride().ok_or_else(|| {
                    Error::InvalidArgument(
                        "series timestamps are not uniform; pass --dt explicitly".into(),
                    )
                })?,
            };
            (series.norm_series(pq), dt)
        }
        _ => {
            return Err(Error::InvalidArgument(
                "pass exactly one of --embedding or --series".into(),
            ));
        }
    };
    let params = LyapunovParams {
        embedding_dim: a.dim,
        delay: a.delay,
        theiler: a.theiler,
        horizon: a.horizon,
        fit_range: None,
        dt,
    };
    let est = estimate_lyapunov(&samples, &params)?;
    if let Some(path) = &a.curve {
        let rows: Vec<Vec<f64>> = est
            .curve
            .iter()
            .enumerate()
            .map(|(k, &y)| vec![k as f64, y])
            .collect();
        io::write_csv(path, &["step", "mean_log_separation"], &rows)?;
    }
    println!(
        "lambda = {} per sample = {} per time unit (r^2 = {}, delay = {}, theiler = {}, \
         dim = {}, fit = [{}, {}])",
        est.lambda_per_sample,
        est.lambda_per_time,
        est.r_squared,
        est.delay,
        est.theiler,
        est.embedding_dim,
        est.fit_range.0,
        est.fit_range.1,
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Args)]
struct PipelineArgs {
    /// TOML config file, or a previous run's manifest.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long)]
    out: Option<String>,
    /// Override the input seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the outer exponent p.
    #[arg(long)]
    p: Option<String>,
    /// Override the inner exponent q.
    #[arg(long)]
    q: Option<String>,
    /// Override the scalar view (re | abs | u | v).
    #[arg(long)]
    scalar: Option<String>,
    /// Override the gradient stage on/off.
    #[arg(long)]
    gradient: Option<bool>,
    /// Override the reconstruction stage on/off.
    #[arg(long)]
    reconstruct: Option<bool>,
    /// Override the reconstruction order.
    #[arg(long)]
    k: Option<usize>,
    /// Override the Lyapunov stage on/off.
    #[arg(long)]
    lyapunov: Option<bool>,
}

fn pipeline_cmd(a: PipelineArgs) -> Result<()> {
    let mut cfg =
        PipelineConfig::from_toml_file(&a.config).map_err(|e| e.in_stage("pipeline"))?;
    if let Some(out) = a.out {
        cfg.output.dir = Some(out);
    }
    if let Some(seed) = a.seed {
        cfg.input.seed = seed;
    }
    if let Some(p) = &a.p {
        cfg.analysis.p = Exponent::parse(p)?.as_f64();
    }
    if let Some(q) = &a.q {
        cfg.analysis.q = Exponent::parse(q)?.as_f64();
    }
    if let Some(scalar) = a.scalar {
        cfg.analysis.scalar = Some(scalar);
    }
    if let Some(v) = a.gradient {
        cfg.analysis.gradient = v;
    }
    if let Some(v) = a.reconstruct {
        cfg.reconstruct.enabled = v;
    }
    if let Some(k) = a.k {
        cfg.reconstruct.k = k;
    }
    if let Some(v) = a.lyapunov {
        cfg.lyapunov.enabled = v;
    }
    let report = pipeline::run_pipeline(&cfg)?;
    println!(
        "pipeline ok: {} frames (rank {}), retained {} coordinates, negative mass {}",
        report.n_frames, report.rank, report.k_retained, report.negative_mass
    );
    if let Some(v) = report.variance_captured_3 {
        println!("top-3 variance captured: {v}");
    }
    if let (Some(k), Some(err)) = (report.k_effective, report.max_reconstruction_error) {
        println!("reconstruction at order {k}: max relative error {err}");
    }
    if let Some(est) = &report.lyapunov_coord1 {
        println!(
            "lyapunov (coordinate 1): {} per time unit (r^2 = {})",
            est.lambda_per_time, est.r_squared
        );
    }
    if let Some(est) = &report.lyapunov_norm {
        println!(
            "lyapunov (norm series): {} per time unit (r^2 = {})",
            est.lambda_per_time, est.r_squared
        );
    }
    println!("artifacts in {}", report.output_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// mesh

#[derive(Args)]
struct MeshArgs {
    /// Icosphere subdivision level.
    #[arg(long)]
    level: u32,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Output .off file.
    #[arg(long)]
    out: PathBuf,
}

fn mesh(a: MeshArgs) -> Result<()> {
    let mesh = lpq::icosphere(a.radius, a.level)?;
    io::write_off(&a.out, &mesh)?;
    println!(
        "wrote icosphere level {} ({} vertices, {} faces) to {}",
        a.level,
        mesh.n_vertices(),
        mesh.n_faces(),
        a.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn report_series(verb: &str, series: &FieldSeries, out: &Path) {
    println!(
        "{verb} {} frames ({} points, rank {}) to {}",
        series.n_frames(),
        series.space().n_points(),
        series.rank(),
        out.display()
    );
}
