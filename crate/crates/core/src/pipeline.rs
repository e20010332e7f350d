//! End-to-end orchestration: load or simulate a field series, reduce it to
//! the analysis view (scalar choice, optional gradient), compute the pairwise
//! distance matrix, embed, and export plot-ready artifacts — with an optional
//! low-rank reconstruction pass and optional Lyapunov estimates on the first
//! principal coordinate and on the norm series.
//!
//! A run owns its output directory and writes:
//!
//! * `run_manifest.toml` — every parameter, seed, and format version; the
//!   ground truth for reproduction. A manifest is itself a valid config
//!   (unknown top-level keys such as `status` and `summary` are ignored on
//!   load), so a run can be repeated by pointing the pipeline at a previous
//!   manifest and choosing a fresh output directory. The output directory is
//!   deliberately not recorded, which keeps reruns byte-comparable.
//! * `distance_matrix.dmsd`, `embedding.dmse` — binary stage outputs.
//! * `spectrum.csv`, `coords.csv`, `embedding_3d.csv` — plot-ready tables.
//! * `frames/*.pgm` — first/middle/last analysis frames (lattice input only).
//! * `reconstruction_errors.csv`, `modes/`, `reconstructed/` — when enabled.
//! * `lyapunov.csv`, `divergence_*.csv` — when enabled.
//!
//! Every stage defers to the owning module — the orchestration layer does no
//! arithmetic of its own — and any failure aborts the run with the stage name
//! while the manifest records a `failed` status alongside whatever artifacts
//! were already flushed. All randomness is seeded and all reductions are
//! deterministic, so re-running one manifest reproduces the output tree
//! bitwise.

use crate::cgle::{self, CglePreset, CgleScalar};
use crate::error::{Error, Result};
use crate::field::{Boundary, PQ};
use crate::gray_scott::{self, GsInit, GsPreset, GsRun, GsSpecies};
use crate::io;
use crate::lyapunov::{LyapunovEstimate, LyapunovParams, estimate_lyapunov};
use crate::mds::{DEFAULT_EPS_KEEP, Embedding, embed};
use crate::metrics::{DistanceMatrix, distance_matrix};
use crate::reconstruct::{self, ReconstructionModel};
use crate::series::FieldSeries;
use crate::space::SpaceKind;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// configuration

/// Input source: a simulation preset or a directory of files.
///
/// `kind` is one of `cgle-preset`, `gs-preset`, `fields`, `images`. Preset
/// kinds accept solver overrides (grid shape, step sizes, horizons); the
/// manifest records the fully resolved values so a rerun needs no defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Directory of `.dmsf` frames or PGM/PPM images.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Timestamp of the first frame (`images` input).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// Frame spacing: timestamp stride for `images`, output stride override
    /// for simulation presets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// First emitted time (simulation presets).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Scalar view for simulation input: `re`/`abs` for the complex field,
    /// `u`/`v` for the reaction–diffusion species. File input is taken as-is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<String>,
    pub gradient: bool,
    /// `periodic` or `clamp` (lattice gradients only).
    pub boundary: String,
    pub p: f64,
    pub q: f64,
    pub eps_keep: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            scalar: None,
            gradient: false,
            boundary: "periodic".into(),
            p: 2.0,
            q: 2.0,
            eps_keep: DEFAULT_EPS_KEEP,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSection {
    pub enabled: bool,
    /// Reconstruction order (number of principal coordinates used).
    pub k: usize,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        ReconstructSection {
            enabled: false,
            k: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovSection {
    pub enabled: bool,
    pub embedding_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theiler: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        LyapunovSection {
            enabled: false,
            embedding_dim: 3,
            delay: None,
            theiler: None,
            horizon: None,
        }
    }
}

/// Output location. Not written to manifests: a manifest describes the run,
/// the directory it sits in describes where the run went.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub reconstruct: ReconstructSection,
    #[serde(default)]
    pub lyapunov: LyapunovSection,
    #[serde(default, skip_serializing)]
    pub output: OutputSection,
}

impl PipelineConfig {
    /// Parse a config (or a previous run's manifest — unknown top-level keys
    /// are ignored) from TOML text.
    pub fn from_toml_str(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    fn pq(&self) -> Result<PQ> {
        PQ::new(self.analysis.p, self.analysis.q)
    }

    fn boundary(&self) -> Result<Boundary> {
        match self.analysis.boundary.as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "clamp" => Ok(Boundary::Clamp),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary `{other}` (expected `periodic` or `clamp`)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// report and manifest

/// Summary numbers from one pipeline run; the same values land in the
/// manifest's `[summary]` table.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub output_dir: PathBuf,
    pub n_frames: usize,
    /// Rank of the analysis fields (after scalar/gradient stages).
    pub rank: usize,
    pub k_retained: usize,
    pub negative_mass: f64,
    /// Variance captured by the first `min(3, k_retained)` coordinates.
    pub variance_captured_3: Option<f64>,
    /// Reconstruction order actually used (`min(k, k_retained)`).
    pub k_effective: Option<usize>,
    pub max_reconstruction_error: Option<f64>,
    pub lyapunov_coord1: Option<LyapunovEstimate>,
    pub lyapunov_norm: Option<LyapunovEstimate>,
}

#[derive(Serialize)]
struct SummarySection {
    n_frames: usize,
    rank: usize,
    k_retained: usize,
    negative_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance_captured_3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_effective: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_reconstruction_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lyapunov_coord1_per_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lyapunov_norm_per_time: Option<f64>,
}

#[derive(Serialize)]
struct ManifestDoc<'a> {
    format_version: u32,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_stage: Option<&'a str>,
    input: &'a InputSection,
    analysis: &'a AnalysisSection,
    reconstruct: &'a ReconstructSection,
    lyapunov: &'a LyapunovSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<SummarySection>,
}

fn write_manifest(
    out: &Path,
    cfg: &PipelineConfig,
    status: &str,
    failed_stage: Option<&str>,
    summary: Option<SummarySection>,
) -> Result<()> {
    let doc = ManifestDoc {
        format_version: PIPELINE_FORMAT_VERSION,
        status,
        failed_stage,
        input: &cfg.input,
        analysis: &cfg.analysis,
        reconstruct: &cfg.reconstruct,
        lyapunov: &cfg.lyapunov,
        summary,
    };
    let path = out.join("run_manifest.toml");
    let text = toml::to_string(&doc).map_err(|e| Error::parse(&path, e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

// ---------------------------------------------------------------------------
// input loading

/// Load a directory of `frame_*.dmsf` files (with optional manifest/space
/// description) as a series.
pub fn load_field_series(dir: impl AsRef<Path>) -> Result<FieldSeries> {
    io::read_series(dir)
}

/// Load every PGM/PPM file in a directory, lexicographically ordered, as a
/// series on a unit-weight lattice with uniform timestamps.
pub fn load_image_series(dir: impl AsRef<Path>, t0: f64, stride: f64) -> Result<FieldSeries> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| {
                        let e = e.to_ascii_lowercase();
                        e == "pgm" || e == "ppm"
                    })
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::parse(dir, "no .pgm or .ppm files found"));
    }
    io::read_image_series(&paths, t0, stride)
}

enum LoadedInput {
    Cgle(FieldSeries),
    Gs(GsRun),
    Files(FieldSeries),
}

fn require<'a, T>(opt: &'a Option<T>, what: &str) -> Result<&'a T> {
    opt.as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("input.{what} is required for this kind")))
}

fn load_input(cfg: &PipelineConfig, resolved: &mut InputSection) -> Result<LoadedInput> {
    let sec = &cfg.input;
    match sec.kind.as_str() {
        "cgle-preset" => {
            let preset = CglePreset::from_name(require(&sec.preset, "preset")?)?;
            let mut params = preset.params(sec.seed);
            if let Some(v) = sec.alpha {
                params.alpha = v;
            }
            if let Some(v) = sec.beta {
                params.beta = v;
            }
            if let Some(v) = sec.width {
                params.width = v;
            }
            if let Some(v) = sec.height {
                params.height = v;
            }
            if let Some(v) = sec.domain_side {
                params.domain_side = v;
            }
            if let Some(v) = sec.dt {
                params.dt = v;
            }
            if let Some(v) = sec.t_end {
                params.t_end = v;
            }
            if let Some(v) = sec.stride {
                params.output_stride = v;
            }
            if let Some(v) = sec.start {
                params.output_start = v;
            }
            if let Some(amp) = sec.noise_amplitude {
                params.init = cgle::CgleInit::SeededNoise {
                    seed: sec.seed,
                    amplitude: amp,
                };
            }
            resolved.alpha = Some(params.alpha);
            resolved.beta = Some(params.beta);
            resolved.width = Some(params.width);
            resolved.height = Some(params.height);
            resolved.domain_side = Some(params.domain_side);
            resolved.dt = Some(params.dt);
            resolved.t_end = Some(params.t_end);
            resolved.stride = Some(params.output_stride);
            resolved.start = Some(params.output_start);
            if let cgle::CgleInit::SeededNoise { amplitude, .. } = params.init {
                resolved.noise_amplitude = Some(amplitude);
            }
            Ok(LoadedInput::Cgle(cgle::simulate(&params)?))
        }
        "gs-preset" => {
            let preset = GsPreset::from_name(require(&sec.preset, "preset")?)?;
            let mut params = preset.params(sec.seed);
            if let Some(v) = sec.a {
                params.a = v;
            }
            if let Some(v) = sec.b {
                params.b = v;
            }
            if let Some(v) = sec.level {
                params.level = v;
            }
            if let Some(v) = sec.dt {
                params.dt = Some(v);
            }
            if let Some(v) = sec.t_end {
                params.t_end = v;
            }
            if let Some(v) = sec.stride {
                params.output_stride = v;
            }
            if let Some(v) = sec.start {
                params.output_start = v;
            }
            if let Some(amp) = sec.noise_amplitude {
                params.init = GsInit::Patch {
                    seed: sec.seed,
                    noise_amplitude: amp,
                };
            }
            params.keep_vertex_frames = cfg.analysis.gradient;
            let run = gray_scott::simulate(&params)?;
            resolved.a = Some(params.a);
            resolved.b = Some(params.b);
            resolved.level = Some(params.level);
            resolved.dt = Some(run.dt());
            resolved.t_end = Some(params.t_end);
            resolved.stride = Some(params.output_stride);
            resolved.start = Some(params.output_start);
            if let GsInit::Patch {
                noise_amplitude, ..
            } = params.init
            {
                resolved.noise_amplitude = Some(noise_amplitude);
            }
            Ok(LoadedInput::Gs(run))
        }
        "fields" => Ok(LoadedInput::Files(load_field_series(require(
            &sec.dir, "dir",
        )?)?)),
        "images" => {
            let t0 = sec.t0.unwrap_or(0.0);
            let stride = sec.stride.unwrap_or(1.0);
            resolved.t0 = Some(t0);
            resolved.stride = Some(stride);
            Ok(LoadedInput::Files(load_image_series(
                require(&sec.dir, "dir")?,
                t0,
                stride,
            )?))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown input.kind `{other}` (expected cgle-preset, gs-preset, fields, or images)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// the run

fn stage_of(err: &Error) -> Option<&'static str> {
    match err {
        Error::Stage { stage, .. } => Some(stage),
        _ => None,
    }
}

/// Execute the full pipeline described by `cfg`. `cfg.output.dir` must be
/// set; the directory is created if missing and owned by this run.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let out = PathBuf::from(cfg.output.dir.as_deref().ok_or_else(|| {
        Error::InvalidArgument("output.dir must be set (pass an output directory)".into())
    })?);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut resolved = cfg.clone();
    match run_stages(cfg, &out, &mut resolved) {
        Ok(report) => {
            let summary = SummarySection {
                n_frames: report.n_frames,
                rank: report.rank,
                k_retained: report.k_retained,
                negative_mass: report.negative_mass,
                variance_captured_3: report.variance_captured_3,
                k_effective: report.k_effective,
                max_reconstruction_error: report.max_reconstruction_error,
                lyapunov_coord1_per_time: report.lyapunov_coord1.as_ref().map(|e| e.lambda_per_time),
                lyapunov_norm_per_time: report.lyapunov_norm.as_ref().map(|e| e.lambda_per_time),
            };
            write_manifest(&out, &resolved, "ok", None, Some(summary))?;
            Ok(report)
        }
        Err(err) => {
            // Best effort: the manifest records the failure even if writing
            // partial state is itself what failed.
            let _ = write_manifest(&out, &resolved, "failed", stage_of(&err), None);
            Err(err)
        }
    }
}

fn run_stages(
    cfg: &PipelineConfig,
    out: &Path,
    resolved: &mut PipelineConfig,
) -> Result<PipelineReport> {
    let pq = cfg.pq().map_err(|e| e.in_stage("input"))?;

    // Load or simulate.
    let loaded = load_input(cfg, &mut resolved.input).map_err(|e| e.in_stage("input"))?;

    // Scalar view.
    let (mut series, gs) = (|| -> Result<(FieldSeries, Option<(GsRun, GsSpecies)>)> {
        match loaded {
            LoadedInput::Cgle(s) => {
                let name = cfg.analysis.scalar.as_deref().unwrap_or("re");
                resolved.analysis.scalar = Some(name.to_string());
                Ok((cgle::scalar_series(&s, CgleScalar::from_name(name)?)?, None))
            }
            LoadedInput::Gs(run) => {
                let name = cfg.analysis.scalar.as_deref().unwrap_or("u");
                resolved.analysis.scalar = Some(name.to_string());
                let species = GsSpecies::from_name(name)?;
                Ok((run.scalar_series(species), Some((run, species))))
            }
            LoadedInput::Files(s) => {
                if cfg.analysis.scalar.is_some() {
                    return Err(Error::InvalidArgument(
                        "analysis.scalar applies to simulation presets; file input is taken as-is"
                            .into(),
                    ));
                }
                Ok((s, None))
            }
        }
    })()
    .map_err(|e| e.in_stage("scalar"))?;

    // Optional gradient.
    if cfg.analysis.gradient {
        series = (|| -> Result<FieldSeries> {
            if let Some((run, species)) = &gs {
                return run.gradient_series(*species);
            }
            match series.space().kind() {
                SpaceKind::Lattice { .. } => {
                    let boundary = cfg.boundary()?;
                    let frames = series
                        .frames()
                        .iter()
                        .map(|f| f.lattice_gradient(boundary))
                        .collect::<Result<Vec<_>>>()?;
                    FieldSeries::new(frames, series.timestamps().to_vec())
                }
                SpaceKind::TriMesh(_) => Err(Error::UnsupportedSpace(
                    "mesh gradients need per-vertex states; use a simulation preset with \
                     gradient enabled"
                        .into(),
                )),
                SpaceKind::Generic => Err(Error::UnsupportedSpace(
                    "gradients are defined on lattices and meshes, not generic point sets".into(),
                )),
            }
        })()
        .map_err(|e| e.in_stage("gradient"))?;
    }
    drop(gs);

    // Distances.
    let dm = (|| -> Result<DistanceMatrix> {
        let dm = distance_matrix(series.frames(), pq)?;
        io::write_distance_matrix(out.join("distance_matrix.dmsd"), &dm)?;
        Ok(dm)
    })()
    .map_err(|e| e.in_stage("distmat"))?;

    // Embedding.
    let embedding = (|| -> Result<Embedding> {
        let emb = embed(&dm, cfg.analysis.eps_keep)?;
        io::write_embedding(out.join("embedding.dmse"), &emb)?;
        Ok(emb)
    })()
    .map_err(|e| e.in_stage("embed"))?;

    // Plot-ready exports.
    export_tables(out, &series, &embedding).map_err(|e| e.in_stage("export"))?;

    let mut report = PipelineReport {
        output_dir: out.to_path_buf(),
        n_frames: series.n_frames(),
        rank: series.rank(),
        k_retained: embedding.k_retained(),
        negative_mass: embedding.negative_mass(),
        variance_captured_3: None,
        k_effective: None,
        max_reconstruction_error: None,
        lyapunov_coord1: None,
        lyapunov_norm: None,
    };
    if embedding.k_retained() > 0 {
        let k3 = embedding.k_retained().min(3);
        report.variance_captured_3 = Some(embedding.variance_captured(k3)?);
    }

    // Optional reconstruction.
    if cfg.reconstruct.enabled {
        let (k_eff, max_err) = run_reconstruction(cfg, out, &series, &embedding)
            .map_err(|e| e.in_stage("reconstruct"))?;
        report.k_effective = Some(k_eff);
        report.max_reconstruction_error = Some(max_err);
    }

    // Optional Lyapunov estimates.
    if cfg.lyapunov.enabled {
        let (coord1, norm) = run_lyapunov(cfg, out, &series, &embedding, pq)
            .map_err(|e| e.in_stage("lyapunov"))?;
        report.lyapunov_coord1 = coord1;
        report.lyapunov_norm = Some(norm);
    }

    Ok(report)
}

fn sample_indices(n: usize) -> Vec<usize> {
    let mut idx = vec![0, n / 2, n - 1];
    idx.dedup();
    idx
}

fn export_tables(out: &Path, series: &FieldSeries, embedding: &Embedding) -> Result<()> {
    let n = series.n_frames();
    let k = embedding.k_retained();

    let spectrum: Vec<Vec<f64>> = embedding
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(j, &l)| vec![(j + 1) as f64, l])
        .collect();
    io::write_csv(out.join("spectrum.csv"), &["mode", "eigenvalue"], &spectrum)?;

    let mut header: Vec<String> = vec!["frame".into(), "t".into()];
    for j in 0..k {
        header.push(format!("coord_{}", j + 1));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![i as f64, series.timestamps()[i]];
            row.extend_from_slice(embedding.point(i));
            row
        })
        .collect();
    io::write_csv(out.join("coords.csv"), &header_refs, &rows)?;

    if k >= 1 {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = vec![i as f64, series.timestamps()[i]];
                for j in 0..3 {
                    row.push(if j < k { embedding.coord(i, j) } else { 0.0 });
                }
                row
            })
            .collect();
        io::write_csv(
            out.join("embedding_3d.csv"),
            &["frame", "t", "x", "y", "z"],
            &rows,
        )?;
    }

    // Sample frame renders for lattice data.
    if series.space().lattice_dims().is_some() {
        let dir = out.join("frames");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in sample_indices(n) {
            io::write_pgm(dir.join(format!("frame_{i:06}.pgm")), series.frame(i), 0)?;
        }
    }
    Ok(())
}

fn run_reconstruction(
    cfg: &PipelineConfig,
    out: &Path,
    series: &FieldSeries,
    embedding: &Embedding,
) -> Result<(usize, f64)> {
    if cfg.reconstruct.k == 0 {
        return Err(Error::InvalidArgument(
            "reconstruct.k must be at least 1 when reconstruction is enabled".into(),
        ));
    }
    let model: ReconstructionModel =
        reconstruct::fit(series, embedding, reconstruct::DEFAULT_MODE_BUDGET_BYTES)?;
    let k_eff = cfg.reconstruct.k.min(embedding.k_retained());

    let mut max_err = 0.0_f64;
    let mut rows = Vec::with_capacity(series.n_frames());
    for i in 0..series.n_frames() {
        let err = reconstruct::reconstruction_error(&model, series, i, k_eff)?;
        max_err = max_err.max(err);
        rows.push(vec![i as f64, series.timestamps()[i], err]);
    }
    io::write_csv(
        out.join("reconstruction_errors.csv"),
        &["frame", "t", "relative_error"],
        &rows,
    )?;

    if k_eff > 0 {
        let dir = out.join("modes");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for j in 0..k_eff {
            io::write_field(dir.join(format!("mode_{:02}.dmsf", j + 1)), &model.mode_field(j)?)?;
        }
    }

    let dir = out.join("reconstructed");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let lattice = series.space().lattice_dims().is_some();
    for i in sample_indices(series.n_frames()) {
        let rec = model.reconstruct_frame(i, k_eff)?;
        io::write_field(dir.join(format!("frame_{i:06}.dmsf")), &rec)?;
        if lattice {
            io::write_pgm(dir.join(format!("frame_{i:06}.pgm")), &rec, 0)?;
        }
    }
    Ok((k_eff, max_err))
}

fn run_lyapunov(
    cfg: &PipelineConfig,
    out: &Path,
    series: &FieldSeries,
    embedding: &Embedding,
    pq: PQ,
) -> Result<(Option<LyapunovEstimate>, LyapunovEstimate)> {
    let dt = series.uniform_stride().ok_or_else(|| {
        Error::InvalidArgument("Lyapunov estimation requires uniformly spaced timestamps".into())
    })?;
    let params = LyapunovParams {
        embedding_dim: cfg.lyapunov.embedding_dim,
        delay: cfg.lyapunov.delay,
        theiler: cfg.lyapunov.theiler,
        horizon: cfg.lyapunov.horizon,
        fit_range: None,
        dt,
    };

    // First principal coordinate (absent when nothing was retained).
    let coord1 = if embedding.k_retained() >= 1 {
        let est = estimate_lyapunov(&embedding.coordinate_series(0)?, &params)?;
        write_divergence(out.join("divergence_coord1.csv"), &est)?;
        Some(est)
    } else {
        None
    };

    let norm = estimate_lyapunov(&series.norm_series(pq), &params)?;
    write_divergence(out.join("divergence_norm.csv"), &norm)?;

    let mut text = String::from(
        "source,lambda_per_sample,lambda_per_time,r_squared,delay,theiler,embedding_dim,fit_lo,fit_hi\n",
    );
    let mut push = |source: &str, e: &LyapunovEstimate| {
        text.push_str(&format!(
            "{source},{},{},{},{},{},{},{},{}\n",
            e.lambda_per_sample,
            e.lambda_per_time,
            e.r_squared,
            e.delay,
            e.theiler,
            e.embedding_dim,
            e.fit_range.0,
            e.fit_range.1,
        ));
    };
    if let Some(e) = &coord1 {
        push("coord1", e);
    }
    push("norm", &norm);
    let path = out.join("lyapunov.csv");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    Ok((coord1, norm))
}

fn write_divergence(path: PathBuf, est: &LyapunovEstimate) -> Result<()> {
    let rows: Vec<Vec<f64>> = est
        .curve
        .iter()
        .enumerate()
        .map(|(k, &y)| vec![k as f64, y])
        .collect();
    io::write_csv(path, &["step", "mean_log_separation"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::space::MeasureSpace;
    use std::sync::Arc;
    use tempfile::tempdir;

    fn fields_dir(dir: &Path, n: usize, w: usize, h: usize) -> PathBuf {
        let space = Arc::new(MeasureSpace::lattice(w, h).unwrap());
        let frames: Vec<VectorField> = (0..n)
            .map(|i| {
                let t = i as f64 * 0.3;
                VectorField::from_fn(space.clone(), 1, |s, out| {
                    out[0] = ((0.7 * s as f64) + t).sin() + 0.2 * (1.3 * t).cos();
                })
                .unwrap()
            })
            .collect();
        let series = FieldSeries::with_uniform_times(frames, 0.0, 0.3).unwrap();
        let d = dir.join("input_series");
        io::write_series(&d, &series).unwrap();
        d
    }

    fn base_config(input_dir: &Path, out: &Path) -> PipelineConfig {
        let text = format!(
            "[input]\nkind = \"fields\"\ndir = {:?}\n\n[reconstruct]\nenabled = true\nk = 2\n",
            input_dir.display().to_string()
        );
        let mut cfg = PipelineConfig::from_toml_str(&text, "test").unwrap();
        cfg.output.dir = Some(out.display().to_string());
        cfg
    }

    #[test]
    fn defaults_and_manifest_reload() {
        let cfg = PipelineConfig::from_toml_str("[input]\nkind = \"fields\"\ndir = \"x\"\n", "t")
            .unwrap();
        assert_eq!(cfg.analysis.p, 2.0);
        assert_eq!(cfg.analysis.boundary, "periodic");
        assert!(!cfg.reconstruct.enabled);
        assert_eq!(cfg.reconstruct.k, 3);
        assert!(!cfg.lyapunov.enabled);
        assert!(cfg.output.dir.is_none());

        // Unknown keys inside a section are rejected…
        assert!(
            PipelineConfig::from_toml_str("[input]\nkind = \"fields\"\nbogus = 1\n", "t").is_err()
        );
        // …but unknown top-level tables (a manifest's status/summary) are not.
        let manifest = "status = \"ok\"\nformat_version = 1\n\n[input]\nkind = \"fields\"\n\
                        dir = \"x\"\n\n[summary]\nn_frames = 3\n";
        let cfg = PipelineConfig::from_toml_str(manifest, "t").unwrap();
        assert_eq!(cfg.input.dir.as_deref(), Some("x"));
    }

    #[test]
    fn artifacts_match_direct_module_calls() {
        let tmp = tempdir().unwrap();
        let input = fields_dir(tmp.path(), 6, 4, 3);
        let out = tmp.path().join("run");
        let cfg = base_config(&input, &out);
        let report = run_pipeline(&cfg).unwrap();

        assert_eq!(report.n_frames, 6);
        assert!(report.k_retained >= 1);
        assert_eq!(report.k_effective, Some(2.min(report.k_retained)));

        // The stored distance matrix equals a direct computation.
        let series = load_field_series(&input).unwrap();
        let direct = distance_matrix(series.frames(), PQ::l22()).unwrap();
        let stored = io::read_distance_matrix(out.join("distance_matrix.dmsd")).unwrap();
        assert_eq!(stored.squared(), direct.squared());

        // And the stored embedding equals a direct embed of that matrix.
        let emb = embed(&direct, DEFAULT_EPS_KEEP).unwrap();
        let stored = io::read_embedding(out.join("embedding.dmse")).unwrap();
        assert_eq!(stored.eigenvalues(), emb.eigenvalues());
        assert_eq!(stored.coords(), emb.coords());

        for name in [
            "run_manifest.toml",
            "spectrum.csv",
            "coords.csv",
            "embedding_3d.csv",
            "reconstruction_errors.csv",
        ] {
            assert!(out.join(name).exists(), "missing {name}");
        }
        assert!(out.join("modes/mode_01.dmsf").exists());
        assert!(out.join("frames/frame_000000.pgm").exists());
        assert!(out.join("reconstructed/frame_000005.dmsf").exists());

        let manifest = fs::read_to_string(out.join("run_manifest.toml")).unwrap();
        assert!(manifest.contains("status = \"ok\""));
        assert!(manifest.contains("[summary]"));
        assert!(!manifest.contains("output"));

        // The manifest is itself a loadable config.
        let again = PipelineConfig::from_toml_str(&manifest, "m").unwrap();
        assert_eq!(again.input.kind, "fields");
        assert_eq!(again.reconstruct.k, 2);
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let tmp = tempdir().unwrap();
        let input = fields_dir(tmp.path(), 240, 3, 3);
        let out1 = tmp.path().join("a");
        let out2 = tmp.path().join("b");
        let mut cfg = base_config(&input, &out1);
        cfg.lyapunov.enabled = true;
        run_pipeline(&cfg).unwrap();
        cfg.output.dir = Some(out2.display().to_string());
        run_pipeline(&cfg).unwrap();

        let mut names1 = tree_files(&out1);
        let mut names2 = tree_files(&out2);
        names1.sort();
        names2.sort();
        assert_eq!(names1, names2);
        assert!(!names1.is_empty());
        for rel in &names1 {
            let a = fs::read(out1.join(rel)).unwrap();
            let b = fs::read(out2.join(rel)).unwrap();
            assert_eq!(a, b, "file {} differs between reruns", rel.display());
        }
        assert!(names1.iter().any(|p| p.ends_with("lyapunov.csv")));
        assert!(names1.iter().any(|p| p.ends_with("divergence_norm.csv")));
    }

    fn tree_files(root: &Path) -> Vec<PathBuf> {
        let mut acc = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    acc.push(p.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
        acc
    }

    #[test]
    fn failures_are_stage_tagged_and_recorded() {
        let tmp = tempdir().unwrap();
        let empty = tmp.path().join("empty");
        fs::create_dir(&empty).unwrap();
        let out = tmp.path().join("run");
        let text = format!(
            "[input]\nkind = \"images\"\ndir = {:?}\n",
            empty.display().to_string()
        );
        let mut cfg = PipelineConfig::from_toml_str(&text, "t").unwrap();
        cfg.output.dir = Some(out.display().to_string());
        match run_pipeline(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "input"),
            other => panic!("expected stage-tagged error, got {other:?}"),
        }
        let manifest = fs::read_to_string(out.join("run_manifest.toml")).unwrap();
        assert!(manifest.contains("status = \"failed\""));
        assert!(manifest.contains("failed_stage = \"input\""));
    }

    #[test]
    fn single_pixel_image_difference_has_unit_norm_distance() {
        let tmp = tempdir().unwrap();
        let dir = tmp.path().join("imgs");
        fs::create_dir(&dir).unwrap();
        let mut a = b"P5\n2 2\n255\n".to_vec();
        a.extend_from_slice(&[0, 0, 0, 0]);
        let mut b = b"P5\n2 2\n255\n".to_vec();
        b.extend_from_slice(&[255, 0, 0, 0]);
        fs::write(dir.join("a.pgm"), a).unwrap();
        fs::write(dir.join("b.pgm"), b).unwrap();

        let out = tmp.path().join("run");
        let text = format!(
            "[input]\nkind = \"images\"\ndir = {:?}\n\n[analysis]\np = 1.0\nq = 1.0\n",
            dir.display().to_string()
        );
        let mut cfg = PipelineConfig::from_toml_str(&text, "t").unwrap();
        cfg.output.dir = Some(out.display().to_string());
        run_pipeline(&cfg).unwrap();
        let dm = io::read_distance_matrix(out.join("distance_matrix.dmsd")).unwrap();
        assert_eq!(dm.d(0, 1), 255.0);
    }

    #[test]
    fn scalar_and_gradient_misuse_is_rejected() {
        let tmp = tempdir().unwrap();
        let input = fields_dir(tmp.path(), 4, 4, 4);
        let out = tmp.path().join("run");
        let mut cfg = base_config(&input, &out);
        cfg.analysis.scalar = Some("re".into());
        match run_pipeline(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "scalar"),
            other => panic!("expected scalar-stage error, got {other:?}"),
        }

        // Lattice gradients are fine; a bogus boundary name is not.
        let mut cfg = base_config(&input, &tmp.path().join("run2"));
        cfg.analysis.gradient = true;
        cfg.analysis.boundary = "wrap".into();
        match run_pipeline(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "gradient"),
            other => panic!("expected gradient-stage error, got {other:?}"),
        }
    }

    #[test]
    fn cgle_preset_runs_end_to_end() {
        let tmp = tempdir().unwrap();
        let out = tmp.path().join("run");
        let text = "[input]\nkind = \"cgle-preset\"\npreset = \"defect-turbulence\"\nseed = 7\n\
                    width = 16\nheight = 16\nt_end = 3.0\nstride = 0.5\n\n\
                    [analysis]\nscalar = \"abs\"\ngradient = true\n";
        let mut cfg = PipelineConfig::from_toml_str(text, "t").unwrap();
        cfg.output.dir = Some(out.display().to_string());
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.n_frames, 7);
        assert_eq!(report.rank, 2, "gradient of a scalar has two components");
        let manifest = fs::read_to_string(out.join("run_manifest.toml")).unwrap();
        assert!(manifest.contains("alpha = 2"), "resolved parameters recorded");
        assert!(manifest.contains("seed = 7"));
    }

    #[test]
    fn gs_preset_runs_end_to_end() {
        let tmp = tempdir().unwrap();
        let out = tmp.path().join("run");
        let text = "[input]\nkind = \"gs-preset\"\npreset = \"dots\"\nlevel = 1\n\
                    t_end = 10.0\nstride = 2.0\n\n[analysis]\ngradient = true\n";
        let mut cfg = PipelineConfig::from_toml_str(text, "t").unwrap();
        cfg.output.dir = Some(out.display().to_string());
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.n_frames, 6);
        assert_eq!(report.rank, 3, "surface gradient fields are 3-vectors");
        assert!(out.join("embedding.dmse").exists());
        // Mesh runs emit no lattice renders.
        assert!(!out.join("frames").exists());
    }
}
