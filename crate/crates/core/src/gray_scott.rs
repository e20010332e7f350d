//! Gray–Scott reaction–diffusion on a triangulated sphere.
//!
//! ```text
//! ∂u/∂t = Dᵤ Δu + u²v − (A + B) u
//! ∂v/∂t = Dᵥ Δv − u²v + A (1 − v)
//! ```
//!
//! `A` feeds the substrate `v`, `B` removes the activator `u`, and `(0, 1)`
//! is an exact fixed point. The Laplace–Beltrami operator Δ is discretized
//! with cotangent stiffness weights and a lumped (barycentric) mass matrix
//! on the mesh vertices, `Δf ≈ −M⁻¹ L f`, and time stepping is explicit
//! Euler by default (step size from the diffusion stability bound) with an
//! implicit–explicit backward-Euler/CG option for stiffer settings.
//!
//! The nominal diffusivities act on a physical length scale much smaller
//! than the unit sphere; `length_scale` converts them into the effective
//! values `D_eff = D · length_scale²` used by the integrator, so the sphere
//! of radius `2.5 / 2π` (circumference 2.5) reproduces the classical flat
//! 2.5 × 2.5 periodic-box patterns.
//!
//! States live on vertices; emitted frames carry the per-face vertex mean
//! on the area-weighted face space. Because the lumped vertex mass is one
//! third of the incident face area, the face-mean frames reproduce vertex
//! integrals exactly: Σ_faces area·mean = Σ_vertices m·value, so mass
//! budgets can be audited from the emitted series alone.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::numeric::pairwise_sum;
use crate::series::{steps_of, FieldSeries};
use crate::space::{cross, dot3, normalize, sub, MeasureSpace, TriMesh};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

/// Cotangent weights are clamped to this magnitude to keep near-degenerate
/// triangles from poisoning the operator.
const COTAN_CLAMP: f64 = 1e6;

/// Abort threshold for the runtime stability check on |u|, |v|.
const STABILITY_BOUND: f64 = 100.0;

/// Safety factor on the explicit diffusion step bound `h²_min / D_max`.
const DT_SAFETY: f64 = 0.2;

/// Automatic step sizes are additionally capped here so the reaction terms
/// stay well resolved even on coarse meshes.
const DT_REACTION_CAP: f64 = 1.0;

/// Cotangent-weight stiffness matrix and lumped mass for a triangle mesh.
///
/// `L` is symmetric positive semi-definite with `L·1 = 0`; the discrete
/// Laplace–Beltrami operator is `Δ ≈ −M⁻¹L`, so Rayleigh quotients
/// `fᵀLf / fᵀMf` of spherical harmonics approach `ℓ(ℓ+1)/r²`.
pub struct MeshLaplacian {
    offsets: Vec<usize>,
    columns: Vec<usize>,
    weights: Vec<f64>,
    diagonal: Vec<f64>,
    mass: Vec<f64>,
}

impl MeshLaplacian {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let n = mesh.n_vertices();
        // Accumulate cotangent weights per undirected edge in a fixed
        // (sorted) order so construction is deterministic.
        let mut edge_weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut mass = vec![0.0; n];
        for f in 0..mesh.n_faces() {
            let [a, b, c] = mesh.face(f);
            let area = mesh.face_area(f);
            let third = area / 3.0;
            mass[a] += third;
            mass[b] += third;
            mass[c] += third;
            let pos = [mesh.vertex(a), mesh.vertex(b), mesh.vertex(c)];
            let idx = [a, b, c];
            for corner in 0..3 {
                let (i, j, k) = (corner, (corner + 1) % 3, (corner + 2) % 3);
                let e1 = sub(pos[j], pos[i]);
                let e2 = sub(pos[k], pos[i]);
                let cross_norm = {
                    let cr = cross(e1, e2);
                    dot3(cr, cr).sqrt()
                };
                // cot of the angle at `i`, contributing to the edge (j, k).
                let cot = if cross_norm > 0.0 {
                    dot3(e1, e2) / cross_norm
                } else {
                    0.0
                };
                let key = (idx[j].min(idx[k]), idx[j].max(idx[k]));
                *edge_weights.entry(key).or_insert(0.0) += 0.5 * cot;
            }
        }

        let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in &edge_weights {
            let w = w.clamp(-COTAN_CLAMP, COTAN_CLAMP);
            neighbors[i].push((j, w));
            neighbors[j].push((i, w));
        }

        if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::InvalidSpace(format!(
                "vertex {i} belongs to no face (zero lumped mass)"
            )));
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut columns = Vec::new();
        let mut weights = Vec::new();
        let mut diagonal = vec![0.0; n];
        offsets.push(0);
        for (i, row) in neighbors.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut d = 0.0;
            for &(j, w) in row.iter() {
                columns.push(j);
                weights.push(w);
                d += w;
            }
            diagonal[i] = d;
            offsets.push(columns.len());
        }
        Ok(MeshLaplacian {
            offsets,
            columns,
            weights,
            diagonal,
            mass,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.mass.len()
    }

    /// Lumped vertex mass (one third of the incident face area).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `(Lf)_i = Σ_j w_ij (f_i − f_j)` — exactly zero on constants.
    pub fn apply_stiffness(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.n_vertices());
        assert_eq!(out.len(), self.n_vertices());
        for i in 0..self.n_vertices() {
            let fi = f[i];
            let mut acc = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc += self.weights[k] * (fi - f[self.columns[k]]);
            }
            out[i] = acc;
        }
    }

    /// Discrete Laplace–Beltrami: `out = −M⁻¹ L f`.
    pub fn laplace_beltrami(&self, f: &[f64], out: &mut [f64]) {
        self.apply_stiffness(f, out);
        for (o, &m) in out.iter_mut().zip(&self.mass) {
            *o = -*o / m;
        }
    }

    /// Rayleigh quotient `fᵀLf / fᵀMf`; the matching Laplace–Beltrami
    /// eigenvalue estimate is its negative.
    pub fn rayleigh(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.n_vertices());
        let mut lf = vec![0.0; f.len()];
        self.apply_stiffness(f, &mut lf);
        let num = pairwise_sum(f.iter().zip(&lf).map(|(&a, &b)| a * b));
        let den = pairwise_sum(f.iter().zip(&self.mass).map(|(&a, &m)| a * a * m));
        num / den
    }

    fn stiffness_diagonal(&self) -> &[f64] {
        &self.diagonal
    }
}

/// PDE and run configuration. `Default` is the dot-forming regime on a
/// level-4 icosphere of circumference 2.5, sampled every 20 time units up
/// to t = 2·10⁴.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayScottParams {
    /// Feed rate A.
    pub a: f64,
    /// Kill rate B.
    pub b: f64,
    /// Nominal activator diffusivity (scaled by `length_scale²`).
    pub du: f64,
    /// Nominal substrate diffusivity (scaled by `length_scale²`).
    pub dv: f64,
    /// Physical length per unit of the nominal diffusion scale.
    pub length_scale: f64,
    /// Sphere radius; the default circumference is 2.5.
    pub radius: f64,
    /// Icosphere subdivision level.
    pub level: u32,
    /// Explicit step size; `None` derives one from the stability bound and
    /// rounds it down so the output stride is an exact multiple.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub output_stride: f64,
    pub output_start: f64,
    pub init: GsInit,
    pub integrator: GsIntegrator,
    /// Diagnostic switch: disable the reaction terms (pure diffusion).
    pub reaction_enabled: bool,
    /// Retain per-frame vertex states so gradients can be derived.
    pub keep_vertex_frames: bool,
}

/// Initial state of the two species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GsInit {
    /// `(u, v) = (0, 1)` everywhere except the quarter-sphere patch
    /// `|lat| ≤ 45° ∧ |lon| ≤ 45°`, which starts at `(1/4, 1/2)` plus
    /// seeded uniform noise of the given amplitude on both species.
    Patch { seed: u64, noise_amplitude: f64 },
    /// Spatially uniform state.
    Uniform { u: f64, v: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsIntegrator {
    /// Fully explicit Euler (default).
    Euler,
    /// Implicit diffusion (backward Euler via conjugate gradients) with
    /// explicit reaction.
    Imex,
}

impl Default for GrayScottParams {
    fn default() -> Self {
        GrayScottParams {
            a: 0.04,
            b: 0.0584,
            du: 1e5,
            dv: 2e5,
            length_scale: 1e-5,
            radius: 2.5 / (2.0 * PI),
            level: 4,
            dt: None,
            t_end: 2e4,
            output_stride: 20.0,
            output_start: 0.0,
            init: GsInit::Patch {
                seed: 0,
                noise_amplitude: 0.01,
            },
            integrator: GsIntegrator::Euler,
            reaction_enabled: true,
            keep_vertex_frames: false,
        }
    }
}

/// Published parameter pairs (A, B) for the three regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsPreset {
    Dots,
    Stripes,
    Turbulent,
}

impl GsPreset {
    pub fn name(self) -> &'static str {
        match self {
            GsPreset::Dots => "dots",
            GsPreset::Stripes => "stripes",
            GsPreset::Turbulent => "turbulent",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "dots" => Ok(GsPreset::Dots),
            "stripes" => Ok(GsPreset::Stripes),
            "turbulent" => Ok(GsPreset::Turbulent),
            other => Err(Error::InvalidArgument(format!(
                "unknown Gray-Scott preset `{other}`"
            ))),
        }
    }

    pub fn params(self, seed: u64) -> GrayScottParams {
        let (a, b) = match self {
            GsPreset::Dots => (0.04, 0.0584),
            GsPreset::Stripes => (0.04, 0.062),
            GsPreset::Turbulent => (0.01, 0.033),
        };
        GrayScottParams {
            a,
            b,
            init: GsInit::Patch {
                seed,
                noise_amplitude: 0.01,
            },
            ..GrayScottParams::default()
        }
    }
}

/// Which species to project out of a rank-2 (u, v) frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsSpecies {
    U,
    V,
}

impl GsSpecies {
    pub fn name(self) -> &'static str {
        match self {
            GsSpecies::U => "u",
            GsSpecies::V => "v",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "u" => Ok(GsSpecies::U),
            "v" => Ok(GsSpecies::V),
            other => Err(Error::InvalidArgument(format!(
                "unknown species `{other}` (expected `u` or `v`)"
            ))),
        }
    }

    fn column(self) -> usize {
        match self {
            GsSpecies::U => 0,
            GsSpecies::V => 1,
        }
    }
}

/// A completed simulation: the rank-2 (u, v) face series plus, when
/// requested, the per-frame vertex states needed for gradients.
pub struct GsRun {
    series: FieldSeries,
    vertex_frames: Option<Vec<Vec<f64>>>,
    mesh: Arc<TriMesh>,
    dt: f64,
}

impl GsRun {
    pub fn series(&self) -> &FieldSeries {
        &self.series
    }

    pub fn into_series(self) -> FieldSeries {
        self.series
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    /// The step size the run actually used.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Interleaved (u, v) vertex values of emitted frame `i`, if retained.
    pub fn vertex_frame(&self, i: usize) -> Option<&[f64]> {
        self.vertex_frames.as_ref().map(|v| v[i].as_slice())
    }

    /// Rank-1 face series of one species.
    pub fn scalar_series(&self, species: GsSpecies) -> FieldSeries {
        let c = species.column();
        self.series.map_to_scalar(|uv| uv[c])
    }

    /// Rank-3 face series of the piecewise-linear (P1) gradient of one
    /// species. Requires `keep_vertex_frames`.
    pub fn gradient_series(&self, species: GsSpecies) -> Result<FieldSeries> {
        let frames = self.vertex_frames.as_ref().ok_or_else(|| {
            Error::InvalidArgument(
                "vertex states were not retained; rerun with keep_vertex_frames".into(),
            )
        })?;
        let c = species.column();
        let space = self.series.space().clone();
        let mut out = Vec::with_capacity(frames.len());
        for vf in frames {
            let scalar: Vec<f64> = vf.iter().skip(c).step_by(2).copied().collect();
            let grads = face_gradient(&self.mesh, &scalar)?;
            let mut values = Vec::with_capacity(grads.len() * 3);
            for g in grads {
                values.extend_from_slice(&g);
            }
            out.push(VectorField::new(space.clone(), 3, values)?);
        }
        FieldSeries::new(out, self.series.timestamps().to_vec())
    }
}

/// Piecewise-linear gradient of a vertex-valued function, constant per
/// face: `∇f = Σ_i f_i ∇λ_i` with the barycentric basis gradients
/// `∇λ_i = n̂ × (x_k − x_j) / 2A` for (i, j, k) cyclic. Exact on functions
/// linear over a face (it returns the tangential part of the true gradient).
pub fn face_gradient(mesh: &TriMesh, vertex_values: &[f64]) -> Result<Vec<[f64; 3]>> {
    if vertex_values.len() != mesh.n_vertices() {
        return Err(Error::ShapeMismatch {
            expected: mesh.n_vertices(),
            got: vertex_values.len(),
        });
    }
    let mut out = Vec::with_capacity(mesh.n_faces());
    for f in 0..mesh.n_faces() {
        let [a, b, c] = mesh.face(f);
        let (pa, pb, pc) = (mesh.vertex(a), mesh.vertex(b), mesh.vertex(c));
        let n = cross(sub(pb, pa), sub(pc, pa));
        let two_area = dot3(n, n).sqrt();
        let nhat = normalize(n);
        let mut g = [0.0; 3];
        let corners = [(a, pb, pc), (b, pc, pa), (c, pa, pb)];
        for &(i, pj, pk) in &corners {
            let e = sub(pk, pj);
            let perp = cross(nhat, e);
            let fi = vertex_values[i];
            for d in 0..3 {
                g[d] += fi * perp[d] / two_area;
            }
        }
        out.push(g);
    }
    Ok(out)
}

fn latlon(p: [f64; 3]) -> (f64, f64) {
    let r = dot3(p, p).sqrt();
    let lat = (p[2] / r).clamp(-1.0, 1.0).asin();
    let lon = p[1].atan2(p[0]);
    (lat, lon)
}

struct GsSim {
    lap: MeshLaplacian,
    du_eff: f64,
    dv_eff: f64,
    a: f64,
    b: f64,
    dt: f64,
    reaction_enabled: bool,
    u: Vec<f64>,
    v: Vec<f64>,
    lu: Vec<f64>,
    lv: Vec<f64>,
    cg: Option<CgBuffers>,
}

struct CgBuffers {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    rhs: Vec<f64>,
}

impl GsSim {
    fn reaction(&self, u: f64, v: f64) -> (f64, f64) {
        if !self.reaction_enabled {
            return (0.0, 0.0);
        }
        let r = u * u * v;
        (r - (self.a + self.b) * u, -r + self.a * (1.0 - v))
    }

    /// One explicit Euler step; returns max(|u|, |v|) afterwards.
    fn step_euler(&mut self) -> f64 {
        self.lap.apply_stiffness(&self.u, &mut self.lu);
        self.lap.apply_stiffness(&self.v, &mut self.lv);
        let m = self.lap.mass();
        let mut max_abs = 0.0_f64;
        for i in 0..self.u.len() {
            let (fu, fv) = self.reaction(self.u[i], self.v[i]);
            self.u[i] += self.dt * (fu - self.du_eff * self.lu[i] / m[i]);
            self.v[i] += self.dt * (fv - self.dv_eff * self.lv[i] / m[i]);
            let a = self.u[i].abs().max(self.v[i].abs());
            if !(a <= max_abs) {
                max_abs = if a.is_nan() { f64::NAN } else { a };
            }
        }
        max_abs
    }

    /// One IMEX step: reaction evaluated explicitly at the pre-step state,
    /// backward-Euler diffusion solved per species by Jacobi-preconditioned
    /// conjugate gradients on the SPD system `(M + dt·D·L) x = M (s + dt·f)`.
    fn step_imex(&mut self, time: f64) -> Result<f64> {
        let n = self.u.len();
        let mut cg = self.cg.take().expect("imex buffers");
        // Stash both reaction terms (lu := fᵤ, lv := fᵥ) before either
        // species is advanced.
        for i in 0..n {
            let (fu, fv) = self.reaction(self.u[i], self.v[i]);
            self.lu[i] = fu;
            self.lv[i] = fv;
        }
        let m = self.lap.mass();
        for i in 0..n {
            cg.rhs[i] = m[i] * (self.u[i] + self.dt * self.lu[i]);
        }
        cg_solve(&self.lap, self.dt * self.du_eff, &mut self.u, &mut cg, time)?;
        for i in 0..n {
            cg.rhs[i] = m[i] * (self.v[i] + self.dt * self.lv[i]);
        }
        cg_solve(&self.lap, self.dt * self.dv_eff, &mut self.v, &mut cg, time)?;
        self.cg = Some(cg);
        let mut max_abs = 0.0_f64;
        for i in 0..n {
            let a = self.u[i].abs().max(self.v[i].abs());
            if !(a <= max_abs) {
                max_abs = if a.is_nan() { f64::NAN } else { a };
            }
        }
        Ok(max_abs)
    }
}

/// Conjugate gradients on `(M + dt_d·L) x = bufs.rhs`, warm-started from `x`.
fn cg_solve(
    lap: &MeshLaplacian,
    dt_d: f64,
    x: &mut [f64],
    bufs: &mut CgBuffers,
    time: f64,
) -> Result<()> {
    let n = x.len();
    let m = lap.mass();
    let diag = lap.stiffness_diagonal();
    let matvec = |input: &[f64], out: &mut [f64], lap: &MeshLaplacian| {
        lap.apply_stiffness(input, out);
        for i in 0..input.len() {
            out[i] = m[i] * input[i] + dt_d * out[i];
        }
    };
    matvec(x, &mut bufs.ap, lap);
    for i in 0..n {
        bufs.r[i] = bufs.rhs[i] - bufs.ap[i];
    }
    let bnorm = pairwise_sum(bufs.rhs.iter().map(|&b| b * b)).sqrt();
    let tol = 1e-12 * bnorm.max(f64::MIN_POSITIVE);
    let precond = |r: &[f64], z: &mut [f64]| {
        for i in 0..r.len() {
            z[i] = r[i] / (m[i] + dt_d * diag[i]);
        }
    };
    let rnorm = pairwise_sum(bufs.r.iter().map(|&r| r * r)).sqrt();
    if rnorm <= tol {
        return Ok(());
    }
    precond(&bufs.r, &mut bufs.z);
    bufs.p.copy_from_slice(&bufs.z);
    let mut rz = pairwise_sum(bufs.r.iter().zip(&bufs.z).map(|(&r, &z)| r * z));
    for _ in 0..1000 {
        matvec(&bufs.p, &mut bufs.ap, lap);
        let pap = pairwise_sum(bufs.p.iter().zip(&bufs.ap).map(|(&p, &ap)| p * ap));
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * bufs.p[i];
            bufs.r[i] -= alpha * bufs.ap[i];
        }
        let rnorm = pairwise_sum(bufs.r.iter().map(|&r| r * r)).sqrt();
        if rnorm <= tol {
            return Ok(());
        }
        precond(&bufs.r, &mut bufs.z);
        let rz_next = pairwise_sum(bufs.r.iter().zip(&bufs.z).map(|(&r, &z)| r * z));
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            bufs.p[i] = bufs.z[i] + beta * bufs.p[i];
        }
    }
    Err(Error::Unstable {
        time,
        detail: "conjugate-gradient diffusion solve did not converge".into(),
    })
}

/// Run a full simulation on an icosphere, returning the emitted series.
pub fn simulate(params: &GrayScottParams) -> Result<GsRun> {
    let mesh = crate::space::icosphere(params.radius, params.level)?;
    simulate_on_mesh(params, mesh)
}

/// Run on a caller-supplied mesh (the icosphere presets use [`simulate`]).
pub fn simulate_on_mesh(params: &GrayScottParams, mesh: TriMesh) -> Result<GsRun> {
    for (name, val) in [
        ("a", params.a),
        ("b", params.b),
        ("du", params.du),
        ("dv", params.dv),
        ("length_scale", params.length_scale),
    ] {
        if !val.is_finite() || val < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{name} must be finite and non-negative, got {val}"
            )));
        }
    }
    if !(params.output_stride > 0.0) {
        return Err(Error::InvalidArgument(
            "output_stride must be positive".into(),
        ));
    }
    let du_eff = params.du * params.length_scale * params.length_scale;
    let dv_eff = params.dv * params.length_scale * params.length_scale;

    let dt = match params.dt {
        Some(dt) if dt > 0.0 && dt.is_finite() => dt,
        Some(dt) => {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )))
        }
        None => {
            let h = mesh.min_edge_length();
            let dmax = du_eff.max(dv_eff);
            let cap = if dmax > 0.0 {
                (DT_SAFETY * h * h / dmax).min(DT_REACTION_CAP)
            } else {
                DT_REACTION_CAP
            };
            // Divide the stride evenly so emission times are exact.
            let substeps = (params.output_stride / cap).ceil().max(1.0);
            params.output_stride / substeps
        }
    };

    let total_steps = steps_of(params.t_end, dt, "t_end")?;
    let frame_every = steps_of(params.output_stride, dt, "output_stride")?;
    if frame_every == 0 {
        return Err(Error::InvalidArgument(
            "output_stride must be at least dt".into(),
        ));
    }
    let start_step = steps_of(params.output_start, dt, "output_start")?;
    if start_step > total_steps {
        return Err(Error::InvalidArgument(format!(
            "output_start = {} lies beyond t_end = {}",
            params.output_start, params.t_end
        )));
    }

    let lap = MeshLaplacian::new(&mesh)?;
    let n = mesh.n_vertices();
    let (mut u, mut v) = match params.init {
        GsInit::Uniform { u, v } => (vec![u; n], vec![v; n]),
        GsInit::Patch {
            seed,
            noise_amplitude,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut u = vec![0.0; n];
            let mut v = vec![1.0; n];
            let quarter = PI / 4.0;
            for i in 0..n {
                let (lat, lon) = latlon(mesh.vertex(i));
                if lat.abs() <= quarter && lon.abs() <= quarter {
                    u[i] = 0.25 + rng.gen_range(-noise_amplitude..=noise_amplitude);
                    v[i] = 0.5 + rng.gen_range(-noise_amplitude..=noise_amplitude);
                }
            }
            (u, v)
        }
    };
    for (name, vals) in [("u", &u), ("v", &v)] {
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "initial {name} contains non-finite values"
            )));
        }
    }

    let space = Arc::new(MeasureSpace::mesh(mesh)?);
    let mesh = space.tri_mesh().expect("mesh-backed space").clone();

    let mut sim = GsSim {
        cg: match params.integrator {
            GsIntegrator::Imex => Some(CgBuffers {
                r: vec![0.0; n],
                z: vec![0.0; n],
                p: vec![0.0; n],
                ap: vec![0.0; n],
                rhs: vec![0.0; n],
            }),
            GsIntegrator::Euler => None,
        },
        lap,
        du_eff,
        dv_eff,
        a: params.a,
        b: params.b,
        dt,
        reaction_enabled: params.reaction_enabled,
        lu: vec![0.0; n],
        lv: vec![0.0; n],
        u: std::mem::take(&mut u),
        v: std::mem::take(&mut v),
    };

    let mut frames = Vec::new();
    let mut times = Vec::new();
    let mut vertex_frames = params.keep_vertex_frames.then(Vec::new);
    for step in 0..=total_steps {
        if step >= start_step && (step - start_step) % frame_every == 0 {
            frames.push(face_means(&mesh, &space, &sim.u, &sim.v)?);
            times.push(params.output_start + (frames.len() - 1) as f64 * params.output_stride);
            if let Some(vf) = vertex_frames.as_mut() {
                let mut interleaved = Vec::with_capacity(2 * n);
                for i in 0..n {
                    interleaved.push(sim.u[i]);
                    interleaved.push(sim.v[i]);
                }
                vf.push(interleaved);
            }
        }
        if step < total_steps {
            let time = (step + 1) as f64 * dt;
            let max_abs = match params.integrator {
                GsIntegrator::Euler => sim.step_euler(),
                GsIntegrator::Imex => sim.step_imex(time)?,
            };
            if !(max_abs < STABILITY_BOUND) {
                return Err(Error::Unstable {
                    time,
                    detail: format!(
                        "max(|u|, |v|) = {max_abs} exceeds {STABILITY_BOUND}"
                    ),
                });
            }
        }
    }

    let series = FieldSeries::new(frames, times)?;
    Ok(GsRun {
        series,
        vertex_frames,
        mesh,
        dt,
    })
}

/// Rank-2 (u, v) face frame: each face carries the mean of its corners.
fn face_means(
    mesh: &TriMesh,
    space: &Arc<MeasureSpace>,
    u: &[f64],
    v: &[f64],
) -> Result<VectorField> {
    let mut values = Vec::with_capacity(mesh.n_faces() * 2);
    for f in 0..mesh.n_faces() {
        let [a, b, c] = mesh.face(f);
        values.push((u[a] + u[b] + u[c]) / 3.0);
        values.push((v[a] + v[b] + v[c]) / 3.0);
    }
    VectorField::new(space.clone(), 2, values)
}
