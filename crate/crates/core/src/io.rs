//! On-disk formats: binary fields, distance matrices, embeddings, OFF
//! meshes, portable graymaps/pixmaps, CSV tables, and series directories.
//!
//! The three binary formats share a layout convention — a four-byte magic,
//! a little-endian `u32` version, then little-endian integers and IEEE
//! doubles:
//!
//! * `DMSF` (field): `n_points: u64`, `rank: u32`, then `n·rank` doubles,
//!   point-major.
//! * `DMSD` (distance matrix): `n: u64`, `p: f64`, `q: f64` (∞ encoded as
//!   the IEEE infinity), then `n²` *squared* distances, row-major.
//! * `DMSE` (embedding): `n: u64`, `k_retained: u64`, `p`, `q`,
//!   `eps_keep`, `negative_mass`, then `n` eigenvalues (descending) and
//!   the `n × k` coordinate matrix, row-major.
//!
//! A *series directory* holds `manifest.json`, a space description
//! (`space.csv` for lattice/generic weights, `mesh.off` for meshes), and
//! one `frame_NNNNNN.dmsf` per frame. Loading prefers the manifest and
//! degrades gracefully: `space.csv`, then `mesh.off`, then a unit-weight
//! generic space inferred from the first frame, with unit timestamps.
//!
//! Images are 8-bit binary PGM (`P5`) and PPM (`P6`) with maxval 255. A
//! written image is an affine map of the field onto 0–255, and the exact
//! `min max` pair is stored next to it in a `<name>.range` sidecar so the
//! mapping can be inverted on load; images without a sidecar read back as
//! raw 0–255 values. All text output uses the shortest round-tripping
//! float representation, so repeated exports are byte-identical.

use crate::error::{Error, Result};
use crate::field::{PQ, VectorField};
use crate::mds::Embedding;
use crate::metrics::DistanceMatrix;
use crate::series::FieldSeries;
use crate::space::{MeasureSpace, SpaceKind, TriMesh};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

const FIELD_MAGIC: &[u8; 4] = b"DMSF";
const DIST_MAGIC: &[u8; 4] = b"DMSD";
const EMBED_MAGIC: &[u8; 4] = b"DMSE";
const FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// little-endian primitives

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Reader {
            bytes,
            pos: 0,
            path,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(self.path, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expect {
            return Err(Error::parse(
                self.path,
                format!(
                    "bad magic: expected {:?}, got {:?}",
                    String::from_utf8_lossy(expect),
                    String::from_utf8_lossy(got)
                ),
            ));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::parse(
                self.path,
                format!("unsupported format version {v}"),
            ));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::parse(
                self.path,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

struct Writer<W: Write> {
    inner: W,
    path: PathBuf,
}

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64_slice(&mut self, vs: &[f64]) -> Result<()> {
        for &v in vs {
            self.f64(v)?;
        }
        Ok(())
    }

    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner
            .write_all(b)
            .map_err(|e| Error::io(&self.path, e))
    }

    fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn writer(path: &Path) -> Result<Writer<BufWriter<fs::File>>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(Writer {
        inner: BufWriter::new(file),
        path: path.to_path_buf(),
    })
}

// ---------------------------------------------------------------------------
// fields

pub fn write_field(path: impl AsRef<Path>, field: &VectorField) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.bytes(FIELD_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u64(field.n_points() as u64)?;
    w.u32(field.rank() as u32)?;
    w.f64_slice(field.values())?;
    w.flush()
}

/// Read a field's raw payload: `(n_points, rank, values)`.
pub fn read_field_raw(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(&bytes, path);
    r.magic(FIELD_MAGIC)?;
    r.version()?;
    let n = r.u64()? as usize;
    let rank = r.u32()? as usize;
    let values = r.f64_vec(n * rank)?;
    r.finish()?;
    Ok((n, rank, values))
}

/// Read a field onto an existing space (validating the point count).
pub fn read_field(path: impl AsRef<Path>, space: Arc<MeasureSpace>) -> Result<VectorField> {
    let path = path.as_ref();
    let (n, rank, values) = read_field_raw(path)?;
    if n != space.n_points() {
        return Err(Error::ShapeMismatch {
            expected: space.n_points(),
            got: n,
        });
    }
    VectorField::new(space, rank, values)
}

// ---------------------------------------------------------------------------
// distance matrices

pub fn write_distance_matrix(path: impl AsRef<Path>, dm: &DistanceMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.bytes(DIST_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u64(dm.n() as u64)?;
    w.f64(dm.pq().p.as_f64())?;
    w.f64(dm.pq().q.as_f64())?;
    w.f64_slice(dm.squared())?;
    w.flush()
}

pub fn read_distance_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(&bytes, path);
    r.magic(DIST_MAGIC)?;
    r.version()?;
    let n = r.u64()? as usize;
    let pq = PQ::new(r.f64()?, r.f64()?)?;
    let d2 = r.f64_vec(n * n)?;
    r.finish()?;
    DistanceMatrix::from_squared(n, pq, d2)
}

// ---------------------------------------------------------------------------
// embeddings

pub fn write_embedding(path: impl AsRef<Path>, emb: &Embedding) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.bytes(EMBED_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u64(emb.n() as u64)?;
    w.u64(emb.k_retained() as u64)?;
    w.f64(emb.pq().p.as_f64())?;
    w.f64(emb.pq().q.as_f64())?;
    w.f64(emb.eps_keep())?;
    w.f64(emb.negative_mass())?;
    w.f64_slice(emb.eigenvalues())?;
    w.f64_slice(emb.coords())?;
    w.flush()
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<Embedding> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(&bytes, path);
    r.magic(EMBED_MAGIC)?;
    r.version()?;
    let n = r.u64()? as usize;
    let k = r.u64()? as usize;
    let pq = PQ::new(r.f64()?, r.f64()?)?;
    let eps_keep = r.f64()?;
    let negative_mass = r.f64()?;
    let eigenvalues = r.f64_vec(n)?;
    let coords = r.f64_vec(n * k)?;
    r.finish()?;
    Embedding::from_parts(eigenvalues, coords, k, negative_mass, eps_keep, pq)
}

// ---------------------------------------------------------------------------
// OFF meshes

pub fn write_off(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("OFF\n");
    out.push_str(&format!("{} {} 0\n", mesh.n_vertices(), mesh.n_faces()));
    for v in mesh.vertices() {
        out.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
    }
    for f in mesh.faces() {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_off(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?;
    if header != "OFF" {
        return Err(Error::parse(path, format!("expected OFF header, got `{header}`")));
    }
    let counts = lines
        .next()
        .ok_or_else(|| Error::parse(path, "missing element counts"))?;
    let mut it = counts.split_whitespace();
    let nv: usize = parse_tok(&mut it, path, "vertex count")?;
    let nf: usize = parse_tok(&mut it, path, "face count")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(path, format!("missing vertex {i}")))?;
        let mut it = line.split_whitespace();
        let x: f64 = parse_tok(&mut it, path, "vertex coordinate")?;
        let y: f64 = parse_tok(&mut it, path, "vertex coordinate")?;
        let z: f64 = parse_tok(&mut it, path, "vertex coordinate")?;
        vertices.push([x, y, z]);
    }
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(path, format!("missing face {i}")))?;
        let mut it = line.split_whitespace();
        let arity: usize = parse_tok(&mut it, path, "face arity")?;
        if arity != 3 {
            return Err(Error::parse(
                path,
                format!("face {i} has {arity} vertices; only triangles are supported"),
            ));
        }
        let a: usize = parse_tok(&mut it, path, "face index")?;
        let b: usize = parse_tok(&mut it, path, "face index")?;
        let c: usize = parse_tok(&mut it, path, "face index")?;
        faces.push([a, b, c]);
    }
    TriMesh::new(vertices, faces)
}

fn parse_tok<'a, T: std::str::FromStr>(
    it: &mut impl Iterator<Item = &'a str>,
    path: &Path,
    what: &str,
) -> Result<T> {
    it.next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, format!("missing or malformed {what}")))
}

// ---------------------------------------------------------------------------
// space descriptions (weights CSV)

pub fn write_space_csv(path: impl AsRef<Path>, space: &MeasureSpace) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    match space.kind() {
        SpaceKind::Lattice { width, height } => {
            out.push_str(&format!("# lattice,{width},{height}\n"));
        }
        SpaceKind::Generic => {
            out.push_str(&format!("# generic,{},0\n", space.n_points()));
        }
        SpaceKind::TriMesh(_) => {
            return Err(Error::UnsupportedSpace(
                "mesh spaces are stored as mesh.off, not space.csv".into(),
            ));
        }
    }
    for &w in space.weights() {
        out.push_str(&format!("{w}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_space_csv(path: impl AsRef<Path>) -> Result<MeasureSpace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(path, "missing `# kind,w,h` header"))?
        .trim();
    let parts: Vec<&str> = header.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::parse(path, "header must be `kind,w,h`"));
    }
    let weights: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::parse(path, format!("malformed weight `{l}`")))
        })
        .collect::<Result<_>>()?;
    match parts[0] {
        "lattice" => {
            let w: usize = parts[1]
                .parse()
                .map_err(|_| Error::parse(path, "malformed lattice width"))?;
            let h: usize = parts[2]
                .parse()
                .map_err(|_| Error::parse(path, "malformed lattice height"))?;
            if weights.len() != w * h {
                return Err(Error::parse(
                    path,
                    format!("expected {} weights, found {}", w * h, weights.len()),
                ));
            }
            // Lattice weights are identically 1 by construction.
            if weights.iter().any(|&x| x != 1.0) {
                return Err(Error::parse(path, "lattice weights must all equal 1"));
            }
            MeasureSpace::lattice(w, h)
        }
        "generic" => MeasureSpace::generic(weights),
        other => Err(Error::parse(path, format!("unknown space kind `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// images (8-bit binary PGM / PPM with affine .range sidecar)

fn range_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".range");
    path.with_file_name(name)
}

fn affine_bytes(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, Vec<u8>) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.clone() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let bytes = values
        .map(|v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    (lo, hi, bytes)
}

fn write_range_sidecar(path: &Path, lo: f64, hi: f64) -> Result<()> {
    let sidecar = range_path(path);
    fs::write(&sidecar, format!("{lo} {hi}\n")).map_err(|e| Error::io(&sidecar, e))
}

fn lattice_dims_of(field: &VectorField) -> Result<(usize, usize)> {
    field
        .space()
        .lattice_dims()
        .ok_or_else(|| Error::UnsupportedSpace("image export requires a lattice space".into()))
}

/// Write one component as a PGM image plus a `.range` sidecar recording the
/// affine map `[min, max] → [0, 255]`.
pub fn write_pgm(path: impl AsRef<Path>, field: &VectorField, component: usize) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = lattice_dims_of(field)?;
    if component >= field.rank() {
        return Err(Error::InvalidArgument(format!(
            "component {component} out of range for rank {}",
            field.rank()
        )));
    }
    let values = (0..field.n_points()).map(|s| field.at(s, component));
    let (lo, hi, bytes) = affine_bytes(values);
    let mut out = Vec::with_capacity(bytes.len() + 32);
    out.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
    out.extend_from_slice(&bytes);
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    write_range_sidecar(path, lo, hi)
}

/// Write three components as a PPM image (shared affine range).
pub fn write_ppm(
    path: impl AsRef<Path>,
    field: &VectorField,
    components: [usize; 3],
) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = lattice_dims_of(field)?;
    for &c in &components {
        if c >= field.rank() {
            return Err(Error::InvalidArgument(format!(
                "component {c} out of range for rank {}",
                field.rank()
            )));
        }
    }
    let values = (0..field.n_points()).flat_map(|s| components.map(|c| field.at(s, c)));
    let (lo, hi, bytes) = affine_bytes(values);
    let mut out = Vec::with_capacity(bytes.len() + 32);
    out.extend_from_slice(format!("P6\n{w} {h}\n255\n").as_bytes());
    out.extend_from_slice(&bytes);
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    write_range_sidecar(path, lo, hi)
}

/// A decoded image: lattice dimensions, channel rank (1 or 3), and values
/// interleaved point-major.
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rank: usize,
    pub values: Vec<f64>,
}

/// Read a binary PGM (`P5`) or PPM (`P6`). If a `.range` sidecar exists,
/// bytes map back through its affine range; otherwise values are raw 0–255.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (rank, w, h, offset) = parse_pnm_header(&bytes, path)?;
    let expected = w * h * rank;
    let data = &bytes[offset..];
    if data.len() != expected {
        return Err(Error::parse(
            path,
            format!("expected {expected} data bytes, found {}", data.len()),
        ));
    }
    let sidecar = range_path(path);
    let map: Box<dyn Fn(u8) -> f64> = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let mut it = text.split_whitespace();
        let lo: f64 = parse_tok(&mut it, &sidecar, "range minimum")?;
        let hi: f64 = parse_tok(&mut it, &sidecar, "range maximum")?;
        Box::new(move |b| lo + f64::from(b) / 255.0 * (hi - lo))
    } else {
        Box::new(|b| f64::from(b))
    };
    Ok(Image {
        width: w,
        height: h,
        rank,
        values: data.iter().map(|&b| map(b)).collect(),
    })
}

/// Load a list of same-shape images as a series on a unit-weight lattice.
pub fn read_image_series(paths: &[PathBuf], t0: f64, stride: f64) -> Result<FieldSeries> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no image files given".into()));
    }
    let first = read_image(&paths[0])?;
    let space = Arc::new(MeasureSpace::lattice(first.width, first.height)?);
    let mut frames = Vec::with_capacity(paths.len());
    frames.push(VectorField::new(space.clone(), first.rank, first.values)?);
    for p in &paths[1..] {
        let img = read_image(p)?;
        if (img.width, img.height, img.rank) != (first.width, first.height, first.rank) {
            return Err(Error::parse(
                p,
                format!(
                    "image shape {}x{}x{} differs from first image {}x{}x{}",
                    img.width, img.height, img.rank, first.width, first.height, first.rank
                ),
            ));
        }
        frames.push(VectorField::new(space.clone(), img.rank, img.values)?);
    }
    FieldSeries::with_uniform_times(frames, t0, stride)
}

fn parse_pnm_header(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, usize)> {
    let rank = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::parse(path, "not a binary PGM/PPM (P5/P6)")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and `#` comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, "malformed header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::parse(path, "malformed header number"))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::parse(
            path,
            format!("unsupported maxval {maxval}; only 255 is handled"),
        ));
    }
    if w == 0 || h == 0 {
        return Err(Error::parse(path, "zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the data.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::parse(path, "missing data separator"));
    }
    Ok((rank, w, h, pos + 1))
}

// ---------------------------------------------------------------------------
// CSV tables

/// Write a numeric table with a header row. Floats use the shortest
/// round-tripping representation.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::ShapeMismatch {
                expected: header.len(),
                got: row.len(),
            });
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// series directories

#[derive(Serialize, Deserialize)]
struct SeriesManifest {
    version: u32,
    rank: usize,
    n_frames: usize,
    space: SpaceDesc,
    timestamps: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SpaceDesc {
    Lattice { width: usize, height: usize },
    Mesh { file: String },
    Generic { file: String },
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:06}.dmsf")
}

/// Write a series directory: frames, space description, and manifest.
pub fn write_series(dir: impl AsRef<Path>, series: &FieldSeries) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let space = series.space();
    let desc = match space.kind() {
        SpaceKind::Lattice { width, height } => {
            write_space_csv(dir.join("space.csv"), space)?;
            SpaceDesc::Lattice {
                width: *width,
                height: *height,
            }
        }
        SpaceKind::Generic => {
            write_space_csv(dir.join("space.csv"), space)?;
            SpaceDesc::Generic {
                file: "space.csv".into(),
            }
        }
        SpaceKind::TriMesh(mesh) => {
            write_off(dir.join("mesh.off"), mesh)?;
            SpaceDesc::Mesh {
                file: "mesh.off".into(),
            }
        }
    };
    for (i, frame) in series.frames().iter().enumerate() {
        write_field(dir.join(frame_name(i)), frame)?;
    }
    let manifest = SeriesManifest {
        version: FORMAT_VERSION,
        rank: series.rank(),
        n_frames: series.n_frames(),
        space: desc,
        timestamps: series.timestamps().to_vec(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::parse(&path, e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

/// Load a series directory, preferring `manifest.json` and falling back to
/// `space.csv`, `mesh.off`, or a generic unit-weight space, in that order.
pub fn read_series(dir: impl AsRef<Path>) -> Result<FieldSeries> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: SeriesManifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(&manifest_path, e.to_string()))?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::parse(
                &manifest_path,
                format!("unsupported manifest version {}", manifest.version),
            ));
        }
        let space = Arc::new(match &manifest.space {
            SpaceDesc::Lattice { width, height } => MeasureSpace::lattice(*width, *height)?,
            SpaceDesc::Mesh { file } => MeasureSpace::mesh(read_off(dir.join(file))?)?,
            SpaceDesc::Generic { file } => read_space_csv(dir.join(file))?,
        });
        let mut frames = Vec::with_capacity(manifest.n_frames);
        for i in 0..manifest.n_frames {
            let frame = read_field(dir.join(frame_name(i)), space.clone())?;
            if frame.rank() != manifest.rank {
                return Err(Error::parse(
                    dir.join(frame_name(i)),
                    format!(
                        "frame rank {} does not match manifest rank {}",
                        frame.rank(),
                        manifest.rank
                    ),
                ));
            }
            frames.push(frame);
        }
        return FieldSeries::new(frames, manifest.timestamps);
    }

    // No manifest: discover frames by name.
    let mut frame_files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".dmsf"))
        })
        .collect();
    frame_files.sort();
    if frame_files.is_empty() {
        return Err(Error::parse(dir, "no manifest.json and no frame_*.dmsf files"));
    }

    let space_csv = dir.join("space.csv");
    let mesh_off = dir.join("mesh.off");
    let space = if space_csv.exists() {
        Arc::new(read_space_csv(&space_csv)?)
    } else if mesh_off.exists() {
        Arc::new(MeasureSpace::mesh(read_off(&mesh_off)?)?)
    } else {
        let (n, _, _) = read_field_raw(&frame_files[0])?;
        Arc::new(MeasureSpace::generic(vec![1.0; n])?)
    };
    let frames = frame_files
        .iter()
        .map(|p| read_field(p, space.clone()))
        .collect::<Result<Vec<_>>>()?;
    FieldSeries::with_uniform_times(frames, 0.0, 1.0)
}
