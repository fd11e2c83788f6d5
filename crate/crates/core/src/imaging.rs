//! Image ingestion: grayscale slice stacks, intensity classification into
//! tissue classes, and the per-voxel diffusion coefficient.
//!
//! Two input formats are understood. A slice stack is a list of binary
//! portable graymaps (`P5`, maxval 255), one file per slice, bottom to top.
//! A raw volume is a single file whose first line holds three ASCII integers
//! `nx ny nz` followed by exactly `nx·ny·nz` bytes, x fastest. Label volumes
//! written by [`write_label_volume`] use the raw layout with one byte per
//! voxel (see [`Material::code`]).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::ModelParams;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Stack of 8-bit slices; `intensities[x + y·width + z·width·height]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack {
    width: usize,
    height: usize,
    num_slices: usize,
    intensities: Vec<u8>,
}

impl ImageStack {
    pub fn new(width: usize, height: usize, num_slices: usize, intensities: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || num_slices == 0 {
            return Err(Error::InvalidInput(format!(
                "degenerate image stack {width}x{height}x{num_slices}"
            )));
        }
        let expected = width * height * num_slices;
        if intensities.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: intensities.len(),
            });
        }
        Ok(ImageStack {
            width,
            height,
            num_slices,
            intensities,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.width, self.height, self.num_slices]
    }

    pub fn intensities(&self) -> &[u8] {
        &self.intensities
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.intensities[x + self.width * (y + self.height * z)]
    }

    /// Reads a raw volume (`nx ny nz` header line, then bytes).
    pub fn load_raw(path: &Path) -> Result<Self> {
        let (dims, data) = read_raw(path)?;
        ImageStack::new(dims[0], dims[1], dims[2], data).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Loads PGM slices in the order given.
pub fn load_stack<P: AsRef<Path>>(paths: &[P]) -> Result<ImageStack> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("no slice files given".into()));
    }
    let mut dims: Option<(usize, usize, PathBuf)> = None;
    let mut intensities = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let (w, h, pixels) = read_pgm(path)?;
        match &dims {
            None => dims = Some((w, h, path.to_path_buf())),
            Some((w0, h0, first)) if (*w0, *h0) != (w, h) => {
                return Err(Error::format(
                    path,
                    format!(
                        "slice is {w}x{h} but {} is {w0}x{h0}",
                        first.display()
                    ),
                ));
            }
            Some(_) => {}
        }
        intensities.extend_from_slice(&pixels);
    }
    let (w, h, _) = dims.expect("at least one slice");
    ImageStack::new(w, h, paths.len(), intensities)
}

/// Slice files in a directory (`.pgm`, lexicographic by file name).
pub fn slice_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_pgm = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("pgm"));
        if is_pgm && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "no .pgm slices found"));
    }
    Ok(files)
}

fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = HeaderCursor::new(&bytes);
    let magic = cursor.token().ok_or_else(|| Error::format(path, "empty file"))?;
    if magic != b"P5" {
        return Err(Error::format(path, "not a binary PGM (magic `P5` expected)"));
    }
    let mut field = |name: &str| -> Result<usize> {
        let tok = cursor
            .token()
            .ok_or_else(|| Error::format(path, format!("missing {name}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, format!("bad {name} `{}`", String::from_utf8_lossy(tok))))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(Error::format(path, format!("maxval {maxval} unsupported (255 required)")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = cursor.pos + 1;
    let len = width * height;
    let pixels = bytes
        .get(start..start + len)
        .ok_or_else(|| Error::format(path, format!("truncated raster: expected {len} bytes")))?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "zero-sized image"));
    }
    Ok((width, height, pixels.to_vec()))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderCursor { bytes, pos: 0 }
    }

    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }
}

fn read_raw(path: &Path) -> Result<([usize; 3], Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing `nx ny nz` header line"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::format(path, "header is not ASCII"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::format(path, format!("bad header token `{t}`")))
        })
        .collect::<Result<_>>()?;
    let dims: [usize; 3] = dims
        .try_into()
        .map_err(|_| Error::format(path, "header must hold exactly three integers"))?;
    let data = bytes[newline + 1..].to_vec();
    let expected = dims.iter().product::<usize>();
    if data.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} voxel bytes, found {}", data.len()),
        ));
    }
    Ok((dims, data))
}

fn write_raw(path: &Path, dims: [usize; 3], data: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "{} {} {}", dims[0], dims[1], dims[2])
        .and_then(|_| file.write_all(data))
        .map_err(|e| Error::io(path, e))
}

/// Tissue class of a voxel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Material {
    Air,
    WhiteMatter,
    GrayMatter,
    Skull,
}

impl Material {
    pub const ALL: [Material; 4] = [
        Material::Air,
        Material::WhiteMatter,
        Material::GrayMatter,
        Material::Skull,
    ];

    /// Byte stored in label volumes.
    pub fn code(self) -> u8 {
        match self {
            Material::Air => 0,
            Material::WhiteMatter => 1,
            Material::GrayMatter => 2,
            Material::Skull => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Material::ALL.get(code as usize).copied()
    }

    pub fn is_tissue(self) -> bool {
        matches!(self, Material::WhiteMatter | Material::GrayMatter)
    }
}

/// Upper intensity bounds (inclusive) of the air, white and gray bands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Thresholds {
    pub air_max: u8,
    pub white_max: u8,
    pub gray_max: u8,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            air_max: 1,
            white_max: 230,
            gray_max: 240,
        }
    }
}

pub fn classify(intensity: u8, t: &Thresholds) -> Material {
    if intensity <= t.air_max {
        Material::Air
    } else if intensity <= t.white_max {
        Material::WhiteMatter
    } else if intensity <= t.gray_max {
        Material::GrayMatter
    } else {
        Material::Skull
    }
}

/// Per-voxel tissue labels on a simulation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialVolume {
    grid: Grid,
    labels: Vec<Material>,
}

impl MaterialVolume {
    pub fn new(grid: Grid, labels: Vec<Material>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: labels.len(),
            });
        }
        Ok(MaterialVolume { grid, labels })
    }

    pub fn uniform(grid: Grid, material: Material) -> Self {
        MaterialVolume {
            labels: vec![material; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[Material] {
        &self.labels
    }
}

/// Writes labels as a raw volume, one [`Material::code`] byte per voxel.
pub fn write_label_volume(mv: &MaterialVolume, path: &Path) -> Result<()> {
    let codes: Vec<u8> = mv.labels.iter().map(|m| m.code()).collect();
    write_raw(path, mv.grid.dims(), &codes)
}

/// Reads a label volume written by [`write_label_volume`]; its dimensions
/// must match `grid`.
pub fn read_label_volume(path: &Path, grid: Grid) -> Result<MaterialVolume> {
    let (dims, codes) = read_raw(path)?;
    if dims != grid.dims() {
        return Err(Error::format(
            path,
            format!(
                "label volume is {}x{}x{} but the grid is {}x{}x{}",
                dims[0],
                dims[1],
                dims[2],
                grid.nx(),
                grid.ny(),
                grid.nz()
            ),
        ));
    }
    let labels = codes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            Material::from_code(c)
                .ok_or_else(|| Error::format(path, format!("invalid label {c} at voxel {i}")))
        })
        .collect::<Result<_>>()?;
    MaterialVolume::new(grid, labels)
}

/// Nearest source index for target cell `i` when `target` cells and
/// `source` cells span the same interval. Ties resolve to the lower index.
fn nearest_source(i: usize, target: usize, source: usize) -> usize {
    // source coordinate (i + 1/2)·S/N − 1/2, rounded half down:
    // ceil(((2i+1)·S − 2N) / 2N)
    let num = (2 * i as i64 + 1) * source as i64 - 2 * target as i64;
    let den = 2 * target as i64;
    let p = num.div_euclid(den) + i64::from(num.rem_euclid(den) != 0);
    p.clamp(0, source as i64 - 1) as usize
}

/// Nearest-neighbour resampling of the stack onto `grid`, treating both as
/// cell-centred samplings of the same physical box.
pub fn resample(stack: &ImageStack, grid: &Grid, thresholds: &Thresholds) -> Result<MaterialVolume> {
    if stack.intensities.is_empty() {
        return Err(Error::InvalidInput("cannot resample an empty stack".into()));
    }
    let [nx, ny, nz] = grid.dims();
    let xs: Vec<usize> = (0..nx).map(|i| nearest_source(i, nx, stack.width)).collect();
    let ys: Vec<usize> = (0..ny).map(|j| nearest_source(j, ny, stack.height)).collect();
    let zs: Vec<usize> = (0..nz).map(|k| nearest_source(k, nz, stack.num_slices)).collect();
    let mut labels = Vec::with_capacity(grid.len());
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                labels.push(classify(stack.get(x, y, z), thresholds));
            }
        }
    }
    MaterialVolume::new(*grid, labels)
}

/// Per-voxel diffusion coefficient D(x), mm²·day⁻¹.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionField {
    grid: Grid,
    d: Vec<f64>,
}

impl DiffusionField {
    pub fn new(grid: Grid, d: Vec<f64>) -> Result<Self> {
        if d.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: d.len(),
            });
        }
        if let Some(pos) = d.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "diffusion coefficient at voxel {pos} is {}; must be finite and non-negative",
                d[pos]
            )));
        }
        Ok(DiffusionField { grid, d })
    }

    pub fn uniform(grid: Grid, d: f64) -> Result<Self> {
        DiffusionField::new(grid, vec![d; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }
}

pub fn diffusion_from_materials(mv: &MaterialVolume, model: &ModelParams) -> DiffusionField {
    let d = mv
        .labels
        .iter()
        .map(|m| match m {
            Material::WhiteMatter => model.d_white,
            Material::GrayMatter => model.d_gray,
            Material::Air | Material::Skull => 0.0,
        })
        .collect();
    DiffusionField { grid: mv.grid, d }
}

/// `(p_white, p_gray)` over tissue voxels only.
pub fn matter_fractions(mv: &MaterialVolume) -> Result<(f64, f64)> {
    let white = mv.labels.iter().filter(|&&m| m == Material::WhiteMatter).count();
    let gray = mv.labels.iter().filter(|&&m| m == Material::GrayMatter).count();
    let tissue = white + gray;
    if tissue == 0 {
        return Err(Error::InvalidInput("volume contains no tissue voxels".into()));
    }
    Ok((white as f64 / tissue as f64, gray as f64 / tissue as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_pgm(dir: &Path, name: &str, w: usize, h: usize, data: &[u8]) -> PathBuf {
        let path = dir.join(name);
        let mut bytes = format!("P5\n# test slice\n{w} {h}\n255\n").into_bytes();
        bytes.extend_from_slice(data);
        fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn classify_paper_examples() {
        let t = Thresholds::default();
        assert_eq!(classify(0, &t), Material::Air);
        assert_eq!(classify(1, &t), Material::Air);
        assert_eq!(classify(2, &t), Material::WhiteMatter);
        assert_eq!(classify(230, &t), Material::WhiteMatter);
        assert_eq!(classify(231, &t), Material::GrayMatter);
        assert_eq!(classify(235, &t), Material::GrayMatter);
        assert_eq!(classify(240, &t), Material::GrayMatter);
        assert_eq!(classify(241, &t), Material::Skull);
        assert_eq!(classify(255, &t), Material::Skull);
    }

    #[test]
    fn bands_partition_every_intensity() {
        // each band is a contiguous interval and they tile 0..=255 in order
        let t = Thresholds::default();
        let labels: Vec<_> = (0..=255u8).map(|v| classify(v, &t)).collect();
        let mut order = labels.clone();
        order.dedup();
        assert_eq!(order, Material::ALL.to_vec());
        let count = |m| labels.iter().filter(|&&l| l == m).count();
        assert_eq!(count(Material::Air), 2);
        assert_eq!(count(Material::WhiteMatter), 229);
        assert_eq!(count(Material::GrayMatter), 10);
        assert_eq!(count(Material::Skull), 15);
    }

    #[test]
    fn pgm_identity_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_pgm(dir.path(), "a.pgm", 2, 2, &[0, 255, 128, 7]);
        let stack = load_stack(&[p]).unwrap();
        assert_eq!(stack.dims(), [2, 2, 1]);
        assert_eq!(stack.intensities(), &[0, 255, 128, 7]);
    }

    #[test]
    fn pgm_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_pgm(dir.path(), "a.pgm", 2, 2, &[1; 4]);
        let b = write_pgm(dir.path(), "b.pgm", 3, 2, &[1; 6]);
        let err = load_stack(&[a.clone(), b]).unwrap_err();
        assert!(err.to_string().contains("b.pgm"), "{err}");

        let p2 = dir.path().join("ascii.pgm");
        fs::write(&p2, "P2\n1 1\n255\n0\n").unwrap();
        let err = load_stack(&[p2]).unwrap_err();
        assert!(err.to_string().contains("ascii.pgm") && err.to_string().contains("P5"));

        let p3 = dir.path().join("deep.pgm");
        fs::write(&p3, b"P5 1 1 65535\n\x00\x00").unwrap();
        assert!(load_stack(&[p3]).unwrap_err().to_string().contains("maxval"));

        let missing = dir.path().join("missing.pgm");
        let err = load_stack(&[missing]).unwrap_err();
        assert!(err.to_string().contains("missing.pgm"));

        let short = dir.path().join("short.pgm");
        fs::write(&short, b"P5 4 4 255\n\x00\x00").unwrap();
        assert!(load_stack(&[short]).unwrap_err().to_string().contains("truncated"));
    }

    #[test]
    fn slice_directory_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path(), "s02.pgm", 1, 1, &[2]);
        write_pgm(dir.path(), "s01.pgm", 1, 1, &[1]);
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let files = slice_files(dir.path()).unwrap();
        let stack = load_stack(&files).unwrap();
        assert_eq!(stack.intensities(), &[1, 2]);
    }

    #[test]
    fn raw_volume_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        write_raw(&path, [2, 1, 2], &[10, 20, 30, 40]).unwrap();
        let stack = ImageStack::load_raw(&path).unwrap();
        assert_eq!(stack.dims(), [2, 1, 2]);
        assert_eq!(stack.get(1, 0, 1), 40);

        fs::write(&path, b"2 2 2\n\x00").unwrap();
        assert!(ImageStack::load_raw(&path).is_err());
        fs::write(&path, b"2 2\n\x00\x00\x00\x00").unwrap();
        assert!(ImageStack::load_raw(&path).is_err());
    }

    #[test]
    fn identity_resample_classifies_each_voxel() {
        let data: Vec<u8> = (0..24).map(|i| (i * 11) as u8).collect();
        let stack = ImageStack::new(4, 3, 2, data.clone()).unwrap();
        let grid = Grid::new([4, 3, 2], 1.0, [0.0; 3]).unwrap();
        let t = Thresholds::default();
        let mv = resample(&stack, &grid, &t).unwrap();
        let expected: Vec<_> = data.iter().map(|&v| classify(v, &t)).collect();
        assert_eq!(mv.labels(), &expected[..]);
    }

    #[test]
    fn single_voxel_grid_over_uniform_stack() {
        let stack = ImageStack::new(5, 7, 3, vec![235; 105]).unwrap();
        let grid = Grid::new([1, 1, 1], 1.0, [0.0; 3]).unwrap();
        let mv = resample(&stack, &grid, &Thresholds::default()).unwrap();
        assert_eq!(mv.labels(), &[Material::GrayMatter]);
    }

    /// Brute force: the source cell centre closest to the target cell centre,
    /// lowest index on ties.
    fn brute_nearest(i: usize, target: usize, source: usize) -> usize {
        let centre = (i as f64 + 0.5) / target as f64;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for p in 0..source {
            let d = ((p as f64 + 0.5) / source as f64 - centre).abs();
            if d < best_d - 1e-12 {
                best = p;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn downsampled_checkerboard_matches_brute_force() {
        let (w, h, s) = (8, 6, 4);
        let data: Vec<u8> = (0..w * h * s)
            .map(|idx| {
                let (x, y, z) = (idx % w, (idx / w) % h, idx / (w * h));
                if (x + y + z) % 2 == 0 { 200 } else { 235 }
            })
            .collect();
        let stack = ImageStack::new(w, h, s, data).unwrap();
        let grid = Grid::new([4, 3, 2], 2.0, [0.0; 3]).unwrap();
        let t = Thresholds::default();
        let mv = resample(&stack, &grid, &t).unwrap();
        for idx in 0..grid.len() {
            let [i, j, k] = grid.coords0(idx);
            let v = stack.get(brute_nearest(i, 4, w), brute_nearest(j, 3, h), brute_nearest(k, 2, s));
            assert_eq!(mv.labels()[idx], classify(v, &t));
        }
        // ties go down: every target cell picks the even source index,
        // so all samples land on (even, even, even) → white
        assert!(mv.labels().iter().all(|&m| m == Material::WhiteMatter));
    }

    proptest! {
        #[test]
        fn nearest_source_matches_brute_force(target in 1usize..40, source in 1usize..40) {
            for i in 0..target {
                prop_assert_eq!(nearest_source(i, target, source), brute_nearest(i, target, source));
            }
        }

        #[test]
        fn resample_is_idempotent_at_native_resolution(data in proptest::collection::vec(any::<u8>(), 3 * 4 * 2)) {
            let stack = ImageStack::new(3, 4, 2, data).unwrap();
            let grid = Grid::new([3, 4, 2], 1.0, [0.0; 3]).unwrap();
            let t = Thresholds::default();
            let once = resample(&stack, &grid, &t).unwrap();
            let codes: Vec<u8> = once.labels().iter().map(|m| [0u8, 200, 235, 250][m.code() as usize]).collect();
            let again = resample(&ImageStack::new(3, 4, 2, codes).unwrap(), &grid, &t).unwrap();
            prop_assert_eq!(once, again);
        }

        #[test]
        fn fractions_match_independent_count(codes in proptest::collection::vec(0u8..4, 1..200)) {
            let grid = Grid::new([codes.len(), 1, 1], 1.0, [0.0; 3]).unwrap();
            let labels: Vec<_> = codes.iter().map(|&c| Material::from_code(c).unwrap()).collect();
            let mv = MaterialVolume::new(grid, labels).unwrap();
            let (mut w, mut g) = (0usize, 0usize);
            for &c in &codes {
                match c { 1 => w += 1, 2 => g += 1, _ => {} }
            }
            match matter_fractions(&mv) {
                Ok((pw, pg)) => {
                    prop_assert_eq!(pw, w as f64 / (w + g) as f64);
                    prop_assert_eq!(pg, g as f64 / (w + g) as f64);
                    prop_assert!((pw + pg - 1.0).abs() < 1e-15);
                }
                Err(_) => prop_assert_eq!(w + g, 0),
            }
        }
    }

    fn model() -> ModelParams {
        ModelParams {
            rho: 0.025,
            d_white: 0.13,
            d_gray: 0.013,
        }
    }

    #[test]
    fn diffusion_values() {
        let grid = Grid::new([10, 1, 1], 1.0, [0.0; 3]).unwrap();
        let white = MaterialVolume::uniform(grid, Material::WhiteMatter);
        assert!(diffusion_from_materials(&white, &model()).values().iter().all(|&d| d == 0.13));
        let air = MaterialVolume::uniform(grid, Material::Air);
        assert!(diffusion_from_materials(&air, &model()).values().iter().all(|&d| d == 0.0));

        let labels = (0..10)
            .map(|i| if i < 3 { Material::WhiteMatter } else { Material::GrayMatter })
            .collect();
        let mixed = MaterialVolume::new(grid, labels).unwrap();
        let d = diffusion_from_materials(&mixed, &model());
        let mean = d.values().iter().sum::<f64>() / 10.0;
        assert!((mean - 0.0481).abs() < 1e-15);
        for v in d.values() {
            assert!([0.0, 0.013, 0.13].contains(v));
        }
    }

    #[test]
    fn fraction_examples() {
        let grid = Grid::new([6, 1, 1], 1.0, [0.0; 3]).unwrap();
        use Material::*;
        let mv = MaterialVolume::new(grid, vec![WhiteMatter, Air, WhiteMatter, GrayMatter, WhiteMatter, Skull]).unwrap();
        assert_eq!(matter_fractions(&mv).unwrap(), (0.75, 0.25));
        let gray = MaterialVolume::uniform(grid, GrayMatter);
        assert_eq!(matter_fractions(&gray).unwrap(), (0.0, 1.0));
        assert!(matter_fractions(&MaterialVolume::uniform(grid, Skull)).is_err());
    }

    #[test]
    fn label_volume_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new([2, 2, 1], 1.0, [0.0; 3]).unwrap();
        use Material::*;
        let mv = MaterialVolume::new(grid, vec![Air, WhiteMatter, GrayMatter, Skull]).unwrap();
        let path = dir.path().join("labels.raw");
        write_label_volume(&mv, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"2 2 1\n\x00\x01\x02\x03");
        assert_eq!(read_label_volume(&path, grid).unwrap(), mv);
        let other = Grid::new([4, 1, 1], 1.0, [0.0; 3]).unwrap();
        assert!(read_label_volume(&path, other).is_err());
    }
}
