//! Snapshot and metrics writers.
//!
//! Snapshots are legacy ASCII VTK structured-points files. The layout is
//! fixed, line by line:
//!
//! ```text
//! # vtk DataFile Version 3.0
//! tumor density
//! ASCII
//! DATASET STRUCTURED_POINTS
//! DIMENSIONS nx ny nz
//! SPACING h h h
//! ORIGIN ox oy oz
//! POINT_DATA n
//! SCALARS tumor_density float 1
//! LOOKUP_TABLE default
//! <n values, one per line, flat-index order>
//! SCALARS material int 1              (only with a material volume)
//! LOOKUP_TABLE default
//! <n integer labels: 0 air, 1 white, 2 gray, 3 skull>
//! ```
//!
//! Reals are printed in scientific notation with 17 significant digits.
//! Metrics are CSV with header `step,time_days,total_mass,max_density,radius_mm`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::imaging::{Material, MaterialVolume};
use crate::integrator::{OutputSink, StepMetrics};

/// 17 significant digits, scientific notation.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0"
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

fn vtk_text(u: &ScalarField, materials: Option<&MaterialVolume>) -> Result<String> {
    let g = u.grid();
    if let Some(mv) = materials {
        if mv.grid().dims() != g.dims() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                actual: mv.grid().len(),
            });
        }
    }
    let [nx, ny, nz] = g.dims();
    let [ox, oy, oz] = g.origin();
    let h = format_real(g.spacing());
    let mut s = String::with_capacity(24 * g.len() + 256);
    s.push_str("# vtk DataFile Version 3.0\ntumor density\nASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {nx} {ny} {nz}");
    let _ = writeln!(s, "SPACING {h} {h} {h}");
    let _ = writeln!(s, "ORIGIN {} {} {}", format_real(ox), format_real(oy), format_real(oz));
    let _ = writeln!(s, "POINT_DATA {}", g.len());
    s.push_str("SCALARS tumor_density float 1\nLOOKUP_TABLE default\n");
    for &v in u.values() {
        s.push_str(&format_real(v));
        s.push('\n');
    }
    if let Some(mv) = materials {
        s.push_str("SCALARS material int 1\nLOOKUP_TABLE default\n");
        for m in mv.labels() {
            let _ = writeln!(s, "{}", m.code());
        }
    }
    Ok(s)
}

pub fn write_vtk(u: &ScalarField, materials: Option<&MaterialVolume>, path: &Path) -> Result<()> {
    let text = vtk_text(u, materials)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Contents of a snapshot written by [`write_vtk`].
#[derive(Clone, Debug, PartialEq)]
pub struct VtkSnapshot {
    pub density: ScalarField,
    pub materials: Option<MaterialVolume>,
}

struct Tokens<'a> {
    path: &'a Path,
    iter: std::iter::Peekable<std::str::SplitAsciiWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.iter
            .next()
            .ok_or_else(|| Error::format(self.path, format!("unexpected end of file, expected {what}")))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let tok = self.next(word)?;
        if tok == word {
            Ok(())
        } else {
            Err(Error::format(self.path, format!("bad token `{tok}`, expected `{word}`")))
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| Error::format(self.path, format!("bad token `{tok}`, expected {what}")))
    }
}

/// Reads a snapshot written by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkSnapshot> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.splitn(3, '\n');
    let version = lines.next().unwrap_or_default();
    if !version.starts_with("# vtk DataFile") {
        let tok = version.split_whitespace().next().unwrap_or("<empty>");
        return Err(Error::format(path, format!("bad token `{tok}`, expected `# vtk DataFile` header")));
    }
    let _title = lines.next();
    let body = lines.next().unwrap_or_default();
    let mut t = Tokens {
        path,
        iter: body.split_ascii_whitespace().peekable(),
    };
    t.expect("ASCII")?;
    t.expect("DATASET")?;
    t.expect("STRUCTURED_POINTS")?;
    t.expect("DIMENSIONS")?;
    let dims = [t.parse("nx")?, t.parse("ny")?, t.parse("nz")?];
    t.expect("SPACING")?;
    let spacing: [f64; 3] = [t.parse("spacing")?, t.parse("spacing")?, t.parse("spacing")?];
    if spacing[1] != spacing[0] || spacing[2] != spacing[0] {
        return Err(Error::format(path, "non-uniform spacing is not supported"));
    }
    t.expect("ORIGIN")?;
    let origin = [t.parse("origin")?, t.parse("origin")?, t.parse("origin")?];
    let grid = Grid::new(dims, spacing[0], origin).map_err(|e| Error::format(path, e.to_string()))?;
    t.expect("POINT_DATA")?;
    let n: usize = t.parse("point count")?;
    if n != grid.len() {
        return Err(Error::format(path, format!("POINT_DATA {n} does not match dimensions")));
    }

    let mut density = None;
    let mut materials = None;
    while t.iter.peek().is_some() {
        t.expect("SCALARS")?;
        let name = t.next("array name")?;
        let _kind = t.next("array type")?;
        t.expect("1")?;
        t.expect("LOOKUP_TABLE")?;
        t.next("lookup table name")?;
        match name {
            "tumor_density" => {
                let vals = (0..n).map(|_| t.parse::<f64>("density value")).collect::<Result<Vec<_>>>()?;
                density = Some(ScalarField::from_values(grid, vals).map_err(|e| Error::format(path, e.to_string()))?);
            }
            "material" => {
                let labels = (0..n)
                    .map(|_| {
                        let code: u8 = t.parse("material label")?;
                        Material::from_code(code)
                            .ok_or_else(|| Error::format(path, format!("bad token `{code}`, expected material label 0-3")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                materials = Some(MaterialVolume::new(grid, labels)?);
            }
            other => return Err(Error::format(path, format!("bad token `{other}`, unknown array"))),
        }
    }
    let density = density.ok_or_else(|| Error::format(path, "missing tumor_density array"))?;
    Ok(VtkSnapshot { density, materials })
}

pub fn write_metrics_csv(series: &[StepMetrics], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "step,time_days,total_mass,max_density,radius_mm").map_err(io)?;
    for m in series {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.step,
            format_real(m.time),
            format_real(m.total_mass),
            format_real(m.max_density),
            format_real(m.radius)
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `<prefix>_<step>.vtk` files into a directory.
pub struct VtkSeriesWriter<'a> {
    dir: PathBuf,
    prefix: String,
    materials: Option<&'a MaterialVolume>,
    written: Vec<PathBuf>,
}

impl<'a> VtkSeriesWriter<'a> {
    pub fn new(dir: impl Into<PathBuf>, prefix: &str, materials: Option<&'a MaterialVolume>) -> Self {
        VtkSeriesWriter {
            dir: dir.into(),
            prefix: prefix.to_string(),
            materials,
            written: Vec::new(),
        }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

impl OutputSink for VtkSeriesWriter<'_> {
    fn snapshot(&mut self, step: usize, _time: f64, field: &ScalarField) -> Result<()> {
        let path = self.dir.join(format!("{}_{step:04}.vtk", self.prefix));
        write_vtk(field, self.materials, &path)?;
        self.written.push(path);
        Ok(())
    }
}
