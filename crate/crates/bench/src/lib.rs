//! Fixtures shared by the criterion benchmarks.

use gliosim::imaging::{diffusion_from_materials, Material, MaterialVolume};
use gliosim::operator::assemble;
use gliosim::{Preset, ScalarField, SimConfig, SparseOperator};

/// `bench-32` configuration resampled to `n` points per axis.
pub fn config(n: usize) -> SimConfig {
    Preset::Bench32.config().with_resolution(n)
}

/// Operator of a white/gray checkerboard-of-slabs volume at resolution `n`.
pub fn operator(n: usize) -> (SimConfig, SparseOperator) {
    let cfg = config(n);
    let grid = cfg.lattice().expect("preset grid is valid");
    let labels = (0..grid.len())
        .map(|v| if (v / (n * n)).is_multiple_of(4) { Material::GrayMatter } else { Material::WhiteMatter })
        .collect();
    let mv = MaterialVolume::new(grid, labels).expect("label count matches grid");
    let a = assemble(&diffusion_from_materials(&mv, &cfg.model));
    (cfg, a)
}

/// Smooth bump centred in the box.
pub fn bump(cfg: &SimConfig) -> ScalarField {
    let grid = cfg.lattice().expect("preset grid is valid");
    let [[x0, x1], [y0, y1], [z0, z1]] = grid.bounds();
    let c = [(x0 + x1) / 2.0, (y0 + y1) / 2.0, (z0 + z1) / 2.0];
    let vals = (0..grid.len())
        .map(|v| {
            let p = grid.point(v);
            let r2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
            0.5 * (-r2 / 400.0).exp()
        })
        .collect();
    ScalarField::from_values(grid, vals).expect("finite bump")
}
