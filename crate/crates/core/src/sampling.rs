//! Deterministic sample sets on the hypercube `[-a, a]ⁿ`.

use crate::blockgraph::BlockStructure;
use crate::rng::SplitMix64;

/// Number of lattice points in [`default_samples`].
pub const DEFAULT_LATTICE_POINTS: usize = 200;

/// Additive-recurrence lattice (the `R_n` sequence): point `k` has
/// coordinates `frac(0.5 + (k+1)·α_i)` with `α_i = φ^{-(i+1)}`, where `φ` is
/// the positive root of `x^{n+1} = x + 1`; mapped affinely onto `[-a, a]`.
pub fn lattice(n: usize, count: usize, a: f64) -> Vec<Vec<f64>> {
    let mut phi = 2.0_f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (n as f64 + 1.0));
    }
    let alpha: Vec<f64> = (0..n).map(|i| phi.powi(-(i as i32 + 1)).fract()).collect();
    (0..count)
        .map(|k| {
            alpha
                .iter()
                .map(|&al| {
                    let u = (0.5 + (k as f64 + 1.0) * al).fract();
                    a * (2.0 * u - 1.0)
                })
                .collect()
        })
        .collect()
}

/// The `2s` points with one block at `±a` and every other block zero.
pub fn axis_points(blocks: &BlockStructure, a: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * blocks.block_count());
    for j in 0..blocks.block_count() {
        for sign in [1.0, -1.0] {
            let mut x = vec![0.0; blocks.dim()];
            x[blocks.range(j)].iter_mut().for_each(|v| *v = sign * a);
            out.push(x);
        }
    }
    out
}

/// 200 lattice points plus the `2s` block-axis points.
pub fn default_samples(blocks: &BlockStructure, a: f64) -> Vec<Vec<f64>> {
    let mut pts = lattice(blocks.dim(), DEFAULT_LATTICE_POINTS, a);
    pts.extend(axis_points(blocks, a));
    pts
}

/// `count` i.i.d. uniform points from the seeded counter-based generator.
pub fn uniform(n: usize, count: usize, a: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.uniform(-a, a)).collect())
        .collect()
}

/// Tensor grid with `per_axis` points per coordinate on `[-a, a]`; a single
/// point per axis sits at the origin.
pub fn grid(n: usize, per_axis: usize, a: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if per_axis <= 1 {
        vec![0.0]
    } else {
        (0..per_axis)
            .map(|k| -a + 2.0 * a * k as f64 / (per_axis - 1) as f64)
            .collect()
    };
    let total = axis.len().pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; n];
            for v in x.iter_mut().rev() {
                *v = axis[idx % axis.len()];
                idx /= axis.len();
            }
            x
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_stays_in_box() {
        let pts = lattice(7, 200, 1.5);
        assert_eq!(pts.len(), 200);
        assert!(pts.iter().flatten().all(|v| v.abs() <= 1.5));
        assert_eq!(lattice(7, 200, 1.5), pts);
    }

    #[test]
    fn axis_points_count() {
        let b = BlockStructure::new(vec![2, 1]).unwrap();
        let pts = axis_points(&b, 1.0);
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0], vec![1.0, 1.0, 0.0]);
        assert_eq!(pts[3], vec![0.0, 0.0, -1.0]);
        assert_eq!(default_samples(&b, 1.0).len(), 204);
    }

    #[test]
    fn grid_layout() {
        assert_eq!(grid(3, 1, 1.0), vec![vec![0.0; 3]]);
        let g = grid(2, 3, 1.0);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert_eq!(g[5], vec![0.0, 1.0]);
    }
}
