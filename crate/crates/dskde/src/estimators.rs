//! The three-estimator core: per-pixel CD estimation, spatial DS smoothing
//! with a truncated separable fast path plus a brute-force oracle, and GPA
//! precompute/query for both CD and DS variants.
//!
//! Pixel `(i, j)` of a `p x q` lattice (0-based in code) maps to the spatial
//! location `s = ((i+1)/p, (j+1)/q)` on the unit square. Only coordinate
//! differences enter the smoothing weights, so the offset matters solely for
//! boundary renormalization.

use ndarray::{Array2, Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bandwidth::{empirical_sigma, BandwidthPlan};
use crate::kernel::gauss_kernel;
use crate::{Error, Result};

/// Default spatial truncation radius, in bandwidths per axis.
pub const DEFAULT_TRUNC_RADIUS: f64 = 3.0;

/// Query-side grid truncation: a grid point is skipped when its kernel
/// weight is below `exp(-EXCLUDED_WEIGHT_LOG / 2)` relative to the largest
/// weight, which keeps the windowed sum within 1e-12 of the full one. The
/// window radius is `h* * sqrt(t_min^2 + EXCLUDED_WEIGHT_LOG)` around the
/// query value, where `t_min` is the scaled distance to the nearest grid
/// point (about `8.6 h*` when the grid is dense near the query).
const EXCLUDED_WEIGHT_LOG: f64 = 74.0;

/// `N` grayscale frames on a `p x q` lattice, all values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    values: Array3<f64>, // (n, p, q)
}

impl FrameStack {
    /// Wrap an `(n, p, q)` array, validating the `[0, 1]` value range and
    /// nonempty dimensions.
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (n, p, q) = values.dim();
        if n == 0 {
            return Err(Error::EmptyStack);
        }
        if p == 0 || q == 0 {
            return Err(Error::Degenerate("lattice must be nonempty".into()));
        }
        for ((frame, row, col), &v) in values.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange {
                    frame,
                    row,
                    col,
                    value: v,
                });
            }
        }
        Ok(Self { values })
    }

    /// Build a stack from equally sized frames.
    pub fn from_frames(frames: Vec<Array2<f64>>) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptyStack)?;
        let (p, q) = first.dim();
        let n = frames.len();
        let mut values = Array3::zeros((n, p, q));
        for (i, frame) in frames.into_iter().enumerate() {
            if frame.dim() != (p, q) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{p}x{q}"),
                    actual: format!("{}x{}", frame.dim().0, frame.dim().1),
                });
            }
            values.index_axis_mut(ndarray::Axis(0), i).assign(&frame);
        }
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.dim().0
    }

    pub fn p(&self) -> usize {
        self.values.dim().1
    }

    pub fn q(&self) -> usize {
        self.values.dim().2
    }

    /// Lattice size `M = p * q`.
    pub fn m(&self) -> usize {
        self.p() * self.q()
    }

    pub fn frame(&self, i: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(ndarray::Axis(0), i)
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    /// Contiguous frame-major view of all values.
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("stack owns standard layout")
    }
}

/// Which estimator a fitted table precomputes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    GpaDs,
    GpaCd,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::GpaDs => "gpa-ds",
            Variant::GpaCd => "gpa-cd",
        }
    }
}

/// Immutable fitted model: sorted value-grid points with a `G* x p x q`
/// table of precomputed DS (or CD) estimates.
///
/// A completed table is never mutated; any number of threads may query it
/// concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct GpaTable {
    grid: Vec<f64>,
    table: Array3<f64>, // (G*, p, q)
    plan: BandwidthPlan,
    variant: Variant,
    seed: u64,
}

impl GpaTable {
    pub(crate) fn from_parts(
        grid: Vec<f64>,
        table: Array3<f64>,
        plan: BandwidthPlan,
        variant: Variant,
        seed: u64,
    ) -> Result<Self> {
        let (g, p, q) = table.dim();
        if g != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} grid points", grid.len()),
                actual: format!("{g} table slices"),
            });
        }
        if g < 2 || p == 0 || q == 0 {
            return Err(Error::Degenerate(
                "table needs at least 2 grid points and a nonempty lattice".into(),
            ));
        }
        for w in grid.windows(2) {
            if w[0] >= w[1] || w[0].is_nan() || w[1].is_nan() {
                return Err(Error::Degenerate(
                    "grid points must be strictly ascending".into(),
                ));
            }
        }
        if grid[0] <= 0.0 || grid[g - 1] >= 1.0 {
            return Err(Error::Degenerate(
                "grid points must lie strictly inside (0, 1)".into(),
            ));
        }
        if table.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Degenerate(
                "table entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            grid,
            table,
            plan,
            variant,
            seed,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn g_star(&self) -> usize {
        self.grid.len()
    }

    pub fn p(&self) -> usize {
        self.table.dim().1
    }

    pub fn q(&self) -> usize {
        self.table.dim().2
    }

    pub fn table(&self) -> &Array3<f64> {
        &self.table
    }

    pub fn plan(&self) -> &BandwidthPlan {
        &self.plan
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// `p x q` field of density estimates for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    values: Array2<f64>,
}

impl DensityMap {
    /// Wrap a `p x q` array, validating that every entry is finite and
    /// nonnegative.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("density map must be nonempty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Degenerate(
                "density map entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn p(&self) -> usize {
        self.values.dim().0
    }

    pub fn q(&self) -> usize {
        self.values.dim().1
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[[row, col]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

fn check_pixel(p: usize, q: usize, pixel: (usize, usize)) -> Result<()> {
    if pixel.0 >= p || pixel.1 >= q {
        return Err(Error::PixelOutOfBounds {
            row: pixel.0,
            col: pixel.1,
            p,
            q,
        });
    }
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if h.is_nan() || h <= 0.0 || h.is_infinite() {
        return Err(Error::InvalidBandwidth { name: "h", value: h });
    }
    Ok(())
}

/// Classical per-location kernel density estimate
/// `(1/(N*h)) * sum_i K((X_i(s) - x) / h)` at pixel `(row, col)`.
pub fn cd_estimate(stack: &FrameStack, x: f64, pixel: (usize, usize), h: f64) -> Result<f64> {
    check_pixel(stack.p(), stack.q(), pixel)?;
    check_h(h)?;
    let inv_h = 1.0 / h;
    let sum: f64 = (0..stack.n())
        .map(|i| gauss_kernel((stack.values[[i, pixel.0, pixel.1]] - x) * inv_h))
        .sum();
    Ok(sum / (stack.n() as f64 * h))
}

/// CD estimates at every grid value and every pixel: entry `(g, i, j)` is
/// `cd_estimate(stack, grid[g], (i, j), h)`. Parallelizes over grid slices.
pub fn cd_grid(stack: &FrameStack, grid: &[f64], h: f64) -> Result<Array3<f64>> {
    check_h(h)?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid must be nonempty".into()));
    }
    if let Some(&bad) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "grid value {bad} outside [0, 1]"
        )));
    }
    let (n, p, q) = stack.values.dim();
    let m = p * q;
    let data = stack.as_slice();
    let inv_h = 1.0 / h;
    let nh = n as f64 * h;

    let mut out = vec![0.0f64; grid.len() * m];
    out.par_chunks_mut(m)
        .zip(grid.par_iter())
        .for_each(|(slice, &x)| {
            for frame in data.chunks_exact(m) {
                for (acc, &v) in slice.iter_mut().zip(frame) {
                    *acc += gauss_kernel((v - x) * inv_h);
                }
            }
            // same division as cd_estimate, so the two routes agree exactly
            for acc in slice.iter_mut() {
                *acc /= nh;
            }
        });
    Ok(Array3::from_shape_vec((grid.len(), p, q), out).expect("shape matches construction"))
}

/// Untruncated brute-force DS smoothing of a CD map at one pixel: the
/// normalized kernel-weighted average over all `M` lattice locations.
///
/// Costs `O(M)` per pixel; this is the from-definition oracle against which
/// the separable fast path [`ds_smooth`] is checked.
pub fn ds_direct(cd_map: ArrayView2<'_, f64>, pixel: (usize, usize), h: f64) -> Result<f64> {
    let (p, q) = cd_map.dim();
    check_pixel(p, q, pixel)?;
    check_h(h)?;
    let inv_ph = 1.0 / (p as f64 * h);
    let inv_qh = 1.0 / (q as f64 * h);
    let mut num = 0.0;
    let mut den = 0.0;
    for k1 in 0..p {
        let w1 = gauss_kernel((k1 as f64 - pixel.0 as f64) * inv_ph);
        for k2 in 0..q {
            let w = w1 * gauss_kernel((k2 as f64 - pixel.1 as f64) * inv_qh);
            num += w * cd_map[[k1, k2]];
            den += w;
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("spatial weight sum underflowed".into()));
    }
    Ok(num / den)
}

/// Per-axis truncation radii in pixels: `ceil(trunc * h * p)` rows and
/// `ceil(trunc * h * q)` columns, clamped to the lattice.
fn trunc_radii(p: usize, q: usize, h: f64, trunc: f64) -> (usize, usize) {
    let r1 = ((trunc * h * p as f64).ceil() as usize).min(p - 1).max(1);
    let r2 = ((trunc * h * q as f64).ceil() as usize).min(q - 1).max(1);
    (r1, r2)
}

/// Spatially smooths each grid slice with separable Gaussian weights
/// truncated at `trunc_radius_bandwidths` bandwidths per axis
/// (`r1 = ceil(t*h*p)` rows, `r2 = ceil(t*h*q)` columns). Weights are
/// renormalized over the in-window, in-bounds support, so they sum to 1 at
/// every pixel and constants are preserved exactly.
///
/// Cost is `O(G* * M * (r1 + r2))`; slices are processed in parallel.
pub fn ds_smooth(
    cd_values: &Array3<f64>,
    h: f64,
    trunc_radius_bandwidths: f64,
) -> Result<Array3<f64>> {
    check_h(h)?;
    if trunc_radius_bandwidths.is_nan() || trunc_radius_bandwidths <= 0.0 {
        return Err(Error::InvalidParameter(
            "truncation radius must be positive".into(),
        ));
    }
    let (g, p, q) = cd_values.dim();
    if g == 0 || p == 0 || q == 0 {
        return Err(Error::Degenerate("empty input".into()));
    }
    let m = p * q;
    let (r1, r2) = trunc_radii(p, q, h, trunc_radius_bandwidths);

    let row_w: Vec<f64> = (0..=r1)
        .map(|d| gauss_kernel(d as f64 / (p as f64 * h)))
        .collect();
    let col_w: Vec<f64> = (0..=r2)
        .map(|d| gauss_kernel(d as f64 / (q as f64 * h)))
        .collect();

    // In-bounds weight sums depend only on the coordinate, not the slice.
    let row_den: Vec<f64> = (0..p)
        .map(|i| {
            let lo = i.saturating_sub(r1);
            let hi = (i + r1).min(p - 1);
            (lo..=hi).map(|k| row_w[k.abs_diff(i)]).sum()
        })
        .collect();
    let col_den: Vec<f64> = (0..q)
        .map(|j| {
            let lo = j.saturating_sub(r2);
            let hi = (j + r2).min(q - 1);
            (lo..=hi).map(|k| col_w[k.abs_diff(j)]).sum()
        })
        .collect();

    let input = cd_values.as_slice().ok_or_else(|| {
        Error::InvalidParameter("cd_values must be in standard layout".into())
    })?;
    let mut out = vec![0.0f64; g * m];
    out.par_chunks_mut(m)
        .zip(input.par_chunks(m))
        .for_each(|(dst, src)| {
            let mut tmp = vec![0.0f64; m];
            // Row pass: tmp[i][j] = normalized sum over rows k near i.
            for i in 0..p {
                let lo = i.saturating_sub(r1);
                let hi = (i + r1).min(p - 1);
                let row = &mut tmp[i * q..(i + 1) * q];
                for k in lo..=hi {
                    let w = row_w[k.abs_diff(i)];
                    let src_row = &src[k * q..(k + 1) * q];
                    for (acc, &v) in row.iter_mut().zip(src_row) {
                        *acc += w * v;
                    }
                }
                let inv = 1.0 / row_den[i];
                for acc in row.iter_mut() {
                    *acc *= inv;
                }
            }
            // Column pass.
            for i in 0..p {
                let src_row = &tmp[i * q..(i + 1) * q];
                let dst_row = &mut dst[i * q..(i + 1) * q];
                for j in 0..q {
                    let lo = j.saturating_sub(r2);
                    let hi = (j + r2).min(q - 1);
                    let mut acc = 0.0;
                    for k in lo..=hi {
                        acc += col_w[k.abs_diff(j)] * src_row[k];
                    }
                    dst_row[j] = acc / col_den[j];
                }
            }
        });
    Ok(Array3::from_shape_vec((g, p, q), out).expect("shape matches construction"))
}

/// Direct truncated DS evaluation at one `(x, pixel)` pair, composing the CD
/// estimator over the spatial window from its definition. Costs
/// `O(N * r1 * r2)` per call; used as a reference route and for per-frame
/// timing of the non-precomputed DS estimator.
pub fn ds_query(
    stack: &FrameStack,
    x: f64,
    pixel: (usize, usize),
    h: f64,
    trunc_radius_bandwidths: f64,
) -> Result<f64> {
    let (n, p, q) = stack.values.dim();
    check_pixel(p, q, pixel)?;
    check_h(h)?;
    let (r1, r2) = trunc_radii(p, q, h, trunc_radius_bandwidths);
    let data = stack.as_slice();
    let m = p * q;
    let inv_h = 1.0 / h;
    let cd_scale = 1.0 / (n as f64 * h);
    let inv_ph = 1.0 / (p as f64 * h);
    let inv_qh = 1.0 / (q as f64 * h);

    let (i, j) = pixel;
    let mut num = 0.0;
    let mut den = 0.0;
    for k1 in i.saturating_sub(r1)..=(i + r1).min(p - 1) {
        let w1 = gauss_kernel(k1.abs_diff(i) as f64 * inv_ph);
        for k2 in j.saturating_sub(r2)..=(j + r2).min(q - 1) {
            let w = w1 * gauss_kernel(k2.abs_diff(j) as f64 * inv_qh);
            let base = k1 * q + k2;
            let mut sum = 0.0;
            for frame in 0..n {
                sum += gauss_kernel((data[frame * m + base] - x) * inv_h);
            }
            num += w * sum * cd_scale;
            den += w;
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("spatial weight sum underflowed".into()));
    }
    Ok(num / den)
}

fn draw_uniform_grid(g_star: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<f64> = Vec::with_capacity(g_star);
    loop {
        while pts.len() < g_star {
            let v: f64 = rng.random();
            if v > 0.0 && v < 1.0 {
                pts.push(v);
            }
        }
        pts.sort_unstable_by(f64::total_cmp);
        pts.dedup();
        if pts.len() == g_star {
            return pts;
        }
    }
}

/// Evenly spaced grid `(g + 1/2) / G*`, strictly inside `(0, 1)`.
fn even_grid(g_star: usize) -> Vec<f64> {
    (0..g_star)
        .map(|g| (g as f64 + 0.5) / g_star as f64)
        .collect()
}

/// Fit a GPA table: draw `G*` grid points uniformly on `(0, 1)` with the
/// given seed, sort them, precompute CD estimates at every grid value, and
/// for the DS variant apply the spatial smoothing pass. The result is
/// immutable and bit-reproducible for a fixed seed.
pub fn gpa_fit(
    stack: &FrameStack,
    g_star: usize,
    plan: &BandwidthPlan,
    variant: Variant,
    seed: u64,
) -> Result<GpaTable> {
    fit_with_grid(stack, draw_uniform_grid(g_star.max(1), seed), plan, variant, seed)
}

/// [`gpa_fit`] with an evenly spaced grid instead of a random one, for fully
/// deterministic pipelines. The stored seed is 0.
pub fn gpa_fit_even(
    stack: &FrameStack,
    g_star: usize,
    plan: &BandwidthPlan,
    variant: Variant,
) -> Result<GpaTable> {
    fit_with_grid(stack, even_grid(g_star.max(1)), plan, variant, 0)
}

fn fit_with_grid(
    stack: &FrameStack,
    grid: Vec<f64>,
    plan: &BandwidthPlan,
    variant: Variant,
    seed: u64,
) -> Result<GpaTable> {
    if grid.len() < 2 {
        return Err(Error::InvalidParameter(
            "g_star must be at least 2".into(),
        ));
    }
    if empirical_sigma(stack)? == 0.0 {
        return Err(Error::Degenerate(
            "constant stack: empirical sigma is zero".into(),
        ));
    }
    let cd = cd_grid(stack, &grid, plan.h())?;
    let table = match variant {
        Variant::GpaCd => cd,
        Variant::GpaDs => ds_smooth(&cd, plan.h(), DEFAULT_TRUNC_RADIUS)?,
    };
    GpaTable::from_parts(grid, table, *plan, variant, seed)
}

/// Max-shifted normalized kernel average of `column(g)` over grid indices
/// `lo..hi`. Rescaling every weight by the largest one cancels in the ratio
/// and keeps the sum away from underflow for tiny `h*`.
fn weighted_average<F: Fn(usize) -> f64>(
    grid: &[f64],
    lo: usize,
    hi: usize,
    x_bar: f64,
    h_star: f64,
    column: F,
) -> f64 {
    let inv_h = 1.0 / h_star;
    let mut e_min = f64::INFINITY;
    for &x_g in &grid[lo..hi] {
        let t = (x_g - x_bar) * inv_h;
        e_min = e_min.min(0.5 * t * t);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, &x_g) in grid.iter().enumerate().take(hi).skip(lo) {
        let t = (x_g - x_bar) * inv_h;
        let w = (e_min - 0.5 * t * t).exp();
        num += w * column(g);
        den += w;
    }
    num / den
}

fn query_window(grid: &[f64], x_bar: f64, h_star: f64) -> (usize, usize) {
    let split = grid.partition_point(|&g| g < x_bar);
    let nearest = if split == 0 {
        0
    } else if split >= grid.len() {
        grid.len() - 1
    } else if x_bar - grid[split - 1] <= grid[split] - x_bar {
        split - 1
    } else {
        split
    };
    let t_min = (grid[nearest] - x_bar) / h_star;
    let radius = h_star * (t_min * t_min + EXCLUDED_WEIGHT_LOG).sqrt();
    if !radius.is_finite() {
        return (0, grid.len());
    }
    let lo = grid.partition_point(|&g| g < x_bar - radius);
    let hi = grid.partition_point(|&g| g <= x_bar + radius);
    debug_assert!(lo <= nearest && nearest < hi);
    (lo, hi)
}

fn query_core(table: &GpaTable, x_bar: f64, base: usize) -> f64 {
    let m = table.p() * table.q();
    let slice = table.table.as_slice().expect("table owns standard layout");
    let h_star = table.plan.h_star();
    let (lo, hi) = query_window(&table.grid, x_bar, h_star);
    weighted_average(&table.grid, lo, hi, x_bar, h_star, |g| slice[g * m + base])
}

/// Normalized kernel-weighted average of the precomputed estimates at one
/// pixel: `sum_g table[g, i, j] * w_g` with
/// `w_g = K((x_g - x_bar)/h*) / sum_g K((x_g - x_bar)/h*)`.
///
/// Grid points whose weight is negligible next to the nearest point's are
/// skipped via binary search on the sorted grid (a window of about `8.6 h*`
/// when the grid is dense near `x_bar`), which changes results by less than
/// 1e-12 relative; cost is `O(G*)` worst case, independent of `N` and `M`.
/// The result always lies within `[min, max]` of that pixel's precomputed
/// column.
pub fn gpa_query(table: &GpaTable, x_bar: f64, pixel: (usize, usize)) -> Result<f64> {
    check_pixel(table.p(), table.q(), pixel)?;
    Ok(query_core(table, x_bar, pixel.0 * table.q() + pixel.1))
}

/// Exact full-sum form of [`gpa_query`]: every grid point enters the
/// weighted average. Retained for oracle comparisons.
pub fn gpa_query_full(table: &GpaTable, x_bar: f64, pixel: (usize, usize)) -> Result<f64> {
    check_pixel(table.p(), table.q(), pixel)?;
    let m = table.p() * table.q();
    let slice = table.table.as_slice().expect("table owns standard layout");
    let base = pixel.0 * table.q() + pixel.1;
    Ok(weighted_average(
        &table.grid,
        0,
        table.grid.len(),
        x_bar,
        table.plan.h_star(),
        |g| slice[g * m + base],
    ))
}

/// Per-pixel GPA query at the frame's own observed value; the density map of
/// a frame under the fitted model. Rows are processed in parallel.
pub fn density_map(table: &GpaTable, frame: ArrayView2<'_, f64>) -> Result<DensityMap> {
    let (p, q) = (table.p(), table.q());
    if frame.dim() != (p, q) {
        return Err(Error::DimensionMismatch {
            expected: format!("{p}x{q}"),
            actual: format!("{}x{}", frame.dim().0, frame.dim().1),
        });
    }
    for ((row, col), &v) in frame.indexed_iter() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ValueOutOfRange {
                frame: 0,
                row,
                col,
                value: v,
            });
        }
    }
    let mut out = vec![0.0f64; p * q];
    out.par_chunks_mut(q).enumerate().for_each(|(i, row_out)| {
        for (j, dst) in row_out.iter_mut().enumerate() {
            *dst = query_core(table, frame[[i, j]], i * q + j);
        }
    });
    let values = Array2::from_shape_vec((p, q), out).expect("shape matches construction");
    DensityMap::new(values)
}
