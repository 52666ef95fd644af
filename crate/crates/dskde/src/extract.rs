//! Anomaly-region extraction: density map -> rescale -> background removal
//! -> average-pool blur -> binarize -> connected components -> area filter
//! -> largest region -> bounding box.

use ndarray::{Array2, ArrayView2};

use crate::estimators::{density_map, DensityMap, GpaTable};
use crate::{Error, Result};

const REFERENCE_AREA: f64 = 540.0 * 960.0;
const REFERENCE_MIN_AREA: f64 = 5500.0;

/// Pixel connectivity for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// N, S, E, W neighbors.
    Four,
    /// All eight neighbors, diagonals included.
    Eight,
}

/// Minimum component area, either fixed or rescaled from the 5,500-pixel
/// default (calibrated on a 540 x 960 lattice) by the actual lattice area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinArea {
    AutoScaled,
    Pixels(usize),
}

impl MinArea {
    /// Effective pixel threshold on a `p x q` lattice.
    pub fn effective(&self, p: usize, q: usize) -> usize {
        match self {
            MinArea::Pixels(n) => *n,
            MinArea::AutoScaled => {
                let scaled = REFERENCE_MIN_AREA * (p * q) as f64 / REFERENCE_AREA;
                (scaled.round() as usize).max(1)
            }
        }
    }
}

/// Extraction thresholds and window sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    /// Rescaled-density background threshold; pixels above it are background.
    pub alpha1: f64,
    /// Binarization threshold on the blurred map (strictly-below keeps).
    pub alpha2: f64,
    /// Blur window side; must be odd.
    pub pool: usize,
    pub min_area: MinArea,
    pub connectivity: Connectivity,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            alpha1: 0.06,
            alpha2: 0.42,
            pool: 33,
            min_area: MinArea::AutoScaled,
            connectivity: Connectivity::Eight,
        }
    }
}

impl DetectionParams {
    /// Validate `0 < alpha1 < alpha2 < 1`, odd `pool >= 1`, `min_area >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha1 < self.alpha2 && self.alpha2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < alpha1 < alpha2 < 1, got alpha1 = {}, alpha2 = {}",
                self.alpha1, self.alpha2
            )));
        }
        if self.pool == 0 || self.pool.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "pool window must be odd and >= 1, got {}",
                self.pool
            )));
        }
        if let MinArea::Pixels(0) = self.min_area {
            return Err(Error::InvalidParameter("min_area must be >= 1".into()));
        }
        Ok(())
    }
}

/// Axis-aligned pixel rectangle with half-open bounds
/// `[r0, r1) x [c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub r0: usize,
    pub r1: usize,
    pub c0: usize,
    pub c1: usize,
}

impl BBox {
    pub fn new(r0: usize, r1: usize, c0: usize, c1: usize) -> Result<Self> {
        if r0 >= r1 || c0 >= c1 {
            return Err(Error::InvalidParameter(format!(
                "degenerate box [{r0}, {r1}) x [{c0}, {c1})"
            )));
        }
        Ok(Self { r0, r1, c0, c1 })
    }

    pub fn area(&self) -> usize {
        (self.r1 - self.r0) * (self.c1 - self.c0)
    }
}

/// One maximal connected set of mask pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Member pixels in row-major order.
    pub pixels: Vec<(usize, usize)>,
    pub area: usize,
    pub bbox: BBox,
}

/// Affine rescale of a map to `[0, 1]`. A constant map rescales to all ones
/// (pure background, so nothing survives the downstream thresholds).
pub fn rescale01(map: &DensityMap) -> DensityMap {
    let values = map.values();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let out = if max > min {
        let inv = 1.0 / (max - min);
        values.mapv(|v| (v - min) * inv)
    } else {
        Array2::ones(values.dim())
    };
    DensityMap::new(out).expect("rescaled map is finite and nonnegative")
}

/// Background removal: pixels with rescaled density strictly above `alpha1`
/// are set to 1.0 (the maximal background level), so the subsequent blur
/// cannot pull them below the binarization threshold.
pub fn remove_background(map01: &DensityMap, alpha1: f64) -> DensityMap {
    let out = map01.values().mapv(|v| if v > alpha1 { 1.0 } else { v });
    DensityMap::new(out).expect("thresholded map is finite and nonnegative")
}

/// Mean filter over the in-bounds `pool x pool` window centered on each
/// pixel, built on running sums so the cost is `O(M)` regardless of the
/// window size. Boundary windows renormalize over their in-bounds part.
pub fn avg_pool_blur(map: &DensityMap, pool: usize) -> Result<DensityMap> {
    if pool == 0 || pool.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "pool window must be odd and >= 1, got {pool}"
        )));
    }
    let (p, q) = (map.p(), map.q());
    let r = pool / 2;
    let values = map.values();

    // integral[i][j] = sum of values[..i, ..j]
    let mut integral = Array2::<f64>::zeros((p + 1, q + 1));
    for i in 0..p {
        let mut row_sum = 0.0;
        for j in 0..q {
            row_sum += values[[i, j]];
            integral[[i + 1, j + 1]] = integral[[i, j + 1]] + row_sum;
        }
    }

    let out = Array2::from_shape_fn((p, q), |(i, j)| {
        let r0 = i.saturating_sub(r);
        let r1 = (i + r + 1).min(p);
        let c0 = j.saturating_sub(r);
        let c1 = (j + r + 1).min(q);
        let sum = integral[[r1, c1]] - integral[[r0, c1]] - integral[[r1, c0]]
            + integral[[r0, c0]];
        sum / ((r1 - r0) * (c1 - c0)) as f64
    });
    DensityMap::new(out.mapv(|v| v.max(0.0)))
}

/// Binary mask: 1 where the map value is strictly smaller than `alpha2`.
pub fn binarize(map: &DensityMap, alpha2: f64) -> Array2<bool> {
    map.values().mapv(|v| v < alpha2)
}

/// Maximal connected sets of mask pixels, labeled in row-major order of
/// their first pixel.
pub fn connected_components(mask: &Array2<bool>, connectivity: Connectivity) -> Vec<Component> {
    let (p, q) = mask.dim();
    let mut visited = vec![false; p * q];
    let mut components = Vec::new();
    let mut queue: Vec<(usize, usize)> = Vec::new();

    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
        Connectivity::Eight => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };

    for si in 0..p {
        for sj in 0..q {
            if !mask[[si, sj]] || visited[si * q + sj] {
                continue;
            }
            let mut pixels = Vec::new();
            let (mut r0, mut r1, mut c0, mut c1) = (si, si, sj, sj);
            visited[si * q + sj] = true;
            queue.push((si, sj));
            while let Some((i, j)) = queue.pop() {
                pixels.push((i, j));
                r0 = r0.min(i);
                r1 = r1.max(i);
                c0 = c0.min(j);
                c1 = c1.max(j);
                for &(di, dj) in offsets {
                    let ni = i as isize + di;
                    let nj = j as isize + dj;
                    if ni < 0 || nj < 0 || ni as usize >= p || nj as usize >= q {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if mask[[ni, nj]] && !visited[ni * q + nj] {
                        visited[ni * q + nj] = true;
                        queue.push((ni, nj));
                    }
                }
            }
            pixels.sort_unstable();
            let area = pixels.len();
            components.push(Component {
                pixels,
                area,
                bbox: BBox::new(r0, r1 + 1, c0, c1 + 1).expect("component is nonempty"),
            });
        }
    }
    components
}

/// Every intermediate stage of the extraction pipeline, for debugging dumps
/// and stage-replay tests.
#[derive(Debug, Clone)]
pub struct DetectionStages {
    pub density: DensityMap,
    pub rescaled: DensityMap,
    pub background_removed: DensityMap,
    pub blurred: DensityMap,
    pub mask: Array2<bool>,
    pub components: Vec<Component>,
    pub bbox: Option<BBox>,
}

/// Run the post-density pipeline on an existing map: rescale, remove
/// background, blur, binarize, label, filter by area, return the bounding
/// box of the largest surviving component (ties broken by label order).
pub fn extract_bbox(map: &DensityMap, params: &DetectionParams) -> Result<Option<BBox>> {
    params.validate()?;
    let rescaled = rescale01(map);
    let cleaned = remove_background(&rescaled, params.alpha1);
    let blurred = avg_pool_blur(&cleaned, params.pool)?;
    let mask = binarize(&blurred, params.alpha2);
    let components = connected_components(&mask, params.connectivity);
    let min_area = params.min_area.effective(map.p(), map.q());
    Ok(largest_component(&components, min_area))
}

/// Largest surviving component; equal areas resolve to the earlier label.
fn largest_component(components: &[Component], min_area: usize) -> Option<BBox> {
    let mut best: Option<&Component> = None;
    for c in components.iter().filter(|c| c.area >= min_area) {
        if best.is_none_or(|b| c.area > b.area) {
            best = Some(c);
        }
    }
    best.map(|c| c.bbox)
}

/// Full anomaly detection for one frame against a fitted model, keeping all
/// intermediate stages.
pub fn detect_stages(
    table: &GpaTable,
    frame: ArrayView2<'_, f64>,
    params: &DetectionParams,
) -> Result<DetectionStages> {
    params.validate()?;
    let density = density_map(table, frame)?;
    let rescaled = rescale01(&density);
    let background_removed = remove_background(&rescaled, params.alpha1);
    let blurred = avg_pool_blur(&background_removed, params.pool)?;
    let mask = binarize(&blurred, params.alpha2);
    let components = connected_components(&mask, params.connectivity);
    let min_area = params.min_area.effective(table.p(), table.q());
    let bbox = largest_component(&components, min_area);
    Ok(DetectionStages {
        density,
        rescaled,
        background_removed,
        blurred,
        mask,
        components,
        bbox,
    })
}

/// Full anomaly detection for one frame: density map through bounding box.
/// Returns `None` when no component survives the area filter.
pub fn detect(
    table: &GpaTable,
    frame: ArrayView2<'_, f64>,
    params: &DetectionParams,
) -> Result<Option<BBox>> {
    Ok(detect_stages(table, frame, params)?.bbox)
}
