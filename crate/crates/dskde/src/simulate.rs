//! Synthetic data generation (truncated-normal pixel model over a smooth
//! mean field) and the MSE benchmark comparing the CD, DS, GPA-CD, and
//! GPA-DS estimators.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::bandwidth::{cd_bandwidth, ds_bandwidth, empirical_sigma, BandwidthPlan};
use crate::estimators::{
    cd_estimate, cd_grid, density_map, ds_query, ds_smooth, gpa_fit, gpa_query, FrameStack,
    GpaTable, Variant, DEFAULT_TRUNC_RADIUS,
};
use crate::{Error, Result};

/// Reps whose per-frame query timings are recorded (keeps the expensive
/// CD/DS frame timings from dominating the benchmark wall time).
const TIMED_REPS: usize = 3;

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Per-pixel mean surface of the generator.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanField {
    /// The built-in smooth field `0.35 + 0.20*(i/p) + 0.10*sin(2*pi*j/q)`,
    /// clamped to `[0.1, 0.9]`.
    Synthetic,
    /// A caller-supplied `p x q` field with values in `[0, 1]`.
    Custom(Array2<f64>),
}

/// Generator settings for synthetic stacks and the MSE benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub p: usize,
    pub q: usize,
    /// Frame count for single-stack simulation.
    pub n: usize,
    pub sigma: f64,
    pub mean_field: MeanField,
    pub seed: u64,
    pub g_star: usize,
    pub g_plus: usize,
    /// Replication count T.
    pub reps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p: 64,
            q: 64,
            n: 200,
            sigma: 0.16,
            mean_field: MeanField::Synthetic,
            seed: 0,
            g_star: 500,
            g_plus: 100,
            reps: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 || self.n == 0 || self.reps == 0 || self.g_plus == 0 {
            return Err(Error::InvalidParameter(
                "all simulation counts must be >= 1".into(),
            ));
        }
        if self.g_star < 2 {
            return Err(Error::InvalidParameter("g_star must be >= 2".into()));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::Degenerate(format!(
                "sigma = {} must be positive",
                self.sigma
            )));
        }
        if let MeanField::Custom(field) = &self.mean_field {
            if field.dim() != (self.p, self.q) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", self.p, self.q),
                    actual: format!("{}x{}", field.dim().0, field.dim().1),
                });
            }
            if field.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(
                    "mean field values must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Materialize the mean field for this configuration.
    pub fn resolve_field(&self) -> Result<Array2<f64>> {
        self.validate()?;
        Ok(match &self.mean_field {
            MeanField::Synthetic => synthetic_mean_field(self.p, self.q),
            MeanField::Custom(field) => field.clone(),
        })
    }
}

/// Density of a normal(mu, sigma^2) truncated to `[0, 1]`:
/// `exp(-(x-mu)^2 / (2 sigma^2)) / (c sqrt(2 pi) sigma)` with
/// `c = Phi((1-mu)/sigma) - Phi(-mu/sigma)`; zero outside `[0, 1]`.
pub fn truncnorm_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Degenerate(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!(
            "mean {mu} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Ok(0.0);
    }
    let c = phi((1.0 - mu) / sigma) - phi(-mu / sigma);
    let z = (x - mu) / sigma;
    Ok((-0.5 * z * z).exp() / (c * (2.0 * PI).sqrt() * sigma))
}

/// Draw from the `[0, 1]`-truncated normal by rejection; the acceptance rate
/// is `c`, which stays near 1 for interior means and small sigma.
pub fn sample_truncnorm<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    assert!(sigma > 0.0 && (0.0..=1.0).contains(&mu));
    let normal = Normal::new(mu, sigma).expect("validated parameters");
    loop {
        let v = normal.sample(rng);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
}

/// The built-in smooth mean field
/// `mu(i/p, j/q) = 0.35 + 0.20*(i/p) + 0.10*sin(2*pi*j/q)` (1-based lattice
/// indices), clamped to `[0.1, 0.9]`.
pub fn synthetic_mean_field(p: usize, q: usize) -> Array2<f64> {
    Array2::from_shape_fn((p, q), |(i, j)| {
        let s1 = (i as f64 + 1.0) / p as f64;
        let s2 = (j as f64 + 1.0) / q as f64;
        (0.35 + 0.20 * s1 + 0.10 * (2.0 * PI * s2).sin()).clamp(0.1, 0.9)
    })
}

/// `n` frames of independent truncated-normal draws with pixel-specific
/// means, from a caller-managed RNG stream.
pub fn simulate_stack_with_rng<R: Rng + ?Sized>(
    n: usize,
    field: &Array2<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<FrameStack> {
    let (p, q) = field.dim();
    let mut values = Array3::zeros((n, p, q));
    for frame in 0..n {
        for i in 0..p {
            for j in 0..q {
                values[[frame, i, j]] = sample_truncnorm(field[[i, j]], sigma, rng);
            }
        }
    }
    FrameStack::new(values)
}

/// Seeded, reproducible synthetic stack for a configuration.
pub fn simulate_stack(cfg: &SimConfig) -> Result<FrameStack> {
    let field = cfg.resolve_field()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    simulate_stack_with_rng(cfg.n, &field, cfg.sigma, &mut rng)
}

/// MSE of precomputed per-test-point estimate maps against the
/// truncated-normal truth: the double average
/// `(1/(G+ * M)) * sum_g sum_s (fhat(x_g, s) - f(x_g, s))^2`.
pub fn mse_of_maps(
    maps: &Array3<f64>,
    field: &Array2<f64>,
    sigma: f64,
    test_points: &[f64],
) -> Result<f64> {
    let (g, p, q) = maps.dim();
    if g != test_points.len() || (p, q) != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} x {}x{}", test_points.len(), field.dim().0, field.dim().1),
            actual: format!("{g} x {p}x{q}"),
        });
    }
    let mut acc = 0.0;
    for (gi, &x) in test_points.iter().enumerate() {
        for i in 0..p {
            for j in 0..q {
                let truth = truncnorm_pdf(x, field[[i, j]], sigma)?;
                let d = maps[[gi, i, j]] - truth;
                acc += d * d;
            }
        }
    }
    Ok(acc / (test_points.len() * p * q) as f64)
}

/// MSE of an estimator given as a map-per-test-value closure.
pub fn mse_of_estimator<F>(
    estimate: F,
    field: &Array2<f64>,
    sigma: f64,
    test_points: &[f64],
) -> Result<f64>
where
    F: Fn(f64) -> Array2<f64>,
{
    let (p, q) = field.dim();
    let mut maps = Array3::zeros((test_points.len(), p, q));
    for (gi, &x) in test_points.iter().enumerate() {
        maps.index_axis_mut(ndarray::Axis(0), gi).assign(&estimate(x));
    }
    mse_of_maps(&maps, field, sigma, test_points)
}

/// The four benchmarked estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Cd,
    Ds,
    GpaCd,
    GpaDs,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Cd,
        EstimatorKind::Ds,
        EstimatorKind::GpaCd,
        EstimatorKind::GpaDs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Cd => "cd",
            EstimatorKind::Ds => "ds",
            EstimatorKind::GpaCd => "gpa-cd",
            EstimatorKind::GpaDs => "gpa-ds",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cd" => Ok(EstimatorKind::Cd),
            "ds" => Ok(EstimatorKind::Ds),
            "gpa-cd" => Ok(EstimatorKind::GpaCd),
            "gpa-ds" => Ok(EstimatorKind::GpaDs),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator `{other}` (expected cd, ds, gpa-cd, gpa-ds)"
            ))),
        }
    }
}

/// Aggregated results for one estimator at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub mean_mse: f64,
    /// Natural-log MSE summaries across replications.
    pub mean_log_mse: f64,
    pub median_log_mse: f64,
    /// Mean wall time to produce one frame's density map, over timed reps.
    pub mean_frame_seconds: f64,
}

/// Benchmark output: per-estimator rows plus a configuration echo.
#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub p: usize,
    pub q: usize,
    pub sigma: f64,
    pub seed: u64,
    pub g_star: usize,
    pub g_plus: usize,
    pub reps: usize,
    pub rows: Vec<MseRow>,
}

impl MseReport {
    /// CSV table, one row per estimator and sample size, preceded by
    /// configuration-echo comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# dskde mse benchmark")?;
        writeln!(
            w,
            "# p = {}, q = {}, sigma = {}, seed = {}, g_star = {}, g_plus = {}, reps = {}",
            self.p, self.q, self.sigma, self.seed, self.g_star, self.g_plus, self.reps
        )?;
        writeln!(
            w,
            "# bandwidths: ds_bandwidth for ds/gpa-ds, cd_bandwidth for cd/gpa-cd, h* = 5h^2"
        )?;
        writeln!(w, "# log columns use the natural logarithm")?;
        writeln!(
            w,
            "estimator,n,mean_mse,mean_log_mse,median_log_mse,mean_frame_seconds"
        )?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.estimator.name(),
                row.n,
                row.mean_mse,
                row.mean_log_mse,
                row.median_log_mse,
                row.mean_frame_seconds
            )?;
        }
        Ok(())
    }
}

/// Per-pixel CD estimate at a frame's own observed values; the honest
/// per-frame query cost of the CD estimator.
fn cd_frame_map(stack: &FrameStack, frame: &Array2<f64>, h: f64) -> Result<Array2<f64>> {
    let (p, q) = frame.dim();
    let mut out = vec![0.0f64; p * q];
    let results: Result<Vec<()>> = out
        .par_chunks_mut(q)
        .enumerate()
        .map(|(i, row)| {
            for (j, dst) in row.iter_mut().enumerate() {
                *dst = cd_estimate(stack, frame[[i, j]], (i, j), h)?;
            }
            Ok(())
        })
        .collect();
    results?;
    Ok(Array2::from_shape_vec((p, q), out).expect("shape matches"))
}

/// Per-pixel direct DS estimate at a frame's own observed values.
fn ds_frame_map(stack: &FrameStack, frame: &Array2<f64>, h: f64) -> Result<Array2<f64>> {
    let (p, q) = frame.dim();
    let mut out = vec![0.0f64; p * q];
    let results: Result<Vec<()>> = out
        .par_chunks_mut(q)
        .enumerate()
        .map(|(i, row)| {
            for (j, dst) in row.iter_mut().enumerate() {
                *dst = ds_query(stack, frame[[i, j]], (i, j), h, DEFAULT_TRUNC_RADIUS)?;
            }
            Ok(())
        })
        .collect();
    results?;
    Ok(Array2::from_shape_vec((p, q), out).expect("shape matches"))
}

/// Per-pixel GPA query map at one fixed test value, for MSE evaluation.
fn gpa_value_maps(table: &GpaTable, test_points: &[f64]) -> Result<Array3<f64>> {
    let (p, q) = (table.p(), table.q());
    let maps: Result<Vec<Array2<f64>>> = test_points
        .par_iter()
        .map(|&x| {
            let mut map = Array2::zeros((p, q));
            for i in 0..p {
                for j in 0..q {
                    map[[i, j]] = gpa_query(table, x, (i, j))?;
                }
            }
            Ok(map)
        })
        .collect();
    let maps = maps?;
    let mut out = Array3::zeros((test_points.len(), p, q));
    for (gi, map) in maps.into_iter().enumerate() {
        out.index_axis_mut(ndarray::Axis(0), gi).assign(&map);
    }
    Ok(out)
}

struct Accumulator {
    mses: Vec<f64>,
    frame_secs: Vec<f64>,
}

/// Run the full MSE benchmark: for each sample size and replication, a fresh
/// stack and fresh uniform test points are drawn from a per-replication RNG
/// stream, every requested estimator is evaluated with its own rule-of-thumb
/// bandwidth (`h* = 5h^2` for the GPA variants), and log-MSE plus per-frame
/// query times are aggregated.
///
/// Results are deterministic for a fixed `cfg.seed` (timings aside): each
/// `(n, rep)` pair owns an independent stream derived from the seed, so the
/// schedule of replications cannot change the numbers.
pub fn run_mse_benchmark(
    cfg: &SimConfig,
    estimators: &[EstimatorKind],
    n_values: &[usize],
) -> Result<MseReport> {
    cfg.validate()?;
    if estimators.is_empty() || n_values.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one estimator and one sample size".into(),
        ));
    }
    let field = cfg.resolve_field()?;
    let m = cfg.p * cfg.q;
    let mut rows = Vec::new();

    for (n_idx, &n) in n_values.iter().enumerate() {
        if n < 2 {
            return Err(Error::Degenerate(format!("need at least 2 frames, got {n}")));
        }
        let mut acc: Vec<Accumulator> = estimators
            .iter()
            .map(|_| Accumulator {
                mses: Vec::with_capacity(cfg.reps),
                frame_secs: Vec::new(),
            })
            .collect();

        for rep in 0..cfg.reps {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((n_idx * cfg.reps + rep + 1) as u64);

            let stack = simulate_stack_with_rng(n, &field, cfg.sigma, &mut rng)?;
            let test_points: Vec<f64> = (0..cfg.g_plus).map(|_| rng.random()).collect();
            let fit_seed: u64 = rng.random();
            let sigma_hat = empirical_sigma(&stack)?;
            let h_ds = ds_bandwidth(n, m, sigma_hat)?;
            let h_cd = cd_bandwidth(n, sigma_hat)?;
            let timed = rep < TIMED_REPS;
            let frame = stack.frame(0).to_owned();

            for (kind, slot) in estimators.iter().zip(acc.iter_mut()) {
                match kind {
                    EstimatorKind::Cd => {
                        let maps = cd_grid(&stack, &test_points, h_cd)?;
                        slot.mses
                            .push(mse_of_maps(&maps, &field, cfg.sigma, &test_points)?);
                        if timed {
                            let t0 = Instant::now();
                            let _ = cd_frame_map(&stack, &frame, h_cd)?;
                            slot.frame_secs.push(t0.elapsed().as_secs_f64());
                        }
                    }
                    EstimatorKind::Ds => {
                        let cd_maps = cd_grid(&stack, &test_points, h_ds)?;
                        let maps = ds_smooth(&cd_maps, h_ds, DEFAULT_TRUNC_RADIUS)?;
                        slot.mses
                            .push(mse_of_maps(&maps, &field, cfg.sigma, &test_points)?);
                        if timed {
                            let t0 = Instant::now();
                            let _ = ds_frame_map(&stack, &frame, h_ds)?;
                            slot.frame_secs.push(t0.elapsed().as_secs_f64());
                        }
                    }
                    EstimatorKind::GpaCd => {
                        let plan = BandwidthPlan::cd(n, m, sigma_hat)?;
                        let table = gpa_fit(&stack, cfg.g_star, &plan, Variant::GpaCd, fit_seed)?;
                        let maps = gpa_value_maps(&table, &test_points)?;
                        slot.mses
                            .push(mse_of_maps(&maps, &field, cfg.sigma, &test_points)?);
                        if timed {
                            let t0 = Instant::now();
                            let _ = density_map(&table, frame.view())?;
                            slot.frame_secs.push(t0.elapsed().as_secs_f64());
                        }
                    }
                    EstimatorKind::GpaDs => {
                        let plan = BandwidthPlan::ds(n, m, sigma_hat)?;
                        let table = gpa_fit(&stack, cfg.g_star, &plan, Variant::GpaDs, fit_seed)?;
                        let maps = gpa_value_maps(&table, &test_points)?;
                        slot.mses
                            .push(mse_of_maps(&maps, &field, cfg.sigma, &test_points)?);
                        if timed {
                            let t0 = Instant::now();
                            let _ = density_map(&table, frame.view())?;
                            slot.frame_secs.push(t0.elapsed().as_secs_f64());
                        }
                    }
                }
            }
        }

        for (kind, slot) in estimators.iter().zip(acc) {
            let reps = slot.mses.len() as f64;
            let mean_mse = slot.mses.iter().sum::<f64>() / reps;
            let mut logs: Vec<f64> = slot.mses.iter().map(|m| m.ln()).collect();
            logs.sort_unstable_by(f64::total_cmp);
            let mean_log_mse = logs.iter().sum::<f64>() / reps;
            let median_log_mse = if logs.len() % 2 == 1 {
                logs[logs.len() / 2]
            } else {
                0.5 * (logs[logs.len() / 2 - 1] + logs[logs.len() / 2])
            };
            let mean_frame_seconds =
                slot.frame_secs.iter().sum::<f64>() / slot.frame_secs.len() as f64;
            rows.push(MseRow {
                estimator: *kind,
                n,
                mean_mse,
                mean_log_mse,
                median_log_mse,
                mean_frame_seconds,
            });
        }
    }

    Ok(MseReport {
        p: cfg.p,
        q: cfg.q,
        sigma: cfg.sigma,
        seed: cfg.seed,
        g_star: cfg.g_star,
        g_plus: cfg.g_plus,
        reps: cfg.reps,
        rows,
    })
}
