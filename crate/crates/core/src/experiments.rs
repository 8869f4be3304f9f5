//! End-to-end desk-scale experiments: box-counting dimension estimates of
//! projected point sets over sampled directions of a chart, and the
//! exceptional-direction sweep.
//!
//! Dimension estimates here are box-counting slopes over a dyadic scale
//! range, fit by least squares over the middle scales (the coarsest and
//! finest scales are dropped to avoid saturation artifacts). Slope evidence
//! at desk scales illustrates the expected behavior; it certifies nothing
//! about Hausdorff dimension.

use crate::dyadic::DyadicSet;
use crate::geometry::{verify_nondegenerate, ChartSpec, CurvatureReport, ManifoldChart};
use crate::numerics::{least_squares_slope, norm};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One-dimensional factor of a product point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Axis1d {
    Point { value: f64 },
    /// Midpoints of the depth-`depth` two-branch Cantor intervals.
    Cantor { ratio: f64, depth: u32 },
    /// Uniform lattice of `2^m` midpoints.
    Uniform { m: u32 },
}

impl Axis1d {
    fn samples(&self) -> Vec<f64> {
        match self {
            Axis1d::Point { value } => vec![*value],
            Axis1d::Cantor { ratio, depth } => {
                let mut intervals = vec![(0.0f64, 1.0f64)];
                for _ in 0..*depth {
                    let mut next = Vec::with_capacity(intervals.len() * 2);
                    for (a, b) in intervals {
                        let w = (b - a) * ratio;
                        next.push((a, a + w));
                        next.push((b - w, b));
                    }
                    intervals = next;
                }
                intervals.iter().map(|(a, b)| 0.5 * (a + b)).collect()
            }
            Axis1d::Uniform { m } => {
                let n = 1usize << m;
                (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
            }
        }
    }
}

/// Point-set specification in the ambient space of the chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZSpec {
    /// Product of one-dimensional factors, recentred and scaled into the
    /// unit ball.
    Product { axes: Vec<Axis1d> },
    Segment { from: Vec<f64>, to: Vec<f64>, samples: usize },
    Points { points: Vec<Vec<f64>> },
}

impl ZSpec {
    /// Realise the set as points inside the closed unit ball.
    pub fn realize(&self) -> Result<Vec<Vec<f64>>> {
        let raw: Vec<Vec<f64>> = match self {
            ZSpec::Product { axes } => {
                let factors: Vec<Vec<f64>> = axes.iter().map(|a| a.samples()).collect();
                let total: usize = factors.iter().map(|f| f.len()).product();
                if total == 0 || total > 1 << 22 {
                    return Err(Error::InvalidParameter(format!(
                        "product set with {total} points out of range"
                    )));
                }
                let mut out = Vec::with_capacity(total);
                let mut idx = vec![0usize; factors.len()];
                loop {
                    out.push(idx.iter().zip(&factors).map(|(&i, f)| f[i]).collect());
                    let mut axis = 0;
                    loop {
                        if axis == factors.len() {
                            return Ok(normalize_to_ball(out));
                        }
                        idx[axis] += 1;
                        if idx[axis] < factors[axis].len() {
                            break;
                        }
                        idx[axis] = 0;
                        axis += 1;
                    }
                }
            }
            ZSpec::Segment { from, to, samples } => {
                if from.len() != to.len() || *samples < 2 {
                    return Err(Error::InvalidParameter("bad segment spec".into()));
                }
                (0..*samples)
                    .map(|i| {
                        let u = i as f64 / (*samples - 1) as f64;
                        from.iter().zip(to).map(|(a, b)| a + u * (b - a)).collect()
                    })
                    .collect()
            }
            ZSpec::Points { points } => points.clone(),
        };
        Ok(normalize_to_ball(raw))
    }
}

/// Affine map into the closed ball of radius 0.9: recentre at the
/// coordinatewise midrange, then scale by a common factor.
fn normalize_to_ball(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    if points.is_empty() {
        return points;
    }
    let dim = points[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in &points {
        for a in 0..dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut max_norm: f64 = 0.0;
    for p in &points {
        let d: f64 = p
            .iter()
            .zip(&center)
            .map(|(v, c)| (v - c) * (v - c))
            .sum::<f64>()
            .sqrt();
        max_norm = max_norm.max(d);
    }
    let scale = if max_norm > 0.0 { 0.9 / max_norm } else { 1.0 };
    for p in &mut points {
        for a in 0..dim {
            p[a] = (p[a] - center[a]) * scale;
        }
    }
    points
}

/// Box-counting dimension estimate over a dyadic scale range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub scales: Vec<u32>,
    pub counts: Vec<usize>,
    /// Least-squares slope of `log2(count)` against the level, fit over the
    /// middle scales.
    pub slope: f64,
    pub residual: f64,
    /// `(min, max)` of the first-half, last-half and full-range slopes.
    pub band: (f64, f64),
}

/// Exact covering counts and the least-squares slope; requires at least
/// four scales.
pub fn box_dimension(set: &DyadicSet, scales: &[u32]) -> Result<DimensionEstimate> {
    if scales.len() < 4 {
        return Err(Error::InsufficientScales { need: 4, got: scales.len() });
    }
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    let counts: Vec<usize> = scales
        .iter()
        .map(|&m| set.covering_number(m))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = scales.iter().map(|&m| m as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c.max(1) as f64).log2()).collect();

    // middle-range fit: drop the coarsest and finest scale
    let mid = 1..xs.len() - 1;
    let (slope, _, residual) = least_squares_slope(&xs[mid.clone()], &ys[mid]);
    let half = xs.len() / 2;
    let (s_first, _, _) = least_squares_slope(&xs[..half], &ys[..half]);
    let (s_last, _, _) = least_squares_slope(&xs[half..], &ys[half..]);
    let (s_full, _, _) = least_squares_slope(&xs, &ys);
    let band = (
        s_first.min(s_last).min(s_full),
        s_first.max(s_last).max(s_full),
    );
    Ok(DimensionEstimate { scales, counts, slope, residual, band })
}

/// Specification of a projection-dimension experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub chart: ChartSpec,
    pub z: ZSpec,
    pub scale_min: u32,
    pub scale_max: u32,
    pub directions: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Projection slope of one sampled direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionResult {
    /// Parameter-space sample.
    pub x: Vec<f64>,
    /// Direction `Σ(x)`.
    pub z: Vec<f64>,
    pub estimate: DimensionEstimate,
}

/// Output of a projection-dimension experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionExperiment {
    pub directions: Vec<DirectionResult>,
    pub slope_min: f64,
    pub slope_median: f64,
    pub slope_max: f64,
    pub gate: CurvatureReport,
}

/// Gate sweep used before running experiments.
pub fn chart_gate(chart: &ManifoldChart) -> Result<CurvatureReport> {
    verify_nondegenerate(chart, 33)
}

/// Project the realised point set along directions sampled on the chart
/// (uniform in the parameter cube, seeded) and estimate the box dimension
/// of each projection over the scale range.
pub fn project_dim_experiment(
    chart: &ManifoldChart,
    spec: &ExperimentSpec,
) -> Result<ProjectionExperiment> {
    let gate = chart_gate(chart)?;
    if !gate.passes() {
        return Err(Error::Unsupported(format!(
            "chart fails the non-degeneracy gate (min |κ| = {}, same sign: {})",
            gate.min_abs, gate.all_same_sign
        )));
    }
    if spec.scale_max < spec.scale_min + 3 {
        return Err(Error::InsufficientScales {
            need: 4,
            got: (spec.scale_max - spec.scale_min + 1) as usize,
        });
    }
    let points = spec.z.realize()?;
    let amb = chart.ambient_dim();
    for p in &points {
        if p.len() != amb {
            return Err(Error::InvalidParameter(format!(
                "point dimension {} does not match ambient {}",
                p.len(),
                amb
            )));
        }
        if norm(p) > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter("points must lie in the unit ball".into()));
        }
    }
    let k = chart.param_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let xs: Vec<Vec<f64>> = (0..spec.directions)
        .map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let scales: Vec<u32> = (spec.scale_min..=spec.scale_max).collect();

    let directions: Vec<DirectionResult> = xs
        .par_iter()
        .map(|x| -> Result<DirectionResult> {
            let z = chart.point(x);
            let zv = z[..amb].to_vec();
            let estimate = projection_estimate(&points, &zv, &scales, spec.scale_max)?;
            Ok(DirectionResult { x: x.clone(), z: zv, estimate })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut slopes: Vec<f64> = directions.iter().map(|d| d.estimate.slope).collect();
    slopes.sort_by(f64::total_cmp);
    let median = slopes[slopes.len() / 2];
    Ok(ProjectionExperiment {
        slope_min: slopes.first().copied().unwrap_or(0.0),
        slope_median: median,
        slope_max: slopes.last().copied().unwrap_or(0.0),
        directions,
        gate,
    })
}

/// Box-dimension estimate of `{<p, z> : p ∈ Z}`: values normalised into
/// `[0,1]`, discretised on the finest dyadic grid, counted at every scale.
pub fn projection_estimate(
    points: &[Vec<f64>],
    z: &[f64],
    scales: &[u32],
    finest: u32,
) -> Result<DimensionEstimate> {
    let mut vals: Vec<f64> = points
        .iter()
        .map(|p| p.iter().zip(z).map(|(a, b)| a * b).sum())
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    if range <= 0.0 {
        // degenerate projection: a single value
        vals.iter_mut().for_each(|v| *v = 0.0);
    } else {
        vals.iter_mut().for_each(|v| *v = (*v - lo) / range);
    }
    let side = 1u64 << finest;
    let cells: Vec<u64> = vals
        .iter()
        .map(|&v| ((v * side as f64).floor() as u64).min(side - 1))
        .collect();
    let set = DyadicSet::from_codes(1, finest, cells)?;
    box_dimension(&set, scales)
}

/// One row of the exceptional-direction sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    /// Fraction of sampled directions with slope below `s`.
    pub fraction: f64,
    /// Box-dimension estimate of the exceptional set in parameter space
    /// (illustrative; `None` when fewer than two directions qualify).
    pub exceptional_dim: Option<f64>,
    /// Reference curve `(n - 2) + s`.
    pub reference: f64,
}

/// For each threshold `s`, the empirical fraction and a coarse box-dimension
/// estimate of the direction set whose projection slope falls below `s`.
/// The table is evidence, not a certificate: almost-everywhere statements
/// are not decidable from finitely many samples.
pub fn exceptional_sweep(
    chart: &ManifoldChart,
    spec: &ExperimentSpec,
    s_grid: &[f64],
) -> Result<(ProjectionExperiment, Vec<SweepRow>)> {
    let experiment = project_dim_experiment(chart, spec)?;
    let k = chart.param_dim();
    let n = chart.ambient_dim() - 1;
    let rows = s_grid
        .iter()
        .map(|&s| {
            let bad: Vec<&DirectionResult> = experiment
                .directions
                .iter()
                .filter(|d| d.estimate.slope < s)
                .collect();
            let fraction = bad.len() as f64 / experiment.directions.len().max(1) as f64;
            let exceptional_dim = if bad.len() >= 2 {
                let level = 6u32;
                let scale = (1u64 << level) as f64;
                let tuples: Vec<Vec<u32>> = bad
                    .iter()
                    .map(|d| {
                        d.x
                            .iter()
                            .map(|&v| ((v * scale).floor() as u32).min((scale - 1.0) as u32))
                            .collect()
                    })
                    .collect();
                DyadicSet::from_tuples(k, level, &tuples)
                    .ok()
                    .and_then(|set| box_dimension(&set, &[1, 2, 3, 4, 5, 6]).ok())
                    .map(|e| e.slope)
            } else {
                None
            };
            SweepRow { s, fraction, exceptional_dim, reference: (n as f64 - 2.0) + s }
        })
        .collect();
    Ok((experiment, rows))
}
