//! δ-discretized configurations: a spread family of fields together with a
//! constant-cardinality set of δ-cells on each graph, the L² energy of the
//! slab counting function, the Cauchy–Schwarz union bound, and the
//! incidence lower-bound check.
//!
//! Neighborhood measures are discretized at the cell scale: the
//! δ-neighborhood of a cell set is its one-cell dilation, so all measures
//! and overlaps are exact cell counts times the cell volume. Budget
//! comparisons against `δ^{-ε}` powers are recorded, not enforced — at desk
//! scales the measured spread constants of honest sets exceed `δ^{-ε}` for
//! small `ε` even though every structural invariant holds.

use crate::dyadic::{spread_constant, DyadicSet, SetSpec};
use crate::fields::{
    c2_norms, C2Eval, Diff, EvalOptions, FunctionFamily, ScalarField,
};
use crate::numerics::{morton_decode, BoxDomain, MAX_PARAM_DIM};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Parameters of a configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfigParams {
    /// Dyadic level, `δ = 2^-level`.
    pub level: u32,
    pub s: f64,
    pub t: f64,
    pub epsilon: f64,
    /// Graph-space dimension (`n`; the base has dimension `n - 1`).
    pub n: usize,
}

impl ConfigParams {
    pub fn delta(&self) -> f64 {
        (self.level as f64).exp2().recip()
    }

    /// Budget constant `C = δ^{-ε}`.
    pub fn budget(&self) -> f64 {
        self.delta().powf(-self.epsilon)
    }
}

/// Validation outcome: structural failures abort the build, budget
/// comparisons are recorded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigValidation {
    pub min_pair_distance: f64,
    pub delta_separated: bool,
    /// Measured spread constant of the family at exponent `t` in the C²
    /// metric.
    pub family_spread: f64,
    pub family_within_budget: bool,
    /// Per-member spread constant of `E(f)` at exponent `n - 2 + s`.
    pub set_spreads: Vec<f64>,
    pub sets_within_budget: bool,
}

/// A validated configuration: family, per-member cell sets trimmed to a
/// common cardinality, and parameters.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub family: FunctionFamily,
    pub sets: Vec<DyadicSet>,
    pub params: ConfigParams,
    /// Common cardinality after trimming.
    pub m_card: usize,
    pub validation: ConfigValidation,
    /// Pairwise C² distances of the family.
    pub distances: Vec<Vec<f64>>,
}

/// Validate the structural invariants and trim every cell set to the
/// minimum cardinality by sorted-order removal.
pub fn build_configuration(
    family: FunctionFamily,
    sets: Vec<DyadicSet>,
    params: ConfigParams,
) -> Result<Configuration> {
    if sets.len() != family.len() {
        return Err(Error::InvalidParameter(format!(
            "{} cell sets for {} family members",
            sets.len(),
            family.len()
        )));
    }
    let k = family.dim();
    if params.n != k + 1 {
        return Err(Error::InvalidParameter(format!(
            "parameter n = {} does not match the family dimension {} + 1",
            params.n, k
        )));
    }
    let delta = params.delta();
    for (idx, e) in sets.iter().enumerate() {
        if e.dim() != params.n || e.level() != params.level {
            return Err(Error::InvalidParameter(format!(
                "set {idx} has (dim {}, level {}), expected ({}, {})",
                e.dim(),
                e.level(),
                params.n,
                params.level
            )));
        }
        if e.is_empty() {
            return Err(Error::InvalidParameter(format!("set {idx} is empty")));
        }
        // every cell must meet the vertical δ-neighborhood of its graph
        let f = &family.fields[idx];
        let slope = c2_norms(
            &Diff::new(f, &ScalarField::constant(f.domain().clone(), 0.0))?,
            f.domain(),
            &EvalOptions::with_nodes(9),
        )
        .sup_gradient;
        let tol = delta * (1.5 + slope * (k as f64).sqrt() / 2.0);
        for &code in e.codes() {
            let center = e.cell_center(code);
            let (xbar, y) = center.split_at(k);
            if (y[0] - f.value(xbar)).abs() > tol {
                return Err(Error::MisalignedCell {
                    member: idx,
                    cell: morton_decode(code, params.n, params.level),
                });
            }
        }
    }

    // δ-separation and metric spread of the family
    let distances = family.distance_matrix(&EvalOptions::default())?;
    let nf = family.len();
    let mut min_d = f64::INFINITY;
    for i in 0..nf {
        for j in (i + 1)..nf {
            min_d = min_d.min(distances[i][j]);
        }
    }
    let delta_separated = nf < 2 || min_d >= delta * (1.0 - 1e-9);
    if !delta_separated {
        return Err(Error::InvalidFamily(format!(
            "family not δ-separated: min distance {min_d} < {delta}"
        )));
    }
    let family_spread = metric_spread(&distances, params.t, params.level);

    // trim to the common cardinality
    let m_card = sets.iter().map(|e| e.cardinality()).min().unwrap_or(0);
    let sets: Vec<DyadicSet> = sets
        .into_iter()
        .map(|e| {
            let codes: Vec<u64> = e.codes().iter().copied().take(m_card).collect();
            DyadicSet::from_codes(e.dim(), e.level(), codes)
        })
        .collect::<Result<Vec<_>>>()?;

    let exponent = params.n as f64 - 2.0 + params.s;
    let set_spreads: Vec<f64> = sets
        .par_iter()
        .map(|e| spread_constant(e, exponent).constant)
        .collect();

    let budget = params.budget();
    let validation = ConfigValidation {
        min_pair_distance: min_d,
        delta_separated,
        family_spread,
        family_within_budget: family_spread <= budget,
        sets_within_budget: set_spreads.iter().all(|&c| c <= budget),
        set_spreads,
    };
    Ok(Configuration { family, sets, params, m_card, validation, distances })
}

/// Spread constant of a finite δ-separated metric space from its distance
/// matrix: `max |B(f, r)| / (r^t N)` over members and dyadic radii.
fn metric_spread(distances: &[Vec<f64>], t: f64, level: u32) -> f64 {
    let n = distances.len();
    if n == 0 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    for row in distances {
        for j in 0..=level {
            let r = (j as f64).exp2().recip();
            let count = row.iter().filter(|&&d| d <= r).count();
            best = best.max(count as f64 / (r.powf(t) * n as f64));
        }
    }
    best
}

// ---------------------------------------------------------------------------
// L² energy
// ---------------------------------------------------------------------------

/// Two-route L² energy of the slab counting function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Direct quadrature of `∫ (Σ_f χ_{f^δ})²`.
    pub lhs: f64,
    /// `Σ_f measure(f^δ)` on the same lattice.
    pub diagonal: f64,
    /// `Σ_{f≠g} measure(f^δ ∩ g^δ)` on the same lattice.
    pub off_diagonal: f64,
    /// Relative gap between the direct route and `diagonal + off_diagonal`.
    pub discrepancy: f64,
    /// Budget `δ^{-2ε} |F|² δ^{1+t}`.
    pub rhs_budget: f64,
    pub within_budget: bool,
    /// Distance-annulus histogram: entry `[f][i]` counts members at
    /// distance in `(2^{-(i+1)}, 2^{-i}]` of member `f`.
    pub annuli: Vec<Vec<usize>>,
    pub delta: f64,
    pub resolution: f64,
}

/// Compute `∫ (Σ_f χ_{f^δ})² dx` by direct per-column counting AND by the
/// pairwise intersection identity, on the same absolute lattice (slabs are
/// counted over the full vertical line, not clipped to the unit interval).
pub fn l2_energy(
    family: &FunctionFamily,
    delta: f64,
    resolution: Option<f64>,
    epsilon: f64,
    t_exponent: f64,
) -> Result<EnergyReport> {
    let rho = resolution.unwrap_or(delta / 8.0);
    if rho > delta / 8.0 + 1e-15 {
        return Err(Error::TooCoarse { resolution: rho, max: delta / 8.0 });
    }
    let nf = family.len();
    let k = family.dim();
    let distances = family.distance_matrix(&EvalOptions::default())?;
    let mut min_d = f64::INFINITY;
    for i in 0..nf {
        for j in (i + 1)..nf {
            min_d = min_d.min(distances[i][j]);
        }
    }
    if nf >= 2 && min_d < delta * (1.0 - 1e-9) {
        return Err(Error::InvalidFamily(format!(
            "family not δ-separated: min distance {min_d} < {delta}"
        )));
    }

    let region = family.domain();
    let mut lo_idx = [0i64; MAX_PARAM_DIM];
    let mut n_idx = [0usize; MAX_PARAM_DIM];
    for a in 0..k {
        let jmin = (region.lo[a] / rho - 0.5).ceil() as i64;
        let jmax = (region.hi[a] / rho - 0.5).floor() as i64;
        lo_idx[a] = jmin;
        n_idx[a] = (jmax - jmin + 1).max(0) as usize;
    }
    let total_cols: usize = n_idx[..k].iter().product();
    let outer = n_idx[k - 1].max(1);
    let inner = total_cols / outer;

    // per row: (sum of c^2, diagonal count, off-diagonal count)
    let (sq_sum, diag_cells, off_cells) = (0..outer)
        .into_par_iter()
        .map(|row| {
            let mut values = vec![0.0f64; nf];
            let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * nf);
            let mut sq = 0u64;
            let mut diag = 0u64;
            let mut off = 0u64;
            let mut x = [0.0; MAX_PARAM_DIM];
            x[k - 1] = (lo_idx[k - 1] + row as i64) as f64 * rho + 0.5 * rho;
            for col in 0..inner {
                let mut rest = col;
                for a in 0..k - 1 {
                    let j = rest % n_idx[a];
                    rest /= n_idx[a];
                    x[a] = (lo_idx[a] + j as i64) as f64 * rho + 0.5 * rho;
                }
                for (vi, f) in values.iter_mut().zip(&family.fields) {
                    *vi = f.value(&x[..k]);
                }
                // pairwise route: interval intersections per ordered pair
                for i in 0..nf {
                    diag += column_count(values[i] - delta, values[i] + delta, rho);
                    for j in (i + 1)..nf {
                        let lo = values[i].max(values[j]) - delta;
                        let hi = values[i].min(values[j]) + delta;
                        off += 2 * column_count(lo, hi, rho);
                    }
                }
                // direct route: sweep the counting function over y-centers
                // with half-open segments (centers sit at half-offsets, so
                // they do not coincide with slab edges on these lattices)
                events.clear();
                for &v in &values {
                    events.push((v - delta, 1i32));
                    events.push((v + delta, -1i32));
                }
                events.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut c = 0i64;
                let mut seg_start = 0.0f64;
                for &(y, step) in &events {
                    if c > 0 {
                        sq += (c * c) as u64 * half_open_count(seg_start, y, rho);
                    }
                    c += step as i64;
                    seg_start = y;
                }
            }
            (sq, diag, off)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));

    let voln = rho.powi(k as i32 + 1);
    let lhs = sq_sum as f64 * voln;
    let diagonal = diag_cells as f64 * voln;
    let off_diagonal = off_cells as f64 * voln;
    let pairwise = diagonal + off_diagonal;
    let discrepancy = if lhs > 0.0 { (lhs - pairwise).abs() / lhs } else { 0.0 };

    let rhs_budget =
        delta.powf(-2.0 * epsilon) * (nf as f64) * (nf as f64) * delta.powf(1.0 + t_exponent);

    // annulus histogram
    let max_bucket = (1.0 / delta).log2().ceil() as usize + 1;
    let mut annuli = vec![vec![0usize; max_bucket + 1]; nf];
    for i in 0..nf {
        for j in 0..nf {
            if i == j {
                continue;
            }
            let d = distances[i][j];
            if d <= 0.0 {
                continue;
            }
            let bucket = ((-d.log2()).ceil() as i64 - 1).max(0) as usize;
            let bucket = bucket.min(max_bucket);
            annuli[i][bucket] += 1;
        }
    }

    Ok(EnergyReport {
        lhs,
        diagonal,
        off_diagonal,
        discrepancy,
        rhs_budget,
        within_budget: lhs <= rhs_budget,
        annuli,
        delta,
        resolution: rho,
    })
}

fn column_count(lo: f64, hi: f64, rho: f64) -> u64 {
    if hi < lo {
        return 0;
    }
    let jmin = (lo / rho - 0.5).ceil() as i64;
    let jmax = (hi / rho - 0.5).floor() as i64;
    (jmax - jmin + 1).max(0) as u64
}

/// Centers in the half-open segment `[a, b)`.
fn half_open_count(a: f64, b: f64, rho: f64) -> u64 {
    let jmin = (a / rho - 0.5).ceil() as i64;
    let jmax_excl = (b / rho - 0.5).ceil() as i64;
    (jmax_excl - jmin).max(0) as u64
}

// ---------------------------------------------------------------------------
// Cauchy–Schwarz union bound
// ---------------------------------------------------------------------------

/// `(Σ_i m_i)² / Σ_{ij} overlap_{ij}`, a lower bound for the measure of the
/// union; returns the degenerate flag when the denominator vanishes.
pub fn cs_union_lower_bound(measures: &[f64], overlaps: &[Vec<f64>]) -> Result<(f64, bool)> {
    let n = measures.len();
    if overlaps.len() != n || overlaps.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("overlap matrix shape mismatch".into()));
    }
    for i in 0..n {
        if (overlaps[i][i] - measures[i]).abs() > 1e-9 * measures[i].abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "diagonal overlap {} differs from measure {}",
                overlaps[i][i], measures[i]
            )));
        }
        for j in 0..n {
            if (overlaps[i][j] - overlaps[j][i]).abs()
                > 1e-9 * overlaps[i][j].abs().max(1.0)
            {
                return Err(Error::InvalidParameter("overlap matrix not symmetric".into()));
            }
        }
    }
    let num: f64 = measures.iter().sum::<f64>();
    let den: f64 = overlaps.iter().flat_map(|r| r.iter()).sum();
    if den <= 0.0 {
        return Ok((0.0, true));
    }
    Ok((num * num / den, false))
}

// ---------------------------------------------------------------------------
// neighborhood overlap and incidence bound
// ---------------------------------------------------------------------------

/// Pairwise overlap diagnostics of two members of a configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapReport {
    /// Cell-count measure of the dilated-neighborhood intersection.
    pub measure: f64,
    /// C² distance of the pair.
    pub distance: f64,
    /// Measured spread of the projected set `P_{E(f)}` at `n - 2 + s`.
    pub projected_spread: f64,
    pub projected_within_budget: bool,
    /// `measure / (δ^{-3ε} δ² / d^s)`.
    pub ratio: f64,
}

/// Discretized δ-neighborhood overlap of `E(f)` and `E(g)` (one-cell
/// dilations), plus the projected-set spread check.
pub fn neighborhood_overlap(config: &Configuration, i: usize, j: usize) -> Result<OverlapReport> {
    if i == j || i >= config.sets.len() || j >= config.sets.len() {
        return Err(Error::InvalidParameter("need two distinct members".into()));
    }
    let delta = config.params.delta();
    let n = config.params.n;
    let d = config.distances[i][j];
    let dil_i = config.sets[i].dilate();
    let dil_j = config.sets[j].dilate();
    let inter = dil_i.intersect(&dil_j)?;
    let measure = inter.cardinality() as f64 * delta.powi(n as i32);

    let proj = config.sets[i].project_drop_last()?;
    let exponent = n as f64 - 2.0 + config.params.s;
    let spread = spread_constant(&proj, exponent).constant;
    let budget3 = delta.powf(-3.0 * config.params.epsilon);
    let bound = budget3 * delta * delta / d.powf(config.params.s);
    Ok(OverlapReport {
        measure,
        distance: d,
        projected_spread: spread,
        projected_within_budget: spread <= budget3,
        ratio: measure / bound,
    })
}

/// Verdict of the incidence lower-bound check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncidenceReport {
    /// Exact δ-covering number of the union of the cell sets.
    pub union_count: usize,
    /// `δ^{16ε - t - (n-2+s)}`.
    pub bound: f64,
    pub pass: bool,
    /// `Σ_f measure(E^δ(f))` (dilated cells).
    pub sum_measures: f64,
    /// `Σ_{f,g} measure(E^δ(f) ∩ E^δ(g))` including the diagonal.
    pub overlap_sum: f64,
    /// Cauchy–Schwarz lower bound for the union of the dilations.
    pub cs_lower: f64,
    /// Union of the dilated neighborhoods, cells.
    pub dilated_union_count: usize,
    /// `2 C log2(1/δ) < δ^{-ε}/2` with `C = 1`: the scale is small enough
    /// for the budget chain; typically false at desk scales.
    pub delta0_condition: bool,
    pub m_card: usize,
    pub family_size: usize,
}

/// Exact union covering number against `δ^{16ε - t - (n-2+s)}`, with the
/// Cauchy–Schwarz chain on the discretized neighborhoods.
pub fn incidence_lower_bound_check(config: &Configuration, epsilon: f64) -> Result<IncidenceReport> {
    let p = &config.params;
    if p.t > p.s {
        return Err(Error::OutOfRegime(format!(
            "incidence bound assumes 0 < t <= s <= 1, got t = {}, s = {}",
            p.t, p.s
        )));
    }
    let delta = p.delta();
    let n = p.n;

    let mut union = config.sets[0].clone();
    for e in &config.sets[1..] {
        union = union.union(e)?;
    }
    let union_count = union.cardinality();

    let bound = delta.powf(16.0 * epsilon - p.t - (n as f64 - 2.0 + p.s));

    let dilated: Vec<DyadicSet> = config.sets.par_iter().map(|e| e.dilate()).collect();
    let voln = delta.powi(n as i32);
    let measures: Vec<f64> = dilated.iter().map(|d| d.cardinality() as f64 * voln).collect();
    let nf = dilated.len();
    let mut overlaps = vec![vec![0.0; nf]; nf];
    let pairs: Vec<(usize, usize)> = (0..nf)
        .flat_map(|i| ((i + 1)..nf).map(move |j| (i, j)))
        .collect();
    let pair_overlaps: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            dilated[i]
                .intersect(&dilated[j])
                .map(|s| s.cardinality() as f64 * voln)
        })
        .collect::<Result<Vec<_>>>()?;
    for (&(i, j), ov) in pairs.iter().zip(pair_overlaps) {
        overlaps[i][j] = ov;
        overlaps[j][i] = ov;
    }
    for i in 0..nf {
        overlaps[i][i] = measures[i];
    }
    let (cs_lower, _) = cs_union_lower_bound(&measures, &overlaps)?;

    let mut dil_union = dilated[0].clone();
    for d in &dilated[1..] {
        dil_union = dil_union.union(d)?;
    }

    let delta0_condition = 2.0 * (1.0 / delta).log2() < 0.5 * delta.powf(-epsilon);

    Ok(IncidenceReport {
        union_count,
        bound,
        pass: union_count as f64 >= bound,
        sum_measures: measures.iter().sum(),
        overlap_sum: overlaps.iter().flat_map(|r| r.iter()).sum(),
        cs_lower,
        dilated_union_count: dil_union.cardinality(),
        delta0_condition,
        m_card: config.m_card,
        family_size: nf,
    })
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

/// Planted base set `X = (full grid in x_1 ... x_{k-1}) × (s-spread set in
/// x_k)`, a `(δ, k-1+s)`-spread set in the base.
pub fn planted_base_set(level: u32, k: usize, s: f64, seed: u64) -> Result<DyadicSet> {
    let spread_1d = crate::dyadic::generate_set(&SetSpec::RandomSpread {
        s,
        m: level,
        k: 1,
        seed,
    })?;
    if k == 1 {
        return Ok(spread_1d);
    }
    let mut out = crate::dyadic::generate_set(&SetSpec::Uniform { m: level, k: 1 })?;
    for _ in 2..k {
        let grid = crate::dyadic::generate_set(&SetSpec::Uniform { m: level, k: 1 })?;
        out = crate::dyadic::product(&out, &grid)?;
    }
    crate::dyadic::product(&out, &spread_1d)
}

/// Graph cells of a field over a planted base set: for each base cell the
/// vertical cell containing the graph value at its center.
pub fn graph_cells_over(
    field: &ScalarField,
    base: &DyadicSet,
    level: u32,
) -> Result<DyadicSet> {
    let k = field.dim();
    if base.dim() != k || base.level() != level {
        return Err(Error::InvalidParameter("base set scale mismatch".into()));
    }
    let delta = (level as f64).exp2().recip();
    let side = 1u64 << level;
    let mut tuples = Vec::with_capacity(base.cardinality());
    for &code in base.codes() {
        let xt = morton_decode(code, k, level);
        let center: Vec<f64> = xt.iter().map(|&c| (c as f64 + 0.5) * delta).collect();
        let y = field.value(&center);
        let ycell = ((y / delta).floor().max(0.0) as u64).min(side - 1) as u32;
        let mut t = xt.clone();
        t.push(ycell);
        tuples.push(t);
    }
    DyadicSet::from_tuples(k + 1, level, &tuples)
}

/// Sharpness construction: parallel horizontal planes. The family consists
/// of constant fields at offsets drawn from a `t`-spread set, and every
/// member carries the same planted product base set, so the union is an
/// exact product.
pub fn parallel_plane_configuration(
    level: u32,
    s: f64,
    t: f64,
    epsilon: f64,
    k: usize,
    seed: u64,
) -> Result<Configuration> {
    let delta = (level as f64).exp2().recip();
    let offsets = crate::dyadic::generate_set(&SetSpec::RandomSpread {
        s: t,
        m: level,
        k: 1,
        seed,
    })?;
    let domain = BoxDomain::unit(k);
    let fields: Vec<ScalarField> = offsets
        .codes()
        .iter()
        .map(|&c| {
            let b = (offsets.cell_center(c))[0];
            ScalarField::constant(domain.clone(), b)
        })
        .collect();
    let family = FunctionFamily::from_fields(fields)?;
    let base = planted_base_set(level, k, s, seed.wrapping_add(1))?;
    let sets: Vec<DyadicSet> = family
        .fields
        .iter()
        .map(|f| graph_cells_over(f, &base, level))
        .collect::<Result<Vec<_>>>()?;
    let _ = delta;
    build_configuration(
        family,
        sets,
        ConfigParams { level, s, t, epsilon, n: k + 1 },
    )
}

/// Configuration from a family induced on a chart: projection points along
/// a segment at `t`-spread parameters, graph cells over one planted base.
pub fn induced_configuration(
    chart: Arc<crate::geometry::ManifoldChart>,
    level: u32,
    s: f64,
    t: f64,
    epsilon: f64,
    seed: u64,
) -> Result<Configuration> {
    let k = chart.param_dim();
    let amb = chart.ambient_dim();
    let params_1d = crate::dyadic::generate_set(&SetSpec::RandomSpread {
        s: t,
        m: level,
        k: 1,
        seed,
    })?;
    // segment inside the unit ball
    let anchor = [0.12, -0.2, 0.15, 0.1, 0.0];
    let dir = {
        let raw = [0.45, 0.3, -0.35, 0.25, 0.0];
        let n = crate::numerics::norm(&raw[..amb]);
        let mut d = [0.0; 5];
        for a in 0..amb {
            d[a] = raw[a] / n * 0.6;
        }
        d
    };
    let z: Vec<Vec<f64>> = params_1d
        .codes()
        .iter()
        .map(|&c| {
            let u = params_1d.cell_center(c)[0];
            (0..amb).map(|a| anchor[a] + u * dir[a]).collect()
        })
        .collect();
    let family = crate::fields::induced_projection_family(chart, &z)?;
    let base = planted_base_set(level, k, s, seed.wrapping_add(1))?;
    let sets: Vec<DyadicSet> = family
        .fields
        .iter()
        .map(|f| graph_cells_over(f, &base, level))
        .collect::<Result<Vec<_>>>()?;
    build_configuration(family, sets, ConfigParams { level, s, t, epsilon, n: k + 1 })
}

// ---------------------------------------------------------------------------
// directory format
// ---------------------------------------------------------------------------

impl Configuration {
    /// Store as a directory: `family.json`, `params.json`, one binary set
    /// per member.
    pub fn save_dir(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let spec = self
            .family
            .to_spec()
            .ok_or_else(|| Error::Unsupported("family kind not serialisable".into()))?;
        std::fs::write(dir.join("family.json"), serde_json::to_string_pretty(&spec)?)?;
        std::fs::write(
            dir.join("params.json"),
            serde_json::to_string_pretty(&self.params)?,
        )?;
        for (i, e) in self.sets.iter().enumerate() {
            let mut buf = Vec::new();
            e.write_binary(&mut buf)?;
            std::fs::write(dir.join(format!("set_{i:04}.bin")), buf)?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &std::path::Path) -> Result<Configuration> {
        let spec: crate::fields::FamilySpec =
            serde_json::from_str(&std::fs::read_to_string(dir.join("family.json"))?)?;
        let params: ConfigParams =
            serde_json::from_str(&std::fs::read_to_string(dir.join("params.json"))?)?;
        let family = FunctionFamily::from_spec(&spec)?;
        let mut sets = Vec::with_capacity(family.len());
        for i in 0..family.len() {
            let data = std::fs::read(dir.join(format!("set_{i:04}.bin")))?;
            sets.push(DyadicSet::read_binary(&mut data.as_slice())?);
        }
        build_configuration(family, sets, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::generate_set;
    use approx::assert_relative_eq;

    #[test]
    fn cs_bound_two_disjoint_and_identical() {
        let (v, deg) =
            cs_union_lower_bound(&[1.0, 1.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!deg);
        assert_relative_eq!(v, 2.0);
        let (v, _) =
            cs_union_lower_bound(&[1.0, 1.0], &[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_relative_eq!(v, 1.0);
    }

    #[test]
    fn cs_bound_degenerate_and_invalid() {
        let (v, deg) = cs_union_lower_bound(&[0.0], &[vec![0.0]]).unwrap();
        assert_eq!(v, 0.0);
        assert!(deg);
        assert!(cs_union_lower_bound(&[1.0], &[vec![2.0]]).is_err());
    }

    #[test]
    fn single_constant_field_energy() {
        // one field: LHS = measure(f^δ) = 2δ
        let domain = BoxDomain::unit(2);
        let fam = FunctionFamily::from_fields(vec![ScalarField::constant(domain, 0.5)]).unwrap();
        let delta = 1.0 / 64.0;
        let r = l2_energy(&fam, delta, None, 0.05, 0.5).unwrap();
        assert_relative_eq!(r.lhs, 2.0 * delta, epsilon = 1e-12);
        assert_relative_eq!(r.diagonal, 2.0 * delta, epsilon = 1e-12);
        assert_eq!(r.off_diagonal, 0.0);
        assert!(r.discrepancy < 1e-12);
    }

    #[test]
    fn parallel_constant_fields_energy() {
        // m fields spaced 4δ apart: disjoint slabs, LHS = m · 2δ
        let domain = BoxDomain::unit(2);
        let delta = 1.0 / 64.0;
        let m = 8;
        let fields: Vec<ScalarField> = (0..m)
            .map(|i| ScalarField::constant(domain.clone(), 0.1 + 4.0 * delta * i as f64))
            .collect();
        let fam = FunctionFamily::from_fields(fields).unwrap();
        let r = l2_energy(&fam, delta, None, 0.05, 0.5).unwrap();
        assert_relative_eq!(r.lhs, m as f64 * 2.0 * delta, epsilon = 1e-12);
        assert_eq!(r.off_diagonal, 0.0);
        assert!(r.discrepancy < 1e-12);
    }

    #[test]
    fn energy_identity_with_overlaps() {
        // spacing δ: adjacent slabs overlap, identity still exact
        let domain = BoxDomain::unit(2);
        let delta = 1.0 / 64.0;
        let fields: Vec<ScalarField> = (0..6)
            .map(|i| ScalarField::constant(domain.clone(), 0.3 + delta * i as f64))
            .collect();
        let fam = FunctionFamily::from_fields(fields).unwrap();
        let r = l2_energy(&fam, delta, None, 0.05, 0.5).unwrap();
        assert!(r.off_diagonal > 0.0);
        assert!(r.discrepancy < 1e-12, "discrepancy {}", r.discrepancy);
    }

    #[test]
    fn non_separated_family_rejected() {
        let domain = BoxDomain::unit(2);
        let delta = 1.0 / 64.0;
        let fields = vec![
            ScalarField::constant(domain.clone(), 0.5),
            ScalarField::constant(domain, 0.5 + delta / 4.0),
        ];
        let fam = FunctionFamily::from_fields(fields).unwrap();
        assert!(matches!(
            l2_energy(&fam, delta, None, 0.05, 0.5),
            Err(Error::InvalidFamily(_))
        ));
    }

    #[test]
    fn annuli_partition_every_pair_once() {
        let domain = BoxDomain::unit(2);
        let delta = 1.0 / 64.0;
        let fields: Vec<ScalarField> = (0..7)
            .map(|i| ScalarField::constant(domain.clone(), 0.1 + 0.1 * i as f64))
            .collect();
        let fam = FunctionFamily::from_fields(fields).unwrap();
        let r = l2_energy(&fam, delta, None, 0.05, 0.5).unwrap();
        for row in &r.annuli {
            let total: usize = row.iter().sum();
            assert_eq!(total, 6);
        }
        // δ-separated: every bucket index stays at most log2(1/δ)
        let cap = (1.0f64 / delta).log2() as usize;
        for row in &r.annuli {
            for (i, &c) in row.iter().enumerate() {
                if c > 0 {
                    assert!(i <= cap);
                }
            }
        }
    }

    #[test]
    fn single_member_configuration_valid() {
        let level = 6;
        let domain = BoxDomain::unit(2);
        let f = ScalarField::constant(domain, 0.5);
        let fam = FunctionFamily::from_fields(vec![f]).unwrap();
        let base = generate_set(&SetSpec::Uniform { m: level, k: 2 }).unwrap();
        let e = graph_cells_over(&fam.fields[0], &base, level).unwrap();
        let cfg = build_configuration(
            fam,
            vec![e],
            ConfigParams { level, s: 1.0, t: 0.01, epsilon: 0.05, n: 3 },
        )
        .unwrap();
        assert_eq!(cfg.m_card, 64 * 64);
        let rep = incidence_lower_bound_check(&cfg, 0.05).unwrap();
        assert!(rep.pass, "union {} bound {}", rep.union_count, rep.bound);
    }

    #[test]
    fn misaligned_cell_rejected() {
        let level = 5;
        let domain = BoxDomain::unit(2);
        let f = ScalarField::constant(domain, 0.25);
        let fam = FunctionFamily::from_fields(vec![f]).unwrap();
        // plant a cell far off the graph
        let tuples = vec![vec![3u32, 3, 31]];
        let e = DyadicSet::from_tuples(3, level, &tuples).unwrap();
        assert!(matches!(
            build_configuration(
                fam,
                vec![e],
                ConfigParams { level, s: 1.0, t: 0.5, epsilon: 0.05, n: 3 }
            ),
            Err(Error::MisalignedCell { member: 0, .. })
        ));
    }

    #[test]
    fn parallel_plane_sharpness_union_is_product() {
        let cfg = parallel_plane_configuration(6, 0.5, 0.5, 0.05, 2, 7).unwrap();
        let rep = incidence_lower_bound_check(&cfg, 0.05).unwrap();
        assert!(rep.pass);
        // the union is exactly |X| · |offsets|: product structure
        let expected = cfg.m_card * cfg.family.len();
        assert_eq!(rep.union_count, expected);
        // sharpness: union within δ^{-16ε} of δ^{-(n-2+s+t)}
        let delta = cfg.params.delta();
        let ideal = delta.powf(-(1.0 + cfg.params.s + cfg.params.t));
        let slack = delta.powf(-16.0 * cfg.params.epsilon);
        let ratio = rep.union_count as f64 / ideal;
        assert!(ratio <= slack && ratio >= 1.0 / slack, "ratio {ratio} slack {slack}");
    }

    #[test]
    fn trimming_produces_constant_cardinality() {
        let level = 5;
        let domain = BoxDomain::unit(2);
        let fields = vec![
            ScalarField::constant(domain.clone(), 0.3),
            ScalarField::constant(domain, 0.7),
        ];
        let fam = FunctionFamily::from_fields(fields).unwrap();
        let base_big = generate_set(&SetSpec::Uniform { m: level, k: 2 }).unwrap();
        let base_small = planted_base_set(level, 2, 0.5, 3).unwrap();
        let e0 = graph_cells_over(&fam.fields[0], &base_big, level).unwrap();
        let e1 = graph_cells_over(&fam.fields[1], &base_small, level).unwrap();
        let small = e1.cardinality();
        let cfg = build_configuration(
            fam,
            vec![e0, e1],
            ConfigParams { level, s: 0.5, t: 0.5, epsilon: 0.05, n: 3 },
        )
        .unwrap();
        assert_eq!(cfg.m_card, small);
        assert!(cfg.sets.iter().all(|e| e.cardinality() == small));
    }

    #[test]
    fn neighborhood_overlap_disjoint_planes() {
        let cfg = parallel_plane_configuration(6, 0.5, 0.5, 0.05, 2, 11).unwrap();
        // find a far-apart pair: dilated neighborhoods disjoint
        let nf = cfg.family.len();
        let mut far = (0, 1);
        let mut best = 0.0;
        for i in 0..nf {
            for j in (i + 1)..nf {
                if cfg.distances[i][j] > best {
                    best = cfg.distances[i][j];
                    far = (i, j);
                }
            }
        }
        let rep = neighborhood_overlap(&cfg, far.0, far.1).unwrap();
        assert_eq!(rep.measure, 0.0);
        assert!(rep.projected_spread.is_finite());
    }

    #[test]
    fn out_of_regime_rejected() {
        let cfg = parallel_plane_configuration(5, 0.4, 0.4, 0.05, 2, 2).unwrap();
        let mut bad = cfg;
        bad.params.t = 0.9;
        bad.params.s = 0.4;
        assert!(matches!(
            incidence_lower_bound_check(&bad, 0.05),
            Err(Error::OutOfRegime(_))
        ));
    }

    #[test]
    fn config_directory_round_trip() {
        let dir = std::env::temp_dir().join("projlab_cfg_test");
        let _ = std::fs::remove_dir_all(&dir);
        let cfg = parallel_plane_configuration(5, 0.5, 0.5, 0.05, 2, 13).unwrap();
        cfg.save_dir(&dir).unwrap();
        let back = Configuration::load_dir(&dir).unwrap();
        assert_eq!(back.family.len(), cfg.family.len());
        assert_eq!(back.m_card, cfg.m_card);
        for (a, b) in back.sets.iter().zip(&cfg.sets) {
            assert_eq!(a, b);
        }
        let _ = std::fs::remove_dir_all(&dir);
    }
}
