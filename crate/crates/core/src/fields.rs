//! C² scalar fields, families induced by projecting a point set along a
//! chart, and the cinematic-family diagnostics.
//!
//! Every field carries closed-form value/gradient/directional-second-
//! derivative evaluators through [`C2Eval`]. Suprema and infima over a
//! domain are taken on a refinement grid (65 nodes per axis by default)
//! with one local refinement pass around the arg-extremum; directions for
//! second derivatives run over a fixed sphere net. All constants derived
//! this way carry a quantified grid uncertainty rather than a certificate.

use crate::geometry::{ChartSpec, ManifoldChart};
use crate::numerics::{
    norm, pt, refine_extremum, sphere_net, BoxDomain, Grid, Pt, SymMat, MAX_PARAM_DIM,
};
use crate::{Error, Result};
use crate::geometry::make_builtin_chart;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Evaluation contract shared by fields and field differences.
pub trait C2Eval: Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> &BoxDomain;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Pt;
    fn hessian(&self, x: &[f64]) -> SymMat;
    /// `∇_ξ ∇_ξ` for unit `ξ`.
    fn dir2(&self, x: &[f64], xi: &Pt) -> f64 {
        self.hessian(x).quad(xi)
    }
    fn gradient_norm(&self, x: &[f64]) -> f64 {
        norm(&self.gradient(x)[..self.dim()])
    }
}

/// Multivariate polynomial in up to three variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub k: usize,
    /// `(exponents, coefficient)` pairs.
    pub terms: Vec<(Vec<u8>, f64)>,
}

impl Poly {
    pub fn new(k: usize, terms: Vec<(Vec<u8>, f64)>) -> Self {
        assert!(terms.iter().all(|(e, _)| e.len() == k));
        Self { k, terms }
    }

    pub fn constant(k: usize, c: f64) -> Self {
        Self::new(k, vec![(vec![0; k], c)])
    }

    /// `a · x + b`.
    pub fn affine(k: usize, a: &[f64], b: f64) -> Self {
        let mut terms = vec![(vec![0; k], b)];
        for (i, &c) in a.iter().enumerate() {
            let mut e = vec![0; k];
            e[i] = 1;
            terms.push((e, c));
        }
        Self::new(k, terms)
    }

    fn eval(&self, x: &[f64], d: &[u8]) -> f64 {
        let mut total = 0.0;
        'terms: for (exps, coeff) in &self.terms {
            let mut c = *coeff;
            for i in 0..self.k {
                let (e, di) = (exps[i] as i32, d[i] as i32);
                if e < di {
                    continue 'terms;
                }
                for j in 0..di {
                    c *= (e - j) as f64;
                }
                c *= x[i].powi(e - di);
            }
            total += c;
        }
        total
    }
}

#[derive(Debug, Clone)]
enum FieldKind {
    Constant(f64),
    Poly(Poly),
    /// `x -> scale * (<Σ(x), z> + shift)`.
    Induced {
        chart: Arc<ManifoldChart>,
        z: Vec<f64>,
        shift: f64,
        scale: f64,
    },
    /// Multilinear interpolation of samples on a uniform node grid.
    Grid { nodes: usize, values: Vec<f64> },
}

/// Provenance of a field, mirrored in the serialised form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Constant,
    Polynomial,
    Induced,
    GridSampled,
}

/// A C² scalar field on a box domain.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: BoxDomain,
    kind: FieldKind,
}

impl ScalarField {
    pub fn constant(domain: BoxDomain, c: f64) -> Self {
        Self { domain, kind: FieldKind::Constant(c) }
    }

    pub fn poly(domain: BoxDomain, p: Poly) -> Self {
        assert_eq!(domain.dim(), p.k);
        Self { domain, kind: FieldKind::Poly(p) }
    }

    pub fn induced(chart: Arc<ManifoldChart>, z: Vec<f64>, shift: f64, scale: f64) -> Self {
        let domain = BoxDomain::unit(chart.param_dim());
        Self { domain, kind: FieldKind::Induced { chart, z, shift, scale } }
    }

    /// Field interpolating `values` sampled on the uniform `nodes^k` grid of
    /// `domain`; flat index is `sum_i idx_i * nodes^i`.
    pub fn from_grid(domain: BoxDomain, nodes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nodes.pow(domain.dim() as u32) {
            return Err(Error::InvalidParameter("grid sample count mismatch".into()));
        }
        Ok(Self { domain, kind: FieldKind::Grid { nodes, values } })
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            FieldKind::Constant(_) => Provenance::Constant,
            FieldKind::Poly(_) => Provenance::Polynomial,
            FieldKind::Induced { .. } => Provenance::Induced,
            FieldKind::Grid { .. } => Provenance::GridSampled,
        }
    }

    /// Whether the evaluators extend beyond the nominal domain box
    /// (closed-form kinds do; grid samples do not).
    pub fn extends_beyond_domain(&self) -> bool {
        !matches!(self.kind, FieldKind::Grid { .. })
    }

    fn grid_value(&self, nodes: usize, values: &[f64], x: &[f64]) -> f64 {
        let k = self.domain.dim();
        let mut base = [0usize; MAX_PARAM_DIM];
        let mut frac = [0.0f64; MAX_PARAM_DIM];
        for i in 0..k {
            let step = self.domain.side(i) / (nodes - 1) as f64;
            let t = ((x[i] - self.domain.lo[i]) / step).clamp(0.0, (nodes - 1) as f64);
            let b = (t.floor() as usize).min(nodes - 2);
            base[i] = b;
            frac[i] = t - b as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << k) {
            let mut w = 1.0;
            let mut flat = 0usize;
            let mut stride = 1usize;
            for i in 0..k {
                let hi = (corner >> i) & 1;
                w *= if hi == 1 { frac[i] } else { 1.0 - frac[i] };
                flat += (base[i] + hi) * stride;
                stride *= nodes;
            }
            total += w * values[flat];
        }
        total
    }
}

impl C2Eval for ScalarField {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FieldKind::Constant(c) => *c,
            FieldKind::Poly(p) => p.eval(x, &[0; MAX_PARAM_DIM][..p.k]),
            FieldKind::Induced { chart, z, shift, scale } => {
                scale * (chart.project(x, z) + shift)
            }
            FieldKind::Grid { nodes, values } => self.grid_value(*nodes, values, x),
        }
    }

    fn gradient(&self, x: &[f64]) -> Pt {
        let k = self.dim();
        match &self.kind {
            FieldKind::Constant(_) => [0.0; MAX_PARAM_DIM],
            FieldKind::Poly(p) => {
                let mut g = [0.0; MAX_PARAM_DIM];
                let mut d = [0u8; MAX_PARAM_DIM];
                for i in 0..k {
                    d[i] = 1;
                    g[i] = p.eval(x, &d[..k]);
                    d[i] = 0;
                }
                g
            }
            FieldKind::Induced { chart, z, scale, .. } => {
                let mut g = chart.project_gradient(x, z);
                for v in g.iter_mut() {
                    *v *= scale;
                }
                g
            }
            FieldKind::Grid { .. } => {
                let mut g = [0.0; MAX_PARAM_DIM];
                let h = 1e-5;
                for i in 0..k {
                    let mut xp = pt(&x[..k]);
                    let mut xm = pt(&x[..k]);
                    xp[i] += h;
                    xm[i] -= h;
                    g[i] = (self.value(&xp[..k]) - self.value(&xm[..k])) / (2.0 * h);
                }
                g
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> SymMat {
        let k = self.dim();
        match &self.kind {
            FieldKind::Constant(_) => SymMat::zero(k),
            FieldKind::Poly(p) => {
                let mut m = SymMat::zero(k);
                let mut d = [0u8; MAX_PARAM_DIM];
                for i in 0..k {
                    for j in i..k {
                        d[i] += 1;
                        d[j] += 1;
                        let v = p.eval(x, &d[..k]);
                        d[i] = 0;
                        d[j] = 0;
                        m.m[i][j] = v;
                        m.m[j][i] = v;
                    }
                }
                m
            }
            FieldKind::Induced { chart, z, scale, .. } => {
                let mut m = chart.project_hessian(x, z);
                for i in 0..k {
                    for j in 0..k {
                        m.m[i][j] *= scale;
                    }
                }
                m
            }
            FieldKind::Grid { .. } => {
                let h = 1e-4;
                let mut m = SymMat::zero(k);
                for i in 0..k {
                    for j in i..k {
                        let v = if i == j {
                            let mut xp = pt(&x[..k]);
                            let mut xm = pt(&x[..k]);
                            xp[i] += h;
                            xm[i] -= h;
                            (self.value(&xp[..k]) - 2.0 * self.value(x) + self.value(&xm[..k]))
                                / (h * h)
                        } else {
                            let mut a = pt(&x[..k]);
                            let mut b = pt(&x[..k]);
                            let mut c = pt(&x[..k]);
                            let mut e = pt(&x[..k]);
                            a[i] += h;
                            a[j] += h;
                            b[i] += h;
                            b[j] -= h;
                            c[i] -= h;
                            c[j] += h;
                            e[i] -= h;
                            e[j] -= h;
                            (self.value(&a[..k]) - self.value(&b[..k]) - self.value(&c[..k])
                                + self.value(&e[..k]))
                                / (4.0 * h * h)
                        };
                        m.m[i][j] = v;
                        m.m[j][i] = v;
                    }
                }
                m
            }
        }
    }
}

/// Difference `h = f - g` of two fields on a shared domain. When both
/// fields are induced from the same chart with the same renormalisation the
/// difference collapses to a single projection along `z_f - z_g`.
pub struct Diff<'a> {
    f: &'a ScalarField,
    g: &'a ScalarField,
    fused: Option<(Arc<ManifoldChart>, Vec<f64>, f64)>,
}

impl<'a> Diff<'a> {
    pub fn new(f: &'a ScalarField, g: &'a ScalarField) -> Result<Self> {
        if f.domain != g.domain {
            return Err(Error::DomainMismatch);
        }
        let fused = match (&f.kind, &g.kind) {
            (
                FieldKind::Induced { chart: c1, z: z1, scale: s1, .. },
                FieldKind::Induced { chart: c2, z: z2, scale: s2, .. },
            ) if Arc::ptr_eq(c1, c2) && s1 == s2 => {
                let zd: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| a - b).collect();
                Some((c1.clone(), zd, *s1))
            }
            _ => None,
        };
        Ok(Self { f, g, fused })
    }
}

impl C2Eval for Diff<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn domain(&self) -> &BoxDomain {
        self.f.domain()
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.fused {
            Some((chart, zd, scale)) => scale * chart.project(x, zd),
            None => self.f.value(x) - self.g.value(x),
        }
    }

    fn gradient(&self, x: &[f64]) -> Pt {
        match &self.fused {
            Some((chart, zd, scale)) => {
                let mut g = chart.project_gradient(x, zd);
                for v in g.iter_mut() {
                    *v *= scale;
                }
                g
            }
            None => {
                let (a, b) = (self.f.gradient(x), self.g.gradient(x));
                let mut g = [0.0; MAX_PARAM_DIM];
                for i in 0..self.dim() {
                    g[i] = a[i] - b[i];
                }
                g
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> SymMat {
        match &self.fused {
            Some((chart, zd, scale)) => {
                let mut m = chart.project_hessian(x, zd);
                for i in 0..m.k {
                    for j in 0..m.k {
                        m.m[i][j] *= scale;
                    }
                }
                m
            }
            None => {
                let (a, b) = (self.f.hessian(x), self.g.hessian(x));
                let mut m = SymMat::zero(self.dim());
                for i in 0..m.k {
                    for j in 0..m.k {
                        m.m[i][j] = a.m[i][j] - b.m[i][j];
                    }
                }
                m
            }
        }
    }
}

// ---------------------------------------------------------------------------
// sup / inf machinery
// ---------------------------------------------------------------------------

/// Grid resolution for extrema; 65 nodes per axis unless stated otherwise.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub nodes: usize,
    pub refine_rounds: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { nodes: 65, refine_rounds: 2 }
    }
}

impl EvalOptions {
    pub fn with_nodes(nodes: usize) -> Self {
        Self { nodes, ..Default::default() }
    }
}

/// Componentwise suprema of a C² function over a domain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct C2Norms {
    pub sup_value: f64,
    pub sup_gradient: f64,
    pub sup_dir2: f64,
    /// First-order grid error estimate.
    pub uncertainty: f64,
}

impl C2Norms {
    pub fn total(&self) -> f64 {
        self.sup_value + self.sup_gradient + self.sup_dir2
    }
}

fn max_reduce(a: (f64, Pt), b: (f64, Pt)) -> (f64, Pt) {
    if b.0 > a.0 {
        b
    } else {
        a
    }
}

fn min_reduce(a: (f64, Pt), b: (f64, Pt)) -> (f64, Pt) {
    if b.0 < a.0 {
        b
    } else {
        a
    }
}

/// Sup of `|h|`, `|∇h|` and `sup_ξ |∇_ξ∇_ξ h|` over `domain`, each refined
/// locally around its grid argmax.
pub fn c2_norms(h: &dyn C2Eval, domain: &BoxDomain, opts: &EvalOptions) -> C2Norms {
    let k = domain.dim();
    let net = sphere_net(k);
    let grid = Grid::new(domain.clone(), opts.nodes);
    let init = (f64::NEG_INFINITY, [0.0; MAX_PARAM_DIM]);
    let (v_best, g_best, d_best, lip) = (0..grid.len())
        .into_par_iter()
        .fold(
            || (init, init, init, 0.0f64),
            |(vb, gb, db, lip), flat| {
                let x = grid.point(flat);
                let v = h.value(&x[..k]).abs();
                let g = h.gradient_norm(&x[..k]);
                let hess = h.hessian(&x[..k]);
                let mut d = 0.0f64;
                for xi in &net {
                    d = d.max(hess.quad(xi).abs());
                }
                (
                    max_reduce(vb, (v, x)),
                    max_reduce(gb, (g, x)),
                    max_reduce(db, (d, x)),
                    lip.max(hess.frobenius()),
                )
            },
        )
        .reduce(
            || (init, init, init, 0.0f64),
            |a, b| (max_reduce(a.0, b.0), max_reduce(a.1, b.1), max_reduce(a.2, b.2), a.3.max(b.3)),
        );

    let step = grid.max_step();
    let rounds = opts.refine_rounds;
    let (_, v) =
        refine_extremum(&|x: &Pt| h.value(&x[..k]).abs(), domain, v_best.1, step, false, rounds);
    let (_, g) =
        refine_extremum(&|x: &Pt| h.gradient_norm(&x[..k]), domain, g_best.1, step, false, rounds);
    let (_, d) = refine_extremum(
        &|x: &Pt| {
            let hess = h.hessian(&x[..k]);
            net.iter().map(|xi| hess.quad(xi).abs()).fold(0.0, f64::max)
        },
        domain,
        d_best.1,
        step,
        false,
        rounds,
    );
    C2Norms {
        sup_value: v.max(v_best.0),
        sup_gradient: g.max(g_best.0),
        sup_dir2: d.max(d_best.0),
        uncertainty: step * (v_best.0.max(g_best.0) + lip),
    }
}

/// `‖f-g‖_{C²}` as the sum of the three suprema over the shared domain.
pub fn c2_distance(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    c2_distance_opts(f, g, &EvalOptions::default(), None)
}

pub fn c2_distance_opts(
    f: &ScalarField,
    g: &ScalarField,
    opts: &EvalOptions,
    domain: Option<&BoxDomain>,
) -> Result<f64> {
    let h = Diff::new(f, g)?;
    let dom = domain.unwrap_or(f.domain()).clone();
    Ok(c2_norms(&h, &dom, opts).total())
}

/// Outcome of a grid minimisation with refinement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InfValue {
    pub value: f64,
    pub argmin: [f64; MAX_PARAM_DIM],
    pub uncertainty: f64,
}

fn grid_infimum<Obj: Fn(&Pt) -> f64 + Sync>(
    obj: &Obj,
    domain: &BoxDomain,
    opts: &EvalOptions,
    second_scale: f64,
) -> InfValue {
    let k = domain.dim();
    let grid = Grid::new(domain.clone(), opts.nodes);
    let init = (f64::INFINITY, [0.0; MAX_PARAM_DIM]);
    let best = (0..grid.len())
        .into_par_iter()
        .fold(
            || init,
            |acc, flat| {
                let x = grid.point(flat);
                let v = obj(&x);
                min_reduce(acc, (v, x))
            },
        )
        .reduce(|| init, min_reduce);
    let step = grid.max_step();
    let (argmin, value) = refine_extremum(obj, domain, best.1, step, true, opts.refine_rounds);
    let mut arg = [0.0; MAX_PARAM_DIM];
    arg[..k].copy_from_slice(&argmin[..k]);
    InfValue { value: value.min(best.0), argmin: arg, uncertainty: step * second_scale }
}

/// Tangency parameter `inf_U (|h| + |∇h|)` with grid + descent refinement.
pub fn tangency_parameter(
    f: &ScalarField,
    g: &ScalarField,
    sub: Option<&BoxDomain>,
) -> Result<InfValue> {
    tangency_parameter_opts(f, g, sub, &EvalOptions::default())
}

pub fn tangency_parameter_opts(
    f: &ScalarField,
    g: &ScalarField,
    sub: Option<&BoxDomain>,
    opts: &EvalOptions,
) -> Result<InfValue> {
    let h = Diff::new(f, g)?;
    let domain = match sub {
        Some(d) => d.clone(),
        None => f.domain().clone(),
    };
    let k = domain.dim();
    // second-derivative scale for the reported uncertainty
    let hess_scale = c2_norms(&h, &domain, &EvalOptions::with_nodes(9)).sup_dir2;
    Ok(grid_infimum(
        &|x: &Pt| h.value(&x[..k]).abs() + h.gradient_norm(&x[..k]),
        &domain,
        opts,
        hess_scale,
    ))
}

/// `inf_x { |h| + |∇h| + min_ξ |∇_ξ∇_ξ h| }` over the grid and sphere net.
pub fn cinematic_infimum(f: &ScalarField, g: &ScalarField) -> Result<InfValue> {
    cinematic_infimum_opts(f, g, &EvalOptions::default(), None)
}

pub fn cinematic_infimum_opts(
    f: &ScalarField,
    g: &ScalarField,
    opts: &EvalOptions,
    domain: Option<&BoxDomain>,
) -> Result<InfValue> {
    let h = Diff::new(f, g)?;
    let dom = domain.unwrap_or(f.domain()).clone();
    let k = dom.dim();
    let net = sphere_net(k);
    let obj = |x: &Pt| {
        let hess = h.hessian(&x[..k]);
        let mind = net.iter().map(|xi| hess.quad(xi).abs()).fold(f64::INFINITY, f64::min);
        h.value(&x[..k]).abs() + h.gradient_norm(&x[..k]) + mind
    };
    let hess_scale = c2_norms(&h, &dom, &EvalOptions::with_nodes(9)).sup_dir2;
    Ok(grid_infimum(&obj, &dom, opts, hess_scale))
}

/// Smallest `|ξ^T M ξ|` over the sphere net (tests cross-check this against
/// the eigenvalue route: zero when the form is indefinite, else min |λ|).
pub fn min_abs_quad(m: &SymMat, net: &[Pt]) -> f64 {
    net.iter().map(|xi| m.quad(xi).abs()).fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// families
// ---------------------------------------------------------------------------

/// A family of fields with a shared domain, optionally induced from a chart.
#[derive(Debug, Clone)]
pub struct FunctionFamily {
    pub fields: Vec<ScalarField>,
    pub chart: Option<Arc<ManifoldChart>>,
    pub z: Option<Vec<Vec<f64>>>,
    /// `(shift, scale)` of the affine renormalisation into `[0,1]` values.
    pub renorm: Option<(f64, f64)>,
}

impl FunctionFamily {
    pub fn from_fields(fields: Vec<ScalarField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidFamily("empty family".into()));
        }
        let dom = fields[0].domain().clone();
        if fields.iter().any(|f| *f.domain() != dom) {
            return Err(Error::DomainMismatch);
        }
        Ok(Self { fields, chart: None, z: None, renorm: None })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        self.fields[0].domain()
    }

    /// All unordered pairs `(i, j)`, `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
    }

    /// Pairwise C² distance matrix (upper triangle mirrored).
    pub fn distance_matrix(&self, opts: &EvalOptions) -> Result<Vec<Vec<f64>>> {
        let n = self.len();
        let pairs = self.pairs();
        let dists: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| c2_distance_opts(&self.fields[i], &self.fields[j], opts, None))
            .collect::<Result<Vec<_>>>()?;
        let mut m = vec![vec![0.0; n]; n];
        for (&(i, j), d) in pairs.iter().zip(dists) {
            m[i][j] = d;
            m[j][i] = d;
        }
        Ok(m)
    }
}

/// Estimated sup of `|Σ|`, `|∇Σ|`, `|∇²Σ|` over the chart box, used as the
/// Lipschitz bound of induced families.
pub fn chart_c2_bound(chart: &ManifoldChart, nodes: usize) -> f64 {
    let k = chart.param_dim();
    let amb = chart.ambient_dim();
    let grid = Grid::new(BoxDomain::unit(k), nodes);
    let mut sup_p: f64 = 0.0;
    let mut sup_j: f64 = 0.0;
    let mut sup_h: f64 = 0.0;
    for x in grid.points() {
        sup_p = sup_p.max(norm(&chart.point(&x[..k])[..amb]));
        let jac = chart.jacobian(&x[..k]);
        let jn: f64 = jac.iter().map(|r| crate::numerics::dot(&r[..amb], &r[..amb])).sum();
        sup_j = sup_j.max(jn.sqrt());
        let mut hn = 0.0;
        for i in 0..k {
            for j in 0..k {
                let d = chart.second_derivative(&x[..k], i, j);
                hn += crate::numerics::dot(&d[..amb], &d[..amb]);
            }
        }
        sup_h = sup_h.max(hn.sqrt());
    }
    sup_p + sup_j + sup_h
}

/// Build the family `f_z(x) = <Σ(x), z>` over the points of `Z`, renormalised
/// affinely into `[0,1]`-valued fields by `(f + L) / (2L)` with `L` the
/// largest member sup-norm.
pub fn induced_projection_family(
    chart: Arc<ManifoldChart>,
    z_points: &[Vec<f64>],
) -> Result<FunctionFamily> {
    if z_points.is_empty() {
        return Err(Error::InvalidFamily("empty point set".into()));
    }
    let amb = chart.ambient_dim();
    for z in z_points {
        if z.len() != amb {
            return Err(Error::InvalidParameter(format!(
                "point dimension {} does not match the ambient dimension {amb}",
                z.len()
            )));
        }
        if norm(z) > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "projection points must lie in the closed unit ball, |z| = {}",
                norm(z)
            )));
        }
    }
    // L = max member sup-norm over a refinement grid plus local refinement
    let k = chart.param_dim();
    let grid = Grid::new(BoxDomain::unit(k), 33);
    let mut l: f64 = 0.0;
    for z in z_points {
        let obj = |x: &Pt| chart.project(&x[..k], z).abs();
        let mut best = (0.0f64, [0.0; MAX_PARAM_DIM]);
        for x in grid.points() {
            let v = obj(&x);
            if v > best.0 {
                best = (v, x);
            }
        }
        let (_, refined) =
            refine_extremum(&obj, &BoxDomain::unit(k), best.1, grid.max_step(), false, 2);
        l = l.max(best.0.max(refined));
    }
    let l = if l > 0.0 { l } else { 1.0 };
    let scale = 1.0 / (2.0 * l);
    let fields = z_points
        .iter()
        .map(|z| ScalarField::induced(chart.clone(), z.clone(), l, scale))
        .collect();
    Ok(FunctionFamily {
        fields,
        chart: Some(chart),
        z: Some(z_points.to_vec()),
        renorm: Some((l, scale)),
    })
}

// ---------------------------------------------------------------------------
// cinematic constant estimation
// ---------------------------------------------------------------------------

/// Verdict of the cinematic-family diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CinematicReport {
    /// Estimated cinematic constant (>= 1).
    pub k_const: f64,
    /// Largest sampled pairwise distance (diameter clause).
    pub diameter: f64,
    /// Empirical doubling constant of the sampled metric space.
    pub doubling: f64,
    /// Samples `(η, α(η))` of the modulus of continuity.
    pub alpha: Vec<(f64, f64)>,
    /// Per-clause verdicts: diameter, doubling, detection, modulus.
    pub clause_pass: [bool; 4],
    /// Pair with vanishing detection functional, when one exists.
    pub witness_fail: Option<(usize, usize)>,
    pub pairs_sampled: usize,
}

impl CinematicReport {
    pub fn pass(&self) -> bool {
        self.clause_pass.iter().all(|&b| b)
    }
}

/// Estimate the cinematic constant of a family by sampling pairs.
///
/// `K` is the max of the sampled diameter and of the worst ratio
/// `‖f-g‖_{C²} / inf(|h| + |∇h| + min_ξ |∇_ξ∇_ξ h|)`; the doubling constant
/// comes from ball-count ratios in the sampled distance matrix, and the
/// modulus-of-continuity samples bound how far points can move while the
/// directional second derivative changes by at most `η`.
pub fn estimate_cinematic_constant(
    family: &FunctionFamily,
    pair_budget: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<CinematicReport> {
    let n = family.len();
    if n < 1 {
        return Err(Error::InvalidFamily("empty family".into()));
    }
    let all_pairs = family.pairs();
    let pairs: Vec<(usize, usize)> = if all_pairs.len() <= pair_budget {
        all_pairs.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < pair_budget {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                chosen.insert((i.min(j), i.max(j)));
            }
        }
        chosen.into_iter().collect()
    };

    struct PairStat {
        dist: f64,
        inf3: f64,
        dir2_lip: f64,
    }

    let stats: Vec<PairStat> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<PairStat> {
            let f = &family.fields[i];
            let g = &family.fields[j];
            let dist = c2_distance_opts(f, g, opts, None)?;
            let inf3 = cinematic_infimum_opts(f, g, opts, None)?.value;
            let lip = dir2_grid_lipschitz(&Diff::new(f, g)?, family.domain(), opts.nodes.min(33));
            Ok(PairStat { dist, inf3, dir2_lip: lip })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut k_const: f64 = 1.0;
    let mut diameter: f64 = 0.0;
    let mut witness_fail = None;
    let mut worst_lip: f64 = 0.0;
    for (&(i, j), s) in pairs.iter().zip(&stats) {
        diameter = diameter.max(s.dist);
        worst_lip = worst_lip.max(s.dir2_lip);
        if s.inf3 <= 1e-12 * s.dist.max(1.0) {
            witness_fail = witness_fail.or(Some((i, j)));
        } else {
            k_const = k_const.max(s.dist / s.inf3);
        }
    }
    k_const = k_const.max(diameter).max(1.0);

    // doubling constant from ball-count ratios at dyadic radii (full
    // distance matrix only)
    let mut doubling: f64 = 1.0;
    if n >= 2 && all_pairs.len() == pairs.len() {
        let mut dm = vec![vec![0.0; n]; n];
        for (&(i, j), s) in pairs.iter().zip(&stats) {
            dm[i][j] = s.dist;
            dm[j][i] = s.dist;
        }
        let max_d = diameter.max(1e-300);
        for row in &dm {
            let mut r = max_d;
            for _ in 0..12 {
                let big = row.iter().filter(|&&d| d <= 2.0 * r).count();
                let small = row.iter().filter(|&&d| d <= r).count().max(1);
                doubling = doubling.max(big as f64 / small as f64);
                r *= 0.5;
            }
        }
    }

    // modulus samples: alpha(eta) from the measured Lipschitz constant of
    // the directional second derivative, capped by the K^{-1} eta bound
    let lip = worst_lip.max(1e-12);
    let alpha: Vec<(f64, f64)> = (1..=8)
        .map(|i| {
            let eta = (i as f64).exp2().recip();
            (eta, (eta / lip).min(eta / k_const))
        })
        .collect();

    let clause_pass = [
        diameter.is_finite(),
        doubling.is_finite(),
        witness_fail.is_none(),
        alpha.iter().all(|&(_, a)| a > 0.0),
    ];
    Ok(CinematicReport {
        k_const,
        diameter,
        doubling,
        alpha,
        clause_pass,
        witness_fail,
        pairs_sampled: pairs.len(),
    })
}

/// Largest grid difference quotient of `x -> ∇_ξ∇_ξ h(x)` over axis-adjacent
/// nodes and net directions.
fn dir2_grid_lipschitz(h: &Diff<'_>, domain: &BoxDomain, nodes: usize) -> f64 {
    let k = domain.dim();
    let net = sphere_net(k);
    let grid = Grid::new(domain.clone(), nodes);
    (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let x = grid.point(flat);
            let hx = h.hessian(&x[..k]);
            let mut worst: f64 = 0.0;
            for axis in 0..k {
                let step = grid.step(axis);
                let mut xp = x;
                xp[axis] += step;
                if xp[axis] > domain.hi[axis] + 1e-12 {
                    continue;
                }
                let hp = h.hessian(&xp[..k]);
                for xi in &net {
                    worst = worst.max((hp.quad(xi) - hx.quad(xi)).abs() / step);
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

// ---------------------------------------------------------------------------
// pair classification
// ---------------------------------------------------------------------------

/// Trichotomy case of a field pair on a subcube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCase {
    /// `|h|` clears the threshold on the doubled subcube.
    ValueSeparated,
    /// `|∇h|` clears the threshold.
    Transversal,
    /// `|∇_ξ∇_ξ h|` clears the threshold for every direction.
    Tangent,
    Mixed,
}

/// Cases satisfied by one subcube: `[value, gradient, second-derivative]`.
pub type CaseFlags = [bool; 3];

/// Classification of a pair over the dyadic decomposition of the domain.
#[derive(Debug, Clone)]
pub struct TangencyClassification {
    /// Tangency parameter `inf (|h| + |∇h|)` over the standard domain.
    pub delta: f64,
    /// C² distance over the standard domain.
    pub t: f64,
    /// Reference norm over the enlarged domain (threshold source).
    pub t_enlarged: f64,
    pub label: PairCase,
    /// Per-subcube primary label plus the full set of satisfied cases.
    pub subcubes: Vec<(BoxDomain, PairCase, CaseFlags)>,
    /// Sign of the directional second derivative on tangent subcubes.
    pub convexity: Option<i8>,
    pub window: f64,
    pub threshold: f64,
}

impl TangencyClassification {
    /// Whether the given case clears its threshold on every subcube.
    pub fn holds_everywhere(&self, case: PairCase) -> bool {
        let idx = match case {
            PairCase::ValueSeparated => 0,
            PairCase::Transversal => 1,
            PairCase::Tangent => 2,
            PairCase::Mixed => return false,
        };
        self.subcubes.iter().all(|(_, _, flags)| flags[idx])
    }
}

/// Parameters of the classification; `window` is the subcube diameter scale
/// (estimated from the pair's own modulus when absent).
#[derive(Debug, Clone, Copy)]
pub struct ClassifyParams {
    pub k_const: f64,
    pub window: Option<f64>,
    /// Nodes per axis of the per-subcube test grid.
    pub nodes: usize,
    /// Dyadic refinement cap (subcube count grows like `2^{level k}`).
    pub max_level: u32,
}

impl ClassifyParams {
    pub fn new(k_const: f64) -> Self {
        Self { k_const, window: None, nodes: 3, max_level: 9 }
    }
}

/// Split the domain into dyadic subcubes with diameter inside
/// `(window/4, window/2)` and test the trichotomy at threshold
/// `‖h‖_{C²(enlarged)} / (3K)` on each doubled subcube.
pub fn classify_pair(
    f: &ScalarField,
    g: &ScalarField,
    delta: f64,
    params: &ClassifyParams,
) -> Result<TangencyClassification> {
    let h = Diff::new(f, g)?;
    let k = f.dim();
    let domain = f.domain().clone();
    let kc = params.k_const;

    let window = match params.window {
        Some(w) => w,
        None => {
            let eta = 1.0 / (6.0 * kc);
            let lip = dir2_grid_lipschitz(&h, &domain, 33).max(1e-12);
            (eta / lip).min(eta / kc)
        }
    };
    if window <= 0.0 {
        return Err(Error::InvalidParameter("classification window must be positive".into()));
    }

    // level with diam(subcube) < window / 2
    let sqrtk = (k as f64).sqrt();
    let mut level: u32 = 0;
    while (level as f64).exp2().recip() * sqrtk >= window / 2.0 && level < params.max_level {
        level += 1;
    }

    if !f.extends_beyond_domain() || !g.extends_beyond_domain() {
        return Err(Error::Unsupported(
            "classification needs fields evaluable on the enlarged domain".into(),
        ));
    }
    let enlarged = domain.enlarged(window / 2.0);
    let t_enl = c2_norms(&h, &enlarged, &EvalOptions::default()).total();
    let t_std = c2_norms(&h, &domain, &EvalOptions::default()).total();
    if t_std < delta {
        return Err(Error::OutOfRegime(format!(
            "pair distance {t_std} below the scale {delta}"
        )));
    }
    let threshold = t_enl / (3.0 * kc);

    let net = sphere_net(k);
    let subcubes = domain.dyadic_children(level);
    let nodes = params.nodes.max(2);
    let labels: Vec<Result<(PairCase, CaseFlags, i8)>> = subcubes
        .par_iter()
        .map(|u| {
            let double = u.scaled(2.0);
            let grid = Grid::new(double.clone(), nodes);
            let mut min_v = f64::INFINITY;
            let mut min_g = f64::INFINITY;
            let mut min_d = f64::INFINITY;
            let mut sign = 0i8;
            for x in grid.points() {
                min_v = min_v.min(h.value(&x[..k]).abs());
                min_g = min_g.min(h.gradient_norm(&x[..k]));
                let hess = h.hessian(&x[..k]);
                for xi in &net {
                    let q = hess.quad(xi);
                    min_d = min_d.min(q.abs());
                    if sign == 0 {
                        sign = if q >= 0.0 { 1 } else { -1 };
                    }
                }
            }
            let flags = [min_v >= threshold, min_g >= threshold, min_d >= threshold];
            let case = if flags[0] {
                PairCase::ValueSeparated
            } else if flags[1] {
                PairCase::Transversal
            } else if flags[2] {
                PairCase::Tangent
            } else {
                return Err(Error::CinematicViolation {
                    center: u.center()[..k].to_vec(),
                });
            };
            Ok((case, flags, sign))
        })
        .collect();

    let mut per_subcube = Vec::with_capacity(subcubes.len());
    let mut convexity = None;
    let mut label: Option<PairCase> = None;
    for (u, r) in subcubes.into_iter().zip(labels) {
        let (case, flags, sign) = r?;
        if case == PairCase::Tangent && convexity.is_none() {
            convexity = Some(sign);
        }
        label = Some(match label {
            None => case,
            Some(prev) if prev == case => case,
            Some(_) => PairCase::Mixed,
        });
        per_subcube.push((u, case, flags));
    }

    let delta_val = tangency_parameter(f, g, None)?.value;
    Ok(TangencyClassification {
        delta: delta_val,
        t: t_std,
        t_enlarged: t_enl,
        label: label.unwrap_or(PairCase::Mixed),
        subcubes: per_subcube,
        convexity,
        window,
        threshold,
    })
}

/// Locate the critical point of `h` inside `domain` by grid argmin of
/// `|∇h|` plus descent refinement; `None` when the refined gradient stays
/// above `tol`.
pub fn locate_critical(h: &dyn C2Eval, domain: &BoxDomain, tol: f64) -> Option<InfValue> {
    let k = domain.dim();
    let obj = |x: &Pt| h.gradient_norm(&x[..k]);
    let inf = grid_infimum(&obj, domain, &EvalOptions::default(), 0.0);
    (inf.value <= tol).then_some(inf)
}

// ---------------------------------------------------------------------------
// serialisation
// ---------------------------------------------------------------------------

/// Serialisable field description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    Polynomial { terms: Vec<(Vec<u8>, f64)> },
}

/// Serialisable family description: either induced from a chart over a list
/// of points, or an explicit list of closed-form fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Induced { chart: ChartSpec, z: Vec<Vec<f64>> },
    Explicit { dim: usize, fields: Vec<FieldSpec> },
}

impl FunctionFamily {
    pub fn from_spec(spec: &FamilySpec) -> Result<FunctionFamily> {
        match spec {
            FamilySpec::Induced { chart, z } => {
                let chart = Arc::new(make_builtin_chart(chart)?);
                induced_projection_family(chart, z)
            }
            FamilySpec::Explicit { dim, fields } => {
                let domain = BoxDomain::unit(*dim);
                let fields = fields
                    .iter()
                    .map(|fs| match fs {
                        FieldSpec::Constant { value } => {
                            ScalarField::constant(domain.clone(), *value)
                        }
                        FieldSpec::Polynomial { terms } => {
                            ScalarField::poly(domain.clone(), Poly::new(*dim, terms.clone()))
                        }
                    })
                    .collect();
                FunctionFamily::from_fields(fields)
            }
        }
    }

    pub fn to_spec(&self) -> Option<FamilySpec> {
        match (&self.chart, &self.z) {
            (Some(chart), Some(z)) => chart.spec().map(|cs| FamilySpec::Induced {
                chart: cs.clone(),
                z: z.clone(),
            }),
            _ => {
                let mut fields = Vec::new();
                for f in &self.fields {
                    match &f.kind {
                        FieldKind::Constant(c) => fields.push(FieldSpec::Constant { value: *c }),
                        FieldKind::Poly(p) => {
                            fields.push(FieldSpec::Polynomial { terms: p.terms.clone() })
                        }
                        _ => return None,
                    }
                }
                Some(FamilySpec::Explicit { dim: self.dim(), fields })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit2() -> BoxDomain {
        BoxDomain::unit(2)
    }

    #[test]
    fn constant_difference_distance() {
        let f = ScalarField::constant(unit2(), 0.0);
        let g = ScalarField::constant(unit2(), 0.3);
        assert_relative_eq!(c2_distance(&f, &g).unwrap(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_against_zero_distance() {
        // sup|x1^2| + sup|2x1| + sup_xi |2 xi1^2| = 1 + 2 + 2
        let f = ScalarField::poly(unit2(), Poly::new(2, vec![(vec![2, 0], 1.0)]));
        let g = ScalarField::constant(unit2(), 0.0);
        assert_relative_eq!(c2_distance(&f, &g).unwrap(), 5.0, epsilon = 1e-9);
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let f = ScalarField::constant(unit2(), 0.0);
        let g = ScalarField::constant(BoxDomain::new(vec![0.0, 0.0], vec![2.0, 1.0]), 0.0);
        assert!(matches!(c2_distance(&f, &g), Err(Error::DomainMismatch)));
    }

    #[test]
    fn induced_distance_bounded_by_chart_norm() {
        let chart = Arc::new(make_builtin_chart(&ChartSpec::SphereSlice { c: 0.5, n: 3 }).unwrap());
        let bound = chart_c2_bound(&chart, 17);
        let z: Vec<Vec<f64>> = vec![
            vec![0.3, 0.1, -0.2, 0.4],
            vec![0.25, 0.18, -0.26, 0.35],
            vec![-0.1, 0.4, 0.2, -0.3],
        ];
        let fam = induced_projection_family(chart, &z).unwrap();
        let (_, scale) = fam.renorm.unwrap();
        for (i, j) in fam.pairs() {
            let d = c2_distance(&fam.fields[i], &fam.fields[j]).unwrap();
            let zd: f64 = z[i]
                .iter()
                .zip(&z[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d <= bound * zd * scale * (1.0 + 1e-9), "{d} vs {}", bound * zd * scale);
        }
    }

    #[test]
    fn induced_family_validates_points() {
        let chart = Arc::new(make_builtin_chart(&ChartSpec::SphereSlice { c: 0.5, n: 3 }).unwrap());
        let too_far = vec![vec![1.2, 0.0, 0.0, 0.0]];
        assert!(matches!(
            induced_projection_family(chart, &too_far),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn zero_point_renormalises_to_one_half() {
        let chart = Arc::new(make_builtin_chart(&ChartSpec::SphereSlice { c: 0.5, n: 3 }).unwrap());
        let fam = induced_projection_family(chart, &[vec![0.0; 4]]).unwrap();
        let v = fam.fields[0].value(&[0.3, 0.7]);
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn last_axis_point_gives_constant_field() {
        // the last coordinate of the slice is constant, so projecting on the
        // last axis yields the constant (c + L) / (2L)
        let c = 0.6;
        let chart = Arc::new(make_builtin_chart(&ChartSpec::SphereSlice { c, n: 3 }).unwrap());
        let fam = induced_projection_family(chart, &[vec![0.0, 0.0, 0.0, 1.0]]).unwrap();
        let (l, scale) = fam.renorm.unwrap();
        let expect = (c + l) * scale;
        for x in Grid::new(unit2(), 7).points() {
            assert_relative_eq!(fam.fields[0].value(&x[..2]), expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn tangency_parameter_examples() {
        // constant difference: delta = |c|
        let f = ScalarField::constant(unit2(), 0.4);
        let g = ScalarField::constant(unit2(), 0.0);
        let t = tangency_parameter(&f, &g, None).unwrap();
        assert_relative_eq!(t.value, 0.4, epsilon = 1e-12);

        // h = -a x1: infimum |a| x1 + |a| attained at x1 = 0
        let a = 0.7;
        let f = ScalarField::poly(unit2(), Poly::affine(2, &[-a, 0.0], 0.0));
        let g = ScalarField::constant(unit2(), 0.0);
        let t = tangency_parameter(&f, &g, None).unwrap();
        assert_relative_eq!(t.value, a, epsilon = 1e-9);
    }

    #[test]
    fn near_tangent_caps_have_small_tangency_parameter() {
        // two paraboloid caps nearly tangent from inside: delta much smaller
        // than the C² distance; dense-grid oracle pins the refined value
        let p1 = Poly::new(2, vec![(vec![2, 0], 1.0), (vec![0, 2], 1.0)]);
        let mut t2 = vec![(vec![2, 0], 1.2), (vec![0, 2], 1.2)];
        t2.push((vec![0, 0], 0.002));
        let p2 = Poly::new(2, t2);
        let f = ScalarField::poly(unit2(), p1);
        let g = ScalarField::poly(unit2(), p2);
        let d = tangency_parameter(&f, &g, None).unwrap();
        let t = c2_distance(&f, &g).unwrap();
        assert!(d.value < 0.1 * t, "delta {} vs t {}", d.value, t);
        // dense 513^2 oracle
        let oracle = tangency_parameter_opts(&f, &g, None, &EvalOptions::with_nodes(513))
            .unwrap()
            .value;
        assert!((d.value - oracle).abs() <= d.uncertainty.max(1e-6));
    }

    #[test]
    fn saddle_fails_cinematic_gate() {
        // h = x1 x2 has min_xi |dir2| = 0 along the axes and value+gradient
        // vanishing at the origin
        let f = ScalarField::poly(unit2(), Poly::new(2, vec![(vec![1, 1], 1.0)]));
        let g = ScalarField::constant(unit2(), 0.0);
        let v = cinematic_infimum(&f, &g).unwrap();
        assert!(v.value < 1e-6, "saddle infimum {}", v.value);

        // eigenvalue cross-check of the net minimum: indefinite form -> 0
        let h = Diff::new(&f, &g).unwrap();
        let hess = h.hessian(&[0.5, 0.5]);
        let ev = hess.eigenvalues();
        let oracle = if ev[0] * ev[ev.len() - 1] < 0.0 {
            0.0
        } else {
            ev.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min)
        };
        let netv = min_abs_quad(&hess, &sphere_net(2));
        assert!((netv - oracle).abs() < 2e-3);
    }

    #[test]
    fn constant_infimum_is_value() {
        let f = ScalarField::constant(unit2(), 0.25);
        let g = ScalarField::constant(unit2(), 0.0);
        assert_relative_eq!(cinematic_infimum(&f, &g).unwrap().value, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn ordering_of_functionals() {
        // delta <= cinematic infimum <= C² distance on assorted pairs
        let pairs = vec![
            (
                ScalarField::poly(
                    unit2(),
                    Poly::new(2, vec![(vec![2, 0], 1.0), (vec![0, 1], 0.5)]),
                ),
                ScalarField::constant(unit2(), 0.1),
            ),
            (
                ScalarField::poly(unit2(), Poly::affine(2, &[0.3, -0.2], 0.05)),
                ScalarField::constant(unit2(), 0.0),
            ),
        ];
        for (f, g) in pairs {
            let d = tangency_parameter(&f, &g, None).unwrap().value;
            let i3 = cinematic_infimum(&f, &g).unwrap().value;
            let t = c2_distance(&f, &g).unwrap();
            assert!(d <= i3 + 1e-9);
            assert!(i3 <= t + 1e-9);
        }
    }

    #[test]
    fn metric_symmetry_and_triangle() {
        let fields = [
            ScalarField::poly(unit2(), Poly::new(2, vec![(vec![2, 0], 0.7)])),
            ScalarField::poly(unit2(), Poly::affine(2, &[0.2, 0.4], 0.1)),
            ScalarField::constant(unit2(), 0.3),
        ];
        let d01 = c2_distance(&fields[0], &fields[1]).unwrap();
        let d10 = c2_distance(&fields[1], &fields[0]).unwrap();
        assert_relative_eq!(d01, d10, epsilon = 1e-12);
        let d02 = c2_distance(&fields[0], &fields[2]).unwrap();
        let d12 = c2_distance(&fields[1], &fields[2]).unwrap();
        assert!(d02 <= d01 + d12 + 1e-8);
    }

    #[test]
    fn affine_family_is_cinematic() {
        let fields: Vec<ScalarField> = (0..5)
            .map(|i| ScalarField::poly(unit2(), Poly::affine(2, &[0.4, 0.0], 0.1 * i as f64)))
            .collect();
        let fam = FunctionFamily::from_fields(fields).unwrap();
        let report = estimate_cinematic_constant(&fam, 100, 0, &EvalOptions::default()).unwrap();
        assert!(report.pass(), "affine family should pass: {report:?}");
        assert!(report.k_const >= 1.0);
    }

    #[test]
    fn single_member_family_trivially_passes() {
        let fam = FunctionFamily::from_fields(vec![ScalarField::constant(unit2(), 0.2)]).unwrap();
        let report = estimate_cinematic_constant(&fam, 10, 0, &EvalOptions::default()).unwrap();
        assert!(report.pass());
        assert_relative_eq!(report.k_const, 1.0);
    }

    #[test]
    fn saddle_pair_reports_witness() {
        let fields = vec![
            ScalarField::poly(unit2(), Poly::new(2, vec![(vec![1, 1], 1.0)])),
            ScalarField::constant(unit2(), 0.0),
        ];
        let fam = FunctionFamily::from_fields(fields).unwrap();
        let report = estimate_cinematic_constant(&fam, 10, 0, &EvalOptions::default()).unwrap();
        assert!(!report.pass());
        assert_eq!(report.witness_fail, Some((0, 1)));
    }

    #[test]
    fn classify_constant_pair_value_separated() {
        let f = ScalarField::constant(unit2(), 0.5);
        let g = ScalarField::constant(unit2(), 0.0);
        let mut params = ClassifyParams::new(1.0);
        params.window = Some(0.5);
        let c = classify_pair(&f, &g, 1e-3, &params).unwrap();
        assert_eq!(c.label, PairCase::ValueSeparated);
        assert!(c.holds_everywhere(PairCase::ValueSeparated));
    }

    #[test]
    fn classify_linear_pair_transversal() {
        let f = ScalarField::poly(unit2(), Poly::affine(2, &[0.8, 0.0], 0.0));
        let g = ScalarField::constant(unit2(), 0.0);
        let mut params = ClassifyParams::new(1.0);
        params.window = Some(0.5);
        let c = classify_pair(&f, &g, 1e-3, &params).unwrap();
        // the gradient case holds on every subcube (|∇h| is constant);
        // subcubes far from the zero set also clear the value case
        assert!(c.holds_everywhere(PairCase::Transversal));
        assert!(matches!(c.label, PairCase::Transversal | PairCase::Mixed));
    }

    #[test]
    fn classify_paraboloid_tangent_with_unique_critical_point() {
        // h = |x - x0|^2 - rho^2 near its critical point
        let p = Poly::new(
            2,
            vec![
                (vec![2, 0], 1.0),
                (vec![0, 2], 1.0),
                (vec![1, 0], -1.0),
                (vec![0, 1], -1.0),
                (vec![0, 0], 0.5 - 0.01),
            ],
        );
        let f = ScalarField::poly(unit2(), p);
        let g = ScalarField::constant(unit2(), 0.0);
        let mut params = ClassifyParams::new(3.0);
        params.window = Some(1.2);
        let c = classify_pair(&f, &g, 1e-3, &params).unwrap();
        assert_eq!(c.label, PairCase::Tangent);
        assert_eq!(c.convexity, Some(1));
        // unique interior critical point at (0.5, 0.5)
        let h = Diff::new(&f, &g).unwrap();
        let crit = locate_critical(&h, &unit2(), 1e-6).unwrap();
        assert_relative_eq!(crit.argmin[0], 0.5, epsilon = 1e-4);
        assert_relative_eq!(crit.argmin[1], 0.5, epsilon = 1e-4);
    }

    #[test]
    fn grid_field_interpolates_nodes_exactly() {
        let vals: Vec<f64> = (0..9).map(|i| (i as f64) * 0.1).collect();
        let f = ScalarField::from_grid(unit2(), 3, vals.clone()).unwrap();
        for iy in 0..3 {
            for ix in 0..3 {
                let x = [ix as f64 * 0.5, iy as f64 * 0.5];
                let flat = ix + 3 * iy;
                assert_relative_eq!(f.value(&x), vals[flat], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn family_spec_round_trip() {
        let spec = FamilySpec::Explicit {
            dim: 2,
            fields: vec![
                FieldSpec::Constant { value: 0.25 },
                FieldSpec::Polynomial { terms: vec![(vec![1, 0], 1.0)] },
            ],
        };
        let fam = FunctionFamily::from_spec(&spec).unwrap();
        assert_eq!(fam.len(), 2);
        let back = fam.to_spec().unwrap();
        assert_eq!(back, spec);
        let js = serde_json::to_string(&spec).unwrap();
        let parsed: FamilySpec = serde_json::from_str(&js).unwrap();
        assert_eq!(parsed, spec);
    }
}
