//! Direction manifolds: parametrised C² embeddings `Σ : [0,1]^k -> R^{n+1}`,
//! tangent frames, principal/sectional curvature and the non-degeneracy
//! sweep used as a gate by the projection experiments.
//!
//! Built-in charts come with closed-form derivative evaluators:
//!
//! * `sphere_slice(c, n)` — the slice `S^n ∩ {x_{n+1} = c}`, an
//!   `(n-1)`-sphere of radius `sqrt(1 - c^2)`;
//! * `unit_sphere(n)` — a patch of `S^n` itself (codimension zero inside the
//!   sphere, so the normal degenerates to the radial direction);
//! * `quadratic_graph(L, A, n)` — the graph of `y -> (Ly)^T A (Ly)` inside
//!   the hyperplane `{x_1 = 1}`.
//!
//! Angles are affine in the chart parameters, so every builtin extends to an
//! enlarged parameter box without modification.

use crate::numerics::{
    dot, morton_encode, norm, pt, refine_extremum, Amb, BoxDomain, Grid, Pt, SymMat,
    MAX_AMBIENT_DIM, MAX_PARAM_DIM,
};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Angle span of the builtin sphere parametrisations: `θ_i = 1.1 (x_i - 1/2)`.
/// Keeps the patch well inside the coordinate singularities even on an
/// enlarged parameter box.
const ANGLE_SCALE: f64 = 1.1;

/// Finite-difference step for frame-field differentiation.
pub const FD_STEP: f64 = 1e-4;

/// Serializable chart description (the JSON surface of the CLI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartSpec {
    SphereSlice { c: f64, n: usize },
    UnitSphere { n: usize },
    QuadraticGraph { l: Vec<Vec<f64>>, a: Vec<Vec<f64>>, n: usize },
}

#[derive(Clone)]
enum ChartKind {
    /// Components are products of sin/cos factors of the angles, times `r`,
    /// plus an optional constant trailing component.
    RoundSphere { radius: f64, last_const: Option<f64> },
    /// `Σ(x) = (1, y, y^T M y / 2)` with `y = x - 1/2` and `M = 2 L^T A L`.
    QuadraticGraph { m: Vec<Vec<f64>> },
    /// User-supplied embedding; derivatives fall back to central differences.
    Custom {
        point: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    },
}

impl std::fmt::Debug for ChartKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChartKind::RoundSphere { radius, last_const } => f
                .debug_struct("RoundSphere")
                .field("radius", radius)
                .field("last_const", last_const)
                .finish(),
            ChartKind::QuadraticGraph { .. } => f.debug_struct("QuadraticGraph").finish(),
            ChartKind::Custom { .. } => f.debug_struct("Custom").finish(),
        }
    }
}

/// A parametrised C² chart of a direction manifold.
#[derive(Debug, Clone)]
pub struct ManifoldChart {
    param_dim: usize,
    ambient_dim: usize,
    kind: ChartKind,
    spec: Option<ChartSpec>,
    /// Coordinate axis seeding the normal construction; fixed per chart so
    /// the normal field is sign-consistent across the parameter box.
    normal_seed: usize,
    /// Sign fixing `<ν, ∇_{e1} e1> >= 0` at the chart center.
    orientation: f64,
}

/// Orthonormal frame at a chart point.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub x: Pt,
    /// `Σ(x)`.
    pub base: Amb,
    /// Radial unit vector `Σ(x)/|Σ(x)|`.
    pub e0: Amb,
    /// Orthonormal tangent basis, one entry per parameter direction.
    pub tangent: Vec<Amb>,
    /// Parameter-space vectors pushing forward to the tangent basis.
    pub pullback: Vec<Pt>,
    /// Unit normal (radial direction when `codim0`).
    pub nu: Amb,
    /// Chart has codimension zero inside its sphere: no independent normal.
    pub codim0: bool,
}

impl TangentFrame {
    /// Largest deviation from the relations the frame claims: tangent basis
    /// orthonormal, `ν` a unit vector orthogonal to both the base point and
    /// the tangent space, and `{x, T_xΣ, ν}` spanning the ambient space.
    pub fn orthogonality_residual(&self, ambient: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.tangent.iter().enumerate() {
            for (j, b) in self.tangent.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&a[..ambient], &b[..ambient]) - want).abs());
            }
        }
        worst = worst.max((dot(&self.e0[..ambient], &self.e0[..ambient]) - 1.0).abs());
        worst = worst.max((dot(&self.nu[..ambient], &self.nu[..ambient]) - 1.0).abs());
        if !self.codim0 {
            worst = worst.max(dot(&self.nu[..ambient], &self.e0[..ambient]).abs());
            for t in &self.tangent {
                worst = worst.max(dot(&self.nu[..ambient], &t[..ambient]).abs());
            }
            // span{x, T, ν} = ambient space: Gram determinant bounded away
            // from zero (equals 1 when e0 ⊥ T, as on sphere charts)
            let mut vecs: Vec<&Amb> = vec![&self.e0];
            vecs.extend(self.tangent.iter());
            vecs.push(&self.nu);
            let m = nalgebra::DMatrix::from_fn(vecs.len(), vecs.len(), |i, j| {
                dot(&vecs[i][..ambient], &vecs[j][..ambient])
            });
            if m.determinant().abs() < 1e-12 {
                worst = worst.max(1.0);
            }
        }
        worst
    }
}

/// One curvature sample of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub x: Vec<f64>,
    pub kappas: Vec<f64>,
    /// Min/max of the pairwise sectional curvatures `κ_i κ_j + 1`
    /// (only meaningful for charts on the unit sphere).
    pub sectional_min: Option<f64>,
    pub sectional_max: Option<f64>,
}

/// Result of a curvature sweep over a sample lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub samples: Vec<CurvatureSample>,
    /// Every sampled principal curvature is nonzero and they share one sign.
    pub all_same_sign: bool,
    pub min_abs: f64,
    pub max_abs: f64,
    /// Global two-sided curvature bound `κ >= 1` with
    /// `κ^{-1} <= |κ_i| <= κ` at every sample.
    pub kappa_bound: f64,
    pub on_unit_sphere: bool,
    pub min_sectional: Option<f64>,
    /// Whether the minimum sectional curvature clears the `> 1` gate.
    pub sectional_gate: Option<bool>,
}

impl CurvatureReport {
    pub fn passes(&self) -> bool {
        self.all_same_sign
    }

    /// CSV rows `(x_1..x_k, kappa_1..kappa_k, K_min, K_max)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.samples.first() {
            let k = first.x.len();
            for i in 0..k {
                out.push_str(&format!("x{},", i + 1));
            }
            for i in 0..first.kappas.len() {
                out.push_str(&format!("kappa{},", i + 1));
            }
            out.push_str("K_min,K_max\n");
        }
        for s in &self.samples {
            for v in &s.x {
                out.push_str(&format!("{v},"));
            }
            for v in &s.kappas {
                out.push_str(&format!("{v},"));
            }
            let (a, b) = (
                s.sectional_min.map_or(String::from("nan"), |v| v.to_string()),
                s.sectional_max.map_or(String::from("nan"), |v| v.to_string()),
            );
            out.push_str(&format!("{a},{b}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

/// Build one of the builtin charts.
pub fn make_builtin_chart(spec: &ChartSpec) -> Result<ManifoldChart> {
    match spec {
        ChartSpec::SphereSlice { c, n } => {
            if !(*n == 3 || *n == 4) {
                return Err(Error::InvalidParameter(format!(
                    "sphere_slice supports n in {{3,4}}, got {n}"
                )));
            }
            if !(c.abs() < 1.0) || *c == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "sphere_slice needs c in (-1,0) u (0,1), got {c}"
                )));
            }
            let radius = (1.0 - c * c).sqrt();
            Ok(finish_chart(ManifoldChart {
                param_dim: n - 1,
                ambient_dim: n + 1,
                kind: ChartKind::RoundSphere {
                    radius,
                    last_const: Some(*c),
                },
                spec: Some(spec.clone()),
                normal_seed: 0,
                orientation: 1.0,
            }))
        }
        ChartSpec::UnitSphere { n } => {
            if !(*n == 2 || *n == 3) {
                return Err(Error::InvalidParameter(format!(
                    "unit_sphere supports n in {{2,3}}, got {n}"
                )));
            }
            Ok(finish_chart(ManifoldChart {
                param_dim: *n,
                ambient_dim: n + 1,
                kind: ChartKind::RoundSphere {
                    radius: 1.0,
                    last_const: None,
                },
                spec: Some(spec.clone()),
                normal_seed: 0,
                orientation: 1.0,
            }))
        }
        ChartSpec::QuadraticGraph { l, a, n } => {
            if !(*n == 3 || *n == 4) {
                return Err(Error::InvalidParameter(format!(
                    "quadratic_graph supports n in {{3,4}}, got {n}"
                )));
            }
            let k = n - 1;
            let lm = to_matrix(l, k)?;
            let am = to_matrix(a, k)?;
            if nalgebra::Cholesky::new(am.clone()).is_none() {
                return Err(Error::InvalidParameter(
                    "quadratic_graph needs a positive definite A".into(),
                ));
            }
            if lm.clone().lu().determinant().abs() < 1e-12 {
                return Err(Error::InvalidParameter(
                    "quadratic_graph needs an invertible L".into(),
                ));
            }
            let m = lm.transpose() * &am * &lm * 2.0;
            let m_rows = (0..k)
                .map(|i| (0..k).map(|j| m[(i, j)]).collect())
                .collect();
            Ok(finish_chart(ManifoldChart {
                param_dim: k,
                ambient_dim: n + 1,
                kind: ChartKind::QuadraticGraph { m: m_rows },
                spec: Some(spec.clone()),
                normal_seed: 0,
                orientation: 1.0,
            }))
        }
    }
}

fn to_matrix(rows: &[Vec<f64>], k: usize) -> Result<nalgebra::DMatrix<f64>> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidParameter(format!("expected a {k}x{k} matrix")));
    }
    Ok(nalgebra::DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

/// Fix the normal seed axis and the orientation sign at the chart center.
fn finish_chart(mut chart: ManifoldChart) -> ManifoldChart {
    chart.normal_seed = chart.pick_normal_seed();
    chart.orientation = chart.compute_orientation();
    chart
}

impl ManifoldChart {
    /// Chart from a user-supplied embedding; derivatives by central
    /// differences at step `1e-4`.
    pub fn custom(
        param_dim: usize,
        ambient_dim: usize,
        point: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    ) -> Self {
        assert!(param_dim <= MAX_PARAM_DIM && ambient_dim <= MAX_AMBIENT_DIM);
        finish_chart(ManifoldChart {
            param_dim,
            ambient_dim,
            kind: ChartKind::Custom { point },
            spec: None,
            normal_seed: 0,
            orientation: 1.0,
        })
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn spec(&self) -> Option<&ChartSpec> {
        self.spec.as_ref()
    }

    /// Codimension-zero charts carry no independent normal field.
    pub fn codim0(&self) -> bool {
        self.ambient_dim == self.param_dim + 1
    }

    // -- evaluation ---------------------------------------------------------

    /// `Σ(x)`.
    pub fn point(&self, x: &[f64]) -> Amb {
        match &self.kind {
            ChartKind::RoundSphere { radius, last_const } => {
                let mut out = [0.0; MAX_AMBIENT_DIM];
                let k = self.param_dim;
                let mut sin = [0.0; MAX_PARAM_DIM];
                let mut cos = [0.0; MAX_PARAM_DIM];
                for i in 0..k {
                    let th = ANGLE_SCALE * (x[i] - 0.5);
                    sin[i] = th.sin();
                    cos[i] = th.cos();
                }
                // suf[i] = prod of cos over angles i..k
                let mut suf = [1.0; MAX_PARAM_DIM + 1];
                for i in (0..k).rev() {
                    suf[i] = cos[i] * suf[i + 1];
                }
                out[0] = radius * cos[0] * suf[1];
                out[1] = radius * sin[0] * suf[1];
                for comp in 2..=k {
                    out[comp] = radius * sin[comp - 1] * suf[comp];
                }
                if let Some(c) = last_const {
                    out[k + 1] = *c;
                }
                out
            }
            ChartKind::QuadraticGraph { m } => {
                let k = self.param_dim;
                let mut out = [0.0; MAX_AMBIENT_DIM];
                out[0] = 1.0;
                let mut q = 0.0;
                for i in 0..k {
                    let yi = x[i] - 0.5;
                    out[1 + i] = yi;
                    for j in 0..k {
                        q += 0.5 * m[i][j] * yi * (x[j] - 0.5);
                    }
                }
                out[k + 1] = q;
                out
            }
            ChartKind::Custom { point } => {
                let v = point(&x[..self.param_dim]);
                let mut out = [0.0; MAX_AMBIENT_DIM];
                out[..v.len()].copy_from_slice(&v);
                out
            }
        }
    }

    /// `<Σ(x), z>` without intermediate allocation.
    pub fn project(&self, x: &[f64], z: &[f64]) -> f64 {
        let p = self.point(x);
        dot(&p[..self.ambient_dim], &z[..self.ambient_dim])
    }

    /// Rows `∂Σ/∂x_i`, `i = 0..param_dim`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<Amb> {
        match &self.kind {
            ChartKind::RoundSphere { .. } => (0..self.param_dim)
                .map(|i| self.sphere_derivative(x, &[i]))
                .collect(),
            ChartKind::QuadraticGraph { m } => {
                let k = self.param_dim;
                (0..k)
                    .map(|i| {
                        let mut row = [0.0; MAX_AMBIENT_DIM];
                        row[1 + i] = 1.0;
                        let mut g = 0.0;
                        for j in 0..k {
                            g += m[i][j] * (x[j] - 0.5);
                        }
                        row[k + 1] = g;
                        row
                    })
                    .collect()
            }
            ChartKind::Custom { .. } => (0..self.param_dim)
                .map(|i| {
                    let mut xp = pt(x);
                    let mut xm = pt(x);
                    xp[i] += FD_STEP;
                    xm[i] -= FD_STEP;
                    let (p, q) = (self.point(&xp), self.point(&xm));
                    let mut row = [0.0; MAX_AMBIENT_DIM];
                    for a in 0..self.ambient_dim {
                        row[a] = (p[a] - q[a]) / (2.0 * FD_STEP);
                    }
                    row
                })
                .collect(),
        }
    }

    /// `∂²Σ/(∂x_i ∂x_j)`.
    pub fn second_derivative(&self, x: &[f64], i: usize, j: usize) -> Amb {
        match &self.kind {
            ChartKind::RoundSphere { .. } => self.sphere_derivative(x, &[i, j]),
            ChartKind::QuadraticGraph { m } => {
                let mut row = [0.0; MAX_AMBIENT_DIM];
                row[self.param_dim + 1] = m[i][j];
                row
            }
            ChartKind::Custom { .. } => {
                let h = FD_STEP;
                let mut out = [0.0; MAX_AMBIENT_DIM];
                if i == j {
                    let mut xp = pt(x);
                    let mut xm = pt(x);
                    xp[i] += h;
                    xm[i] -= h;
                    let (p, c, q) = (self.point(&xp), self.point(x), self.point(&xm));
                    for a in 0..self.ambient_dim {
                        out[a] = (p[a] - 2.0 * c[a] + q[a]) / (h * h);
                    }
                } else {
                    let mut xpp = pt(x);
                    let mut xpm = pt(x);
                    let mut xmp = pt(x);
                    let mut xmm = pt(x);
                    xpp[i] += h;
                    xpp[j] += h;
                    xpm[i] += h;
                    xpm[j] -= h;
                    xmp[i] -= h;
                    xmp[j] += h;
                    xmm[i] -= h;
                    xmm[j] -= h;
                    let (a1, a2, a3, a4) = (
                        self.point(&xpp),
                        self.point(&xpm),
                        self.point(&xmp),
                        self.point(&xmm),
                    );
                    for a in 0..self.ambient_dim {
                        out[a] = (a1[a] - a2[a] - a3[a] + a4[a]) / (4.0 * h * h);
                    }
                }
                out
            }
        }
    }

    /// Gradient of `x -> <Σ(x), z>`.
    pub fn project_gradient(&self, x: &[f64], z: &[f64]) -> Pt {
        let jac = self.jacobian(x);
        let mut g = [0.0; MAX_PARAM_DIM];
        for (i, row) in jac.iter().enumerate() {
            g[i] = dot(&row[..self.ambient_dim], &z[..self.ambient_dim]);
        }
        g
    }

    /// Hessian of `x -> <Σ(x), z>`.
    pub fn project_hessian(&self, x: &[f64], z: &[f64]) -> SymMat {
        let k = self.param_dim;
        let mut h = SymMat::zero(k);
        for i in 0..k {
            for j in i..k {
                let d = self.second_derivative(x, i, j);
                let v = dot(&d[..self.ambient_dim], &z[..self.ambient_dim]);
                h.m[i][j] = v;
                h.m[j][i] = v;
            }
        }
        h
    }

    /// Sphere-chart derivative of arbitrary order: `orders` lists the
    /// parameter axes differentiated against (each at most twice in total).
    fn sphere_derivative(&self, x: &[f64], orders: &[usize]) -> Amb {
        let (radius, has_const) = match &self.kind {
            ChartKind::RoundSphere { radius, last_const } => (*radius, last_const.is_some()),
            _ => unreachable!(),
        };
        let k = self.param_dim;
        let mut ord = [0u8; MAX_PARAM_DIM];
        for &a in orders {
            ord[a] += 1;
        }
        let chain: f64 = ANGLE_SCALE.powi(orders.len() as i32);
        let mut out = [0.0; MAX_AMBIENT_DIM];
        for comp in 0..self.ambient_dim {
            if has_const && comp == k + 1 {
                out[comp] = 0.0;
                continue;
            }
            out[comp] = radius * chain * sphere_component(x, k, comp, &ord);
        }
        out
    }
}

/// Gram-Schmidt residual of coordinate axis `seed` against the orthonormal
/// system `{b} ∪ tangent`; `None` when dimensions disagree.
fn normal_residual(
    seed: usize,
    b: &Amb,
    tangent: &[Amb],
    amb: usize,
) -> Option<(Amb, f64)> {
    if seed >= amb {
        return None;
    }
    let mut v = [0.0; MAX_AMBIENT_DIM];
    v[seed] = 1.0;
    let d0 = dot(&v[..amb], &b[..amb]);
    for a in 0..amb {
        v[a] -= d0 * b[a];
    }
    for t in tangent {
        let d = dot(&v[..amb], &t[..amb]);
        for a in 0..amb {
            v[a] -= d * t[a];
        }
    }
    let r = norm(&v[..amb]);
    if r > 0.0 {
        for a in 0..amb {
            v[a] /= r;
        }
    }
    Some((v, r))
}

/// Value of one hyperspherical component with per-angle derivative orders.
/// Component `0` is `cos θ_1 Π_{j>=2} cos θ_j`, component `1` is
/// `sin θ_1 Π_{j>=2} cos θ_j`, and component `i >= 2` is
/// `sin θ_i Π_{j>i} cos θ_j`.
fn sphere_component(x: &[f64], k: usize, comp: usize, ord: &[u8; MAX_PARAM_DIM]) -> f64 {
    let mut p = 1.0;
    for j in 0..k {
        let th = ANGLE_SCALE * (x[j] - 0.5);
        // which trig factor does angle j contribute to this component?
        let factor = if comp == 0 {
            Some(Trig::Cos)
        } else if comp == 1 {
            if j == 0 {
                Some(Trig::Sin)
            } else {
                Some(Trig::Cos)
            }
        } else {
            // comp >= 2: sin θ_{comp-1} Π_{j >= comp} cos θ_j
            if j + 1 == comp {
                Some(Trig::Sin)
            } else if j + 1 > comp {
                Some(Trig::Cos)
            } else {
                None
            }
        };
        match factor {
            Some(t) => p *= t.eval(th, ord[j]),
            None => {
                if ord[j] > 0 {
                    return 0.0;
                }
            }
        }
    }
    p
}

#[derive(Clone, Copy)]
enum Trig {
    Sin,
    Cos,
}

impl Trig {
    fn eval(self, th: f64, order: u8) -> f64 {
        match (self, order) {
            (Trig::Sin, 0) => th.sin(),
            (Trig::Sin, 1) => th.cos(),
            (Trig::Sin, 2) => -th.sin(),
            (Trig::Cos, 0) => th.cos(),
            (Trig::Cos, 1) => -th.sin(),
            (Trig::Cos, 2) => -th.cos(),
            _ => panic!("derivative order above 2"),
        }
    }
}

// ---------------------------------------------------------------------------
// frames and curvature
// ---------------------------------------------------------------------------

const RANK_TOL: f64 = 1e-9;

impl ManifoldChart {
    /// Orthonormal tangent frame, radial vector and unit normal at `x`.
    pub fn tangent_frame(&self, x: &[f64]) -> Result<TangentFrame> {
        let (frame, _) = self.raw_frame(x)?;
        let mut frame = frame;
        if !frame.codim0 {
            for v in frame.nu.iter_mut() {
                *v *= self.orientation;
            }
        }
        Ok(frame)
    }

    /// Frame before the orientation sign is applied; also returns the seed
    /// axis used for the normal so neighbouring frames stay consistent.
    fn raw_frame(&self, x: &[f64]) -> Result<(TangentFrame, usize)> {
        let amb = self.ambient_dim;
        let k = self.param_dim;
        let base = self.point(x);
        let nb = norm(&base[..amb]);
        if nb < RANK_TOL {
            return Err(Error::NonTransverse { point: x[..k].to_vec() });
        }
        let mut e0 = [0.0; MAX_AMBIENT_DIM];
        for i in 0..amb {
            e0[i] = base[i] / nb;
        }

        let jac = self.jacobian(x);
        // Gram-Schmidt over the jacobian rows; keep the parameter-space
        // combinations realising each orthonormal tangent vector.
        let mut tangent: Vec<Amb> = Vec::with_capacity(k);
        let mut pullback: Vec<Pt> = Vec::with_capacity(k);
        for i in 0..k {
            let mut v = jac[i];
            let mut coef = [0.0; MAX_PARAM_DIM];
            coef[i] = 1.0;
            for (t, c) in tangent.iter().zip(&pullback) {
                let d = dot(&v[..amb], &t[..amb]);
                for a in 0..amb {
                    v[a] -= d * t[a];
                }
                for a in 0..k {
                    coef[a] -= d * c[a];
                }
            }
            let nv = norm(&v[..amb]);
            if nv < RANK_TOL * norm(&jac[i][..amb]).max(1.0) {
                return Err(Error::DegenerateChart { point: x[..k].to_vec() });
            }
            for a in 0..amb {
                v[a] /= nv;
            }
            for a in 0..k {
                coef[a] /= nv;
            }
            tangent.push(v);
            pullback.push(coef);
        }

        if self.codim0() {
            return Ok((
                TangentFrame {
                    x: pt(&x[..k]),
                    base,
                    e0,
                    tangent,
                    pullback,
                    nu: e0,
                    codim0: true,
                },
                usize::MAX,
            ));
        }

        // Orthonormalise the base point against the tangent span; failure
        // means Σ(x) lies in its own tangent space.
        let mut b = base;
        for t in &tangent {
            let d = dot(&b[..amb], &t[..amb]);
            for a in 0..amb {
                b[a] -= d * t[a];
            }
        }
        let nbres = norm(&b[..amb]);
        if nbres < 1e-8 * nb {
            return Err(Error::NonTransverse { point: x[..k].to_vec() });
        }
        for v in b.iter_mut() {
            *v /= nbres;
        }

        // The normal spans the orthogonal complement of {b, tangent}. Seed
        // with the chart's fixed coordinate axis: the residual then always
        // has a positive component along that axis, so the field cannot
        // flip sign between nearby points.
        let seed = self.normal_seed;
        let res = normal_residual(seed, &b, &tangent, amb);
        let (nu, r) = match res {
            Some(v) => v,
            None => return Err(Error::DegenerateChart { point: x[..k].to_vec() }),
        };
        if r < 1e-8 {
            return Err(Error::DegenerateChart { point: x[..k].to_vec() });
        }
        Ok((
            TangentFrame {
                x: pt(&x[..k]),
                base,
                e0,
                tangent,
                pullback,
                nu,
                codim0: false,
            },
            seed,
        ))
    }

    /// Coordinate axis with the largest complement residual at the center.
    fn pick_normal_seed(&self) -> usize {
        if self.codim0() {
            return 0;
        }
        let center = [0.5; MAX_PARAM_DIM];
        let amb = self.ambient_dim;
        let k = self.param_dim;
        let base = self.point(&center[..k]);
        let jac = self.jacobian(&center[..k]);
        // orthonormalise {base, jacobian rows}
        let mut basis: Vec<Amb> = Vec::new();
        for cand in std::iter::once(&base).chain(jac.iter()) {
            let mut v = *cand;
            for b in &basis {
                let d = dot(&v[..amb], &b[..amb]);
                for a in 0..amb {
                    v[a] -= d * b[a];
                }
            }
            let n = norm(&v[..amb]);
            if n > 1e-10 {
                for a in 0..amb {
                    v[a] /= n;
                }
                basis.push(v);
            }
        }
        let mut best = 0;
        let mut best_res = -1.0;
        for seed in 0..amb {
            let mut v = [0.0; MAX_AMBIENT_DIM];
            v[seed] = 1.0;
            for b in &basis {
                let d = dot(&v[..amb], &b[..amb]);
                for a in 0..amb {
                    v[a] -= d * b[a];
                }
            }
            let r = norm(&v[..amb]);
            if r > best_res {
                best_res = r;
                best = seed;
            }
        }
        best
    }

    /// Normal field evaluated near `x`, sign-aligned with `reference`.
    fn normal_aligned(&self, x: &[f64], reference: &Amb) -> Result<Amb> {
        let (frame, _) = self.raw_frame(x)?;
        let mut nu = if frame.codim0 { frame.e0 } else { frame.nu };
        if dot(&nu[..self.ambient_dim], &reference[..self.ambient_dim]) < 0.0 {
            for v in nu.iter_mut() {
                *v = -*v;
            }
        }
        Ok(nu)
    }

    /// Second fundamental form in the orthonormal tangent basis, computed by
    /// central differences of the normal field (orientation applied).
    pub fn second_fundamental_form(&self, x: &[f64]) -> Result<(SymMat, TangentFrame)> {
        let (frame, _) = self.raw_frame(x)?;
        let amb = self.ambient_dim;
        let k = self.param_dim;
        let nu_ref = if frame.codim0 { frame.e0 } else { frame.nu };

        // d nu / d x_j by central differences, sign-aligned to the center
        let mut dnu: Vec<Amb> = Vec::with_capacity(k);
        for j in 0..k {
            let mut xp = pt(&x[..k]);
            let mut xm = pt(&x[..k]);
            xp[j] += FD_STEP;
            xm[j] -= FD_STEP;
            let np = self.normal_aligned(&xp, &nu_ref)?;
            let nm = self.normal_aligned(&xm, &nu_ref)?;
            let mut d = [0.0; MAX_AMBIENT_DIM];
            for a in 0..amb {
                d[a] = (np[a] - nm[a]) / (2.0 * FD_STEP);
            }
            dnu.push(d);
        }

        let mut ii = SymMat::zero(k);
        for i in 0..k {
            // ambient derivative of nu along the tangent vector e_i
            let mut grad_nu = [0.0; MAX_AMBIENT_DIM];
            for j in 0..k {
                for a in 0..amb {
                    grad_nu[a] += frame.pullback[i][j] * dnu[j][a];
                }
            }
            for j in 0..k {
                ii.m[i][j] += -dot(&grad_nu[..amb], &frame.tangent[j][..amb]);
            }
        }
        // symmetrise and orient
        for i in 0..k {
            for j in (i + 1)..k {
                let v = 0.5 * (ii.m[i][j] + ii.m[j][i]);
                ii.m[i][j] = v;
                ii.m[j][i] = v;
            }
        }
        for i in 0..k {
            for j in 0..k {
                ii.m[i][j] *= self.orientation;
            }
        }
        Ok((ii, frame))
    }

    fn compute_orientation(&self) -> f64 {
        // <nu, ∇_{e1} e1> at the chart center, with the raw (unoriented) normal
        let center = [0.5; MAX_PARAM_DIM];
        let Ok((frame, _)) = self.raw_frame(&center[..self.param_dim]) else {
            return 1.0;
        };
        let amb = self.ambient_dim;
        let k = self.param_dim;
        let v1 = frame.pullback[0];
        let h = FD_STEP;
        let mut xp = [0.5; MAX_PARAM_DIM];
        let mut xm = [0.5; MAX_PARAM_DIM];
        for i in 0..k {
            xp[i] += h * v1[i];
            xm[i] -= h * v1[i];
        }
        let (Ok((fp, _)), Ok((fm, _))) =
            (self.raw_frame(&xp[..k]), self.raw_frame(&xm[..k]))
        else {
            return 1.0;
        };
        // align neighbour frames' first tangent vector with the center one
        let mut tp = fp.tangent[0];
        let mut tm = fm.tangent[0];
        if dot(&tp[..amb], &frame.tangent[0][..amb]) < 0.0 {
            for v in tp.iter_mut() {
                *v = -*v;
            }
        }
        if dot(&tm[..amb], &frame.tangent[0][..amb]) < 0.0 {
            for v in tm.iter_mut() {
                *v = -*v;
            }
        }
        let mut de1 = [0.0; MAX_AMBIENT_DIM];
        for a in 0..amb {
            de1[a] = (tp[a] - tm[a]) / (2.0 * h);
        }
        let nu = if frame.codim0 { frame.e0 } else { frame.nu };
        if dot(&de1[..amb], &nu[..amb]) < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Principal curvatures (ascending) and principal directions in the
    /// tangent basis. Builtin sphere charts use their closed forms.
    pub fn principal_curvatures(&self, x: &[f64]) -> Result<(Vec<f64>, TangentFrame)> {
        if let ChartKind::RoundSphere { radius, last_const } = &self.kind {
            let frame = self.tangent_frame(x)?;
            let kappa = match last_const {
                // slice at height c: umbilic with |c| / sqrt(1 - c^2)
                Some(c) => c.abs() / radius,
                // the sphere itself: radial normal, curvature 1/r
                None => 1.0 / radius,
            };
            return Ok((vec![kappa; self.param_dim], frame));
        }
        let (ii, frame) = self.second_fundamental_form(x)?;
        let mut ev = ii.eigenvalues();
        ev.sort_by(f64::total_cmp);
        Ok((ev, frame))
    }

    /// Finite-difference principal curvatures (never the closed form);
    /// independent cross-check route for the builtin charts.
    pub fn principal_curvatures_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (ii, _) = self.second_fundamental_form(x)?;
        let mut ev = ii.eigenvalues();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Whether the chart image lies on the unit sphere at `x`.
    pub fn on_unit_sphere(&self, x: &[f64], tol: f64) -> bool {
        (norm(&self.point(x)[..self.ambient_dim]) - 1.0).abs() <= tol
    }

    /// Sectional curvature of the principal 2-plane `(i, j)` through the
    /// Gauss relation `K = κ_i κ_j + 1`; requires the chart to lie on the
    /// unit sphere.
    pub fn sectional_curvature(&self, x: &[f64], i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::InvalidParameter("need two distinct principal directions".into()));
        }
        if !self.on_unit_sphere(x, 1e-8) {
            return Err(Error::Unsupported(
                "sectional curvature via the Gauss relation needs a chart on the unit sphere"
                    .into(),
            ));
        }
        let (kappas, _) = self.principal_curvatures(x)?;
        Ok(kappas[i] * kappas[j] + 1.0)
    }
}

/// Sectional curvature of the plane spanned by two orthonormal tangent
/// directions `a`, `b` (coefficients in the frame basis), evaluated through
/// the ambient Gauss equation for a submanifold of the unit sphere:
/// `K = 1 + II(a,a) II(b,b) - II(a,b)^2`.
pub fn gauss_sectional(ii: &SymMat, a: &Pt, b: &Pt) -> f64 {
    let qa = ii.quad(a);
    let qb = ii.quad(b);
    let mut qab = 0.0;
    for i in 0..ii.k {
        for j in 0..ii.k {
            qab += ii.m[i][j] * a[i] * b[j];
        }
    }
    1.0 + qa * qb - qab * qab
}

/// Sweep a sample lattice and report the non-degeneracy diagnostics: every
/// principal curvature nonzero with a common sign, the global curvature
/// bound, and (for charts on the unit sphere) the minimum sectional
/// curvature with its `> 1` gate.
pub fn verify_nondegenerate(chart: &ManifoldChart, nodes_per_axis: usize) -> Result<CurvatureReport> {
    let k = chart.param_dim();
    let grid = Grid::new(BoxDomain::unit(k), nodes_per_axis.max(2));
    let total = grid.len();
    const CAP: usize = 100_000;
    let flats: Vec<usize> = if total <= CAP {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (0..CAP).map(|_| rng.random_range(0..total)).collect()
    };

    let mut samples = Vec::with_capacity(flats.len());
    let mut pos = 0usize;
    let mut neg = 0usize;
    let mut zero = 0usize;
    let mut min_abs = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    let mut on_sphere = true;
    let mut min_sec = f64::INFINITY;
    for flat in flats {
        let x = grid.point(flat);
        let (kappas, _) = chart.principal_curvatures(&x[..k])?;
        on_sphere &= chart.on_unit_sphere(&x[..k], 1e-8);
        let mut sec_min = f64::INFINITY;
        let mut sec_max = f64::NEG_INFINITY;
        for i in 0..k {
            for j in (i + 1)..k {
                let s = kappas[i] * kappas[j] + 1.0;
                sec_min = sec_min.min(s);
                sec_max = sec_max.max(s);
            }
        }
        for &kap in &kappas {
            if kap.abs() < 1e-7 {
                zero += 1;
            } else if kap > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            min_abs = min_abs.min(kap.abs());
            max_abs = max_abs.max(kap.abs());
        }
        if k >= 2 {
            min_sec = min_sec.min(sec_min);
        }
        samples.push(CurvatureSample {
            x: x[..k].to_vec(),
            kappas,
            sectional_min: (k >= 2).then_some(sec_min),
            sectional_max: (k >= 2).then_some(sec_max),
        });
    }
    let all_same_sign = zero == 0 && (pos == 0 || neg == 0);
    let sectional = (on_sphere && k >= 2).then_some(min_sec);
    Ok(CurvatureReport {
        samples,
        all_same_sign,
        min_abs,
        max_abs,
        kappa_bound: if all_same_sign {
            max_abs.max(1.0 / min_abs).max(1.0)
        } else {
            f64::INFINITY
        },
        on_unit_sphere: on_sphere,
        min_sectional: sectional,
        sectional_gate: sectional.map(|s| s > 1.0),
    })
}

/// Largest relative mismatch between the chart's derivative evaluators and
/// central finite differences of `Σ` at step `1e-4`, over `samples` seeded
/// sample points.
pub fn derivative_consistency(chart: &ManifoldChart, samples: usize, seed: u64) -> f64 {
    let k = chart.param_dim();
    let amb = chart.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut x = [0.0; MAX_PARAM_DIM];
        for v in x.iter_mut().take(k) {
            *v = rng.random_range(0.05..0.95);
        }
        let jac = chart.jacobian(&x[..k]);
        let scale_j = jac
            .iter()
            .map(|r| norm(&r[..amb]))
            .fold(1.0f64, f64::max);
        for i in 0..k {
            let mut xp = x;
            let mut xm = x;
            xp[i] += FD_STEP;
            xm[i] -= FD_STEP;
            let (p, q) = (chart.point(&xp[..k]), chart.point(&xm[..k]));
            for a in 0..amb {
                let fd = (p[a] - q[a]) / (2.0 * FD_STEP);
                worst = worst.max((jac[i][a] - fd).abs() / scale_j);
            }
            for j in i..k {
                let d2 = chart.second_derivative(&x[..k], i, j);
                let scale_h = norm(&d2[..amb]).max(scale_j);
                let fd2 = fd_second(chart, &x, i, j, amb);
                for a in 0..amb {
                    worst = worst.max((d2[a] - fd2[a]).abs() / scale_h);
                }
            }
        }
    }
    worst
}

fn fd_second(chart: &ManifoldChart, x: &Pt, i: usize, j: usize, amb: usize) -> Amb {
    let h = FD_STEP;
    let mut out = [0.0; MAX_AMBIENT_DIM];
    if i == j {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        let (p, c, q) = (chart.point(&xp), chart.point(x), chart.point(&xm));
        for a in 0..amb {
            out[a] = (p[a] - 2.0 * c[a] + q[a]) / (h * h);
        }
    } else {
        let mut xpp = *x;
        let mut xpm = *x;
        let mut xmp = *x;
        let mut xmm = *x;
        xpp[i] += h;
        xpp[j] += h;
        xpm[i] += h;
        xpm[j] -= h;
        xmp[i] -= h;
        xmp[j] += h;
        xmm[i] -= h;
        xmm[j] -= h;
        let (a1, a2, a3, a4) = (
            chart.point(&xpp),
            chart.point(&xpm),
            chart.point(&xmp),
            chart.point(&xmm),
        );
        for a in 0..amb {
            out[a] = (a1[a] - a2[a] - a3[a] + a4[a]) / (4.0 * h * h);
        }
    }
    out
}

/// Distinguished boundary cells for reports: Morton code of the δ-cell of a
/// parameter point (clamped into the unit cube).
pub fn cell_of(x: &[f64], level: u32) -> u64 {
    let scale = (1u64 << level) as f64;
    let coords: Vec<u32> = x
        .iter()
        .map(|&v| ((v * scale).floor().clamp(0.0, scale - 1.0)) as u32)
        .collect();
    morton_encode(&coords, level)
}

/// Deterministic search for the point minimising `f` over the unit cube of
/// dimension `k`: coarse lattice plus local refinement.
pub fn argmin_on_cube<F: Fn(&Pt) -> f64 + Sync>(f: &F, k: usize, nodes: usize) -> (Pt, f64) {
    let grid = Grid::new(BoxDomain::unit(k), nodes);
    let mut best = grid.point(0);
    let mut best_v = f(&best);
    for p in grid.points() {
        let v = f(&p);
        if v < best_v {
            best_v = v;
            best = p;
        }
    }
    refine_extremum(f, &BoxDomain::unit(k), best, grid.max_step(), true, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn slice(c: f64, n: usize) -> ManifoldChart {
        make_builtin_chart(&ChartSpec::SphereSlice { c, n }).unwrap()
    }

    #[test]
    fn sphere_slice_lies_on_sphere_with_fixed_height() {
        let chart = slice(0.6, 3);
        let grid = Grid::new(BoxDomain::unit(2), 9);
        for x in grid.points() {
            let p = chart.point(&x[..2]);
            assert_relative_eq!(norm(&p[..4]), 1.0, epsilon = 1e-12);
            assert_relative_eq!(p[3], 0.6, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_sphere_chart_is_unit_norm() {
        let chart = make_builtin_chart(&ChartSpec::UnitSphere { n: 3 }).unwrap();
        assert_eq!(chart.param_dim(), 3);
        assert!(chart.codim0());
        let grid = Grid::new(BoxDomain::unit(3), 5);
        for x in grid.points() {
            assert_relative_eq!(norm(&chart.point(&x[..3])[..4]), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn quadratic_graph_passes_through_expected_points() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let chart = make_builtin_chart(&ChartSpec::QuadraticGraph {
            l: id.clone(),
            a: id,
            n: 3,
        })
        .unwrap();
        // center parameter maps to y = 0
        let p = chart.point(&[0.5, 0.5]);
        assert_eq!(p[0], 1.0);
        assert_relative_eq!(p[3], 0.0, epsilon = 1e-15);
        // y = (0.2, -0.3) gives |y|^2
        let p = chart.point(&[0.7, 0.2]);
        assert_relative_eq!(p[1], 0.2, epsilon = 1e-15);
        assert_relative_eq!(p[2], -0.3, epsilon = 1e-15);
        assert_relative_eq!(p[3], 0.04 + 0.09, epsilon = 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            make_builtin_chart(&ChartSpec::SphereSlice { c: 0.0, n: 3 }),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            make_builtin_chart(&ChartSpec::SphereSlice { c: 1.0, n: 3 }),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            make_builtin_chart(&ChartSpec::SphereSlice { c: -1.0, n: 3 }),
            Err(Error::InvalidParameter(_))
        ));
        let not_pd = vec![vec![1.0, 0.0], vec![0.0, -2.0]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            make_builtin_chart(&ChartSpec::QuadraticGraph { l: id.clone(), a: not_pd, n: 3 }),
            Err(Error::InvalidParameter(_))
        ));
        let singular = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            make_builtin_chart(&ChartSpec::QuadraticGraph { l: singular, a: id, n: 3 }),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn frames_are_orthonormal_everywhere() {
        let charts = vec![
            slice(0.6, 3),
            slice(-0.35, 3),
            slice(0.5, 4),
            make_builtin_chart(&ChartSpec::UnitSphere { n: 3 }).unwrap(),
            make_builtin_chart(&ChartSpec::QuadraticGraph {
                l: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                a: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
                n: 3,
            })
            .unwrap(),
        ];
        for chart in charts {
            let grid = Grid::new(BoxDomain::unit(chart.param_dim()), 5);
            for x in grid.points() {
                let f = chart.tangent_frame(&x[..chart.param_dim()]).unwrap();
                assert!(
                    f.orthogonality_residual(chart.ambient_dim()) <= 1e-10,
                    "residual too large"
                );
            }
        }
    }

    #[test]
    fn slice_normal_is_tangent_to_big_sphere_and_orthogonal_to_slice() {
        let chart = slice(0.6, 3);
        let f = chart.tangent_frame(&[0.3, 0.7]).unwrap();
        // nu ⊥ base point (tangent to S^3) and nu ⊥ tangent space
        assert!(dot(&f.nu[..4], &f.base[..4]).abs() < 1e-10);
        for t in &f.tangent {
            assert!(dot(&f.nu[..4], &t[..4]).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_sphere_frame_flags_codim0_and_returns_radial_normal() {
        let chart = make_builtin_chart(&ChartSpec::UnitSphere { n: 3 }).unwrap();
        let f = chart.tangent_frame(&[0.4, 0.5, 0.6]).unwrap();
        assert!(f.codim0);
        for a in 0..4 {
            assert_relative_eq!(f.nu[a], f.e0[a], epsilon = 1e-14);
        }
    }

    #[test]
    fn quadratic_graph_normal_at_center_is_last_axis() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let chart = make_builtin_chart(&ChartSpec::QuadraticGraph { l: id.clone(), a: id, n: 3 })
            .unwrap();
        let f = chart.tangent_frame(&[0.5, 0.5]).unwrap();
        // solved numerically: the orthogonality system forces ±e_4 here
        let mut expect = [0.0; 4];
        expect[3] = 1.0;
        let d = dot(&f.nu[..4], &expect);
        assert!(d.abs() > 1.0 - 1e-10);
        // orientation convention picks the convex side
        assert!(d > 0.0);
    }

    #[test]
    fn sphere_slice_sectional_curvature_matches_formula() {
        for &c in &[0.3f64, 0.5, 0.6, 0.8] {
            let chart = slice(c, 3);
            let expected = 1.0 / (1.0 - c * c);
            for x in Grid::new(BoxDomain::unit(2), 5).points() {
                let s = chart.sectional_curvature(&x[..2], 0, 1).unwrap();
                assert_relative_eq!(s, expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sphere_slice_keeps_constant_curvature_beyond_08() {
        let chart = slice(0.8, 3);
        let s = chart.sectional_curvature(&[0.25, 0.75], 0, 1).unwrap();
        assert!((s - 1.0 / 0.36).abs() < 1e-4);
        // cross-check through finite-difference principal curvatures
        let fd = chart.principal_curvatures_fd(&[0.25, 0.75]).unwrap();
        let s_fd = fd[0] * fd[1] + 1.0;
        assert!((s_fd - 1.0 / 0.36).abs() < 1e-4);
    }

    #[test]
    fn round_sphere_of_radius_r_has_curvature_one_over_r() {
        // 2-sphere of radius r in R^3 as a custom chart: codim-0 case
        let r = 2.0;
        let f = Arc::new(move |x: &[f64]| {
            let th1 = ANGLE_SCALE * (x[0] - 0.5);
            let th2 = ANGLE_SCALE * (x[1] - 0.5);
            vec![
                r * th1.cos() * th2.cos(),
                r * th1.sin() * th2.cos(),
                r * th2.sin(),
            ]
        });
        let chart = ManifoldChart::custom(2, 3, f);
        assert!(chart.codim0());
        let kappas = chart.principal_curvatures_fd(&[0.4, 0.6]).unwrap();
        for k in kappas {
            assert_relative_eq!(k, 1.0 / r, epsilon = 1e-5);
        }
    }

    #[test]
    fn quadratic_graph_center_curvatures_match_hessian_eigenvalues() {
        let chart = make_builtin_chart(&ChartSpec::QuadraticGraph {
            l: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            a: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
            n: 3,
        })
        .unwrap();
        // frozen from the finite-difference form at the center: the graph has
        // zero gradient there so the curvatures equal the Hessian eigenvalues
        let kappas = chart.principal_curvatures(&[0.5, 0.5]).unwrap().0;
        assert_relative_eq!(kappas[0], 2.0, epsilon = 1e-4);
        assert_relative_eq!(kappas[1], 4.0, epsilon = 1e-4);
    }

    #[test]
    fn sectional_requires_unit_sphere() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let chart =
            make_builtin_chart(&ChartSpec::QuadraticGraph { l: id.clone(), a: id, n: 3 }).unwrap();
        // away from the center the graph leaves the unit sphere
        assert!(matches!(
            chart.sectional_curvature(&[0.8, 0.3], 0, 1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn gauss_relation_on_random_2_planes() {
        let chart = slice(0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0];
            let (ii, _) = chart.second_fundamental_form(&x[..2]).unwrap();
            let (kappas, _) = chart.principal_curvatures(&x[..2]).unwrap();
            // random orthonormal pair in the tangent plane
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let a = pt(&[th.cos(), th.sin()]);
            let b = pt(&[-th.sin(), th.cos()]);
            let direct = gauss_sectional(&ii, &a, &b);
            let via_kappas = kappas[0] * kappas[1] + 1.0;
            assert!((direct - via_kappas).abs() <= 1e-5);
        }
    }

    #[test]
    fn nondegeneracy_sweep_pass_and_fail() {
        let report = verify_nondegenerate(&slice(0.5, 3), 33).unwrap();
        assert!(report.passes());
        assert!(report.on_unit_sphere);
        let ms = report.min_sectional.unwrap();
        assert!((ms - 4.0 / 3.0).abs() < 1e-6);
        assert_eq!(report.sectional_gate, Some(true));

        // flat graph: all curvatures vanish
        let flat = ManifoldChart::custom(
            2,
            4,
            Arc::new(|x: &[f64]| vec![x[0], x[1], 0.0, 1.0]),
        );
        let report = verify_nondegenerate(&flat, 9).unwrap();
        assert!(!report.passes());

        // positive definite quadratic graph: same-sign curvatures
        let chart = make_builtin_chart(&ChartSpec::QuadraticGraph {
            l: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            a: vec![vec![1.0, 0.0], vec![0.0, 3.0]],
            n: 3,
        })
        .unwrap();
        let report = verify_nondegenerate(&chart, 17).unwrap();
        assert!(report.passes());
    }

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        let charts = vec![
            slice(0.6, 3),
            slice(0.5, 4),
            make_builtin_chart(&ChartSpec::UnitSphere { n: 3 }).unwrap(),
            make_builtin_chart(&ChartSpec::QuadraticGraph {
                l: vec![vec![1.0, 0.2], vec![0.0, 1.0]],
                a: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
                n: 3,
            })
            .unwrap(),
        ];
        for chart in charts {
            assert!(derivative_consistency(&chart, 20, 3) <= 1e-5);
        }
    }

    #[test]
    fn chart_spec_round_trips_through_json() {
        let spec = ChartSpec::SphereSlice { c: 0.6, n: 3 };
        let js = serde_json::to_string(&spec).unwrap();
        assert!(js.contains("sphere_slice"));
        let back: ChartSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
    }
}
