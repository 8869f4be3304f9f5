//! Shared numerical helpers: box domains, sample grids, direction nets,
//! Morton codes for dyadic cells, small symmetric matrices and slope fits.

use serde::{Deserialize, Serialize};

/// Maximum parameter-space dimension handled by the lab (`k = n - 1 <= 3`,
/// plus codimension-zero sphere charts with `k = 3`).
pub const MAX_PARAM_DIM: usize = 3;
/// Maximum ambient dimension (`n + 1 <= 5`).
pub const MAX_AMBIENT_DIM: usize = 5;

/// Point in parameter space; only the first `k` entries are meaningful.
pub type Pt = [f64; MAX_PARAM_DIM];
/// Vector in ambient space; only the first `n + 1` entries are meaningful.
pub type Amb = [f64; MAX_AMBIENT_DIM];

pub fn pt(coords: &[f64]) -> Pt {
    let mut p = [0.0; MAX_PARAM_DIM];
    p[..coords.len()].copy_from_slice(coords);
    p
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "empty box");
        Self { lo, hi }
    }

    /// Unit cube `[0,1]^k`.
    pub fn unit(k: usize) -> Self {
        Self::new(vec![0.0; k], vec![1.0; k])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Pt {
        let mut c = [0.0; MAX_PARAM_DIM];
        for i in 0..self.dim() {
            c[i] = 0.5 * (self.lo[i] + self.hi[i]);
        }
        c
    }

    pub fn diam(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lo[i] - tol && x[i] <= self.hi[i] + tol)
    }

    /// Box grown by `pad` on every side.
    pub fn enlarged(&self, pad: f64) -> Self {
        Self::new(
            self.lo.iter().map(|a| a - pad).collect(),
            self.hi.iter().map(|b| b + pad).collect(),
        )
    }

    /// Box with the same center scaled by `factor` (`2U` for `factor = 2`).
    pub fn scaled(&self, factor: f64) -> Self {
        let c = self.center();
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for i in 0..self.dim() {
            let h = 0.5 * factor * self.side(i);
            lo[i] = c[i] - h;
            hi[i] = c[i] + h;
        }
        Self::new(lo, hi)
    }

    /// Clamp a point into the closed box.
    pub fn clamp(&self, x: &mut [f64]) {
        for i in 0..self.dim() {
            x[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Dyadic subcubes of side `2^-level` relative to this box.
    pub fn dyadic_children(&self, level: u32) -> Vec<BoxDomain> {
        let k = self.dim();
        let per_axis = 1usize << level;
        let mut out = Vec::with_capacity(per_axis.pow(k as u32));
        let mut idx = vec![0usize; k];
        loop {
            let mut lo = Vec::with_capacity(k);
            let mut hi = Vec::with_capacity(k);
            for i in 0..k {
                let w = self.side(i) / per_axis as f64;
                lo.push(self.lo[i] + idx[i] as f64 * w);
                hi.push(self.lo[i] + (idx[i] + 1) as f64 * w);
            }
            out.push(BoxDomain::new(lo, hi));
            let mut axis = 0;
            loop {
                if axis == k {
                    return out;
                }
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }
}

/// Uniform grid with `nodes` points per axis, endpoints included.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: BoxDomain,
    pub nodes: usize,
}

impl Grid {
    pub fn new(domain: BoxDomain, nodes: usize) -> Self {
        assert!(nodes >= 2);
        Self { domain, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.pow(self.domain.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self, axis: usize) -> f64 {
        self.domain.side(axis) / (self.nodes - 1) as f64
    }

    /// Largest per-axis step.
    pub fn max_step(&self) -> f64 {
        (0..self.domain.dim())
            .map(|i| self.step(i))
            .fold(0.0, f64::max)
    }

    pub fn point(&self, flat: usize) -> Pt {
        let k = self.domain.dim();
        let mut p = [0.0; MAX_PARAM_DIM];
        let mut rest = flat;
        for i in 0..k {
            let j = rest % self.nodes;
            rest /= self.nodes;
            p[i] = self.domain.lo[i] + j as f64 * self.step(i);
        }
        p
    }

    pub fn points(&self) -> impl Iterator<Item = Pt> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// Directions on `S^{k-1}` used for directional second derivatives.
///
/// `k = 1` yields the single direction `+1`; `k = 2` equally spaced angles;
/// `k = 3` a Fibonacci-style sphere layout. Counts follow the lab defaults
/// (64 for `k = 2`, 256 for `k = 3`).
pub fn sphere_net(k: usize) -> Vec<Pt> {
    match k {
        1 => vec![pt(&[1.0])],
        2 => {
            let m = 64;
            (0..m)
                .map(|i| {
                    let th = std::f64::consts::PI * i as f64 / m as f64;
                    pt(&[th.cos(), th.sin()])
                })
                .collect()
        }
        3 => {
            let m = 256;
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            (0..m)
                .map(|i| {
                    // half-sphere suffices: the quadratic form is even in xi
                    let z = (i as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
                    pt(&[r * th.cos(), r * th.sin(), z])
                })
                .collect()
        }
        _ => panic!("sphere_net supports k in 1..=3, got {k}"),
    }
}

/// Dense symmetric matrix of size `k <= 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    pub k: usize,
    pub m: [[f64; MAX_PARAM_DIM]; MAX_PARAM_DIM],
}

impl SymMat {
    pub fn zero(k: usize) -> Self {
        Self {
            k,
            m: [[0.0; MAX_PARAM_DIM]; MAX_PARAM_DIM],
        }
    }

    /// Quadratic form `xi^T M xi`.
    pub fn quad(&self, xi: &Pt) -> f64 {
        let mut s = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                s += self.m[i][j] * xi[i] * xi[j];
            }
        }
        s
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                s += self.m[i][j] * self.m[i][j];
            }
        }
        s.sqrt()
    }

    pub fn to_na(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.k, self.k, |i, j| self.m[i][j])
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .to_na()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Least-squares line fit `y ~ a + b x`; returns `(slope, intercept, rms residual)`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let res = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / n;
    (slope, intercept, res.sqrt())
}

/// One classical fourth-order step for `x' = v(x)`.
pub fn rk4_step<F: Fn(&Pt) -> Pt>(v: &F, x: &Pt, h: f64, k: usize) -> Pt {
    let k1 = v(x);
    let k2 = v(&axpy(x, &k1, h / 2.0, k));
    let k3 = v(&axpy(x, &k2, h / 2.0, k));
    let k4 = v(&axpy(x, &k3, h, k));
    let mut out = *x;
    for i in 0..k {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy(x: &Pt, d: &Pt, a: f64, k: usize) -> Pt {
    let mut out = *x;
    for i in 0..k {
        out[i] += a * d[i];
    }
    out
}

/// Local extremum refinement: starting from `x0` with grid step `step`,
/// scan the `3^k` neighborhood at halved steps for `rounds` rounds.
/// Keeps iterates inside `domain`. Returns the refined argopt and value.
pub fn refine_extremum<F: Fn(&Pt) -> f64>(
    f: &F,
    domain: &BoxDomain,
    x0: Pt,
    step: f64,
    minimize: bool,
    rounds: usize,
) -> (Pt, f64) {
    let k = domain.dim();
    let mut best = x0;
    let mut best_v = f(&x0);
    let mut h = step;
    for _ in 0..rounds {
        h *= 0.5;
        let mut improved = true;
        while improved {
            improved = false;
            let center = best;
            let mut offs = vec![0i32; k];
            'outer: loop {
                let mut cand = center;
                for i in 0..k {
                    cand[i] += offs[i] as f64 * h;
                }
                let mut arr = [0.0; MAX_PARAM_DIM];
                arr[..k].copy_from_slice(&cand[..k]);
                domain.clamp(&mut arr[..k]);
                let v = f(&arr);
                let better = if minimize { v < best_v } else { v > best_v };
                if better {
                    best_v = v;
                    best = arr;
                    improved = true;
                }
                let mut axis = 0;
                loop {
                    if axis == k {
                        break 'outer;
                    }
                    offs[axis] += 1;
                    if offs[axis] <= 1 {
                        break;
                    }
                    offs[axis] = -1;
                    axis += 1;
                }
            }
        }
    }
    (best, best_v)
}

// ---------------------------------------------------------------------------
// Morton codes for dyadic cells
// ---------------------------------------------------------------------------

/// Interleave the low `level` bits of `coords[0..k]` into a Morton code.
/// Bit `b` of coordinate `i` lands at position `b * k + i`, so truncating
/// the lowest `k * d` bits coarsens the cell by `d` dyadic levels while
/// preserving sort order.
pub fn morton_encode(coords: &[u32], level: u32) -> u64 {
    let k = coords.len();
    debug_assert!(k as u32 * level <= 64);
    let mut code = 0u64;
    for b in 0..level {
        for (i, &c) in coords.iter().enumerate() {
            let bit = (c >> b) & 1;
            code |= (bit as u64) << (b as usize * k + i);
        }
    }
    code
}

pub fn morton_decode(code: u64, k: usize, level: u32) -> Vec<u32> {
    let mut coords = vec![0u32; k];
    for b in 0..level {
        for (i, c) in coords.iter_mut().enumerate() {
            let bit = (code >> (b as usize * k + i)) & 1;
            *c |= (bit as u32) << b;
        }
    }
    coords
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn morton_roundtrip_and_order() {
        let level = 5;
        for k in 1..=4usize {
            let mut codes = Vec::new();
            for raw in 0..200u32 {
                let coords: Vec<u32> = (0..k).map(|i| (raw * (i as u32 + 7)) % 32).collect();
                let code = morton_encode(&coords, level);
                assert_eq!(morton_decode(code, k, level), coords);
                codes.push(code);
            }
            // coarsening by shift matches coordinate halving
            for &c in &codes {
                let coarse = c >> k;
                let fine = morton_decode(c, k, level);
                let halved: Vec<u32> = fine.iter().map(|x| x / 2).collect();
                assert_eq!(morton_decode(coarse, k, level - 1), halved);
            }
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = Grid::new(BoxDomain::unit(2), 5);
        let pts: Vec<Pt> = g.points().collect();
        assert_eq!(pts.len(), 25);
        assert_eq!(pts[0][..2], [0.0, 0.0]);
        assert_eq!(pts[24][..2], [1.0, 1.0]);
    }

    #[test]
    fn slope_fit_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (s, b, r) = least_squares_slope(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn sphere_net_unit_norm() {
        for k in 1..=3 {
            for d in sphere_net(k) {
                assert!((norm(&d[..k]) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rk4_exponential() {
        // x' = x, one unit of time in 100 steps
        let v = |x: &Pt| -> Pt { [x[0], 0.0, 0.0] };
        let mut x = pt(&[1.0]);
        for _ in 0..100 {
            x = rk4_step(&v, &x, 0.01, 1);
        }
        assert!((x[0] - std::f64::consts::E).abs() < 1e-9);
    }
}
