//! Homogeneous self-dual embedding interior point engine.
//!
//! Solves `min c'x  s.t.  A x = b,  G x + s = h,  s in K` with `K` a product
//! of a nonnegative orthant and second-order cones. A solution
//! `(x, y, z, s, tau, kappa)` of the embedding
//!
//! ```text
//!   A'y + G'z + c tau = 0
//!   A x - b tau       = 0
//!   G x + s - h tau   = 0
//!   kappa + c'x + b'y + h'z = 0,     s in K, z in K, tau, kappa >= 0
//! ```
//!
//! recovers either an optimal primal-dual pair (`tau > 0`) or an
//! infeasibility certificate (`kappa > 0`). Search directions are
//! Nesterov-Todd scaled Newton steps with a Mehrotra predictor-corrector;
//! each step reduces to one dense Cholesky factorization of
//! `B = G' W^{-2} G` assembled from sparse constraint rows.

use super::{Constraint, SocpProblem, SolveStatus};
use crate::linalg::{cholesky_in_place, cholesky_solve};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 200;

const STEP_DAMPING: f64 = 0.99;
const MIN_STEP: f64 = 1e-13;

type SparseRow = Vec<(usize, f64)>;

/// Standard conic form assembled from a [`SocpProblem`].
pub(super) struct ConicData {
    n: usize,
    c: Vec<f64>,
    a_eq: Vec<SparseRow>,
    b_eq: Vec<f64>,
    g: Vec<SparseRow>,
    h: Vec<f64>,
    /// leading nonnegative rows of the conic block
    l: usize,
    /// dimensions of the second-order cone blocks following the orthant
    soc_dims: Vec<usize>,
    data_norm: f64,
}

pub(super) struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl ConicData {
    pub(super) fn from_problem(p: &SocpProblem) -> Self {
        let n = p.num_vars();
        let mut a_eq = Vec::new();
        let mut b_eq = Vec::new();
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut soc_dims = Vec::new();

        let to_sparse = |coeffs: &ndarray::Array1<f64>| -> SparseRow {
            coeffs.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect()
        };

        // orthant rows first
        for con in p.constraints() {
            match con {
                Constraint::Inequality { coeffs, rhs } => {
                    g.push(to_sparse(coeffs));
                    h.push(*rhs);
                }
                Constraint::Box { var, lower, upper } => {
                    g.push(vec![(*var, -1.0)]);
                    h.push(-lower);
                    g.push(vec![(*var, 1.0)]);
                    h.push(*upper);
                }
                _ => {}
            }
        }
        let l = g.len();

        for con in p.constraints() {
            match con {
                Constraint::Equality { coeffs, rhs } => {
                    a_eq.push(to_sparse(coeffs));
                    b_eq.push(*rhs);
                }
                Constraint::SecondOrderCone { a, b, c, d } => {
                    // s_0 = c'x + d, s_{1:} = A x + b
                    g.push(c.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, -v)).collect());
                    h.push(*d);
                    for i in 0..a.nrows() {
                        g.push(
                            a.row(i)
                                .iter()
                                .enumerate()
                                .filter(|(_, &v)| v != 0.0)
                                .map(|(j, &v)| (j, -v))
                                .collect(),
                        );
                        h.push(b[i]);
                    }
                    soc_dims.push(a.nrows() + 1);
                }
                _ => {}
            }
        }

        let mut data_norm_sq = 0.0;
        for row in a_eq.iter().chain(g.iter()) {
            for &(_, v) in row {
                data_norm_sq += v * v;
            }
        }
        ConicData {
            n,
            c: p.objective().to_vec(),
            a_eq,
            b_eq,
            g,
            h,
            l,
            soc_dims,
            data_norm: data_norm_sq.sqrt().max(1.0),
        }
    }

    fn m(&self) -> usize {
        self.g.len()
    }

    fn p(&self) -> usize {
        self.a_eq.len()
    }

    /// barrier degree: orthant rows plus one per second-order cone
    fn degree(&self) -> f64 {
        (self.l + self.soc_dims.len()) as f64
    }

    fn g_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.g.iter().enumerate() {
            out[i] = sparse_dot(row, x);
        }
    }

    fn gt_mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, row) in self.g.iter().enumerate() {
            sparse_axpy(row, v[i], out);
        }
    }

    fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.a_eq.iter().enumerate() {
            out[i] = sparse_dot(row, x);
        }
    }

    fn at_mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, row) in self.a_eq.iter().enumerate() {
            sparse_axpy(row, v[i], out);
        }
    }
}

fn sparse_dot(row: &SparseRow, x: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * x[j]).sum()
}

fn sparse_axpy(row: &SparseRow, coef: f64, out: &mut [f64]) {
    for &(j, v) in row {
        out[j] += coef * v;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// ---------------------------------------------------------------------------
// Cone and Jordan-algebra operations
// ---------------------------------------------------------------------------

/// Nesterov-Todd scaling of one second-order cone block: `W = eta * M(wbar)`
/// with `det(wbar) = wbar_0^2 - ||wbar_1||^2 = 1`.
struct SocScaling {
    eta: f64,
    wbar: Vec<f64>,
}

struct Scaling {
    /// orthant: `W^2` diagonal `s_i / z_i`
    w2_diag: Vec<f64>,
    soc: Vec<SocScaling>,
    /// scaled point `lambda = W z = W^{-1} s` over the whole cone
    lambda: Vec<f64>,
}

/// `M(wbar) v` for one block; `M = [w0, w1'; w1, I + w1 w1'/(1+w0)]`.
fn m_mul(wbar: &[f64], v: &[f64], out: &mut [f64]) {
    let w0 = wbar[0];
    let dot1: f64 = wbar[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
    out[0] = w0 * v[0] + dot1;
    let coef = v[0] + dot1 / (1.0 + w0);
    for i in 1..v.len() {
        out[i] = v[i] + coef * wbar[i];
    }
}

fn soc_det(v: &[f64]) -> f64 {
    let tail: f64 = v[1..].iter().map(|x| x * x).sum();
    v[0] * v[0] - tail
}

impl Scaling {
    fn compute(data: &ConicData, s: &[f64], z: &[f64]) -> Self {
        let l = data.l;
        let mut w2_diag = vec![0.0; l];
        let mut lambda = vec![0.0; data.m()];
        for i in 0..l {
            w2_diag[i] = s[i] / z[i];
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut soc = Vec::with_capacity(data.soc_dims.len());
        let mut off = l;
        for &dim in &data.soc_dims {
            let sb = &s[off..off + dim];
            let zb = &z[off..off + dim];
            let sdet = soc_det(sb).max(f64::MIN_POSITIVE);
            let zdet = soc_det(zb).max(f64::MIN_POSITIVE);
            let (ss, zs) = (sdet.sqrt(), zdet.sqrt());
            let inner: f64 = sb[0] * zb[0] / (ss * zs)
                + sb[1..].iter().zip(&zb[1..]).map(|(a, b)| a * b / (ss * zs)).sum::<f64>();
            let gamma = ((1.0 + inner) / 2.0).sqrt();
            // wbar = (sbar + J zbar) / (2 gamma)
            let mut wbar = vec![0.0; dim];
            wbar[0] = (sb[0] / ss + zb[0] / zs) / (2.0 * gamma);
            for i in 1..dim {
                wbar[i] = (sb[i] / ss - zb[i] / zs) / (2.0 * gamma);
            }
            let eta = (sdet / zdet).powf(0.25);
            // lambda = eta * M(wbar) z
            let mut lam = vec![0.0; dim];
            m_mul(&wbar, zb, &mut lam);
            for (dst, v) in lambda[off..off + dim].iter_mut().zip(&lam) {
                *dst = eta * v;
            }
            soc.push(SocScaling { eta, wbar });
            off += dim;
        }
        Scaling { w2_diag, soc, lambda }
    }

    /// `W v`
    fn w_mul(&self, data: &ConicData, v: &[f64], out: &mut [f64]) {
        for i in 0..data.l {
            out[i] = self.w2_diag[i].sqrt() * v[i];
        }
        let mut off = data.l;
        for (blk, &dim) in self.soc.iter().zip(&data.soc_dims) {
            m_mul(&blk.wbar, &v[off..off + dim], &mut out[off..off + dim]);
            for o in &mut out[off..off + dim] {
                *o *= blk.eta;
            }
            off += dim;
        }
    }

    /// `W^{-1} v`; uses `M(wbar)^{-1} = M(J wbar)`.
    fn w_inv_mul(&self, data: &ConicData, v: &[f64], out: &mut [f64]) {
        for i in 0..data.l {
            out[i] = v[i] / self.w2_diag[i].sqrt();
        }
        let mut off = data.l;
        let mut q = Vec::new();
        for (blk, &dim) in self.soc.iter().zip(&data.soc_dims) {
            q.clear();
            q.extend_from_slice(&blk.wbar);
            for x in &mut q[1..] {
                *x = -*x;
            }
            m_mul(&q, &v[off..off + dim], &mut out[off..off + dim]);
            for o in &mut out[off..off + dim] {
                *o /= blk.eta;
            }
            off += dim;
        }
    }

    /// `W^{-2} v = eta^{-2} (2 q (q.v) - J v)` with `q = J wbar`.
    fn w2_inv_mul(&self, data: &ConicData, v: &[f64], out: &mut [f64]) {
        for i in 0..data.l {
            out[i] = v[i] / self.w2_diag[i];
        }
        let mut off = data.l;
        for (blk, &dim) in self.soc.iter().zip(&data.soc_dims) {
            let w = &blk.wbar;
            let vb = &v[off..off + dim];
            // q.v with q = (w0, -w1)
            let qv = w[0] * vb[0] - w[1..].iter().zip(&vb[1..]).map(|(a, b)| a * b).sum::<f64>();
            let inv_eta2 = 1.0 / (blk.eta * blk.eta);
            out[off] = inv_eta2 * (2.0 * qv * w[0] - vb[0]);
            for i in 1..dim {
                out[off + i] = inv_eta2 * (2.0 * qv * (-w[i]) + vb[i]);
            }
            off += dim;
        }
    }

    /// `W^2 v = eta^2 (2 wbar (wbar.v) - J v)`.
    fn w2_mul(&self, data: &ConicData, v: &[f64], out: &mut [f64]) {
        for i in 0..data.l {
            out[i] = v[i] * self.w2_diag[i];
        }
        let mut off = data.l;
        for (blk, &dim) in self.soc.iter().zip(&data.soc_dims) {
            let w = &blk.wbar;
            let vb = &v[off..off + dim];
            let wv: f64 = w.iter().zip(vb).map(|(a, b)| a * b).sum();
            let eta2 = blk.eta * blk.eta;
            out[off] = eta2 * (2.0 * wv * w[0] - vb[0]);
            for i in 1..dim {
                out[off + i] = eta2 * (2.0 * wv * w[i] + vb[i]);
            }
            off += dim;
        }
    }
}

/// Jordan product `u o v` over the composite cone.
fn jordan_prod(data: &ConicData, u: &[f64], v: &[f64], out: &mut [f64]) {
    for i in 0..data.l {
        out[i] = u[i] * v[i];
    }
    let mut off = data.l;
    for &dim in &data.soc_dims {
        let ub = &u[off..off + dim];
        let vb = &v[off..off + dim];
        out[off] = ub.iter().zip(vb).map(|(a, b)| a * b).sum();
        for i in 1..dim {
            out[off + i] = ub[0] * vb[i] + vb[0] * ub[i];
        }
        off += dim;
    }
}

/// Solves `lambda o u = d` for `u`.
fn jordan_div(data: &ConicData, lambda: &[f64], d: &[f64], out: &mut [f64]) {
    for i in 0..data.l {
        out[i] = d[i] / lambda[i];
    }
    let mut off = data.l;
    for &dim in &data.soc_dims {
        let lb = &lambda[off..off + dim];
        let db = &d[off..off + dim];
        let det = soc_det(lb);
        let l1d1: f64 = lb[1..].iter().zip(&db[1..]).map(|(a, b)| a * b).sum();
        let u0 = (lb[0] * db[0] - l1d1) / det;
        out[off] = u0;
        for i in 1..dim {
            out[off + i] = (db[i] - u0 * lb[i]) / lb[0];
        }
        off += dim;
    }
}

/// Minimum cone eigenvalue of `v` (positive iff strictly interior).
fn min_eig(data: &ConicData, v: &[f64]) -> f64 {
    let mut me = f64::INFINITY;
    for i in 0..data.l {
        me = me.min(v[i]);
    }
    let mut off = data.l;
    for &dim in &data.soc_dims {
        let tail: f64 = v[off + 1..off + dim].iter().map(|x| x * x).sum::<f64>().sqrt();
        me = me.min(v[off] - tail);
        off += dim;
    }
    me
}

/// Adds `amount` times the cone identity element.
fn add_identity(data: &ConicData, v: &mut [f64], amount: f64) {
    for i in 0..data.l {
        v[i] += amount;
    }
    let mut off = data.l;
    for &dim in &data.soc_dims {
        v[off] += amount;
        off += dim;
    }
}

/// Largest step `alpha` with `u + alpha d` staying in the cone (up to `cap`).
fn max_step(data: &ConicData, u: &[f64], d: &[f64], cap: f64) -> f64 {
    let mut alpha = cap;
    for i in 0..data.l {
        if d[i] < 0.0 {
            alpha = alpha.min(-u[i] / d[i]);
        }
    }
    let mut off = data.l;
    for &dim in &data.soc_dims {
        let ub = &u[off..off + dim];
        let db = &d[off..off + dim];
        let a: f64 = db[0] * db[0] - db[1..].iter().map(|x| x * x).sum::<f64>();
        let b = 2.0
            * (ub[0] * db[0] - ub[1..].iter().zip(&db[1..]).map(|(x, y)| x * y).sum::<f64>());
        let c0: f64 = soc_det(ub).max(0.0);
        // roots of a t^2 + b t + c0 = 0; c0 >= 0 since u is in the cone
        let root = if a.abs() < 1e-300 {
            if b < 0.0 {
                Some(-c0 / b)
            } else {
                None
            }
        } else {
            let disc = b * b - 4.0 * a * c0;
            if disc < 0.0 {
                None
            } else {
                let sq = disc.sqrt();
                let q = -0.5 * (b + b.signum() * sq);
                let (r1, r2) = if b == 0.0 {
                    let r = (sq / (2.0 * a)).abs();
                    (-r, r)
                } else {
                    (q / a, if q != 0.0 { c0 / q } else { 0.0 })
                };
                let mut best = f64::INFINITY;
                for r in [r1, r2] {
                    if r > 0.0 && r < best {
                        best = r;
                    }
                }
                if best.is_finite() {
                    Some(best)
                } else {
                    None
                }
            }
        };
        if let Some(r) = root {
            alpha = alpha.min(r);
        }
        off += dim;
    }
    alpha
}

// ---------------------------------------------------------------------------
// KKT factorization: B = G' W^{-2} G, Schur complement for equalities
// ---------------------------------------------------------------------------

struct KktFactor {
    /// Cholesky factor of `B + reg I`
    b_chol: Vec<f64>,
    /// `B^{-1} A'` stored column-wise (n x p)
    binv_at: Vec<f64>,
    /// Cholesky factor of the Schur complement `A B^{-1} A'`
    schur_chol: Vec<f64>,
}

fn assemble_b(data: &ConicData, scaling: &Scaling, b: &mut [f64]) {
    let n = data.n;
    b.iter_mut().for_each(|x| *x = 0.0);
    // orthant rows: weight z_i / s_i
    for i in 0..data.l {
        let w = 1.0 / scaling.w2_diag[i];
        let row = &data.g[i];
        for &(j1, v1) in row {
            let coef = w * v1;
            for &(j2, v2) in row {
                b[j1 * n + j2] += coef * v2;
            }
        }
    }
    // SOC blocks: eta^{-2} (2 u u' - g0 g0' + sum_{i>=1} gi gi'), u = G_blk' q
    let mut off = data.l;
    let mut u = vec![0.0; n];
    for (blk, &dim) in scaling.soc.iter().zip(&data.soc_dims) {
        let inv_eta2 = 1.0 / (blk.eta * blk.eta);
        u.iter_mut().for_each(|x| *x = 0.0);
        // q = (w0, -w1)
        sparse_axpy(&data.g[off], blk.wbar[0], &mut u);
        for i in 1..dim {
            sparse_axpy(&data.g[off + i], -blk.wbar[i], &mut u);
        }
        // dense rank-1 from u
        let two_inv = 2.0 * inv_eta2;
        for j1 in 0..n {
            let coef = two_inv * u[j1];
            if coef != 0.0 {
                for j2 in 0..n {
                    b[j1 * n + j2] += coef * u[j2];
                }
            }
        }
        // sparse outer products of the block rows
        for i in 0..dim {
            let sign = if i == 0 { -inv_eta2 } else { inv_eta2 };
            let row = &data.g[off + i];
            for &(j1, v1) in row {
                let coef = sign * v1;
                for &(j2, v2) in row {
                    b[j1 * n + j2] += coef * v2;
                }
            }
        }
        off += dim;
    }
}

fn factor_kkt(data: &ConicData, scaling: &Scaling) -> KktFactor {
    let n = data.n;
    let p = data.p();
    let mut b = vec![0.0; n * n];
    assemble_b(data, scaling, &mut b);
    let max_diag = (0..n).map(|i| b[i * n + i]).fold(0.0f64, f64::max);
    let mut reg = 1e-12 * (1.0 + max_diag);
    let b_chol = loop {
        let mut attempt = b.clone();
        for i in 0..n {
            attempt[i * n + i] += reg;
        }
        match cholesky_in_place(&mut attempt, n) {
            Ok(()) => break attempt,
            Err(e) => {
                reg *= 100.0;
                assert!(
                    reg.is_finite() && reg < 1e8 * (1.0 + max_diag),
                    "KKT matrix defies regularization: {e:?}, max_diag {max_diag:.3e}"
                );
            }
        }
    };
    // equality block
    let mut binv_at = vec![0.0; n * p];
    let mut schur = vec![0.0; p * p];
    if p > 0 {
        let mut col = vec![0.0; n];
        for k in 0..p {
            col.iter_mut().for_each(|x| *x = 0.0);
            sparse_axpy(&data.a_eq[k], 1.0, &mut col);
            cholesky_solve(&b_chol, n, &mut col);
            for j in 0..n {
                binv_at[j * p + k] = col[j];
            }
        }
        for r in 0..p {
            for k in 0..p {
                let mut acc = 0.0;
                for &(j, v) in &data.a_eq[r] {
                    acc += v * binv_at[j * p + k];
                }
                schur[r * p + k] = acc;
            }
        }
        let max_sd = (0..p).map(|i| schur[i * p + i]).fold(0.0f64, f64::max);
        for i in 0..p {
            schur[i * p + i] += 1e-12 * (1.0 + max_sd);
        }
        cholesky_in_place(&mut schur, p).expect("Schur complement factorization");
    }
    KktFactor { b_chol, binv_at, schur_chol: schur }
}

struct KktRhs<'a> {
    x: &'a [f64],
    y: &'a [f64],
    z: &'a [f64],
}

struct KktDir {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

/// Solves `[0 A' G'; A 0 0; G 0 -W^2] [dx dy dz] = [bx by bz]` with one
/// refinement pass.
fn kkt_solve(
    data: &ConicData,
    scaling: &Scaling,
    factor: &KktFactor,
    rhs: KktRhs<'_>,
) -> KktDir {
    let (n, p, m) = (data.n, data.p(), data.m());
    let mut dir = KktDir { x: vec![0.0; n], y: vec![0.0; p], z: vec![0.0; m] };
    let mut work_m = vec![0.0; m];
    let mut work_m2 = vec![0.0; m];
    let mut work_n = vec![0.0; n];

    let solve_once = |bx: &[f64], by: &[f64], bz: &[f64], dir: &mut KktDir| {
        // f = bx + G' W^{-2} bz
        let mut w2inv_bz = vec![0.0; m];
        scaling.w2_inv_mul(data, bz, &mut w2inv_bz);
        let mut f = vec![0.0; n];
        data.gt_mul(&w2inv_bz, &mut f);
        for j in 0..n {
            f[j] += bx[j];
        }
        let mut dx = f.clone();
        cholesky_solve(&factor.b_chol, n, &mut dx);
        let mut dy = vec![0.0; p];
        if p > 0 {
            // dy = S^{-1} (A dx0 - by)
            for r in 0..p {
                dy[r] = sparse_dot(&data.a_eq[r], &dx) - by[r];
            }
            cholesky_solve(&factor.schur_chol, p, &mut dy);
            // dx = dx0 - B^{-1} A' dy
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += factor.binv_at[j * p + k] * dy[k];
                }
                dx[j] -= acc;
            }
        }
        // dz = W^{-2} (G dx - bz)
        let mut gdx = vec![0.0; m];
        data.g_mul(&dx, &mut gdx);
        for i in 0..m {
            gdx[i] -= bz[i];
        }
        scaling.w2_inv_mul(data, &gdx, &mut dir.z);
        dir.x = dx;
        dir.y = dy;
    };

    solve_once(rhs.x, rhs.y, rhs.z, &mut dir);

    // one iterative refinement pass on the full 3-block system
    {
        let mut res_x = vec![0.0; n];
        data.gt_mul(&dir.z, &mut res_x);
        if p > 0 {
            data.at_mul(&dir.y, &mut work_n);
            for j in 0..n {
                res_x[j] += work_n[j];
            }
        }
        for j in 0..n {
            res_x[j] = rhs.x[j] - res_x[j];
        }
        let mut res_y = vec![0.0; p];
        for r in 0..p {
            res_y[r] = rhs.y[r] - sparse_dot(&data.a_eq[r], &dir.x);
        }
        data.g_mul(&dir.x, &mut work_m);
        scaling.w2_mul(data, &dir.z, &mut work_m2);
        let mut res_z = vec![0.0; m];
        for i in 0..m {
            res_z[i] = rhs.z[i] - (work_m[i] - work_m2[i]);
        }
        let mut corr = KktDir { x: vec![0.0; n], y: vec![0.0; p], z: vec![0.0; m] };
        solve_once(&res_x, &res_y, &res_z, &mut corr);
        for j in 0..n {
            dir.x[j] += corr.x[j];
        }
        for r in 0..p {
            dir.y[r] += corr.y[r];
        }
        for i in 0..m {
            dir.z[i] += corr.z[i];
        }
    }
    dir
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

pub(super) fn solve(data: &ConicData, tol: f64, max_iters: usize) -> RawSolution {
    let (n, p, m) = (data.n, data.p(), data.m());
    if m == 0 && p == 0 {
        // unconstrained linear objective: optimal at 0 only if c = 0
        let status = if data.c.iter().all(|&v| v == 0.0) {
            SolveStatus::Optimal
        } else {
            SolveStatus::Unbounded
        };
        return RawSolution { status, x: vec![0.0; n], iterations: 0 };
    }

    let nu = data.degree() + 1.0;
    let norm_b = norm(&data.b_eq).max(1.0);
    let norm_h = norm(&data.h).max(1.0);
    let norm_c = norm(&data.c).max(1.0);

    // --- initialization: W = I solves against [0; b; h] and [-c; 0; 0]
    let mut s = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut x;
    let mut y;
    {
        let unit = Scaling {
            w2_diag: vec![1.0; data.l],
            soc: data
                .soc_dims
                .iter()
                .map(|&dim| {
                    let mut wbar = vec![0.0; dim];
                    wbar[0] = 1.0;
                    SocScaling { eta: 1.0, wbar }
                })
                .collect(),
            lambda: vec![0.0; m],
        };
        let factor = factor_kkt(data, &unit);
        let zero_n = vec![0.0; n];
        let zero_m = vec![0.0; m];
        let primal = kkt_solve(
            data,
            &unit,
            &factor,
            KktRhs { x: &zero_n, y: &data.b_eq, z: &data.h },
        );
        x = primal.x;
        for i in 0..m {
            s[i] = -primal.z[i];
        }
        let me = min_eig(data, &s);
        if me <= 0.0 {
            add_identity(data, &mut s, 1.0 - me);
        }
        let neg_c: Vec<f64> = data.c.iter().map(|&v| -v).collect();
        let zero_p = vec![0.0; p];
        let dual = kkt_solve(
            data,
            &unit,
            &factor,
            KktRhs { x: &neg_c, y: &zero_p, z: &zero_m },
        );
        y = dual.y;
        z = dual.z;
        let me = min_eig(data, &z);
        if me <= 0.0 {
            add_identity(data, &mut z, 1.0 - me);
        }
    }
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let mut best_x = vec![0.0; n];
    let mut status = SolveStatus::MaxIters;
    let mut iters_used = max_iters;

    let mut gx = vec![0.0; m];
    let mut ax = vec![0.0; p];
    let mut aty = vec![0.0; n];
    let mut gtz = vec![0.0; n];

    for iter in 0..max_iters {
        // residuals of the embedding
        let mut r_x = vec![0.0; n]; // A'y + G'z + c tau
        data.gt_mul(&z, &mut gtz);
        data.at_mul(&y, &mut aty);
        for j in 0..n {
            r_x[j] = aty[j] + gtz[j] + data.c[j] * tau;
        }
        data.a_mul(&x, &mut ax);
        let mut r_y = vec![0.0; p]; // A x - b tau
        for r in 0..p {
            r_y[r] = ax[r] - data.b_eq[r] * tau;
        }
        data.g_mul(&x, &mut gx);
        let mut r_z = vec![0.0; m]; // G x + s - h tau
        for i in 0..m {
            r_z[i] = gx[i] + s[i] - data.h[i] * tau;
        }
        let cx = dot(&data.c, &x);
        let by = dot(&data.b_eq, &y);
        let hz = dot(&data.h, &z);
        let r_tau = kappa + cx + by + hz;

        // convergence metrics at the de-homogenized point
        if tau > 1e-12 {
            let inv_tau = 1.0 / tau;
            let pres = {
                let mut acc: f64 = 0.0;
                for r in 0..p {
                    acc += (ax[r] * inv_tau - data.b_eq[r]).powi(2);
                }
                let eq = acc.sqrt() / norm_b;
                let mut acc2: f64 = 0.0;
                for i in 0..m {
                    acc2 += ((gx[i] + s[i]) * inv_tau - data.h[i]).powi(2);
                }
                eq.max(acc2.sqrt() / norm_h)
            };
            let dres = {
                let mut acc: f64 = 0.0;
                for j in 0..n {
                    acc += (aty[j] * inv_tau + gtz[j] * inv_tau + data.c[j]).powi(2);
                }
                acc.sqrt() / norm_c
            };
            let pobj = cx * inv_tau;
            let dobj = -(by + hz) * inv_tau;
            let gap = (pobj - dobj).abs() / pobj.abs().min(dobj.abs()).max(1.0);
            if pres <= tol && dres <= tol && gap <= tol {
                best_x = x.iter().map(|&v| v * inv_tau).collect();
                status = SolveStatus::Optimal;
                iters_used = iter;
                break;
            }
        }

        // infeasibility certificates
        let neg_byhz = -(by + hz);
        if neg_byhz > 1e-14 {
            let mut acc: f64 = 0.0;
            for j in 0..n {
                acc += (aty[j] + gtz[j]).powi(2);
            }
            if acc.sqrt() / neg_byhz <= tol * data.data_norm {
                status = SolveStatus::Infeasible;
                iters_used = iter;
                best_x = vec![0.0; n];
                break;
            }
        }
        if -cx > 1e-14 {
            let scale = -cx;
            let mut acc: f64 = 0.0;
            for r in 0..p {
                acc += ax[r].powi(2);
            }
            for i in 0..m {
                acc += (gx[i] + s[i]).powi(2);
            }
            if acc.sqrt() / scale <= tol * data.data_norm {
                status = SolveStatus::Unbounded;
                iters_used = iter;
                best_x = vec![0.0; n];
                break;
            }
        }

        let mu = (dot(&s, &z) + tau * kappa) / nu;

        if std::env::var_os("HOLOBEAM_IPM_DEBUG").is_some() {
            eprintln!(
                "iter {iter}: mu={mu:.3e} tau={tau:.3e} kappa={kappa:.3e} min_s={:.3e} min_z={:.3e}",
                min_eig(data, &s),
                min_eig(data, &z)
            );
        }

        let scaling = Scaling::compute(data, &s, &z);
        let factor = factor_kkt(data, &scaling);

        // static direction against [-c; b; h]
        let neg_c: Vec<f64> = data.c.iter().map(|&v| -v).collect();
        let dir1 = kkt_solve(
            data,
            &scaling,
            &factor,
            KktRhs { x: &neg_c, y: &data.b_eq, z: &data.h },
        );
        let c_x1 = dot(&data.c, &dir1.x);
        let b_y1 = dot(&data.b_eq, &dir1.y);
        let h_z1 = dot(&data.h, &dir1.z);

        let mut d_s = vec![0.0; m];
        let mut ds_scaled = vec![0.0; m];
        let mut work = vec![0.0; m];

        let compute_direction = |d_s: &[f64],
                                     d_kappa: f64,
                                     ds_scaled: &mut Vec<f64>,
                                     work: &mut Vec<f64>|
         -> (KktDir, f64, f64, Vec<f64>) {
            // bz = -r_z - W (lambda \ d_s)
            jordan_div(data, &scaling.lambda, d_s, work);
            let mut w_ld = vec![0.0; m];
            scaling.w_mul(data, work, &mut w_ld);
            let mut bz = vec![0.0; m];
            for i in 0..m {
                bz[i] = -r_z[i] - w_ld[i];
            }
            let bx: Vec<f64> = r_x.iter().map(|&v| -v).collect();
            let by_rhs: Vec<f64> = r_y.iter().map(|&v| -v).collect();
            let dir2 = kkt_solve(data, &scaling, &factor, KktRhs { x: &bx, y: &by_rhs, z: &bz });
            let denom = c_x1 + b_y1 + h_z1 - kappa / tau;
            let numer =
                -r_tau - d_kappa / tau - (dot(&data.c, &dir2.x) + dot(&data.b_eq, &dir2.y) + dot(&data.h, &dir2.z));
            let d_tau = numer / denom;
            let dx: Vec<f64> = (0..n).map(|j| dir2.x[j] + d_tau * dir1.x[j]).collect();
            let dy: Vec<f64> = (0..p).map(|r| dir2.y[r] + d_tau * dir1.y[r]).collect();
            let dz: Vec<f64> = (0..m).map(|i| dir2.z[i] + d_tau * dir1.z[i]).collect();
            // W^{-1} ds = lambda \ d_s - W dz  => ds = W(lambda \ d_s) - W^2 dz
            let mut wdz = vec![0.0; m];
            scaling.w_mul(data, &dz, &mut wdz);
            for i in 0..m {
                ds_scaled[i] = work[i] - wdz[i]; // W^{-1} ds in scaled space
            }
            let mut ds = vec![0.0; m];
            scaling.w_mul(data, ds_scaled, &mut ds);
            let d_kappa_out = (d_kappa - kappa * d_tau) / tau;
            (KktDir { x: dx, y: dy, z: dz }, d_tau, d_kappa_out, ds)
        };

        // affine (predictor) direction: d_s = -lambda o lambda, d_kappa = -tau kappa
        jordan_prod(data, &scaling.lambda, &scaling.lambda, &mut d_s);
        for v in d_s.iter_mut() {
            *v = -*v;
        }
        let (dir_aff, dtau_aff, dkappa_aff, ds_aff) =
            compute_direction(&d_s.clone(), -tau * kappa, &mut ds_scaled, &mut work);

        let mut alpha_aff = max_step(data, &s, &ds_aff, f64::INFINITY);
        alpha_aff = alpha_aff.min(max_step(data, &z, &dir_aff.z, f64::INFINITY));
        if dtau_aff < 0.0 {
            alpha_aff = alpha_aff.min(-tau / dtau_aff);
        }
        if dkappa_aff < 0.0 {
            alpha_aff = alpha_aff.min(-kappa / dkappa_aff);
        }
        alpha_aff = alpha_aff.min(1.0);

        let mu_aff = {
            let mut acc = 0.0;
            for i in 0..m {
                acc += (s[i] + alpha_aff * ds_aff[i]) * (z[i] + alpha_aff * dir_aff.z[i]);
            }
            (acc + (tau + alpha_aff * dtau_aff) * (kappa + alpha_aff * dkappa_aff)) / nu
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector: d_s = sigma mu e - lambda o lambda - (W^{-1}ds_aff) o (W dz_aff)
        let mut w_dz_aff = vec![0.0; m];
        scaling.w_mul(data, &dir_aff.z, &mut w_dz_aff);
        let mut winv_ds_aff = vec![0.0; m];
        scaling.w_inv_mul(data, &ds_aff, &mut winv_ds_aff);
        let mut corr = vec![0.0; m];
        jordan_prod(data, &winv_ds_aff, &w_dz_aff, &mut corr);
        jordan_prod(data, &scaling.lambda, &scaling.lambda, &mut d_s);
        for i in 0..m {
            d_s[i] = -d_s[i] - corr[i];
        }
        add_identity(data, &mut d_s, sigma * mu);
        let d_kappa_rhs = sigma * mu - tau * kappa - dtau_aff * dkappa_aff;
        let (dir_cmb, dtau_cmb, dkappa_cmb, ds_cmb) =
            compute_direction(&d_s.clone(), d_kappa_rhs, &mut ds_scaled, &mut work);

        let mut alpha = max_step(data, &s, &ds_cmb, f64::INFINITY);
        alpha = alpha.min(max_step(data, &z, &dir_cmb.z, f64::INFINITY));
        if dtau_cmb < 0.0 {
            alpha = alpha.min(-tau / dtau_cmb);
        }
        if dkappa_cmb < 0.0 {
            alpha = alpha.min(-kappa / dkappa_cmb);
        }
        alpha = (STEP_DAMPING * alpha).min(1.0);

        if alpha < MIN_STEP {
            iters_used = iter;
            break;
        }

        for j in 0..n {
            x[j] += alpha * dir_cmb.x[j];
        }
        for r in 0..p {
            y[r] += alpha * dir_cmb.y[r];
        }
        for i in 0..m {
            z[i] += alpha * dir_cmb.z[i];
            s[i] += alpha * ds_cmb[i];
        }
        tau += alpha * dtau_cmb;
        kappa += alpha * dkappa_cmb;
    }

    if status == SolveStatus::MaxIters {
        // classify the final iterate with relaxed certificates
        let relaxed = (tol * 1e4).min(1e-4);
        let cx = dot(&data.c, &x);
        let by = dot(&data.b_eq, &y);
        let hz = dot(&data.h, &z);
        let neg_byhz = -(by + hz);
        data.at_mul(&y, &mut aty);
        data.gt_mul(&z, &mut gtz);
        if neg_byhz > 1e-14 {
            let mut acc: f64 = 0.0;
            for j in 0..n {
                acc += (aty[j] + gtz[j]).powi(2);
            }
            if acc.sqrt() / neg_byhz <= relaxed * data.data_norm {
                return RawSolution { status: SolveStatus::Infeasible, x: vec![0.0; n], iterations: iters_used };
            }
        }
        if -cx > 1e-14 && tau < 1e-8 * kappa.max(1.0) {
            return RawSolution { status: SolveStatus::Unbounded, x: vec![0.0; n], iterations: iters_used };
        }
        if tau > 1e-12 {
            best_x = x.iter().map(|&v| v / tau).collect();
        }
    }

    RawSolution { status, x: best_x, iterations: iters_used }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn demo_data() -> ConicData {
        // one nonneg row and one 3-dim SOC, 2 vars; contents are irrelevant
        // for the Jordan-algebra tests, only the layout matters
        ConicData {
            n: 2,
            c: vec![0.0; 2],
            a_eq: vec![],
            b_eq: vec![],
            g: vec![vec![(0, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, -1.0)]],
            h: vec![0.0; 4],
            l: 1,
            soc_dims: vec![3],
            data_norm: 1.0,
        }
    }

    fn interior_point(seed: u64, data: &ConicData) -> (Vec<f64>, Vec<f64>) {
        use rand::Rng;
        let mut rng = crate::rng::substream(seed, &[0]);
        let m = data.m();
        let mut s = vec![0.0; m];
        let mut z = vec![0.0; m];
        for i in 0..m {
            s[i] = rng.gen::<f64>() - 0.3;
            z[i] = rng.gen::<f64>() - 0.3;
        }
        let me_s = min_eig(data, &s);
        if me_s <= 0.1 {
            add_identity(data, &mut s, 0.2 - me_s);
        }
        let me_z = min_eig(data, &z);
        if me_z <= 0.1 {
            add_identity(data, &mut z, 0.2 - me_z);
        }
        (s, z)
    }

    #[test]
    fn nt_scaling_maps_s_and_z_to_the_same_point() {
        let data = demo_data();
        for seed in 0..20 {
            let (s, z) = interior_point(seed, &data);
            let scaling = Scaling::compute(&data, &s, &z);
            let m = data.m();
            let mut wz = vec![0.0; m];
            scaling.w_mul(&data, &z, &mut wz);
            let mut winv_s = vec![0.0; m];
            scaling.w_inv_mul(&data, &s, &mut winv_s);
            for i in 0..m {
                assert_relative_eq!(wz[i], winv_s[i], max_relative = 1e-9, epsilon = 1e-11);
                assert_relative_eq!(wz[i], scaling.lambda[i], max_relative = 1e-9, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn w_inverse_and_w2_agree_with_w() {
        let data = demo_data();
        let (s, z) = interior_point(3, &data);
        let scaling = Scaling::compute(&data, &s, &z);
        let m = data.m();
        let v: Vec<f64> = (0..m).map(|i| 0.3 * i as f64 - 0.5).collect();
        let mut wv = vec![0.0; m];
        scaling.w_mul(&data, &v, &mut wv);
        let mut back = vec![0.0; m];
        scaling.w_inv_mul(&data, &wv, &mut back);
        for i in 0..m {
            assert_relative_eq!(back[i], v[i], max_relative = 1e-10, epsilon = 1e-12);
        }
        let mut w2v = vec![0.0; m];
        scaling.w2_mul(&data, &v, &mut w2v);
        let mut ww = vec![0.0; m];
        scaling.w_mul(&data, &wv, &mut ww);
        for i in 0..m {
            assert_relative_eq!(w2v[i], ww[i], max_relative = 1e-10, epsilon = 1e-12);
        }
        let mut w2inv = vec![0.0; m];
        scaling.w2_inv_mul(&data, &w2v, &mut w2inv);
        for i in 0..m {
            assert_relative_eq!(w2inv[i], v[i], max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn jordan_div_inverts_prod() {
        let data = demo_data();
        let (lambda, _) = interior_point(7, &data);
        let m = data.m();
        let d: Vec<f64> = (0..m).map(|i| 0.25 * i as f64 - 0.4).collect();
        let mut u = vec![0.0; m];
        jordan_div(&data, &lambda, &d, &mut u);
        let mut back = vec![0.0; m];
        jordan_prod(&data, &lambda, &u, &mut back);
        for i in 0..m {
            assert_relative_eq!(back[i], d[i], max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn max_step_keeps_iterates_inside() {
        let data = demo_data();
        for seed in 0..30 {
            let (u, d_raw) = interior_point(100 + seed, &data);
            // turn d into a proper direction (can point anywhere)
            let d: Vec<f64> = d_raw.iter().map(|&v| v - 0.8).collect();
            let alpha = max_step(&data, &u, &d, 10.0);
            // strictly inside just before the boundary
            let probe: Vec<f64> =
                u.iter().zip(&d).map(|(&a, &b)| a + 0.999 * alpha.min(10.0) * b).collect();
            assert!(min_eig(&data, &probe) >= -1e-9, "left the cone at seed {seed}");
        }
    }
}
