//! Per-slot transmit power minimization over the precoding matrix under
//! per-user SINR constraints.
//!
//! With the beampatterns frozen, write `D = diag(alpha) Theta` and
//! `g_u = D^H h_u`. The problem
//!
//! ```text
//! minimize    sum_u ||D w_u||^2
//! subject to  |g_u^H w_u|^2 / (sum_{u' != u} |g_u^H w_u'|^2 + sigma_bar_u^2)
//!                 >= eta_u = 2^{delta_u} - 1
//! ```
//!
//! turns into a second-order cone program: the stream inner product
//! `g_u^H w_u` can be rotated real-positive without changing any constraint,
//! after which each SINR constraint reads
//! `(1/sqrt(eta_u sigma_bar_u^2)) Re(g_u^H w_u) >= || (cross terms, 1) ||`.
//! The power objective enters through an epigraph on the stacked norm with a
//! Cholesky factor of `D^H D`.
//!
//! [`zf_precoder`] is the zero-forcing reference: channel pseudo-inverse
//! directions with per-stream powers meeting every threshold with equality.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::linalg::{cholesky_complex, cholesky_solve_complex};
use crate::socp::{
    realify_matrix, solve_socp, stack_complex_vector, unstack_complex_vector, SocpProblem,
    SolveStatus,
};
use crate::system::{effective_rx_channel, BeampatternState, Precoder, QosSpec};

pub use crate::system::Precoder as PrecoderMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum PrecoderError {
    #[error("QoS targets are unreachable for this channel (certified infeasible)")]
    Infeasible,
    #[error("effective channel matrix is rank deficient, zero-forcing undefined")]
    RankDeficientZf,
    #[error("instance is degenerate: {0}")]
    DegenerateInstance(&'static str),
    #[error("conic solver stopped with status {0:?}")]
    Solver(SolveStatus),
}

/// Frozen per-slot data of the short-term problem.
#[derive(Debug, Clone)]
pub struct ShortTermInstance {
    /// `D = diag(alpha) Theta`, N x K.
    pub d_matrix: Array2<Complex64>,
    /// Effective receive channels `h_u`, length N each.
    pub eff_channels: Vec<Array1<Complex64>>,
    /// SINR targets `2^{delta_u} - 1`.
    pub eta: Array1<f64>,
    /// Per-user noise deviations `||v_u|| sigma`.
    pub sigma_bar: Array1<f64>,
}

impl ShortTermInstance {
    pub fn num_users(&self) -> usize {
        self.eff_channels.len()
    }

    pub fn num_feeds(&self) -> usize {
        self.d_matrix.ncols()
    }

    /// `g_u = D^H h_u`, the effective feed-domain channel of user `u`.
    pub fn feed_channel(&self, u: usize) -> Array1<Complex64> {
        let (n, k) = self.d_matrix.dim();
        let h = &self.eff_channels[u];
        Array1::from_shape_fn(k, |kk| {
            let mut acc = Complex64::new(0.0, 0.0);
            for nn in 0..n {
                acc += self.d_matrix[(nn, kk)].conj() * h[nn];
            }
            acc
        })
    }

    /// Transmit power `sum_u ||D w_u||^2` of a candidate precoder.
    pub fn power(&self, precoder: &Precoder) -> f64 {
        let dw = self.d_matrix.dot(&precoder.w);
        dw.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Achieved SINR of user `u` under a candidate precoder.
    pub fn sinr(&self, precoder: &Precoder, u: usize) -> f64 {
        let g = self.feed_channel(u);
        let mut signal = 0.0;
        let mut interference = 0.0;
        for up in 0..self.num_users() {
            let amp: Complex64 = g
                .iter()
                .zip(precoder.w.column(up).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            if up == u {
                signal = amp.norm_sqr();
            } else {
                interference += amp.norm_sqr();
            }
        }
        signal / (interference + self.sigma_bar[u] * self.sigma_bar[u])
    }
}

/// Builds the short-term instance for one slot from the long-term state, the
/// phase couplings, the per-user channel realizations and the QoS spec.
pub fn build_instance(
    state: &BeampatternState,
    theta: &Array2<Complex64>,
    beta: &Array1<Complex64>,
    channels: &[ChannelRealization],
    qos: &QosSpec,
) -> ShortTermInstance {
    let num_users = channels.len();
    assert_eq!(state.v.ncols(), num_users, "one receive pattern per user");
    assert_eq!(qos.delta.len(), num_users, "one QoS threshold per user");
    let mut d_matrix = theta.clone();
    for (n, mut row) in d_matrix.rows_mut().into_iter().enumerate() {
        let a = state.alpha[n];
        row.mapv_inplace(|z| z * a);
    }
    let eff_channels = (0..num_users)
        .map(|u| effective_rx_channel(u, state, beta, &channels[u]))
        .collect();
    let sigma = qos.sigma2.sqrt();
    let sigma_bar = Array1::from_shape_fn(num_users, |u| {
        let norm: f64 = state.v.column(u).iter().map(|x| x * x).sum::<f64>().sqrt();
        norm * sigma
    });
    ShortTermInstance { d_matrix, eff_channels, eta: qos.sinr_targets(), sigma_bar }
}

/// Solves the per-slot power minimization. On success every SINR constraint
/// holds and is active within solver accuracy; infeasible QoS combinations
/// are reported as [`PrecoderError::Infeasible`], never as a violating
/// precoder.
pub fn solve_precoder(instance: &ShortTermInstance) -> Result<Precoder, PrecoderError> {
    solve_precoder_with(instance, 1e-8, 200)
}

pub fn solve_precoder_with(
    instance: &ShortTermInstance,
    tol: f64,
    max_iters: usize,
) -> Result<Precoder, PrecoderError> {
    let k = instance.num_feeds();
    let num_users = instance.num_users();
    if instance.sigma_bar.iter().any(|&s| !(s > 0.0)) {
        return Err(PrecoderError::DegenerateInstance("sigma_bar must be positive"));
    }
    if instance.eta.iter().all(|&e| e == 0.0) {
        return Ok(Precoder::zeros(k, num_users));
    }

    let gs: Vec<Array1<Complex64>> = (0..num_users).map(|u| instance.feed_channel(u)).collect();
    for u in 0..num_users {
        let g_norm: f64 = gs[u].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if instance.eta[u] > 0.0 && g_norm == 0.0 {
            return Err(PrecoderError::Infeasible);
        }
    }

    // Cholesky factor of D^H D so the power enters as ||R w||; a vanishing
    // ridge keeps the factorization alive when alpha zeroes out rows of D.
    let (n, _) = instance.d_matrix.dim();
    let mut gram = Array2::<Complex64>::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for row in 0..n {
                acc += instance.d_matrix[(row, a)].conj() * instance.d_matrix[(row, b)];
            }
            gram[(a, b)] = acc;
        }
    }
    let trace: f64 = (0..k).map(|i| gram[(i, i)].re).sum();
    let r_factor = match cholesky_complex(&gram) {
        Ok(l) => l,
        Err(_) => {
            let mut ridged = gram.clone();
            let ridge = 1e-12 * (trace / k as f64).max(f64::MIN_POSITIVE);
            for i in 0..k {
                ridged[(i, i)] += Complex64::new(ridge, 0.0);
            }
            cholesky_complex(&ridged)
                .map_err(|_| PrecoderError::DegenerateInstance("D^H D is not factorizable"))?
        }
    };
    // R = L^H so that ||R w||^2 = w^H D^H D w
    let r_upper = {
        let mut r = r_factor.t().to_owned();
        r.mapv_inplace(|z| z.conj());
        r
    };

    // Variable scaling keeps the cone data near unity: w = w_scale * w_tilde,
    // objective rows divided by obj_scale.
    let mut scale_candidates: Vec<f64> = (0..num_users)
        .filter(|&u| instance.eta[u] > 0.0)
        .map(|u| {
            let g_norm: f64 = gs[u].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            instance.sigma_bar[u] * instance.eta[u].sqrt() / g_norm
        })
        .collect();
    scale_candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let w_scale = scale_candidates[scale_candidates.len() / 2].max(f64::MIN_POSITIVE);
    let obj_scale = (trace / k as f64).sqrt().max(f64::MIN_POSITIVE);

    // variables: stacked re/im of each w_tilde_u, then the epigraph t
    let nv = 2 * k * num_users + 1;
    let t_idx = nv - 1;
    let mut problem = SocpProblem::new(nv);
    let mut cost = Array1::zeros(nv);
    cost[t_idx] = 1.0;
    problem.minimize(cost);

    // power epigraph: || blockdiag(realify(R / obj_scale)) x_w || <= t
    {
        let r_scaled = r_upper.mapv(|z| z / obj_scale);
        let r_real = realify_matrix(&r_scaled);
        let mut a = Array2::zeros((2 * k * num_users, nv));
        for u in 0..num_users {
            for i in 0..2 * k {
                for j in 0..2 * k {
                    a[(u * 2 * k + i, u * 2 * k + j)] = r_real[(i, j)];
                }
            }
        }
        let mut t_row = Array1::zeros(nv);
        t_row[t_idx] = 1.0;
        problem.add_soc(a, Array1::zeros(2 * k * num_users), t_row, 0.0);
    }

    // one SINR cone per user with a positive target
    for u in 0..num_users {
        if instance.eta[u] == 0.0 {
            continue;
        }
        let sb = instance.sigma_bar[u];
        let g_re = stack_complex_vector(&gs[u]);
        let g_im = stack_complex_vector(&gs[u].mapv(|z| z * Complex64::i()));
        let rows = 2 * (num_users - 1) + 1;
        let mut a = Array2::zeros((rows, nv));
        let mut b = Array1::zeros(rows);
        let mut row = 0;
        for up in 0..num_users {
            if up == u {
                continue;
            }
            for j in 0..2 * k {
                a[(row, up * 2 * k + j)] = w_scale / sb * g_re[j];
                a[(row + 1, up * 2 * k + j)] = w_scale / sb * g_im[j];
            }
            row += 2;
        }
        b[rows - 1] = 1.0;
        let mut c = Array1::zeros(nv);
        let lead = w_scale / (instance.eta[u].sqrt() * sb);
        for j in 0..2 * k {
            c[u * 2 * k + j] = lead * g_re[j];
        }
        problem.add_soc(a, b, c, 0.0);
    }

    let sol = solve_socp(&problem, tol, max_iters);
    match sol.status {
        SolveStatus::Optimal => {
            let mut w = Array2::<Complex64>::zeros((k, num_users));
            for u in 0..num_users {
                let block = Array1::from_iter(
                    (0..2 * k).map(|j| sol.x[u * 2 * k + j] * w_scale),
                );
                let col = unstack_complex_vector(&block);
                for i in 0..k {
                    w[(i, u)] = col[i];
                }
            }
            Ok(Precoder { w })
        }
        SolveStatus::Infeasible => Err(PrecoderError::Infeasible),
        other => Err(PrecoderError::Solver(other)),
    }
}

/// Zero-forcing precoder: right pseudo-inverse directions of the effective
/// feed-domain channel matrix, columns scaled so each user's SINR equals the
/// target exactly (interference is nulled, so per-user scaling is closed
/// form).
pub fn zf_precoder(instance: &ShortTermInstance) -> Result<Precoder, PrecoderError> {
    let k = instance.num_feeds();
    let num_users = instance.num_users();
    if instance.sigma_bar.iter().any(|&s| !(s > 0.0)) {
        return Err(PrecoderError::DegenerateInstance("sigma_bar must be positive"));
    }
    let gs: Vec<Array1<Complex64>> = (0..num_users).map(|u| instance.feed_channel(u)).collect();

    // Gram[i][j] = g_i^H g_j ; rank deficiency shows up as a tiny pivot
    let mut gram = Array2::<Complex64>::zeros((num_users, num_users));
    for i in 0..num_users {
        for j in 0..num_users {
            gram[(i, j)] = gs[i].iter().zip(gs[j].iter()).map(|(a, b)| a.conj() * b).sum();
        }
    }
    let l = cholesky_complex(&gram).map_err(|_| PrecoderError::RankDeficientZf)?;
    let max_piv = (0..num_users).map(|i| l[(i, i)].re).fold(0.0f64, f64::max);
    let min_piv = (0..num_users).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
    if min_piv < 1e-8 * max_piv {
        return Err(PrecoderError::RankDeficientZf);
    }

    let mut w = Array2::<Complex64>::zeros((k, num_users));
    for u in 0..num_users {
        if instance.eta[u] == 0.0 {
            continue;
        }
        let mut e = Array1::<Complex64>::zeros(num_users);
        e[u] = Complex64::new(1.0, 0.0);
        let coeffs = cholesky_solve_complex(&l, &e);
        // unscaled column: G^H coeffs; its stream gain g_u^H col = 1
        let mut col = Array1::<Complex64>::zeros(k);
        for up in 0..num_users {
            for i in 0..k {
                col[i] += gs[up][i] * coeffs[up];
            }
        }
        let scale = instance.eta[u].sqrt() * instance.sigma_bar[u];
        for i in 0..k {
            w[(i, u)] = col[i] * scale;
        }
    }
    Ok(Precoder { w })
}

/// Zero-forcing with a ridge on the Gram matrix; used as the documented
/// fallback when a training sample's exact problem is infeasible. Columns are
/// scaled to match each user's signal amplitude target, ignoring the residual
/// interference the ridge leaves behind.
pub fn zf_precoder_regularized(instance: &ShortTermInstance, ridge_rel: f64) -> Precoder {
    let k = instance.num_feeds();
    let num_users = instance.num_users();
    let gs: Vec<Array1<Complex64>> = (0..num_users).map(|u| instance.feed_channel(u)).collect();
    let mut gram = Array2::<Complex64>::zeros((num_users, num_users));
    for i in 0..num_users {
        for j in 0..num_users {
            gram[(i, j)] = gs[i].iter().zip(gs[j].iter()).map(|(a, b)| a.conj() * b).sum();
        }
    }
    let trace: f64 = (0..num_users).map(|i| gram[(i, i)].re).sum();
    let ridge = ridge_rel * (trace / num_users as f64).max(f64::MIN_POSITIVE);
    for i in 0..num_users {
        gram[(i, i)] += Complex64::new(ridge, 0.0);
    }
    let l = match cholesky_complex(&gram) {
        Ok(l) => l,
        Err(_) => return Precoder::zeros(k, num_users),
    };
    let mut w = Array2::<Complex64>::zeros((k, num_users));
    for u in 0..num_users {
        if instance.eta[u] == 0.0 {
            continue;
        }
        let mut e = Array1::<Complex64>::zeros(num_users);
        e[u] = Complex64::new(1.0, 0.0);
        let coeffs = cholesky_solve_complex(&l, &e);
        let mut col = Array1::<Complex64>::zeros(k);
        for up in 0..num_users {
            for i in 0..k {
                col[i] += gs[up][i] * coeffs[up];
            }
        }
        let gain: Complex64 = gs[u].iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
        if gain.norm() == 0.0 {
            continue;
        }
        let scale = instance.eta[u].sqrt() * instance.sigma_bar[u] / gain.norm();
        for i in 0..k {
            w[(i, u)] = col[i] * scale;
        }
    }
    Precoder { w }
}

/// Independent reference optimizer for small instances: projected gradient
/// over per-user unit directions with a closed-form inner power allocation,
/// multi-started. Shares no code path with [`solve_precoder`].
pub mod oracle {
    use super::*;
    use rand::Rng;

    /// Minimal power meeting all SINR targets with the given unit directions,
    /// or `None` when the resulting power allocation is not realizable.
    fn power_for_directions(
        instance: &ShortTermInstance,
        gs: &[Array1<Complex64>],
        dirs: &[Array1<Complex64>],
    ) -> Option<f64> {
        let num_users = instance.num_users();
        let active: Vec<usize> =
            (0..num_users).filter(|&u| instance.eta[u] > 0.0).collect();
        if active.is_empty() {
            return Some(0.0);
        }
        let na = active.len();
        // c[u][u'] = |g_u^H dir_u'|^2
        let mut c = vec![vec![0.0; na]; na];
        for (ia, &u) in active.iter().enumerate() {
            for (ja, &up) in active.iter().enumerate() {
                let amp: Complex64 =
                    gs[u].iter().zip(dirs[up].iter()).map(|(a, b)| a.conj() * b).sum();
                c[ia][ja] = amp.norm_sqr();
            }
        }
        // p_u c_uu / eta_u - sum_{u' != u} p_u' c_uu' = sigma_bar_u^2
        let mut mat = vec![0.0; na * na];
        let mut rhs = vec![0.0; na];
        for ia in 0..na {
            let u = active[ia];
            for ja in 0..na {
                mat[ia * na + ja] =
                    if ia == ja { c[ia][ja] / instance.eta[u] } else { -c[ia][ja] };
            }
            rhs[ia] = instance.sigma_bar[u] * instance.sigma_bar[u];
        }
        let p = solve_dense(&mat, &rhs, na)?;
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return None;
        }
        // power = sum p_u ||D dir_u||^2
        let mut total = 0.0;
        for (ia, &u) in active.iter().enumerate() {
            let d_dir = instance.d_matrix.dot(&dirs[u]);
            total += p[ia] * d_dir.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        Some(total)
    }

    fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
        let mut m = a.to_vec();
        let mut x = b.to_vec();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m[r * n + col].abs() > m[piv * n + col].abs() {
                    piv = r;
                }
            }
            if m[piv * n + col].abs() < 1e-300 {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    m.swap(col * n + j, piv * n + j);
                }
                x.swap(col, piv);
            }
            let d = m[col * n + col];
            for r in 0..n {
                if r != col && m[r * n + col] != 0.0 {
                    let f = m[r * n + col] / d;
                    for j in col..n {
                        m[r * n + j] -= f * m[col * n + j];
                    }
                    x[r] -= f * x[col];
                }
            }
        }
        for col in 0..n {
            x[col] /= m[col * n + col];
        }
        Some(x)
    }

    fn normalize(v: &mut Array1<Complex64>) {
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            v.mapv_inplace(|z| z / n);
        } else {
            v[0] = Complex64::new(1.0, 0.0);
        }
    }

    /// Brute-force optimum by multi-start projected gradient descent over the
    /// beam directions (finite-difference gradients, inner power control).
    /// Returns the best total power found, or `None` when every start was
    /// infeasible.
    pub fn brute_force_min_power(
        instance: &ShortTermInstance,
        restarts: usize,
        iters: usize,
        seed: u64,
    ) -> Option<f64> {
        let k = instance.num_feeds();
        let num_users = instance.num_users();
        let gs: Vec<Array1<Complex64>> =
            (0..num_users).map(|u| instance.feed_channel(u)).collect();
        let mut rng = crate::rng::substream(seed, &[0x0b5e]);
        let mut best: Option<f64> = None;

        for restart in 0..restarts {
            let mut dirs: Vec<Array1<Complex64>> = (0..num_users)
                .map(|u| {
                    let mut d = if restart == 0 {
                        // matched-filter start
                        gs[u].clone()
                    } else {
                        Array1::from_shape_fn(k, |_| {
                            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                        })
                    };
                    normalize(&mut d);
                    d
                })
                .collect();

            let mut current = match power_for_directions(instance, &gs, &dirs) {
                Some(p) => p,
                None => continue,
            };
            let mut step = 0.2;
            for _ in 0..iters {
                // finite-difference gradient over all real parameters
                let h = 1e-5;
                let mut grad: Vec<Array1<Complex64>> =
                    (0..num_users).map(|_| Array1::zeros(k)).collect();
                for u in 0..num_users {
                    for i in 0..k {
                        for part in 0..2 {
                            let delta = if part == 0 {
                                Complex64::new(h, 0.0)
                            } else {
                                Complex64::new(0.0, h)
                            };
                            let mut probe = dirs.clone();
                            probe[u][i] += delta;
                            normalize(&mut probe[u]);
                            let plus = power_for_directions(instance, &gs, &probe)
                                .unwrap_or(current * 10.0);
                            let g = (plus - current) / h;
                            if part == 0 {
                                grad[u][i] += Complex64::new(g, 0.0);
                            } else {
                                grad[u][i] += Complex64::new(0.0, g);
                            }
                        }
                    }
                }
                // backtracking step
                let mut improved = false;
                for _ in 0..20 {
                    let mut probe = dirs.clone();
                    for u in 0..num_users {
                        for i in 0..k {
                            probe[u][i] -= grad[u][i] * step;
                        }
                        normalize(&mut probe[u]);
                    }
                    match power_for_directions(instance, &gs, &probe) {
                        Some(p) if p < current => {
                            dirs = probe;
                            current = p;
                            improved = true;
                            break;
                        }
                        _ => step *= 0.5,
                    }
                }
                if !improved || step < 1e-12 {
                    break;
                }
            }
            best = Some(best.map_or(current, |b: f64| b.min(current)));
        }
        best
    }
}
