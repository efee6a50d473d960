//! SINR, spectral efficiency and transmit power for any (beampattern,
//! precoder, channel) tuple, plus the algebraic identities both optimizers
//! rely on.
//!
//! The received amplitude of stream `u'` at user `u` is
//! `v_u^H B H_u diag(Theta w_u') alpha`, equivalently written through the
//! effective receive channel `h_u = H_u^H B^H v_u` as
//! `h_u^H diag(Theta w_u') alpha`. Both routes are implemented; the diagonal
//! form is the workhorse, the matrix-chain form the cross-check.
//!
//! All powers are in watts; dBm only appears at the reporting boundary.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::channel::ChannelRealization;

/// Long-term amplitude beampatterns: `alpha` at the BS, one column of `v` per
/// user at the UE side, all entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternState {
    pub alpha: Array1<f64>,
    /// M x U, column `u` is user `u`'s receive pattern.
    pub v: Array2<f64>,
}

impl BeampatternState {
    pub fn num_users(&self) -> usize {
        self.v.ncols()
    }

    /// True when every entry lies in the unit interval.
    pub fn in_box(&self) -> bool {
        self.alpha.iter().chain(self.v.iter()).all(|&x| (0.0..=1.0).contains(&x))
    }
}

/// Short-term digital precoder: `w` is K x U, column `u` serves user `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub w: Array2<Complex64>,
}

impl Precoder {
    pub fn zeros(num_feeds: usize, num_users: usize) -> Self {
        Self { w: Array2::zeros((num_feeds, num_users)) }
    }

    pub fn num_users(&self) -> usize {
        self.w.ncols()
    }
}

/// Per-user QoS thresholds (bits/s/Hz) and the noise power in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct QosSpec {
    pub delta: Array1<f64>,
    pub sigma2: f64,
}

impl QosSpec {
    pub fn new(delta: Array1<f64>, sigma2: f64) -> Self {
        assert!(sigma2 > 0.0, "noise power must be positive");
        assert!(delta.iter().all(|&d| d >= 0.0), "QoS thresholds must be nonnegative");
        Self { delta, sigma2 }
    }

    /// SINR targets `eta_u = 2^{delta_u} - 1`.
    pub fn sinr_targets(&self) -> Array1<f64> {
        self.delta.mapv(|d| 2f64.powf(d) - 1.0)
    }
}

/// Effective receive channel of user `u`: `h_u = H_u^H B^H v_u`, the length-N
/// vector such that the stream amplitude is `h_u^H diag(Theta w) alpha`.
pub fn effective_rx_channel(
    u: usize,
    state: &BeampatternState,
    beta: &Array1<Complex64>,
    h: &ChannelRealization,
) -> Array1<Complex64> {
    let (m, n) = h.h.dim();
    assert_eq!(beta.len(), m, "beta length must match receive elements");
    assert_eq!(state.v.nrows(), m, "v rows must match receive elements");
    // t = B^H v_u  (conj(beta) elementwise, v real)
    let v_u = state.v.column(u);
    let t: Vec<Complex64> = (0..m).map(|i| beta[i].conj() * v_u[i]).collect();
    let mut out = Array1::<Complex64>::zeros(n);
    for j in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            acc += h.h[(i, j)].conj() * t[i];
        }
        out[j] = acc;
    }
    out
}

/// Received amplitude of stream `u'` at user `u` through the diagonal form:
/// `h_u^H diag(Theta w_u') alpha`.
fn stream_amplitude(
    eff_channel: &Array1<Complex64>,
    theta_w: &Array1<Complex64>,
    alpha: &Array1<f64>,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..alpha.len() {
        acc += eff_channel[n].conj() * theta_w[n] * alpha[n];
    }
    acc
}

/// `Theta * w_u` for every user column; shape N x U.
pub fn theta_times_precoder(theta: &Array2<Complex64>, precoder: &Precoder) -> Array2<Complex64> {
    theta.dot(&precoder.w)
}

/// Received SINR of user `u` (diagonal form). Returns 0 when the receive
/// pattern is all-zero.
pub fn sinr(
    u: usize,
    state: &BeampatternState,
    precoder: &Precoder,
    channel: &ChannelRealization,
    theta: &Array2<Complex64>,
    beta: &Array1<Complex64>,
    qos: &QosSpec,
) -> f64 {
    let eff = effective_rx_channel(u, state, beta, channel);
    let tw = theta_times_precoder(theta, precoder);
    let num_users = precoder.num_users();
    let v_norm_sq: f64 = state.v.column(u).iter().map(|x| x * x).sum();
    if v_norm_sq == 0.0 {
        return 0.0;
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for up in 0..num_users {
        let amp = stream_amplitude(&eff, &tw.column(up).to_owned(), &state.alpha).norm_sqr();
        if up == u {
            signal = amp;
        } else {
            interference += amp;
        }
    }
    signal / (interference + v_norm_sq * qos.sigma2)
}

/// SINR through the full matrix chain `v_u^H B H_u A Theta w`, the
/// cross-check route for [`sinr`].
pub fn sinr_matrix_form(
    u: usize,
    state: &BeampatternState,
    precoder: &Precoder,
    channel: &ChannelRealization,
    theta: &Array2<Complex64>,
    beta: &Array1<Complex64>,
    qos: &QosSpec,
) -> f64 {
    let (m, n) = channel.h.dim();
    let v_u = state.v.column(u);
    // row = v_u^H B H_u A Theta  (1 x K)
    let mut left = Array1::<Complex64>::zeros(n);
    for j in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            acc += v_u[i] * beta[i] * channel.h[(i, j)];
        }
        left[j] = acc * state.alpha[j];
    }
    let row = left.dot(theta);
    let v_norm_sq: f64 = v_u.iter().map(|x| x * x).sum();
    if v_norm_sq == 0.0 {
        return 0.0;
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for up in 0..precoder.num_users() {
        let amp = row.dot(&precoder.w.column(up)).norm_sqr();
        if up == u {
            signal = amp;
        } else {
            interference += amp;
        }
    }
    signal / (interference + v_norm_sq * qos.sigma2)
}

/// Spectral efficiency `log2(1 + SINR_u)` in bits/s/Hz.
#[allow(clippy::too_many_arguments)]
pub fn spectral_efficiency(
    u: usize,
    state: &BeampatternState,
    precoder: &Precoder,
    channel: &ChannelRealization,
    theta: &Array2<Complex64>,
    beta: &Array1<Complex64>,
    qos: &QosSpec,
) -> f64 {
    (1.0 + sinr(u, state, precoder, channel, theta, beta, qos)).log2()
}

/// Transmit power `sum_u ||diag(Theta w_u) alpha||^2` in watts.
pub fn transmit_power(state: &BeampatternState, precoder: &Precoder, theta: &Array2<Complex64>) -> f64 {
    let tw = theta_times_precoder(theta, precoder);
    let mut total = 0.0;
    for up in 0..precoder.num_users() {
        for n in 0..state.alpha.len() {
            total += (tw[(n, up)] * state.alpha[n]).norm_sqr();
        }
    }
    total
}

/// Transmit power through the trace form `Tr(A Theta W W^H Theta^H A^H)`, the
/// cross-check route for [`transmit_power`].
pub fn transmit_power_trace_form(
    state: &BeampatternState,
    precoder: &Precoder,
    theta: &Array2<Complex64>,
) -> f64 {
    // M = A Theta W, trace of M M^H = ||M||_F^2
    let tw = theta.dot(&precoder.w);
    let mut total = 0.0;
    for n in 0..state.alpha.len() {
        for u in 0..precoder.num_users() {
            total += (state.alpha[n] * tw[(n, u)]).norm_sqr();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;

    fn random_complex_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<Complex64> {
        Array2::from_shape_fn((rows, cols), |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    fn random_unit_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<Complex64> {
        Array2::from_shape_fn((rows, cols), |_| {
            Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU)
        })
    }

    fn random_instance(
        n: usize,
        m: usize,
        k: usize,
        u: usize,
        seed: u64,
    ) -> (BeampatternState, Precoder, ChannelRealization, Array2<Complex64>, Array1<Complex64>, QosSpec) {
        let mut rng = substream(seed, &[77]);
        let state = BeampatternState {
            alpha: Array1::from_shape_fn(n, |_| rng.gen::<f64>()),
            v: Array2::from_shape_fn((m, u), |_| rng.gen::<f64>()),
        };
        let precoder = Precoder { w: random_complex_matrix(k, u, &mut rng) };
        let channel = ChannelRealization { h: random_complex_matrix(m, n, &mut rng) };
        let theta = random_unit_matrix(n, k, &mut rng);
        let beta = random_unit_matrix(m, 1, &mut rng).column(0).to_owned();
        let qos = QosSpec::new(Array1::from_elem(u, 1.0), 1e-3);
        (state, precoder, channel, theta, beta, qos)
    }

    #[test]
    fn effective_channel_zero_pattern_gives_zero() {
        let (mut state, _, channel, _, beta, _) = random_instance(3, 2, 2, 2, 1);
        state.v.column_mut(0).fill(0.0);
        let eff = effective_rx_channel(0, &state, &beta, &channel);
        assert!(eff.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn effective_channel_scalar_case() {
        let state = BeampatternState { alpha: array![1.0], v: array![[1.0]] };
        let c = Complex64::new(0.3, -0.7);
        let channel = ChannelRealization { h: array![[c]] };
        let beta = array![Complex64::new(1.0, 0.0)];
        let eff = effective_rx_channel(0, &state, &beta, &channel);
        assert_relative_eq!(eff[0].re, c.conj().re, epsilon = 1e-15);
        assert_relative_eq!(eff[0].im, c.conj().im, epsilon = 1e-15);
    }

    #[test]
    fn effective_channel_matches_brute_force_expansion() {
        let (state, _, channel, _, beta, _) = random_instance(3, 2, 2, 2, 2);
        let eff = effective_rx_channel(0, &state, &beta, &channel);
        // brute force: (v^H B H)^H entry by entry
        for j in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                acc += state.v[(i, 0)] * beta[i] * channel.h[(i, j)];
            }
            let expect = acc.conj();
            assert_relative_eq!(eff[j].re, expect.re, max_relative = 1e-12);
            assert_relative_eq!(eff[j].im, expect.im, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_precoder_gives_zero_sinr_for_all_users() {
        let (state, _, channel, theta, beta, qos) = random_instance(4, 2, 3, 2, 3);
        let zero = Precoder::zeros(3, 2);
        for u in 0..2 {
            assert_eq!(sinr(u, &state, &zero, &channel, &theta, &beta, &qos), 0.0);
            assert_eq!(spectral_efficiency(u, &state, &zero, &channel, &theta, &beta, &qos), 0.0);
        }
    }

    #[test]
    fn single_user_sinr_has_no_interference_term() {
        let (state, precoder, channel, theta, beta, qos) = random_instance(4, 2, 3, 1, 4);
        let eff = effective_rx_channel(0, &state, &beta, &channel);
        let tw = theta_times_precoder(&theta, &precoder);
        let amp = stream_amplitude(&eff, &tw.column(0).to_owned(), &state.alpha);
        let v_norm_sq: f64 = state.v.column(0).iter().map(|x| x * x).sum();
        let expect = amp.norm_sqr() / (v_norm_sq * qos.sigma2);
        assert_relative_eq!(
            sinr(0, &state, &precoder, &channel, &theta, &beta, &qos),
            expect,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sinr_diag_and_matrix_forms_agree() {
        for seed in 0..20 {
            let (state, precoder, channel, theta, beta, qos) = random_instance(4, 2, 2, 2, 100 + seed);
            for u in 0..2 {
                let a = sinr(u, &state, &precoder, &channel, &theta, &beta, &qos);
                let b = sinr_matrix_form(u, &state, &precoder, &channel, &theta, &beta, &qos);
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn spectral_efficiency_known_points() {
        // log2(1 + 0) = 0, log2(1 + 1) = 1, log2(1 + 3) = 2
        assert_eq!((1.0f64 + 0.0).log2(), 0.0);
        assert_relative_eq!((1.0f64 + 1.0).log2(), 1.0, epsilon = 1e-15);
        assert_relative_eq!((1.0f64 + 3.0).log2(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn transmit_power_zero_cases() {
        let (state, _, _, theta, _, _) = random_instance(4, 2, 3, 2, 5);
        assert_eq!(transmit_power(&state, &Precoder::zeros(3, 2), &theta), 0.0);

        let zero_alpha = BeampatternState {
            alpha: Array1::zeros(4),
            v: state.v.clone(),
        };
        let (_, precoder, ..) = random_instance(4, 2, 3, 2, 6);
        assert_eq!(transmit_power(&zero_alpha, &precoder, &theta), 0.0);
    }

    #[test]
    fn transmit_power_all_ones_single_feed_column() {
        let (mut state, _, _, theta, _, _) = random_instance(8, 2, 3, 1, 7);
        state.alpha.fill(1.0);
        let mut w = Array2::<Complex64>::zeros((3, 1));
        w[(0, 0)] = Complex64::new(1.0, 0.0);
        let p = transmit_power(&state, &Precoder { w }, &theta);
        // each of the N entries of Theta e_1 has unit modulus
        assert_relative_eq!(p, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn power_identity_trace_vs_sum() {
        for seed in 0..20 {
            let (state, precoder, _, theta, _, _) = random_instance(5, 3, 4, 3, 200 + seed);
            let a = transmit_power(&state, &precoder, &theta);
            let b = transmit_power_trace_form(&state, &precoder, &theta);
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn sinr_invariant_to_common_phase_rotation() {
        let (state, mut precoder, channel, theta, beta, qos) = random_instance(4, 2, 3, 2, 8);
        let before = sinr(0, &state, &precoder, &channel, &theta, &beta, &qos);
        let rot = Complex64::from_polar(1.0, 1.234);
        for x in precoder.w.column_mut(0).iter_mut() {
            *x *= rot;
        }
        let after = sinr(0, &state, &precoder, &channel, &theta, &beta, &qos);
        assert_relative_eq!(before, after, max_relative = 1e-12);
    }

    #[test]
    fn alpha_scaling_scales_power_quadratically() {
        let (state, precoder, _, theta, _, _) = random_instance(4, 2, 3, 2, 9);
        let p = transmit_power(&state, &precoder, &theta);
        // power of two keeps the scaling exact in binary floating point
        let half = BeampatternState { alpha: state.alpha.mapv(|x| 0.5 * x), v: state.v.clone() };
        assert_eq!(transmit_power(&half, &precoder, &theta), 0.25 * p);

        let c = 0.7313;
        let scaled = BeampatternState { alpha: state.alpha.mapv(|x| c * x), v: state.v };
        assert_relative_eq!(transmit_power(&scaled, &precoder, &theta), c * c * p, max_relative = 1e-13);
    }

    #[test]
    fn sinr_monotone_decreasing_in_noise() {
        let (state, precoder, channel, theta, beta, _) = random_instance(4, 2, 3, 2, 10);
        let mut last = f64::INFINITY;
        for &sigma2 in &[1e-6, 1e-4, 1e-2, 1.0] {
            let qos = QosSpec::new(Array1::from_elem(2, 1.0), sigma2);
            let s = sinr(0, &state, &precoder, &channel, &theta, &beta, &qos);
            assert!(s < last);
            last = s;
        }
    }
}
