//! Saleh-Valenzuela channel model for the millimeter-wave downlink: statistical
//! CSI drawn once per long interval, instantaneous realizations sampled per
//! short slot.
//!
//! Angle convention: a panel's steering phase for grid index `(i, j)`
//! (zero-based, row-major) is
//! `k_f * spacing * (i * sin(az) * cos(el) + j * cos(el))`,
//! i.e. the direction cosine along the second grid axis is `cos(el)` and the
//! one along the first axis is `sin(az) * cos(el)`. Line-of-sight angles are
//! recovered from the BS-to-UE direction with the panel's first axis mapped to
//! global `x` and its second axis to global `z` (wall-mounted vertical panel).

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::SurfacePanel;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("scenario needs at least one user")]
    NoUsers,
    #[error("scenario physical quantities must be positive")]
    NonPositiveQuantity,
    #[error("3D distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("panel dimensions do not match the statistical CSI")]
    DimensionMismatch,
}

/// Deployment scenario for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub num_users: usize,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub max_horizontal_distance_m: f64,
    pub num_nlos_paths: usize,
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.num_users == 0 {
            return Err(ChannelError::NoUsers);
        }
        let positive = [
            self.bs_height_m,
            self.ue_height_m,
            self.max_horizontal_distance_m,
            self.carrier_frequency_hz,
            self.bandwidth_hz,
        ];
        if positive.iter().any(|&x| x <= 0.0) {
            return Err(ChannelError::NonPositiveQuantity);
        }
        Ok(())
    }

    /// Carrier wavelength in meters.
    pub fn wavelength_m(&self) -> f64 {
        299_792_458.0 / self.carrier_frequency_hz
    }

    /// Noise power over the configured bandwidth, in watts.
    pub fn noise_power_w(&self) -> f64 {
        noise_power(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }
}

/// One azimuth/elevation pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub azimuth: f64,
    pub elevation: f64,
}

/// Slow-varying per-user channel descriptors, constant over a long interval.
#[derive(Debug, Clone)]
pub struct StatisticalCsi {
    /// Complex linear amplitude of the line-of-sight path.
    pub los_gain: Complex64,
    /// Departure angles of the LoS path at the BS.
    pub los_aod: AnglePair,
    /// Arrival angles of the LoS path at the UE.
    pub los_aoa: AnglePair,
    /// Departure angles of the NLoS paths.
    pub nlos_aod: Vec<AnglePair>,
    /// Arrival angles of the NLoS paths.
    pub nlos_aoa: Vec<AnglePair>,
    /// Standard deviation of each NLoS complex gain.
    pub nlos_std: f64,
}

/// One sampled channel matrix (receive elements x transmit elements).
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: Array2<Complex64>,
}

/// Transmit array response for departure angles `(theta, psi)`.
pub fn steering_vector_tx(panel: &SurfacePanel, theta: f64, psi: f64) -> Array1<Complex64> {
    steering_vector(panel, theta, psi)
}

/// Receive array response for arrival angles `(omega, phi)`.
pub fn steering_vector_rx(panel: &SurfacePanel, omega: f64, phi: f64) -> Array1<Complex64> {
    steering_vector(panel, omega, phi)
}

fn steering_vector(panel: &SurfacePanel, azimuth: f64, elevation: f64) -> Array1<Complex64> {
    let rows = panel.rows;
    let k_delta = panel.wavenumber() * panel.spacing;
    let a = azimuth.sin() * elevation.cos();
    let b = elevation.cos();
    let mut v = Array1::<Complex64>::zeros(rows * rows);
    for i in 0..rows {
        for j in 0..rows {
            let phase = k_delta * (i as f64 * a + j as f64 * b);
            v[i * rows + j] = Complex64::from_polar(1.0, phase);
        }
    }
    v
}

/// Line-of-sight path loss in dB: `61.4 + 20 log10(d_3D)`.
pub fn los_path_loss_db(d3d: f64) -> Result<f64, ChannelError> {
    if d3d <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(d3d));
    }
    Ok(61.4 + 20.0 * d3d.log10())
}

/// 3D BS-UE distance from the heights and the horizontal separation.
pub fn d3d_distance(bs_height: f64, ue_height: f64, horizontal: f64) -> f64 {
    let dz = bs_height - ue_height;
    (horizontal * horizontal + dz * dz).sqrt()
}

/// Noise power in watts from a PSD in dBm/Hz and a bandwidth in Hz.
pub fn noise_power(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    10f64.powf((noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10() - 30.0) / 10.0)
}

/// Recovers the steering angles of a propagation direction under the panel
/// convention documented at module level. The elevation cosine matches the
/// direction exactly; the azimuth sine is clamped when the direction leaves
/// the parameterizable sector.
pub fn angles_from_direction(dir: [f64; 3]) -> AnglePair {
    let c2 = dir[2].clamp(-1.0, 1.0);
    let elevation = c2.acos();
    let sin_az = if c2.abs() > 1e-12 { (dir[0] / c2).clamp(-1.0, 1.0) } else { 0.0 };
    AnglePair { azimuth: sin_az.asin(), elevation }
}

/// Draws statistical CSI for every user: positions uniform on a horizontal
/// disk around the BS, LoS gain from the path-loss law with a uniform random
/// phase, NLoS gain deviation `sqrt(0.1) * |LoS gain|`, LoS angles from
/// geometry and NLoS angles uniform over the angular sector. Angles and gains
/// stay frozen for the long interval; only NLoS gains are redrawn per sample.
pub fn draw_statistical_csi<R: Rng>(
    scenario: &Scenario,
    rng: &mut R,
) -> Result<Vec<StatisticalCsi>, ChannelError> {
    scenario.validate()?;
    let mut users = Vec::with_capacity(scenario.num_users);
    for _ in 0..scenario.num_users {
        let radius = scenario.max_horizontal_distance_m * rng.gen::<f64>().sqrt();
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;

        let ue = [radius * angle.cos(), radius * angle.sin(), scenario.ue_height_m];
        let bs = [0.0, 0.0, scenario.bs_height_m];
        let d3d = d3d_distance(scenario.bs_height_m, scenario.ue_height_m, radius);
        let pl_db = los_path_loss_db(d3d)?;
        let amplitude = 10f64.powf(-pl_db / 20.0);

        let dir_down = [(ue[0] - bs[0]) / d3d, (ue[1] - bs[1]) / d3d, (ue[2] - bs[2]) / d3d];
        let dir_up = [-dir_down[0], -dir_down[1], -dir_down[2]];

        let mut nlos_aod = Vec::with_capacity(scenario.num_nlos_paths);
        let mut nlos_aoa = Vec::with_capacity(scenario.num_nlos_paths);
        for _ in 0..scenario.num_nlos_paths {
            let mut draw_pair = || AnglePair {
                azimuth: (rng.gen::<f64>() - 0.5) * std::f64::consts::PI,
                elevation: rng.gen::<f64>() * std::f64::consts::PI,
            };
            nlos_aod.push(draw_pair());
            nlos_aoa.push(draw_pair());
        }

        users.push(StatisticalCsi {
            los_gain: Complex64::from_polar(amplitude, phase),
            los_aod: angles_from_direction(dir_down),
            los_aoa: angles_from_direction(dir_up),
            nlos_aod,
            nlos_aoa,
            nlos_std: 0.1f64.sqrt() * amplitude,
        })
    }
    Ok(users)
}

/// Samples one channel realization: LoS term held fixed, NLoS gains freshly
/// drawn circular complex Gaussian with deviation `nlos_std`.
pub fn sample_channel<R: Rng>(
    stat: &StatisticalCsi,
    tx: &SurfacePanel,
    rx: &SurfacePanel,
    rng: &mut R,
) -> ChannelRealization {
    let a_t = steering_vector_tx(tx, stat.los_aod.azimuth, stat.los_aod.elevation);
    let a_r = steering_vector_rx(rx, stat.los_aoa.azimuth, stat.los_aoa.elevation);
    let mut h = outer_product_scaled(stat.los_gain, &a_r, &a_t);
    for l in 0..stat.nlos_aod.len() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let gain = Complex64::new(re, im) * (stat.nlos_std / 2f64.sqrt());
        let a_t_l = steering_vector_tx(tx, stat.nlos_aod[l].azimuth, stat.nlos_aod[l].elevation);
        let a_r_l = steering_vector_rx(rx, stat.nlos_aoa[l].azimuth, stat.nlos_aoa[l].elevation);
        h += &outer_product_scaled(gain, &a_r_l, &a_t_l);
    }
    ChannelRealization { h }
}

/// `gain * a_r * a_t^H`
fn outer_product_scaled(
    gain: Complex64,
    a_r: &Array1<Complex64>,
    a_t: &Array1<Complex64>,
) -> Array2<Complex64> {
    let m = a_r.len();
    let n = a_t.len();
    let mut out = Array2::<Complex64>::zeros((m, n));
    for i in 0..m {
        let row_factor = gain * a_r[i];
        for j in 0..n {
            out[(i, j)] = row_factor * a_t[j].conj();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_panel, FeedLayout};
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn small_panel(rows: usize) -> SurfacePanel {
        build_panel(rows, 2.5e-3, 0.01, FeedLayout::Center).unwrap()
    }

    fn test_scenario() -> Scenario {
        Scenario {
            num_users: 4,
            bs_height_m: 25.0,
            ue_height_m: 1.5,
            max_horizontal_distance_m: 10.0,
            num_nlos_paths: 2,
            carrier_frequency_hz: 30e9,
            bandwidth_hz: 100e6,
            noise_psd_dbm_hz: -169.0,
        }
    }

    #[test]
    fn steering_first_entry_is_one() {
        let p = small_panel(3);
        for &(az, el) in &[(0.3, 1.2), (-1.0, 0.4), (0.0, 0.0)] {
            let v = steering_vector_tx(&p, az, el);
            assert_relative_eq!(v[0].re, 1.0, epsilon = 1e-14);
            assert_relative_eq!(v[0].im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn steering_at_half_pi_elevation_is_all_ones() {
        let p = small_panel(4);
        let v = steering_vector_tx(&p, 0.7, std::f64::consts::FRAC_PI_2);
        for z in v.iter() {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_quarter_wavelength_pattern() {
        // 2x2 grid, quarter-wave spacing: k_f * spacing = pi/2. With azimuth 0
        // and elevation 0 the phase is (pi/2) * j, giving the {1, i} pattern
        // over the grid columns.
        let p = small_panel(2);
        let v = steering_vector_tx(&p, 0.0, 0.0);
        let i = Complex64::i();
        for (idx, expect) in [(0, Complex64::new(1.0, 0.0)), (1, i), (2, Complex64::new(1.0, 0.0)), (3, i)] {
            assert_relative_eq!(v[idx].re, expect.re, epsilon = 1e-12);
            assert_relative_eq!(v[idx].im, expect.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_conjugate_symmetry() {
        // conj(a_r(omega, phi)) = a_r(omega, pi - phi): both phase terms negate
        let p = small_panel(3);
        let (omega, phi) = (0.4, 0.9);
        let v = steering_vector_rx(&p, omega, phi);
        let w = steering_vector_rx(&p, omega, std::f64::consts::PI - phi);
        for (a, b) in v.iter().zip(w.iter()) {
            assert_relative_eq!(a.conj().re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.conj().im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn path_loss_values() {
        assert_relative_eq!(los_path_loss_db(1.0).unwrap(), 61.4, epsilon = 1e-12);
        assert_relative_eq!(los_path_loss_db(10.0).unwrap(), 81.4, epsilon = 1e-12);
        assert_relative_eq!(los_path_loss_db(100.0).unwrap(), 101.4, epsilon = 1e-12);
        assert!(los_path_loss_db(0.0).is_err());
        assert!(los_path_loss_db(-5.0).is_err());
    }

    #[test]
    fn d3d_pythagoras() {
        assert_relative_eq!(d3d_distance(25.0, 1.5, 10.0), 652.25f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn noise_power_values() {
        assert_relative_eq!(noise_power(-169.0, 100e6), 10f64.powf(-11.9), max_relative = 1e-12);
        assert_relative_eq!(noise_power(0.0, 1.0), 1e-3, max_relative = 1e-12);
        assert_relative_eq!(noise_power(-169.0, 1.0), 10f64.powf(-19.9), max_relative = 1e-12);
    }

    #[test]
    fn draws_one_record_per_user_with_l_paths() {
        let mut rng = substream(1, &[0]);
        let stats = draw_statistical_csi(&test_scenario(), &mut rng).unwrap();
        assert_eq!(stats.len(), 4);
        for s in &stats {
            assert_eq!(s.nlos_aod.len(), 2);
            assert_eq!(s.nlos_aoa.len(), 2);
            assert!(s.nlos_std > 0.0);
            assert_relative_eq!(s.nlos_std, 0.1f64.sqrt() * s.los_gain.norm(), max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_paths_still_sets_nlos_std() {
        let mut scenario = test_scenario();
        scenario.num_nlos_paths = 0;
        let mut rng = substream(2, &[0]);
        let stats = draw_statistical_csi(&scenario, &mut rng).unwrap();
        for s in &stats {
            assert!(s.nlos_aod.is_empty());
            assert_relative_eq!(s.nlos_std, 0.1f64.sqrt() * s.los_gain.norm(), max_relative = 1e-12);
        }
    }

    #[test]
    fn channel_without_nlos_is_rank_one_los_term() {
        let mut scenario = test_scenario();
        scenario.num_nlos_paths = 0;
        let tx = small_panel(3);
        let rx = small_panel(2);
        let mut rng = substream(3, &[0]);
        let stats = draw_statistical_csi(&scenario, &mut rng).unwrap();
        let h = sample_channel(&stats[0], &tx, &rx, &mut rng).h;
        let a_t = steering_vector_tx(&tx, stats[0].los_aod.azimuth, stats[0].los_aod.elevation);
        let a_r = steering_vector_rx(&rx, stats[0].los_aoa.azimuth, stats[0].los_aoa.elevation);
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                let expect = stats[0].los_gain * a_r[i] * a_t[j].conj();
                assert_relative_eq!(h[(i, j)].re, expect.re, max_relative = 1e-12);
                assert_relative_eq!(h[(i, j)].im, expect.im, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn channel_columns_live_in_a_rank_l_plus_one_subspace() {
        let mut scenario = test_scenario();
        scenario.num_nlos_paths = 1;
        let tx = small_panel(3);
        let rx = small_panel(3);
        let mut rng = substream(4, &[0]);
        let stats = draw_statistical_csi(&scenario, &mut rng).unwrap();
        let s = &stats[0];
        let h = sample_channel(s, &tx, &rx, &mut rng).h;

        // every column of H must lie in span{a_r_los, a_r_nlos}
        let b0 = steering_vector_rx(&rx, s.los_aoa.azimuth, s.los_aoa.elevation);
        let b1 = steering_vector_rx(&rx, s.nlos_aoa[0].azimuth, s.nlos_aoa[0].elevation);
        // Gram-Schmidt
        let q0 = &b0 / Complex64::new(b0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), 0.0);
        let proj: Complex64 = q0.iter().zip(b1.iter()).map(|(a, b)| a.conj() * b).sum();
        let mut q1 = b1.clone();
        for i in 0..q1.len() {
            q1[i] -= proj * q0[i];
        }
        let n1 = q1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let q1 = q1.mapv(|z| z / n1);

        for j in 0..h.ncols() {
            let col = h.column(j);
            let c0: Complex64 = q0.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            let c1: Complex64 = q1.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            let mut residual = 0.0;
            for i in 0..col.len() {
                residual += (col[i] - c0 * q0[i] - c1 * q1[i]).norm_sqr();
            }
            assert!(residual.sqrt() < 1e-10, "column escapes the path subspace");
        }
    }

    #[test]
    fn sample_mean_converges_to_los_term() {
        let mut scenario = test_scenario();
        scenario.num_users = 1;
        let tx = small_panel(2);
        let rx = small_panel(2);
        let mut rng = substream(5, &[0]);
        let stats = draw_statistical_csi(&scenario, &mut rng).unwrap();
        let s = &stats[0];

        let n_draws = 10_000;
        let mut mean = Array2::<Complex64>::zeros((4, 4));
        for i in 0..n_draws {
            let mut draw_rng = substream(5, &[1, i as u64]);
            mean += &sample_channel(s, &tx, &rx, &mut draw_rng).h;
        }
        mean.mapv_inplace(|z| z / n_draws as f64);

        let a_t = steering_vector_tx(&tx, s.los_aod.azimuth, s.los_aod.elevation);
        let a_r = steering_vector_rx(&rx, s.los_aoa.azimuth, s.los_aoa.elevation);
        let mut err_sq = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                err_sq += (mean[(i, j)] - s.los_gain * a_r[i] * a_t[j].conj()).norm_sqr();
            }
        }
        // E||mean - LoS||_F^2 = M*N*L*std^2/n; allow five standard errors
        let se = (16.0 * 2.0 * s.nlos_std.powi(2) / n_draws as f64).sqrt();
        assert!(err_sq.sqrt() <= 5.0 * se, "{} > {}", err_sq.sqrt(), 5.0 * se);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let scenario = test_scenario();
        let tx = small_panel(3);
        let rx = small_panel(2);
        let stats = {
            let mut rng = substream(9, &[0]);
            draw_statistical_csi(&scenario, &mut rng).unwrap()
        };
        let h1 = sample_channel(&stats[0], &tx, &rx, &mut substream(9, &[1]));
        let h2 = sample_channel(&stats[0], &tx, &rx, &mut substream(9, &[1]));
        assert_eq!(h1.h, h2.h);
    }
}
