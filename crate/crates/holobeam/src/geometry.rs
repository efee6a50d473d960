//! HMIMOS panel geometry and everything determined purely by it: feed-to-element
//! phase matrices, receive phase vectors and holographic amplitude patterns.
//!
//! The surface is a square grid of amplitude-controlled radiation elements in
//! the panel plane, excited by one or more feeds embedded in the same plane
//! (parallel-plate waveguide picture: the reference-wave path from feed `k` to
//! element `n` is the in-plane Euclidean distance).

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("rows must be >= 1")]
    EmptyPanel,
    #[error("spacing and wavelength must be positive")]
    NonPositiveDimension,
    #[error("element spacing {spacing} must stay below half the wavelength {wavelength}")]
    SpacingTooLarge { spacing: f64, wavelength: f64 },
    #[error("feed grid {k_side}x{k_side} does not fit a {rows}x{rows} aperture")]
    FeedGridTooLarge { k_side: usize, rows: usize },
    #[error("element count {count} does not equal rows^2 = {expected}")]
    WrongElementCount { count: usize, expected: usize },
    #[error("panel positions must be pairwise distinct")]
    DuplicatePosition,
    #[error("operation requires exactly one feed, panel has {0}")]
    NeedsSingleFeed(usize),
    #[error("object direction must have unit norm")]
    NonUnitDirection,
}

/// Placement of the feeds behind the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedLayout {
    /// `k_side` x `k_side` uniform sub-grid spanning the central half of the
    /// aperture.
    Grid { k_side: usize },
    /// Single feed at the panel center.
    Center,
}

/// Geometry of one holographic surface: element grid, feed positions, carrier
/// wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePanel {
    /// Elements per side; the panel carries `rows^2` elements.
    pub rows: usize,
    /// Element pitch in meters.
    pub spacing: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Element coordinates in meters, row-major over the grid.
    pub element_positions: Vec<[f64; 3]>,
    /// Feed coordinates in meters.
    pub feed_positions: Vec<[f64; 3]>,
}

/// Fixed phase couplings of a transmit/receive panel pair: `theta[n, k]` is
/// the reference-wave phase from feed `k` to element `n` on the transmit
/// panel, `beta[m]` the same for the single-feed receive panel.
#[derive(Debug, Clone)]
pub struct PhaseCoupling {
    pub theta: Array2<Complex64>,
    pub beta: Array1<Complex64>,
}

impl SurfacePanel {
    /// Validates the panel invariants: `rows^2` elements, spacing below half
    /// the wavelength, pairwise distinct element and feed positions.
    pub fn new(
        rows: usize,
        spacing: f64,
        wavelength: f64,
        element_positions: Vec<[f64; 3]>,
        feed_positions: Vec<[f64; 3]>,
    ) -> Result<Self, GeometryError> {
        if rows == 0 {
            return Err(GeometryError::EmptyPanel);
        }
        if spacing <= 0.0 || wavelength <= 0.0 {
            return Err(GeometryError::NonPositiveDimension);
        }
        if spacing >= wavelength / 2.0 {
            return Err(GeometryError::SpacingTooLarge { spacing, wavelength });
        }
        if element_positions.len() != rows * rows {
            return Err(GeometryError::WrongElementCount {
                count: element_positions.len(),
                expected: rows * rows,
            });
        }
        if has_duplicates(&element_positions) || has_duplicates(&feed_positions) {
            return Err(GeometryError::DuplicatePosition);
        }
        Ok(Self { rows, spacing, wavelength, element_positions, feed_positions })
    }

    /// Number of radiation elements.
    pub fn num_elements(&self) -> usize {
        self.element_positions.len()
    }

    /// Number of feeds.
    pub fn num_feeds(&self) -> usize {
        self.feed_positions.len()
    }

    /// Free-space wavenumber `2 pi / lambda`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

fn has_duplicates(points: &[[f64; 3]]) -> bool {
    for (i, a) in points.iter().enumerate() {
        for b in points.iter().skip(i + 1) {
            if a == b {
                return true;
            }
        }
    }
    false
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Builds a panel with elements on a square grid in the `z = 0` plane centered
/// at the origin and feeds placed coplanar with the elements.
pub fn build_panel(
    rows: usize,
    spacing: f64,
    wavelength: f64,
    feed_layout: FeedLayout,
) -> Result<SurfacePanel, GeometryError> {
    if rows == 0 {
        return Err(GeometryError::EmptyPanel);
    }
    let offset = (rows as f64 - 1.0) / 2.0;
    let mut elements = Vec::with_capacity(rows * rows);
    for i in 0..rows {
        for j in 0..rows {
            elements.push([
                (i as f64 - offset) * spacing,
                (j as f64 - offset) * spacing,
                0.0,
            ]);
        }
    }
    let feeds = match feed_layout {
        FeedLayout::Center => vec![[0.0, 0.0, 0.0]],
        FeedLayout::Grid { k_side } => {
            if k_side == 0 {
                return Err(GeometryError::EmptyPanel);
            }
            if k_side > rows {
                return Err(GeometryError::FeedGridTooLarge { k_side, rows });
            }
            // central half of the aperture: half-extent (rows-1)*spacing/4
            let half = (rows as f64 - 1.0) * spacing / 4.0;
            let mut feeds = Vec::with_capacity(k_side * k_side);
            for i in 0..k_side {
                for j in 0..k_side {
                    let frac = |idx: usize| {
                        if k_side == 1 {
                            0.0
                        } else {
                            2.0 * (idx as f64 / (k_side as f64 - 1.0)) - 1.0
                        }
                    };
                    feeds.push([frac(i) * half, frac(j) * half, 0.0]);
                }
            }
            feeds
        }
    };
    SurfacePanel::new(rows, spacing, wavelength, elements, feeds)
}

/// Reference-wave phase matrix: entry `(n, k)` is `exp(-i k_f d_{n,k})` with
/// `d_{n,k}` the feed-to-element distance. Unit modulus by construction.
pub fn feed_phase_matrix(panel: &SurfacePanel) -> Array2<Complex64> {
    feed_phase_matrix_with_index(panel, 1.0)
}

/// Same as [`feed_phase_matrix`] with a waveguide refractive-index multiplier
/// on the free-space wavenumber.
pub fn feed_phase_matrix_with_index(panel: &SurfacePanel, ref_index: f64) -> Array2<Complex64> {
    let k_f = panel.wavenumber() * ref_index;
    let n = panel.num_elements();
    let k = panel.num_feeds();
    let mut theta = Array2::<Complex64>::zeros((n, k));
    for (ni, &e) in panel.element_positions.iter().enumerate() {
        for (ki, &f) in panel.feed_positions.iter().enumerate() {
            let phase = -k_f * distance(e, f);
            theta[(ni, ki)] = Complex64::from_polar(1.0, phase);
        }
    }
    theta
}

/// Receive-side phase vector for a single-feed panel: entry `m` is
/// `exp(-i k_f d_m)`.
pub fn rx_phase_vector(panel: &SurfacePanel) -> Result<Array1<Complex64>, GeometryError> {
    if panel.num_feeds() != 1 {
        return Err(GeometryError::NeedsSingleFeed(panel.num_feeds()));
    }
    let k_f = panel.wavenumber();
    let feed = panel.feed_positions[0];
    Ok(Array1::from_iter(
        panel
            .element_positions
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -k_f * distance(e, feed))),
    ))
}

/// Holographic amplitude pattern toward `object_direction` (unit vector):
/// per element and feed the interference phase is
/// `k_s . r_n - k_f d_{n,k}` with `k_s = k_f * object_direction`; the
/// per-feed amplitude `(cos(phase) + 1) / 2` is averaged over feeds.
/// All outputs lie in `[0, 1]`.
pub fn holographic_amplitude(
    panel: &SurfacePanel,
    object_direction: [f64; 3],
) -> Result<Array1<f64>, GeometryError> {
    let norm = (object_direction[0].powi(2)
        + object_direction[1].powi(2)
        + object_direction[2].powi(2))
    .sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(GeometryError::NonUnitDirection);
    }
    let k_f = panel.wavenumber();
    let num_feeds = panel.num_feeds() as f64;
    Ok(Array1::from_iter(panel.element_positions.iter().map(|&e| {
        let obj_phase = k_f
            * (object_direction[0] * e[0]
                + object_direction[1] * e[1]
                + object_direction[2] * e[2]);
        let sum: f64 = panel
            .feed_positions
            .iter()
            .map(|&f| {
                let phase = obj_phase - k_f * distance(e, f);
                (phase.cos() + 1.0) / 2.0
            })
            .sum();
        sum / num_feeds
    })))
}

impl PhaseCoupling {
    /// Builds the fixed phase couplings from a transmit and a receive panel.
    pub fn from_panels(tx: &SurfacePanel, rx: &SurfacePanel) -> Result<Self, GeometryError> {
        Ok(Self { theta: feed_phase_matrix(tx), beta: rx_phase_vector(rx)? })
    }
}
