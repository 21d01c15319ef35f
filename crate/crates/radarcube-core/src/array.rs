//! MIMO antenna layouts, virtual-array synthesis, redundancy analysis,
//! ladder-shape layout generation and ambiguity-map evaluation.
//!
//! Geometry conventions used everywhere in this crate:
//!
//! * element positions are 2D `(x, z)` pairs in units of the carrier
//!   wavelength λ: `x` horizontal (azimuth axis), `z` vertical
//!   (elevation axis); the array plane sits at `y = 0` with boresight
//!   along `+y`;
//! * a virtual element is the *sum* of its TX and RX positions
//!   (`p_v = p_tx + p_rx`), which folds the two-way phase-center factor
//!   into the position units, so steering phases are always
//!   `2π · p · u` with `u = (sin az · cos el, sin el)`;
//! * spectra and ambiguity maps are magnitudes; dB values are
//!   `20·log10(magnitude)`.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::RadarError;
use crate::Result;

/// Position tolerance (λ) below which two coordinates are considered equal.
pub const POSITION_TOL_LAMBDA: f64 = 1e-9;

/// Sidelobe/grating ceiling inside the field of view, amplitude dB.
pub const SIDELOBE_CEILING_DB: f64 = -10.0;

/// Amplitude at the half-power (−3 dB) point.
const HALF_POWER_AMPLITUDE: f64 = std::f64::consts::FRAC_1_SQRT_2;

// ─── Geometry types ─────────────────────────────────────────────────────────

/// Antenna element position in λ units: `x` horizontal, `z` vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ElementPos {
    pub x: f64,
    pub z: f64,
}

impl ElementPos {
    pub fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }
}

impl From<[f64; 2]> for ElementPos {
    fn from(v: [f64; 2]) -> Self {
        Self { x: v[0], z: v[1] }
    }
}

impl From<ElementPos> for [f64; 2] {
    fn from(p: ElementPos) -> [f64; 2] {
        [p.x, p.z]
    }
}

/// Physical TX/RX element positions plus the board bounding box, all in λ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AntennaLayout {
    pub tx: Vec<ElementPos>,
    pub rx: Vec<ElementPos>,
    /// Bounding-box budget `[x_extent, z_extent]` the elements must fit in.
    pub board_extent: [f64; 2],
}

impl AntennaLayout {
    pub fn num_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn num_rx(&self) -> usize {
        self.rx.len()
    }

    /// Checks the layout invariants: non-empty sets, no duplicate TX or RX
    /// element, and every element inside the board extent.
    pub fn validate(&self) -> Result<()> {
        if self.tx.is_empty() || self.rx.is_empty() {
            return Err(RadarError::InvalidConfig(
                "layout needs at least one TX and one RX element".into(),
            ));
        }
        if self.board_extent[0] <= 0.0 || self.board_extent[1] <= 0.0 {
            return Err(RadarError::InvalidConfig("board extent must be positive".into()));
        }
        for (name, set) in [("tx", &self.tx), ("rx", &self.rx)] {
            for i in 0..set.len() {
                for j in (i + 1)..set.len() {
                    if (set[i].x - set[j].x).abs() < POSITION_TOL_LAMBDA
                        && (set[i].z - set[j].z).abs() < POSITION_TOL_LAMBDA
                    {
                        return Err(RadarError::InvalidConfig(format!(
                            "duplicate {name} elements at index {i} and {j}"
                        )));
                    }
                }
            }
        }
        let all = self.tx.iter().chain(self.rx.iter());
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_z, mut max_z) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in all {
            if !p.x.is_finite() || !p.z.is_finite() {
                return Err(RadarError::InvalidConfig("non-finite element position".into()));
            }
            min_x = min_x.min(p.x);
            max_x = max_x.max(p.x);
            min_z = min_z.min(p.z);
            max_z = max_z.max(p.z);
        }
        if max_x - min_x > self.board_extent[0] + POSITION_TOL_LAMBDA
            || max_z - min_z > self.board_extent[1] + POSITION_TOL_LAMBDA
        {
            return Err(RadarError::InvalidConfig(format!(
                "element span {:.3}λ × {:.3}λ exceeds board extent {:.3}λ × {:.3}λ",
                max_x - min_x,
                max_z - min_z,
                self.board_extent[0],
                self.board_extent[1]
            )));
        }
        Ok(())
    }
}

/// Synthesized virtual array: one element per (TX, RX) pair.
#[derive(Debug, Clone)]
pub struct VirtualArray {
    /// Virtual positions in λ, ordered by `l = m · N + n`.
    pub positions: Vec<ElementPos>,
    /// `channel_map[l] = (tx index m, rx index n)`.
    pub channel_map: Vec<(usize, usize)>,
    pub num_tx: usize,
    pub num_rx: usize,
}

impl VirtualArray {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Channel index for the (m, n) pair.
    pub fn channel_index(&self, tx: usize, rx: usize) -> usize {
        tx * self.num_rx + rx
    }

    /// TX index per channel, in channel order.
    pub fn tx_indices(&self) -> Vec<usize> {
        self.channel_map.iter().map(|&(m, _)| m).collect()
    }
}

/// Builds the virtual array with the sum convention `p_v = p_tx + p_rx`
/// and deterministic channel ordering `l = m · N + n`.
pub fn synthesize_virtual_array(layout: &AntennaLayout) -> Result<VirtualArray> {
    layout.validate()?;
    let n = layout.rx.len();
    let mut positions = Vec::with_capacity(layout.tx.len() * n);
    let mut channel_map = Vec::with_capacity(layout.tx.len() * n);
    for (m, t) in layout.tx.iter().enumerate() {
        for (r, rxp) in layout.rx.iter().enumerate() {
            positions.push(ElementPos::new(t.x + rxp.x, t.z + rxp.z));
            channel_map.push((m, r));
        }
    }
    Ok(VirtualArray {
        positions,
        channel_map,
        num_tx: layout.tx.len(),
        num_rx: layout.rx.len(),
    })
}

// ─── Redundancy ─────────────────────────────────────────────────────────────

/// Array redundancy along one axis: `C(L,2) / L_max`, where `L_max` is the
/// number of distinct positive pairwise position differences (the count of
/// unique off-diagonal covariance lags). Differences are compared with a
/// tolerance of 1e-9 λ.
pub fn redundancy(positions: &[f64]) -> Result<f64> {
    if positions.len() < 2 {
        return Err(RadarError::InputTooSmall(
            "redundancy needs at least 2 elements".into(),
        ));
    }
    let l = positions.len();
    let mut diffs = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in (i + 1)..l {
            let d = (positions[i] - positions[j]).abs();
            if d > POSITION_TOL_LAMBDA {
                diffs.push(d);
            }
        }
    }
    if diffs.is_empty() {
        return Err(RadarError::Degenerate(
            "all positions coincide; no positive lags".into(),
        ));
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = 1usize;
    for w in diffs.windows(2) {
        if w[1] - w[0] > POSITION_TOL_LAMBDA {
            distinct += 1;
        }
    }
    let pairs = (l * (l - 1) / 2) as f64;
    Ok(pairs / distinct as f64)
}

// ─── Covariance model ───────────────────────────────────────────────────────

/// Narrowband covariance matrix for incoherent far-field sources:
/// `R_ij = Σ_k P_k · exp(−j2π (d_i − d_j) sin φ_k) + noise · [i = j]`,
/// positions in λ. Returned row-major, L×L.
pub fn covariance_model(
    positions: &[f64],
    doas_deg: &[f64],
    powers: &[f64],
    noise_power: f64,
) -> Result<Vec<Complex64>> {
    if doas_deg.len() != powers.len() {
        return Err(RadarError::InvalidConfig(
            "covariance_model: doas and powers length mismatch".into(),
        ));
    }
    if powers.iter().any(|&p| p < 0.0) || noise_power < 0.0 {
        return Err(RadarError::InvalidConfig(
            "covariance_model: powers must be nonnegative".into(),
        ));
    }
    let l = positions.len();
    let mut r = vec![Complex64::new(0.0, 0.0); l * l];
    let sines: Vec<f64> = doas_deg.iter().map(|d| d.to_radians().sin()).collect();
    for i in 0..l {
        for j in 0..l {
            let lag = positions[i] - positions[j];
            let mut v = Complex64::new(0.0, 0.0);
            for (s, &p) in sines.iter().zip(powers) {
                v += p * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * lag * s);
            }
            if i == j {
                v += noise_power;
            }
            r[i * l + j] = v;
        }
    }
    Ok(r)
}

// ─── Angle grids and steering evaluation ────────────────────────────────────

/// Direction cosines for the crate-wide convention
/// `u = (sin az · cos el, sin el)`.
pub fn direction_cosines(az_deg: f64, el_deg: f64) -> (f64, f64) {
    let az = az_deg.to_radians();
    let el = el_deg.to_radians();
    (az.sin() * el.cos(), el.sin())
}

/// Uniformly spaced 1D angle grid in degrees (inclusive of both ends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGrid {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl LinearGrid {
    pub fn new(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Self> {
        let g = Self { start_deg, stop_deg, step_deg };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_deg > 0.0) || self.stop_deg < self.start_deg {
            return Err(RadarError::InvalidConfig(format!(
                "bad angle grid [{}, {}] step {}",
                self.start_deg, self.stop_deg, self.step_deg
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.stop_deg - self.start_deg) / self.step_deg).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.start_deg + idx as f64 * self.step_deg
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    /// Index of the grid point closest to `deg`.
    pub fn nearest(&self, deg: f64) -> usize {
        let i = ((deg - self.start_deg) / self.step_deg).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }

    pub fn contains(&self, deg: f64) -> bool {
        deg >= self.start_deg - 1e-12 && deg <= self.stop_deg + 1e-12
    }
}

/// 2D azimuth × elevation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub az: LinearGrid,
    pub el: LinearGrid,
}

impl AngleGrid {
    pub fn new(az: LinearGrid, el: LinearGrid) -> Self {
        Self { az, el }
    }

    pub fn cells(&self) -> usize {
        self.az.len() * self.el.len()
    }
}

/// Precomputed steering table over an [`AngleGrid`] for one virtual array.
///
/// The correlation `|a(α)ᴴ s|` factors per elevation row: elements sharing
/// an x position are folded together once per row, so the per-cell work is
/// one complex multiply-add per *unique* x rather than per element. The
/// table holds `exp(+j2π x · u_x(az, el))` for every (cell, unique x) and
/// is reused across snapshots, which is what makes per-detection DOA cheap.
pub struct SteeringGrid {
    pub grid: AngleGrid,
    unique_x: Vec<f64>,
    x_index: Vec<usize>,
    z: Vec<f64>,
    table: Vec<Complex64>,
}

/// Entry budget above which the steering table is not materialized.
const STEERING_TABLE_MAX_ENTRIES: usize = 128 << 20;

impl SteeringGrid {
    pub fn new(array: &VirtualArray, grid: AngleGrid) -> Result<Self> {
        grid.az.validate()?;
        grid.el.validate()?;
        if array.is_empty() {
            return Err(RadarError::InvalidConfig("empty virtual array".into()));
        }
        let mut unique_x: Vec<f64> = Vec::new();
        let mut x_index = Vec::with_capacity(array.len());
        for p in &array.positions {
            match unique_x
                .iter()
                .position(|&ux| (ux - p.x).abs() < POSITION_TOL_LAMBDA)
            {
                Some(i) => x_index.push(i),
                None => {
                    unique_x.push(p.x);
                    x_index.push(unique_x.len() - 1);
                }
            }
        }
        let z: Vec<f64> = array.positions.iter().map(|p| p.z).collect();
        let cells = grid.cells();
        let entries = cells.checked_mul(unique_x.len()).ok_or_else(|| {
            RadarError::InvalidConfig("steering grid size overflow".into())
        })?;
        if entries > STEERING_TABLE_MAX_ENTRIES {
            return Err(RadarError::InvalidConfig(format!(
                "steering table too large: {entries} entries"
            )));
        }
        let n_az = grid.az.len();
        let mut table = vec![Complex64::new(0.0, 0.0); entries];
        let two_pi = 2.0 * std::f64::consts::PI;
        for (ei, el) in grid.el.values().iter().enumerate() {
            let cos_el = el.to_radians().cos();
            for (ai, az) in grid.az.values().iter().enumerate() {
                let ux = az.to_radians().sin() * cos_el;
                let base = (ei * n_az + ai) * unique_x.len();
                for (xi, &x) in unique_x.iter().enumerate() {
                    table[base + xi] = Complex64::from_polar(1.0, two_pi * x * ux);
                }
            }
        }
        Ok(Self { grid, unique_x, x_index, z, table })
    }

    /// Evaluates `|a(α)ᴴ s|` on every grid cell; output is el-major
    /// (`mag[el_idx * n_az + az_idx]`), not normalized.
    pub fn correlate(&self, snapshot: &[Complex64]) -> Result<Vec<f64>> {
        if snapshot.len() != self.x_index.len() {
            return Err(RadarError::InvalidConfig(format!(
                "snapshot length {} does not match array size {}",
                snapshot.len(),
                self.x_index.len()
            )));
        }
        let n_az = self.grid.az.len();
        let n_el = self.grid.el.len();
        let nx = self.unique_x.len();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut out = vec![0.0f64; n_az * n_el];
        let mut groups = vec![Complex64::new(0.0, 0.0); nx];
        for (ei, el) in self.grid.el.values().iter().enumerate() {
            let uy = el.to_radians().sin();
            for g in groups.iter_mut() {
                *g = Complex64::new(0.0, 0.0);
            }
            for (l, &s) in snapshot.iter().enumerate() {
                groups[self.x_index[l]] += s * Complex64::from_polar(1.0, two_pi * self.z[l] * uy);
            }
            for ai in 0..n_az {
                let base = (ei * n_az + ai) * nx;
                let mut acc = Complex64::new(0.0, 0.0);
                for (xi, g) in groups.iter().enumerate() {
                    acc += g * self.table[base + xi];
                }
                out[ei * n_az + ai] = acc.norm();
            }
        }
        Ok(out)
    }
}

/// Direct (uncached) steering correlation at a list of (az, el) points.
pub fn correlate_at(
    array: &VirtualArray,
    snapshot: &[Complex64],
    points: &[(f64, f64)],
) -> Result<Vec<f64>> {
    if snapshot.len() != array.len() {
        return Err(RadarError::InvalidConfig(
            "snapshot length does not match array size".into(),
        ));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(points
        .iter()
        .map(|&(az, el)| {
            let (ux, uy) = direction_cosines(az, el);
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, &s) in array.positions.iter().zip(snapshot) {
                acc += s * Complex64::from_polar(1.0, two_pi * (p.x * ux + p.z * uy));
            }
            acc.norm()
        })
        .collect())
}

/// Steering vector `a_l = exp(−j2π p_l · u(az, el))` for the array.
pub fn steering_vector(array: &VirtualArray, az_deg: f64, el_deg: f64) -> Vec<Complex64> {
    let (ux, uy) = direction_cosines(az_deg, el_deg);
    let two_pi = 2.0 * std::f64::consts::PI;
    array
        .positions
        .iter()
        .map(|p| Complex64::from_polar(1.0, -two_pi * (p.x * ux + p.z * uy)))
        .collect()
}

// ─── Ambiguity map ──────────────────────────────────────────────────────────

/// Normalized array ambiguity map |χ| over an angle grid; peak is 1 at the
/// reference direction.
#[derive(Debug, Clone)]
pub struct AmbiguityMap {
    pub grid: AngleGrid,
    /// el-major magnitudes, `magnitude[el_idx * n_az + az_idx]`, peak 1.
    pub magnitude: Vec<f64>,
    pub reference_deg: (f64, f64),
}

impl AmbiguityMap {
    pub fn value(&self, az_idx: usize, el_idx: usize) -> f64 {
        self.magnitude[el_idx * self.grid.az.len() + az_idx]
    }
}

/// Evaluates the normalized ambiguity function
/// `|Σ_l exp(j2π p_l · (u(α) − u(θ)))| / L` over the grid.
///
/// The grid must cover the field of view and contain the reference
/// direction; the value at the reference cell is 1 by construction.
pub fn ambiguity_map(
    array: &VirtualArray,
    reference_deg: (f64, f64),
    grid: AngleGrid,
) -> Result<AmbiguityMap> {
    debug_assert!(grid.az.contains(reference_deg.0) && grid.el.contains(reference_deg.1));
    let snapshot = steering_vector(array, reference_deg.0, reference_deg.1);
    let steering = SteeringGrid::new(array, grid)?;
    let l = array.len() as f64;
    let magnitude = steering
        .correlate(&snapshot)?
        .into_iter()
        .map(|m| m / l)
        .collect();
    Ok(AmbiguityMap { grid, magnitude, reference_deg })
}

/// Axis selector for map cuts and 1D spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleAxis {
    Azimuth,
    Elevation,
}

/// Full −3 dB mainlobe width (degrees) along one axis of an ambiguity map,
/// measured through the reference cell with linear interpolation between
/// grid points. Fails when the mainlobe cannot be resolved on the grid.
pub fn resolution_from_map(map: &AmbiguityMap, axis: AngleAxis) -> Result<f64> {
    let az_ref = map.grid.az.nearest(map.reference_deg.0);
    let el_ref = map.grid.el.nearest(map.reference_deg.1);
    let (angles, mags) = match axis {
        AngleAxis::Azimuth => {
            let mags: Vec<f64> = (0..map.grid.az.len()).map(|a| map.value(a, el_ref)).collect();
            (map.grid.az.values(), mags)
        }
        AngleAxis::Elevation => {
            let mags: Vec<f64> = (0..map.grid.el.len()).map(|e| map.value(az_ref, e)).collect();
            (map.grid.el.values(), mags)
        }
    };
    width_from_cut(&angles, &mags)
}

/// −3 dB full width of the peak of a sampled cut, linear interpolation at
/// the crossings. `angles` must be ascending and uniform.
pub fn width_from_cut(angles: &[f64], mags: &[f64]) -> Result<f64> {
    if angles.len() != mags.len() || angles.len() < 3 {
        return Err(RadarError::InputTooSmall("cut too short for width".into()));
    }
    let peak_idx = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let peak = mags[peak_idx];
    if peak <= 0.0 {
        return Err(RadarError::Degenerate("all-zero cut".into()));
    }
    let level = peak * HALF_POWER_AMPLITUDE;
    let cross = |i0: usize, i1: usize| -> f64 {
        // linear interpolation of the crossing between samples i0 and i1
        let (m0, m1) = (mags[i0], mags[i1]);
        let t = (m0 - level) / (m0 - m1);
        angles[i0] + t * (angles[i1] - angles[i0])
    };
    let mut left = None;
    for i in (0..peak_idx).rev() {
        if mags[i] < level {
            left = Some(cross(i + 1, i));
            break;
        }
    }
    let mut right = None;
    for i in (peak_idx + 1)..mags.len() {
        if mags[i] < level {
            right = Some(cross(i - 1, i));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok((r - l).abs()),
        _ => Err(RadarError::Degenerate(
            "mainlobe not resolvable on the grid".into(),
        )),
    }
}

// ─── Constraints and layout generation ──────────────────────────────────────

/// Design constraints for ladder-layout generation (defaults follow the
/// deployed-system targets: ±60°/±20° FoV, 2°/6° resolution, 35λ board,
/// 12 TX × 16 RX).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSet {
    pub min_fov_az_deg: f64,
    pub min_fov_el_deg: f64,
    pub max_res_az_deg: f64,
    pub max_res_el_deg: f64,
    pub max_extent_lambda: f64,
    pub num_tx: usize,
    pub num_rx: usize,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            min_fov_az_deg: 60.0,
            min_fov_el_deg: 20.0,
            max_res_az_deg: 2.0,
            max_res_el_deg: 6.0,
            max_extent_lambda: 35.0,
            num_tx: 12,
            num_rx: 16,
        }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_fov_az_deg > 0.0
            && self.min_fov_el_deg > 0.0
            && self.max_res_az_deg > 0.0
            && self.max_res_el_deg > 0.0
            && self.max_extent_lambda > 0.0
            && self.num_tx >= 1
            && self.num_rx >= 1;
        if ok {
            Ok(())
        } else {
            Err(RadarError::InvalidConfig("all constraint fields must be positive".into()))
        }
    }

    /// A resolution bound at least as wide as the full FoV span disables
    /// that axis's width requirement.
    fn az_width_checked(&self) -> bool {
        self.max_res_az_deg < 2.0 * self.min_fov_az_deg
    }

    fn el_width_checked(&self) -> bool {
        self.max_res_el_deg < 2.0 * self.min_fov_el_deg
    }
}

/// Result of checking one layout against a [`ConstraintSet`].
#[derive(Debug, Clone)]
pub struct ConstraintReport {
    pub az_width_deg: Option<f64>,
    pub el_width_deg: Option<f64>,
    pub worst_sidelobe_db: f64,
    pub redundancy_horizontal: f64,
    pub redundancy_vertical: Option<f64>,
    pub violations: Vec<String>,
}

impl ConstraintReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Measurement grid step (deg) for the fine width cuts in the verifier.
const VERIFY_CUT_STEP_DEG: f64 = 0.02;
/// Sidelobe-scan steps (deg); lobes are never narrower than the mainlobe,
/// so this comfortably oversamples them for any in-budget aperture.
const VERIFY_SCAN_AZ_STEP_DEG: f64 = 0.25;
const VERIFY_SCAN_EL_STEP_DEG: f64 = 0.5;

/// Verifies a layout against constraints: −3 dB widths on both axes, the
/// in-FoV sidelobe/grating ceiling, the board extent, and reports the
/// coarray redundancies.
pub fn verify_constraints(layout: &AntennaLayout, c: &ConstraintSet) -> Result<ConstraintReport> {
    c.validate()?;
    let mut violations = Vec::new();
    if let Err(e) = layout.validate() {
        violations.push(e.to_string());
    }
    if layout.num_tx() != c.num_tx || layout.num_rx() != c.num_rx {
        violations.push(format!(
            "element counts {}×{} differ from required {}×{}",
            layout.num_tx(),
            layout.num_rx(),
            c.num_tx,
            c.num_rx
        ));
    }
    let array = synthesize_virtual_array(layout)?;

    let xs: Vec<f64> = array.positions.iter().map(|p| p.x).collect();
    let zs: Vec<f64> = array.positions.iter().map(|p| p.z).collect();
    let redundancy_horizontal = redundancy(&xs).unwrap_or(f64::INFINITY);
    let redundancy_vertical = redundancy(&zs).ok();

    // Width cuts through boresight at a fine fixed step.
    let az_cut = cut_magnitudes(&array, AngleAxis::Azimuth, c.min_fov_az_deg);
    let el_cut = cut_magnitudes(&array, AngleAxis::Elevation, c.min_fov_el_deg);
    let az_width_deg = width_from_cut(&az_cut.0, &az_cut.1).ok();
    let el_width_deg = width_from_cut(&el_cut.0, &el_cut.1).ok();

    if c.az_width_checked() {
        match az_width_deg {
            Some(w) if w <= c.max_res_az_deg + VERIFY_CUT_STEP_DEG => {}
            Some(w) => violations.push(format!(
                "azimuth −3 dB width {w:.3}° exceeds {:.3}°",
                c.max_res_az_deg
            )),
            None => violations.push("azimuth mainlobe not resolvable inside the FoV".into()),
        }
    }
    if c.el_width_checked() {
        match el_width_deg {
            Some(w) if w <= c.max_res_el_deg + VERIFY_CUT_STEP_DEG => {}
            Some(w) => violations.push(format!(
                "elevation −3 dB width {w:.3}° exceeds {:.3}°",
                c.max_res_el_deg
            )),
            None => violations.push("elevation mainlobe not resolvable inside the FoV".into()),
        }
    }

    // Sidelobe/grating scan over the FoV, excluding the mainlobe region.
    let excl_az = 1.6 * az_width_deg.unwrap_or(2.0 * c.min_fov_az_deg);
    let excl_el = 1.6 * el_width_deg.unwrap_or(2.0 * c.min_fov_el_deg);
    let grid = AngleGrid::new(
        LinearGrid::new(-c.min_fov_az_deg, c.min_fov_az_deg, VERIFY_SCAN_AZ_STEP_DEG)?,
        LinearGrid::new(-c.min_fov_el_deg, c.min_fov_el_deg, VERIFY_SCAN_EL_STEP_DEG)?,
    );
    let map = ambiguity_map(&array, (0.0, 0.0), grid)?;
    let mut worst = 0.0f64;
    for (ei, el) in map.grid.el.values().iter().enumerate() {
        for (ai, az) in map.grid.az.values().iter().enumerate() {
            if az.abs() <= excl_az && el.abs() <= excl_el {
                continue;
            }
            worst = worst.max(map.value(ai, ei));
        }
    }
    let worst_sidelobe_db = if worst > 0.0 {
        20.0 * worst.log10()
    } else {
        f64::NEG_INFINITY
    };
    if worst_sidelobe_db > SIDELOBE_CEILING_DB {
        violations.push(format!(
            "worst in-FoV sidelobe {worst_sidelobe_db:.2} dB above the {SIDELOBE_CEILING_DB:.0} dB ceiling"
        ));
    }

    Ok(ConstraintReport {
        az_width_deg,
        el_width_deg,
        worst_sidelobe_db,
        redundancy_horizontal,
        redundancy_vertical,
        violations,
    })
}

fn cut_magnitudes(array: &VirtualArray, axis: AngleAxis, half_span_deg: f64) -> (Vec<f64>, Vec<f64>) {
    let n = (2.0 * half_span_deg / VERIFY_CUT_STEP_DEG).round() as usize + 1;
    let angles: Vec<f64> = (0..n)
        .map(|i| -half_span_deg + i as f64 * VERIFY_CUT_STEP_DEG)
        .collect();
    let points: Vec<(f64, f64)> = angles
        .iter()
        .map(|&a| match axis {
            AngleAxis::Azimuth => (a, 0.0),
            AngleAxis::Elevation => (0.0, a),
        })
        .collect();
    let boresight = steering_vector(array, 0.0, 0.0);
    let mags = correlate_at(array, &boresight, &points).expect("sizes match");
    let l = array.len() as f64;
    (angles, mags.into_iter().map(|m| m / l).collect())
}

// ─── Minimum-redundancy patterns (exhaustive difference-cover search) ───────

/// Largest-aperture integer element pattern `{0, ..., A}` with `n` elements
/// whose pairwise differences cover every lag `1..=A` (a restricted
/// minimum-redundancy array), found by exhaustive search. Deterministic:
/// the lexicographically smallest pattern at the maximal aperture wins.
/// Practical for `n ≤ 8`.
pub fn minimum_redundancy_pattern(n: usize) -> Result<Vec<u32>> {
    if n < 1 {
        return Err(RadarError::InvalidConfig("pattern needs n ≥ 1".into()));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    if n > 8 {
        return Err(RadarError::InvalidConfig(
            "exhaustive MRA search supported for n ≤ 8".into(),
        ));
    }
    let max_aperture = (n * (n - 1) / 2) as u32;
    for aperture in (n as u32 - 1..=max_aperture).rev() {
        if let Some(p) = find_cover(n, aperture) {
            return Ok(p);
        }
    }
    // n−1 aperture is a ULA and always covers, so this is unreachable.
    unreachable!("ULA fallback always exists");
}

/// First (lex order) n-element pattern {0, inner..., aperture} covering all
/// lags 1..=aperture, if any.
fn find_cover(n: usize, aperture: u32) -> Option<Vec<u32>> {
    let inner = n - 2;
    let mut combo: Vec<u32> = (1..=inner as u32).collect();
    loop {
        let mut pattern = Vec::with_capacity(n);
        pattern.push(0);
        pattern.extend_from_slice(&combo);
        pattern.push(aperture);
        if covers_all_lags(&pattern, aperture) {
            return Some(pattern);
        }
        // next combination of `inner` values from 1..aperture
        let mut i = inner;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            let max_here = aperture - (inner - i) as u32;
            if combo[i] < max_here {
                combo[i] += 1;
                for j in (i + 1)..inner {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
        if inner == 0 {
            // no inner elements: single pattern {0, aperture}
            return if covers_all_lags(&[0, aperture], aperture) {
                Some(vec![0, aperture])
            } else {
                None
            };
        }
    }
}

fn covers_all_lags(pattern: &[u32], aperture: u32) -> bool {
    let mut seen = vec![false; aperture as usize + 1];
    for i in 0..pattern.len() {
        for j in (i + 1)..pattern.len() {
            let d = pattern[j].abs_diff(pattern[i]) as usize;
            if d <= aperture as usize {
                seen[d] = true;
            }
        }
    }
    seen[1..].iter().all(|&s| s)
}

// ─── Ladder layout generation ───────────────────────────────────────────────

/// Lattice pitch (λ) for generated layouts.
const LATTICE_PITCH: f64 = 0.5;
/// Vertical gap (λ) between the TX row and the first RX ladder row.
const TX_RX_ROW_GAP: f64 = 2.0;
/// Mainlobe-width safety margin applied to aperture sizing (the effective
/// multiplicity taper of a tiled virtual array widens the lobe slightly).
const WIDTH_MARGIN: f64 = 1.12;

/// One ladder candidate during generation.
struct LadderCandidate {
    tx_slots: Vec<u32>,
    comb_width: u32,
    assignment: Vec<usize>,
    rows_z: Vec<f64>,
    lag_count: usize,
}

/// Generates a ladder-shape layout meeting the constraints.
///
/// TX elements form a horizontal lattice line array (uniform-pitch seeds
/// refined by deterministic single-element hill climbing on the
/// distinct-lag count, which is exactly minimizing the horizontal
/// virtual-coarray redundancy). RX elements form a horizontal comb of
/// configurable width folded over up to 7 ladder rows whose vertical
/// spacing follows an exhaustively found minimum-redundancy pattern;
/// several deterministic row-assignment patterns are explored because the
/// assignment controls the off-axis cross terms. Candidates are ranked by
/// redundancy then screened with a coarse ambiguity scan, and the first
/// one passing [`verify_constraints`] wins.
pub fn generate_ladder_layout(c: &ConstraintSet) -> Result<AntennaLayout> {
    c.validate()?;
    let d = LATTICE_PITCH;

    // Cheap infeasibility bounds from the Rayleigh width of the largest
    // aperture the board allows.
    if c.az_width_checked() {
        let best_deg = (0.886 / (2.0 * c.max_extent_lambda)).to_degrees();
        if best_deg > c.max_res_az_deg {
            return Err(RadarError::InfeasibleConstraints(format!(
                "azimuth width {best_deg:.3}° at the full {:.1}λ aperture exceeds {:.3}°",
                2.0 * c.max_extent_lambda,
                c.max_res_az_deg
            )));
        }
    }
    if c.el_width_checked() {
        let best_deg = (0.886 / c.max_extent_lambda).to_degrees();
        if best_deg > c.max_res_el_deg {
            return Err(RadarError::InfeasibleConstraints(format!(
                "elevation width {best_deg:.3}° at the full {:.1}λ aperture exceeds {:.3}°",
                c.max_extent_lambda, c.max_res_el_deg
            )));
        }
        if c.num_rx < 2 {
            return Err(RadarError::InfeasibleConstraints(
                "elevation resolution requires at least 2 RX elements".into(),
            ));
        }
    }

    let rows = c.num_rx.min(7);
    let row_patterns = vertical_row_candidates(c, rows)?;

    let mut candidates: Vec<LadderCandidate> = Vec::new();
    for w in comb_width_candidates(c.num_rx) {
        let rx_span = (w - 1) as f64 * d;
        if rx_span > c.max_extent_lambda {
            continue;
        }
        let rx_slots: Vec<u32> = (0..w).collect();
        let tx_list = match tx_line_candidates(c, d, &rx_slots) {
            Ok(list) => list,
            Err(_) => continue,
        };
        for tx_slots in tx_list.into_iter().take(3) {
            let (lag_count, _) = virtual_lag_count(&tx_slots, &rx_slots);
            for rows_z in &row_patterns {
                for assignment in assignment_candidates(c.num_rx, rows_z.len(), w as usize) {
                    candidates.push(LadderCandidate {
                        tx_slots: tx_slots.clone(),
                        comb_width: w,
                        assignment,
                        rows_z: rows_z.clone(),
                        lag_count,
                    });
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(RadarError::InfeasibleConstraints(
            "no ladder candidate fits the board extent".into(),
        ));
    }
    // minimal redundancy first (C(L,2) is fixed, so max distinct lags),
    // deterministic tie-breaking on the position vectors
    candidates.sort_by(|a, b| {
        b.lag_count
            .cmp(&a.lag_count)
            .then(a.tx_slots.cmp(&b.tx_slots))
            .then(a.comb_width.cmp(&b.comb_width))
            .then(a.assignment.cmp(&b.assignment))
    });

    let mut verified = 0usize;
    for cand in &candidates {
        let layout = assemble_layout(c, cand, d);
        if layout.validate().is_err() {
            continue;
        }
        if !coarse_sidelobe_acceptable(&layout, c) {
            continue;
        }
        verified += 1;
        if verified > 40 {
            break;
        }
        let report = verify_constraints(&layout, c)?;
        if report.passes() {
            return Ok(layout);
        }
    }
    Err(RadarError::InfeasibleConstraints(
        "layout search exhausted its candidates without meeting the constraints".into(),
    ))
}

fn assemble_layout(c: &ConstraintSet, cand: &LadderCandidate, d: f64) -> AntennaLayout {
    let tx: Vec<ElementPos> = cand
        .tx_slots
        .iter()
        .map(|&s| ElementPos::new(s as f64 * d, 0.0))
        .collect();
    let rx: Vec<ElementPos> = (0..c.num_rx)
        .map(|k| {
            ElementPos::new(
                (k as u32 % cand.comb_width) as f64 * d,
                TX_RX_ROW_GAP + cand.rows_z[cand.assignment[k]],
            )
        })
        .collect();
    AntennaLayout {
        tx,
        rx,
        board_extent: [c.max_extent_lambda, c.max_extent_lambda],
    }
}

/// RX comb widths to explore: the plain full-width comb plus narrow tiled
/// combs whose width matches practical TX tiling pitches.
fn comb_width_candidates(num_rx: usize) -> Vec<u32> {
    let mut out = vec![num_rx as u32];
    for w in [8u32, 6, 5, 4] {
        if (w as usize) < num_rx {
            out.push(w);
        }
    }
    out
}

/// Deterministic row-assignment patterns for `num_rx` comb slots over
/// `rows` ladder rows: cyclic, block, and a few seeded shuffles. Patterns
/// that duplicate an (x, row) pair or leave a row empty are dropped.
fn assignment_candidates(num_rx: usize, rows: usize, comb_width: usize) -> Vec<Vec<usize>> {
    let mut raw: Vec<Vec<usize>> = Vec::new();
    raw.push((0..num_rx).map(|k| k % rows).collect());
    raw.push((0..num_rx).map(|k| k * rows / num_rx).collect());
    let base: Vec<usize> = (0..num_rx).map(|k| k % rows).collect();
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA55A_0000 + seed);
        let mut shuffled = base.clone();
        // Fisher-Yates
        for i in (1..shuffled.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        raw.push(shuffled);
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    'next: for a in raw {
        if out.contains(&a) {
            continue;
        }
        let mut occupied = vec![false; rows];
        let mut seen = std::collections::HashSet::new();
        for (k, &r) in a.iter().enumerate() {
            occupied[r] = true;
            if !seen.insert((k % comb_width, r)) {
                continue 'next; // duplicate physical RX position
            }
        }
        if occupied.iter().all(|&o| o) {
            out.push(a);
        }
    }
    out
}

/// Coarse grid step (deg) of the candidate prefilter scan.
const COARSE_SCAN_STEP_DEG: f64 = 1.0;
/// Prefilter acceptance: coarse sampling can underestimate a narrow lobe,
/// so the gate sits a few dB above the real ceiling; the fine verifier has
/// the final say.
const COARSE_SLL_GATE_DB: f64 = -8.0;

fn coarse_sidelobe_acceptable(layout: &AntennaLayout, c: &ConstraintSet) -> bool {
    let array = match synthesize_virtual_array(layout) {
        Ok(a) => a,
        Err(_) => return false,
    };
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_z, mut max_z) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &array.positions {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_z = min_z.min(p.z);
        max_z = max_z.max(p.z);
    }
    let pred_az = (0.886 / (max_x - min_x).max(0.5)).to_degrees();
    let pred_el = (0.886 / (max_z - min_z).max(0.5)).to_degrees();
    let grid = AngleGrid::new(
        LinearGrid::new(-c.min_fov_az_deg, c.min_fov_az_deg, COARSE_SCAN_STEP_DEG).unwrap(),
        LinearGrid::new(-c.min_fov_el_deg, c.min_fov_el_deg, COARSE_SCAN_STEP_DEG).unwrap(),
    );
    let map = match ambiguity_map(&array, (0.0, 0.0), grid) {
        Ok(m) => m,
        Err(_) => return false,
    };
    let excl_az = (2.0 * pred_az).max(2.0 * COARSE_SCAN_STEP_DEG);
    let excl_el = (2.0 * pred_el).max(2.0 * COARSE_SCAN_STEP_DEG);
    let mut worst = 0.0f64;
    for (ei, el) in map.grid.el.values().iter().enumerate() {
        for (ai, az) in map.grid.az.values().iter().enumerate() {
            if az.abs() <= excl_az && el.abs() <= excl_el {
                continue;
            }
            worst = worst.max(map.value(ai, ei));
        }
    }
    20.0 * worst.max(1e-12).log10() <= COARSE_SLL_GATE_DB
}

/// Vertical row-offset candidates (λ), minimum-redundancy pattern first.
fn vertical_row_candidates(c: &ConstraintSet, rows: usize) -> Result<Vec<Vec<f64>>> {
    if rows == 1 {
        return Ok(vec![vec![0.0]]);
    }
    let needed_aperture = if c.el_width_checked() {
        WIDTH_MARGIN * 0.886 / c.max_res_el_deg.to_radians()
    } else {
        0.5 * (rows - 1) as f64
    };
    let mut candidates = Vec::new();
    let mut patterns: Vec<Vec<u32>> = Vec::new();
    if rows <= 8 {
        patterns.push(minimum_redundancy_pattern(rows)?);
    }
    patterns.push((0..rows as u32).collect()); // uniform fallback
    for pat in patterns {
        let span_units = *pat.last().unwrap() as f64;
        if span_units == 0.0 {
            continue;
        }
        // round the base spacing up to a 0.05λ grid
        let base = ((needed_aperture / span_units) / 0.05).ceil() * 0.05;
        let base = base.max(0.05);
        if span_units * base > c.max_extent_lambda {
            continue;
        }
        candidates.push(pat.iter().map(|&u| u as f64 * base).collect());
    }
    if candidates.is_empty() {
        return Err(RadarError::InfeasibleConstraints(
            "no vertical row pattern fits the board extent".into(),
        ));
    }
    Ok(candidates)
}

/// TX line-array candidates on the λ/2 lattice for a given RX comb,
/// ranked by horizontal virtual-coarray redundancy (= maximal distinct-lag
/// count), then by the predicted azimuth sidelobe level, then
/// lexicographically.
fn tx_line_candidates(c: &ConstraintSet, d: f64, rx_slots: &[u32]) -> Result<Vec<Vec<u32>>> {
    let m = c.num_tx;
    if m == 1 {
        return Ok(vec![vec![0]]);
    }
    let span_slots = (c.max_extent_lambda / d).floor() as u32;
    if span_slots < (m - 1) as u32 {
        return Err(RadarError::InfeasibleConstraints(format!(
            "{m} TX elements do not fit on a {:.1}λ lattice line",
            c.max_extent_lambda
        )));
    }

    let mut seeds: Vec<Vec<u32>> = Vec::new();
    let max_pitch = span_slots / (m as u32 - 1);
    for pitch in 1..=max_pitch.max(1) {
        let base: Vec<u32> = (0..m as u32).map(|k| k * pitch).collect();
        seeds.push(base.clone());
        // tail variant: stretch the last element to the full span
        if *base.last().unwrap() < span_slots {
            let mut stretched = base.clone();
            *stretched.last_mut().unwrap() = span_slots;
            seeds.push(stretched);
        }
    }

    let mut refined: Vec<Vec<u32>> = Vec::new();
    for seed in seeds {
        let improved = hill_climb_tx(&seed, rx_slots, span_slots);
        if !refined.contains(&improved) {
            refined.push(improved);
        }
    }
    // Rank: more distinct lags first, then lower predicted sidelobe, then lex.
    let mut ranked: Vec<(usize, f64, Vec<u32>)> = refined
        .into_iter()
        .filter_map(|tx| {
            let (lags, contiguous) = virtual_lag_count(&tx, rx_slots);
            if !contiguous {
                return None;
            }
            let sll = predicted_azimuth_sidelobe(&tx, rx_slots, c.min_fov_az_deg);
            Some((lags, sll, tx))
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
    });
    if ranked.is_empty() {
        return Err(RadarError::InfeasibleConstraints(
            "no contiguous-coverage TX candidate exists".into(),
        ));
    }
    Ok(ranked.into_iter().map(|(_, _, tx)| tx).take(6).collect())
}

/// Distinct positive lag count of the virtual slot set plus a contiguity
/// flag (no empty slot between the first and last covered slot).
fn virtual_lag_count(tx: &[u32], rx: &[u32]) -> (usize, bool) {
    let max_slot = (tx.iter().max().unwrap() + rx.iter().max().unwrap()) as usize;
    let mut occupied = vec![false; max_slot + 1];
    for &t in tx {
        for &r in rx {
            occupied[(t + r) as usize] = true;
        }
    }
    let slots: Vec<usize> = occupied
        .iter()
        .enumerate()
        .filter_map(|(i, &o)| o.then_some(i))
        .collect();
    let contiguous = slots.last().unwrap() - slots[0] + 1 == slots.len();
    let mut lag_seen = vec![false; max_slot + 1];
    let mut count = 0usize;
    for i in 0..slots.len() {
        for j in (i + 1)..slots.len() {
            let d = slots[j] - slots[i];
            if !lag_seen[d] {
                lag_seen[d] = true;
                count += 1;
            }
        }
    }
    (count, contiguous)
}

/// Deterministic best-improvement hill climb on the distinct-lag count,
/// moving one TX element at a time on the lattice; keeps the coverage
/// contiguous and the first element pinned at slot 0.
fn hill_climb_tx(seed: &[u32], rx: &[u32], span_slots: u32) -> Vec<u32> {
    let mut current = seed.to_vec();
    let (mut best_score, ok) = virtual_lag_count(&current, rx);
    if !ok {
        best_score = 0;
    }
    for _ in 0..64 {
        let mut best_move: Option<(usize, u32, usize)> = None;
        for i in 1..current.len() {
            for slot in 0..=span_slots {
                if current.contains(&slot) {
                    continue;
                }
                let mut cand = current.clone();
                cand[i] = slot;
                cand.sort_unstable();
                let (score, contiguous) = virtual_lag_count(&cand, rx);
                if !contiguous {
                    continue;
                }
                let better = match best_move {
                    None => score > best_score,
                    Some((_, _, s)) => score > s,
                };
                if better {
                    best_move = Some((i, slot, score));
                }
            }
        }
        match best_move {
            Some((i, slot, score)) if score > best_score => {
                current[i] = slot;
                current.sort_unstable();
                best_score = score;
            }
            _ => break,
        }
    }
    current
}

/// Peak sidelobe (amplitude ratio) of the boresight azimuth cut predicted
/// from the virtual slot multiplicity profile.
fn predicted_azimuth_sidelobe(tx: &[u32], rx: &[u32], fov_az_deg: f64) -> f64 {
    let max_slot = (tx.iter().max().unwrap() + rx.iter().max().unwrap()) as usize;
    let mut mult = vec![0.0f64; max_slot + 1];
    for &t in tx {
        for &r in rx {
            mult[(t + r) as usize] += 1.0;
        }
    }
    let total: f64 = mult.iter().sum();
    let u_max = fov_az_deg.to_radians().sin();
    let n_pts = 1024usize;
    let mut mags = Vec::with_capacity(n_pts + 1);
    for k in 0..=n_pts {
        let u = -u_max + 2.0 * u_max * k as f64 / n_pts as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, &w) in mult.iter().enumerate() {
            if w > 0.0 {
                acc += w * Complex64::from_polar(1.0, std::f64::consts::PI * s as f64 * u);
            }
        }
        mags.push(acc.norm() / total);
    }
    // exclude the mainlobe: walk out from the peak to the first minimum
    let peak = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut lo = peak;
    while lo > 0 && mags[lo - 1] < mags[lo] {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < mags.len() && mags[hi + 1] < mags[hi] {
        hi += 1;
    }
    mags.iter()
        .enumerate()
        .filter(|&(i, _)| i < lo || i > hi)
        .map(|(_, &m)| m)
        .fold(0.0, f64::max)
}

// ─── Tests ──────────────────────────────────────────────────────────────────
