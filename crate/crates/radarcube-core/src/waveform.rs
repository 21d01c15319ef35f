//! FMCW waveform definition, TDM-MIMO timing, point-scatterer scenes and
//! dechirped beat-signal synthesis.
//!
//! The TDM schedule is a strict round robin: chirp slot `s` (duration
//! `T_c`) fires TX `s mod M`, so TX `m` transmits its chirp `a` at
//! `t_a = (a·M + m)·T_c` and the slow-time sampling interval per TX is
//! `M·T_c`. Each virtual channel `(m, n)` stores exactly the `N_c` chirps
//! fired by its TX.
//!
//! The synthesized beat sample for channel `(m, n)`, chirp start `t_a` and
//! fast time `t` is
//!
//! ```text
//! Σ_q σ_q · exp(j·2π·R(t_a)/λ) · exp(−j·2π·k_r·(R(t_a)/c)·t)
//! ```
//!
//! with `R(t_a)` the full TX→scatterer→RX path at the chirp start
//! (stop-and-go within a chirp, linear scatterer motion across the frame).
//! The residual video phase is dropped by default and can be re-enabled
//! for fidelity experiments.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::array::AntennaLayout;
use crate::error::RadarError;
use crate::{Result, SPEED_OF_LIGHT};

// ─── Configuration and scene types ──────────────────────────────────────────

/// FMCW waveform and TDM-MIMO timing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformConfig {
    /// Carrier frequency f_c (Hz).
    pub carrier_frequency_hz: f64,
    /// Chirp rate k_r (Hz/s).
    pub chirp_rate_hz_per_s: f64,
    /// Chirp pulse duration T_p (s).
    pub pulse_duration_s: f64,
    /// ADC sample rate f_s (Hz).
    pub sample_rate_hz: f64,
    /// Fast-time samples per chirp N_s.
    pub samples_per_chirp: usize,
    /// Chirps per frame per TX, N_c.
    pub chirps_per_frame_per_tx: usize,
    /// Chirp repetition interval T_c (s), one TDM slot.
    pub chirp_repetition_interval_s: f64,
    /// Wavelength λ = c/f_c (m); derived, kept for convenience.
    pub wavelength_m: f64,
    /// Keep the residual-video-phase term of the dechirped signal.
    pub residual_video_phase: bool,
}

impl WaveformConfig {
    /// Fills the derived wavelength and validates the invariants.
    pub fn normalized(mut self) -> Result<Self> {
        self.wavelength_m = SPEED_OF_LIGHT / self.carrier_frequency_hz;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency_hz > 0.0) || !(self.chirp_rate_hz_per_s > 0.0) {
            return Err(RadarError::InvalidConfig("f_c and k_r must be positive".into()));
        }
        if !(self.sample_rate_hz > 0.0) || self.samples_per_chirp == 0 {
            return Err(RadarError::InvalidConfig("sampling parameters must be positive".into()));
        }
        if self.chirps_per_frame_per_tx == 0 {
            return Err(RadarError::InvalidConfig("need at least one chirp per TX".into()));
        }
        let sampling_time = self.samples_per_chirp as f64 / self.sample_rate_hz;
        if sampling_time > self.pulse_duration_s * (1.0 + 1e-12) {
            return Err(RadarError::InvalidConfig(format!(
                "N_s/f_s = {sampling_time:.3e} s does not fit inside T_p = {:.3e} s",
                self.pulse_duration_s
            )));
        }
        if self.chirp_repetition_interval_s < self.pulse_duration_s {
            return Err(RadarError::InvalidConfig("T_c must be at least T_p".into()));
        }
        let rel = (self.wavelength_m * self.carrier_frequency_hz - SPEED_OF_LIGHT).abs()
            / SPEED_OF_LIGHT;
        if rel > 1e-9 {
            return Err(RadarError::InvalidConfig("wavelength does not match carrier".into()));
        }
        Ok(())
    }

    /// Unambiguous one-way range: beat stays below f_s/2.
    pub fn unambiguous_range_m(&self) -> f64 {
        self.sample_rate_hz * SPEED_OF_LIGHT / (4.0 * self.chirp_rate_hz_per_s)
    }

    /// Unambiguous radial speed for `num_tx` TDM transmitters.
    pub fn unambiguous_velocity_mps(&self, num_tx: usize) -> f64 {
        self.wavelength_m / (4.0 * num_tx as f64 * self.chirp_repetition_interval_s)
    }

    /// Coherent frame time `M·N_c·T_c`.
    pub fn frame_time_s(&self, num_tx: usize) -> f64 {
        num_tx as f64 * self.chirps_per_frame_per_tx as f64 * self.chirp_repetition_interval_s
    }
}

/// One ideal point scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    /// Position (m), Cartesian; boresight is +y, z up.
    pub position_m: [f64; 3],
    /// Velocity (m/s), Cartesian.
    pub velocity_mps: [f64; 3],
    /// Complex scattering coefficient σ_q.
    pub reflectivity: Complex64,
}

impl Scatterer {
    pub fn position_at(&self, t: f64) -> [f64; 3] {
        [
            self.position_m[0] + self.velocity_mps[0] * t,
            self.position_m[1] + self.velocity_mps[1] * t,
            self.position_m[2] + self.velocity_mps[2] * t,
        ]
    }
}

/// A band-limited clutter patch specified in the range/Doppler domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterRegion {
    /// One-way range interval (m), lo < hi.
    pub range_m: (f64, f64),
    /// Radial-velocity interval (m/s), lo < hi.
    pub velocity_mps: (f64, f64),
    /// Equivalent per-sample clutter power (linear): in-region RD cells
    /// carry this power times the processing gain.
    pub power: f64,
}

/// Point-scatterer scene plus noise and clutter description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
    /// Per-sample complex-noise power (linear).
    pub noise_power: f64,
    pub clutter_regions: Vec<ClutterRegion>,
    pub rng_seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.noise_power < 0.0 {
            return Err(RadarError::InvalidConfig("noise power must be nonnegative".into()));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            let finite = s
                .position_m
                .iter()
                .chain(s.velocity_mps.iter())
                .all(|v| v.is_finite());
            if !finite || !s.reflectivity.re.is_finite() || !s.reflectivity.im.is_finite() {
                return Err(RadarError::InvalidConfig(format!("scatterer {i} is not finite")));
            }
        }
        for (i, r) in self.clutter_regions.iter().enumerate() {
            if r.power < 0.0 {
                return Err(RadarError::InvalidConfig(format!(
                    "clutter region {i} has negative power"
                )));
            }
        }
        Ok(())
    }
}

// ─── Data cube ──────────────────────────────────────────────────────────────

/// Dechirped beat-signal cube: `[L virtual channels][N_c chirps][N_s samples]`,
/// channel `l = m·N + n` holding the chirps fired by TX `m`.
#[derive(Debug, Clone)]
pub struct DataCube {
    pub samples: Vec<Complex64>,
    pub num_channels: usize,
    pub chirps_per_channel: usize,
    pub samples_per_chirp: usize,
    /// `channel_map[l] = (m, n)`.
    pub channel_map: Vec<(usize, usize)>,
    pub num_tx: usize,
    pub num_rx: usize,
    pub config: WaveformConfig,
}

impl DataCube {
    pub fn zeroed(config: WaveformConfig, num_tx: usize, num_rx: usize) -> Self {
        let num_channels = num_tx * num_rx;
        let chirps = config.chirps_per_frame_per_tx;
        let ns = config.samples_per_chirp;
        let mut channel_map = Vec::with_capacity(num_channels);
        for m in 0..num_tx {
            for n in 0..num_rx {
                channel_map.push((m, n));
            }
        }
        Self {
            samples: vec![Complex64::new(0.0, 0.0); num_channels * chirps * ns],
            num_channels,
            chirps_per_channel: chirps,
            samples_per_chirp: ns,
            channel_map,
            num_tx,
            num_rx,
            config,
        }
    }

    #[inline]
    pub fn index(&self, channel: usize, chirp: usize, sample: usize) -> usize {
        (channel * self.chirps_per_channel + chirp) * self.samples_per_chirp + sample
    }

    #[inline]
    pub fn at(&self, channel: usize, chirp: usize, sample: usize) -> Complex64 {
        self.samples[self.index(channel, chirp, sample)]
    }

    /// Absolute start time of chirp `a` on channel `l` in the TDM frame.
    pub fn chirp_start_time(&self, channel: usize, chirp: usize) -> f64 {
        let (m, _) = self.channel_map[channel];
        (chirp * self.num_tx + m) as f64 * self.config.chirp_repetition_interval_s
    }

    pub fn channel_samples(&self, channel: usize) -> &[Complex64] {
        let n = self.chirps_per_channel * self.samples_per_chirp;
        &self.samples[channel * n..(channel + 1) * n]
    }
}

// ─── Operations ─────────────────────────────────────────────────────────────

/// Full two-way propagation path: |scatterer − tx| + |scatterer − rx|.
pub fn path_length(tx_m: [f64; 3], rx_m: [f64; 3], scatterer_m: [f64; 3]) -> f64 {
    dist(scatterer_m, tx_m) + dist(scatterer_m, rx_m)
}

#[inline]
fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Antenna positions in meters: the layout's λ-unit (x, z) pairs on the
/// `y = 0` plane.
fn element_positions_m(layout: &AntennaLayout, wavelength: f64) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let conv = |p: &crate::array::ElementPos| [p.x * wavelength, 0.0, p.z * wavelength];
    (
        layout.tx.iter().map(conv).collect(),
        layout.rx.iter().map(conv).collect(),
    )
}

/// Synthesizes the dechirped TDM-MIMO beat-signal cube for a scene.
///
/// Rejects scenes whose maximum beat frequency `k_r·R/c` exceeds `f_s/2`
/// (aliased). Noise and clutter draws come from per-channel seeded RNG
/// streams, so the result is identical for any parallel schedule.
pub fn synthesize_beat_signal(
    config: &WaveformConfig,
    layout: &AntennaLayout,
    scene: &Scene,
) -> Result<DataCube> {
    config.validate()?;
    layout.validate()?;
    scene.validate()?;
    let (tx_m, rx_m) = element_positions_m(layout, config.wavelength_m);

    // Scatterers must not sit on an antenna element.
    for (i, s) in scene.scatterers.iter().enumerate() {
        for a in tx_m.iter().chain(rx_m.iter()) {
            if dist(s.position_m, *a) < 1e-6 {
                return Err(RadarError::InvalidConfig(format!(
                    "scatterer {i} coincides with an antenna element"
                )));
            }
        }
    }

    // Aliasing guard: path length is convex in time under linear motion,
    // so the frame-wide maximum is attained at an endpoint.
    let frame_end = config.frame_time_s(layout.num_tx());
    let nyquist = config.sample_rate_hz / 2.0;
    let mut max_beat = 0.0f64;
    for s in &scene.scatterers {
        for t in [0.0, frame_end] {
            let p = s.position_at(t);
            for txp in &tx_m {
                for rxp in &rx_m {
                    let beat =
                        config.chirp_rate_hz_per_s * path_length(*txp, *rxp, p) / SPEED_OF_LIGHT;
                    max_beat = max_beat.max(beat);
                }
            }
        }
    }
    if max_beat > nyquist {
        return Err(RadarError::AliasedScene {
            max_beat_hz: max_beat,
            nyquist_hz: nyquist,
        });
    }

    let mut cube = DataCube::zeroed(config.clone(), layout.num_tx(), layout.num_rx());
    let chirps = cube.chirps_per_channel;
    let ns = cube.samples_per_chirp;
    let num_tx = cube.num_tx;
    let channel_map = cube.channel_map.clone();
    let cfg = config.clone();
    let scene_cl = scene.clone();

    cube.samples
        .par_chunks_mut(chirps * ns)
        .enumerate()
        .for_each(|(l, chan)| {
            let (m, n) = channel_map[l];
            let txp = tx_m[m];
            let rxp = rx_m[n];
            let two_pi = 2.0 * std::f64::consts::PI;
            for a in 0..chirps {
                let t_a = (a * num_tx + m) as f64 * cfg.chirp_repetition_interval_s;
                let row = &mut chan[a * ns..(a + 1) * ns];
                for sc in &scene_cl.scatterers {
                    let pos = sc.position_at(t_a);
                    let r = path_length(txp, rxp, pos);
                    // keep the carrier phase accurate: reduce R/λ before 2π
                    let cycles = r / cfg.wavelength_m;
                    let mut phase0 = two_pi * cycles.fract();
                    if cfg.residual_video_phase {
                        let tau = r / SPEED_OF_LIGHT;
                        phase0 += std::f64::consts::PI * cfg.chirp_rate_hz_per_s * tau * tau;
                    }
                    let dphi =
                        -two_pi * cfg.chirp_rate_hz_per_s * (r / SPEED_OF_LIGHT) / cfg.sample_rate_hz;
                    let mut acc = sc.reflectivity * Complex64::from_polar(1.0, phase0);
                    let step = Complex64::from_polar(1.0, dphi);
                    for v in row.iter_mut() {
                        *v += acc;
                        acc *= step;
                    }
                }
            }
            if scene_cl.noise_power > 0.0 {
                let sd = (scene_cl.noise_power / 2.0).sqrt();
                let normal = Normal::new(0.0, sd).expect("valid std dev");
                let mut rng = ChaCha8Rng::seed_from_u64(scene_cl.rng_seed);
                rng.set_stream(l as u64);
                for v in chan.iter_mut() {
                    let re = normal.sample(&mut rng);
                    let im = normal.sample(&mut rng);
                    *v += Complex64::new(re, im);
                }
            }
        });

    for (ri, region) in scene.clutter_regions.iter().enumerate() {
        let seed = derive_seed(scene.rng_seed, ri as u64 + 1);
        add_clutter_in_place(&mut cube, region, seed)?;
    }
    Ok(cube)
}

/// Splitmix-style seed derivation for independent clutter substreams.
fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns a copy of the cube with one clutter region added; deterministic
/// per seed. See [`ClutterRegion`] for the power semantics.
pub fn add_clutter_region(cube: &DataCube, region: &ClutterRegion, seed: u64) -> Result<DataCube> {
    let mut out = cube.clone();
    add_clutter_in_place(&mut out, region, seed)?;
    Ok(out)
}

fn add_clutter_in_place(cube: &mut DataCube, region: &ClutterRegion, seed: u64) -> Result<()> {
    let cfg = &cube.config;
    let (range_bins, doppler_bins) = region_bins(cfg, cube.num_tx, region)?;
    if region.power == 0.0 {
        return Ok(());
    }
    let nc = cube.chirps_per_channel;
    let ns = cube.samples_per_chirp;
    // In-region RD-cell power (native, unwindowed) = power × processing gain.
    let bin_var = region.power * (nc * ns) as f64;
    let sd = (bin_var / 2.0).sqrt();

    let mut planner = FftPlanner::<f64>::new();
    let fft_slow = planner.plan_fft_forward(nc);
    let fft_fast = planner.plan_fft_forward(ns);
    let scale = 1.0 / (nc * ns) as f64;

    cube.samples
        .par_chunks_mut(nc * ns)
        .enumerate()
        .for_each(|(l, chan)| {
            let normal = Normal::new(0.0, sd).expect("valid std dev");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l as u64);
            let mut field = vec![Complex64::new(0.0, 0.0); nc * ns];
            for &k in &doppler_bins {
                for &f in &range_bins {
                    let re = normal.sample(&mut rng);
                    let im = normal.sample(&mut rng);
                    field[k * ns + f] = Complex64::new(re, im);
                }
            }
            // synthesis transform: forward kernels with 1/(N_c·N_s), the
            // exact inverse of the unnormalized analysis FFTs
            for row in field.chunks_mut(ns) {
                fft_fast.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); nc];
            for f in 0..ns {
                for (k, c) in col.iter_mut().enumerate() {
                    *c = field[k * ns + f];
                }
                fft_slow.process(&mut col);
                for (k, c) in col.iter().enumerate() {
                    field[k * ns + f] = *c;
                }
            }
            for (v, g) in chan.iter_mut().zip(&field) {
                *v += g * scale;
            }
        });
    Ok(())
}

/// Quantizes a clutter region to native range/Doppler bins, validating the
/// intervals against the unambiguous extent.
fn region_bins(
    cfg: &WaveformConfig,
    num_tx: usize,
    region: &ClutterRegion,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (rlo, rhi) = region.range_m;
    let (vlo, vhi) = region.velocity_mps;
    if !(rlo < rhi) || !(vlo < vhi) {
        return Err(RadarError::InvalidConfig(
            "clutter region intervals must satisfy lo < hi".into(),
        ));
    }
    let r_unamb = cfg.unambiguous_range_m();
    let v_unamb = cfg.unambiguous_velocity_mps(num_tx);
    if rlo < 0.0 || rhi > r_unamb || vlo < -v_unamb || vhi > v_unamb {
        return Err(RadarError::InvalidConfig(format!(
            "clutter region outside the unambiguous extent ({r_unamb:.2} m, ±{v_unamb:.3} m/s)"
        )));
    }
    let ns = cfg.samples_per_chirp;
    let nc = cfg.chirps_per_frame_per_tx;
    let range_bin = SPEED_OF_LIGHT * cfg.sample_rate_hz / (2.0 * cfg.chirp_rate_hz_per_s * ns as f64);
    let velocity_bin = cfg.wavelength_m
        / (2.0 * num_tx as f64 * cfg.chirp_repetition_interval_s * nc as f64);

    let f_lo = (rlo / range_bin).ceil() as i64;
    let f_hi = (rhi / range_bin).floor() as i64;
    let range_bins: Vec<usize> = (f_lo.max(0)..=f_hi.min(ns as i64 / 2 - 1))
        .map(|f| f as usize)
        .collect();
    let k_lo = (vlo / velocity_bin).ceil() as i64;
    let k_hi = (vhi / velocity_bin).floor() as i64;
    let half = nc as i64 / 2;
    let doppler_bins: Vec<usize> = (k_lo.max(-half)..=k_hi.min(half - 1))
        .map(|k| k.rem_euclid(nc as i64) as usize)
        .collect();
    if range_bins.is_empty() || doppler_bins.is_empty() {
        return Err(RadarError::InvalidConfig(
            "clutter region quantizes to zero bins".into(),
        ));
    }
    Ok((range_bins, doppler_bins))
}

// ─── Tests ──────────────────────────────────────────────────────────────────
