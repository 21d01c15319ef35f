//! Range–Doppler processing: fast-time FFT per chirp, slow-time FFT per
//! TX across chirps, and noncoherent channel integration.
//!
//! FFTs are unnormalized with the `e^{+j2πft}` kernel, so the synthesized
//! beat tone `exp(−j2π f_b t)` lands at the positive bin `f_b` and
//! Parseval reads `Σ|X|² = N·Σ|x|²`. The Doppler axis is stored shifted:
//! bin `N_d/2` is zero velocity, larger bins are closing targets
//! (`v_r = f_d·λ/2 > 0`).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::RadarError;
use crate::waveform::{DataCube, WaveformConfig};
use crate::{Result, SPEED_OF_LIGHT};

/// Window applied along both FFT axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    None,
    Hann,
}

impl Window {
    /// Window coefficients for an n-sample frame (periodic Hann).
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

fn require_fft_size(fft_size: usize, min: usize, axis: &str) -> Result<()> {
    if fft_size < min {
        return Err(RadarError::InvalidConfig(format!(
            "{axis} fft size {fft_size} is smaller than the data length {min}"
        )));
    }
    if !fft_size.is_power_of_two() {
        return Err(RadarError::InvalidConfig(format!(
            "{axis} fft size {fft_size} must be a power of two"
        )));
    }
    Ok(())
}

// ─── Range profiles ─────────────────────────────────────────────────────────

/// Per-channel, per-chirp range spectra: `[L][N_c chirps][N_r range bins]`.
#[derive(Debug, Clone)]
pub struct RangeProfiles {
    pub data: Vec<Complex64>,
    pub num_channels: usize,
    pub chirps: usize,
    pub range_bins: usize,
    pub window: Window,
    pub num_tx: usize,
    pub config: WaveformConfig,
}

impl RangeProfiles {
    #[inline]
    pub fn at(&self, channel: usize, chirp: usize, bin: usize) -> Complex64 {
        self.data[(channel * self.chirps + chirp) * self.range_bins + bin]
    }
}

/// Windowed, zero-padded FFT along fast time for every chirp of every
/// channel. Bin `f` maps to range `f·f_s/fft_size · c/(2k_r)`.
pub fn range_fft(cube: &DataCube, fft_size: usize, window: Window) -> Result<RangeProfiles> {
    require_fft_size(fft_size, cube.samples_per_chirp, "range")?;
    let ns = cube.samples_per_chirp;
    let coeff = window.coefficients(ns);
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(fft_size);

    let rows = cube.num_channels * cube.chirps_per_channel;
    let mut data = vec![Complex64::new(0.0, 0.0); rows * fft_size];
    data.par_chunks_mut(fft_size)
        .enumerate()
        .for_each(|(row, out)| {
            let channel = row / cube.chirps_per_channel;
            let chirp = row % cube.chirps_per_channel;
            for i in 0..ns {
                out[i] = cube.at(channel, chirp, i) * coeff[i];
            }
            fft.process(out);
        });

    Ok(RangeProfiles {
        data,
        num_channels: cube.num_channels,
        chirps: cube.chirps_per_channel,
        range_bins: fft_size,
        window,
        num_tx: cube.num_tx,
        config: cube.config.clone(),
    })
}

// ─── Range–Doppler map ──────────────────────────────────────────────────────

/// Per-channel complex RD maps plus the channel-integrated power map.
///
/// `per_channel` is `[L][N_r][N_d]`; `integrated[r·N_d + d] = Σ_l |·|²`.
/// The Doppler axis is fft-shifted: `zero_doppler_bin = N_d/2`.
#[derive(Debug, Clone)]
pub struct RDMap {
    pub per_channel: Vec<Complex64>,
    pub integrated: Vec<f64>,
    pub num_channels: usize,
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub range_bin_size_m: f64,
    pub velocity_bin_size_mps: f64,
    pub zero_doppler_bin: usize,
    pub window: Window,
    pub num_tx: usize,
    pub wavelength_m: f64,
}

impl RDMap {
    #[inline]
    pub fn at(&self, channel: usize, range_bin: usize, doppler_bin: usize) -> Complex64 {
        self.per_channel
            [(channel * self.range_bins + range_bin) * self.doppler_bins + doppler_bin]
    }

    #[inline]
    pub fn integrated_at(&self, range_bin: usize, doppler_bin: usize) -> f64 {
        self.integrated[range_bin * self.doppler_bins + doppler_bin]
    }

    /// One-way range of a (fractional) range bin.
    pub fn range_of_bin(&self, bin: f64) -> f64 {
        bin * self.range_bin_size_m
    }

    /// Signed radial velocity of a (fractional) Doppler bin; positive is
    /// closing.
    pub fn velocity_of_bin(&self, bin: f64) -> f64 {
        (bin - self.zero_doppler_bin as f64) * self.velocity_bin_size_mps
    }

    /// Log-parabolic sub-bin peak interpolation around an integer peak
    /// cell; returns (range_m, velocity_mps).
    pub fn interpolated_peak(&self, range_bin: usize, doppler_bin: usize) -> (f64, f64) {
        let r = range_bin as f64 + self.parabolic_offset_range(range_bin, doppler_bin);
        let d = doppler_bin as f64 + self.parabolic_offset_doppler(range_bin, doppler_bin);
        (self.range_of_bin(r), self.velocity_of_bin(d))
    }

    fn parabolic_offset_range(&self, r: usize, d: usize) -> f64 {
        if r == 0 || r + 1 >= self.range_bins {
            return 0.0;
        }
        parabolic_log_offset(
            self.integrated_at(r - 1, d),
            self.integrated_at(r, d),
            self.integrated_at(r + 1, d),
        )
    }

    fn parabolic_offset_doppler(&self, r: usize, d: usize) -> f64 {
        if d == 0 || d + 1 >= self.doppler_bins {
            return 0.0;
        }
        parabolic_log_offset(
            self.integrated_at(r, d - 1),
            self.integrated_at(r, d),
            self.integrated_at(r, d + 1),
        )
    }
}

/// Sub-bin offset of a parabola fitted to `ln` of three power samples.
fn parabolic_log_offset(ym1: f64, y0: f64, yp1: f64) -> f64 {
    if ym1 <= 0.0 || y0 <= 0.0 || yp1 <= 0.0 {
        return 0.0;
    }
    let (a, b, c) = (ym1.ln(), y0.ln(), yp1.ln());
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    let off = 0.5 * (a - c) / denom;
    off.clamp(-0.5, 0.5)
}

/// Slow-time FFT across the `N_c` chirps of each TX (sampling interval
/// `M·T_c`), with fft-shift so bin `N_d/2` is zero Doppler. The
/// integrated map is left empty; see [`integrate_channels`].
pub fn doppler_fft(profiles: &RangeProfiles, fft_size: usize, window: Window) -> Result<RDMap> {
    require_fft_size(fft_size, profiles.chirps, "doppler")?;
    let nc = profiles.chirps;
    let nr = profiles.range_bins;
    let nd = fft_size;
    let coeff = window.coefficients(nc);
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(nd);

    let cfg = &profiles.config;
    let range_bin_size_m =
        SPEED_OF_LIGHT * cfg.sample_rate_hz / (2.0 * cfg.chirp_rate_hz_per_s * nr as f64);
    let velocity_bin_size_mps = cfg.wavelength_m
        / (2.0 * profiles.num_tx as f64 * cfg.chirp_repetition_interval_s * nd as f64);

    let mut per_channel = vec![Complex64::new(0.0, 0.0); profiles.num_channels * nr * nd];
    per_channel
        .par_chunks_mut(nr * nd)
        .enumerate()
        .for_each(|(l, chan)| {
            let mut slow = vec![Complex64::new(0.0, 0.0); nd];
            for r in 0..nr {
                for v in slow.iter_mut() {
                    *v = Complex64::new(0.0, 0.0);
                }
                for a in 0..nc {
                    slow[a] = profiles.at(l, a, r) * coeff[a];
                }
                fft.process(&mut slow);
                // fft-shift: zero Doppler to the center bin
                let row = &mut chan[r * nd..(r + 1) * nd];
                for (d, item) in row.iter_mut().enumerate() {
                    *item = slow[(d + nd / 2) % nd];
                }
            }
        });

    Ok(RDMap {
        per_channel,
        integrated: Vec::new(),
        num_channels: profiles.num_channels,
        range_bins: nr,
        doppler_bins: nd,
        range_bin_size_m,
        velocity_bin_size_mps,
        zero_doppler_bin: nd / 2,
        window,
        num_tx: profiles.num_tx,
        wavelength_m: cfg.wavelength_m,
    })
}

/// Noncoherent (square-law) channel integration. Channel order is fixed,
/// so the sum is bit-reproducible under any parallel schedule.
pub fn integrate_channels(map: &mut RDMap) {
    let nd = map.doppler_bins;
    let nr = map.range_bins;
    let l = map.num_channels;
    let per_channel = &map.per_channel;
    let mut integrated = vec![0.0f64; nr * nd];
    integrated
        .par_chunks_mut(nd)
        .enumerate()
        .for_each(|(r, row)| {
            for (d, item) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for ch in 0..l {
                    acc += per_channel[(ch * nr + r) * nd + d].norm_sqr();
                }
                *item = acc;
            }
        });
    map.integrated = integrated;
}

/// Convenience: range FFT → Doppler FFT → integration.
pub fn process_cube(
    cube: &DataCube,
    range_fft_size: usize,
    doppler_fft_size: usize,
    window: Window,
) -> Result<RDMap> {
    let profiles = range_fft(cube, range_fft_size, window)?;
    let mut map = doppler_fft(&profiles, doppler_fft_size, window)?;
    integrate_channels(&mut map);
    Ok(map)
}

// ─── Tests ──────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{AntennaLayout, ElementPos};
    use crate::waveform::{synthesize_beat_signal, Scatterer, Scene, WaveformConfig};

    fn test_config(chirps: usize) -> WaveformConfig {
        WaveformConfig {
            carrier_frequency_hz: 77e9,
            chirp_rate_hz_per_s: 3e13,
            pulse_duration_s: 55e-6,
            sample_rate_hz: 1e7,
            samples_per_chirp: 512,
            chirps_per_frame_per_tx: chirps,
            chirp_repetition_interval_s: 60e-6,
            wavelength_m: 0.0,
            residual_video_phase: false,
        }
        .normalized()
        .unwrap()
    }

    fn monostatic() -> AntennaLayout {
        AntennaLayout {
            tx: vec![ElementPos::new(0.0, 0.0)],
            rx: vec![ElementPos::new(0.0, 0.0)],
            board_extent: [1.0, 1.0],
        }
    }

    fn point_scene(range_m: f64, v_r: f64) -> Scene {
        Scene {
            scatterers: vec![Scatterer {
                position_m: [0.0, range_m, 0.0],
                velocity_mps: [0.0, -v_r, 0.0],
                reflectivity: num_complex::Complex64::new(1.0, 0.0),
            }],
            noise_power: 0.0,
            clutter_regions: vec![],
            rng_seed: 0,
        }
    }

    #[test]
    fn nine_meter_target_peaks_at_bin_184() {
        let cfg = test_config(2);
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &point_scene(9.0, 0.0)).unwrap();
        let profiles = range_fft(&cube, 1024, Window::Hann).unwrap();
        let mags: Vec<f64> = (0..1024).map(|b| profiles.at(0, 0, b).norm()).collect();
        let peak = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // beat = 2·k_r·9/c = 1.8 MHz → 1.8e6·1024/1e7 = 184.32
        assert_eq!(peak, 184);

        let mut map = doppler_fft(&profiles, 4, Window::None).unwrap();
        integrate_channels(&mut map);
        // within half a native bin (= one padded bin) of the analytic 184.32
        let (range_m, _) = map.interpolated_peak(184, map.zero_doppler_bin);
        let interp_bin = range_m / map.range_bin_size_m;
        assert!((interp_bin - 184.32).abs() < 0.5, "interpolated bin {interp_bin}");
    }

    #[test]
    fn zero_cube_gives_zero_profiles() {
        let cfg = test_config(2);
        let cube = crate::waveform::DataCube::zeroed(cfg, 1, 1);
        let profiles = range_fft(&cube, 1024, Window::Hann).unwrap();
        assert!(profiles.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn fft_size_smaller_than_data_is_rejected() {
        let cfg = test_config(2);
        let cube = crate::waveform::DataCube::zeroed(cfg, 1, 1);
        assert!(range_fft(&cube, 256, Window::None).is_err());
        let profiles = range_fft(&cube, 512, Window::None).unwrap();
        assert!(doppler_fft(&profiles, 1, Window::None).is_err());
    }

    #[test]
    fn two_targets_at_twice_range_resolution_resolve() {
        let cfg = test_config(2);
        // native bin = c·f_s/(2 k_r N_s) = 0.09766 m; place two targets
        // two bins apart on near-integer bins
        let bin = SPEED_OF_LIGHT * cfg.sample_rate_hz
            / (2.0 * cfg.chirp_rate_hz_per_s * cfg.samples_per_chirp as f64);
        let r1 = 90.0 * bin;
        let r2 = 92.0 * bin;
        let mut scene = point_scene(r1, 0.0);
        scene.scatterers.push(Scatterer {
            position_m: [0.0, r2, 0.0],
            velocity_mps: [0.0; 3],
            reflectivity: num_complex::Complex64::new(1.0, 0.0),
        });
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &scene).unwrap();
        let profiles = range_fft(&cube, 512, Window::None).unwrap();
        let mags: Vec<f64> = (85..98).map(|b| profiles.at(0, 0, b).norm()).collect();
        // local maxima at offsets 5 (bin 90) and 7 (bin 92)
        assert!(mags[5] > mags[4] && mags[5] > mags[6]);
        assert!(mags[7] > mags[6] && mags[7] > mags[8]);
    }

    #[test]
    fn stationary_target_at_zero_doppler() {
        let cfg = test_config(16);
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &point_scene(9.0, 0.0)).unwrap();
        let map = process_cube(&cube, 1024, 16, Window::Hann).unwrap();
        let mut best = (0usize, 0usize, 0.0);
        for r in 0..map.range_bins {
            for d in 0..map.doppler_bins {
                if map.integrated_at(r, d) > best.2 {
                    best = (r, d, map.integrated_at(r, d));
                }
            }
        }
        assert_eq!(best.1, map.zero_doppler_bin);
    }

    #[test]
    fn closing_target_lands_on_predicted_doppler_bin() {
        let cfg = test_config(16);
        let map_cfg = &cfg;
        let vbin = map_cfg.wavelength_m / (2.0 * 1.0 * cfg.chirp_repetition_interval_s * 16.0);
        let v_r = 2.0 * vbin; // exactly two Doppler bins, closing
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &point_scene(9.0, v_r)).unwrap();
        let map = process_cube(&cube, 1024, 16, Window::Hann).unwrap();
        let mut best = (0usize, 0usize, 0.0);
        for r in 0..map.range_bins {
            for d in 0..map.doppler_bins {
                if map.integrated_at(r, d) > best.2 {
                    best = (r, d, map.integrated_at(r, d));
                }
            }
        }
        assert_eq!(best.1, map.zero_doppler_bin + 2);
        assert!((map.velocity_of_bin(best.1 as f64) - v_r).abs() < 1e-9);
    }

    #[test]
    fn velocity_beyond_nyquist_wraps() {
        let cfg = test_config(16);
        let v_unamb = cfg.unambiguous_velocity_mps(1);
        let vbin = cfg.wavelength_m / (2.0 * cfg.chirp_repetition_interval_s * 16.0);
        let v_r = v_unamb + 2.0 * vbin; // folds to −v_unamb + 2 bins
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &point_scene(9.0, v_r)).unwrap();
        let map = process_cube(&cube, 1024, 16, Window::Hann).unwrap();
        let mut best = (0usize, 0usize, 0.0);
        for r in 0..map.range_bins {
            for d in 0..map.doppler_bins {
                if map.integrated_at(r, d) > best.2 {
                    best = (r, d, map.integrated_at(r, d));
                }
            }
        }
        // +v_unamb is bin 16 (alias of bin 0); +v_unamb + 2 bins wraps to bin 2
        assert_eq!(best.1, 2);
    }

    #[test]
    fn parseval_holds_per_chirp() {
        let cfg = test_config(2);
        let scene = Scene {
            scatterers: vec![Scatterer {
                position_m: [0.3, 11.0, -0.2],
                velocity_mps: [0.0, -0.5, 0.0],
                reflectivity: num_complex::Complex64::new(0.7, 0.4),
            }],
            noise_power: 0.2,
            clutter_regions: vec![],
            rng_seed: 17,
        };
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &scene).unwrap();
        let fft_size = 1024;
        let profiles = range_fft(&cube, fft_size, Window::Hann).unwrap();
        let coeff = Window::Hann.coefficients(cfg.samples_per_chirp);
        for chirp in 0..2 {
            let e_time: f64 = (0..cfg.samples_per_chirp)
                .map(|i| (cube.at(0, chirp, i) * coeff[i]).norm_sqr())
                .sum();
            let e_freq: f64 = (0..fft_size)
                .map(|b| profiles.at(0, chirp, b).norm_sqr())
                .sum::<f64>()
                / fft_size as f64;
            assert!(
                (e_time - e_freq).abs() <= 1e-9 * e_time,
                "chirp {chirp}: {e_time} vs {e_freq}"
            );
        }
    }

    #[test]
    fn peak_interpolation_within_half_native_bin() {
        let cfg = test_config(32);
        let r_true = 9.3;
        let v_true = 0.7;
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &point_scene(r_true, v_true)).unwrap();
        let map = process_cube(&cube, 1024, 64, Window::Hann).unwrap();
        let mut best = (0usize, 0usize, 0.0);
        for r in 0..map.range_bins {
            for d in 0..map.doppler_bins {
                if map.integrated_at(r, d) > best.2 {
                    best = (r, d, map.integrated_at(r, d));
                }
            }
        }
        let (r_est, v_est) = map.interpolated_peak(best.0, best.1);
        let native_range_bin = map.range_bin_size_m * 2.0; // 2× zero padding
        let native_vel_bin = map.velocity_bin_size_mps * 2.0;
        assert!((r_est - r_true).abs() < native_range_bin / 2.0, "range {r_est}");
        assert!((v_est - v_true).abs() < native_vel_bin / 2.0, "velocity {v_est}");
    }

    #[test]
    fn rd_map_is_linear_in_the_cube() {
        let cfg = test_config(8);
        let layout = monostatic();
        let a = synthesize_beat_signal(&cfg, &layout, &point_scene(8.0, 0.3)).unwrap();
        let b = synthesize_beat_signal(&cfg, &layout, &point_scene(14.0, -0.6)).unwrap();
        let mut ab = a.clone();
        for (v, w) in ab.samples.iter_mut().zip(&b.samples) {
            *v += w;
        }
        let map_a = process_cube(&a, 1024, 16, Window::Hann).unwrap();
        let map_b = process_cube(&b, 1024, 16, Window::Hann).unwrap();
        let map_ab = process_cube(&ab, 1024, 16, Window::Hann).unwrap();
        let scale = map_ab
            .per_channel
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        for i in 0..map_ab.per_channel.len() {
            let sum = map_a.per_channel[i] + map_b.per_channel[i];
            assert!((map_ab.per_channel[i] - sum).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn integration_of_identical_channels_scales_by_l() {
        let cfg = test_config(4);
        let cube = synthesize_beat_signal(&cfg, &monostatic(), &point_scene(9.0, 0.0)).unwrap();
        let mut map = process_cube(&cube, 512, 4, Window::None).unwrap();
        // replicate the single channel 5 times
        let l = 5;
        let one = map.per_channel.clone();
        map.per_channel = one.repeat(l);
        map.num_channels = l;
        integrate_channels(&mut map);
        for r in 0..map.range_bins {
            for d in 0..map.doppler_bins {
                let single = one[r * map.doppler_bins + d].norm_sqr();
                let got = map.integrated_at(r, d);
                assert!((got - l as f64 * single).abs() <= 1e-9 * got.max(1e-12));
            }
        }
    }

    #[test]
    fn integrated_noise_mean_matches_analytic_level() {
        // E[integrated cell] = L · σ² · Σw_r² · Σw_d² within 1% over ≥1e6 cells
        let cfg = WaveformConfig {
            carrier_frequency_hz: 77e9,
            chirp_rate_hz_per_s: 3e13,
            pulse_duration_s: 30e-6,
            sample_rate_hz: 1e7,
            samples_per_chirp: 128,
            chirps_per_frame_per_tx: 32,
            chirp_repetition_interval_s: 35e-6,
            wavelength_m: 0.0,
            residual_video_phase: false,
        }
        .normalized()
        .unwrap();
        let layout = AntennaLayout {
            tx: vec![ElementPos::new(0.0, 0.0), ElementPos::new(4.0, 0.0)],
            rx: vec![ElementPos::new(0.0, 0.0), ElementPos::new(0.5, 0.0)],
            board_extent: [10.0, 10.0],
        };
        let noise_power = 0.8;
        let w = Window::Hann;
        let sw_r: f64 = w.coefficients(128).iter().map(|c| c * c).sum();
        let sw_d: f64 = w.coefficients(32).iter().map(|c| c * c).sum();
        let expect = 4.0 * noise_power * sw_r * sw_d;
        let mut total = 0.0;
        let mut cells = 0usize;
        for seed in 0..64 {
            let scene = Scene {
                scatterers: vec![],
                noise_power,
                clutter_regions: vec![],
                rng_seed: seed,
            };
            let cube = synthesize_beat_signal(&cfg, &layout, &scene).unwrap();
            let map = process_cube(&cube, 128, 32, w).unwrap();
            total += map.integrated.iter().sum::<f64>();
            cells += map.integrated.len();
        }
        assert!(cells * 4 >= 1_000_000, "need ≥1e6 per-channel cells, got {cells}");
        let mean = total / cells as f64;
        assert!(
            (mean - expect).abs() < 0.01 * expect,
            "mean {mean} vs {expect}"
        );
    }

    #[test]
    fn clutter_region_power_calibration() {
        // full-cover region at power P raises the native RD mean by ≈ P·N_c·N_s
        let cfg = WaveformConfig {
            carrier_frequency_hz: 77e9,
            chirp_rate_hz_per_s: 3e13,
            pulse_duration_s: 10e-6,
            sample_rate_hz: 1e7,
            samples_per_chirp: 64,
            chirps_per_frame_per_tx: 16,
            chirp_repetition_interval_s: 12e-6,
            wavelength_m: 0.0,
            residual_video_phase: false,
        }
        .normalized()
        .unwrap();
        let layout = monostatic();
        let p = 0.6;
        let r_unamb = cfg.unambiguous_range_m();
        let v_unamb = cfg.unambiguous_velocity_mps(1);
        let region = crate::waveform::ClutterRegion {
            range_m: (0.0, r_unamb * 0.999),
            velocity_mps: (-v_unamb * 0.999, v_unamb * 0.999),
            power: p,
        };
        let gain = (cfg.samples_per_chirp * cfg.chirps_per_frame_per_tx) as f64;
        let mut mean_region = 0.0;
        let trials = 100;
        for seed in 0..trials {
            let scene = Scene {
                scatterers: vec![],
                noise_power: 0.0,
                clutter_regions: vec![region],
                rng_seed: seed,
            };
            let cube = synthesize_beat_signal(&cfg, &layout, &scene).unwrap();
            let map = process_cube(&cube, 64, 16, Window::None).unwrap();
            // native grid: region bins are ranges 0..N_s/2 across all Doppler
            let mut acc = 0.0;
            let mut n = 0;
            for r in 0..cfg.samples_per_chirp / 2 {
                for d in 0..16 {
                    acc += map.integrated_at(r, d);
                    n += 1;
                }
            }
            mean_region += acc / n as f64;
        }
        mean_region /= trials as f64;
        let expect = p * gain;
        assert!(
            (mean_region - expect).abs() < 0.10 * expect,
            "mean {mean_region} vs {expect}"
        );
    }

    #[test]
    fn clutter_regions_hold_their_power_ratio() {
        let cfg = WaveformConfig {
            carrier_frequency_hz: 77e9,
            chirp_rate_hz_per_s: 3e13,
            pulse_duration_s: 10e-6,
            sample_rate_hz: 1e7,
            samples_per_chirp: 64,
            chirps_per_frame_per_tx: 16,
            chirp_repetition_interval_s: 12e-6,
            wavelength_m: 0.0,
            residual_video_phase: false,
        }
        .normalized()
        .unwrap();
        let layout = monostatic();
        let v_unamb = cfg.unambiguous_velocity_mps(1);
        let bin_m = cfg.unambiguous_range_m() / 32.0; // native range bin
        let p = 0.05;
        let mk_region = |lo_bin: f64, hi_bin: f64, power: f64| crate::waveform::ClutterRegion {
            range_m: (lo_bin * bin_m, hi_bin * bin_m),
            velocity_mps: (-v_unamb * 0.9, v_unamb * 0.9),
            power,
        };
        let r_weak = mk_region(2.0, 10.0, p);
        let r_strong = mk_region(18.0, 26.0, 100.0 * p);
        let (mut weak, mut strong) = (0.0, 0.0);
        for seed in 0..100 {
            let scene = Scene {
                scatterers: vec![],
                noise_power: 0.0,
                clutter_regions: vec![r_weak, r_strong],
                rng_seed: seed,
            };
            let cube = synthesize_beat_signal(&cfg, &layout, &scene).unwrap();
            let map = process_cube(&cube, 64, 16, Window::None).unwrap();
            for r in 3..10 {
                for d in 0..16 {
                    weak += map.integrated_at(r, d);
                }
            }
            for r in 19..26 {
                for d in 0..16 {
                    strong += map.integrated_at(r, d);
                }
            }
        }
        let ratio = strong / weak;
        assert!((ratio - 100.0).abs() < 20.0, "ratio {ratio}");
    }
}
