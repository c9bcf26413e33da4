//! Sub-band quality scoring and waveform synthesis.
//!
//! A sub-band is described by a sampled complex frequency response
//! `H(f) = A(f) exp(j phi(f)) rect((f - fc) / B)`. Its quality relative to a
//! reference (normally a flat, linear-phase ideal channel) is
//!
//! ```text
//! Q = (G / M) * Re{rho}
//! G = sqrt(<|Hk|^2> <|Hl|^2>)          geometric mean of the band powers
//! M = (<|Hk|^2> + <|Hl|^2>) / 2        arithmetic mean of the band powers
//! rho = <Hk conj(Hl)> / G              complex correlation coefficient
//! ```
//!
//! where `<.>` is the arithmetic mean over the samples inside the band.
//! Quality scores are normalized per node so the best sub-band scores 1.

use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced frequency samples `f_start ..= f_stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    f_start: f64,
    f_stop: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(f_start: f64, f_stop: f64, n_points: usize) -> Result<Self> {
        if !(f_start.is_finite() && f_stop.is_finite()) || f_stop <= f_start {
            return Err(Error::config("grid", "f_stop must exceed f_start"));
        }
        if n_points < 2 {
            return Err(Error::config("grid.n_points", "need at least 2 points"));
        }
        Ok(Self {
            f_start,
            f_stop,
            n_points,
        })
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }

    pub fn f_stop(&self) -> f64 {
        self.f_stop
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        (self.f_stop - self.f_start) / (self.n_points - 1) as f64
    }

    pub fn freq(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.f_stop
        } else {
            self.f_start + i as f64 * self.spacing()
        }
    }

    pub fn freqs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.freq(i))
    }

    fn contains_band(&self, center: f64, bandwidth: f64) -> bool {
        let tol = 1e-9 * self.spacing();
        center - bandwidth / 2.0 >= self.f_start - tol && center + bandwidth / 2.0 <= self.f_stop + tol
    }
}

/// Sampled frequency response of one sub-band as seen by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    grid: FrequencyGrid,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
    center: f64,
    bandwidth: f64,
}

impl ChannelResponse {
    /// Builds a response, zeroing amplitude outside the rect support.
    ///
    /// Amplitudes inside the band must be strictly positive.
    pub fn new(
        grid: FrequencyGrid,
        amplitude: Vec<f64>,
        phase: Vec<f64>,
        center: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        if amplitude.len() != grid.n_points() || phase.len() != grid.n_points() {
            return Err(Error::config(
                "channel",
                format!(
                    "amplitude/phase length must equal grid size {}",
                    grid.n_points()
                ),
            ));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::config("channel.bandwidth", "must be positive"));
        }
        if !grid.contains_band(center, bandwidth) {
            return Err(Error::config(
                "channel.band",
                format!(
                    "band [{}, {}] lies outside grid [{}, {}]",
                    center - bandwidth / 2.0,
                    center + bandwidth / 2.0,
                    grid.f_start(),
                    grid.f_stop()
                ),
            ));
        }
        let mut resp = Self {
            grid,
            amplitude,
            phase,
            center,
            bandwidth,
        };
        for i in 0..grid.n_points() {
            if resp.in_support(i) {
                let a = resp.amplitude[i];
                if !(a > 0.0 && a.is_finite()) || !resp.phase[i].is_finite() {
                    return Err(Error::config(
                        "channel.amplitude",
                        format!("amplitude must be positive and finite inside the band (sample {i})"),
                    ));
                }
            } else {
                resp.amplitude[i] = 0.0;
            }
        }
        Ok(resp)
    }

    /// Reads a measured channel from CSV with columns `freq_hz, amplitude, phase_rad`.
    ///
    /// Frequencies must be uniformly spaced. The band support is the span of
    /// rows with positive amplitude.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::config("channel", format!("missing column `{name}`")))
        };
        let (fi, ai, pi) = (col("freq_hz")?, col("amplitude")?, col("phase_rad")?);
        let mut freq = Vec::new();
        let mut amplitude = Vec::new();
        let mut phase = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |idx: usize, name: &str| -> Result<f64> {
                rec.get(idx)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::config("channel", format!("row {}: bad `{name}` value", row + 1))
                    })
            };
            freq.push(parse(fi, "freq_hz")?);
            amplitude.push(parse(ai, "amplitude")?);
            phase.push(parse(pi, "phase_rad")?);
        }
        if freq.len() < 2 {
            return Err(Error::config("channel", "need at least two rows"));
        }
        let grid = FrequencyGrid::new(freq[0], freq[freq.len() - 1], freq.len())?;
        let step = grid.spacing();
        for (i, f) in freq.iter().enumerate() {
            if (f - grid.freq(i)).abs() > 1e-6 * step {
                return Err(Error::config(
                    "channel.freq_hz",
                    format!("frequencies must be uniformly spaced (row {})", i + 1),
                ));
            }
        }
        let live: Vec<usize> = (0..freq.len()).filter(|&i| amplitude[i] > 0.0).collect();
        let (Some(&lo), Some(&hi)) = (live.first(), live.last()) else {
            return Err(Error::Domain("channel has no samples with positive amplitude".into()));
        };
        let (f_lo, f_hi) = (freq[lo], freq[hi]);
        // A single live sample still gets a one-bin wide support.
        let bandwidth = (f_hi - f_lo).max(step * 1e-3);
        Self::new(grid, amplitude, phase, (f_lo + f_hi) / 2.0, bandwidth)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    fn in_support(&self, i: usize) -> bool {
        let tol = 1e-9 * self.grid.spacing();
        (self.grid.freq(i) - self.center).abs() <= self.bandwidth / 2.0 + tol
    }

    /// Indices of grid samples inside the rect support.
    pub fn support(&self) -> Vec<usize> {
        (0..self.grid.n_points()).filter(|&i| self.in_support(i)).collect()
    }

    /// Complex sample `A(f) exp(j phi(f))`; zero outside the support.
    pub fn sample(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.amplitude[i], self.phase[i])
    }

    /// Same response with every amplitude multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.grid,
            self.amplitude.iter().map(|a| a * factor).collect(),
            self.phase.clone(),
            self.center,
            self.bandwidth,
        )
    }

    /// Same response with a constant phase offset added everywhere.
    pub fn phase_shifted(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.phase.iter_mut().for_each(|p| *p += offset);
        out
    }
}

/// Flat-gain, linear-phase reference channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealChannelSpec {
    pub gain: f64,
    /// Group delay in seconds; phase is `-2 pi delay f`.
    pub group_delay: f64,
    pub center: f64,
    pub bandwidth: f64,
}

impl IdealChannelSpec {
    /// Unit gain, zero delay reference over the given band.
    pub fn unit(center: f64, bandwidth: f64) -> Self {
        Self {
            gain: 1.0,
            group_delay: 0.0,
            center,
            bandwidth,
        }
    }
}

pub fn ideal_response(spec: &IdealChannelSpec, grid: &FrequencyGrid) -> Result<ChannelResponse> {
    if !(spec.gain > 0.0) {
        return Err(Error::config("ideal.gain", "must be positive"));
    }
    let amplitude = vec![spec.gain; grid.n_points()];
    let phase = grid
        .freqs()
        .map(|f| -2.0 * PI * spec.group_delay * f)
        .collect();
    ChannelResponse::new(*grid, amplitude, phase, spec.center, spec.bandwidth)
}

/// `<|H(f)|^2>` over the band support.
pub fn mean_power(h: &ChannelResponse) -> Result<f64> {
    let support = h.support();
    if support.is_empty() {
        return Err(Error::Domain("channel support is empty".into()));
    }
    let sum: f64 = support.iter().map(|&i| h.amplitude[i] * h.amplitude[i]).sum();
    Ok(sum / support.len() as f64)
}

fn check_compatible(a: &ChannelResponse, b: &ChannelResponse) -> Result<Vec<usize>> {
    if a.grid != b.grid {
        return Err(Error::Domain("channel responses use different grids".into()));
    }
    let support = a.support();
    if support != b.support() {
        return Err(Error::Domain("channel responses have different supports".into()));
    }
    Ok(support)
}

/// Complex correlation coefficient between two responses on the same support.
pub fn coherence(h_k: &ChannelResponse, h_l: &ChannelResponse) -> Result<Complex64> {
    let support = check_compatible(h_k, h_l)?;
    let (pk, pl) = (mean_power(h_k)?, mean_power(h_l)?);
    if pk <= 0.0 || pl <= 0.0 {
        return Err(Error::Domain("zero-power channel".into()));
    }
    let cross: Complex64 = support
        .iter()
        .map(|&i| h_k.sample(i) * h_l.sample(i).conj())
        .sum::<Complex64>()
        / support.len() as f64;
    Ok(cross / (pk * pl).sqrt())
}

/// Spectral similarity of `h_k` to `reference`, clamped into `[0, 1]`.
pub fn channel_quality(h_k: &ChannelResponse, reference: &ChannelResponse) -> Result<f64> {
    let rho = coherence(h_k, reference)?;
    let (pk, pl) = (mean_power(h_k)?, mean_power(reference)?);
    let geometric = (pk * pl).sqrt();
    let arithmetic = (pk + pl) / 2.0;
    Ok((geometric / arithmetic * rho.re).clamp(0.0, 1.0))
}

/// `P x S` matrix of mean rewards in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanRewardMatrix {
    values: Vec<Vec<f64>>,
    homogeneous: bool,
}

impl MeanRewardMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let arms = values.first().map(Vec::len).unwrap_or(0);
        if values.is_empty() || arms == 0 {
            return Err(Error::config("means", "matrix must be non-empty"));
        }
        for (n, row) in values.iter().enumerate() {
            if row.len() != arms {
                return Err(Error::config(
                    "means",
                    format!("row {} has {} entries, expected {arms}", n + 1, row.len()),
                ));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::config(
                    "means",
                    format!("row {}: value {v} outside [0, 1]", n + 1),
                ));
            }
        }
        let homogeneous = values.iter().all(|r| r == &values[0]);
        Ok(Self {
            values,
            homogeneous,
        })
    }

    /// Reads one player per line, one mean per column, no header. `#` starts a comment line.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let row = rec?
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::config("means", format!("row {}: `{s}` is not a number", n + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    /// Homogeneous matrix: the same row for every player.
    pub fn broadcast(row: Vec<f64>, players: usize) -> Result<Self> {
        Self::new(vec![row; players])
    }

    pub fn players(&self) -> usize {
        self.values.len()
    }

    pub fn arms(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, player: usize, arm: usize) -> f64 {
        self.values[player][arm]
    }

    pub fn row(&self, player: usize) -> &[f64] {
        &self.values[player]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    /// Copy with the listed columns set to zero.
    pub fn with_zeroed_columns(&self, columns: impl IntoIterator<Item = usize> + Clone) -> Self {
        let mut values = self.values.clone();
        for row in &mut values {
            for c in columns.clone() {
                row[c] = 0.0;
            }
        }
        let homogeneous = values.iter().all(|r| r == &values[0]);
        Self {
            values,
            homogeneous,
        }
    }
}

/// Divides each row of raw quality scores by its maximum.
pub fn normalize_rewards(raw: &[Vec<f64>]) -> Result<MeanRewardMatrix> {
    let mut out = Vec::with_capacity(raw.len());
    for (n, row) in raw.iter().enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) || row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "row {} has no positive quality score (node sees no usable spectrum)",
                n + 1
            )));
        }
        out.push(row.iter().map(|v| v / max).collect());
    }
    MeanRewardMatrix::new(out)
}

/// Amplitude and phase ripple applied on top of a flat channel.
///
/// `A(f) = gain (1 + ripple cos(2 pi cycles x))`, `phi(f) = phase_ripple sin(2 pi cycles x)`
/// with `x` the normalized position inside the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDistortion {
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub ripple: f64,
    #[serde(default = "one")]
    pub ripple_cycles: f64,
    #[serde(default)]
    pub phase_ripple: f64,
}

fn one() -> f64 {
    1.0
}

impl ChannelDistortion {
    pub fn response(&self, grid: &FrequencyGrid, center: f64, bandwidth: f64) -> Result<ChannelResponse> {
        if !(self.gain > 0.0) || !(0.0..1.0).contains(&self.ripple) {
            return Err(Error::config(
                "channels",
                "distortion needs gain > 0 and ripple in [0, 1)",
            ));
        }
        let lo = center - bandwidth / 2.0;
        let (amplitude, phase) = grid
            .freqs()
            .map(|f| {
                let x = 2.0 * PI * self.ripple_cycles * (f - lo) / bandwidth;
                (
                    self.gain * (1.0 + self.ripple * x.cos()),
                    self.phase_ripple * x.sin(),
                )
            })
            .unzip();
        ChannelResponse::new(*grid, amplitude, phase, center, bandwidth)
    }
}

/// Equal-width sub-bands laid out contiguously from `f_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub f_start: f64,
    pub subband_width: f64,
    #[serde(default = "default_points")]
    pub points_per_band: usize,
}

fn default_points() -> usize {
    1024
}

impl BandPlan {
    pub fn grid(&self, arm: usize) -> Result<FrequencyGrid> {
        let lo = self.f_start + arm as f64 * self.subband_width;
        FrequencyGrid::new(lo, lo + self.subband_width, self.points_per_band)
    }

    pub fn center(&self, arm: usize) -> f64 {
        self.f_start + (arm as f64 + 0.5) * self.subband_width
    }
}

/// Scores every (node, sub-band) channel against the ideal reference and normalizes.
pub fn derive_mean_rewards(
    plan: &BandPlan,
    distortions: &[Vec<ChannelDistortion>],
    ideal_gain: f64,
    ideal_delay: f64,
) -> Result<MeanRewardMatrix> {
    let mut raw = Vec::with_capacity(distortions.len());
    for row in distortions {
        let mut scores = Vec::with_capacity(row.len());
        for (arm, d) in row.iter().enumerate() {
            let grid = plan.grid(arm)?;
            let (center, bw) = (plan.center(arm), plan.subband_width);
            let h = d.response(&grid, center, bw)?;
            let ideal = ideal_response(
                &IdealChannelSpec {
                    gain: ideal_gain,
                    group_delay: ideal_delay,
                    center,
                    bandwidth: bw,
                },
                &grid,
            )?;
            scores.push(channel_quality(&h, &ideal)?);
        }
        raw.push(scores);
    }
    normalize_rewards(&raw)
}

/// Linear FM pulse parameters. Occupied bandwidth is `pulse_duration * chirp_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub amplitude: f64,
    pub pulse_duration: f64,
    pub center_freq: f64,
    pub chirp_rate: f64,
}

impl WaveformSpec {
    pub fn bandwidth(&self) -> f64 {
        self.pulse_duration * self.chirp_rate
    }
}

/// Samples `A cos(2 pi fc t + pi alpha t^2)` for `t` in `[0, pulse_duration)`.
///
/// The sweep runs from `fc` up to `fc + alpha T`, so the sample rate must
/// exceed twice that top frequency.
pub fn lfm_waveform(spec: &WaveformSpec, sample_rate: f64) -> Result<Vec<f64>> {
    if !(spec.pulse_duration > 0.0) {
        return Err(Error::config("waveform.pulse_duration", "must be positive"));
    }
    if spec.chirp_rate < 0.0 || !spec.chirp_rate.is_finite() {
        return Err(Error::config("waveform.chirp_rate", "must be finite and non-negative"));
    }
    let top = spec.center_freq.abs().max((spec.center_freq + spec.bandwidth()).abs());
    if !(sample_rate > 2.0 * top) {
        return Err(Error::config(
            "sample_rate",
            format!("{sample_rate} Hz violates Nyquist for a sweep reaching {top} Hz"),
        ));
    }
    let n = (spec.pulse_duration * sample_rate).floor() as usize;
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / sample_rate;
            spec.amplitude * (2.0 * PI * spec.center_freq * t + PI * spec.chirp_rate * t * t).cos()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(amp: f64, phase: f64) -> ChannelResponse {
        let grid = FrequencyGrid::new(0.0, 1.0e6, 101).unwrap();
        ChannelResponse::new(grid, vec![amp; 101], vec![phase; 101], 0.5e6, 1.0e6).unwrap()
    }

    #[test]
    fn ideal_response_constants() {
        let grid = FrequencyGrid::new(0.0, 2.0e6, 201).unwrap();
        let h = ideal_response(&IdealChannelSpec::unit(1.0e6, 1.0e6), &grid).unwrap();
        for i in h.support() {
            assert_eq!(h.amplitude()[i], 1.0);
            assert_eq!(h.phase()[i], 0.0);
        }
        // off-support samples are zeroed
        assert_eq!(h.amplitude()[0], 0.0);
        assert_eq!(h.amplitude()[200], 0.0);

        let spec = IdealChannelSpec {
            gain: 2.0,
            ..IdealChannelSpec::unit(1.0e6, 1.0e6)
        };
        let h2 = ideal_response(&spec, &grid).unwrap();
        assert!(h2.support().iter().all(|&i| h2.amplitude()[i] == 2.0));
    }

    #[test]
    fn ideal_phase_is_linear_in_frequency() {
        let grid = FrequencyGrid::new(0.0, 2.0e6, 201).unwrap();
        let spec = IdealChannelSpec {
            gain: 1.0,
            group_delay: 1e-6,
            center: 1.0e6,
            bandwidth: 2.0e6,
        };
        let h = ideal_response(&spec, &grid).unwrap();
        // grid point 100 is exactly 1 MHz
        assert_eq!(grid.freq(100), 1.0e6);
        assert!((h.phase()[100] + 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ideal_band_outside_grid_is_config_error() {
        let grid = FrequencyGrid::new(0.0, 1.0e6, 11).unwrap();
        let err = ideal_response(&IdealChannelSpec::unit(1.0e6, 1.0e6), &grid).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn mean_power_examples() {
        assert_eq!(mean_power(&flat(1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(mean_power(&flat(2.0, 0.0)).unwrap(), 4.0);
        let grid = FrequencyGrid::new(0.0, 1.0, 2).unwrap();
        let h = ChannelResponse::new(grid, vec![1.0, 2.0], vec![0.0, 0.0], 0.5, 1.0).unwrap();
        assert_eq!(mean_power(&h).unwrap(), 2.5);
    }

    #[test]
    fn coherence_examples() {
        let h = flat(1.0, 0.3);
        let rho = coherence(&h, &h).unwrap();
        assert!((rho - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let rho = coherence(&h, &h.scaled(3.0).unwrap()).unwrap();
        assert!((rho - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let rho = coherence(&h, &h.phase_shifted(PI)).unwrap();
        assert!((rho - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn coherence_rejects_mismatched_grids() {
        let a = flat(1.0, 0.0);
        let grid = FrequencyGrid::new(0.0, 1.0e6, 51).unwrap();
        let b = ChannelResponse::new(grid, vec![1.0; 51], vec![0.0; 51], 0.5e6, 1.0e6).unwrap();
        assert!(matches!(coherence(&a, &b), Err(Error::Domain(_))));
    }

    #[test]
    fn quality_examples() {
        let reference = flat(1.0, 0.0);
        assert!((channel_quality(&reference, &reference).unwrap() - 1.0).abs() < 1e-12);
        // |H|^2 = 4 against |H|^2 = 1: G = 2, M = 2.5
        let q = channel_quality(&flat(2.0, 0.0), &reference).unwrap();
        assert!((q - 0.8).abs() < 1e-12);
        assert_eq!(channel_quality(&reference.phase_shifted(PI), &reference).unwrap(), 0.0);
    }

    #[test]
    fn normalize_examples() {
        let m = normalize_rewards(&[vec![0.5, 1.0, 0.25]]).unwrap();
        assert_eq!(m.row(0), &[0.5, 1.0, 0.25]);
        let m = normalize_rewards(&[vec![0.4, 0.8]]).unwrap();
        assert_eq!(m.row(0), &[0.5, 1.0]);
        let m = normalize_rewards(&[vec![0.2, 0.4], vec![0.2, 0.4]]).unwrap();
        assert!(m.is_homogeneous());
        let m = normalize_rewards(&[vec![0.2, 0.4], vec![0.4, 0.2]]).unwrap();
        assert!(!m.is_homogeneous());
        assert!(matches!(
            normalize_rewards(&[vec![0.0, 0.0]]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lfm_examples() {
        let spec = WaveformSpec {
            amplitude: 1.5,
            pulse_duration: 1e-3,
            center_freq: 10e3,
            chirp_rate: 0.0,
        };
        let fs = 1e6;
        let w = lfm_waveform(&spec, fs).unwrap();
        assert_eq!(w.len(), 1000);
        assert_eq!(w[0], 1.5);
        for (k, v) in w.iter().enumerate() {
            let expect = 1.5 * (2.0 * PI * 10e3 * k as f64 / fs).cos();
            assert!((v - expect).abs() < 1e-12);
        }

        let spec = WaveformSpec {
            amplitude: 1.0,
            pulse_duration: 1.0,
            center_freq: 0.0,
            chirp_rate: 2.0,
        };
        let w = lfm_waveform(&spec, 10.0).unwrap();
        assert!(w[5].abs() < 1e-12, "t = 0.5 sample should be cos(pi/2)");
    }

    #[test]
    fn lfm_nyquist_violation() {
        let spec = WaveformSpec {
            amplitude: 1.0,
            pulse_duration: 1e-3,
            center_freq: 1e6,
            chirp_rate: 1e9,
        };
        // sweep tops out at 2 MHz
        assert!(lfm_waveform(&spec, 3.9e6).unwrap_err().is_config());
        assert!(lfm_waveform(&spec, 4.1e6).is_ok());
    }

    #[test]
    fn csv_import() {
        let csv = "freq_hz,amplitude,phase_rad\n0,0,0\n1,2,0\n2,2,0\n3,2,0\n4,0,0\n";
        let h = ChannelResponse::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(h.support(), vec![1, 2, 3]);
        assert_eq!(h.center(), 2.0);
        assert_eq!(mean_power(&h).unwrap(), 4.0);

        let bad = "freq_hz,amplitude,phase_rad\n0,1,0\n1,1,0\n3,1,0\n";
        assert!(ChannelResponse::from_csv(bad.as_bytes()).unwrap_err().is_config());
        let missing = "freq,amplitude,phase_rad\n0,1,0\n";
        assert!(ChannelResponse::from_csv(missing.as_bytes()).unwrap_err().is_config());
    }

    #[test]
    fn derived_rewards_rank_by_distortion() {
        let plan = BandPlan {
            f_start: 1.0e9,
            subband_width: 10e6,
            points_per_band: 256,
        };
        let clean = ChannelDistortion {
            gain: 1.0,
            ripple: 0.0,
            ripple_cycles: 1.0,
            phase_ripple: 0.0,
        };
        let rough = ChannelDistortion {
            ripple: 0.6,
            phase_ripple: 1.0,
            ..clean
        };
        let m = derive_mean_rewards(&plan, &[vec![clean, rough]], 1.0, 0.0).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert!(m.get(0, 1) < 1.0 && m.get(0, 1) > 0.0);
    }
}
