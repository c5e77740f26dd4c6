//! Dominant cycle estimation from a Morlet wavelet scalogram.
//!
//! The transform correlates the (detrended) signal with
//! `psi(eta) = pi^(-1/4) exp(i w0 eta) exp(-eta^2 / 2)` dilated to each scale
//! `s` and normalized by `1/sqrt(s)`, so white noise has a flat expected
//! spectrum. Scales are laid out on a geometric grid of Fourier periods.
//! Columns within `sqrt(2)·s` of either edge are inside the cone of
//! influence and never take part in peak detection.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::math::{fft_in_place, median};

/// Fallback period when no valid cycle has been seen yet.
pub const DEFAULT_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CycleError {
    #[error("invalid wavelet config: {0}")]
    InvalidConfig(&'static str),
    #[error("analysis needs {needed} samples, got {got}")]
    WindowTooShort { needed: usize, got: usize },
    #[error("close must be positive")]
    NonPositivePrice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletConfig {
    pub omega0: f64,
    pub min_period: f64,
    pub max_period: f64,
    /// Scales per octave; 8 gives a grid ratio of `2^(1/8)`.
    pub voices_per_octave: usize,
    /// Number of most recent samples analysed.
    pub window: usize,
    /// Scale steps on each side of the peak used for the weighted period.
    pub neighborhood: usize,
    /// Peak-to-median ratio below which no dominant cycle is reported.
    pub significance: f64,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            omega0: 6.0,
            min_period: 8.0,
            max_period: 128.0,
            voices_per_octave: 8,
            window: 1024,
            neighborhood: 2,
            significance: 2.0,
        }
    }
}

impl WaveletConfig {
    pub fn validate(&self) -> Result<(), CycleError> {
        if !(self.min_period >= 4.0) {
            return Err(CycleError::InvalidConfig("min_period must be at least 4 bars"));
        }
        if !(self.max_period > self.min_period) {
            return Err(CycleError::InvalidConfig("max_period must exceed min_period"));
        }
        if self.max_period > self.window as f64 / 2.0 {
            return Err(CycleError::InvalidConfig("max_period must not exceed half the window"));
        }
        if self.voices_per_octave == 0 {
            return Err(CycleError::InvalidConfig("voices_per_octave must be positive"));
        }
        if !(self.omega0 > 0.0) {
            return Err(CycleError::InvalidConfig("omega0 must be positive"));
        }
        Ok(())
    }

    /// Fourier period (in bars) per scale, ascending.
    pub fn periods(&self) -> Vec<f64> {
        let octaves = libm::log2(self.max_period / self.min_period);
        let steps = libm::floor(octaves * self.voices_per_octave as f64 + 1e-9) as usize;
        (0..=steps)
            .map(|j| self.min_period * libm::exp2(j as f64 / self.voices_per_octave as f64))
            .collect()
    }

    /// Morlet scale whose Fourier period is `period`.
    pub fn scale_for_period(&self, period: f64) -> f64 {
        period * (self.omega0 + libm::sqrt(2.0 + self.omega0 * self.omega0)) / (4.0 * PI)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleEstimate {
    pub period: f64,
    pub power: f64,
    pub valid: bool,
}

impl CycleEstimate {
    pub fn invalid() -> Self {
        Self {
            period: DEFAULT_PERIOD,
            power: 0.0,
            valid: false,
        }
    }
}

/// Wavelet power, one row per scale and one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    pub periods: Vec<f64>,
    pub scales: Vec<f64>,
    pub power: Vec<Vec<f64>>,
    /// Edge columns excluded on each side, per scale.
    pub cone: Vec<usize>,
}

impl Scalogram {
    pub fn len(&self) -> usize {
        self.power.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn in_cone(&self, scale: usize, t: usize) -> bool {
        let c = self.cone[scale];
        t >= c && t + c < self.len()
    }

    /// Most recent column outside the cone of influence for `scale`.
    pub fn latest_in_cone(&self, scale: usize) -> Option<usize> {
        let c = self.cone[scale];
        let n = self.len();
        (n > 2 * c).then(|| n - 1 - c)
    }

    /// Time-averaged in-cone power per scale (`None` when the cone covers
    /// every column).
    pub fn global_spectrum(&self) -> Vec<Option<f64>> {
        (0..self.power.len())
            .map(|s| {
                let last = self.latest_in_cone(s)?;
                let first = self.cone[s];
                let row = &self.power[s][first..=last];
                Some(row.iter().sum::<f64>() / row.len() as f64)
            })
            .collect()
    }

    /// Power along the scale with the strongest global spectrum.
    pub fn peak_power_trace(&self) -> Vec<f64> {
        let spectrum = self.global_spectrum();
        let best = spectrum
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i, p)))
            .fold(None, |acc: Option<(usize, f64)>, (i, p)| match acc {
                Some((_, bp)) if bp >= p => acc,
                _ => Some((i, p)),
            });
        match best {
            Some((i, _)) => self.power[i].clone(),
            None => vec![0.0; self.len()],
        }
    }
}

/// Reusable transform for a fixed config: wavelet spectra are computed once.
#[derive(Debug, Clone)]
pub struct CwtPlan {
    cfg: WaveletConfig,
    periods: Vec<f64>,
    scales: Vec<f64>,
    fft_len: usize,
    kernels: Vec<Vec<Complex64>>,
}

impl CwtPlan {
    pub fn new(cfg: &WaveletConfig) -> Result<Self, CycleError> {
        cfg.validate()?;
        let n = cfg.window;
        let fft_len = (2 * n).next_power_of_two();
        let periods = cfg.periods();
        let scales: Vec<f64> = periods.iter().map(|&p| cfg.scale_for_period(p)).collect();
        let norm = libm::pow(PI, -0.25);
        let kernels = scales
            .iter()
            .map(|&s| {
                // h[j] = psi(j/s)/sqrt(s) at lag j, wrapped for circular use.
                let mut h = vec![Complex64::new(0.0, 0.0); fft_len];
                let amp = norm / libm::sqrt(s);
                for j in -(n as i64 - 1)..=(n as i64 - 1) {
                    let eta = j as f64 / s;
                    let env = amp * libm::exp(-0.5 * eta * eta);
                    let phase = cfg.omega0 * eta;
                    let idx = j.rem_euclid(fft_len as i64) as usize;
                    h[idx] = Complex64::new(env * libm::cos(phase), env * libm::sin(phase));
                }
                fft_in_place(&mut h, false);
                h
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            periods,
            scales,
            fft_len,
            kernels,
        })
    }

    pub fn config(&self) -> &WaveletConfig {
        &self.cfg
    }

    /// Scalogram of the last `window` samples of `signal`.
    pub fn power(&self, signal: &[f64]) -> Result<Scalogram, CycleError> {
        let n = self.cfg.window;
        if signal.len() < n {
            return Err(CycleError::WindowTooShort {
                needed: n,
                got: signal.len(),
            });
        }
        let tail = &signal[signal.len() - n..];
        let mut spectrum = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (z, &x) in spectrum.iter_mut().zip(tail) {
            *z = Complex64::new(x, 0.0);
        }
        fft_in_place(&mut spectrum, false);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        let power = self
            .kernels
            .iter()
            .map(|k| {
                for ((b, x), h) in buf.iter_mut().zip(&spectrum).zip(k) {
                    *b = x * h;
                }
                fft_in_place(&mut buf, true);
                buf[..n].iter().map(|z| z.norm_sqr()).collect()
            })
            .collect();
        let cone = self
            .scales
            .iter()
            .map(|s| libm::ceil(core::f64::consts::SQRT_2 * s) as usize)
            .collect();
        Ok(Scalogram {
            periods: self.periods.clone(),
            scales: self.scales.clone(),
            power,
            cone,
        })
    }
}

/// `power[s][t] = |<signal, psi_{s,t}>|^2` over the last `cfg.window`
/// samples. The input is expected to be detrended already.
pub fn cwt_power(signal: &[f64], cfg: &WaveletConfig) -> Result<Scalogram, CycleError> {
    CwtPlan::new(cfg)?.power(signal)
}

/// Picks the dominant period.
///
/// Significance is judged on the time-averaged in-cone spectrum: the peak
/// must reach `cfg.significance` times the median across scales. The
/// period itself is the power-weighted mean over the winning scale and its
/// `cfg.neighborhood` neighbours, each read at its latest in-cone column.
pub fn dominant_cycle(scalogram: &Scalogram, cfg: &WaveletConfig) -> CycleEstimate {
    let global = scalogram.global_spectrum();
    let eligible: Vec<usize> = (0..global.len()).filter(|&s| global[s].is_some()).collect();
    if eligible.is_empty() {
        return CycleEstimate::invalid();
    }
    let g: Vec<f64> = eligible.iter().map(|&s| global[s].unwrap_or(0.0)).collect();
    let g_peak = g.iter().copied().fold(0.0, f64::max);
    let significant = g_peak > 0.0 && g_peak >= cfg.significance * median(&g);

    let latest: Vec<f64> = eligible
        .iter()
        .map(|&s| {
            let t = scalogram.latest_in_cone(s).expect("eligible scale");
            scalogram.power[s][t]
        })
        .collect();
    let mut win = 0;
    for (i, &p) in latest.iter().enumerate() {
        if p > latest[win] {
            win = i;
        }
    }
    let lo = win.saturating_sub(cfg.neighborhood);
    let hi = (win + cfg.neighborhood).min(latest.len() - 1);
    let mut weight = 0.0;
    let mut acc = 0.0;
    for i in lo..=hi {
        weight += latest[i];
        acc += latest[i] * scalogram.periods[eligible[i]];
    }
    if !significant || !(weight > 0.0) {
        return CycleEstimate {
            power: latest[win],
            ..CycleEstimate::invalid()
        };
    }
    CycleEstimate {
        period: acc / weight,
        power: latest[win],
        valid: true,
    }
}

/// Least-squares linear trend removal.
pub fn detrend(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let v_mean = values.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, v) in values.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - v_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    values
        .iter()
        .enumerate()
        .map(|(t, v)| v - v_mean - slope * (t as f64 - t_mean))
        .collect()
}

/// Log-price detrend, transform and peak pick over the latest window of
/// closes.
pub fn estimate_cycle(closes: &[f64], plan: &CwtPlan) -> Result<(CycleEstimate, Scalogram), CycleError> {
    let n = plan.config().window;
    if closes.len() < n {
        return Err(CycleError::WindowTooShort {
            needed: n,
            got: closes.len(),
        });
    }
    let tail = &closes[closes.len() - n..];
    if tail.iter().any(|c| !(*c > 0.0)) {
        return Err(CycleError::NonPositivePrice);
    }
    let logs: Vec<f64> = tail.iter().map(|c| libm::log(*c)).collect();
    let mut signal = detrend(&logs);
    // Rounding residue of a flat or exactly linear series is not a cycle.
    if signal.iter().all(|v| v.abs() < 1e-12) {
        signal.iter_mut().for_each(|v| *v = 0.0);
    }
    let scalogram = plan.power(&signal)?;
    Ok((dominant_cycle(&scalogram, plan.config()), scalogram))
}

/// Holds the last valid period so adaptive indicators never chase an
/// invalid estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTracker {
    last_valid: Option<f64>,
    default_period: f64,
}

impl Default for CycleTracker {
    fn default() -> Self {
        Self {
            last_valid: None,
            default_period: DEFAULT_PERIOD,
        }
    }
}

impl CycleTracker {
    pub fn update(&mut self, estimate: &CycleEstimate) -> f64 {
        if estimate.valid {
            self.last_valid = Some(estimate.period);
        }
        self.period()
    }

    pub fn period(&self) -> f64 {
        self.last_valid.unwrap_or(self.default_period)
    }

    /// The current period as a valid estimate, for adaptive indicator specs.
    pub fn current(&self) -> CycleEstimate {
        CycleEstimate {
            period: self.period(),
            power: 0.0,
            valid: true,
        }
    }
}
