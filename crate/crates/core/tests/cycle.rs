use std::f64::consts::PI;

use ctrnn_core::cycle::{estimate_cycle, CwtPlan, WaveletConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

fn sine_closes(n: usize, periods: &[(f64, f64)]) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let x: f64 = periods.iter().map(|&(p, a)| a * (2.0 * PI * t as f64 / p).sin()).sum();
            100.0 * x.exp()
        })
        .collect()
}

fn plan() -> CwtPlan {
    CwtPlan::new(&WaveletConfig::default()).unwrap()
}

#[test]
fn sine_period_32_is_recovered() {
    let (est, scal) = estimate_cycle(&sine_closes(1024, &[(32.0, 0.02)]), &plan()).unwrap();
    assert!(est.valid);
    assert!((29.0..=35.0).contains(&est.period), "period {}", est.period);
    assert_eq!(scal.power.len(), 33);
}

#[test]
fn constant_and_pure_trend_are_invalid() {
    let p = plan();
    assert!(!estimate_cycle(&vec![50.0; 1024], &p).unwrap().0.valid);
    let trend: Vec<f64> = (0..1024).map(|t| 100.0 * (0.001 * t as f64).exp()).collect();
    assert!(!estimate_cycle(&trend, &p).unwrap().0.valid);
}

#[test]
fn amplitude_does_not_move_the_period() {
    let p = plan();
    let small = estimate_cycle(&sine_closes(1024, &[(48.0, 0.005)]), &p).unwrap().0;
    let large = estimate_cycle(&sine_closes(1024, &[(48.0, 0.05)]), &p).unwrap().0;
    assert!(small.valid && large.valid);
    assert!((small.period - large.period).abs() < 1e-6 * small.period);
}

#[test]
fn stronger_component_of_a_mix_wins() {
    let est = estimate_cycle(&sine_closes(1024, &[(16.0, 0.005), (64.0, 0.02)]), &plan()).unwrap().0;
    assert!(est.valid);
    assert!((58.0..=70.0).contains(&est.period), "period {}", est.period);
}

#[test]
fn white_noise_is_mostly_invalid() {
    let p = plan();
    let mut invalid = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let closes: Vec<f64> = (0..1024)
            .map(|_| {
                // Sum of uniforms, roughly normal.
                let z: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                100.0 * (0.01 * z).exp()
            })
            .collect();
        if !estimate_cycle(&closes, &p).unwrap().0.valid {
            invalid += 1;
        }
    }
    assert!(invalid >= 60, "only {invalid}/100 white-noise windows judged invalid");
}

#[test]
fn shifted_sine_keeps_its_period() {
    let p = plan();
    let base = sine_closes(1024 + 7, &[(40.0, 0.02)]);
    let a = estimate_cycle(&base[..1024], &p).unwrap().0;
    let b = estimate_cycle(&base[7..], &p).unwrap().0;
    assert!(a.valid && b.valid);
    assert!((a.period - b.period).abs() < 0.05 * a.period, "{} vs {}", a.period, b.period);
}

/// Periodogram peak from an independent FFT implementation.
fn periodogram_peak(signal: &[f64]) -> f64 {
    let n = signal.len();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (1..n / 2).max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr())).unwrap();
    n as f64 / k as f64
}

#[test]
fn agrees_with_periodogram_on_clean_tones() {
    let p = plan();
    for period in [16.0, 32.0, 64.0] {
        let closes = sine_closes(1024, &[(period, 0.02)]);
        let logs: Vec<f64> = closes.iter().map(|c| c.ln()).collect();
        let oracle = periodogram_peak(&logs);
        let est = estimate_cycle(&closes, &p).unwrap().0;
        assert!(est.valid);
        assert!((est.period - oracle).abs() / oracle < 0.1, "{period}: cwt {} vs fft {}", est.period, oracle);
    }
}
