//! Digital thermal sensor model: what software observes instead of the
//! ground truth.
//!
//! Readings are quantized to the sensor resolution, refreshed on a fixed
//! tick grid, and carry additive measurement noise. The noise has two
//! seeded Ornstein-Uhlenbeck components: a slow wander (sensor bias and
//! environment drift over seconds) and a faster jitter. The published
//! ±1 °C figure conflates resolution and accuracy; both knobs are
//! explicit here and calibrated rather than assumed.

use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::thermal::Trace;

/// DTS behaviour: quantization, refresh, and noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtsConfig {
    /// Maximum junction temperature (°C); reaching it aborts the run.
    pub tj_max: f64,
    /// Reading granularity (°C).
    pub resolution: f64,
    /// Sensor refresh period (s).
    pub refresh_period: f64,
    /// Stationary std of the slow noise component (°C).
    pub noise_sigma: f64,
    /// Correlation time of the slow component (s); 0 gives white noise.
    pub noise_tau_s: f64,
    /// Stationary std of the fast jitter component (°C).
    pub jitter_sigma: f64,
    /// Correlation time of the jitter component (s).
    pub jitter_tau_s: f64,
    /// Base seed of the noise stream.
    pub seed: u64,
}

impl Default for DtsConfig {
    fn default() -> Self {
        Self {
            tj_max: 100.0,
            resolution: 1.0,
            refresh_period: 0.002,
            noise_sigma: 0.12,
            noise_tau_s: 4.0,
            jitter_sigma: 0.40,
            jitter_tau_s: 0.5,
            seed: 1,
        }
    }
}

impl DtsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::Config("resolution must be positive".into()));
        }
        if !(self.refresh_period > 0.0) {
            return Err(Error::Config("refresh_period must be positive".into()));
        }
        if self.noise_sigma < 0.0 || self.jitter_sigma < 0.0 {
            return Err(Error::Config("noise sigmas must be non-negative".into()));
        }
        if self.noise_tau_s < 0.0 || self.jitter_tau_s < 0.0 {
            return Err(Error::Config("noise taus must be non-negative".into()));
        }
        Ok(())
    }

    /// Copy with all noise disabled, for oracle runs.
    pub fn noiseless(&self) -> Self {
        Self {
            noise_sigma: 0.0,
            jitter_sigma: 0.0,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Seeded additive-noise stream, one value per refresh tick.
pub struct NoiseStream {
    slow: f64,
    fast: f64,
    rho_slow: f64,
    rho_fast: f64,
    sigma_slow: f64,
    sigma_fast: f64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    /// Stream for one core. Distinct cores get decorrelated substreams.
    pub fn new(config: &DtsConfig, core_id: usize) -> Self {
        let sub = config
            .seed
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(core_id as u64 + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(sub);
        let rho = |tau: f64| {
            if tau > 0.0 {
                (-config.refresh_period / tau).exp()
            } else {
                0.0
            }
        };
        let draw = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        };
        let rho_slow = rho(config.noise_tau_s);
        let rho_fast = rho(config.jitter_tau_s);
        let slow = draw(&mut rng, config.noise_sigma);
        let fast = draw(&mut rng, config.jitter_sigma);
        Self {
            slow,
            fast,
            rho_slow,
            rho_fast,
            sigma_slow: config.noise_sigma,
            sigma_fast: config.jitter_sigma,
            rng,
        }
    }

    /// Noise value for the current tick; advances the stream.
    pub fn next_draw(&mut self) -> f64 {
        let value = self.slow + self.fast;
        let z1: f64 = StandardNormal.sample(&mut self.rng);
        let z2: f64 = StandardNormal.sample(&mut self.rng);
        self.slow = self.rho_slow * self.slow
            + self.sigma_slow * (1.0 - self.rho_slow * self.rho_slow).sqrt() * z1;
        self.fast = self.rho_fast * self.fast
            + self.sigma_fast * (1.0 - self.rho_fast * self.rho_fast).sqrt() * z2;
        value
    }
}

/// One quantized reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub reading: f64,
}

/// Timestamped quantized readings for one core, gaps allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTrace {
    pub core_id: usize,
    pub resolution: f64,
    pub refresh_period: f64,
    pub samples: Vec<Sample>,
}

impl SensorTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn readings(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.reading)
    }

    /// `time_s,core_id,reading_c` rows, six decimals; same schema as the
    /// ground-truth export so decoders are agnostic to the source.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,core_id,reading_c\n");
        for s in &self.samples {
            out.push_str(&format!("{:.6},{},{:.6}\n", s.time, self.core_id, s.reading));
        }
        out
    }

    /// Parses the CSV schema above; used to replay external sensor dumps.
    pub fn from_csv(text: &str, resolution: f64, refresh_period: f64) -> Result<Self> {
        let mut samples = Vec::new();
        let mut core_id = 0usize;
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("time_s") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let err = || Error::ConfigParse(format!("bad trace row: {line}"));
            let time: f64 = parts.next().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
            core_id = parts.next().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
            let reading: f64 = parts.next().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
            samples.push(Sample { time, reading });
        }
        Ok(Self {
            core_id,
            resolution,
            refresh_period,
            samples,
        })
    }
}

/// Quantizes to the resolution grid, rounding half up.
fn round_to_resolution(value: f64, resolution: f64) -> f64 {
    (value / resolution + 0.5).floor() * resolution
}

/// Converts one true temperature into a DTS reading.
///
/// `noise_draw` is the additive noise for this tick, supplied by the
/// caller's stream so that runs stay reproducible.
pub fn sample(true_temp: f64, config: &DtsConfig, noise_draw: f64) -> Result<f64> {
    if true_temp >= config.tj_max {
        return Err(Error::ThermalTrip {
            core: 0,
            temp: true_temp,
            tj_max: config.tj_max,
            time: 0.0,
        });
    }
    Ok(round_to_resolution(true_temp + noise_draw, config.resolution))
}

/// Sorted, non-overlapping time intervals during which the observer may read.
pub type GatingWindows = [(f64, f64)];

fn validate_windows(windows: &GatingWindows) -> Result<()> {
    let mut prev_end = f64::NEG_INFINITY;
    for &(start, end) in windows {
        if !(end > start) {
            return Err(Error::Config(format!("empty gating window ({start}, {end})")));
        }
        if start < prev_end {
            return Err(Error::Config("gating windows overlap or unsorted".into()));
        }
        prev_end = end;
    }
    Ok(())
}

fn in_windows(t: f64, windows: &GatingWindows) -> bool {
    // Half-open [start, end): a tick on the boundary belongs to the window
    // that starts there.
    let idx = windows.partition_point(|&(start, _)| start <= t + 1e-12);
    if idx == 0 {
        return false;
    }
    let (start, end) = windows[idx - 1];
    t >= start - 1e-12 && t < end - 1e-12
}

/// Samples the ground-truth trace at every refresh tick inside the gating
/// windows (all ticks when ungated). Deterministic given the seed.
///
/// The noise stream advances on every tick regardless of gating: the sensor
/// refreshes whether or not anyone reads it.
pub fn observe(
    trace: &Trace,
    core_id: usize,
    config: &DtsConfig,
    windows: Option<&GatingWindows>,
) -> Result<SensorTrace> {
    config.validate()?;
    if let Some(w) = windows {
        validate_windows(w)?;
    }
    let mut out = SensorTrace {
        core_id,
        resolution: config.resolution,
        refresh_period: config.refresh_period,
        samples: Vec::new(),
    };
    if trace.is_empty() {
        return Ok(out);
    }
    if core_id >= trace.n_cores {
        return Err(Error::Config(format!(
            "core {core_id} outside topology of {} cores",
            trace.n_cores
        )));
    }

    let mut noise = NoiseStream::new(config, core_id);
    let t_start = trace.time(0);
    let t_end = trace.time(trace.len() - 1);
    // Ticks sit on the absolute refresh grid so that slice boundaries can
    // be aligned with them.
    let mut k = (t_start / config.refresh_period).ceil() as i64;
    loop {
        let t = k as f64 * config.refresh_period;
        if t > t_end + 1e-12 {
            break;
        }
        let draw = noise.next_draw();
        let keep = windows.map_or(true, |w| in_windows(t, w));
        if keep {
            let idx = ((t - t_start) / trace.dt).round() as usize;
            let idx = idx.min(trace.len() - 1);
            let true_temp = trace.core_temp(idx, core_id);
            let reading = sample(true_temp, config, draw).map_err(|e| match e {
                Error::ThermalTrip { temp, tj_max, .. } => Error::ThermalTrip {
                    core: core_id,
                    temp,
                    tj_max,
                    time: t,
                },
                other => other,
            })?;
            out.samples.push(Sample { time: t, reading });
        }
        k += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::{simulate, ChipTopology, PowerSchedule};

    fn quiet_config() -> DtsConfig {
        DtsConfig {
            noise_sigma: 0.0,
            jitter_sigma: 0.0,
            ..DtsConfig::default()
        }
    }

    #[test]
    fn noiseless_on_grid_value_unchanged() {
        let cfg = quiet_config();
        assert_eq!(sample(40.0, &cfg, 0.0).unwrap(), 40.0);
    }

    #[test]
    fn rounding_to_grid() {
        let cfg = quiet_config();
        assert_eq!(sample(40.4, &cfg, 0.0).unwrap(), 40.0);
        assert_eq!(sample(40.5, &cfg, 0.0).unwrap(), 41.0);
        assert_eq!(sample(40.6, &cfg, 0.0).unwrap(), 41.0);
    }

    #[test]
    fn trip_at_tj_max() {
        let cfg = quiet_config();
        assert!(sample(100.0, &cfg, 0.0).is_err());
        assert!(sample(120.0, &cfg, 0.0).is_err());
    }

    /// Empirical bin frequencies of quantized noisy readings must match the
    /// closed-form quantized-Gaussian probabilities.
    #[test]
    fn quantized_gaussian_matches_analytic_bins() {
        use rand::SeedableRng;
        let cfg = quiet_config();
        let sigma = 0.5;
        let true_temp = 40.5;
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = std::collections::BTreeMap::<i64, usize>::new();
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let reading = sample(true_temp, &cfg, sigma * z).unwrap();
            *counts.entry(reading.round() as i64).or_default() += 1;
        }
        // Φ via Abramowitz-Stegun 7.1.26, plenty for a 1 % tolerance.
        fn phi(x: f64) -> f64 {
            let t = 1.0 / (1.0 + 0.3275911 * x.abs() / std::f64::consts::SQRT_2);
            let poly = t
                * (0.254829592
                    + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
            let erf = 1.0 - poly * (-x * x / 2.0).exp();
            if x >= 0.0 {
                0.5 * (1.0 + erf)
            } else {
                0.5 * (1.0 - erf)
            }
        }
        for k in 38..=43i64 {
            let lo = (k as f64 - 0.5 - true_temp) / sigma;
            let hi = (k as f64 + 0.5 - true_temp) / sigma;
            let expected = phi(hi) - phi(lo);
            let observed = *counts.get(&k).unwrap_or(&0) as f64 / n as f64;
            assert!(
                (observed - expected).abs() < 0.01,
                "bin {k}: observed {observed:.4}, analytic {expected:.4}"
            );
        }
    }

    fn flat_trace(duration: f64, temp: f64) -> Trace {
        let topo = ChipTopology {
            ambient_temp: temp,
            ..ChipTopology::default()
        };
        let schedule = PowerSchedule::constant(topo.n_cores, 0.0);
        simulate(&topo, &schedule, &topo.ambient_state(), duration, 0.001).unwrap()
    }

    #[test]
    fn ungated_constant_trace_constant_samples() {
        let trace = flat_trace(0.1, 35.0);
        let cfg = quiet_config();
        let st = observe(&trace, 0, &cfg, None).unwrap();
        assert_eq!(st.len(), 51); // ticks at 0, 2, ..., 100 ms
        assert!(st.readings().all(|r| r == 35.0));
        for pair in st.samples.windows(2) {
            let dt = pair[1].time - pair[0].time;
            assert!((dt - cfg.refresh_period).abs() < 1e-12);
        }
    }

    #[test]
    fn gating_halves_sample_count() {
        let trace = flat_trace(1.0, 35.0);
        let cfg = quiet_config();
        let all = observe(&trace, 0, &cfg, None).unwrap().len();
        let windows: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.02, i as f64 * 0.02 + 0.01)).collect();
        let gated = observe(&trace, 0, &cfg, Some(&windows)).unwrap();
        let half = all / 2;
        assert!(
            gated.len() >= half - 1 && gated.len() <= half + 1,
            "expected about {half}, got {}",
            gated.len()
        );
        for s in &gated.samples {
            assert!(in_windows(s.time, &windows), "sample at {} outside windows", s.time);
        }
    }

    #[test]
    fn seeded_determinism() {
        let trace = flat_trace(0.5, 35.0);
        let cfg = DtsConfig::default();
        let a = observe(&trace, 3, &cfg, None).unwrap();
        let b = observe(&trace, 3, &cfg, None).unwrap();
        assert_eq!(a, b);
        let c = observe(&trace, 3, &cfg.with_seed(2), None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn readings_stay_on_resolution_grid() {
        let trace = flat_trace(0.5, 35.3);
        let cfg = DtsConfig::default();
        let st = observe(&trace, 1, &cfg, None).unwrap();
        for r in st.readings() {
            let ratio = r / cfg.resolution;
            assert!((ratio - ratio.round()).abs() < 1e-9, "off-grid reading {r}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let trace = flat_trace(0.02, 35.0);
        let cfg = DtsConfig::default();
        let st = observe(&trace, 2, &cfg, None).unwrap();
        let text = st.to_csv();
        let back = SensorTrace::from_csv(&text, cfg.resolution, cfg.refresh_period).unwrap();
        assert_eq!(st.core_id, back.core_id);
        assert_eq!(st.len(), back.len());
        for (a, b) in st.samples.iter().zip(&back.samples) {
            assert!((a.time - b.time).abs() < 1e-6);
            assert!((a.reading - b.reading).abs() < 1e-6);
        }
    }
}
