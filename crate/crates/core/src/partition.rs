//! Spatial and temporal resource partitioning.
//!
//! Spatial mode pins source and sink to distinct cores running
//! concurrently; the channel crosses cores through lateral heat
//! conduction. Temporal mode round-robins both on one shared core; the
//! channel crosses slices through remnant heat, and the sink sees the
//! sensor only during its own slice.

use serde::{Deserialize, Serialize};

use crate::channel::ActivitySchedule;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::sensor::{observe, SensorTrace};
use crate::thermal::{simulate, steady_state, PowerSchedule, Trace};

/// Source and sink on distinct cores, running concurrently.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpatialPlan {
    pub source_core: usize,
    pub sink_core: usize,
    pub frequency_ghz: f64,
    /// Transmission window length (s), lead-in excluded.
    pub duration: f64,
}

/// Source and sink sharing one core in alternating slices, source first.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TemporalPlan {
    pub shared_core: usize,
    /// Scheduler quantum t_s (s); must be a whole number of refresh periods
    /// so slice boundaries align with sensor ticks.
    pub slice_len: f64,
    pub frequency_ghz: f64,
    pub duration: f64,
}

impl SpatialPlan {
    fn validate(&self, config: &Config) -> Result<()> {
        let n = config.topology.n_cores;
        if self.source_core >= n || self.sink_core >= n {
            return Err(Error::Config(format!(
                "cores ({}, {}) outside topology of {n} cores",
                self.source_core, self.sink_core
            )));
        }
        if self.source_core == self.sink_core {
            return Err(Error::Config(
                "spatial partitioning requires distinct source and sink cores".into(),
            ));
        }
        if !(self.duration > 0.0) {
            return Err(Error::Config("plan duration must be positive".into()));
        }
        Ok(())
    }
}

impl TemporalPlan {
    fn validate(&self, config: &Config) -> Result<()> {
        if self.shared_core >= config.topology.n_cores {
            return Err(Error::Config(format!(
                "core {} outside topology of {} cores",
                self.shared_core, config.topology.n_cores
            )));
        }
        let refresh = config.sensor.refresh_period;
        if self.slice_len < refresh {
            return Err(Error::Config(format!(
                "slice length {} s below one refresh period {} s",
                self.slice_len, refresh
            )));
        }
        let ratio = self.slice_len / refresh;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "slice length {} s is not a whole number of refresh periods",
                self.slice_len
            )));
        }
        Ok(())
    }
}

/// Sink-core sensor trace plus the underlying ground truth.
pub struct RunOutput {
    pub sink_trace: SensorTrace,
    pub truth: Trace,
    /// Time at which the first transmitted bit period starts.
    pub tx_start: f64,
}

/// Runs a spatial experiment and returns the sink core's ungated trace.
pub fn run_spatial(
    plan: &SpatialPlan,
    activity: &ActivitySchedule,
    config: &Config,
) -> Result<SensorTrace> {
    run_spatial_detailed(plan, activity, config).map(|out| out.sink_trace)
}

/// Spatial run keeping the ground-truth trace for calibration work.
pub fn run_spatial_detailed(
    plan: &SpatialPlan,
    activity: &ActivitySchedule,
    config: &Config,
) -> Result<RunOutput> {
    plan.validate(config)?;
    let on_intervals = match activity {
        ActivitySchedule::Spatial { on_intervals, .. } => on_intervals,
        ActivitySchedule::Temporal { .. } => {
            return Err(Error::Config(
                "temporal schedule passed to a spatial run".into(),
            ))
        }
    };
    if activity.duration() > plan.duration + 1e-9 {
        return Err(Error::Config(format!(
            "activity of {} s exceeds plan duration {} s",
            activity.duration(),
            plan.duration
        )));
    }

    let topo = &config.topology;
    let power = &config.power;
    let f = plan.frequency_ghz;
    let p_idle = power.power_of(0.0, f)?;
    let p_on = power.power_of(1.0, f)?;
    let p_sink = power.power_of(config.channel.sink_load, f)?;
    let lead_in = config.channel.lead_in_s;

    // The platform idles before the sink process starts; its own small
    // measurement load then produces the slow documented drift.
    let start = steady_state(topo, &vec![p_idle; topo.n_cores])?;

    let mut schedule = PowerSchedule::constant(topo.n_cores, p_idle);
    schedule.set_from(plan.sink_core, 0.0, p_sink);
    for &(on, off) in on_intervals {
        schedule.set_from(plan.source_core, lead_in + on, p_on);
        schedule.set_from(plan.source_core, lead_in + off, p_idle);
    }

    let total = lead_in + plan.duration + 4.0 * config.sensor.refresh_period;
    let truth = simulate(topo, &schedule, &start, total, sim_dt(config))?;
    let sink_trace = observe(&truth, plan.sink_core, &config.sensor, None)?;
    Ok(RunOutput {
        sink_trace,
        truth,
        tx_start: lead_in,
    })
}

/// Sink-slice gating windows over `[0, total)` for the given quantum.
fn sink_windows(total: f64, t_s: f64) -> Vec<(f64, f64)> {
    let mut windows = Vec::new();
    let mut k = 0usize;
    loop {
        let start = (2 * k + 1) as f64 * t_s;
        if start >= total {
            break;
        }
        windows.push((start, (start + t_s).min(total)));
        k += 1;
    }
    windows
}

/// Runs a temporal experiment: one ON/OFF decision per source slice, trace
/// gated to the sink's slices.
pub fn run_temporal(
    plan: &TemporalPlan,
    activity: &ActivitySchedule,
    config: &Config,
) -> Result<SensorTrace> {
    run_temporal_detailed(plan, activity, config).map(|out| out.sink_trace)
}

pub fn run_temporal_detailed(
    plan: &TemporalPlan,
    activity: &ActivitySchedule,
    config: &Config,
) -> Result<RunOutput> {
    plan.validate(config)?;
    let slice_bits = match activity {
        ActivitySchedule::Temporal {
            slice_len,
            slice_bits,
        } => {
            if (slice_len - plan.slice_len).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "schedule slice {} s does not match plan slice {} s",
                    slice_len, plan.slice_len
                )));
            }
            slice_bits
        }
        ActivitySchedule::Spatial { .. } => {
            return Err(Error::Config(
                "spatial schedule passed to a temporal run".into(),
            ))
        }
    };
    if activity.duration() > plan.duration + 1e-9 {
        return Err(Error::Config(format!(
            "activity of {} s exceeds plan duration {} s",
            activity.duration(),
            plan.duration
        )));
    }

    let topo = &config.topology;
    let power = &config.power;
    let f = plan.frequency_ghz;
    let p_idle = power.power_of(0.0, f)?;
    let p_on = power.power_of(1.0, f)?;
    let p_sink = power.power_of(config.channel.sink_load, f)?;
    let t_s = plan.slice_len;

    // Lead-in rounded to whole periods so transmission starts on a source
    // slice boundary.
    let period = 2.0 * t_s;
    let lead_periods = (config.channel.lead_in_s / period).ceil() as usize;
    let tx_start = lead_periods as f64 * period;
    let total = tx_start + plan.duration + 4.0 * config.sensor.refresh_period;

    let start = steady_state(topo, &vec![p_idle; topo.n_cores])?;
    let mut schedule = PowerSchedule::constant(topo.n_cores, p_idle);
    // Round-robin from t = 0: idle source slices during lead-in, then one
    // slice per bit; the sink's load occupies every second slice.
    let total_periods = (total / period).ceil() as usize;
    for k in 0..total_periods {
        let src_start = k as f64 * period;
        let on = k >= lead_periods && slice_bits.get(k - lead_periods).copied() == Some(1);
        schedule.set_from(
            plan.shared_core,
            src_start,
            if on { p_on } else { p_idle },
        );
        schedule.set_from(plan.shared_core, src_start + t_s, p_sink);
    }

    let truth = simulate(topo, &schedule, &start, total, sim_dt(config))?;
    let windows = sink_windows(total, t_s);
    let sink_trace = observe(&truth, plan.shared_core, &config.sensor, Some(&windows))?;
    Ok(RunOutput {
        sink_trace,
        truth,
        tx_start,
    })
}

/// Integrator step: half a refresh period, capped by the stability bound.
pub fn sim_dt(config: &Config) -> f64 {
    let dt = config.sensor.refresh_period / 2.0;
    let bound = config.topology.stability_bound();
    if dt > bound * 0.5 {
        bound * 0.5
    } else {
        dt
    }
}
