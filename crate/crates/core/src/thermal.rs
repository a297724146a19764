//! Lumped RC thermal model of an N-core processor die.
//!
//! Each core is a die node with its own capacitance, coupled to its chain
//! neighbours through a lateral resistance and to a shared spreader node
//! through a die-to-spreader resistance. The spreader drains to ambient
//! through the (fan-dependent) spreader-to-ambient resistance. The two-node
//! structure gives the two observed time scales: a fast die response in the
//! tens of milliseconds and a slow spreader response in the tens of seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and RC constants of a linear-chain die with a shared spreader.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChipTopology {
    pub n_cores: usize,
    /// Die-node capacitance per core (J/°C).
    pub core_capacitance: f64,
    /// Spreader capacitance (J/°C).
    pub spreader_capacitance: f64,
    /// Resistance between adjacent die nodes (°C/W).
    pub r_lateral: f64,
    /// Resistance from each die node to the spreader (°C/W).
    pub r_die_to_spreader: f64,
    /// Resistance from the spreader to ambient, fan speed folded in (°C/W).
    pub r_spreader_to_ambient: f64,
    /// Room temperature (°C).
    pub ambient_temp: f64,
    /// Index shift of the heat injection point, modelling an asymmetrically
    /// located hotspot. 0 means heat enters at the sensor's own node.
    pub hotspot_offset: i32,
}

impl Default for ChipTopology {
    fn default() -> Self {
        // Calibrated against the reference step response: 35 °C idle
        // baseline, ~5 °C rise in 25 ms, 43 °C saturation, ~11 s decay
        // back to within 1 °C of baseline.
        Self {
            n_cores: 8,
            core_capacitance: 0.024,
            spreader_capacitance: 340.0,
            r_lateral: 1.55,
            r_die_to_spreader: 1.0,
            r_spreader_to_ambient: 0.115,
            ambient_temp: 22.0,
            hotspot_offset: 0,
        }
    }
}

impl ChipTopology {
    pub fn validate(&self) -> Result<()> {
        if self.n_cores == 0 {
            return Err(Error::Config("n_cores must be at least 1".into()));
        }
        let positives = [
            ("core_capacitance", self.core_capacitance),
            ("spreader_capacitance", self.spreader_capacitance),
            ("r_lateral", self.r_lateral),
            ("r_die_to_spreader", self.r_die_to_spreader),
            ("r_spreader_to_ambient", self.r_spreader_to_ambient),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.ambient_temp.is_finite() {
            return Err(Error::Config("ambient_temp must be finite".into()));
        }
        Ok(())
    }

    /// Die node that receives the heat generated by `core`.
    pub fn injection_node(&self, core: usize) -> usize {
        let shifted = core as i64 + self.hotspot_offset as i64;
        shifted.clamp(0, self.n_cores as i64 - 1) as usize
    }

    /// Largest explicit-Euler step that keeps every node update stable.
    pub fn stability_bound(&self) -> f64 {
        let mut bound = f64::INFINITY;
        for i in 0..self.n_cores {
            let mut g = 1.0 / self.r_die_to_spreader;
            if i > 0 {
                g += 1.0 / self.r_lateral;
            }
            if i + 1 < self.n_cores {
                g += 1.0 / self.r_lateral;
            }
            bound = bound.min(self.core_capacitance / g);
        }
        let g_sp =
            self.n_cores as f64 / self.r_die_to_spreader + 1.0 / self.r_spreader_to_ambient;
        bound.min(self.spreader_capacitance / g_sp)
    }

    /// State with every node at ambient, time zero.
    pub fn ambient_state(&self) -> ThermalState {
        ThermalState {
            die_temps: vec![self.ambient_temp; self.n_cores],
            spreader_temp: self.ambient_temp,
            time: 0.0,
        }
    }
}

/// Die and spreader temperatures at one simulation instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub die_temps: Vec<f64>,
    pub spreader_temp: f64,
    pub time: f64,
}

/// Activity-to-power conversion, one frequency shared by all cores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerModel {
    /// Per-core idle power (W), background load folded in.
    pub idle_w: f64,
    /// Dynamic power coefficient (W/GHz^freq_exponent).
    pub k_w: f64,
    /// Exponent of the frequency dependence, fitted rather than assumed.
    pub freq_exponent: f64,
    /// Discrete frequencies the platform supports (GHz).
    pub supported_ghz: Vec<f64>,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            idle_w: 6.75,
            k_w: 3.10,
            freq_exponent: 1.30,
            supported_ghz: vec![1.2, 1.9, 2.4, 2.9],
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.idle_w >= 0.0) || !(self.k_w > 0.0) || !(self.freq_exponent > 0.0) {
            return Err(Error::Config("power constants must be positive".into()));
        }
        if self.supported_ghz.is_empty() {
            return Err(Error::Config("supported frequency set is empty".into()));
        }
        Ok(())
    }

    fn check_frequency(&self, ghz: f64) -> Result<()> {
        if self
            .supported_ghz
            .iter()
            .any(|&f| (f - ghz).abs() < 1e-9)
        {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unsupported frequency {ghz} GHz (supported: {:?})",
                self.supported_ghz
            )))
        }
    }

    /// Power drawn by one core at the given activity fraction and frequency.
    pub fn power_of(&self, activity: f64, ghz: f64) -> Result<f64> {
        self.check_frequency(ghz)?;
        if !(0.0..=1.0).contains(&activity) {
            return Err(Error::Config(format!(
                "activity {activity} outside [0, 1]"
            )));
        }
        Ok(self.idle_w + activity * self.k_w * ghz.powf(self.freq_exponent))
    }
}

/// Per-core piecewise-constant power as a function of time.
#[derive(Debug, Clone)]
pub struct PowerSchedule {
    /// Per core: (start time, power) breakpoints, sorted by time.
    breakpoints: Vec<Vec<(f64, f64)>>,
}

impl PowerSchedule {
    /// Constant power on every core.
    pub fn constant(n_cores: usize, watts: f64) -> Self {
        Self {
            breakpoints: vec![vec![(0.0, watts)]; n_cores],
        }
    }

    /// Appends a breakpoint: `core` draws `watts` from `time` onward.
    pub fn set_from(&mut self, core: usize, time: f64, watts: f64) {
        let bps = &mut self.breakpoints[core];
        debug_assert!(bps.last().map_or(true, |&(t, _)| time >= t));
        bps.push((time, watts));
    }

    pub fn n_cores(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn power_at(&self, core: usize, time: f64) -> f64 {
        let bps = &self.breakpoints[core];
        match bps.partition_point(|&(t, _)| t <= time) {
            0 => 0.0,
            i => bps[i - 1].1,
        }
    }

    fn validate(&self, topology: &ChipTopology) -> Result<()> {
        if self.breakpoints.len() != topology.n_cores {
            return Err(Error::Config(format!(
                "schedule covers {} cores, topology has {}",
                self.breakpoints.len(),
                topology.n_cores
            )));
        }
        for bps in &self.breakpoints {
            if bps.iter().any(|&(_, w)| w < 0.0 || !w.is_finite()) {
                return Err(Error::Config("negative or non-finite power".into()));
            }
        }
        Ok(())
    }
}

/// Continuous ground-truth temperature trace, sampled every `dt`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub dt: f64,
    pub start_time: f64,
    pub n_cores: usize,
    die: Vec<f64>,
    spreader: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.spreader.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spreader.is_empty()
    }

    pub fn time(&self, idx: usize) -> f64 {
        self.start_time + idx as f64 * self.dt
    }

    pub fn core_temp(&self, idx: usize, core: usize) -> f64 {
        self.die[idx * self.n_cores + core]
    }

    pub fn spreader_temp(&self, idx: usize) -> f64 {
        self.spreader[idx]
    }

    pub fn state(&self, idx: usize) -> ThermalState {
        ThermalState {
            die_temps: self.die[idx * self.n_cores..(idx + 1) * self.n_cores].to_vec(),
            spreader_temp: self.spreader[idx],
            time: self.time(idx),
        }
    }

    pub fn last_state(&self) -> ThermalState {
        self.state(self.len() - 1)
    }

    /// Writes `time_s,core_id,temp_c` rows with six decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,core_id,temp_c\n");
        for idx in 0..self.len() {
            for core in 0..self.n_cores {
                out.push_str(&format!(
                    "{:.6},{},{:.6}\n",
                    self.time(idx),
                    core,
                    self.core_temp(idx, core)
                ));
            }
        }
        out
    }
}

fn die_derivatives_into(
    state: &ThermalState,
    topology: &ChipTopology,
    powers: &[f64],
    injected: &mut [f64],
    ddt: &mut [f64],
) {
    let n = topology.n_cores;
    injected.fill(0.0);
    for (core, &p) in powers.iter().enumerate() {
        injected[topology.injection_node(core)] += p;
    }
    let t = &state.die_temps;
    for i in 0..n {
        let mut flow = injected[i];
        if i > 0 {
            flow -= (t[i] - t[i - 1]) / topology.r_lateral;
        }
        if i + 1 < n {
            flow -= (t[i] - t[i + 1]) / topology.r_lateral;
        }
        flow -= (t[i] - state.spreader_temp) / topology.r_die_to_spreader;
        ddt[i] = flow / topology.core_capacitance;
    }
    let mut sp_flow = 0.0;
    for temp in t {
        sp_flow += (temp - state.spreader_temp) / topology.r_die_to_spreader;
    }
    sp_flow -= (state.spreader_temp - topology.ambient_temp) / topology.r_spreader_to_ambient;
    ddt[n] = sp_flow / topology.spreader_capacitance;
}

/// One forward-Euler step of the RC network.
pub fn step(
    state: &ThermalState,
    topology: &ChipTopology,
    powers: &[f64],
    dt: f64,
) -> Result<ThermalState> {
    let bound = topology.stability_bound();
    if !(dt > 0.0) || dt > bound {
        return Err(Error::UnstableStep { dt, bound });
    }
    if powers.len() != topology.n_cores {
        return Err(Error::Config(format!(
            "{} powers for {} cores",
            powers.len(),
            topology.n_cores
        )));
    }
    let n = topology.n_cores;
    let mut injected = vec![0.0; n];
    let mut ddt = vec![0.0; n + 1];
    die_derivatives_into(state, topology, powers, &mut injected, &mut ddt);
    let mut next = state.clone();
    for i in 0..n {
        next.die_temps[i] += dt * ddt[i];
    }
    next.spreader_temp += dt * ddt[n];
    next.time += dt;
    Ok(next)
}

/// Integrates the schedule from `start` for `duration` seconds.
///
/// Deterministic: fixed step, fixed evaluation order. The returned trace
/// includes the initial state and one entry per step thereafter.
pub fn simulate(
    topology: &ChipTopology,
    schedule: &PowerSchedule,
    start: &ThermalState,
    duration: f64,
    dt: f64,
) -> Result<Trace> {
    if !(duration > 0.0) {
        return Err(Error::Config("duration must be positive".into()));
    }
    schedule.validate(topology)?;
    let bound = topology.stability_bound();
    if !(dt > 0.0) || dt > bound {
        return Err(Error::UnstableStep { dt, bound });
    }

    let n = topology.n_cores;
    let steps = (duration / dt).round() as usize;
    let mut trace = Trace {
        dt,
        start_time: start.time,
        n_cores: n,
        die: Vec::with_capacity((steps + 1) * n),
        spreader: Vec::with_capacity(steps + 1),
    };
    let mut state = start.clone();
    trace.die.extend_from_slice(&state.die_temps);
    trace.spreader.push(state.spreader_temp);

    let mut powers = vec![0.0; n];
    let mut injected = vec![0.0; n];
    let mut ddt = vec![0.0; n + 1];
    for k in 0..steps {
        let t = start.time + k as f64 * dt;
        for (core, p) in powers.iter_mut().enumerate() {
            *p = schedule.power_at(core, t);
        }
        die_derivatives_into(&state, topology, &powers, &mut injected, &mut ddt);
        for i in 0..n {
            state.die_temps[i] += dt * ddt[i];
        }
        state.spreader_temp += dt * ddt[n];
        state.time = start.time + (k + 1) as f64 * dt;
        trace.die.extend_from_slice(&state.die_temps);
        trace.spreader.push(state.spreader_temp);
    }
    Ok(trace)
}

/// Equilibrium temperatures under constant powers, by direct linear solve.
pub fn steady_state(topology: &ChipTopology, powers: &[f64]) -> Result<ThermalState> {
    if powers.len() != topology.n_cores {
        return Err(Error::Config(format!(
            "{} powers for {} cores",
            powers.len(),
            topology.n_cores
        )));
    }
    let n = topology.n_cores;
    let m = n + 1;
    let g_lat = 1.0 / topology.r_lateral;
    let g_ds = 1.0 / topology.r_die_to_spreader;
    let g_sa = 1.0 / topology.r_spreader_to_ambient;

    let mut injected = vec![0.0; n];
    for (core, &p) in powers.iter().enumerate() {
        injected[topology.injection_node(core)] += p;
    }

    // Conductance matrix over (die nodes, spreader), RHS in watts.
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for i in 0..n {
        let mut diag = g_ds;
        if i > 0 {
            diag += g_lat;
            a[i * m + (i - 1)] = -g_lat;
        }
        if i + 1 < n {
            diag += g_lat;
            a[i * m + (i + 1)] = -g_lat;
        }
        a[i * m + i] = diag;
        a[i * m + n] = -g_ds;
        a[n * m + i] = -g_ds;
        b[i] = injected[i];
    }
    a[n * m + n] = n as f64 * g_ds + g_sa;
    b[n] = g_sa * topology.ambient_temp;

    solve_dense(&mut a, &mut b, m)?;
    Ok(ThermalState {
        die_temps: b[..n].to_vec(),
        spreader_temp: b[n],
        time: 0.0,
    })
}

/// Gaussian elimination with partial pivoting on a row-major matrix.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Result<()> {
    for col in 0..m {
        let mut pivot = col;
        for row in col + 1..m {
            if a[row * m + col].abs() > a[pivot * m + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * m + col].abs() < 1e-12 {
            return Err(Error::Config("singular thermal network".into()));
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..m {
            let factor = a[row * m + col] / a[col * m + col];
            if factor == 0.0 {
                continue;
            }
            for k in col..m {
                a[row * m + k] -= factor * a[col * m + k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..m).rev() {
        let mut acc = b[col];
        for k in col + 1..m {
            acc -= a[col * m + k] * b[k];
        }
        b[col] = acc / a[col * m + col];
    }
    Ok(())
}
