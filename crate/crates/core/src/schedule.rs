//! Fourier-sine annealing schedules on a discrete coefficient grid.
//!
//! A schedule is `s(t) = t/T + sum_i x_i sin(i pi t / T)` for `i = 1..=M`.
//! The sine terms vanish at both ends, so `s(0) = 0` and `s(T) = 1` for any
//! coefficients. Each `x_i` is restricted to `{-l, -l + delta, ..., l}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The discrete search space: `M` coefficients, each one of
/// `2l/delta + 1` evenly spaced values in `[-l, l]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleGrid {
    components: usize,
    bound: f64,
    step: f64,
    half_width: usize,
}

impl ScheduleGrid {
    pub fn new(components: usize, bound: f64, step: f64) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidGrid("need at least one component".into()));
        }
        if !(bound > 0.0 && step > 0.0) || !bound.is_finite() || !step.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bound and step must be positive (l={bound}, delta={step})"
            )));
        }
        let ratio = bound / step;
        let half_width = ratio.round();
        if (ratio - half_width).abs() > 1e-9 * ratio.max(1.0) || half_width < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "l/delta = {ratio} is not a positive integer"
            )));
        }
        Ok(ScheduleGrid {
            components,
            bound,
            step,
            half_width: half_width as usize,
        })
    }

    /// `M = 5`, `l = 0.2`, `delta = 0.01`: 41 choices per coefficient.
    pub fn standard() -> Self {
        ScheduleGrid::new(5, 0.2, 0.01).expect("valid default grid")
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `2l/delta + 1`.
    pub fn choices(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Index of the zero coefficient.
    pub fn zero_index(&self) -> usize {
        self.half_width
    }

    /// `(2l/delta + 1)^M`, as a float since it overflows quickly.
    pub fn space_size(&self) -> f64 {
        (self.choices() as f64).powi(self.components as i32)
    }

    pub fn value(&self, index: usize) -> Result<f64> {
        if index >= self.choices() {
            return Err(Error::IndexOutOfRange {
                index,
                max: self.choices() - 1,
            });
        }
        Ok(-self.bound + index as f64 * self.step)
    }

    pub fn index_of(&self, value: f64) -> Result<usize> {
        let raw = (value + self.bound) / self.step;
        let idx = raw.round();
        if !(raw - idx).abs().le(&1e-9) || idx < 0.0 || idx as usize >= self.choices() {
            return Err(Error::OffGrid {
                value,
                bound: self.bound,
                step: self.step,
            });
        }
        Ok(idx as usize)
    }

    pub fn params_from_indices(&self, indices: &[usize]) -> Result<ScheduleParams> {
        if indices.len() != self.components {
            return Err(Error::Shape(format!(
                "expected {} indices, got {}",
                self.components,
                indices.len()
            )));
        }
        let x = indices
            .iter()
            .map(|&i| self.value(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScheduleParams { x })
    }

    pub fn indices_of(&self, params: &ScheduleParams) -> Result<Vec<usize>> {
        if params.x.len() != self.components {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                self.components,
                params.x.len()
            )));
        }
        params.x.iter().map(|&v| self.index_of(v)).collect()
    }

    pub fn linear(&self) -> ScheduleParams {
        ScheduleParams::zeros(self.components)
    }
}

/// Fourier coefficients `x_1..x_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub x: Vec<f64>,
}

impl ScheduleParams {
    pub fn new(x: Vec<f64>) -> Self {
        ScheduleParams { x }
    }

    pub fn zeros(m: usize) -> Self {
        ScheduleParams { x: vec![0.0; m] }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// A concrete schedule `s(t)` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    params: ScheduleParams,
    total_time: f64,
    clamp: bool,
}

impl Schedule {
    pub fn new(params: ScheduleParams, total_time: f64) -> Result<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::InvalidAnneal(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        Ok(Schedule {
            params,
            total_time,
            clamp: true,
        })
    }

    pub fn linear(total_time: f64) -> Result<Self> {
        Schedule::new(ScheduleParams::zeros(0), total_time)
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    /// Schedule pinned at a constant `s` for the whole duration. Only meant
    /// for frozen-Hamiltonian checks; it does not satisfy the endpoint
    /// conditions.
    pub fn frozen(s: f64, total_time: f64) -> Result<FrozenSchedule> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidAnneal(format!("frozen s={s} outside [0,1]")));
        }
        Ok(FrozenSchedule { s, total_time })
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn clamped(&self) -> bool {
        self.clamp
    }

    /// `s(t)` without range checks or clamping.
    pub fn raw(&self, t: f64) -> f64 {
        let tau = t / self.total_time;
        let mut s = tau;
        for (i, &xi) in self.params.x.iter().enumerate() {
            s += xi * ((i + 1) as f64 * PI * tau).sin();
        }
        s
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.total_time).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                total: self.total_time,
            });
        }
        Ok(self.value_at(t))
    }

    pub(crate) fn value_at(&self, t: f64) -> f64 {
        // sin(k pi) is not exactly zero in floating point; pin the ends.
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.total_time {
            return 1.0;
        }
        let s = self.raw(t);
        if self.clamp {
            s.clamp(0.0, 1.0)
        } else {
            s
        }
    }

    /// `(t, s(t))` pairs on `samples + 1` evenly spaced times.
    pub fn sample(&self, samples: usize) -> Vec<(f64, f64)> {
        let samples = samples.max(1);
        (0..=samples)
            .map(|k| {
                let t = self.total_time * k as f64 / samples as f64;
                (t, self.value_at(t))
            })
            .collect()
    }

    pub fn to_csv(&self, samples: usize) -> String {
        let mut out = String::from("t,s\n");
        for (t, s) in self.sample(samples) {
            out.push_str(&format!("{t},{s}\n"));
        }
        out
    }
}

/// Constant-`s` protocol used to test eigenstate behaviour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenSchedule {
    pub s: f64,
    pub total_time: f64,
}

/// Anything that maps a time in `[0, T]` to a mixing parameter.
pub trait Protocol: Sync {
    fn total_time(&self) -> f64;
    fn s_at(&self, t: f64) -> f64;
}

impl Protocol for Schedule {
    fn total_time(&self) -> f64 {
        self.total_time
    }

    fn s_at(&self, t: f64) -> f64 {
        self.value_at(t)
    }
}

impl Protocol for FrozenSchedule {
    fn total_time(&self) -> f64 {
        self.total_time
    }

    fn s_at(&self, _t: f64) -> f64 {
        self.s
    }
}

/// On-disk schedule description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    #[serde(rename = "T")]
    pub total_time: f64,
    #[serde(rename = "M")]
    pub components: usize,
    pub l: f64,
    pub delta: f64,
    pub x: Vec<f64>,
    #[serde(default = "default_clamp")]
    pub clamp: bool,
}

fn default_clamp() -> bool {
    true
}

impl ScheduleFile {
    pub fn new(grid: &ScheduleGrid, schedule: &Schedule) -> Self {
        ScheduleFile {
            total_time: schedule.total_time,
            components: grid.components(),
            l: grid.bound(),
            delta: grid.step(),
            x: schedule.params.x.clone(),
            clamp: schedule.clamp,
        }
    }

    /// Validate against the grid and build the schedule.
    pub fn to_schedule(&self) -> Result<(ScheduleGrid, Schedule)> {
        let grid = ScheduleGrid::new(self.components, self.l, self.delta)?;
        let params = ScheduleParams::new(self.x.clone());
        grid.indices_of(&params)?;
        let schedule = Schedule::new(params, self.total_time)?.with_clamp(self.clamp);
        Ok((grid, schedule))
    }
}
