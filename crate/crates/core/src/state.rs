//! Intensity states and time-stamped trajectories.

use crate::error::{Error, Result};

/// Intensity vector on a truncated topology at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellState {
    pub x: Vec<f64>,
    pub time: f64,
}

impl ShellState {
    pub fn new(x: Vec<f64>, time: f64) -> Self {
        ShellState { x, time }
    }

    pub fn zeros(n: usize) -> Self {
        ShellState { x: vec![0.0; n], time: 0.0 }
    }
}

/// Total energy: the squared l2 norm of the intensities.
pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Euler,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::Euler => "euler",
        }
    }
}

/// Snapshots of one integration run. States are optional (energy-only mode
/// keeps deep trees affordable); energies are always recorded.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub states: Option<Vec<Vec<f64>>>,
    pub dt: f64,
    pub method: Method,
    /// Set when the integration was cut short by a non-finite or
    /// over-threshold state; holds the flagged time t*.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least the initial snapshot")
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.as_ref().map(|s| s.last().expect("non-empty").as_slice())
    }

    pub fn state_at(&self, idx: usize) -> Result<&[f64]> {
        let states = self
            .states
            .as_ref()
            .ok_or_else(|| Error::invalid("trajectory was recorded in energy-only mode"))?;
        Ok(states[idx].as_slice())
    }

    pub fn check_monotone_times(&self) -> bool {
        self.times.windows(2).all(|w| w[1] > w[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_basics() {
        assert_eq!(energy(&[]), 0.0);
        assert_eq!(energy(&[0.0, 0.0]), 0.0);
        assert_eq!(energy(&[3.0, 4.0]), 25.0);
    }
}
