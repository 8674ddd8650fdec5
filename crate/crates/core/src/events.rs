//! Marked event sequences observed over a finite window `[0, T)`.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

/// Spacing applied to tied timestamps at ingestion.
pub const TIE_EPSILON: f64 = 1e-9;

/// A single event: timestamp and the dimension it occurred in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub dim: usize,
}

impl Event {
    pub fn new(time: f64, dim: usize) -> Self {
        Self { time, dim }
    }
}

/// Ordered events `(t_n, i_n)` on `[0, horizon)` across `dims` dimensions.
///
/// Times are strictly increasing and every dimension index is `< dims`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    events: Vec<Event>,
    horizon: f64,
    dims: usize,
}

impl EventSequence {
    /// Builds a sequence, rejecting anything that breaks the invariants.
    pub fn new(events: Vec<Event>, horizon: f64, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(HawkesError::InvalidSequence("number of dimensions must be positive".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(HawkesError::InvalidSequence(format!("horizon must be positive and finite, got {horizon}")));
        }
        let mut prev = f64::NEG_INFINITY;
        for (n, ev) in events.iter().enumerate() {
            if !ev.time.is_finite() || ev.time < 0.0 {
                return Err(HawkesError::InvalidSequence(format!("event {n}: time {} is not a nonnegative real", ev.time)));
            }
            if ev.time >= horizon {
                return Err(HawkesError::InvalidSequence(format!(
                    "event {n}: time {} is outside [0, {horizon})",
                    ev.time
                )));
            }
            if ev.dim >= dims {
                return Err(HawkesError::InvalidSequence(format!("event {n}: dim {} is outside [0, {dims})", ev.dim)));
            }
            if ev.time <= prev {
                return Err(HawkesError::InvalidSequence(format!(
                    "event {n}: times must be strictly increasing ({} after {prev})",
                    ev.time
                )));
            }
            prev = ev.time;
        }
        Ok(Self { events, horizon, dims })
    }

    /// Like [`EventSequence::new`] but tolerates ties: an event whose time is
    /// not after its predecessor is moved to `prev + TIE_EPSILON`, keeping
    /// input order. Times that go backwards by more than a tie are still an
    /// error.
    pub fn with_tie_breaking(mut events: Vec<Event>, horizon: f64, dims: usize) -> Result<Self> {
        let mut prev = f64::NEG_INFINITY;
        for (n, ev) in events.iter_mut().enumerate() {
            if ev.time < prev && prev - ev.time > TIE_EPSILON * (n as f64 + 1.0) {
                return Err(HawkesError::InvalidSequence(format!(
                    "event {n}: time {} precedes previous event at {prev}",
                    ev.time
                )));
            }
            if ev.time <= prev {
                ev.time = prev + TIE_EPSILON;
            }
            prev = ev.time;
        }
        Self::new(events, horizon, dims)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events per dimension.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dims];
        for ev in &self.events {
            counts[ev.dim] += 1;
        }
        counts
    }

    /// Events strictly before `t`.
    pub fn history_before(&self, t: f64) -> &[Event] {
        let k = self.events.partition_point(|e| e.time < t);
        &self.events[..k]
    }

    /// Same events over a longer (or shorter) window. The new horizon must
    /// still exceed the last event time.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.events.clone(), horizon, self.dims)
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}
