//! Acceptance criteria for the cross-currency HJM engine and its CLI.
//!
//! Every criterion is a list of [`Measure`]s: the worst observed value of one
//! sub-check next to its limit. A criterion passes when all of them do.

use std::fmt;
use std::time::{Duration, Instant};

pub mod criteria;
pub mod oracles;

pub type Res<T> = std::result::Result<T, String>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Bound {
    AtMost,
    Above,
}

/// Worst value of one sub-check and the limit it must respect.
#[derive(Debug, Clone)]
pub struct Measure {
    pub label: String,
    pub limit: f64,
    bound: Bound,
    worst: Option<f64>,
    at: Option<String>,
    notes: Vec<String>,
}

impl Measure {
    /// Passes when every observed value is at most `limit`.
    pub fn new(label: &str, limit: f64) -> Self {
        Measure { label: label.into(), limit, bound: Bound::AtMost, worst: None, at: None, notes: Vec::new() }
    }

    /// Passes when every observed value is strictly above `limit`.
    pub fn above(label: &str, limit: f64) -> Self {
        Measure { bound: Bound::Above, ..Measure::new(label, limit) }
    }

    pub fn with(mut self, x: f64) -> Self {
        self.see(x);
        self
    }

    pub fn see(&mut self, x: f64) {
        self.record(x, None);
    }

    /// Record a value and remember where the worst one came from.
    pub fn see_at(&mut self, x: f64, at: &str) {
        self.record(x, Some(at));
    }

    pub fn note(&mut self, n: String) {
        self.notes.push(n);
    }

    fn record(&mut self, x: f64, at: Option<&str>) {
        let worse = match (self.worst, self.bound) {
            (None, _) => true,
            // NaN always counts as the worst value seen.
            (Some(w), Bound::AtMost) => x.is_nan() || x > w,
            (Some(w), Bound::Above) => x.is_nan() || x < w,
        };
        if worse && !self.worst.is_some_and(f64::is_nan) {
            self.worst = Some(x);
            self.at = at.map(str::to_string);
        }
    }

    pub fn worst(&self) -> Option<f64> {
        self.worst
    }

    pub fn pass(&self) -> bool {
        match (self.worst, self.bound) {
            (None, _) => false,
            (Some(w), Bound::AtMost) => w <= self.limit,
            (Some(w), Bound::Above) => w > self.limit,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::Above => ">",
        };
        match self.worst {
            Some(w) => write!(f, "{} {w:.3e} ({op} {:e})", self.label, self.limit)?,
            None => write!(f, "{} no samples", self.label)?,
        }
        if let Some(at) = &self.at {
            write!(f, " at {at}")?;
        }
        for n in &self.notes {
            write!(f, ", {n}")?;
        }
        Ok(())
    }
}

/// Result of one criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn evaluate(id: usize, name: &str, f: impl FnOnce() -> Res<Vec<Measure>>) -> Outcome {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(ms) => {
                let pass = !ms.is_empty() && ms.iter().all(Measure::pass);
                let detail = ms.iter().map(|m| if m.pass() { m.to_string() } else { format!("FAILED {m}") }).collect::<Vec<_>>();
                (pass, detail.join("; "))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        Outcome { id, name: name.into(), pass, detail, elapsed: start.elapsed() }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {} ({:.1} s)", self.id, self.name, self.detail, self.elapsed.as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_tracks_the_worst_value_per_direction() {
        let mut m = Measure::new("err", 1e-3);
        m.see(1e-5);
        m.see_at(2e-4, "b");
        m.see(1e-6);
        assert_eq!(m.worst(), Some(2e-4));
        assert!(m.pass());
        let mut a = Measure::above("z", 5.0);
        a.see(9.0);
        a.see(5.0);
        assert!(!a.pass());
        assert!(!Measure::new("empty", 1.0).pass());
    }

    #[test]
    fn nan_fails_and_sticks() {
        let mut m = Measure::new("err", 1.0);
        m.see(f64::NAN);
        m.see(0.5);
        assert!(!m.pass());
    }
}
