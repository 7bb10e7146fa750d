//! Pass/fail bookkeeping shared by the property checks.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index of the offending sample (or time step, or path).
    pub index: usize,
    pub what: String,
    /// How far the inequality was missed, in the check's own units.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
    /// Largest `lhs - rhs` seen over all samples; negative means slack.
    pub worst_margin: f64,
}

impl CheckReport {
    pub fn new() -> Self {
        CheckReport {
            checked: 0,
            violations: Vec::new(),
            worst_margin: f64::NEG_INFINITY,
        }
    }

    /// Record one inequality `lhs <= rhs + tol`.
    pub fn record_le(&mut self, index: usize, what: &str, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let margin = lhs - rhs;
        if margin > self.worst_margin || self.worst_margin.is_nan() {
            self.worst_margin = margin;
        }
        if !(margin <= tol) {
            self.violations.push(Violation {
                index,
                what: what.to_string(),
                excess: margin - tol,
            });
        }
    }

    /// Record one equality `|lhs - rhs| <= tol`.
    pub fn record_eq(&mut self, index: usize, what: &str, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let margin = (lhs - rhs).abs();
        if margin > self.worst_margin || self.worst_margin.is_nan() {
            self.worst_margin = margin;
        }
        if !(margin <= tol) {
            self.violations.push(Violation {
                index,
                what: what.to_string(),
                excess: margin - tol,
            });
        }
    }

    pub fn fail(&mut self, index: usize, what: impl Into<String>) {
        self.checked += 1;
        self.violations.push(Violation {
            index,
            what: what.into(),
            excess: f64::INFINITY,
        });
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.checked += other.checked;
        if other.worst_margin > self.worst_margin {
            self.worst_margin = other.worst_margin;
        }
        self.violations.extend(other.violations);
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "checked={} violations={} worst_margin={:.3e}",
            self.checked,
            self.violations.len(),
            self.worst_margin
        )?;
        if let Some(v) = self.violations.first() {
            write!(f, " first=[{}#{} excess={:.3e}]", v.what, v.index, v.excess)?;
        }
        Ok(())
    }
}
