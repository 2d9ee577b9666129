//! Session privacy budget with sequential and parallel composition.
//!
//! Every charge carries a partition tag. Charges tagged `whole` touch the
//! entire dataset and add up. Charges tagged `FAMILY#PART` touch one part of
//! a family of pairwise-disjoint parts; within a family only the most
//! expensive part counts. Families and whole-dataset charges add up:
//!
//! `spent = Σ whole + Σ_family max_part Σ(charges to part)`

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartitionTag {
    Whole,
    Part { family: String, part: String },
}

impl PartitionTag {
    pub fn part(family: impl Into<String>, part: impl Into<String>) -> Self {
        PartitionTag::Part {
            family: family.into(),
            part: part.into(),
        }
    }
}

impl fmt::Display for PartitionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionTag::Whole => f.write_str("whole"),
            PartitionTag::Part { family, part } if family.is_empty() => f.write_str(part),
            PartitionTag::Part { family, part } => write!(f, "{family}#{part}"),
        }
    }
}

impl FromStr for PartitionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidParameter("empty partition tag".into()));
        }
        if s == "whole" {
            return Ok(PartitionTag::Whole);
        }
        Ok(match s.split_once('#') {
            Some((family, part)) => PartitionTag::part(family, part),
            None => PartitionTag::part("", s),
        })
    }
}

impl Serialize for PartitionTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartitionTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub query: String,
    pub epsilon: f64,
    pub partition: PartitionTag,
}

impl LedgerEntry {
    pub fn new(query: impl Into<String>, epsilon: f64, partition: PartitionTag) -> Self {
        Self {
            query: query.into(),
            epsilon,
            partition,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    total_budget: f64,
    entries: Vec<LedgerEntry>,
}

#[derive(Serialize, Deserialize)]
struct SessionFile {
    version: u32,
    total_budget: f64,
    entries: Vec<LedgerEntry>,
}

fn spent_of<'a>(entries: impl IntoIterator<Item = &'a LedgerEntry>) -> f64 {
    let mut whole = 0.0;
    let mut families: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for e in entries {
        match &e.partition {
            PartitionTag::Whole => whole += e.epsilon,
            PartitionTag::Part { family, part } => {
                *families
                    .entry(family.as_str())
                    .or_default()
                    .entry(part.as_str())
                    .or_default() += e.epsilon;
            }
        }
    }
    whole
        + families
            .values()
            .map(|parts| parts.values().copied().fold(0.0, f64::max))
            .sum::<f64>()
}

impl BudgetLedger {
    pub fn new(total_budget: f64) -> Result<Self> {
        if !(total_budget >= 0.0 && total_budget.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "total budget must be finite and non-negative, got {total_budget}"
            )));
        }
        Ok(Self {
            total_budget,
            entries: Vec::new(),
        })
    }

    pub fn total_budget(&self) -> f64 {
        self.total_budget
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn spent(&self) -> f64 {
        spent_of(&self.entries)
    }

    pub fn remaining(&self) -> f64 {
        (self.total_budget - self.spent()).max(0.0)
    }

    /// Whether `charges` fit together in the remaining budget.
    pub fn can_afford(&self, charges: &[LedgerEntry]) -> bool {
        spent_of(self.entries.iter().chain(charges)) <= self.total_budget
    }

    /// Returns a new ledger with the charge appended; `self` is untouched.
    pub fn charge(
        &self,
        query: &str,
        epsilon: f64,
        partition: PartitionTag,
    ) -> Result<BudgetLedger> {
        let mut next = self.clone();
        next.try_charge(query, epsilon, partition)?;
        Ok(next)
    }

    pub fn try_charge(&mut self, query: &str, epsilon: f64, partition: PartitionTag) -> Result<()> {
        self.try_charge_all(&[LedgerEntry::new(query, epsilon, partition)])
    }

    /// Appends all charges or none of them.
    pub fn try_charge_all(&mut self, charges: &[LedgerEntry]) -> Result<()> {
        for c in charges {
            if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "charged epsilon must be positive and finite, got {}",
                    c.epsilon
                )));
            }
        }
        let would_spend = spent_of(self.entries.iter().chain(charges));
        if would_spend > self.total_budget {
            return Err(Error::BudgetExhausted {
                requested: charges.iter().map(|c| c.epsilon).sum(),
                would_spend,
                total: self.total_budget,
            });
        }
        self.entries.extend_from_slice(charges);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SessionFile {
            version: SESSION_VERSION,
            total_budget: self.total_budget,
            entries: self.entries.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SessionFile = serde_json::from_str(text)?;
        if file.version != SESSION_VERSION {
            return Err(Error::VersionMismatch {
                found: file.version,
                expected: SESSION_VERSION,
            });
        }
        if !(file.total_budget >= 0.0 && file.total_budget.is_finite()) {
            return Err(Error::Integrity(format!(
                "total budget {} is not a finite non-negative number",
                file.total_budget
            )));
        }
        if let Some(bad) = file
            .entries
            .iter()
            .find(|e| !(e.epsilon > 0.0 && e.epsilon.is_finite()))
        {
            return Err(Error::Integrity(format!(
                "entry for {:?} has invalid epsilon {}",
                bad.query, bad.epsilon
            )));
        }
        let ledger = Self {
            total_budget: file.total_budget,
            entries: file.entries,
        };
        let spent = ledger.spent();
        if spent > ledger.total_budget {
            return Err(Error::Integrity(format!(
                "spent budget {spent} exceeds total {}",
                ledger.total_budget
            )));
        }
        Ok(ledger)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn save_session(ledger: &BudgetLedger, path: impl AsRef<Path>) -> Result<()> {
    ledger.save(path)
}

pub fn load_session(path: impl AsRef<Path>) -> Result<BudgetLedger> {
    BudgetLedger::load(path)
}

/// A ledger shared between concurrent callers. Each charge is checked and
/// appended under one lock.
#[derive(Debug)]
pub struct SharedLedger {
    inner: Mutex<BudgetLedger>,
}

impl SharedLedger {
    pub fn new(ledger: BudgetLedger) -> Self {
        Self {
            inner: Mutex::new(ledger),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, BudgetLedger> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn try_charge(&self, query: &str, epsilon: f64, partition: PartitionTag) -> Result<()> {
        self.lock().try_charge(query, epsilon, partition)
    }

    pub fn snapshot(&self) -> BudgetLedger {
        self.lock().clone()
    }

    pub fn into_inner(self) -> BudgetLedger {
        self.inner.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}
