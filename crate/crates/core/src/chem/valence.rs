use std::collections::BTreeMap;

use super::{ChemError, Element, Molecule};

/// Maximum total bond order per element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValenceTable {
    max: BTreeMap<Element, u32>,
}

impl Default for ValenceTable {
    fn default() -> Self {
        use Element::*;
        ValenceTable {
            max: [(C, 4), (N, 3), (O, 2), (F, 1), (S, 6), (Cl, 1)].into_iter().collect(),
        }
    }
}

impl ValenceTable {
    pub fn with_entries(entries: impl IntoIterator<Item = (Element, u32)>) -> Self {
        ValenceTable {
            max: entries.into_iter().collect(),
        }
    }

    pub fn max_valence(&self, e: Element) -> Option<u32> {
        self.max.get(&e).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValenceViolation {
    pub atom: usize,
    pub element: Element,
    pub bond_order_sum: u32,
    pub max: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityReport {
    pub valid: bool,
    pub empty: bool,
    /// Reported separately; disconnected molecules still count as valid.
    pub connected: bool,
    pub violations: Vec<ValenceViolation>,
}

/// Valence check plus non-emptiness.
pub fn check_validity(m: &Molecule, table: &ValenceTable) -> Result<ValidityReport, ChemError> {
    let sums = m.bond_order_sums();
    let mut violations = Vec::new();
    for (i, (&e, &sum)) in m.atoms().iter().zip(&sums).enumerate() {
        let max = table
            .max_valence(e)
            .ok_or(ChemError::MissingValence(e))?;
        if sum > max {
            violations.push(ValenceViolation {
                atom: i,
                element: e,
                bond_order_sum: sum,
                max,
            });
        }
    }
    let empty = m.atom_count() == 0;
    Ok(ValidityReport {
        valid: !empty && violations.is_empty(),
        empty,
        connected: m.is_connected(),
        violations,
    })
}

pub fn is_valid(m: &Molecule, table: &ValenceTable) -> bool {
    check_validity(m, table).map(|r| r.valid).unwrap_or(false)
}
