use std::fmt;
use std::str::FromStr;

use crate::chem::{check_validity, ChemError, Element, Molecule, ValenceTable};
use crate::numeric::Real;

use super::LatentError;

/// Cheap, exactly defined molecular descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    HeavyAtomCount,
    /// Cyclomatic number: bonds - atoms + components.
    RingCount,
    HeteroFraction,
    /// Sum of fixed per-atom contributions.
    LogpProxy,
}

impl Property {
    pub const ALL: [Property; 4] = [
        Property::HeavyAtomCount,
        Property::RingCount,
        Property::HeteroFraction,
        Property::LogpProxy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::HeavyAtomCount => "heavy_atom_count",
            Property::RingCount => "ring_count",
            Property::HeteroFraction => "hetero_fraction",
            Property::LogpProxy => "logp_proxy",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = LatentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| LatentError::UnknownProperty(s.to_string()))
    }
}

fn logp_contribution(e: Element) -> Real {
    match e {
        Element::C => 0.34,
        Element::N => -0.60,
        Element::O => -0.71,
        Element::F => 0.22,
        Element::S => 0.26,
        Element::Cl => 0.61,
    }
}

pub fn compute_property(m: &Molecule, property: Property) -> Result<Real, LatentError> {
    let report = check_validity(m, &ValenceTable::default())?;
    if !report.valid {
        return Err(ChemError::InvalidMolecule("property of an invalid molecule".into()).into());
    }
    let atoms = m.atom_count() as Real;
    Ok(match property {
        Property::HeavyAtomCount => atoms,
        Property::RingCount => (m.bonds().len() + m.components().len()) as Real - atoms,
        Property::HeteroFraction => m.atoms().iter().filter(|&&e| e != Element::C).count() as Real / atoms,
        // per-element counts in a fixed order, so the float sum ignores atom order
        Property::LogpProxy => Element::ALL
            .iter()
            .map(|&e| m.atoms().iter().filter(|&&a| a == e).count() as Real * logp_contribution(e))
            .sum(),
    })
}
