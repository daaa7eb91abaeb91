use std::fmt;
use std::str::FromStr;

/// Heavy-atom types accepted by the SMILES-lite grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    C,
    N,
    O,
    F,
    S,
    Cl,
}

impl Element {
    pub const ALL: [Element; 6] = [Element::C, Element::N, Element::O, Element::F, Element::S, Element::Cl];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::S => "S",
            Element::Cl => "Cl",
        }
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::S => 16,
            Element::Cl => 17,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown element symbol {0:?}")]
pub struct UnknownElement(pub String);

impl FromStr for Element {
    type Err = UnknownElement;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::ALL
            .into_iter()
            .find(|e| e.symbol() == s)
            .ok_or_else(|| UnknownElement(s.to_string()))
    }
}
