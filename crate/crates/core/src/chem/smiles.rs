//! SMILES-lite: kekulized, hydrogen-suppressed SMILES over organic-subset
//! atoms written in upper case.
//!
//! Supported: atoms `C N O F S Cl`, bonds `-` (optional), `=`, `#`, branches
//! `( )`, ring closures `1`-`9` and `%nn`, and `.` between disconnected
//! fragments. Bracket atoms, charges, isotopes, stereo marks and aromatic
//! lower-case atoms are rejected.

use std::collections::BTreeMap;

use super::{Bond, Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("unknown atom symbol {0:?}")]
    UnknownAtom(String),
    #[error("unmatched '('")]
    UnmatchedOpenParen,
    #[error("unmatched ')'")]
    UnmatchedCloseParen,
    #[error("ring closure {0} is never closed")]
    UnmatchedRingDigit(u32),
    #[error("bond symbol is not followed by an atom")]
    DanglingBond,
    #[error("{0:?} must follow an atom")]
    MissingAtom(char),
    #[error("ring closure {0} has conflicting bond orders")]
    RingBondConflict(u32),
    #[error("ring closure {0} duplicates an existing bond")]
    DuplicateBond(u32),
    #[error("ring closure {0} bonds an atom to itself")]
    SelfBond(u32),
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
}

/// Parse failure with the byte offset of the offending character.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at byte {offset}")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    pub offset: usize,
}

fn err<T>(kind: SmilesErrorKind, offset: usize) -> Result<T, SmilesError> {
    Err(SmilesError { kind, offset })
}

struct OpenRing {
    atom: usize,
    order: Option<u8>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Element>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending: Option<(u8, usize)>,
    branches: Vec<(usize, usize)>,
    rings: BTreeMap<u32, OpenRing>,
}

impl Parser<'_> {
    fn add_bond(&mut self, a: usize, b: usize, order: u8) {
        self.bonds.push(Bond { a, b, order });
    }

    fn atom(&mut self, e: Element) {
        let idx = self.atoms.len();
        self.atoms.push(e);
        if let Some(prev) = self.prev {
            let order = self.pending.take().map_or(1, |(o, _)| o);
            self.add_bond(prev, idx, order);
        }
        self.pending = None;
        self.prev = Some(idx);
    }

    fn ring(&mut self, digit: u32, offset: usize) -> Result<(), SmilesError> {
        let Some(cur) = self.prev else {
            return err(SmilesErrorKind::MissingAtom('0'), offset);
        };
        let order = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&digit) {
            Some(open) => {
                if open.atom == cur {
                    return err(SmilesErrorKind::SelfBond(digit), offset);
                }
                let order = match (open.order, order) {
                    (Some(a), Some(b)) if a != b => {
                        return err(SmilesErrorKind::RingBondConflict(digit), offset)
                    }
                    (a, b) => a.or(b).unwrap_or(1),
                };
                let exists = self.bonds.iter().any(|b| {
                    (b.a == open.atom && b.b == cur) || (b.a == cur && b.b == open.atom)
                });
                if exists {
                    return err(SmilesErrorKind::DuplicateBond(digit), offset);
                }
                self.add_bond(open.atom, cur, order);
            }
            None => {
                self.rings.insert(
                    digit,
                    OpenRing {
                        atom: cur,
                        order,
                        offset,
                    },
                );
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        if self.text.is_empty() {
            return err(SmilesErrorKind::Empty, 0);
        }
        while self.pos < self.text.len() {
            let offset = self.pos;
            let c = self.text[self.pos] as char;
            self.pos += 1;
            match c {
                'C' if self.text.get(self.pos) == Some(&b'l') => {
                    self.pos += 1;
                    self.atom(Element::Cl);
                }
                'C' => self.atom(Element::C),
                'N' => self.atom(Element::N),
                'O' => self.atom(Element::O),
                'F' => self.atom(Element::F),
                'S' => self.atom(Element::S),
                '-' | '=' | '#' => {
                    if self.prev.is_none() {
                        return err(SmilesErrorKind::MissingAtom(c), offset);
                    }
                    if self.pending.is_some() {
                        return err(SmilesErrorKind::DanglingBond, offset);
                    }
                    let order = match c {
                        '-' => 1,
                        '=' => 2,
                        _ => 3,
                    };
                    self.pending = Some((order, offset));
                }
                '(' => {
                    let Some(prev) = self.prev else {
                        return err(SmilesErrorKind::MissingAtom('('), offset);
                    };
                    if let Some((_, at)) = self.pending {
                        return err(SmilesErrorKind::DanglingBond, at);
                    }
                    self.branches.push((prev, offset));
                }
                ')' => {
                    if let Some((_, at)) = self.pending {
                        return err(SmilesErrorKind::DanglingBond, at);
                    }
                    let Some((anchor, _)) = self.branches.pop() else {
                        return err(SmilesErrorKind::UnmatchedCloseParen, offset);
                    };
                    self.prev = Some(anchor);
                }
                '1'..='9' => self.ring(c.to_digit(10).unwrap(), offset)?,
                '%' => {
                    let digits = self.text.get(self.pos..self.pos + 2);
                    match digits {
                        Some(d) if d.iter().all(u8::is_ascii_digit) => {
                            let n = ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32;
                            self.pos += 2;
                            self.ring(n, offset)?;
                        }
                        _ => return err(SmilesErrorKind::UnexpectedChar('%'), offset),
                    }
                }
                '.' => {
                    if let Some((_, at)) = self.pending {
                        return err(SmilesErrorKind::DanglingBond, at);
                    }
                    if self.prev.is_none() {
                        return err(SmilesErrorKind::MissingAtom('.'), offset);
                    }
                    if let Some(&(_, at)) = self.branches.last() {
                        return err(SmilesErrorKind::UnmatchedOpenParen, at);
                    }
                    self.prev = None;
                }
                c if c.is_ascii_alphabetic() || c == '[' => {
                    let end = self.text[self.pos..]
                        .iter()
                        .position(|b| !b.is_ascii_lowercase())
                        .map_or(self.text.len(), |p| self.pos + p);
                    let sym = String::from_utf8_lossy(&self.text[offset..end]).into_owned();
                    return err(SmilesErrorKind::UnknownAtom(sym), offset);
                }
                _ => {
                    let ch = std::str::from_utf8(&self.text[offset..])
                        .ok()
                        .and_then(|s| s.chars().next())
                        .unwrap_or(c);
                    return err(SmilesErrorKind::UnexpectedChar(ch), offset);
                }
            }
        }
        if let Some((_, at)) = self.pending {
            return err(SmilesErrorKind::DanglingBond, at);
        }
        if let Some(&(_, at)) = self.branches.last() {
            return err(SmilesErrorKind::UnmatchedOpenParen, at);
        }
        if let Some((&digit, open)) = self.rings.iter().next() {
            return err(SmilesErrorKind::UnmatchedRingDigit(digit), open.offset);
        }
        if self.prev.is_none() {
            // trailing '.'
            return err(SmilesErrorKind::MissingAtom('.'), self.text.len() - 1);
        }
        Ok(())
    }
}

/// Parses SMILES-lite text into a [`Molecule`].
pub fn parse_smiles_lite(text: &str) -> Result<Molecule, SmilesError> {
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
    };
    p.run()?;
    Ok(Molecule::new(p.atoms, p.bonds).expect("parser emits well-formed molecules"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(text: &str) -> (SmilesErrorKind, usize) {
        let e = parse_smiles_lite(text).unwrap_err();
        (e.kind, e.offset)
    }

    #[test]
    fn single_atom() {
        let m = parse_smiles_lite("C").unwrap();
        assert_eq!(m.atoms(), &[Element::C]);
        assert!(m.bonds().is_empty());
    }

    #[test]
    fn carbon_dioxide() {
        let m = parse_smiles_lite("O=C=O").unwrap();
        assert_eq!(m.atoms(), &[Element::O, Element::C, Element::O]);
        assert_eq!(
            m.bonds(),
            &[Bond { a: 0, b: 1, order: 2 }, Bond { a: 1, b: 2, order: 2 }]
        );
    }

    #[test]
    fn cyclohexane_ring() {
        let m = parse_smiles_lite("C1CCCCC1").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert_eq!(m.bonds().len(), 6);
        assert_eq!(m.bond_between(0, 5), Some(1));
        assert!(m.neighbours().iter().all(|n| n.len() == 2));
    }

    #[test]
    fn branches_and_two_letter_atoms() {
        let m = parse_smiles_lite("CC(=O)N(C)CCl").unwrap();
        assert_eq!(m.atom_count(), 7);
        assert_eq!(m.atoms()[6], Element::Cl);
        assert_eq!(m.bond_between(1, 2), Some(2));
        assert_eq!(m.bond_between(1, 3), Some(1));
        assert_eq!(m.bond_between(3, 4), Some(1));
        assert_eq!(m.bond_between(3, 5), Some(1));
    }

    #[test]
    fn ring_bond_order_on_either_side() {
        for s in ["C=1CCCCC1", "C1CCCCC=1", "C=1CCCCC=1"] {
            let m = parse_smiles_lite(s).unwrap();
            assert_eq!(m.bond_between(0, 5), Some(2), "{s}");
        }
        assert_eq!(kind("C=1CCCCC#1").0, SmilesErrorKind::RingBondConflict(1));
    }

    #[test]
    fn percent_ring_labels_and_fragments() {
        let m = parse_smiles_lite("C%12CC%12.O").unwrap();
        assert_eq!(m.atom_count(), 4);
        assert_eq!(m.bond_between(0, 2), Some(1));
        assert_eq!(m.components().len(), 2);
    }

    #[test]
    fn error_kinds_and_offsets() {
        assert_eq!(kind("CC(C"), (SmilesErrorKind::UnmatchedOpenParen, 2));
        assert_eq!(kind("CC)C"), (SmilesErrorKind::UnmatchedCloseParen, 2));
        assert_eq!(kind("C1CC"), (SmilesErrorKind::UnmatchedRingDigit(1), 1));
        assert_eq!(kind("CXC"), (SmilesErrorKind::UnknownAtom("X".into()), 1));
        assert_eq!(kind("Cc1ccccc1").0, SmilesErrorKind::UnknownAtom("c".into()));
        assert_eq!(kind("CC="), (SmilesErrorKind::DanglingBond, 2));
        assert_eq!(kind("C(=)C"), (SmilesErrorKind::DanglingBond, 2));
        assert_eq!(kind("=C").0, SmilesErrorKind::MissingAtom('='));
        assert_eq!(kind("[NH4+]").0, SmilesErrorKind::UnknownAtom("[".into()));
        assert_eq!(kind("C11").0, SmilesErrorKind::SelfBond(1));
        assert_eq!(kind("C12CC12").0, SmilesErrorKind::DuplicateBond(2));
        assert_eq!(kind("").0, SmilesErrorKind::Empty);
        assert_eq!(kind("C0").0, SmilesErrorKind::UnexpectedChar('0'));
    }
}
