use std::path::Path;

use log::warn;

use crate::graph::{GraphSpec, MolecularGraph};

use super::{canonical_smiles, check_validity, parse_smiles_lite, to_graph, ChemError, Molecule, ValenceTable};

/// How invalid dataset lines are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LoadMode {
    /// The first bad line aborts loading.
    #[default]
    Strict,
    /// Bad lines are skipped with a warning.
    Lenient,
}

#[derive(Clone, Debug)]
pub struct DatasetEntry {
    /// 1-based line number in the source.
    pub line: usize,
    pub smiles: String,
    pub molecule: Molecule,
    pub graph: MolecularGraph,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub spec: GraphSpec,
    pub entries: Vec<DatasetEntry>,
    /// `(line, message)` for lines skipped in lenient mode.
    pub skipped: Vec<(usize, String)>,
}

impl Dataset {
    pub fn graphs(&self) -> Vec<MolecularGraph> {
        self.entries.iter().map(|e| e.graph.clone()).collect()
    }

    pub fn molecules(&self) -> Vec<Molecule> {
        self.entries.iter().map(|e| e.molecule.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn canonical_set(&self) -> std::collections::HashSet<String> {
        self.entries.iter().map(|e| canonical_smiles(&e.molecule)).collect()
    }
}

fn parse_line(text: &str, spec: &GraphSpec, table: &ValenceTable) -> Result<(Molecule, MolecularGraph), String> {
    let m = parse_smiles_lite(text).map_err(|e| e.to_string())?;
    let report = check_validity(&m, table).map_err(|e| e.to_string())?;
    if !report.valid {
        let atoms: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("atom {} ({})", v.atom, v.element))
            .collect();
        return Err(format!("valence exceeded at {}", atoms.join(", ")));
    }
    let g = to_graph(&m, spec).map_err(|e| e.to_string())?;
    Ok((m, g))
}

/// Parses newline-delimited SMILES-lite; `#` starts a comment line and
/// blank lines are ignored.
pub fn parse_dataset(text: &str, spec: &GraphSpec, mode: LoadMode) -> Result<Dataset, ChemError> {
    let table = ValenceTable::default();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let smiles = raw.trim();
        if smiles.is_empty() || smiles.starts_with('#') {
            continue;
        }
        match parse_line(smiles, spec, &table) {
            Ok((molecule, graph)) => entries.push(DatasetEntry {
                line,
                smiles: smiles.to_string(),
                molecule,
                graph,
            }),
            Err(message) => match mode {
                LoadMode::Strict => return Err(ChemError::DatasetLine { line, message }),
                LoadMode::Lenient => {
                    warn!("skipping line {line}: {message}");
                    skipped.push((line, message));
                }
            },
        }
    }
    Ok(Dataset {
        spec: spec.clone(),
        entries,
        skipped,
    })
}

pub fn load_dataset(path: &Path, spec: &GraphSpec, mode: LoadMode) -> Result<Dataset, ChemError> {
    let text = std::fs::read_to_string(path).map_err(|e| ChemError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_dataset(&text, spec, mode)
}
