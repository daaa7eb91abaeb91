//! Temperature sampling, two-step decoding and generation metrics.

use std::collections::HashSet;

use crate::chem::{check_validity, canonical_smiles, from_graph, write_smiles, ChemError, Dataset, Molecule, ValenceTable};
use crate::flow::{FlowError, FlowModel, LatentPoint};
use crate::graph::{dequantize, requantize_tensors, GraphError, GraphSpec, MolecularGraph};
use crate::numeric::{Real, SeededRng};

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error("temperature must be a non-negative finite number, got {0}")]
    Temperature(f64),
    #[error("{0}")]
    Empty(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleConfig {
    pub num_samples: usize,
    pub temperature: Real,
    pub seed: u64,
    /// Worker threads for decoding; results do not depend on it.
    pub threads: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            num_samples: 1000,
            temperature: 0.85,
            seed: 0,
            threads: 1,
        }
    }
}

impl SampleConfig {
    /// Temperature 0.85 for `qm9lite`, 0.75 otherwise.
    pub fn for_spec(spec: &GraphSpec) -> Self {
        SampleConfig {
            temperature: if spec.name == "qm9lite" { 0.85 } else { 0.75 },
            ..Self::default()
        }
    }
}

fn check_temperature(t: Real) -> Result<(), GenerationError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(GenerationError::Temperature(t as f64))
    }
}

/// `z ~ N(0, (T*sigma)^2 I)`. `T = 0` gives the origin.
pub fn sample_latent(model: &FlowModel, temperature: Real, rng: &mut SeededRng) -> Result<LatentPoint, GenerationError> {
    check_temperature(temperature)?;
    let scale = temperature * model.sigma();
    let values = (0..model.dims().latent_dim()).map(|_| scale * rng.normal()).collect();
    Ok(LatentPoint::new(values, model.dims())?)
}

/// One decoded sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSample {
    pub index: usize,
    pub graph: MolecularGraph,
    pub molecule: Molecule,
    pub valid: bool,
    /// Canonical string of a valid molecule.
    pub canonical: Option<String>,
}

const DECODE_CHUNK: usize = 64;

/// Decodes latent points in fixed chunks, spread over `threads` workers.
pub fn decode_points(model: &FlowModel, points: &[LatentPoint], threads: usize) -> Result<Vec<MolecularGraph>, GenerationError> {
    let chunks: Vec<&[LatentPoint]> = points.chunks(DECODE_CHUNK).collect();
    let workers = threads.clamp(1, chunks.len().max(1));
    if workers == 1 {
        let mut out = Vec::with_capacity(points.len());
        for c in chunks {
            out.extend(model.decode_batch(c)?);
        }
        return Ok(out);
    }
    let mut results: Vec<Option<Result<Vec<MolecularGraph>, FlowError>>> = (0..chunks.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let chunks = &chunks;
                s.spawn(move || {
                    (w..chunks.len())
                        .step_by(workers)
                        .map(|k| (k, model.decode_batch(chunks[k])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, r) in h.join().expect("decode worker panicked") {
                results[k] = Some(r);
            }
        }
    });
    let mut out = Vec::with_capacity(points.len());
    for r in results {
        out.extend(r.expect("every chunk decoded")?);
    }
    Ok(out)
}

fn describe(graph: MolecularGraph, spec: &GraphSpec, table: &ValenceTable, index: usize) -> Result<GeneratedSample, GenerationError> {
    let molecule = from_graph(&graph, spec);
    let valid = check_validity(&molecule, table)?.valid;
    let canonical = valid.then(|| canonical_smiles(&molecule));
    Ok(GeneratedSample {
        index,
        graph,
        molecule,
        valid,
        canonical,
    })
}

/// Samples `num_samples` latents (sample `i` uses stream `i` of the seed),
/// inverts the flow and discretizes. Invalid molecules are kept and flagged.
pub fn generate(model: &FlowModel, config: &SampleConfig) -> Result<Vec<GeneratedSample>, GenerationError> {
    check_temperature(config.temperature)?;
    let base = SeededRng::new(config.seed);
    let points = (0..config.num_samples)
        .map(|i| sample_latent(model, config.temperature, &mut base.split(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let graphs = decode_points(model, &points, config.threads)?;
    let table = ValenceTable::default();
    graphs
        .into_iter()
        .enumerate()
        .map(|(i, g)| describe(g, model.spec(), &table, i))
        .collect()
}

/// SMILES-lite listing of generated samples. Valid samples are written in
/// canonical form; invalid ones become `# invalid` comment lines so the file
/// still loads as a dataset.
pub fn samples_to_smiles(samples: &[GeneratedSample]) -> String {
    let mut out = String::new();
    for s in samples {
        match (&s.canonical, s.molecule.atom_count()) {
            (Some(c), _) => out.push_str(c),
            (None, 0) => out.push_str("# invalid: empty"),
            (None, _) => {
                out.push_str("# invalid: ");
                out.push_str(&write_smiles(&s.molecule));
            }
        }
        out.push('\n');
    }
    out
}

/// Canonical keys and graphs of the training molecules.
#[derive(Clone, Debug, Default)]
pub struct TrainingReference {
    pub canonical: HashSet<String>,
    pub graphs: Vec<MolecularGraph>,
}

impl TrainingReference {
    pub fn from_dataset(data: &Dataset) -> Self {
        TrainingReference {
            canonical: data.canonical_set(),
            graphs: data.graphs(),
        }
    }

    pub fn new(molecules: &[Molecule], graphs: Vec<MolecularGraph>) -> Self {
        TrainingReference {
            canonical: molecules.iter().map(canonical_smiles).collect(),
            graphs,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub total: usize,
    pub valid: usize,
    pub novel: usize,
    pub unique: usize,
    pub reconstructed: usize,
    pub reference_size: usize,
    pub validity: f64,
    pub novelty: f64,
    pub uniqueness: f64,
    pub reconstruction: f64,
    pub seed: u64,
}

fn percent(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

/// Number of reference graphs for which `requantize(f^-1(f(dequantize(g))))`
/// equals `g`. Graph `i` draws its noise from stream `i` of `seed`.
pub fn reconstruction_count(model: &FlowModel, graphs: &[MolecularGraph], c: Real, seed: u64) -> Result<usize, GenerationError> {
    let base = SeededRng::new(seed);
    let dims = model.dims();
    let mut hits = 0;
    for (k, chunk) in graphs.chunks(DECODE_CHUNK).enumerate() {
        let dq = chunk
            .iter()
            .enumerate()
            .map(|(i, g)| dequantize(g, c, &mut base.split((k * DECODE_CHUNK + i) as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let zs: Vec<LatentPoint> = model.forward_batch(&dq)?.into_iter().map(|(z, _)| z).collect();
        let back = model.inverse_batch(&zs, crate::flow::ReverseOrder::AdjacencyFirst)?;
        for (g, (a, x)) in chunk.iter().zip(&back) {
            if requantize_tensors(dims, a, x).is_ok_and(|r| r == *g) {
                hits += 1;
            }
        }
    }
    Ok(hits)
}

/// Validity, novelty and uniqueness of `generated`, and reconstruction of
/// the reference graphs through `model`.
///
/// Novelty and uniqueness are fractions of the valid molecules.
pub fn compute_metrics(
    generated: &[Molecule],
    reference: &TrainingReference,
    model: &FlowModel,
    c: Real,
    seed: u64,
) -> Result<MetricsReport, GenerationError> {
    if generated.is_empty() {
        return Err(GenerationError::Empty("no generated molecules"));
    }
    let table = ValenceTable::default();
    let mut valid = 0;
    let mut novel = 0;
    let mut seen = HashSet::new();
    for m in generated {
        if !check_validity(m, &table)?.valid {
            continue;
        }
        valid += 1;
        let key = canonical_smiles(m);
        if !reference.canonical.contains(&key) {
            novel += 1;
        }
        seen.insert(key);
    }
    let reconstructed = reconstruction_count(model, &reference.graphs, c, seed)?;
    Ok(MetricsReport {
        total: generated.len(),
        valid,
        novel,
        unique: seen.len(),
        reconstructed,
        reference_size: reference.graphs.len(),
        validity: percent(valid, generated.len()),
        novelty: percent(novel, valid),
        uniqueness: percent(seen.len(), valid),
        reconstruction: percent(reconstructed, reference.graphs.len()),
        seed,
    })
}

/// Generation plus metrics for one seed.
pub fn evaluate(
    model: &FlowModel,
    reference: &TrainingReference,
    config: &SampleConfig,
    c: Real,
) -> Result<(Vec<GeneratedSample>, MetricsReport), GenerationError> {
    let samples = generate(model, config)?;
    let molecules: Vec<Molecule> = samples.iter().map(|s| s.molecule.clone()).collect();
    let report = compute_metrics(&molecules, reference, model, c, config.seed)?;
    Ok((samples, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub temp: Real,
    pub validity: f64,
    pub novelty: f64,
    pub uniqueness: f64,
    pub reconstruction: f64,
    pub seed_count: usize,
    /// Per-seed reports behind the means.
    pub runs: Vec<MetricsReport>,
}

pub const SWEEP_RUNS: usize = 5;
pub const METRICS_CSV_HEADER: &str = "temp,validity,novelty,uniqueness,reconstruction,seed_count";

/// Mean metrics over `SWEEP_RUNS` seeds (`config.seed + k`) per temperature,
/// rows in ascending temperature order.
pub fn temperature_sweep(
    model: &FlowModel,
    temps: &[Real],
    config: &SampleConfig,
    reference: &TrainingReference,
    c: Real,
) -> Result<Vec<SweepRow>, GenerationError> {
    if temps.is_empty() {
        return Err(GenerationError::Empty("no temperatures"));
    }
    let mut temps = temps.to_vec();
    for &t in &temps {
        if !(t > 0.0 && t.is_finite()) {
            return Err(GenerationError::Temperature(t as f64));
        }
    }
    temps.sort_by(|a, b| a.total_cmp(b));
    temps.dedup();
    temps
        .into_iter()
        .map(|temp| {
            let runs = (0..SWEEP_RUNS as u64)
                .map(|k| {
                    let cfg = SampleConfig {
                        temperature: temp,
                        seed: config.seed.wrapping_add(k),
                        ..config.clone()
                    };
                    evaluate(model, reference, &cfg, c).map(|(_, r)| r)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mean = |f: fn(&MetricsReport) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
            Ok(SweepRow {
                temp,
                validity: mean(|r| r.validity),
                novelty: mean(|r| r.novelty),
                uniqueness: mean(|r| r.uniqueness),
                reconstruction: mean(|r| r.reconstruction),
                seed_count: runs.len(),
                runs,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{}\n",
            r.temp, r.validity, r.novelty, r.uniqueness, r.reconstruction, r.seed_count
        ));
    }
    out
}

/// One-row metrics CSV for a single evaluation.
pub fn report_csv(temp: Real, r: &MetricsReport) -> String {
    format!(
        "{METRICS_CSV_HEADER}\n{},{:.4},{:.4},{:.4},{:.4},1\n",
        temp, r.validity, r.novelty, r.uniqueness, r.reconstruction
    )
}

/// Plain-text table with the `%V %N %U %R` columns.
pub fn report_table(r: &MetricsReport) -> String {
    format!(
        "{:>8} {:>8} {:>8} {:>8}\n{:>8.2} {:>8.2} {:>8.2} {:>8.2}\n",
        "%V", "%N", "%U", "%R", r.validity, r.novelty, r.uniqueness, r.reconstruction
    )
}
