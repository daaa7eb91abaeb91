use std::fs;
use std::path::{Path, PathBuf};

use gnvp_core::chem::{canonical_smiles, load_dataset, parse_dataset, parse_smiles_lite, to_graph, Dataset, LoadMode};
use gnvp_core::data::{bundled_dataset, bundled_text};
use gnvp_core::flow::{load_checkpoint_with_state, FlowModel};
use gnvp_core::generation::{
    evaluate, generate, report_csv, report_table, samples_to_smiles, sweep_csv, temperature_sweep, SampleConfig,
    TrainingReference,
};
use gnvp_core::graph::{dequantize, GraphSpec, MolecularGraph};
use gnvp_core::latent::{
    encode, encode_all, fit_regressor_on_graphs, grid_csv, grid_decode, optimization_csv, optimize_along, Encoding,
    GridSpec, Property,
};
use gnvp_core::numeric::SeededRng;
use gnvp_core::training::{
    load_train_state, metrics_csv, nll_value, save_train_state, split_indices, train, TrainConfig, TrainState,
};

use crate::args::{Common, EncodeArgs, EvalArgs, GenerateArgs, GridArgs, OptimizeArgs, SampleArgs, SweepArgs, TrainArgs};
use crate::error::CliError;
use crate::settings::{pick, FileSettings};

const DEFAULT_TEMPS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

fn named_spec(name: &str) -> Result<GraphSpec, CliError> {
    GraphSpec::named(name).ok_or_else(|| CliError::usage(format!("unknown spec {name:?} (expected qm9lite or zinclite)")))
}

/// File path, bundled corpus name, or the spec's own bundled corpus.
fn load_data(dataset: Option<&str>, spec: &GraphSpec) -> Result<Dataset, CliError> {
    match dataset {
        Some(d) if Path::new(d).exists() => Ok(load_dataset(Path::new(d), spec, LoadMode::Strict)?),
        Some(d) => match bundled_text(d) {
            Some(text) => Ok(parse_dataset(text, spec, LoadMode::Strict)?),
            None => Err(CliError::data(format!("dataset {d:?} not found"))),
        },
        None => bundled_dataset(spec)
            .ok_or_else(|| CliError::usage(format!("spec {} has no bundled corpus; pass --dataset", spec.name)))?
            .map_err(Into::into),
    }
}

fn load_model(checkpoint: &Path, spec: Option<&str>) -> Result<FlowModel, CliError> {
    let spec = spec.map(named_spec).transpose()?;
    if !checkpoint.exists() {
        return Err(CliError::data(format!("checkpoint {} not found", checkpoint.display())));
    }
    Ok(load_checkpoint_with_state(checkpoint, spec.as_ref())?.0)
}

fn write_output(out: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Training config and leftover file keys, seeded from flag, env or file.
fn settings(common: &Common, spec: &GraphSpec) -> Result<(TrainConfig, FileSettings), CliError> {
    let mut train = TrainConfig::for_spec(spec);
    let file = FileSettings::load(common.config.as_deref(), &mut train)?;
    if let Some(seed) = common.seed {
        train.seed = seed;
    }
    Ok((train, file))
}

fn threads(common: &Common, file: &FileSettings) -> Result<usize, CliError> {
    // the flag has a default, so a file value only applies when the flag is left at 1
    let t = if common.threads != 1 { common.threads } else { file.get("threads")?.unwrap_or(1) };
    if t == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    Ok(t)
}

fn sample_config(
    model: &FlowModel,
    common: &Common,
    file: &FileSettings,
    seed: u64,
    samples: Option<usize>,
    temp: Option<f64>,
) -> Result<SampleConfig, CliError> {
    let d = SampleConfig::for_spec(model.spec());
    let config = SampleConfig {
        num_samples: pick(samples, file.get("num_samples")?, d.num_samples),
        temperature: pick(temp, file.get("temperature")?, d.temperature),
        seed,
        threads: threads(common, file)?,
    };
    if config.num_samples == 0 {
        return Err(CliError::usage("--samples must be at least 1"));
    }
    if !(config.temperature > 0.0 && config.temperature.is_finite()) {
        return Err(CliError::usage(format!("--temp must be positive, got {}", config.temperature)));
    }
    Ok(config)
}

fn sampling_setup(common: &Common, s: &SampleArgs) -> Result<(FlowModel, TrainConfig, FileSettings, SampleConfig), CliError> {
    let model = load_model(&s.checkpoint, s.spec.as_deref())?;
    let (train, file) = settings(common, model.spec())?;
    let config = sample_config(&model, common, &file, train.seed, s.samples, s.temp)?;
    Ok((model, train, file, config))
}

pub fn run_train(args: &TrainArgs) -> Result<(), CliError> {
    let spec = named_spec(&args.spec)?;
    let (mut config, file) = settings(&args.common, &spec)?;
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(b) = args.batch_size {
        config.batch_size = b;
    }
    config.validate()?;
    let data = load_data(args.common.dataset.as_deref(), &spec)?;
    let graphs = data.graphs();
    let (train_idx, held_idx) = split_indices(graphs.len(), config.train_fraction, config.seed);
    let pick_graphs = |idx: &[usize]| idx.iter().map(|&i| graphs[i].clone()).collect::<Vec<MolecularGraph>>();
    let (train_graphs, held_out) = (pick_graphs(&train_idx), pick_graphs(&held_idx));
    log::info!(
        "{} molecules: {} for training, {} held out",
        graphs.len(),
        train_graphs.len(),
        held_out.len()
    );

    let checkpoint = args.checkpoint.clone().unwrap_or_else(|| args.common.out.join("model.gnvp"));
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    let mut state = match &args.resume {
        Some(path) => {
            let s = load_train_state(path, Some(&spec))?;
            if s.seed != config.seed {
                log::warn!("resuming with the stored seed {} (requested {})", s.seed, config.seed);
            }
            s
        }
        None => TrainState::new(FlowModel::new(spec.clone(), file.flow_config(&spec)?, config.seed), &config),
    };
    let every = config.checkpoint_every;
    let rows = train(&mut state, &train_graphs, &config, |st, m| {
        log::info!("epoch {:>4}  nll {:.4}  sigma {:.4}", m.epoch, m.mean_nll, m.sigma);
        if every > 0 && m.epoch % every == 0 {
            save_train_state(st, &checkpoint)?;
        }
        Ok(())
    })?;
    save_train_state(&state, &checkpoint)?;

    let dims = spec.dims();
    write_output(&args.common.out, "train_metrics.csv", &metrics_csv(&rows, dims.latent_dim(), config.dequant_c))?;
    write_output(&args.common.out, "train_config.txt", &config.to_text())?;
    if !held_out.is_empty() {
        let base = SeededRng::new(config.seed).split(u64::MAX - 1);
        let dq = held_out
            .iter()
            .enumerate()
            .map(|(i, g)| dequantize(g, config.dequant_c, &mut base.split(i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let nll = nll_value(&state.model, &dq)?;
        log::info!("held-out nll {nll:.4}");
    }
    println!("trained {} epochs; checkpoint {}", state.epoch, checkpoint.display());
    Ok(())
}

pub fn run_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let (model, _, _, config) = sampling_setup(&args.common, &args.sample)?;
    let samples = generate(&model, &config)?;
    let path = write_output(&args.common.out, "generated.smi", &samples_to_smiles(&samples))?;
    let valid = samples.iter().filter(|s| s.valid).count();
    println!("{} samples, {} valid; wrote {}", samples.len(), valid, path.display());
    Ok(())
}

pub fn run_eval(args: &EvalArgs) -> Result<(), CliError> {
    let (model, train, _, config) = sampling_setup(&args.common, &args.sample)?;
    let data = load_data(args.common.dataset.as_deref(), model.spec())?;
    let reference = TrainingReference::from_dataset(&data);
    let (samples, report) = evaluate(&model, &reference, &config, train.dequant_c)?;
    write_output(&args.common.out, "generated.smi", &samples_to_smiles(&samples))?;
    write_output(&args.common.out, "metrics.csv", &report_csv(config.temperature, &report))?;
    print!("{}", report_table(&report));
    Ok(())
}

pub fn run_encode(args: &EncodeArgs) -> Result<(), CliError> {
    let model = load_model(&args.checkpoint, args.spec.as_deref())?;
    let (train, _) = settings(&args.common, model.spec())?;
    let data = load_data(args.common.dataset.as_deref(), model.spec())?;
    let latents = encode_all(&model, &data.graphs(), train.dequant_c)?;
    let d = model.dims().latent_dim();
    let mut csv = String::from("index,smiles");
    for k in 0..d {
        csv.push_str(&format!(",z{k}"));
    }
    csv.push('\n');
    for (i, (entry, z)) in data.entries.iter().zip(&latents).enumerate() {
        csv.push_str(&format!("{i},{}", canonical_smiles(&entry.molecule)));
        for v in &z.values {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    let path = write_output(&args.common.out, "latents.csv", &csv)?;
    println!("encoded {} molecules into {d} dimensions; wrote {}", latents.len(), path.display());
    Ok(())
}

/// The molecule given by `--smiles`, else dataset entry `index`.
fn start_graph(
    smiles: Option<&str>,
    index: usize,
    dataset: Option<&str>,
    spec: &GraphSpec,
) -> Result<MolecularGraph, CliError> {
    if let Some(s) = smiles {
        let m = parse_smiles_lite(s).map_err(|e| CliError::data(format!("--smiles {s:?}: {e}")))?;
        return Ok(to_graph(&m, spec)?);
    }
    let data = load_data(dataset, spec)?;
    data.graphs()
        .into_iter()
        .nth(index)
        .ok_or_else(|| CliError::usage(format!("--index {index} is past the end of the dataset ({})", data.len())))
}

pub fn run_grid(args: &GridArgs) -> Result<(), CliError> {
    let model = load_model(&args.checkpoint, args.spec.as_deref())?;
    let (train, file) = settings(&args.common, model.spec())?;
    let index = pick(args.index, file.get("index")?, 0);
    let g = start_graph(args.smiles.as_deref(), index, args.common.dataset.as_deref(), model.spec())?;
    let z0 = encode(&model, &g, train.dequant_c, Encoding::Midpoint)?;
    let extent = pick(args.extent, file.get("grid_extent")?, 2);
    let step = pick(args.step_size, file.get("grid_step")?, 0.5);
    let grid = GridSpec::random(z0, extent, step, train.seed).map_err(|e| CliError::usage(e.to_string()))?;
    let cells = grid_decode(&model, &grid, threads(&args.common, &file)?)?;
    let path = write_output(&args.common.out, "grid.csv", &grid_csv(&cells))?;
    let valid = cells.iter().filter(|c| c.molecule.is_some()).count();
    println!("{} cells, {} valid; wrote {}", cells.len(), valid, path.display());
    Ok(())
}

pub fn run_optimize(args: &OptimizeArgs) -> Result<(), CliError> {
    let model = load_model(&args.checkpoint, args.spec.as_deref())?;
    let (train, file) = settings(&args.common, model.spec())?;
    let property: Property = pick(args.property.clone(), file.get("property")?, "logp_proxy".to_string()).parse()?;
    let steps = pick(args.steps, file.get("steps")?, 10);
    let step_size = pick(args.step_size, file.get("step_size")?, 0.5);
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(CliError::usage(format!("--step-size must be positive, got {step_size}")));
    }
    let data = load_data(args.common.dataset.as_deref(), model.spec())?;
    let regressor = fit_regressor_on_graphs(&model, &data.graphs(), property, train.dequant_c)?;
    log::info!(
        "fitted {} on {} molecules: r2 {:.4}{}",
        regressor.property,
        data.len(),
        regressor.r_squared,
        if regressor.ridge { " (ridge fallback)" } else { "" }
    );
    let index = pick(args.index, file.get("index")?, 0);
    let start = start_graph(args.smiles.as_deref(), index, args.common.dataset.as_deref(), model.spec())?;
    let trace = optimize_along(&model, &regressor, &start, steps, step_size, train.dequant_c)?;
    write_output(
        &args.common.out,
        "regressor.csv",
        &format!(
            "property,r_squared,ridge,bias\n{},{:.6},{},{:.6}\n",
            regressor.property, regressor.r_squared, regressor.ridge, regressor.bias
        ),
    )?;
    let path = write_output(&args.common.out, "optimize.csv", &optimization_csv(&trace))?;
    let valid = trace.iter().filter(|s| s.molecule.is_some()).count();
    println!("{} steps, {} valid; wrote {}", trace.len(), valid, path.display());
    Ok(())
}

pub fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let model = load_model(&args.checkpoint, args.spec.as_deref())?;
    let (train, file) = settings(&args.common, model.spec())?;
    let config = sample_config(&model, &args.common, &file, train.seed, args.samples, None)?;
    let temps = pick(args.temps.clone(), file.get_list("temps")?, DEFAULT_TEMPS.to_vec());
    let data = load_data(args.common.dataset.as_deref(), model.spec())?;
    let reference = TrainingReference::from_dataset(&data);
    let rows = temperature_sweep(&model, &temps, &config, &reference, train.dequant_c)?;
    let csv = sweep_csv(&rows);
    write_output(&args.common.out, "sweep.csv", &csv)?;
    print!("{csv}");
    Ok(())
}
