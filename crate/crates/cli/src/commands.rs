use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use irlsc::bayes_oracle::{GaussianClasses, GridRegion};
use irlsc::classifier::RlscState;
use irlsc::datasets::{fig1_pool, load_csv, load_idx, ArrivalEncoder, LabeledDataset, StreamProtocol};
use irlsc::harness::{
    aggregate, rotate_imbalanced, run_trials, timing_probe, ExperimentResult, Hyper, Method, TrialResult, CURVE_HEADER,
};
use irlsc::model_selection::{CandidateGrid, SelectionState, DEFAULT_ALPHAS, TRACE_HEADER};

use crate::data::{check_file, check_gamma, Source};
use crate::{runtime, usage, BoundaryArgs, CliError, ExperimentArgs, FitArgs, HyperArgs, PredictArgs, SelectArgs, TimingArgs};

type Result<T> = std::result::Result<T, CliError>;

const FIG1_POOL_SEED: u64 = 0xF1_6000;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    write_text(path, &text)
}

impl HyperArgs {
    fn resolve(&self) -> Result<Hyper> {
        let default_grid = CandidateGrid::default();
        let lambdas = match (self.lambda, self.lambdas.is_empty()) {
            (Some(l), _) => vec![l],
            (None, false) => self.lambdas.clone(),
            (None, true) => default_grid.lambdas().to_vec(),
        };
        let alphas = match (self.alpha, self.alphas.is_empty()) {
            (Some(a), _) => vec![a],
            (None, false) => self.alphas.clone(),
            (None, true) => DEFAULT_ALPHAS.to_vec(),
        };
        let hyper = Hyper { lambdas, alphas };
        hyper.validate().map_err(|e| usage(e.to_string()))?;
        Ok(hyper)
    }

    fn grid(&self) -> Result<CandidateGrid> {
        let h = self.resolve()?;
        let alphas = if h.alphas.contains(&0.0) {
            h.alphas
        } else {
            // a fixed alpha is compared against the alpha = 0 reference
            vec![0.0, h.alphas[0]]
        };
        CandidateGrid::new(h.lambdas, alphas).map_err(|e| usage(e.to_string()))
    }
}

#[derive(Debug, Serialize)]
struct RunConfig<'a> {
    source: String,
    imbalanced_class: &'a str,
    n_bal: usize,
    n_val: usize,
    checkpoints: &'a [usize],
    n_test: usize,
    trials: usize,
    seed: u64,
    methods: &'a [Method],
    hyper: &'a Hyper,
    separate_test_set: bool,
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for n in names {
        let m: Method = n.parse().map_err(usage)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(usage("--methods must name at least one of N, RB, RC"));
    }
    Ok(out)
}

fn load_test(a: &ExperimentArgs, train: &LabeledDataset) -> Result<Option<LabeledDataset>> {
    let test = match (&a.idx_test_images, &a.idx_test_labels, &a.csv_test) {
        (Some(i), Some(l), None) => load_idx(i, l).map_err(runtime)?,
        (None, None, Some(c)) => load_csv(c, &a.data.label_column).map_err(runtime)?,
        _ => return Ok(None),
    };
    test.align_to(train.label_names()).map(Some).map_err(runtime)
}

pub fn experiment(a: ExperimentArgs) -> Result<()> {
    // Everything that can be checked without reading data is checked first.
    let source = a.data.source()?;
    let methods = parse_methods(&a.methods)?;
    let hyper = a.hyper.resolve()?;
    if a.parallel_trials == 0 {
        return Err(usage("--parallel-trials must be at least 1"));
    }
    let imbalanced = match (&a.imbalanced_class, &source) {
        (Some(c), _) => c.clone(),
        (None, Source::Fig1 { .. }) => "-1".to_string(),
        (None, _) => return Err(usage("--imbalanced-class is required (a class name or `rotate`)")),
    };
    let mut cfg = StreamProtocol {
        imbalanced_class: 0,
        n_bal: a.n_bal,
        checkpoints: a.checkpoints.clone(),
        n_test: a.n_test,
        n_trials: a.trials,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let test_given = a.idx_test_images.is_some() || a.csv_test.is_some();
    if test_given && source.is_synthetic() {
        return Err(usage("separate test files cannot be combined with --synthetic"));
    }
    if a.csv_test.is_some() && a.idx_test_images.is_some() {
        return Err(usage("give either --idx-test-* or --csv-test"));
    }
    source.check_files()?;
    for p in [&a.idx_test_images, &a.idx_test_labels, &a.csv_test].into_iter().flatten() {
        check_file(p)?;
    }

    let train = match &source {
        Source::Fig1 { gamma } => {
            let per_class = (cfg.n_bal + cfg.n_val()).max(cfg.max_checkpoint()) + cfg.n_test;
            fig1_pool(*gamma, per_class, FIG1_POOL_SEED ^ a.seed).map_err(runtime)?.1
        }
        _ => source.load(0, a.seed)?,
    };
    let test = load_test(&a, &train)?;
    let rotate = imbalanced == "rotate";
    if !rotate {
        cfg.imbalanced_class = train.class_index(&imbalanced).ok_or_else(|| {
            usage(format!(
                "unknown class '{imbalanced}'; known classes: {}",
                train.label_names().join(", ")
            ))
        })?;
    }

    fs::create_dir_all(a.out.join("manifests")).map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    let run_config = RunConfig {
        source: match &source {
            Source::Fig1 { gamma } => format!("synthetic fig1, gamma {gamma}"),
            Source::Idx { images, .. } => format!("idx {}", images.display()),
            Source::Csv { path, .. } => format!("csv {}", path.display()),
        },
        imbalanced_class: &imbalanced,
        n_bal: cfg.n_bal,
        n_val: cfg.n_val(),
        checkpoints: &cfg.checkpoints,
        n_test: cfg.n_test,
        trials: cfg.n_trials,
        seed: cfg.seed,
        methods: &methods,
        hyper: &hyper,
        separate_test_set: test.is_some(),
    };
    write_json(&a.out.join("config.json"), &run_config)?;

    let (result, trials) = if rotate {
        let rot = rotate_imbalanced(&train, test.as_ref(), &cfg, &methods, &hyper, a.parallel_trials).map_err(runtime)?;
        let mut w = csv::Writer::from_writer(create(&a.out.join("curves.csv"))?);
        w.write_record(CURVE_HEADER).map_err(runtime)?;
        rot.averaged.write_curve_rows("all", &mut w).map_err(runtime)?;
        for (name, r) in &rot.per_class {
            r.write_curve_rows(name, &mut w).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
        (rot.averaged, rot.trials)
    } else {
        let trials = run_trials(&train, test.as_ref(), &cfg, &methods, &hyper, a.parallel_trials).map_err(runtime)?;
        (aggregate(&trials), trials)
    };
    write_outputs(&a.out, &result, &trials)?;
    print!("{}", result.table());
    Ok(())
}

fn write_outputs(out: &Path, result: &ExperimentResult, trials: &[TrialResult]) -> Result<()> {
    result.write_results_csv(create(&out.join("results.csv"))?).map_err(runtime)?;
    write_text(&out.join("summary.json"), &(result.summary_json() + "\n"))?;
    write_text(&out.join("table.txt"), &result.table())?;
    for t in trials {
        write_json(&out.join("manifests").join(format!("trial_{:03}.json", t.trial)), t)?;
    }
    // wall-clock, so kept apart from the reproducible outputs
    #[derive(Serialize)]
    struct Timing {
        seconds_per_update: Option<f64>,
    }
    write_json(
        &out.join("timing.json"),
        &Timing {
            seconds_per_update: result.seconds_per_update,
        },
    )
}

pub fn bayes_boundary(a: BoundaryArgs) -> Result<()> {
    if a.gamma.is_empty() {
        return Err(usage("--gamma needs at least one value"));
    }
    for &g in &a.gamma {
        check_gamma(g)?;
    }
    if a.resolution == 0 {
        return Err(usage("--resolution must be positive"));
    }
    if !(a.lo < a.hi) {
        return Err(usage("--lo must be smaller than --hi"));
    }
    if a.gamma.len() > 1 && a.out_dir.is_none() {
        return Err(usage("several --gamma values need --out-dir"));
    }
    let region = GridRegion::square(a.lo, a.hi, a.resolution);
    for &g in &a.gamma {
        let classes = GaussianClasses::fig1(g).map_err(|e| usage(e.to_string()))?;
        let target: Option<PathBuf> = match (&a.out, &a.out_dir) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => {
                fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
                Some(dir.join(format!("boundary_gamma_{g}.csv")))
            }
            (None, None) => None,
        };
        match target {
            Some(p) => classes.write_boundary_csv(region, create(&p)?).map_err(runtime)?,
            None => classes.write_boundary_csv(region, io::stdout().lock()).map_err(runtime)?,
        }
    }
    Ok(())
}

pub fn timing(a: TimingArgs) -> Result<()> {
    if a.d.is_empty() || a.d.contains(&0) {
        return Err(usage("--d values must be positive"));
    }
    if a.k.is_empty() {
        return Err(usage("--k needs at least one value"));
    }
    if a.repeats == 0 {
        return Err(usage("--repeats must be positive"));
    }
    let mut rows = Vec::new();
    for &d in &a.d {
        rows.extend(timing_probe(d, &a.k, a.repeats, a.seed).map_err(runtime)?);
    }
    println!("{:>6} {:>8} {:>14}", "d", "k", "median_us");
    for r in &rows {
        println!("{:>6} {:>8} {:>14.3}", r.d, r.k, r.median_seconds * 1e6);
    }
    if let Some(path) = &a.out {
        let mut w = csv::Writer::from_writer(create(path)?);
        for r in &rows {
            w.serialize(r).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
    }
    Ok(())
}

fn labels_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".labels.json");
    PathBuf::from(s)
}

fn save_model(state: &RlscState, names: &[String], model: &Path) -> Result<()> {
    state
        .save(model)
        .map_err(|e| runtime(format!("{}: {e}", model.display())))?;
    write_json(&labels_path(model), &names)
}

/// Class names in model order.
fn model_names(enc: &ArrivalEncoder, data: &LabeledDataset) -> Vec<String> {
    (0..enc.len())
        .map(|i| data.label_names()[enc.decode(i).expect("index below len")].clone())
        .collect()
}

pub fn fit(a: FitArgs) -> Result<()> {
    let source = a.data.source()?;
    RlscState::new(1, a.lambda, a.alpha).map_err(|e| usage(e.to_string()))?;
    if source.is_synthetic() && a.n_synthetic == 0 {
        return Err(usage("--n-synthetic must be positive"));
    }
    source.check_files()?;
    let data = source.load(a.n_synthetic, a.seed)?;
    let mut state = RlscState::new(data.dim(), a.lambda, a.alpha).map_err(runtime)?;
    let mut enc = ArrivalEncoder::new();
    for i in 0..data.len() {
        let y = enc.encode(data.labels()[i]);
        state.partial_fit(data.row(i), y).map_err(runtime)?;
    }
    save_model(&state, &model_names(&enc, &data), &a.model)?;
    println!(
        "trained on {} examples, {} classes, d = {}; wrote {}",
        data.len(),
        state.num_classes(),
        state.dim(),
        a.model.display()
    );
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let source = a.data.source()?;
    check_file(&a.model)?;
    let names_path = labels_path(&a.model);
    check_file(&names_path)?;
    source.check_files()?;
    let state = RlscState::load(&a.model).map_err(|e| runtime(format!("{}: {e}", a.model.display())))?;
    let names: Vec<String> = serde_json::from_str(
        &fs::read_to_string(&names_path).map_err(|e| runtime(format!("{}: {e}", names_path.display())))?,
    )
    .map_err(|e| runtime(format!("{}: {e}", names_path.display())))?;
    if names.len() != state.num_classes() {
        return Err(runtime(format!(
            "{} lists {} classes but the model has {}",
            names_path.display(),
            names.len(),
            state.num_classes()
        )));
    }
    let data = source.load(a.n_synthetic, a.seed)?;
    if data.dim() != state.dim() {
        return Err(runtime(format!(
            "data has dimension {} but the model expects {}",
            data.dim(),
            state.dim()
        )));
    }
    let w = state.weights().map_err(runtime)?;
    let mut predicted = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        predicted.push(names[w.predict(data.row(i)).map_err(runtime)?].clone());
    }
    let truth: Vec<&String> = data.labels().iter().map(|&l| &data.label_names()[l]).collect();
    if let Some(path) = &a.out {
        let mut wr = csv::Writer::from_writer(create(path)?);
        wr.write_record(["index", "predicted", "label"]).map_err(runtime)?;
        for (i, (p, t)) in predicted.iter().zip(&truth).enumerate() {
            wr.write_record([i.to_string(), p.clone(), (*t).clone()]).map_err(runtime)?;
        }
        wr.flush().map_err(runtime)?;
    }
    let hits = predicted.iter().zip(&truth).filter(|(p, t)| p == *t).count();
    println!("accuracy {:.4} on {} examples", hits as f64 / data.len().max(1) as f64, data.len());
    Ok(())
}

pub fn online_select(a: SelectArgs) -> Result<()> {
    let source = a.data.source()?;
    let grid = a.hyper.grid()?;
    if a.holdout_interval == 0 {
        return Err(usage("--holdout-interval must be at least 1"));
    }
    if a.trace_every == 0 {
        return Err(usage("--trace-every must be positive"));
    }
    source.check_files()?;
    let data = source.load(a.n_synthetic, a.seed)?;
    let mut sel = SelectionState::new(data.dim(), grid, a.holdout_interval, a.threshold).map_err(runtime)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(a.seed));

    let mut trace = match &a.trace {
        Some(p) => {
            let mut w = csv::Writer::from_writer(create(p)?);
            w.write_record(TRACE_HEADER).map_err(runtime)?;
            Some(w)
        }
        None => None,
    };
    let mut enc = ArrivalEncoder::new();
    for &i in &order {
        let y = data.labels()[i];
        // Held-out examples must not claim a class index ahead of training.
        let label = if sel.next_is_holdout() {
            enc.get(y).unwrap_or(usize::MAX)
        } else {
            enc.encode(y)
        };
        sel.observe(data.row(i), label).map_err(runtime)?;
        if let Some(w) = trace.as_mut() {
            if sel.arrivals() % a.trace_every == 0 {
                sel.write_trace(w).map_err(runtime)?;
            }
        }
    }
    if let Some(mut w) = trace {
        if sel.arrivals() % a.trace_every != 0 {
            sel.write_trace(&mut w).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
    }
    let chosen = sel.select().map_err(runtime)?;
    let held = sel.validation().len();
    let eligible_acc = chosen.accuracy.map_or("none".to_string(), |v| format!("{v:.4}"));
    println!(
        "lambda {} alpha {} well-represented accuracy {} (alpha 0: {}) over {} held-out examples{}",
        chosen.lambda,
        chosen.alpha,
        eligible_acc,
        chosen.reference_accuracy.map_or("none".to_string(), |v| format!("{v:.4}")),
        held,
        if chosen.fallback { " [fallback: no eligible validation examples]" } else { "" }
    );
    if let Some(model) = &a.model {
        save_model(&chosen.state, &model_names(&enc, &data), model)?;
    }
    Ok(())
}
