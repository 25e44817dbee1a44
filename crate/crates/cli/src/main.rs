use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use fruitdx_core::classify::predict_with;
use fruitdx_core::eval::synth::{generate_dataset, SynthConfig};
use fruitdx_core::features::{read_feature_csv, to_labeled, write_feature_csv, FeatureRecord};
use fruitdx_core::pipeline::{defect_mask, masked_features, segment};
use fruitdx_core::{
    ingest, load_image, rgb_to_lab, run_experiment, split_channels, train_multiclass,
    ChannelPlane, ClusterSelectionPolicy, DescriptorId, DescriptorKind, FeatureColorSpace, Mask, MsvmModel,
    PipelineConfig,
};

#[derive(Parser)]
#[command(name = "fruitdx", version, about = "Fruit disease identification: segmentation, descriptors, one-vs-one SVMs")]
#[command(propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed; every stage derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster an image on (a*, b*) and write the selected defect mask.
    Segment(SegmentArgs),
    /// Compute descriptors for one image or a whole dataset into a feature CSV.
    Extract(ExtractArgs),
    /// Train a one-vs-one model from a feature CSV.
    Train(TrainArgs),
    /// Classify an image or every row of a feature CSV.
    Predict(PredictArgs),
    /// Sweep descriptors, color spaces and training sizes over a dataset.
    Evaluate(EvaluateArgs),
    /// Write a synthetic labeled dataset.
    GenDataset(GenArgs),
}

#[derive(Args)]
struct SegmentArgs {
    image: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    /// darkest, outlier or manual:<cluster>
    #[arg(long)]
    policy: Option<ClusterSelectionPolicy>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Directory for one mask per cluster plus `labels.png`.
    #[arg(long)]
    clusters_out: Option<PathBuf>,
    /// Directory for the L*, a*, b* planes rescaled to 8 bits.
    #[arg(long)]
    dump_planes: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    image: Option<PathBuf>,
    #[arg(long, requires = "image", default_value = "unknown")]
    label: String,
    /// Dataset root laid out as `<class>/<image>`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// gch, ccv, lbp, clbp, or a full descriptor id such as `lbp:n=16;r=2`.
    #[arg(long, default_value = "clbp")]
    feature: String,
    #[arg(long)]
    colorspace: Option<FeatureColorSpace>,
    /// Use this mask instead of segmenting (single image only).
    #[arg(long, requires = "image")]
    mask: Option<PathBuf>,
    /// Describe the whole image.
    #[arg(long)]
    no_segment: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long = "C", alias = "c")]
    c: Option<f64>,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    image: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated descriptor kinds.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    colorspaces: Option<String>,
    /// Comma-separated training images per class (M).
    #[arg(long)]
    train_per_class: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "C", alias = "c")]
    c: Option<f64>,
    /// Report CSV path (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 80)]
    per_class: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 6.0)]
    noise: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = match &cli.global.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Segment(args) => cmd_segment(args, cfg),
        Command::Extract(args) => cmd_extract(args, cfg),
        Command::Train(args) => cmd_train(args, cfg),
        Command::Predict(args) => cmd_predict(args, cfg),
        Command::Evaluate(args) => cmd_evaluate(args, cfg),
        Command::GenDataset(args) => cmd_gen(args, cfg),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_segment(args: SegmentArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(policy) = args.policy {
        cfg.policy = policy;
    }
    if let Some(n) = args.max_iterations {
        cfg.max_iterations = n;
    }
    let img = load_image(&args.image)?;
    let seg = segment(&img, &cfg.kmeans(), cfg.policy)?;

    println!("k\t{}", seg.k());
    println!("iterations\t{}", seg.iterations);
    println!("objective\t{}", seg.objective);
    for (c, (size, centroid)) in seg.cluster_sizes().iter().zip(&seg.centroids).enumerate() {
        println!("cluster {c}\t{size}\ta*={:.3}\tb*={:.3}", centroid[0], centroid[1]);
    }
    let selected = seg.selected.context("no cluster selected")?;
    println!("selected\t{selected}");

    if let Some(path) = &args.mask_out {
        seg.defect_mask.as_ref().context("no defect mask")?.save_png(path)?;
    }
    if let Some(dir) = &args.clusters_out {
        std::fs::create_dir_all(dir)?;
        for c in 0..seg.k() {
            seg.cluster_mask(c).save_png(dir.join(format!("cluster_{c}.png")))?;
        }
        let labels = ChannelPlane::new(seg.width, seg.height, seg.labels.iter().map(|&l| l as f64).collect())?;
        labels.save_png_rescaled(dir.join("labels.png"))?;
    }
    if let Some(dir) = &args.dump_planes {
        std::fs::create_dir_all(dir)?;
        for (plane, name) in split_channels(&rgb_to_lab(&img)?).iter().zip(["L", "a", "b"]) {
            plane.save_png_rescaled(dir.join(format!("lab_{name}.png")))?;
        }
    }
    Ok(())
}

fn descriptor_arg(text: &str, cfg: &PipelineConfig) -> Result<DescriptorId> {
    // A bare kind picks up the configured parameters.
    if let Ok(kind) = text.parse::<DescriptorKind>() {
        return Ok(cfg.descriptor(kind));
    }
    Ok(text.parse()?)
}

fn cmd_extract(args: ExtractArgs, mut cfg: PipelineConfig) -> Result<()> {
    if args.no_segment {
        cfg.segment = false;
    }
    let descriptor = descriptor_arg(&args.feature, &cfg)?;
    let colorspace = args.colorspace.unwrap_or(cfg.colorspace);

    let jobs: Vec<(PathBuf, String)> = match (&args.image, &args.data) {
        (Some(image), _) => vec![(image.clone(), args.label.clone())],
        (None, Some(root)) => {
            let ds = ingest(root)?;
            ds.items.iter().map(|(p, c)| (p.clone(), ds.classes[*c].clone())).collect()
        }
        (None, None) => unreachable!("clap requires --image or --data"),
    };
    let given_mask = args.mask.as_ref().map(Mask::load).transpose()?;

    let records = jobs
        .par_iter()
        .map(|(path, label)| -> Result<FeatureRecord> {
            let img = load_image(path)?;
            let mask = match &given_mask {
                Some(m) => Some(m.clone()),
                None => defect_mask(&img, &cfg)?,
            };
            let fv = masked_features(&img, &descriptor, colorspace, mask.as_ref())
                .with_context(|| format!("describing {}", path.display()))?;
            Ok(FeatureRecord {
                path: path.display().to_string(),
                label: label.clone(),
                descriptor,
                colorspace,
                values: fv.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = create(&args.out)?;
    write_feature_csv(&mut out, &records)?;
    out.flush()?;
    eprintln!("wrote {} rows of {} values to {}", records.len(), descriptor.extract_len(), args.out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(c) = args.c {
        cfg.svm_c = c;
    }
    let records = read_feature_csv(File::open(&args.features).with_context(|| format!("opening {}", args.features.display()))?)?;
    let train = to_labeled(&records)?;
    let model = train_multiclass(&train, cfg.svm_c, cfg.seed)?;
    let mut out = create(&args.model_out)?;
    model.write_to(&mut out)?;
    out.flush()?;
    eprintln!(
        "trained {} learners over {} classes ({} examples, dim {})",
        model.learners.len(),
        model.class_names.len(),
        train.examples.len(),
        model.dim()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs, cfg: PipelineConfig) -> Result<()> {
    let model = MsvmModel::read_from(BufReader::new(File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?))?;
    if let Some(image) = &args.image {
        let img = load_image(image)?;
        let mask = defect_mask(&img, &cfg)?;
        let fv = masked_features(&img, &model.descriptor, model.colorspace, mask.as_ref())?;
        let p = predict_with(&model, &fv.values, cfg.decode)?;
        println!("{}", model.class_names[p.class]);
        for (name, d) in model.class_names.iter().zip(&p.distances) {
            println!("  {name}\t{d}");
        }
        return Ok(());
    }
    let path = args.features.as_ref().expect("clap requires --image or --features");
    let records = read_feature_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
    let (mut correct, mut labeled) = (0usize, 0usize);
    for r in &records {
        if r.descriptor != model.descriptor || r.colorspace != model.colorspace {
            bail!("{}: features were not extracted with the model's descriptor", r.path);
        }
        let p = predict_with(&model, &r.values, cfg.decode)?;
        let name = &model.class_names[p.class];
        println!("{}\t{}\t{}", r.path, r.label, name);
        if model.class_names.contains(&r.label) {
            labeled += 1;
            correct += usize::from(*name == r.label);
        }
    }
    if labeled > 0 {
        eprintln!("accuracy {:.2}% ({correct}/{labeled})", 100.0 * correct as f64 / labeled as f64);
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, mut cfg: PipelineConfig) -> Result<()> {
    let overrides = [
        ("features", args.features),
        ("colorspaces", args.colorspaces),
        ("train_per_class", args.train_per_class),
        ("trials", args.trials.map(|t| t.to_string())),
        ("svm_c", args.c.map(|c| c.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v).with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    let ds = ingest(&args.data)?;
    let report = run_experiment(&ds, &cfg)?;
    match &args.report {
        Some(path) => {
            let mut out = create(path)?;
            report.write_csv(&mut out)?;
            out.flush()?;
        }
        None => report.write_csv(std::io::stdout().lock())?,
    }
    for row in &report.rows {
        eprintln!("{:<34} {:<4} M={:<3} {:6.2}%", row.feature.to_string(), row.colorspace, row.m, row.overall_acc);
    }
    Ok(())
}

fn cmd_gen(args: GenArgs, cfg: PipelineConfig) -> Result<()> {
    let synth = SynthConfig { per_class: args.per_class, size: args.size, noise: args.noise, seed: cfg.seed };
    let manifest = generate_dataset(&args.out, &synth)?;
    eprintln!("wrote {} images to {}", manifest.len(), args.out.display());
    Ok(())
}
