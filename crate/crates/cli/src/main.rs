use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semiparam::bayes::{enumerate_stumps, posterior, vote};
use semiparam::bench::{run_bench, BenchConfig};
use semiparam::clustering::{fit, ClusterConfig, ClusterModel};
use semiparam::codebook::{train_lbg, voronoi_grid, Bounds, Codebook, LbgConfig};
use semiparam::data::{gen_blobs, load_csv, save_csv, uniform_points, Dataset, RngSeed};
use semiparam::deep::{gradcheck, train_mlp, write_curve_csv, MlpConfig, MlpModel};
use semiparam::grn::{fit_grn, GrnModel, Partition};
use semiparam::kernel::{KernelCounter, KernelSpec};
use semiparam::svm::{train_semi, train_smo, SemiSvmModel, SmoConfig, SvmModel};

#[derive(Parser)]
#[command(
    name = "semiparam",
    version,
    about = "Semiparametric kernel models from the command line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled Gaussian-blob dataset as CSV.
    Gen(GenArgs),
    /// Class-balanced k-means; writes the cluster model as JSON.
    Cluster(ClusterArgs),
    /// Train an LBG codebook; writes it as JSON.
    Vq(VqArgs),
    /// Train a codebook on random 2D points and rasterize its Voronoi regions.
    VqDemo(VqDemoArgs),
    /// Support vector machines, full or cluster-compressed
    #[command(subcommand)]
    Svm(SvmCommand),
    /// Gaussian radial networks over centroids
    #[command(subcommand)]
    Grn(GrnCommand),
    /// Bayes-optimal stump ensemble on a small random problem.
    BayesDemo(BayesArgs),
    /// Small tanh/softmax networks
    #[command(subcommand)]
    Mlp(MlpCommand),
    /// Run the full-versus-semiparametric comparison grid.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VqArgs {
    #[arg(long)]
    input: PathBuf,
    /// Codebook size.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VqDemoArgs {
    /// Number of random training points.
    #[arg(long, default_value_t = 400)]
    m: usize,
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KernelArgs {
    /// Gaussian width; defaults to the median pairwise distance.
    #[arg(long)]
    sigma: Option<f64>,
    /// Box constraint; omit for a hard margin.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum SvmCommand {
    /// Full SVM by SMO.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// SVM trained on the cluster-compressed Gram matrix.
    TrainSemi {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a CSV with a full or semiparametric model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GrnCommand {
    /// Full model, or semiparametric with `--k` (clusters) or `--n` (codebook).
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, conflicts_with = "n")]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BayesArgs {
    /// Training points.
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    thresholds: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MlpCommand {
    /// Train on a CSV, or on XOR when no input is given.
    Train {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Hidden layer widths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "4")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long, default_value_t = 2000)]
        epochs: usize,
        /// 0 means full batch.
        #[arg(long, default_value_t = 0)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Training curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Compare backprop against central differences on a 2-2-2 network.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// JSON config; the built-in default grid when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output stem: writes `<out>.csv`, `<out>.json` and `<out>.timings.csv`.
    #[arg(long)]
    out: PathBuf,
}

fn kernel_for(data: &Dataset, sigma: Option<f64>) -> semiparam::Result<KernelSpec> {
    match sigma {
        Some(s) => KernelSpec::new(s),
        None => KernelSpec::median_heuristic(data),
    }
}

fn smo_config(args: &KernelArgs) -> SmoConfig {
    SmoConfig::default()
        .with_c(args.c.unwrap_or(f64::INFINITY))
        .with_tol(args.tol)
        .with_seed(args.seed)
}

fn write_text(path: &Path, text: &str) -> semiparam::Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_predictions(
    out: Option<&Path>,
    data: &Dataset,
    predict: impl Fn(&[f64]) -> semiparam::Result<i64>,
) -> semiparam::Result<()> {
    let mut text = String::from("prediction\n");
    let mut correct = 0usize;
    for s in data.samples() {
        let p = predict(&s.features)?;
        if p == s.label {
            correct += 1;
        }
        text.push_str(&format!("{p}\n"));
    }
    if let Some(path) = out {
        write_text(path, &text)?;
    }
    println!("accuracy {}", correct as f64 / data.len() as f64);
    Ok(())
}

fn cluster_dataset(data: &Dataset, k: usize, r: f64, seed: u64) -> semiparam::Result<ClusterModel> {
    let cfg = ClusterConfig::new(k, r).with_seed(seed);
    fit(&data.rows(), &data.signed_labels(), &cfg)
}

fn run(cli: Cli) -> semiparam::Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let data = gen_blobs(a.n, a.d, a.classes, a.separation, RngSeed(a.seed))?;
            save_csv(&data, &a.out)
        }
        Command::Cluster(a) => {
            let data = load_csv(&a.input)?;
            let model = cluster_dataset(&data, a.k, a.r, a.seed)?;
            println!("objective {}", model.final_objective);
            write_text(&a.out, &model.to_json()?)
        }
        Command::Vq(a) => {
            let data = load_csv(&a.input)?;
            let cb = train_lbg(
                &data.rows(),
                &LbgConfig::new(a.n).with_eps(a.eps).with_seed(a.seed),
            )?;
            if let Some(d) = cb.distortion_trace().last() {
                println!("distortion {d}");
            }
            write_text(&a.out, &cb.to_json()?)
        }
        Command::VqDemo(a) => {
            let rows = uniform_points(a.m, 2, RngSeed(a.seed));
            let cb = train_lbg(&rows, &LbgConfig::new(a.n).with_seed(a.seed))?;
            let bounds = Bounds {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            };
            let grid = voronoi_grid(&cb, bounds, (a.resolution, a.resolution))?;
            let mut f = io::BufWriter::new(fs::File::create(&a.out)?);
            grid.write_csv(&mut f)?;
            f.flush()?;
            Ok(())
        }
        Command::Svm(SvmCommand::Train { input, kernel, out }) => {
            let data = load_csv(&input)?;
            let spec = kernel_for(&data, kernel.sigma)?;
            let counter = KernelCounter::new();
            let model = train_smo(&data, spec, &smo_config(&kernel), &counter)?;
            println!(
                "support {} kernel_evals {}",
                model.support.len(),
                counter.get()
            );
            write_text(&out, &model.to_json()?)
        }
        Command::Svm(SvmCommand::TrainSemi {
            input,
            k,
            r,
            kernel,
            out,
        }) => {
            let data = load_csv(&input)?;
            let spec = kernel_for(&data, kernel.sigma)?;
            let clusters = cluster_dataset(&data, k, r, kernel.seed)?;
            let counter = KernelCounter::new();
            let model = train_semi(&data, &clusters, spec, &smo_config(&kernel), &counter)?;
            println!(
                "centroids {} gram_entries {}",
                model.centroids.len(),
                model.gram_entries
            );
            write_text(&out, &model.to_json()?)
        }
        Command::Svm(SvmCommand::Predict { model, input, out }) => {
            let text = fs::read_to_string(&model)?;
            let data = load_csv(&input)?;
            let counter = KernelCounter::new();
            let raw: serde_json::Value = serde_json::from_str(&text)?;
            if raw.get("betas").is_some() {
                let m = SemiSvmModel::from_json(&text)?;
                write_predictions(out.as_deref(), &data, |x| Ok(m.decision(x, &counter)?.sign))
            } else {
                let m = SvmModel::from_json(&text)?;
                write_predictions(out.as_deref(), &data, |x| Ok(m.decision(x, &counter)?.sign))
            }
        }
        Command::Grn(GrnCommand::Train {
            input,
            sigma,
            k,
            r,
            n,
            seed,
            out,
        }) => {
            let data = load_csv(&input)?;
            let spec = kernel_for(&data, sigma)?;
            let model = match (k, n) {
                (Some(k), _) => {
                    let clusters = cluster_dataset(&data, k, r, seed)?;
                    fit_grn(&data, spec, Some(Partition::Clusters(&clusters)))?
                }
                (None, Some(n)) => {
                    let cb: Codebook = train_lbg(&data.rows(), &LbgConfig::new(n).with_seed(seed))?;
                    fit_grn(&data, spec, Some(Partition::Codebook(&cb)))?
                }
                (None, None) => fit_grn(&data, spec, None)?,
            };
            println!("expansion {}", model.expansion_size());
            write_text(&out, &model.to_json()?)
        }
        Command::Grn(GrnCommand::Predict { model, input, out }) => {
            let m = GrnModel::from_json(&fs::read_to_string(&model)?)?;
            let data = load_csv(&input)?;
            let counter = KernelCounter::new();
            write_predictions(out.as_deref(), &data, |x| m.predict(x, &counter))
        }
        Command::BayesDemo(a) => {
            let data = gen_blobs(a.n, 1, 2, 2.0, RngSeed(a.seed))?;
            let space = enumerate_stumps(&data, a.thresholds)?;
            let table = posterior(&space, &data, a.noise)?;
            let mut text = String::from("feature,threshold,polarity,posterior\n");
            for (h, w) in space.hypotheses().iter().zip(table.normalized()) {
                text.push_str(&format!(
                    "{},{:?},{},{:?}\n",
                    h.feature, h.threshold, h.polarity, w
                ));
            }
            let classes = data.class_ids().to_vec();
            let correct = data
                .samples()
                .iter()
                .map(|s| vote(&space, &table, &s.features, &classes).map(|p| p == s.label))
                .collect::<semiparam::Result<Vec<bool>>>()?;
            println!(
                "hypotheses {} training_accuracy {}",
                space.len(),
                correct.iter().filter(|c| **c).count() as f64 / data.len() as f64
            );
            match a.out {
                Some(p) => write_text(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Mlp(MlpCommand::Train {
            input,
            hidden,
            lr,
            epochs,
            batch,
            seed,
            out,
            curve,
        }) => {
            let data = match input {
                Some(p) => load_csv(&p)?,
                None => semiparam::data::xor_dataset(),
            };
            let cfg = MlpConfig::new(hidden, lr, epochs)
                .with_batch_size(batch)
                .with_seed(seed);
            let (model, stats) = train_mlp(&data, &cfg)?;
            if let Some(last) = stats.last() {
                println!("loss {} accuracy {}", last.loss, last.accuracy);
            }
            if let Some(p) = curve {
                let mut f = io::BufWriter::new(fs::File::create(p)?);
                write_curve_csv(&stats, &mut f)?;
                f.flush()?;
            }
            write_text(&out, &model.to_json()?)
        }
        Command::Mlp(MlpCommand::Gradcheck { seed, h }) => {
            let data = gen_blobs(8, 2, 2, 1.0, RngSeed(seed))?;
            let model = MlpModel::new(
                &[2, 2, 2],
                data.class_ids().to_vec(),
                RngSeed(seed).derive(1),
            )?;
            let report = gradcheck(&model, &data, h)?;
            println!("max_relative_error {:e}", report.max_relative_error);
            Ok(())
        }
        Command::Bench(a) => {
            let mut cfg = match a.input {
                Some(p) => BenchConfig::from_json(&fs::read_to_string(p)?)?,
                None => BenchConfig::default(),
            };
            if let Some(s) = a.seed {
                cfg.seed = RngSeed(s);
            }
            let report = run_bench(&cfg)?;
            report.write_files(&a.out)?;
            for row in &report.rows {
                println!(
                    "{:>3} {:<22} test_acc {:<8} evals/pred {}{}",
                    row.index,
                    row.kind.as_str(),
                    row.test_accuracy
                        .map(|v| format!("{v:.4}"))
                        .unwrap_or_default(),
                    row.kernel_evals_per_prediction
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                    row.error
                        .as_deref()
                        .map(|e| format!(" error {e}"))
                        .unwrap_or_default(),
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_convergence() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
