use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use quadrecon::candidates::{knn_graph, propose_candidates, read_candidates, write_candidates};
use quadrecon::dataset::{
    build_sample, label_candidates, read_bundle, read_labels, write_bundle, write_labels, BundleManifest, ShapeKind, ShapeSpec,
};
use quadrecon::learner::{infer_mesh, load_checkpoint, save_checkpoint, train};
use quadrecon::mesh::{read_obj, read_ply_cloud, write_obj};
use quadrecon::metrics::{evaluate, MetricsReport};
use quadrecon::pipeline::{run_pipeline, PipelineConfig};
use quadrecon::postprocess::repair;
use quadrecon::{Cloud, Mesh};

/// Quad mesh reconstruction from point clouds.
///
/// Set RUST_LOG=info for progress output.
#[derive(Parser)]
#[command(name = "quadrecon", version)]
struct Cli {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthesis, training and surface sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labelled synthetic sample bundle.
    Synth(SynthArgs),
    /// Propose candidate quads for a point cloud.
    Candidates {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label candidates against a reference mesh.
    Label {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on sample bundles.
    Train(TrainArgs),
    /// Classify candidates and write the assembled (unrepaired) mesh.
    Infer {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Candidate file; proposed from the cloud when absent.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-candidate class-1 probabilities here.
        #[arg(long)]
        probs: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Remove non-manifold faces and fill small holes.
    Postprocess {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pp: PostArgs,
    },
    /// Report quality metrics for a mesh.
    Evaluate {
        #[arg(long)]
        mesh: PathBuf,
        /// Point cloud for the Chamfer distance; noise points are ignored.
        #[arg(long)]
        target: PathBuf,
        /// Predicted labels, one per line (requires --truth).
        #[arg(long, requires = "truth")]
        predicted: Option<PathBuf>,
        #[arg(long, requires = "predicted")]
        truth: Option<PathBuf>,
        /// Write key = value lines here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every stage from a cloud to a repaired mesh and its report.
    Pipeline {
        /// A PLY cloud, or a bundle directory (its reference adds precision/recall).
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        pp: PostArgs,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: ShapeKind,
    #[arg(long)]
    res_u: usize,
    #[arg(long, default_value_t = 2)]
    res_v: usize,
    #[arg(long, default_value_t = 0.10)]
    noise: f64,
    /// Noise offset half-width, fraction of the mean edge length.
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    /// Vertex jitter, fraction of the spacing.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Sample bundle directories.
    #[arg(long, required = true, num_args = 1..)]
    bundle: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    /// Per-epoch loss log: epoch lr L_C L_F total.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    no_face_encoder: bool,
    #[arg(long)]
    no_face_loss: bool,
    #[arg(long, value_enum, value_delimiter = ',')]
    drop_finfo: Vec<FinfoGroup>,
}

#[derive(Args)]
struct PostArgs {
    /// Tolerance around 90 degrees for hole patterns.
    #[arg(long)]
    angle_tol: Option<f64>,
    #[arg(long)]
    max_passes: Option<usize>,
    #[arg(long)]
    skip_fill: bool,
    #[arg(long)]
    skip_prune: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FinfoGroup {
    Coords,
    Jacobian,
    Sines,
    Normals,
}

fn parse_kind(s: &str) -> Result<ShapeKind, String> {
    s.parse().map_err(|e: quadrecon::Error| e.to_string())
}

impl PostArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let pp = &mut cfg.postprocess;
        if let Some(t) = self.angle_tol {
            pp.angle_tol_deg = t;
        }
        if let Some(m) = self.max_passes {
            pp.max_passes = m;
        }
        pp.skip_fill |= self.skip_fill;
        pp.skip_prune |= self.skip_prune;
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).context("config")?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
        cfg.metrics.seed = s;
    }
    Ok(cfg)
}

fn read_cloud(path: &Path) -> Result<Cloud> {
    read_ply_cloud(path).with_context(|| format!("reading cloud {}", path.display()))
}

fn read_model(path: &Path) -> Result<quadrecon::learner::ModelParams> {
    load_checkpoint(path).with_context(|| format!("loading model checkpoint {}", path.display()))
}

fn print_report(report: &MetricsReport, path: Option<&Path>) -> Result<()> {
    print!("{report}");
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Some(p) = path {
        std::fs::write(p, report.to_key_values()).with_context(|| format!("writing report {}", p.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.cmd {
        Cmd::Synth(a) => {
            let spec = ShapeSpec {
                kind: a.kind,
                res_u: a.res_u,
                res_v: a.res_v,
                jitter: a.jitter,
                noise_ratio: a.noise,
                noise_amplitude: a.amplitude,
                seed: cli.seed.unwrap_or(0),
                ..ShapeSpec::new(a.kind, a.res_u, a.res_v)
            };
            let sample = build_sample::<f64>(&spec, &cfg.candidates).context("synth")?;
            let manifest = BundleManifest::describe(&sample, Some(spec), Some(cfg.candidates));
            write_bundle(&a.out, &sample, &manifest).context("writing bundle")?;
            println!(
                "{}: {} points, {} candidates, {} positive",
                a.out.display(),
                manifest.points,
                manifest.candidates,
                manifest.positives
            );
        }
        Cmd::Candidates { cloud, out } => {
            let cloud = read_cloud(&cloud)?;
            let graph = knn_graph(&cloud, cfg.candidates.k).context("knn")?;
            let cands = propose_candidates(&cloud, &graph, &cfg.candidates);
            write_candidates(&out, &cands)?;
            println!("{} candidates", cands.len());
        }
        Cmd::Label { candidates, reference, out } => {
            let cands = read_candidates::<f64>(&candidates)?;
            let reference: Mesh = read_obj(&reference)?;
            let labels = label_candidates(&cands, &reference);
            write_labels(&out, &labels)?;
            println!("{} of {} positive", labels.iter().filter(|&&l| l == 1).count(), labels.len());
        }
        Cmd::Train(a) => {
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
            cfg.model.no_face_encoder |= a.no_face_encoder;
            if a.no_face_loss {
                cfg.train.loss.face_loss = false;
            }
            for g in &a.drop_finfo {
                let d = &mut cfg.model.drop_finfo;
                match g {
                    FinfoGroup::Coords => d.coords = true,
                    FinfoGroup::Jacobian => d.jacobian = true,
                    FinfoGroup::Sines => d.sines = true,
                    FinfoGroup::Normals => d.normals = true,
                }
            }
            let samples = a
                .bundle
                .iter()
                .map(|b| read_bundle::<f64>(b).map(|(s, _)| s).with_context(|| format!("reading bundle {}", b.display())))
                .collect::<Result<Vec<_>>>()?;
            let report = train(&samples, &cfg.model, &cfg.train).context("train")?;
            save_checkpoint(&a.out, &report.params)?;
            if let Some(p) = &a.log {
                let text: String = report.log.iter().map(|e| format!("{e}\n")).collect();
                std::fs::write(p, text).with_context(|| format!("writing log {}", p.display()))?;
            }
            if let Some(last) = report.log.last() {
                println!("final epoch {last}");
            }
        }
        Cmd::Infer {
            cloud,
            model,
            candidates,
            out,
            probs,
            threshold,
        } => {
            let params = read_model(&model)?;
            let cloud = read_cloud(&cloud)?;
            let cands = match candidates {
                Some(p) => read_candidates(&p)?,
                None => {
                    let graph = knn_graph(&cloud, cfg.candidates.k).context("knn")?;
                    propose_candidates(&cloud, &graph, &cfg.candidates)
                }
            };
            let (mesh, pred) = infer_mesh(&cloud, &cands, &params, threshold.unwrap_or(cfg.threshold)).context("classify")?;
            write_obj(&out, &mesh)?;
            if let Some(p) = probs {
                let text: String = pred.p1().iter().map(|v| format!("{v}\n")).collect();
                std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            println!("{} faces from {} candidates", mesh.faces.len(), cands.len());
        }
        Cmd::Postprocess { mesh, out, pp } => {
            pp.apply(&mut cfg);
            let m: Mesh = read_obj(&mesh)?;
            let fixed = repair(&m, &cfg.postprocess);
            write_obj(&out, &fixed)?;
            println!("{} faces in, {} out", m.faces.len(), fixed.faces.len());
        }
        Cmd::Evaluate {
            mesh,
            target,
            predicted,
            truth,
            report,
        } => {
            let m: Mesh = read_obj(&mesh)?;
            let target = read_cloud(&target)?;
            let labels = match (predicted, truth) {
                (Some(p), Some(t)) => Some((read_labels(&p)?, read_labels(&t)?)),
                _ => None,
            };
            let r = evaluate(
                &m,
                &target.clean_points(),
                labels.as_ref().map(|(p, t)| (p.as_slice(), t.as_slice())),
                &cfg.metrics,
            );
            print_report(&r, report.as_deref())?;
        }
        Cmd::Pipeline {
            cloud,
            model,
            out,
            report,
            threshold,
            pp,
        } => {
            pp.apply(&mut cfg);
            if let Some(t) = threshold {
                cfg.threshold = t;
            }
            let params = read_model(&model)?;
            let (cloud, reference) = if cloud.is_dir() {
                let (s, _) = read_bundle::<f64>(&cloud).with_context(|| format!("reading bundle {}", cloud.display()))?;
                (s.cloud, Some(s.reference))
            } else {
                (read_cloud(&cloud)?, None)
            };
            let run = run_pipeline(&cloud, &params, &cfg, reference.as_ref())?;
            write_obj(&out, &run.mesh)?;
            print_report(&run.report, report.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
