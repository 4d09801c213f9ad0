use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use teleassist_core::affordance::{door_handle_template, save_template, TemplateDocument};
use teleassist_core::basis::BasisConfig;
use teleassist_core::dataset::{load_demoset, load_trajectories, save_demoset};
use teleassist_core::eval::{eval_rms_with, write_envelope_csv, EvalOptions};
use teleassist_core::pose::Pose;
use teleassist_core::promp::{fit_promp, ProMP, DEFAULT_RIDGE};
use teleassist_core::recognition::{detect_motion_onset, recognize, ObservationBuffer, RecognitionConfig};
use teleassist_core::synthetic::{generate_synthetic, pool_punches, TaskSpec};
use teleassist_service::config::ServiceConfig;
use teleassist_service::record::replay_file;
use teleassist_service::server::{serve, ServeOptions};

#[derive(Parser)]
#[command(
    name = "teleassist",
    version,
    about = "Movement-primitive assistance for teleoperation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Door,
    Punch,
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateKind {
    DoorHandle,
    None,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a primitive to a demo set.
    Fit {
        demoset: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        basis: usize,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_RIDGE)]
        ridge: f64,
    },
    /// Recognize which primitive an observed motion belongs to.
    Recognize {
        #[arg(required = true)]
        promps: Vec<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        window: f64,
        /// Onset speed threshold, m/s.
        #[arg(long, default_value_t = teleassist_core::recognition::DEFAULT_ONSET_THRESHOLD)]
        threshold: f64,
    },
    /// RMS error of conditioned primitives against held-out tests.
    EvalRms {
        #[arg(required = true)]
        promps: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        tests: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        window: f64,
        /// Also write the machine-readable report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate seeded synthetic demo sets.
    GenSynthetic {
        task: Task,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Door: number of demos. Punch: demos per family.
        #[arg(long)]
        demos: Option<usize>,
        #[arg(short, long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Write an affordance template document.
    Template {
        kind: TemplateKind,
        /// Object class for a `none` document.
        #[arg(long)]
        class: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Export mean and ±2σ envelope columns as CSV.
    Envelope {
        promp: PathBuf,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the command/telemetry service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        record: Option<PathBuf>,
        /// Object present at startup: `class=door pose=x,y,z[,qw,qx,qy,qz]`; repeatable.
        #[arg(long = "inject-object", num_args = 2, value_names = ["class=NAME", "pose=X,Y,Z[,QW,QX,QY,QZ]"])]
        inject: Vec<String>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Replay a recorded event log and compare the outputs.
    Replay { log: PathBuf },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::Fit {
            demoset,
            output,
            basis,
            bandwidth,
            ridge,
        } => fit(&demoset, &output, basis, bandwidth, ridge),
        Cmd::Recognize {
            promps,
            input,
            window,
            threshold,
        } => recognize_cmd(&promps, &input, window, threshold),
        Cmd::EvalRms {
            promps,
            tests,
            window,
            json,
        } => eval_cmd(&promps, &tests, window, json.as_deref()),
        Cmd::GenSynthetic {
            task,
            seed,
            demos,
            output_dir,
        } => gen_cmd(task, seed, demos, &output_dir),
        Cmd::Template { kind, class, output } => template_cmd(kind, class, &output),
        Cmd::Envelope { promp, samples, output } => {
            let promp = ProMP::load(&promp)?;
            match output {
                Some(p) => write_envelope_csv(&promp, samples, File::create(&p)?)?,
                None => write_envelope_csv(&promp, samples, std::io::stdout().lock())?,
            }
            Ok(())
        }
        Cmd::Serve {
            config,
            record,
            inject,
            port,
        } => serve_cmd(&config, record, &inject, port),
        Cmd::Replay { log } => {
            let report = replay_file(&log)?;
            match &report.mismatch {
                None => {
                    println!(
                        "identical: {} commands, {} replies and events",
                        report.commands, report.outputs_compared
                    );
                    Ok(())
                }
                Some(m) => {
                    println!("diverged at output {}", m.index);
                    println!("recorded: {}", serde_json::to_string(&m.expected)?);
                    println!("replayed: {}", serde_json::to_string(&m.actual)?);
                    bail!("replay differs from the recording")
                }
            }
        }
    }
}

fn fit(demoset: &Path, output: &Path, m: usize, bandwidth: Option<f64>, ridge: f64) -> Result<()> {
    let set = load_demoset(demoset).with_context(|| format!("loading {}", demoset.display()))?;
    let n = set.channels().dim();
    let basis = match bandwidth {
        Some(h) => BasisConfig::with_bandwidth(m, n, h)?,
        None => BasisConfig::uniform(m, n)?,
    };
    let promp = fit_promp(&set.demos, &basis, ridge, &set.task_label, &set.frame)?;
    promp.save(output)?;
    eprintln!(
        "{}: {} demos, {} weights, mean duration {:.3} s -> {}",
        set.task_label,
        set.demos.len(),
        promp.mu_w.len(),
        promp.mean_duration,
        output.display()
    );
    Ok(())
}

fn load_promps(paths: &[PathBuf]) -> Result<Vec<ProMP>> {
    paths
        .iter()
        .map(|p| ProMP::load(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn recognize_cmd(promps: &[PathBuf], input: &Path, window: f64, threshold: f64) -> Result<()> {
    let promps = load_promps(promps)?;
    let traj = load_trajectories(input)?
        .into_iter()
        .next()
        .context("input holds no trajectory")?;
    let onset = detect_motion_onset(&traj, threshold, &[])?.context("no motion onset in the input")?;
    let points = traj.samples.iter().filter(|s| s.t >= onset).cloned().collect();
    let buffer = ObservationBuffer::started_at(onset, points)?;
    let result = recognize(&buffer, &promps, &RecognitionConfig::with_window(window))?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn eval_cmd(promps: &[PathBuf], tests: &[PathBuf], window: f64, json: Option<&Path>) -> Result<()> {
    let promps = load_promps(promps)?;
    let mut trajs = Vec::new();
    for t in tests {
        trajs.extend(load_trajectories(t).with_context(|| format!("loading {}", t.display()))?);
    }
    let options = EvalOptions {
        recognition: RecognitionConfig::with_window(window),
        ..EvalOptions::default()
    };
    let report = eval_rms_with(&promps, &trajs, &options)?;
    print!("{}", report.to_text());
    if let Some(path) = json {
        std::fs::write(path, report.to_json())?;
    }
    Ok(())
}

fn gen_cmd(task: Task, seed: u64, demos: Option<usize>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let spec = match task {
        Task::Door => TaskSpec::door(demos.unwrap_or(20)),
        Task::Punch => TaskSpec::punch(demos.unwrap_or(9)),
    };
    let mut sets = generate_synthetic(&spec, seed)?;
    if matches!(task, Task::Punch) {
        sets.push(pool_punches(&sets)?);
    }
    for set in sets {
        let path = dir.join(format!("{}.demos.json", set.task_label));
        save_demoset(&set, &path)?;
        eprintln!("{} demos -> {}", set.demos.len(), path.display());
    }
    Ok(())
}

fn template_cmd(kind: TemplateKind, class: Option<String>, output: &Path) -> Result<()> {
    match kind {
        TemplateKind::DoorHandle => save_template(&door_handle_template(), output)?,
        TemplateKind::None => {
            let class = class.context("--class is required for a none template")?;
            let doc = TemplateDocument::none(&class);
            std::fs::write(output, serde_json::to_string_pretty(&doc)?)?;
        }
    }
    Ok(())
}

/// Parses the `class=NAME` and `pose=x,y,z[,qw,qx,qy,qz]` pair, in either order.
fn parse_inject(pair: &[String]) -> Result<(String, Pose)> {
    let mut class = None;
    let mut pose = None;
    for part in pair {
        match part.split_once('=') {
            Some(("class", v)) if !v.is_empty() => class = Some(v.to_string()),
            Some(("pose", v)) => pose = Some(parse_pose(v)?),
            _ => bail!("expected class=NAME or pose=X,Y,Z[,QW,QX,QY,QZ], got {part:?}"),
        }
    }
    match (class, pose) {
        (Some(c), Some(p)) => Ok((c, p)),
        _ => bail!("--inject-object needs both class= and pose="),
    }
}

fn parse_pose(text: &str) -> Result<Pose> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad number in pose {text:?}"))?;
    Ok(match v.as_slice() {
        [x, y, z] => Pose::from_translation(*x, *y, *z),
        [x, y, z, w, i, j, k] => Pose::from_position_quaternion([*x, *y, *z], [*w, *i, *j, *k])?,
        _ => bail!("expected 3 or 7 numbers in pose {text:?}"),
    })
}

fn serve_cmd(config: &Path, record: Option<PathBuf>, inject: &[String], port: Option<u16>) -> Result<()> {
    let mut cfg = ServiceConfig::load(config)?;
    if let Some(p) = port {
        cfg.server.port = p;
    }
    let inject = inject.chunks(2).map(parse_inject).collect::<Result<Vec<_>>>()?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let handle = serve(cfg, ServeOptions { record, inject }).await?;
        let mut out = std::io::stdout().lock();
        writeln!(out, "listening on http://{}", handle.addr)?;
        out.flush()?;
        drop(out);
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {
                handle.shutdown().await;
            }
        }
        Ok(())
    })
}
