//! Command line of the `twistworld` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use twistworld::batch::{
    eval_files, replay, run_rollout, segment_record, segments_text, write_rollout_dir, ReplayReport, RECORD_FILE,
};
use twistworld::config::SessionConfig;
use twistworld::eval::{run_drift_experiment, DriftSampler};
use twistworld::formats::{parse_action_script, RecordedSession};
use twistworld::se3::Pose;
use twistworld::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "twistworld", version, about = "Camera-grounded toy world model")]
pub struct Cli {
    /// Config file (`key=value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the rng seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory or file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an action script and write frames, trajectory, timings and logs.
    Rollout {
        #[arg(long)]
        script: PathBuf,
    },
    /// Trajectory errors of an estimate against a reference.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value_t = 1)]
        delta: usize,
    },
    /// Drift of linear versus exponential pose integration.
    CompareMapping {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        len: usize,
        /// Fit a similarity before measuring.
        #[arg(long)]
        align: bool,
    },
    /// Cut a recording into windows and pick memory clips for each.
    Segment {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value_t = 64)]
        window: usize,
        #[arg(long, default_value_t = 4)]
        clips: usize,
        #[arg(long, default_value_t = 4)]
        clip_len: usize,
    },
    /// Serve interactive sessions.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Directory served under `/ui`.
        #[arg(long, default_value = "ui")]
        ui: PathBuf,
    },
    /// Replay a record and check its frame digests, or record a script first.
    RecordReplay {
        #[arg(long, conflicts_with = "script", required_unless_present = "script")]
        record: Option<PathBuf>,
        #[arg(long)]
        script: Option<PathBuf>,
    },
}

impl Cli {
    pub fn session_config(&self) -> Result<SessionConfig> {
        let mut cfg = match &self.config {
            Some(p) => SessionConfig::load(p)?,
            None => SessionConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--out is required for this command".into()))
    }
}

fn load_script(path: &Path) -> Result<Vec<twistworld::action::InputState>> {
    Ok(parse_action_script(&std::fs::read_to_string(path)?)?
        .into_iter()
        .map(|l| l.input)
        .collect())
}

fn report_replay(out: &mut dyn Write, r: &ReplayReport) -> Result<()> {
    writeln!(out, "checked {} frame digests, {} mismatched", r.checked, r.mismatches.len())?;
    if r.ok() {
        Ok(())
    } else {
        Err(Error::InvalidState(format!(
            "replay diverged at frames {:?}",
            &r.mismatches[..r.mismatches.len().min(8)]
        )))
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Rollout { script } => {
            let cfg = cli.session_config()?;
            let dir = cli.out_dir()?;
            let run = run_rollout(&cfg, Pose::identity(), &load_script(script)?)?;
            write_rollout_dir(&run, dir)?;
            let t = run.timing();
            writeln!(
                out,
                "{} frames ({} warmup) to {}; median {:.3} ms/frame over {} steady frames",
                run.frames.len(),
                run.warmup,
                dir.display(),
                t.median_ms,
                t.steady_frames
            )?;
        }
        Command::Eval { est, reference, delta } => {
            let report = eval_files(est, reference, *delta)?;
            writeln!(out, "{report}")?;
            if let Some(p) = &cli.out {
                std::fs::write(p, report.errors.to_csv())?;
            }
        }
        Command::CompareMapping { n, len, align } => {
            let sampler = DriftSampler {
                align: *align,
                ..DriftSampler::default()
            };
            let started = std::time::Instant::now();
            let table = run_drift_experiment(*n, *len, &sampler, cli.seed.unwrap_or(0))?;
            writeln!(out, "{table}")?;
            writeln!(out, "{}", table.to_csv())?;
            writeln!(out, "elapsed {:.3} s", started.elapsed().as_secs_f64())?;
            if let Some(p) = &cli.out {
                std::fs::write(p, table.to_csv())?;
            }
        }
        Command::Segment {
            record,
            window,
            clips,
            clip_len,
        } => {
            let rec = RecordedSession::load(record)?;
            let windows = segment_record(&rec, *window, *clips, *clip_len)?;
            let text = segments_text(&windows);
            write!(out, "{text}")?;
            if let Some(p) = &cli.out {
                std::fs::write(p, text)?;
            }
        }
        Command::Serve { bind, ui } => {
            let cfg = cli.session_config()?;
            let addr: std::net::SocketAddr = bind
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad --bind {bind:?}: {e}")))?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on {}", listener.local_addr()?);
                crate::service::serve(listener, cfg, ui.clone()).await
            })?;
        }
        Command::RecordReplay { record, script } => {
            let rec = match (record, script) {
                (Some(p), _) => RecordedSession::load(p)?,
                (None, Some(s)) => {
                    let run = run_rollout(&cli.session_config()?, Pose::identity(), &load_script(s)?)?;
                    let rec = run.record();
                    let dir = cli.out_dir()?;
                    std::fs::create_dir_all(dir)?;
                    rec.save(dir.join(RECORD_FILE))?;
                    writeln!(out, "recorded {} actions to {}", rec.actions.len(), dir.join(RECORD_FILE).display())?;
                    rec
                }
                (None, None) => return Err(Error::InvalidArgument("give --record or --script".into())),
            };
            report_replay(out, &replay(&rec)?)?;
        }
    }
    Ok(())
}
