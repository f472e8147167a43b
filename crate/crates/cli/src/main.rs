use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use bearing_core::io::{
    export_profile, load_bearings, load_record, load_scene, load_trajectory, save_record,
    save_trajectory, TrajectorySource,
};
use bearing_core::localization::localize;
use bearing_core::pipeline::{
    estimate_record, simulated_record, standard_fixture, EstimateConfig, RuntimeConfig,
};
use bearing_core::sim::{
    STANDARD_ANGULAR_RAD_S, STANDARD_DURATION_S, STANDARD_LINEAR_M_S, STANDARD_PACKET_RATE_HZ,
    STANDARD_TRAJECTORY_HZ,
};
use bearing_core::{BearingOptions, GridConfig, Parallelism, PhaseFactor, Resolution, Trajectory};

const EXIT_REJECTED: u8 = 2;

#[derive(Parser)]
#[command(name = "bearing", version, about = "Relative bearing from paired channel measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the bearing of a recorded exchange.
    Estimate(EstimateArgs),
    /// Generate a dataset record from a scene and a trajectory.
    Simulate(SimulateArgs),
    /// Intersect bearings from known anchors.
    Localize(LocalizeArgs),
    /// Time the runtime configurations on the standard fixture.
    Bench(BenchArgs),
    /// Write a planar arc trajectory (standard capture by default).
    Arc(ArcArgs),
}

#[derive(Args)]
struct ThreadArgs {
    /// Worker threads for profile computation (1 = sequential).
    #[arg(long, env = "BEARING_THREADS")]
    threads: Option<usize>,
}

impl ThreadArgs {
    fn parallelism(&self) -> anyhow::Result<Parallelism> {
        match self.threads {
            Some(0) => bail!("--threads must be at least 1"),
            Some(n) => Ok(Parallelism::threads(n)),
            None => Ok(Parallelism::default()),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    record: PathBuf,
    #[arg(long, default_value = "360x180")]
    resolution: Resolution,
    #[arg(long, default_value_t = 1)]
    subsample: usize,
    #[command(flatten)]
    threads: ThreadArgs,
    /// Variance rejection threshold.
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    /// Minimum peak magnitude, percent of the maximum.
    #[arg(long, default_value_t = 40.0)]
    k: f64,
    /// Minimum peak separation in degrees.
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    #[arg(long, default_value_t = 4)]
    topn: usize,
    #[arg(long, default_value = "groundtruth")]
    traj: TrajectorySource,
    #[arg(long, default_value = "round-trip")]
    phase_factor: PhaseFactor,
    /// Largest counter difference accepted when pairing.
    #[arg(long, default_value_t = 0)]
    max_skew: u64,
    /// Directory for the profile CSV and metrics JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    scene: PathBuf,
    trajectory: PathBuf,
    /// Overrides the scene's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = STANDARD_PACKET_RATE_HZ)]
    rate: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LocalizeArgs {
    bearings: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    /// Write the solution as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated configurations.
    #[arg(long, value_delimiter = ',', default_value = "default,lowres,subsample,lowsub")]
    config: Vec<RuntimeConfig>,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    /// Runs per cell; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ArcArgs {
    #[arg(long, default_value_t = STANDARD_LINEAR_M_S)]
    linear: f64,
    #[arg(long, default_value_t = STANDARD_ANGULAR_RAD_S)]
    angular: f64,
    #[arg(long, default_value_t = STANDARD_DURATION_S)]
    duration: f64,
    #[arg(long, default_value_t = STANDARD_TRAJECTORY_HZ)]
    rate: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Localize(a) => run_localize(a),
        Command::Bench(a) => bench(a),
        Command::Arc(a) => arc(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn estimate(a: EstimateArgs) -> anyhow::Result<ExitCode> {
    let record = load_record(&a.record)?;
    let grid = GridConfig::default().with_resolution(a.resolution)?;
    let cfg = EstimateConfig {
        grid: GridConfig {
            phase_factor: a.phase_factor,
            ..grid
        },
        subsample: a.subsample,
        bearing: BearingOptions {
            top_n: a.topn,
            k_percent: a.k,
            alpha_deg: a.alpha,
            tau: a.tau,
            ..BearingOptions::default()
        },
        max_counter_skew: a.max_skew,
        parallelism: a.threads.parallelism()?,
        ..EstimateConfig::default()
    };
    let run = estimate_record(&record, a.traj, &cfg)?;
    if let Some(dir) = &a.out {
        export_profile(&run.profile, &run.estimate, dir)?;
    }
    let est = &run.estimate;
    let d = est.aoa_max.direction;
    println!(
        "aoa_deg={:.2} variance={:.4} accepted={} runtime_s={:.3} elevation_deg={:.2} packets={} peaks={}",
        d.azimuth_deg(),
        est.variance,
        est.accepted,
        run.total_s,
        d.elevation_deg(),
        est.n_packets_used,
        est.top_n.len(),
    );
    Ok(if est.accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_REJECTED)
    })
}

fn simulate(a: SimulateArgs) -> anyhow::Result<ExitCode> {
    let mut scene = load_scene(&a.scene)?;
    if let Some(seed) = a.seed {
        scene.rng_seed = seed;
    }
    let traj = load_trajectory(&a.trajectory)?;
    let record = simulated_record(&scene, &traj, a.rate)?;
    save_record(&record, &a.out)?;
    println!(
        "forward={} reverse={} seed={}",
        record.log.forward.len(),
        record.log.reverse.len(),
        scene.rng_seed
    );
    Ok(ExitCode::SUCCESS)
}

fn run_localize(a: LocalizeArgs) -> anyhow::Result<ExitCode> {
    let observations = load_bearings(&a.bearings)?;
    let fix = localize(&observations, a.tau)?;
    println!(
        "x={:.4} y={:.4} residual={:.6e} used={} behind_anchor={}",
        fix.position.x, fix.position.y, fix.residual, fix.used, fix.behind_anchor
    );
    if let Some(path) = &a.out {
        let text = serde_json::to_string_pretty(&fix)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> anyhow::Result<ExitCode> {
    if a.threads.contains(&0) {
        bail!("thread counts must be at least 1");
    }
    let record = standard_fixture();
    if a.csv {
        println!("config,threads,resolution,subsample,packets,runtime_s,aoa_deg");
    } else {
        println!(
            "{:<10} {:>7} {:>10} {:>9} {:>7} {:>10} {:>8}",
            "config", "threads", "resolution", "subsample", "packets", "runtime_s", "aoa_deg"
        );
    }
    for &config in &a.config {
        for &threads in &a.threads {
            let cfg = EstimateConfig {
                parallelism: Parallelism::threads(threads),
                ..config.apply(EstimateConfig::default())?
            };
            let mut best = f64::INFINITY;
            let mut last = None;
            for _ in 0..a.repeat.max(1) {
                let run = estimate_record(&record, TrajectorySource::Groundtruth, &cfg)?;
                best = best.min(run.total_s);
                last = Some(run);
            }
            let run = last.expect("at least one repetition");
            let aoa = run.estimate.aoa_max.direction.azimuth_deg();
            let packets = run.estimate.n_packets_used;
            let res = config.resolution();
            let sub = config.subsample();
            if a.csv {
                println!("{config},{threads},{res},{sub},{packets},{best:.4},{aoa:.2}");
            } else {
                println!("{config:<10} {threads:>7} {res:>10} {sub:>9} {packets:>7} {best:>10.4} {aoa:>8.2}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn arc(a: ArcArgs) -> anyhow::Result<ExitCode> {
    let traj = Trajectory::planar_arc(a.linear, a.angular, a.duration, a.rate)?;
    save_trajectory(&traj, &a.out)?;
    println!("samples={} path_length_m={:.4}", traj.len(), traj.path_length());
    Ok(ExitCode::SUCCESS)
}
