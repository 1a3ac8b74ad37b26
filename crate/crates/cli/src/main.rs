//! `coherent` command-line front end. Every command prints one JSON document
//! on stdout; diagnostics go to stderr.
//!
//! Exit codes: 0 success, 2 invalid input or I/O failure, 1 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use coherent::image::load_instance_mask;
use coherent::metrics::evaluate_scene;
use coherent::parallel::{threads_from_env, with_threads};
use coherent::penetration::DEFAULT_SIGMA;
use coherent::raster::render;
use coherent::refine::{refine, RefineConfig};
use coherent::scene::{load_scene, save_scene};
use coherent::{
    sdf, Error, InstanceMap, PenetrationConfig, RobustifierConfig, Scene, Transform, TriMesh,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "coherent",
    version,
    about = "Interpenetration and depth-order objectives for mesh scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a watertight OBJ mesh into a clamped distance field file.
    Voxelize {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = sdf::DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long, default_value_t = sdf::DEFAULT_PADDING)]
        padding: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the instance map and depth maps of a scene.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Penetration loss and collisions; ordinal loss and depth order with a mask.
    Losses {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Same report as `losses`, with the mask required.
    Metrics {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Refine body translations by gradient descent.
    Refine(RefineArgs),
}

#[derive(Args)]
struct FieldArgs {
    /// Geman-McClure scale.
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = sdf::DEFAULT_RESOLUTION)]
    resolution: usize,
    #[arg(long, default_value_t = sdf::DEFAULT_PADDING)]
    padding: f64,
}

impl FieldArgs {
    fn config(&self) -> Result<PenetrationConfig> {
        Ok(PenetrationConfig {
            resolution: self.resolution,
            padding: self.padding,
            robustifier: RobustifierConfig::new(self.sigma)?,
        })
    }
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    lambda_p: Option<f64>,
    /// Defaults to the library default with a mask and to 0 without one.
    #[arg(long)]
    lambda_d: Option<f64>,
    #[arg(long)]
    lambda_anchor: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Keep x and y fixed; only depth moves.
    #[arg(long)]
    z_only: bool,
    #[command(flatten)]
    field: FieldArgs,
    /// Write one JSON record per accepted iterate here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

impl RefineArgs {
    fn config(&self) -> Result<RefineConfig> {
        let d = RefineConfig::default();
        let field = self.field.config()?;
        Ok(RefineConfig {
            lambda_p: self.lambda_p.unwrap_or(d.lambda_p),
            lambda_d: self
                .lambda_d
                .unwrap_or(if self.mask.is_some() { d.lambda_d } else { 0.0 }),
            lambda_anchor: self.lambda_anchor.unwrap_or(d.lambda_anchor),
            step_size: self.step.unwrap_or(d.step_size),
            max_iters: self.iters.unwrap_or(d.max_iters),
            convergence_tol: self.tol.unwrap_or(d.convergence_tol),
            voxel_resolution: field.resolution,
            padding: field.padding,
            robustifier: field.robustifier,
            optimize_xy: !self.z_only,
        })
    }
}

fn load_mask(path: Option<&Path>, scene: &Scene) -> Result<Option<InstanceMap>> {
    path.map(|p| load_instance_mask(p, scene).with_context(|| format!("mask {}", p.display())))
        .transpose()
}

fn voxelize(mesh: &Path, resolution: usize, padding: f64, out: &Path) -> Result<Value> {
    let m = TriMesh::load_obj(mesh)?;
    let start = Instant::now();
    let field = sdf::voxelize_phi(&m, &Transform::IDENTITY, resolution, padding)?;
    let wall = start.elapsed();
    field.save(out)?;
    Ok(json!({
        "command": "voxelize",
        "out": out,
        "resolution": field.resolution(),
        "origin": field.origin(),
        "spacing": field.spacing(),
        "max_value": field.max_value(),
        "inside_nodes": field.values().iter().filter(|&&v| v > 0.0).count(),
        "wall_time_ms": wall.as_secs_f64() * 1e3,
    }))
}

fn render_files(scene_path: &Path, out_dir: &Path) -> Result<Value> {
    let scene = load_scene(scene_path)?;
    let out = render(&scene)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.into(),
        source: e,
    })?;
    let mut files = vec![
        out_dir.join("instance.pgm"),
        out_dir.join("depth_scene.pfm"),
    ];
    out.instance.save_pgm(&files[0])?;
    out.scene_depth.save_pfm(&files[1])?;
    for (id, depth) in &out.depths {
        let path = out_dir.join(format!("depth_body_{id}.pfm"));
        depth.save_pfm(&path)?;
        files.push(path);
    }
    let (w, h) = out.instance.dims();
    Ok(json!({
        "command": "render",
        "width": w,
        "height": h,
        "foreground_pixels": out.instance.foreground_pixels(),
        "pixel_counts": out.instance.counts(),
        "files": files,
    }))
}

fn losses(scene_path: &Path, mask: Option<&Path>, field: &FieldArgs) -> Result<Value> {
    let scene = load_scene(scene_path)?;
    let mask = load_mask(mask, &scene)?;
    let eval = evaluate_scene(&scene, mask.as_ref(), &field.config()?)?;
    Ok(serde_json::to_value(eval.metrics)?)
}

/// Mesh paths in a scene file are relative to it; rewrite them so they
/// still resolve from the directory the refined scene is written to.
fn rebase_mesh_paths(scene: &Scene, from: &Path, to: &Path) -> Result<Scene> {
    let dir = |p: &Path| -> Result<PathBuf> {
        let parent = p
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        Ok(parent.canonicalize().map_err(|e| Error::Io {
            path: parent.into(),
            source: e,
        })?)
    };
    let (src, dst) = (dir(from)?, dir(to)?);
    if src == dst {
        return Ok(scene.clone());
    }
    let bodies = scene
        .bodies()
        .iter()
        .map(|b| {
            let resolved = src.join(&b.mesh_path);
            let path = match resolved.strip_prefix(&dst) {
                Ok(rel) => rel.to_path_buf(),
                Err(_) => resolved,
            };
            b.clone().with_mesh_path(path)
        })
        .collect();
    Ok(Scene::new(scene.camera, bodies)?)
}

fn refine_scene(args: &RefineArgs) -> Result<Value> {
    let scene = load_scene(&args.scene)?;
    let mask = load_mask(args.mask.as_deref(), &scene)?;
    let config = args.config()?;
    let (refined, trace) = refine(&scene, mask.as_ref(), &config)?;
    save_scene(
        &rebase_mesh_paths(&refined, &args.scene, &args.out)?,
        &args.out,
    )?;
    if let Some(path) = &args.trace {
        std::fs::write(path, trace.to_json_lines()).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    let (first, last) = (&trace.records[0], trace.last());
    Ok(json!({
        "command": "refine",
        "converged": trace.converged,
        "iterations": last.iteration,
        "initial": first,
        "final": last,
        "collision_count": last.collision_count,
        "depth_order_accuracy": last.depth_order_accuracy,
        "config": config,
        "out": args.out,
    }))
}

fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Voxelize {
            mesh,
            resolution,
            padding,
            out,
        } => voxelize(mesh, *resolution, *padding, out),
        Command::Render { scene, out_dir } => render_files(scene, out_dir),
        Command::Losses { scene, mask, field } => losses(scene, mask.as_deref(), field),
        Command::Metrics { scene, mask, field } => losses(scene, Some(mask), field),
        Command::Refine(args) => refine_scene(args),
    }
}

/// Input and I/O problems exit with 2, anything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    let invalid = err
        .chain()
        .any(|e| e.is::<Error>() || e.is::<std::io::Error>() || e.is::<serde_json::Error>());
    if invalid {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| match threads_from_env() {
        Some(n) => with_threads(n, || run(&cli)),
        None => run(&cli),
    });
    match outcome {
        Ok(Ok(report)) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
        Err(_) => ExitCode::from(1),
    }
}
