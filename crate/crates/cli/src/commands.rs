use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lgw_core::analysis::{classical_mds, compare_distance_matrices, confusion_matrix};
use lgw_core::barycenter::{solve_barycenter, BarycenterConfig};
use lgw_core::ingest::{image_to_space, mesh_to_space, points_to_space, read_points_csv};
use lgw_core::lgw::{check_lgw_bounds, embed_all, glgw_matrix, LgwEmbedding};
use lgw_core::measure::{load_mm_space_with, read_labels_csv};
use lgw_core::{
    load_mm_space, rng, save_mm_space, solve_gw, DistanceMatrix, Error, GwConfig, InitSpec,
    MmSpace, Result,
};
use ndarray::Array2;
use rayon::prelude::*;

use crate::{
    BarycenterArgs, BoundsArgs, CheckArgs, Cli, Command, CompareArgs, ConfusionArgs, GlgwCommand,
    GlgwEmbedArgs, GlgwPairwiseArgs, GwArgs, GwCommand, GwPairwiseArgs, IngestCommand, MdsArgs,
    SolverArgs, SpaceMeta,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs.filter(|&j| j > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Ingest(cmd) => ingest(cmd),
        Command::Gw(args) => gw(args),
        Command::Glgw(GlgwCommand::Embed(args)) => glgw_embed(args),
        Command::Glgw(GlgwCommand::Pairwise(args)) => glgw_pairwise(args),
        Command::Barycenter(args) => barycenter(args),
        Command::Mds(args) => mds(args),
        Command::Confusion(args) => confusion(args),
        Command::Compare(args) => compare(args),
        Command::Bounds(args) => bounds(args),
        Command::Check(args) => check(args),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "space".into())
}

fn finish_space(space: MmSpace, meta: SpaceMeta, out: &Path) -> Result<()> {
    let space = match meta.id {
        Some(id) => space.with_id(id),
        None => space,
    }
    .with_label(meta.label);
    log::info!("writing space `{}` with {} points", space.id(), space.len());
    save_mm_space(&space, out)
}

fn ingest(cmd: IngestCommand) -> Result<()> {
    match cmd {
        IngestCommand::Image(a) => {
            let space = image_to_space(&a.input, a.threshold, a.points, rng::substream(a.seed, "fps"))?;
            finish_space(space, a.meta, &a.out)
        }
        IngestCommand::Mesh(a) => {
            let space = mesh_to_space(&a.input, a.coarse, a.points, rng::substream(a.seed, "fps"))?;
            finish_space(space, a.meta, &a.out)
        }
        IngestCommand::Points(a) => {
            let points = read_points_csv(&a.input)?;
            let sample = a.points.unwrap_or(points.nrows());
            let space = points_to_space(stem(&a.input), points, sample, rng::substream(a.seed, "fps"))?;
            finish_space(space, a.meta, &a.out)
        }
    }
}

fn parse_init(token: &str, seed: u64) -> Result<InitSpec> {
    let token = token.trim();
    match token {
        "product" => Ok(InitSpec::Product),
        "wasserstein" => Ok(InitSpec::Wasserstein),
        "identity" => Ok(InitSpec::Identity),
        "random" => Ok(InitSpec::Random(rng::substream(seed, "init-explicit"))),
        _ => match token.strip_prefix("random:").map(str::parse) {
            Some(Ok(s)) => Ok(InitSpec::Random(s)),
            _ => Err(Error::Config(format!("unknown init `{token}`"))),
        },
    }
}

fn gw_config(args: &SolverArgs) -> Result<GwConfig> {
    let inits = args
        .init
        .iter()
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_init(t, args.seed))
        .collect::<Result<Vec<_>>>()?;
    let config = GwConfig {
        max_iter: args.max_iter,
        rel_tol: args.tol,
        inits,
        restarts: args.restarts,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Every `*.json` space in `dir`, sorted by id.
fn load_dir(dir: &Path) -> Result<Vec<MmSpace>> {
    let mut spaces = json_files(dir)?
        .iter()
        .map(load_mm_space)
        .collect::<Result<Vec<_>>>()?;
    spaces.sort_by(|a, b| a.id().cmp(b.id()));
    if let Some(w) = spaces.windows(2).find(|w| w[0].id() == w[1].id()) {
        return Err(Error::Validation(format!("duplicate space id `{}` in {}", w[0].id(), dir.display())));
    }
    Ok(spaces)
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn labels_of(spaces: &[MmSpace]) -> Option<Vec<String>> {
    spaces
        .iter()
        .map(|s| s.label().map(str::to_owned))
        .collect()
}

fn gw(args: GwArgs) -> Result<()> {
    if let Some(GwCommand::Pairwise(p)) = args.pairwise {
        return gw_pairwise(p);
    }
    let (a, b) = (args.a.expect("required by clap"), args.b.expect("required by clap"));
    let config = gw_config(&args.solver)?;
    let (x, y) = (load_mm_space(&a)?, load_mm_space(&b)?);
    let start = Instant::now();
    let result = solve_gw(&x, &y, &config)?;
    log::info!("gw `{}` vs `{}` in {:.3?}", x.id(), y.id(), start.elapsed());
    if let Some(path) = &args.plan_out {
        result.plan.write_csv(path)?;
    }
    println!("{}", result.to_json());
    Ok(())
}

fn gw_pairwise(args: GwPairwiseArgs) -> Result<()> {
    let config = gw_config(&args.solver)?;
    let spaces = load_dir(&args.spaces)?;
    let n = spaces.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let start = Instant::now();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| solve_gw(&spaces[i], &spaces[j], &config).map(|r| r.distance))
        .collect::<Result<Vec<f64>>>()?;
    log::info!("gw pairwise: {n} spaces, {} GW solves in {:.3?}", pairs.len(), start.elapsed());
    let mut matrix = Array2::zeros((n, n));
    for (&(i, j), &d) in pairs.iter().zip(&values) {
        matrix[[i, j]] = d;
        matrix[[j, i]] = d;
    }
    let ids = spaces.iter().map(|s| s.id().to_owned()).collect();
    let dist = DistanceMatrix::new(ids, matrix)?.with_labels(labels_of(&spaces))?;
    dist.write_csv(&args.out)?;
    if let Some(path) = &args.labels_out {
        dist.write_labels_csv(path)?;
    }
    Ok(())
}

fn glgw_embed(args: GlgwEmbedArgs) -> Result<()> {
    let config = gw_config(&args.solver)?;
    let reference = load_mm_space(&args.reference)?;
    let spaces = load_dir(&args.spaces)?;
    let start = Instant::now();
    let embeddings = embed_all(&reference, &spaces, &config)?;
    log::info!(
        "glgw embed: reference `{}`, {} GW solves in {:.3?}",
        reference.id(),
        embeddings.len(),
        start.elapsed()
    );
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for emb in &embeddings {
        emb.save(args.out.join(format!("{}.json", emb.target_id)))?;
    }
    Ok(())
}

fn glgw_pairwise(args: GlgwPairwiseArgs) -> Result<()> {
    let mut embeddings = json_files(&args.embeddings)?
        .iter()
        .map(LgwEmbedding::load)
        .collect::<Result<Vec<_>>>()?;
    embeddings.sort_by(|a, b| a.target_id.cmp(&b.target_id));
    let start = Instant::now();
    let matrix = glgw_matrix(&embeddings)?;
    let n = embeddings.len();
    log::info!("glgw pairwise: {} evaluations in {:.3?}", n * n.saturating_sub(1) / 2, start.elapsed());
    let ids = embeddings.iter().map(|e| e.target_id.clone()).collect();
    let labels = embeddings.iter().map(|e| e.target_label.clone()).collect();
    let dist = DistanceMatrix::new(ids, matrix)?.with_labels(labels)?;
    dist.write_csv(&args.out)?;
    if let Some(path) = &args.labels_out {
        dist.write_labels_csv(path)?;
    }
    Ok(())
}

fn barycenter(args: BarycenterArgs) -> Result<()> {
    let inner_gw = gw_config(&args.solver)?;
    let spaces = args.spaces.iter().map(load_mm_space).collect::<Result<Vec<_>>>()?;
    let mut config = BarycenterConfig::new(args.points);
    config.id = args.id;
    config.lambdas = args.lambdas;
    config.outer_iters = args.iters;
    config.seed = args.solver.seed;
    config.inner_gw = inner_gw;
    let bary = solve_barycenter(&spaces, &config)?;
    save_mm_space(&bary.space, &args.out)?;
    let report = serde_json::json!({
        "id": bary.space.id(),
        "points": bary.space.len(),
        "sweeps": bary.sweeps,
        "seed": bary.seed,
        "objective_history": bary.objective_history,
    });
    println!("{report}");
    Ok(())
}

fn mds(args: MdsArgs) -> Result<()> {
    let dist = DistanceMatrix::read_csv(&args.matrix)?;
    let coords = classical_mds(&dist, args.dim)?;
    let header: Vec<String> = (1..=args.dim).map(|k| format!("x{k}")).collect();
    let mut out = format!("id,{}\n", header.join(","));
    for (id, row) in dist.ids().iter().zip(coords.rows()) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{id},{}\n", cells.join(",")));
    }
    write(&args.out, out)
}

fn confusion(args: ConfusionArgs) -> Result<()> {
    let dist = DistanceMatrix::read_csv(&args.matrix)?;
    let table = read_labels_csv(&args.labels)?;
    let labels = dist
        .ids()
        .iter()
        .map(|id| {
            table
                .iter()
                .find(|(k, _)| k == id)
                .map(|(_, label)| label.clone())
                .ok_or_else(|| Error::IdMismatch(format!("no label for `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = confusion_matrix(&dist, &labels, args.reps, args.seed)?;
    write(&args.out, matrix.to_csv())
}

fn compare(args: CompareArgs) -> Result<()> {
    let a = DistanceMatrix::read_csv(&args.reference)?;
    let b = DistanceMatrix::read_csv(&args.other)?;
    let agreement = compare_distance_matrices(&a, &b)?;
    println!("{}", serde_json::to_string(&agreement).expect("agreement serializes"));
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let config = gw_config(&args.solver)?;
    let reference = load_mm_space(&args.reference)?;
    let (x, y) = (load_mm_space(&args.x)?, load_mm_space(&args.y)?);
    let report = check_lgw_bounds(&reference, &x, &y, &config)?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

fn check(args: CheckArgs) -> Result<()> {
    let space = load_mm_space_with(&args.space, args.drop_zero)?;
    let mut report = serde_json::json!({
        "id": space.id(),
        "n": space.len(),
        "metric_kind": space.kind(),
        "valid": true,
    });
    if args.triangle {
        report["triangle_violation"] = serde_json::json!(space.triangle_violation());
    }
    if let Some(out) = &args.out {
        save_mm_space(&space, out)?;
    }
    println!("{report}");
    Ok(())
}
