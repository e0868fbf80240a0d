use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use convpca_core::experiments::{render_table, run_grid, write_results_csv, GridConfig, PipelineConfig, SplitSpec};
use convpca_core::io::{read_json, read_matrix_csv, write_image, write_json, write_matrix_csv};
use convpca_core::latent::{component_extremes, fit_pca, perturb_sweep, save_pca, sweep_offsets};
use convpca_core::neural::{load_cae, save_cae, save_mlp, train_cae, train_mlp_head, ArchConfig, ArchId, Task, TrainConfig};
use convpca_core::spatialstats::{knn_weights, local_autocorr, raster_weights, summarize, MoranReport, Scheme};
use convpca_core::streetgraph::geometry::Point;
use convpca_core::streetgraph::{clip_bbox, closeness_all, grid_stats, load_graph, rasterize, save_graph, BBox, StreetGraph};
use convpca_core::synthdata::{
    gen_canyon_scene, gen_density_corpus, gen_frontage_corpus, gen_grid_network, gen_radial_network, Corpus, DensitySpec,
    FrontageSpec, SynthSpec,
};
use convpca_core::urbangeom::{enclosure_for_segments, load_buildings, segment_streets, write_enclosure_csv, BuildingDoc, BuildingsDocument};
use ndarray::{s, Array2};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cli::{Cli, Command, Common, ImageFormat, SynthKind};
use crate::server::{self, ServeConfig};
use crate::workspace::{Artifact, WorkspaceManifest};
use crate::{AppError, AppResult};

pub const COMPONENTS_FILE: &str = "components.csv";
pub const SWEEP_FILE: &str = "sweep.json";
pub const HISTORY_FILE: &str = "history.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const EXTREMES_FILE: &str = "extremes.json";

/// File name of sweep step `i`.
pub fn sweep_step_name(i: usize, ext: &str) -> String {
    format!("step_{i:02}.{ext}")
}

struct Ctx {
    seed: u64,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    workspace: Option<PathBuf>,
}

impl Ctx {
    fn out(&self, command: &str) -> AppResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| AppError::Usage(format!("{command}: --out is required")))
    }

    fn config<T: DeserializeOwned>(&self) -> AppResult<Option<T>> {
        Ok(match &self.config {
            Some(p) => Some(read_json(p)?),
            None => None,
        })
    }

    fn register(&self, kind: Artifact, path: &Path) -> AppResult<()> {
        match &self.workspace {
            Some(ws) => WorkspaceManifest::register(ws, kind, path),
            None => Ok(()),
        }
    }
}

fn ensure_parent(path: &Path) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn arch_for_channels(channels: usize) -> ArchId {
    if channels == 1 {
        ArchId::Streetnet
    } else {
        ArchId::Streetview
    }
}

fn first_channels(corpus: &Corpus) -> AppResult<usize> {
    corpus
        .images
        .first()
        .map(|i| i.channels())
        .ok_or_else(|| AppError::Input("corpus is empty".into()))
}

/// Labels of `ids`, looked up in the corpus by id.
fn labels_for(ids: &[String], corpus: &Corpus) -> AppResult<Vec<f64>> {
    let by_id: HashMap<&str, f64> = corpus.ids.iter().map(String::as_str).zip(corpus.labels.iter().copied()).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| AppError::Input(format!("item '{id}' is not in the corpus")))
        })
        .collect()
}

pub fn dispatch(cli: Cli) -> AppResult<()> {
    let Common {
        seed,
        config,
        out,
        workspace,
    } = cli.common;
    let ctx = Ctx {
        seed,
        config,
        out,
        workspace,
    };
    match cli.command {
        Command::Ingest { graph } => ingest(&ctx, &graph),
        Command::Rasterize {
            graph,
            size,
            side,
            center,
        } => rasterize_cmd(&ctx, &graph, size, side, center),
        Command::TrainCae {
            corpus,
            arch,
            full,
            epochs,
            lr,
            batch_size,
        } => train_cae_cmd(&ctx, &corpus, arch, full, epochs, lr, batch_size),
        Command::Encode { model, corpus } => encode(&ctx, &model, &corpus),
        Command::FitPca { latents } => fit_pca_cmd(&ctx, &latents),
        Command::Sweep {
            model,
            pca,
            component,
            sigmas,
            steps,
            format,
        } => sweep(&ctx, &model, &pca, component, sigmas, steps, format),
        Command::Extremes {
            components,
            component,
            count,
            corpus,
        } => extremes(&ctx, &components, component, count, corpus.as_deref()),
        Command::Stats { graph, cell } => stats(&ctx, &graph, cell),
        Command::Enclosure {
            streets,
            buildings,
            interval,
            radius,
        } => enclosure(&ctx, &streets, &buildings, interval, radius),
        Command::Moran {
            image,
            table,
            column,
            scheme,
            k,
        } => moran(&ctx, image.as_deref(), table.as_deref(), &column, scheme, k),
        Command::TrainHead {
            features,
            corpus,
            components,
            task,
            head,
        } => train_head(&ctx, &features, &corpus, components, task, head),
        Command::RunGrid {
            latents,
            corpus,
            components,
            task,
            head,
            epochs,
        } => run_grid_cmd(&ctx, &latents, &corpus, components, task, head, epochs),
        Command::Synth { kind, count, size } => synth(&ctx, kind, count, size),
        Command::Serve {
            model,
            pca,
            corpus,
            static_dir,
            host,
            port,
        } => serve(&ctx, model, pca, corpus, static_dir, &host, port),
    }
}

fn ingest(ctx: &Ctx, graph: &Path) -> AppResult<()> {
    let out = ctx.out("ingest")?;
    let g = load_graph(graph)?;
    ensure_parent(out)?;
    save_graph(&g, out)?;
    println!("{} nodes, {} edges, {:.1} m of street", g.node_count(), g.edge_count(), g.total_length());
    ctx.register(Artifact::Graph, out)
}

fn rasterize_cmd(ctx: &Ctx, graph: &Path, size: usize, side: Option<f64>, center: Option<(f64, f64)>) -> AppResult<()> {
    let out = ctx.out("rasterize")?;
    let g = load_graph(graph)?;
    let bounds = g
        .bounds()
        .ok_or_else(|| AppError::Input(format!("{} has no nodes", graph.display())))?;
    let center = center.map_or(bounds.center(), |(x, y)| Point::new(x, y));
    let side = side.unwrap_or_else(|| bounds.width().max(bounds.height()));
    let clipped = clip_bbox(&g, center, side)?;
    let img = rasterize(&clipped, &BBox::square(center, side), size)?;
    ensure_parent(out)?;
    write_image(&img, out)?;
    println!("lit fraction {:.4}", img.lit_fraction(0.5));
    Ok(())
}

/// Training defaults for a corpus of `arch` images of side `size`.
pub fn default_cae_config(arch: ArchId, seed: u64, size: usize) -> TrainConfig {
    match arch {
        ArchId::Streetnet => PipelineConfig::density(seed, size).cae,
        ArchId::Streetview => PipelineConfig::frontage(seed, size).cae,
    }
}

fn train_cae_cmd(
    ctx: &Ctx,
    corpus_dir: &Path,
    arch: Option<ArchId>,
    full: bool,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
) -> AppResult<()> {
    let out = ctx.out("train-cae")?;
    let corpus = Corpus::read(corpus_dir)?;
    let channels = first_channels(&corpus)?;
    let arch_id = arch.unwrap_or_else(|| arch_for_channels(channels));
    let size = corpus.images[0].height();
    let arch = if full { ArchConfig::full(arch_id) } else { ArchConfig::desk(arch_id, size) };
    let mut cfg = ctx
        .config::<TrainConfig>()?
        .unwrap_or_else(|| default_cae_config(arch_id, ctx.seed, size));
    cfg.seed = ctx.seed;
    cfg.epochs = epochs.unwrap_or(cfg.epochs);
    cfg.learning_rate = lr.unwrap_or(cfg.learning_rate);
    cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
    let (model, history) = train_cae(&corpus.images, arch, &cfg)?;
    save_cae(&model, out)?;
    write_json(&out.join(HISTORY_FILE), &history)?;
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!("{} epochs, loss {first:.5} -> {last:.5}, latent width {}", history.len(), model.latent_dim());
    }
    ctx.register(Artifact::Model, out)
}

fn encode(ctx: &Ctx, model: &Path, corpus_dir: &Path) -> AppResult<()> {
    let out = ctx.out("encode")?;
    let cae = load_cae(model)?;
    let corpus = Corpus::read(corpus_dir)?;
    let z = cae.encode_all(&corpus.images)?;
    ensure_parent(out)?;
    write_matrix_csv(out, "z", &corpus.ids, &z)?;
    println!("{} items x {} latent values", z.nrows(), z.ncols());
    ctx.register(Artifact::Result, out)
}

fn fit_pca_cmd(ctx: &Ctx, latents: &Path) -> AppResult<()> {
    let out = ctx.out("fit-pca")?;
    let (ids, z) = read_matrix_csv(latents)?;
    let model = fit_pca(z.view())?;
    save_pca(&model, out)?;
    let v = model.project(z.view())?;
    write_matrix_csv(&out.join(COMPONENTS_FILE), "v", &ids, &v)?;
    let ratio = model.explained_variance_ratio();
    let head: Vec<String> = ratio.iter().take(5).map(|r| format!("{r:.3}")).collect();
    println!("d = {}, explained variance of leading components: {}", model.dim(), head.join(" "));
    ctx.register(Artifact::Pca, out)
}

#[derive(Serialize)]
struct SweepSummary {
    component: usize,
    sigmas: f64,
    offsets: Vec<f64>,
    files: Vec<String>,
    lit_fraction: Vec<f64>,
}

fn sweep(ctx: &Ctx, model: &Path, pca_dir: &Path, component: usize, sigmas: f64, steps: usize, format: ImageFormat) -> AppResult<()> {
    let out = ctx.out("sweep")?;
    let cae = load_cae(model)?;
    let pca = convpca_core::latent::load_pca(pca_dir)?;
    let offsets = sweep_offsets(&pca, component, sigmas, steps)?;
    let images = perturb_sweep(&pca, &cae, component, sigmas, steps)?;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let name = sweep_step_name(i, format.extension(img.channels()));
        write_image(img, &out.join(&name))?;
        files.push(name);
    }
    let lit_fraction: Vec<f64> = images.iter().map(|i| i.lit_fraction(0.5)).collect();
    let lits: Vec<String> = lit_fraction.iter().map(|l| format!("{l:.3}")).collect();
    println!("component {component}: lit fraction {}", lits.join(" "));
    write_json(
        &out.join(SWEEP_FILE),
        &SweepSummary {
            component,
            sigmas,
            offsets,
            files,
            lit_fraction,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct Extreme {
    id: String,
    value: f64,
}

fn extremes(ctx: &Ctx, components: &Path, component: usize, count: usize, corpus_dir: Option<&Path>) -> AppResult<()> {
    let out = ctx.out("extremes")?;
    let (ids, v) = read_matrix_csv(components)?;
    let (lowest, highest) = component_extremes(v.view(), component, count)?;
    let describe = |rows: &[usize]| -> Vec<Extreme> {
        rows.iter()
            .map(|&i| Extreme {
                id: ids[i].clone(),
                value: v[[i, component - 1]],
            })
            .collect()
    };
    fs::create_dir_all(out)?;
    if let Some(dir) = corpus_dir {
        let corpus = Corpus::read(dir)?;
        let by_id: HashMap<&str, usize> = corpus.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for (tag, rows) in [("lowest", &lowest), ("highest", &highest)] {
            for (rank, &row) in rows.iter().enumerate() {
                let item = by_id
                    .get(ids[row].as_str())
                    .ok_or_else(|| AppError::Input(format!("item '{}' is not in the corpus", ids[row])))?;
                write_image(&corpus.images[*item], &out.join(format!("{tag}_{rank:02}.png")))?;
            }
        }
    }
    write_json(
        &out.join(EXTREMES_FILE),
        &serde_json::json!({
            "component": component,
            "lowest": describe(&lowest),
            "highest": describe(&highest),
        }),
    )?;
    Ok(())
}

fn stats(ctx: &Ctx, graph: &Path, cell: f64) -> AppResult<()> {
    let out = ctx.out("stats")?;
    let g = load_graph(graph)?;
    let closeness = closeness_all(&g)?;
    let cells = grid_stats(&g, &closeness, cell)?;
    ensure_parent(out)?;
    let mut w = csv::Writer::from_path(out)?;
    for c in &cells {
        w.serialize(c)?;
    }
    w.flush()?;
    let occupied = cells.iter().filter(|c| !c.empty).count();
    println!("{} cells, {occupied} with nodes", cells.len());
    ctx.register(Artifact::Result, out)
}

fn enclosure(ctx: &Ctx, streets: &Path, buildings: &Path, interval: f64, radius: f64) -> AppResult<()> {
    let out = ctx.out("enclosure")?;
    let g = load_graph(streets)?;
    let polylines: Vec<Vec<Point>> = g.edges().iter().map(|e| e.polyline.clone()).collect();
    let footprints = load_buildings(buildings)?;
    let segments = segment_streets(&polylines, interval)?;
    let results = enclosure_for_segments(&segments, &footprints, radius)?;
    ensure_parent(out)?;
    write_enclosure_csv(&segments, &results, fs::File::create(out)?)?;
    let defined = results.iter().filter(|r| r.enc.is_some()).count();
    println!("{} segments, {defined} with two-sided enclosure", segments.len());
    ctx.register(Artifact::Result, out)
}

fn read_point_table(path: &Path, column: &str) -> AppResult<(Vec<Point>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::Input(format!("{} has no column '{name}'", path.display())))
    };
    let (xi, yi, vi) = (find("x")?, find("y")?, find(column)?);
    let mut points = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|_| convpca_core::Error::Format {
                path: path.to_path_buf(),
                message: format!("bad number '{}'", &rec[i]),
            })
        };
        points.push(Point::new(num(xi)?, num(yi)?));
        values.push(num(vi)?);
    }
    Ok((points, values))
}

fn moran(ctx: &Ctx, image: Option<&Path>, table: Option<&Path>, column: &str, scheme: Scheme, k: usize) -> AppResult<()> {
    let out = ctx.out("moran")?;
    let (values, weights) = match (image, table) {
        (Some(img_path), None) => {
            if scheme == Scheme::Knn {
                return Err(AppError::Usage("image input takes rook or queen weights".into()));
            }
            let img = convpca_core::io::read_image(img_path)?;
            let c = img.channels();
            let y: Vec<f64> = img.data().chunks(c).map(|px| px.iter().sum::<f64>() / c as f64).collect();
            (y, raster_weights(img.height(), img.width(), scheme)?)
        }
        (None, Some(table_path)) => {
            if scheme != Scheme::Knn {
                return Err(AppError::Usage("point tables take knn weights".into()));
            }
            let (points, y) = read_point_table(table_path, column)?;
            (y, knn_weights(&points, k)?)
        }
        _ => return Err(AppError::Usage("moran: give exactly one of --image or --table".into())),
    };
    let li = local_autocorr(&values, &weights)?;
    let g = summarize(&li);
    let li_path = out.with_extension("li.csv");
    ensure_parent(out)?;
    let mut w = csv::Writer::from_path(&li_path)?;
    w.write_record(["index", "Li"])?;
    for (i, v) in li.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    let report = MoranReport {
        n: g.n,
        scheme,
        l_mean: g.l_mean,
        l_sum: g.l_sum,
        li_path: li_path.display().to_string(),
    };
    write_json(out, &report)?;
    println!("{} sites, L_mean {:.4}", g.n, g.l_mean);
    ctx.register(Artifact::Result, out)
}

fn corpus_task(corpus: &Corpus) -> AppResult<Task> {
    Ok(corpus.meta.task.parse()?)
}

fn train_head(
    ctx: &Ctx,
    features: &Path,
    corpus_dir: &Path,
    components: Option<usize>,
    task: Option<Task>,
    head: Option<ArchId>,
) -> AppResult<()> {
    let out = ctx.out("train-head")?;
    let (ids, x) = read_matrix_csv(features)?;
    let corpus = Corpus::read(corpus_dir)?;
    let y = labels_for(&ids, &corpus)?;
    let width = components.unwrap_or(x.ncols());
    if width == 0 || width > x.ncols() {
        return Err(AppError::Usage(format!("--components must be in 1..={}", x.ncols())));
    }
    let x: Array2<f64> = x.slice(s![.., ..width]).to_owned();
    let task = match task {
        Some(t) => t,
        None => corpus_task(&corpus)?,
    };
    let head = head.unwrap_or(arch_for_channels(first_channels(&corpus)?));
    let cfg = match ctx.config::<TrainConfig>()? {
        Some(mut c) => {
            c.seed = ctx.seed;
            c
        }
        None => GridConfig::new(head, task, ctx.seed).head,
    };
    let split = convpca_core::experiments::split_dataset(ids.len(), &SplitSpec::with_seed(ctx.seed))?;
    let (model, metrics) = train_mlp_head(x.view(), &y, task, head, &split, &cfg)?;
    save_mlp(&model, ctx.seed, out)?;
    write_json(&out.join(METRICS_FILE), &metrics)?;
    match &metrics.test {
        Some(m) => println!("test score {:.4} after {} epochs", m.score(), metrics.epochs_run),
        None => println!("test metrics undefined after {} epochs", metrics.epochs_run),
    }
    ctx.register(Artifact::Model, out)
}

fn run_grid_cmd(
    ctx: &Ctx,
    latents: &Path,
    corpus_dir: &Path,
    components: Option<Vec<usize>>,
    task: Option<Task>,
    head: Option<ArchId>,
    epochs: Option<usize>,
) -> AppResult<()> {
    let out = ctx.out("run-grid")?;
    let (ids, z) = read_matrix_csv(latents)?;
    let corpus = Corpus::read(corpus_dir)?;
    let y = labels_for(&ids, &corpus)?;
    let mut cfg = match ctx.config::<GridConfig>()? {
        Some(c) => c,
        None => {
            let task = match task {
                Some(t) => t,
                None => corpus_task(&corpus)?,
            };
            let head = head.unwrap_or(arch_for_channels(first_channels(&corpus)?));
            GridConfig::new(head, task, ctx.seed)
        }
    };
    if let Some(c) = components {
        cfg.components = c;
    }
    if let Some(e) = epochs {
        cfg.head.epochs = e;
        cfg.autoencoder.epochs = e;
    }
    let results = run_grid(z.view(), &y, &cfg)?;
    print!("{}", render_table(&results));
    ensure_parent(out)?;
    write_results_csv(&results, fs::File::create(out)?)?;
    ctx.register(Artifact::Result, out)
}

fn write_canyon(dir: &Path, spec: &SynthSpec) -> AppResult<()> {
    let SynthSpec::CanyonScene {
        h_left,
        h_right,
        half_width_left,
        half_width_right,
        rotation,
    } = *spec
    else {
        unreachable!("called with a canyon spec");
    };
    let scene = gen_canyon_scene(h_left, h_right, half_width_left, half_width_right, rotation)?;
    let mut g = StreetGraph::new("canyon scene, local meters");
    let ends: Vec<usize> = [scene.street[0], scene.street[scene.street.len() - 1]]
        .iter()
        .enumerate()
        .map(|(i, p)| g.add_node(format!("s{i}"), p.x, p.y))
        .collect::<Result<_, _>>()?;
    let interior = scene.street[1..scene.street.len() - 1].to_vec();
    g.add_edge(ends[0], ends[1], None, Some(interior))?;
    fs::create_dir_all(dir)?;
    save_graph(&g, &dir.join("streets.json"))?;
    let doc = BuildingsDocument {
        buildings: scene
            .buildings
            .iter()
            .map(|b| BuildingDoc {
                polygon: b.ring.iter().map(|p| [p.x, p.y]).collect(),
                height: b.height,
            })
            .collect(),
    };
    write_json(&dir.join("buildings.json"), &doc)?;
    write_json(&dir.join("scene.json"), &serde_json::json!({ "spec": spec, "enc": scene.enc }))?;
    println!("canyon scene, enc {:.4}", scene.enc);
    Ok(())
}

fn synth(ctx: &Ctx, kind: Option<SynthKind>, count: Option<usize>, size: Option<usize>) -> AppResult<()> {
    let out = ctx.out("synth")?;
    let spec = match ctx.config::<SynthSpec>()? {
        Some(spec) => spec,
        None => {
            let kind = kind.ok_or_else(|| AppError::Usage("synth: give --kind or --config".into()))?;
            match kind {
                SynthKind::Density => {
                    let d = DensitySpec::default();
                    SynthSpec::DensityCorpus(DensitySpec {
                        count: count.unwrap_or(d.count),
                        raster_size: size.unwrap_or(d.raster_size),
                        seed: ctx.seed,
                        ..d
                    })
                }
                SynthKind::Frontage => {
                    let d = FrontageSpec::default();
                    SynthSpec::FrontageCorpus(FrontageSpec {
                        count: count.unwrap_or(d.count),
                        size: size.unwrap_or(d.size),
                        seed: ctx.seed,
                        ..d
                    })
                }
                SynthKind::Grid => SynthSpec::GridNet {
                    rows: 10,
                    cols: 10,
                    spacing: 100.0,
                    jitter: 5.0,
                    seed: ctx.seed,
                },
                SynthKind::Radial => SynthSpec::RadialNet {
                    rings: 6,
                    spokes: 12,
                    ring_spacing: 100.0,
                    jitter: 5.0,
                    seed: ctx.seed,
                },
                SynthKind::Canyon => SynthSpec::CanyonScene {
                    h_left: 12.0,
                    h_right: 18.0,
                    half_width_left: 8.0,
                    half_width_right: 7.0,
                    rotation: 0.0,
                },
            }
        }
    };
    match &spec {
        SynthSpec::DensityCorpus(d) => {
            let corpus = Corpus::from_density(&gen_density_corpus(d)?);
            corpus.write(out)?;
            println!("{} density tiles", corpus.len());
            ctx.register(Artifact::Corpus, out)
        }
        SynthSpec::FrontageCorpus(f) => {
            let corpus = Corpus::from_frontage(f, &gen_frontage_corpus(f)?);
            corpus.write(out)?;
            println!("{} frontage views", corpus.len());
            ctx.register(Artifact::Corpus, out)
        }
        SynthSpec::GridNet {
            rows,
            cols,
            spacing,
            jitter,
            seed,
        } => write_graph(ctx, out, &gen_grid_network(*rows, *cols, *spacing, *jitter, *seed)?),
        SynthSpec::RadialNet {
            rings,
            spokes,
            ring_spacing,
            jitter,
            seed,
        } => write_graph(ctx, out, &gen_radial_network(*rings, *spokes, *ring_spacing, *jitter, *seed)?),
        SynthSpec::CanyonScene { .. } => write_canyon(out, &spec),
    }
}

fn write_graph(ctx: &Ctx, out: &Path, g: &StreetGraph) -> AppResult<()> {
    ensure_parent(out)?;
    save_graph(g, out)?;
    println!("{} nodes, {} edges", g.node_count(), g.edge_count());
    ctx.register(Artifact::Graph, out)
}

fn serve(
    ctx: &Ctx,
    model: Option<PathBuf>,
    pca: Option<PathBuf>,
    corpus: Option<PathBuf>,
    static_dir: Option<PathBuf>,
    host: &str,
    port: u16,
) -> AppResult<()> {
    let manifest = match &ctx.workspace {
        Some(ws) => Some(WorkspaceManifest::load(ws)?),
        None => None,
    };
    let from_manifest = |pick: fn(&WorkspaceManifest) -> &Vec<PathBuf>| manifest.as_ref().and_then(|m| pick(m).first().cloned());
    let model = model
        .or_else(|| from_manifest(|m| &m.models))
        .ok_or_else(|| AppError::Usage("serve: --model or a workspace with a model is required".into()))?;
    let pca = pca
        .or_else(|| from_manifest(|m| &m.pca))
        .ok_or_else(|| AppError::Usage("serve: --pca or a workspace with a pca entry is required".into()))?;
    let corpus = corpus.or_else(|| from_manifest(|m| &m.corpora));
    let config = ServeConfig {
        model,
        pca,
        corpus,
        static_dir,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(server::serve(config, host, port))
}
