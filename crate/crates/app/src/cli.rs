use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use convpca_core::neural::{ArchId, Task};
use convpca_core::spatialstats::{Scheme, DEFAULT_KNN};
use convpca_core::streetgraph::DEFAULT_RASTER_SIZE;
use convpca_core::urbangeom::{DEFAULT_INTERVAL, DEFAULT_MAX_RADIUS};

#[derive(Debug, Parser)]
#[command(name = "convpca", version, about = "Convolutional autoencoder + PCA over street networks and street imagery")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random draw the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// JSON file with command-specific settings (training, grid or generator).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Workspace manifest; outputs are registered in it and `serve` reads it.
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a street graph, project it to meters and write it back.
    Ingest {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Clip a street graph to a square and draw it as a grayscale raster.
    Rasterize {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RASTER_SIZE)]
        size: usize,
        /// Side of the square in meters; defaults to the graph extent.
        #[arg(long)]
        side: Option<f64>,
        /// Square centre as `x,y`; defaults to the graph centre.
        #[arg(long, value_parser = parse_xy)]
        center: Option<(f64, f64)>,
    },
    /// Train a convolutional autoencoder on a corpus.
    TrainCae {
        #[arg(long)]
        corpus: PathBuf,
        /// Architecture; defaults to streetnet for gray corpora, streetview for RGB.
        #[arg(long)]
        arch: Option<ArchId>,
        /// Use the full-size architecture instead of the reduced one.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Encode every corpus image into a latent CSV.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Fit PCA on a latent CSV; writes the model and the component CSV.
    FitPca {
        #[arg(long)]
        latents: PathBuf,
    },
    /// Decode the mean vector with one component varied.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pca: PathBuf,
        /// 1-based component index.
        #[arg(long, default_value_t = 1)]
        component: usize,
        /// Half range in units of √λ.
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
        #[arg(long, default_value_t = 9)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = ImageFormat::Png)]
        format: ImageFormat,
    },
    /// Items with the lowest and highest values of one component.
    Extremes {
        #[arg(long)]
        components: PathBuf,
        #[arg(long, default_value_t = 1)]
        component: usize,
        #[arg(long, default_value_t = 9)]
        count: usize,
        /// Corpus to copy the item images from.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Closeness centrality and intersection density on a square grid.
    Stats {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = convpca_core::streetgraph::DEFAULT_TILE_SIDE)]
        cell: f64,
    },
    /// Street enclosure (height to width) per street segment.
    Enclosure {
        #[arg(long)]
        streets: PathBuf,
        #[arg(long)]
        buildings: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_RADIUS)]
        radius: f64,
    },
    /// Local and global Moran's I of an image or a point table.
    Moran {
        /// Image whose pixels are the sites (rook or queen weights).
        #[arg(long, conflicts_with = "table")]
        image: Option<PathBuf>,
        /// CSV with `x`, `y` and a value column (knn weights).
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value = "value")]
        column: String,
        #[arg(long, default_value = "queen")]
        scheme: Scheme,
        #[arg(long, default_value_t = DEFAULT_KNN)]
        k: usize,
    },
    /// Train an MLP head on the leading columns of a feature CSV.
    TrainHead {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Number of leading columns to use; defaults to all.
        #[arg(long)]
        components: Option<usize>,
        /// `regression` or `classification:<k>`; defaults to the corpus task.
        #[arg(long)]
        task: Option<Task>,
        /// Head layout; defaults to the corpus image kind.
        #[arg(long)]
        head: Option<ArchId>,
    },
    /// Reducer × component-count grid on a latent CSV.
    RunGrid {
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated component counts.
        #[arg(long, value_delimiter = ',')]
        components: Option<Vec<usize>>,
        #[arg(long)]
        task: Option<Task>,
        #[arg(long)]
        head: Option<ArchId>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Generate synthetic graphs, scenes or corpora.
    Synth {
        #[arg(long, value_enum)]
        kind: Option<SynthKind>,
        #[arg(long)]
        count: Option<usize>,
        /// Raster or image side in pixels.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Serve a trained model to the explorer over HTTP.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        pca: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Directory of static files served under `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Png,
    Pgm,
}

impl ImageFormat {
    /// PNM extension for `channels`, or `png`.
    pub fn extension(&self, channels: usize) -> &'static str {
        match (self, channels) {
            (ImageFormat::Png, _) => "png",
            (ImageFormat::Pgm, 1) => "pgm",
            (ImageFormat::Pgm, _) => "ppm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Density,
    Frontage,
    Grid,
    Radial,
    Canyon,
}

fn parse_xy(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(x)?, parse(y)?))
}
