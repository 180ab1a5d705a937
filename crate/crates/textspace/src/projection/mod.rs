//! Projections from document representations (or their distance matrices)
//! into the plane.

pub mod mds;
pub mod pca;
pub mod som;
pub mod tsne;
pub mod umap;

pub use mds::MdsResult;
pub use pca::{pca_reduce, Pca};
pub use tsne::{TsneDiagnostics, TsneParams};
pub use umap::UmapParams;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::models::{DistanceMatrix, DocumentRepresentation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DrKind {
    Tsne,
    Umap,
    Mds,
    Som,
}

impl DrKind {
    pub fn name(self) -> &'static str {
        match self {
            DrKind::Tsne => "t-SNE",
            DrKind::Umap => "UMAP",
            DrKind::Mds => "MDS",
            DrKind::Som => "SOM",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "t-SNE" | "tsne" | "t-sne" => Ok(DrKind::Tsne),
            "UMAP" | "umap" => Ok(DrKind::Umap),
            "MDS" | "mds" => Ok(DrKind::Mds),
            "SOM" | "som" => Ok(DrKind::Som),
            _ => Err(Error::invalid(format!("unknown projection '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MdsParams {
    pub max_iter: usize,
}

impl Default for MdsParams {
    fn default() -> Self {
        MdsParams { max_iter: 300 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SomParams {
    pub grid_m: usize,
    pub grid_n: usize,
    pub epochs: usize,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams {
            grid_m: 10,
            grid_n: 10,
            epochs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum DrParams {
    Tsne(TsneParams),
    Umap(UmapParams),
    Mds(MdsParams),
    Som(SomParams),
}

impl DrParams {
    pub fn kind(&self) -> DrKind {
        match self {
            DrParams::Tsne(_) => DrKind::Tsne,
            DrParams::Umap(_) => DrKind::Umap,
            DrParams::Mds(_) => DrKind::Mds,
            DrParams::Som(_) => DrKind::Som,
        }
    }
}

/// A 2-D arrangement of m points.
#[derive(Debug, Clone)]
pub struct Layout {
    /// m x 2 coordinates.
    pub positions: Array2<f64>,
    /// Identity of the configuration that produced this layout (filled by the
    /// runner; empty for direct calls).
    pub config_ref: String,
    /// True when every point coincides (within 1e-12 of extent).
    pub degenerate: bool,
}

impl Layout {
    pub fn from_positions(positions: Array2<f64>) -> Self {
        let degenerate = layout_extent(&positions) < 1e-12;
        Layout {
            positions,
            config_ref: String::new(),
            degenerate,
        }
    }

    pub fn n_points(&self) -> usize {
        self.positions.nrows()
    }
}

fn layout_extent(positions: &Array2<f64>) -> f64 {
    let mut extent = 0.0f64;
    for c in 0..positions.ncols() {
        let col = positions.column(c);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in col.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        extent = extent.max(hi - lo);
    }
    extent
}

pub enum ProjectionInput<'a> {
    Representation(&'a DocumentRepresentation),
    Distances(&'a DistanceMatrix),
}

impl ProjectionInput<'_> {
    fn n_points(&self) -> usize {
        match self {
            ProjectionInput::Representation(rep) => rep.matrix.nrows(),
            ProjectionInput::Distances(d) => d.n(),
        }
    }

    fn to_distances(&self) -> Result<DistanceMatrix> {
        match self {
            ProjectionInput::Representation(rep) => crate::models::pairwise_distances(rep),
            ProjectionInput::Distances(d) => Ok((*d).clone()),
        }
    }
}

/// Projects the input to 2-D. t-SNE, UMAP and MDS work from pairwise
/// distances (computed under the representation's metric when given a
/// representation); SOM consumes vectors only, PCA-reduced to 95% variance
/// first.
pub fn project(input: ProjectionInput, params: &DrParams, seed: u64) -> Result<Layout> {
    let m = input.n_points();
    let positions = match params {
        DrParams::Tsne(p) => {
            let d = input.to_distances()?;
            tsne::run(&d.values, p, seed)?.0
        }
        DrParams::Umap(p) => {
            let d = input.to_distances()?;
            umap::run(&d.values, p, seed)?
        }
        DrParams::Mds(p) => {
            let d = input.to_distances()?;
            mds::smacof(&d.values, p.max_iter, seed)?.positions
        }
        DrParams::Som(p) => {
            let ProjectionInput::Representation(rep) = input else {
                return Err(Error::invalid("SOM requires a vector representation"));
            };
            let reduced = pca::pca_reduce(&rep.matrix, 0.95)?;
            som::train(&reduced.scores, p.grid_m, p.grid_n, p.epochs, seed)?
        }
    };
    debug_assert_eq!(positions.nrows(), m);
    if positions.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged);
    }
    Ok(Layout::from_positions(positions))
}

/// Places each document at the weighted average of its topics' positions.
/// Rows of `theta` must be non-negative; they are renormalized to sum to 1.
pub fn linear_combination_layout(
    topic_layout: &Array2<f64>,
    theta: &Array2<f64>,
) -> Result<Layout> {
    let k = topic_layout.nrows();
    if topic_layout.ncols() != 2 {
        return Err(Error::dim("topic layout must be K x 2"));
    }
    if theta.ncols() != k {
        return Err(Error::dim(format!(
            "theta has {} columns but the topic layout has {k} rows",
            theta.ncols()
        )));
    }
    let m = theta.nrows();
    let mut positions = Array2::zeros((m, 2));
    for (r, row) in theta.rows().into_iter().enumerate() {
        if row.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid(format!(
                "theta row {r} has negative entries"
            )));
        }
        let sum: f64 = row.sum();
        if sum <= 0.0 {
            return Err(Error::AllZeroThetaRow { row: r });
        }
        for (t, &w) in row.iter().enumerate() {
            let w = w / sum;
            positions[[r, 0]] += w * topic_layout[[t, 0]];
            positions[[r, 1]] += w * topic_layout[[t, 1]];
        }
    }
    Ok(Layout::from_positions(positions))
}
