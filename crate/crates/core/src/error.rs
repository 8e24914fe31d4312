use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster too narrow for column detection: {width} px (need >= {min})")]
    DegenerateRaster { width: u32, min: u32 },

    #[error("column [{x0}, {x1}) is not inside a raster of width {width}")]
    ColumnOutOfRaster { x0: i64, x1: i64, width: u32 },

    #[error("main-axis ad rects overlap: rows [{a0}, {a1}) and [{b0}, {b1})")]
    OverlappingAdRects { a0: i64, a1: i64, b0: i64, b1: i64 },

    #[error("AOI {aoi_id} overlaps {count} ad rects at IoU >= threshold")]
    AmbiguousAdMatch { aoi_id: String, count: usize },

    #[error("main-axis AOIs overlap: {a} and {b}")]
    OverlappingAois { a: String, b: String },

    #[error("expected {expected} flavor input, got {got}")]
    WrongFlavor { expected: &'static str, got: &'static str },

    #[error("planted cards overlap in layout: card {a} and card {b}")]
    OverlappingPlantedCards { a: usize, b: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("rules file: {0}")]
    Rules(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing meta.json in {0}")]
    MissingMeta(PathBuf),

    #[error("ingest {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
