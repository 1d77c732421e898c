use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("inverted rest element: face {face} has signed area {area:e}")]
    InvertedFace { face: usize, area: f64 },
    #[error("degenerate face {face}: |det| = {det:e}")]
    DegenerateFace { face: usize, det: f64 },
    #[error("non-manifold edge ({a}, {b}) shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("non-manifold boundary vertex {vertex}")]
    NonManifoldVertex { vertex: usize },
    #[error("invalid seam {index}: {msg}")]
    InvalidSeam { index: usize, msg: String },
    #[error("deformed pattern has inverted rest triangles: faces {0:?}")]
    InvertedAfterDeform(Vec<usize>),
    #[error("pattern vertex {vertex} lies outside the cage polygon of panel {panel}")]
    OutsideCage { vertex: usize, panel: usize },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("simulation diverged at step {step}: max speed {speed:.3e} m/s")]
    Diverged { step: usize, speed: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unmatched boundary labels: {0:?}")]
    UnmatchedLabels(Vec<String>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("topology mismatch: {0}")]
    Topology(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
