use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    /// A field failed validation; `path` is the dotted location in the config document.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    #[error("coincident points: UAV and GN share a position")]
    CoincidentPoints,

    #[error("coordinate {0:?} lies outside the site")]
    OutOfSite([f64; 3]),

    #[error("distance {0} m is below the 1 m reference distance")]
    BelowReferenceDistance(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient antennas: UAV has {available}, co-served GNs need {required}")]
    InsufficientAntennas { available: usize, required: usize },

    #[error("stacked channel is rank deficient")]
    RankDeficient,

    #[error("interference-plus-noise matrix is singular")]
    SingularInterference,

    #[error("zero throughput: harvest time is unbounded")]
    ZeroRate,

    #[error("cannot cluster {points} points into {clusters} clusters")]
    TooManyClusters { clusters: usize, points: usize },

    #[error("degenerate trajectory of zero duration")]
    ZeroDuration,

    #[error("infeasible edge: {0}")]
    InfeasibleEdge(String),

    #[error("P_avg = {p_avg:.2} W does not exceed the hover floor {floor:.2} W")]
    BelowHoverFloor { p_avg: f64, floor: f64 },

    #[error("no trajectory met the power budget within {outer} dual iterations (best {best_power:.2} W > {p_avg:.2} W)")]
    NoFeasibleTrajectory { outer: usize, best_power: f64, p_avg: f64 },

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid { path: path.into(), message: message.into() }
    }
}
