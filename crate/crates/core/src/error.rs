use std::path::PathBuf;

/// Errors produced by the occupancy toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid frame spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV file: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("mixed sample rates: expected {expected} Hz, {path} is {found} Hz")]
    MixedSampleRate {
        expected: u32,
        found: u32,
        path: PathBuf,
    },
    #[error("speaker {speaker} has {count} utterance(s), at least 2 are required")]
    TooFewUtterances { speaker: String, count: usize },
    #[error("file name {0} does not follow <speaker_id>_<utt>.wav")]
    BadFileName(String),

    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("{requested} speakers exceed the density cap of {cap} for this room")]
    DensityViolation { requested: usize, cap: usize },
    #[error("speaker distance {distance} m is not beyond r0 = {r0} m")]
    TooClose { distance: f64, r0: f64 },
    #[error("{utterances} utterances for {positions} placed speakers")]
    CountMismatch { utterances: usize, positions: usize },
    #[error("sample rate mismatch: {expected} Hz vs {found} Hz")]
    RateMismatch { expected: u32, found: u32 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("speaker {speaker} has {frames} training frames, {mixtures} mixtures need at least {needed}")]
    TooFewFrames {
        speaker: String,
        mixtures: usize,
        frames: usize,
        needed: usize,
    },
    #[error("samples have zero spread")]
    ZeroSpread,
    #[error("clip of {samples} samples is shorter than one frame of {frame} samples")]
    ClipTooShort { samples: usize, frame: usize },
    #[error("frame spec mismatch: calibration uses {calibration}, measurement uses {measurement}")]
    FrameSpecMismatch {
        calibration: String,
        measurement: String,
    },

    #[error("data is rank deficient: {0}")]
    RankDeficient(String),
    #[error("discriminant analysis needs at least two classes")]
    SingleClass,
    #[error("requested {requested} discriminant dimensions, at most {max} are possible")]
    LdaDimension { requested: usize, max: usize },
    #[error("no feature vectors to score")]
    NoFeatures,
    #[error("all segments are shorter than {min_frames} feature frames")]
    AllSegmentsTooShort { min_frames: usize },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported document: {0}")]
    Document(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
