use std::path::PathBuf;

/// Every failure the engine can surface. `kind()` gives the stable tag used
/// in `error: <kind>: <detail>` lines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {detail}", path.display())]
    Load { path: PathBuf, detail: String },

    #[error("orphan documents: {}", format_orphans(.orphans))]
    Fusion { orphans: Vec<(String, String)> },

    #[error("ambiguous owner for document {doc_id}: {domain}/{entity} matches {candidates:?}")]
    AmbiguousOwner {
        domain: String,
        entity: String,
        doc_id: String,
        candidates: Vec<String>,
    },

    #[error("domain not found: {0}")]
    DomainNotFound(String),

    #[error("{0}")]
    Config(String),

    #[error("document {domain}/{entity_id}/{doc_id} has no candidate tokens")]
    NoCandidates {
        domain: String,
        entity_id: String,
        doc_id: String,
    },

    #[error("at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{0}")]
    Label(String),

    #[error("invalid belief state: {0}")]
    Belief(String),

    #[error("prediction/gold lengths differ: {preds} vs {golds}")]
    Alignment { preds: usize, golds: usize },

    #[error("{0}")]
    Query(String),

    #[error("topic is empty")]
    EmptyTopic,

    #[error("{0}")]
    Oracle(String),

    #[error("{0}")]
    Template(String),

    #[error("{0}")]
    Corruption(String),

    #[error("{0}")]
    Metric(String),

    #[error("{0}")]
    Goal(String),

    #[error("{0}")]
    Generation(String),

    #[error("dialog {dialog}, turn {turn}: {source}")]
    AtTurn {
        dialog: String,
        turn: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_orphans(orphans: &[(String, String)]) -> String {
    orphans
        .iter()
        .map(|(d, e)| format!("({d},{e})"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Load { .. } => "load",
            Error::Fusion { .. } | Error::AmbiguousOwner { .. } => "fusion",
            Error::DomainNotFound(_) => "domain-not-found",
            Error::Config(_) => "config",
            Error::NoCandidates { .. } => "indexing",
            Error::Parse { .. } => "parse",
            Error::Label(_) => "label",
            Error::Belief(_) => "belief",
            Error::Alignment { .. } => "alignment",
            Error::Query(_) => "query",
            Error::EmptyTopic => "empty-topic",
            Error::Oracle(_) => "oracle",
            Error::Template(_) => "template",
            Error::Corruption(_) => "corruption",
            Error::Metric(_) => "metric",
            Error::Goal(_) => "goal",
            Error::Generation(_) => "generation",
            Error::AtTurn { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn at_turn(self, dialog: &str, turn: usize) -> Self {
        match self {
            e @ Error::AtTurn { .. } => e,
            e => Error::AtTurn {
                dialog: dialog.to_string(),
                turn,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
