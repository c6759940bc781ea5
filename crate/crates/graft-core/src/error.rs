//! Error types shared across the pipeline.

use std::fmt;

/// A source position (1-based line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveKind {
    UnknownKind,
    UnknownField,
    UnknownTraversal,
    UnknownPure,
    UnknownName,
    IllegalChildWrite,
    DuplicateDecl,
    SignatureMismatch,
    AmbiguousLub,
    AmbiguousField,
    AbstractNew,
    TypeError,
    BadCast,
    OverrideMissingVirtual,
    MissingOverrideMarker,
    BadEntry,
    BadFuse,
    BadStub,
}

impl fmt::Display for ResolveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResolveKind::UnknownKind => "UnknownKind",
            ResolveKind::UnknownField => "UnknownField",
            ResolveKind::UnknownTraversal => "UnknownTraversal",
            ResolveKind::UnknownPure => "UnknownPure",
            ResolveKind::UnknownName => "UnknownName",
            ResolveKind::IllegalChildWrite => "IllegalChildWrite",
            ResolveKind::DuplicateDecl => "DuplicateDecl",
            ResolveKind::SignatureMismatch => "SignatureMismatch",
            ResolveKind::AmbiguousLub => "AmbiguousLub",
            ResolveKind::AmbiguousField => "AmbiguousField",
            ResolveKind::AbstractNew => "AbstractNew",
            ResolveKind::TypeError => "TypeError",
            ResolveKind::BadCast => "BadCast",
            ResolveKind::OverrideMissingVirtual => "OverrideMissingVirtual",
            ResolveKind::MissingOverrideMarker => "MissingOverrideMarker",
            ResolveKind::BadEntry => "BadEntry",
            ResolveKind::BadFuse => "BadFuse",
            ResolveKind::BadStub => "BadStub",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuntimeKind {
    CastFailed,
    MissingChild,
    DanglingNode,
    DivisionByZero,
    TypeError,
    UnboundInput,
    UnboundLocal,
    FlagOverflow,
}

impl fmt::Display for RuntimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuntimeKind::CastFailed => "CastFailed",
            RuntimeKind::MissingChild => "MissingChild",
            RuntimeKind::DanglingNode => "DanglingNode",
            RuntimeKind::DivisionByZero => "DivisionByZero",
            RuntimeKind::TypeError => "TypeError",
            RuntimeKind::UnboundInput => "UnboundInput",
            RuntimeKind::UnboundLocal => "UnboundLocal",
            RuntimeKind::FlagOverflow => "FlagOverflow",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeError {
    pub kind: RuntimeKind,
    pub span: Span,
    /// Child-field path from the binding root to the node under execution.
    pub node_path: String,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    Syntax {
        span: Span,
        expected: String,
        found: String,
    },
    Resolve {
        span: Span,
        kind: ResolveKind,
        msg: String,
    },
    CyclicHierarchy {
        kinds: Vec<String>,
    },
    NoConcreteTarget {
        kind: String,
        span: Span,
    },
    NoCommonSupertype {
        kinds: Vec<String>,
    },
    KindMismatch {
        expected: String,
        found: String,
        context: String,
    },
    Runtime(RuntimeError),
    TreeSpec {
        msg: String,
    },
    Internal {
        msg: String,
    },
}

impl Error {
    pub fn resolve(span: Span, kind: ResolveKind, msg: impl Into<String>) -> Self {
        Error::Resolve {
            span,
            kind,
            msg: msg.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal { msg: msg.into() }
    }

    /// Short machine-readable tag for this error, used by the CLI JSON output.
    pub fn tag(&self) -> String {
        match self {
            Error::Syntax { .. } => "SyntaxError".to_string(),
            Error::Resolve { kind, .. } => format!("ResolutionError.{kind}"),
            Error::CyclicHierarchy { .. } => "CyclicHierarchy".to_string(),
            Error::NoConcreteTarget { .. } => "NoConcreteTarget".to_string(),
            Error::NoCommonSupertype { .. } => "NoCommonSupertype".to_string(),
            Error::KindMismatch { .. } => "KindMismatch".to_string(),
            Error::Runtime(e) => format!("RuntimeError.{}", e.kind),
            Error::TreeSpec { .. } => "TreeSpecError".to_string(),
            Error::Internal { .. } => "InternalError".to_string(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Syntax {
                span,
                expected,
                found,
            } => write!(f, "{span}: syntax error: expected {expected}, found {found}"),
            Error::Resolve { span, kind, msg } => write!(f, "{span}: {kind}: {msg}"),
            Error::CyclicHierarchy { kinds } => {
                write!(f, "cyclic node-kind hierarchy involving {}", kinds.join(", "))
            }
            Error::NoConcreteTarget { kind, span } => {
                write!(f, "{span}: no concrete target for receiver kind {kind}")
            }
            Error::NoCommonSupertype { kinds } => {
                write!(f, "no common supertype for {}", kinds.join(", "))
            }
            Error::KindMismatch {
                expected,
                found,
                context,
            } => write!(f, "kind mismatch in {context}: expected {expected}, found {found}"),
            Error::Runtime(e) => write!(
                f,
                "{}: runtime error {} at node [{}]: {}",
                e.span, e.kind, e.node_path, e.msg
            ),
            Error::TreeSpec { msg } => write!(f, "tree spec error: {msg}"),
            Error::Internal { msg } => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
