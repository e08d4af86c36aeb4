use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands disagree on a dimension.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// A value or structure violates a documented invariant.
    Invalid(String),
    /// Input contains NaN or infinity.
    NonFinite(&'static str),
    /// Genes required by a recipe are absent from the query matrix.
    MissingGenes(Vec<String>),
    /// Cells in the matrix have no entry in the label table.
    UnlabeledCells(Vec<String>),
    /// A class has fewer members than an operation needs.
    ClassTooSmall {
        label: String,
        count: usize,
        required: usize,
    },
    /// Gene intersection across datasets is empty.
    EmptyIntersection,
    /// A positive-definite factorization failed.
    NotPositiveDefinite,
    /// A forward pass produced a non-finite activation.
    NonFiniteActivation { layer: usize },
    /// Training loss diverged.
    NonFiniteLoss { epoch: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[String]) -> fmt::Result {
    const SHOWN: usize = 20;
    for (i, item) in items.iter().take(SHOWN).enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        f.write_str(item)?;
    }
    if items.len() > SHOWN {
        write!(f, ",... ({} total)", items.len())?;
    }
    Ok(())
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                context,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {expected}, found {found}"
            ),
            Error::Invalid(msg) => f.write_str(msg),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::MissingGenes(genes) => {
                f.write_str("missing genes: ")?;
                write_list(f, genes)
            }
            Error::UnlabeledCells(cells) => {
                f.write_str("unlabeled cells: ")?;
                write_list(f, cells)
            }
            Error::ClassTooSmall {
                label,
                count,
                required,
            } => write!(
                f,
                "class '{label}' has {count} cells, at least {required} required"
            ),
            Error::EmptyIntersection => f.write_str("gene intersection is empty"),
            Error::NotPositiveDefinite => f.write_str("matrix is not positive definite"),
            Error::NonFiniteActivation { layer } => {
                write!(f, "non-finite activation in layer {layer}")
            }
            Error::NonFiniteLoss { epoch } => write!(f, "loss became non-finite at epoch {epoch}"),
        }
    }
}

impl core::error::Error for Error {}
