use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::train::TrainReport;

/// Errors raised by `saea-core`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Shapes of two operands did not agree.
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        /// Where the mismatch was detected.
        context: &'static str,
        /// Expected shape, rendered.
        expected: String,
        /// Actual shape, rendered.
        found: String,
    },

    /// Structural masks exist only for orders 1 and 2.
    #[error("unsupported mask order {0} (expected 1 or 2)")]
    UnsupportedOrder(usize),

    /// Observation rows holding NaN or infinite values.
    #[error("non-finite values in rows {rows:?}")]
    NonFinite {
        /// Zero-based row indices.
        rows: Vec<usize>,
    },

    /// A chronological split produced an empty segment.
    #[error("split error: segment sizes (train {train}, val {val}, test {test})")]
    Split {
        /// Train rows.
        train: usize,
        /// Validation rows.
        val: usize,
        /// Test rows.
        test: usize,
    },

    /// Not enough rows to build a single window.
    #[error("window error: need at least {needed} rows, have {available}")]
    Window {
        /// Minimum number of rows.
        needed: usize,
        /// Rows in the frame.
        available: usize,
    },

    /// A VAR lag index beyond the error model's order.
    #[error("lag {lag} out of range for VAR order {order}")]
    LagOutOfRange {
        /// Requested lag (zero based).
        lag: usize,
        /// VAR order of the model.
        order: usize,
    },

    /// Inconsistent model, regularizer or training settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A metric has no defined value for the input.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Training produced a non-finite loss. Parameters were rolled back to
    /// the last good checkpoint; the partial report is attached.
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged {
        /// Epoch (zero based) in which the loss became non-finite.
        epoch: usize,
        /// Optimizer step within that epoch.
        step: usize,
        /// Report for the completed epochs.
        report: Box<TrainReport>,
    },

    /// A synthetic data configuration was rejected.
    #[error("rejected synthetic config: {0}")]
    RejectedConfig(String),
}

/// Result alias for this crate.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape_err(
    context: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Error {
    Error::Shape {
        context,
        expected: alloc::format!("{}x{}", expected.0, expected.1),
        found: alloc::format!("{}x{}", found.0, found.1),
    }
}
