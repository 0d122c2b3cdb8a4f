pub mod classify;
pub mod expr;
pub mod forms;
pub mod geometry;
pub mod jet;
pub mod operators;
pub mod samples;
pub mod spectral;
pub mod theorems;

pub use classify::{classify, ClassificationReport, FormClass, SampleSet};
pub use forms::{ExprForm, FormField, FourierForm, MultiIndex};
pub use geometry::{LocalGeometry, MetricChart};
pub use operators::{Operator, OperatorResult, Route};
pub use spectral::{compute_numbers, SpectralNumbers};
pub use theorems::{verify_identity, IdentityCheck, IdentityId};
