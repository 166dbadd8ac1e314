//! Brownian motion skewed at countably many interfaces accumulating at 0:
//! classification, scale-function analysis and Monte Carlo simulation.

pub mod classifier;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod layered;
pub mod scalar;
pub mod scale;
pub mod series;
pub mod sim;
pub mod tail;

pub use classifier::{classify_all, ClassificationReport, ClassifyOptions, Tri};
pub use config::{validate, PartitionSpec, SequenceSpec, Side, SkewConfig};
pub use error::{ClassifyError, ConfigError, LayerError, ScaleError, SimError};
pub use layered::{build_layered, classify_layered, LayerConfig};
pub use scalar::Scalar;
pub use scale::{build_scale, ScaleFunction, ScaleOptions};
pub use series::{SeriesVerdict, Status};
pub use sim::{simulate_path, MCEstimate, PathEnsemble, Scheme, SimPlan};
pub use tail::{TailFamily, TailKind};

pub type SkewConfig64 = SkewConfig<f64>;
pub type SkewConfig32 = SkewConfig<f32>;
pub type SequenceSpec64 = SequenceSpec<f64>;
