//! Design of experiments: orthogonal arrays, level-to-value mapping and
//! range analysis.

pub mod array;
mod galois;
pub mod levels;
pub mod range;

pub use array::{build_orthogonal_array, OrthogonalArray};
pub use levels::{level_value, map_levels_to_values, TestCase};
pub use range::{range_analysis, RangeAnalysisResult};
