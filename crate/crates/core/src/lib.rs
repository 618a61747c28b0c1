//! Gradient-boosted decision trees whose leaves predict a whole output vector.
//!
//! A single tree per round fits every output at once from second-order statistics.
//! Leaves may be dense, sparse (top-`k` columns per leaf) or use the full output
//! hessian. A one-tree-per-output baseline is included for comparison.
//!
//! The numeric core is generic over [`Scalar`]; the `*64` aliases fix it to `f64`.
//!
//! ```
//! use gbmo::{train, BoosterConfig, Matrix, RawDataset};
//!
//! let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
//! let y = Matrix::from_vec(4, 2, vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
//! let data = RawDataset::new(x, y).unwrap();
//! let config = BoosterConfig { min_samples: 1, max_rounds: 50, ..BoosterConfig::default() };
//! let fit = train(&data, None, &config).unwrap();
//! let pred = fit.ensemble.predict_raw(data.features()).unwrap();
//! assert!(pred.get(0, 1) > pred.get(3, 1));
//! ```

pub mod booster;
pub mod data;
pub mod error;
pub mod histogram;
pub mod linalg;
pub mod losses;
pub mod matrix;
pub mod model_io;
pub mod scalar;
pub mod split;
pub mod stats;
pub mod synth;
pub mod tree;

pub use booster::{
    default_max_leaves, train, BaseScore, BoostMode, BoosterConfig, Ensemble, RoundRecord, TrainOutput,
    TreeTarget,
};
pub use data::{
    load_csv, load_dataset, load_features_csv, read_binary_cache, write_binary_cache, write_csv, BinMapper, BinnedMatrix,
    LabelSpec, RawDataset,
};
pub use error::{Error, Result};
pub use losses::{evaluate_metric, GradHessBuffer, LossKind, Metric};
pub use matrix::Matrix;
pub use model_io::{load_model, read_model, save_model, write_model};
pub use scalar::Scalar;
pub use split::{SplitMode, SplitParams};
pub use stats::{confidence, Direction};
pub use synth::SynthKind;
pub use tree::{Leaf, Tree, TreeConfig, TreeNode};

/// Default scalar.
pub type Real = f64;
pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = RawDataset<f64>;
pub type Ensemble64 = Ensemble<f64>;
pub type BoosterConfig64 = BoosterConfig<f64>;
pub type TrainOutput64 = TrainOutput<f64>;
