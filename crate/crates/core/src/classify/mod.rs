//! One-vs-one multi-class SVM: `N(N−1)/2` pairwise linear learners whose
//! ±1 outcomes are decoded against the class ID table by minimum distance.

mod idtable;
mod model;
mod svm;

pub use idtable::{build_id_table, decode, decode_with, DecodeMetric, IdTable};
pub use model::{predict, predict_with, train_multiclass, LabeledFeatures, MsvmModel, Prediction};
pub use svm::{train_binary, BinarySvm, MAX_EPOCHS, TOLERANCE};
