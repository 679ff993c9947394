//! Contamination and decontamination matrices for weakly supervised
//! classification, corrected losses, exact risk rewrites on finite
//! distributions, weak-data sampling and corrected-loss ERM.

pub mod datagen;
pub mod decontam;
pub mod error;
pub mod joint;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod risk;
pub mod scenarios;
pub mod train;
pub mod verify;

pub use datagen::{dataset_from_json, dataset_to_json, sample_weak_dataset, Channel, Item, SampleSizes, WeakDataset};
pub use decontam::{decontaminate, DecontaminationResult, Method, MethodTag};
pub use error::{Error, Result};
pub use joint::{marginals, FiniteJoint, Marginals};
pub use linalg::Matrix;
pub use loss::LossSpec;
pub use model::{init_model, LinearModel};
pub use risk::{classification_risk, empirical_risk, rewritten_risk, EmpiricalObjective};
pub use scenarios::{observed_distribution, ContaminationModel, Family, ScenarioSpec};
pub use train::{train_erm, TrainConfig, TrainOutcome};
pub use verify::{verify_all, CheckReport, Report, VerifyConfig};
