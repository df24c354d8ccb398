//! Decision-focused training of action-conditioned predictors.
//!
//! The crate trains a predictor `y_hat = h(x, z; theta)` either on the joint
//! weighted objective (predictive loss times `omega` plus model-implied task
//! cost times `gamma`) or on the predictive loss alone, and compares the
//! resulting decisions against a Monte Carlo oracle on synthetic worlds.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod objective;
pub mod predictor;
pub mod problem;
pub mod synthetic;
pub mod training;

pub use config::ExperimentConfig;
pub use dataset::{split_dataset, Dataset, LabeledSample};
pub use error::{Error, Result};
pub use evaluation::{
    compare_methods, evaluate_decision, CompareOptions, DecisionEvaluation, DecisionReport, Method,
    Scenario,
};
pub use grid::{make_grid, ActionGrid};
pub use objective::{
    action_distribution, argmin_profile, empirical_profile, gamma_weight, joint_objective,
    model_profile, omega_weight, AnchorActions, CostProfile, JointObjectiveValue, ProfileSource,
    WeightConfig, WeightPair,
};
pub use predictor::{
    init_params, loss_and_grad, task_grad, Activation, Architecture, PredictorParams,
    WeightedExample,
};
pub use problem::{PredictiveLoss, Problem, TaskCost};
pub use synthetic::{
    gen_dataset, newsvendor_cost, oracle_action, oracle_expected_cost, pricing_cost, CostModel,
    LoggingPolicy, TrueModel,
};
pub use training::{
    check_termination, sgd_step, simpo_fit, two_stage_fit, HistoryRow, TrainConfig, TrainResult,
    TrainState,
};
