//! Coupling and decoupling of linear structural components in state-space
//! form with Lagrange multipliers, plus the tools around it: model
//! construction, coupling-form transformations, minimal-order reduction, and
//! independent reference methods for cross-checking.
//!
//! Frequency sweeps run on the rayon pool when the `parallel` feature is
//! enabled (the default); see [`par::Execution`].

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod error;
pub mod example;
pub mod factory;
pub mod forms;
pub mod interface;
pub mod io;
pub mod linalg;
pub mod lmsss;
pub mod model;
pub mod par;
pub mod reference;

pub use compare::{compare_frf, ComparisonResult};
pub use error::{Error, Result};
pub use factory::{
    as_acceleration, build_model, frequency_grid, negative_form, partition_interface_first,
    perturb_frf, reorder_io, synth_frf, synth_frf_with, to_acceleration, to_modal_form,
    to_velocity, IoPermutation, NoiseSpec,
};
pub use forms::{
    ncf_transform, reduce_minimal, sacf_transform, ucf_transform, CouplingFormTransform, FormKind,
    TransformReport,
};
pub use interface::{
    boolean_pinv, build_mapping, build_state_reduction, InterfaceMap, InterfacePairing, Pair,
    StateReductionMap,
};
pub use lmsss::{
    couple_accel, couple_disp, couple_vel, decouple, decouple_minimal, interface_forces_frf,
    retain_unique_dofs, CouplingProblem,
};
pub use model::{
    validate_model, Direction, DofKind, DofLabel, FrfMatrix, MechanicalSystem, OutputKind,
    ResponseKind, StateSpaceModel, StateTag,
};
pub use par::Execution;
pub use reference::{
    classical_couple, dynamic_stiffness, lmfbs_couple, lmfbs_decouple, retain_unique_frf,
    sjovall_couple, ClassicalCouplingMatrix,
};
