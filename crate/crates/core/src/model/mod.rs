//! The support-graph integer program: objective weights, model constants,
//! variable and constraint construction, essential-term forcing, the cascade
//! extension, and MPS interchange.

mod build;
mod cascade;
mod ilp;
mod mps;

pub use build::{build_constraints, build_incidence_sets, build_model, build_variables, IncidenceSets};
pub use cascade::{add_essential_forcing, build_cascade_extension};
pub use ilp::{ConstraintTag, IlpProblem, LinearConstraint, Sense, VarId, VarKind, Variable};
pub use mps::{export_mps, import_mps, write_mps};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignmentConfig;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("constraint {constraint} references missing variable {var}")]
    DanglingVariable { constraint: usize, var: usize },
    #[error("duplicate variable name '{name}'")]
    DuplicateVariableName { name: String },
    #[error("variable '{name}' has zero weight and appears in no constraint")]
    UnusedVariable { name: String },
    #[error("essentiality threshold {xi} outside [0, 1]")]
    InvalidThreshold { xi: f64 },
    #[error("profile has {found} scores for {expected} constituents")]
    ProfileMismatch { expected: usize, found: usize },
    #[error("cascade thresholds must be strictly increasing and within [0, 1]")]
    BadCascadeThresholds,
    #[error("big-M {m} is not larger than the absolute weight sum {required}")]
    BigMTooSmall { m: f64, required: f64 },
    #[error("nothing to export")]
    NothingToExport,
    #[error("MPS line {line}: {message}")]
    MpsParse { line: usize, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Objective coefficients for every variable family. Pairwise alignment
/// variables take their edge score as-is except for the two cell-cell cases
/// listed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariableWeights {
    pub table_active: f64,
    pub row_active: f64,
    pub column_active: f64,
    pub header_active: f64,
    pub cell_active: f64,
    pub constituent_active: f64,
    pub choice_active: f64,
    /// Constant weight of a cross-table cell pair, replacing its raw score.
    pub cell_cell_inter: f64,
    /// Added to the raw score of a within-table cell pair.
    pub intra_table_adjust: f64,
    pub which_term_active: f64,
    pub which_term_aligned: f64,
}

impl Default for VariableWeights {
    fn default() -> Self {
        VariableWeights {
            table_active: 1.0,
            row_active: -1.0,
            column_active: 1.0,
            header_active: 0.3,
            cell_active: 0.0,
            constituent_active: 0.3,
            choice_active: 0.0,
            cell_cell_inter: 1.0,
            intra_table_adjust: -0.1,
            which_term_active: 1.5,
            which_term_aligned: 1.5,
        }
    }
}

/// Structural limits and coefficients of the constraint system. A few values
/// are carried for configurability but take no part in the default objective
/// or constraints (usage penalties, WhichTermMulBoost, MaxAlignmentsPerCell);
/// the weight table is the canonical source for the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConstants {
    pub max_tables_to_chain: usize,
    pub q_cons_coalign_max_dist: usize,
    pub which_term_span: usize,
    pub which_term_mul_boost: f64,
    pub min_alignment_which_term: f64,
    pub table_usage_penalty: f64,
    pub row_usage_penalty: f64,
    pub inter_table_alignment_penalty: f64,
    pub max_alignments_per_q_cons: usize,
    pub max_alignments_per_cell: usize,
    pub relation_match_coeff: f64,
    pub empty_relation_match_coeff: f64,
    pub no_relation_match_coeff: f64,
    pub max_rows_per_table: usize,
    pub min_active_q_cons: usize,
    pub max_active_column_choice_alignments: usize,
    pub max_active_choice_column_vars: usize,
    pub min_active_cells_per_row: usize,
    pub max_active_table_choice_alignments: usize,
}

impl Default for ModelConstants {
    fn default() -> Self {
        ModelConstants {
            max_tables_to_chain: 4,
            q_cons_coalign_max_dist: 4,
            which_term_span: 2,
            which_term_mul_boost: 1.0,
            min_alignment_which_term: 0.6,
            table_usage_penalty: 3.0,
            row_usage_penalty: 1.0,
            inter_table_alignment_penalty: 0.1,
            max_alignments_per_q_cons: 2,
            max_alignments_per_cell: 2,
            relation_match_coeff: 0.2,
            empty_relation_match_coeff: 0.0,
            no_relation_match_coeff: -5.0,
            max_rows_per_table: 4,
            min_active_q_cons: 1,
            max_active_column_choice_alignments: 1,
            max_active_choice_column_vars: 2,
            min_active_cells_per_row: 2,
            max_active_table_choice_alignments: 1,
        }
    }
}

/// Everything the model builder needs besides the instance itself.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub weights: VariableWeights,
    pub constants: ModelConstants,
    pub alignment: AlignmentConfig,
    /// Column-relation matching is opt-in: tables must declare relations and
    /// this flag must be set.
    pub enable_relation_matches: bool,
}
