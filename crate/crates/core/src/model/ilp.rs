//! The 0/1 integer linear program container shared by the model builder and
//! the solver: named binary variables with objective weights, linear
//! constraints with provenance tags, canonical variable order by insertion.

use serde::{Deserialize, Serialize};

use crate::align::{EdgeKind, ElementRef};

use super::ModelError;

/// Index into [`IlpProblem::vars`]; doubles as the canonical position for
/// lexicographic tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// What a variable stands for in the support-graph model. Solver-only
/// problems may leave this out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "var", rename_all = "snake_case")]
pub enum VarKind {
    Table { table: usize },
    Row { table: usize, row: usize },
    Column { table: usize, col: usize },
    Header { table: usize, col: usize },
    Cell { table: usize, row: usize, col: usize },
    Constituent { index: usize },
    Choice { index: usize },
    /// Pairwise alignment variable from a candidate edge. `raw_weight` is the
    /// lexical score before any objective adjustment.
    Pair { kind: EdgeKind, a: ElementRef, b: ElementRef, raw_weight: f64 },
    /// Column k of a table aligned with answer option `choice`.
    ColumnChoice { table: usize, col: usize, choice: usize },
    /// A table aligned with answer option `choice`.
    TableChoice { table: usize, choice: usize },
    WhichTermActive,
    WhichTermAligned,
    /// Reward for one cell aligning to two nearby constituents l < l2.
    ProximityBoost { table: usize, row: usize, col: usize, l: usize, l2: usize },
    /// Declared relation between columns col_a/col_b matched against the
    /// constituent pair l/l2.
    RelationMatch { table: usize, col_a: usize, col_b: usize, l: usize, l2: usize },
    /// Stage indicator of the cascade extension.
    CascadeStage { stage: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    /// Objective coefficient; the problem always maximizes.
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<VarKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Where a constraint row comes from. The model builder only emits the named
/// variants; `Custom` exists for hand-built problems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintTag {
    RowActiveForCellEdge,
    ActiveRowNeedsEdge,
    HeaderActiveForEdge,
    ActiveHeaderNeedsEdge,
    ColumnActiveForEdge,
    ActiveColumnNeedsEdge,
    TableActiveForEdge,
    ActiveTableNeedsEdge,
    ChoiceActiveForEdge,
    ActiveChoiceNeedsEdge,
    ConstituentActiveForEdge,
    ActiveConstituentNeedsEdge,
    ChooseOnlySingleOption,
    MaxTablesToChain,
    MaxRowsPerTable,
    MinActiveQCons,
    MinActiveCellAggrAlignment,
    MinActiveTitleAggrAlignment,
    ActiveColumnNeedsActiveCell,
    MaxActiveColumnChoiceAlignments,
    ActiveColumnImpliesTable,
    ActiveTableNeedsActiveColumn,
    TableChoiceNeedsNonChoiceAlignment,
    MaxActiveTableChoiceAlignments,
    CellChoiceActivatesColumnChoice,
    ColumnChoiceNeedsCellChoice,
    MaxActiveChoiceColumnVars,
    ColumnChoiceImpliesTableChoice,
    TableChoiceNeedsColumnChoice,
    WhichTermActive,
    WhichTermAligned,
    MaxAlignmentsPerQCons,
    QConsCoalignMaxDist,
    CellProximityBoost,
    RelationMatchImpliesColumns,
    ActiveColumnNeedsRelationMatch,
    RelationMatchPosition,
    MinActiveCellsPerRow,
    ActiveRowNeedsNonChoiceAlignment,
    ActiveRowNeedsNonQuestionAlignment,
    ActiveRowPairSignature,
    ActiveRowPairMustDiffer,
    InterTableChainNeedsAlignment,
    EssentialTermForcing,
    CascadeStageLink,
    ChoiceDisabled,
    ChoiceForced,
    Custom(String),
}

impl ConstraintTag {
    pub fn name(&self) -> &str {
        use ConstraintTag::*;
        match self {
            RowActiveForCellEdge => "RowActiveForCellEdge",
            ActiveRowNeedsEdge => "ActiveRowNeedsEdge",
            HeaderActiveForEdge => "HeaderActiveForEdge",
            ActiveHeaderNeedsEdge => "ActiveHeaderNeedsEdge",
            ColumnActiveForEdge => "ColumnActiveForEdge",
            ActiveColumnNeedsEdge => "ActiveColumnNeedsEdge",
            TableActiveForEdge => "TableActiveForEdge",
            ActiveTableNeedsEdge => "ActiveTableNeedsEdge",
            ChoiceActiveForEdge => "ChoiceActiveForEdge",
            ActiveChoiceNeedsEdge => "ActiveChoiceNeedsEdge",
            ConstituentActiveForEdge => "ConstituentActiveForEdge",
            ActiveConstituentNeedsEdge => "ActiveConstituentNeedsEdge",
            ChooseOnlySingleOption => "ChooseOnlySingleOption",
            MaxTablesToChain => "MaxTablesToChain",
            MaxRowsPerTable => "MaxRowsPerTable",
            MinActiveQCons => "MinActiveQCons",
            MinActiveCellAggrAlignment => "MinActiveCellAggrAlignment",
            MinActiveTitleAggrAlignment => "MinActiveTitleAggrAlignment",
            ActiveColumnNeedsActiveCell => "ActiveColumnNeedsActiveCell",
            MaxActiveColumnChoiceAlignments => "MaxActiveColumnChoiceAlignments",
            ActiveColumnImpliesTable => "ActiveColumnImpliesTable",
            ActiveTableNeedsActiveColumn => "ActiveTableNeedsActiveColumn",
            TableChoiceNeedsNonChoiceAlignment => "TableChoiceNeedsNonChoiceAlignment",
            MaxActiveTableChoiceAlignments => "MaxActiveTableChoiceAlignments",
            CellChoiceActivatesColumnChoice => "CellChoiceActivatesColumnChoice",
            ColumnChoiceNeedsCellChoice => "ColumnChoiceNeedsCellChoice",
            MaxActiveChoiceColumnVars => "MaxActiveChoiceColumnVars",
            ColumnChoiceImpliesTableChoice => "ColumnChoiceImpliesTableChoice",
            TableChoiceNeedsColumnChoice => "TableChoiceNeedsColumnChoice",
            WhichTermActive => "WhichTermActive",
            WhichTermAligned => "WhichTermAligned",
            MaxAlignmentsPerQCons => "MaxAlignmentsPerQCons",
            QConsCoalignMaxDist => "QConsCoalignMaxDist",
            CellProximityBoost => "CellProximityBoost",
            RelationMatchImpliesColumns => "RelationMatchImpliesColumns",
            ActiveColumnNeedsRelationMatch => "ActiveColumnNeedsRelationMatch",
            RelationMatchPosition => "RelationMatchPosition",
            MinActiveCellsPerRow => "MinActiveCellsPerRow",
            ActiveRowNeedsNonChoiceAlignment => "ActiveRowNeedsNonChoiceAlignment",
            ActiveRowNeedsNonQuestionAlignment => "ActiveRowNeedsNonQuestionAlignment",
            ActiveRowPairSignature => "ActiveRowPairSignature",
            ActiveRowPairMustDiffer => "ActiveRowPairMustDiffer",
            InterTableChainNeedsAlignment => "InterTableChainNeedsAlignment",
            EssentialTermForcing => "EssentialTermForcing",
            CascadeStageLink => "CascadeStageLink",
            ChoiceDisabled => "ChoiceDisabled",
            ChoiceForced => "ChoiceForced",
            Custom(s) => s,
        }
    }

    /// Inverse of [`ConstraintTag::name`]; unknown names become `Custom`.
    pub fn from_name(name: &str) -> ConstraintTag {
        use ConstraintTag::*;
        for tag in [
            RowActiveForCellEdge, ActiveRowNeedsEdge, HeaderActiveForEdge,
            ActiveHeaderNeedsEdge, ColumnActiveForEdge, ActiveColumnNeedsEdge,
            TableActiveForEdge, ActiveTableNeedsEdge, ChoiceActiveForEdge,
            ActiveChoiceNeedsEdge, ConstituentActiveForEdge, ActiveConstituentNeedsEdge,
            ChooseOnlySingleOption, MaxTablesToChain, MaxRowsPerTable, MinActiveQCons,
            MinActiveCellAggrAlignment, MinActiveTitleAggrAlignment,
            ActiveColumnNeedsActiveCell, MaxActiveColumnChoiceAlignments,
            ActiveColumnImpliesTable, ActiveTableNeedsActiveColumn,
            TableChoiceNeedsNonChoiceAlignment, MaxActiveTableChoiceAlignments,
            CellChoiceActivatesColumnChoice, ColumnChoiceNeedsCellChoice,
            MaxActiveChoiceColumnVars, ColumnChoiceImpliesTableChoice,
            TableChoiceNeedsColumnChoice, WhichTermActive, WhichTermAligned,
            MaxAlignmentsPerQCons, QConsCoalignMaxDist, CellProximityBoost,
            RelationMatchImpliesColumns, ActiveColumnNeedsRelationMatch,
            RelationMatchPosition, MinActiveCellsPerRow, ActiveRowNeedsNonChoiceAlignment,
            ActiveRowNeedsNonQuestionAlignment, ActiveRowPairSignature,
            ActiveRowPairMustDiffer, InterTableChainNeedsAlignment, EssentialTermForcing,
            CascadeStageLink, ChoiceDisabled, ChoiceForced,
        ] {
            if tag.name() == name {
                return tag;
            }
        }
        Custom(name.to_string())
    }
}

impl std::fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `sum(terms) sense rhs`. Empty `terms` means a constant left-hand side of
/// zero, which can encode a deliberately infeasible row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub tag: ConstraintTag,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn lhs_value(&self, assignment: &[bool]) -> f64 {
        self.terms
            .iter()
            .map(|&(VarId(v), c)| if assignment[v] { c } else { 0.0 })
            .sum()
    }

    pub fn satisfied(&self, assignment: &[bool], tol: f64) -> bool {
        let lhs = self.lhs_value(assignment);
        match self.sense {
            Sense::Le => lhs <= self.rhs + tol,
            Sense::Ge => lhs >= self.rhs - tol,
            Sense::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

/// A 0/1 maximization problem. Variables keep insertion order; that order is
/// the canonical order for tie-breaking and serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlpProblem {
    pub name: String,
    pub vars: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
}

impl IlpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        IlpProblem { name: name.into(), vars: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        weight: f64,
        kind: Option<VarKind>,
    ) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(Variable { name: name.into(), weight, kind });
        id
    }

    pub fn add_constraint(
        &mut self,
        tag: ConstraintTag,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(LinearConstraint { tag, terms, sense, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Objective of a 0/1 assignment, summed in canonical variable order so
    /// equal assignments give bitwise-equal objectives everywhere.
    pub fn objective_value(&self, assignment: &[bool]) -> f64 {
        self.vars
            .iter()
            .zip(assignment)
            .map(|(v, &on)| if on { v.weight } else { 0.0 })
            .sum()
    }

    /// Indices of constraints the assignment violates at tolerance `tol`.
    pub fn violations(&self, assignment: &[bool], tol: f64) -> Vec<usize> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.satisfied(assignment, tol))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_feasible(&self, assignment: &[bool], tol: f64) -> bool {
        self.constraints.iter().all(|c| c.satisfied(assignment, tol))
    }

    /// First variable of the given kind, if any.
    pub fn var_of_kind(&self, want: &VarKind) -> Option<VarId> {
        self.vars
            .iter()
            .position(|v| v.kind.as_ref() == Some(want))
            .map(VarId)
    }

    /// Structural checks: constraint terms reference real variables, names
    /// are unique, and every variable either carries objective weight or
    /// appears in at least one constraint.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.vars.len();
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.vars {
            if !seen.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateVariableName { name: v.name.clone() });
            }
        }
        let mut referenced = vec![false; n];
        for (ci, c) in self.constraints.iter().enumerate() {
            for &(VarId(v), _) in &c.terms {
                if v >= n {
                    return Err(ModelError::DanglingVariable { constraint: ci, var: v });
                }
                referenced[v] = true;
            }
        }
        for (i, v) in self.vars.iter().enumerate() {
            if v.weight == 0.0 && !referenced[i] {
                return Err(ModelError::UnusedVariable { name: v.name.clone() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> IlpProblem {
        let mut p = IlpProblem::new("toy");
        let a = p.add_var("a", 3.0, None);
        let b = p.add_var("b", 2.0, None);
        p.add_constraint(
            ConstraintTag::Custom("cap".into()),
            vec![(a, 1.0), (b, 1.0)],
            Sense::Le,
            1.0,
        );
        p
    }

    #[test]
    fn objective_and_feasibility() {
        let p = toy();
        assert_eq!(p.objective_value(&[true, false]), 3.0);
        assert_eq!(p.objective_value(&[true, true]), 5.0);
        assert!(p.is_feasible(&[true, false], 1e-6));
        assert!(!p.is_feasible(&[true, true], 1e-6));
        assert_eq!(p.violations(&[true, true], 1e-6), vec![0]);
    }

    #[test]
    fn validate_catches_dangling_and_unused() {
        let mut p = toy();
        p.add_constraint(ConstraintTag::Custom("bad".into()), vec![(VarId(9), 1.0)], Sense::Le, 1.0);
        assert!(matches!(p.validate(), Err(ModelError::DanglingVariable { constraint: 1, var: 9 })));

        let mut q = toy();
        q.add_var("idle", 0.0, None);
        assert!(matches!(q.validate(), Err(ModelError::UnusedVariable { .. })));
        assert!(toy().validate().is_ok());
    }

    #[test]
    fn empty_terms_encode_constant_rows() {
        let mut p = IlpProblem::new("infeasible");
        p.add_var("x", 1.0, None);
        p.add_constraint(ConstraintTag::EssentialTermForcing, vec![], Sense::Eq, 1.0);
        assert!(!p.is_feasible(&[false], 1e-6));
        assert!(!p.is_feasible(&[true], 1e-6));
    }

    #[test]
    fn tag_names_round_trip() {
        for tag in [
            ConstraintTag::ChooseOnlySingleOption,
            ConstraintTag::MaxTablesToChain,
            ConstraintTag::CellProximityBoost,
            ConstraintTag::Custom("anything".into()),
        ] {
            assert_eq!(ConstraintTag::from_name(tag.name()), tag);
        }
    }
}
