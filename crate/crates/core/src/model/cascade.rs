//! Essential-term forcing and its single-program big-M encoding. Both
//! functions are compositional: they clone the base program and append, so
//! the base stays reusable across stages.

use crate::kb::QuestionInstance;

use super::ilp::{ConstraintTag, IlpProblem, Sense, VarId, VarKind};
use super::ModelError;

/// Indices of constituents whose essentiality score strictly exceeds `xi`.
pub fn omega(scores: &[f64], xi: f64) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > xi)
        .map(|(l, _)| l)
        .collect()
}

fn check_profile(question: &QuestionInstance, scores: &[f64]) -> Result<(), ModelError> {
    if scores.len() != question.constituents.len() {
        return Err(ModelError::ProfileMismatch {
            expected: question.constituents.len(),
            found: scores.len(),
        });
    }
    Ok(())
}

/// Clones `base` and pins `x(q_l) = 1` for every constituent scoring above
/// `xi`. A forced constituent with no variable gets an unsatisfiable `0 = 1`
/// marker row instead, so the stage reads as infeasible rather than silently
/// dropping the requirement.
pub fn add_essential_forcing(
    base: &IlpProblem,
    question: &QuestionInstance,
    scores: &[f64],
    xi: f64,
) -> Result<IlpProblem, ModelError> {
    if !(0.0..=1.0).contains(&xi) || !xi.is_finite() {
        return Err(ModelError::InvalidThreshold { xi });
    }
    check_profile(question, scores)?;
    let mut p = base.clone();
    for l in omega(scores, xi) {
        let terms = match p.var_of_kind(&VarKind::Constituent { index: l }) {
            Some(v) => vec![(v, 1.0)],
            None => Vec::new(),
        };
        p.add_constraint(ConstraintTag::EssentialTermForcing, terms, Sense::Eq, 1.0);
    }
    Ok(p)
}

/// Clones `base` and adds one reward variable `z_j` per threshold, weighted
/// `big_m`, with `|omega_j| * z_j <= sum of x(q_l) over omega_j`. Members of
/// `omega_j` without a variable keep their coefficient in the count but
/// contribute nothing to the sum, pinning `z_j` to zero exactly when the
/// per-stage forcing of [`add_essential_forcing`] would be infeasible. The
/// default `big_m`, one more than the sum of absolute objective weights,
/// dominates any base-objective difference, so the optimum satisfies the
/// longest feasible suffix of stages and the count of active `z_j` recovers
/// the earliest feasible one.
pub fn build_cascade_extension(
    base: &IlpProblem,
    question: &QuestionInstance,
    scores: &[f64],
    thresholds: &[f64],
    big_m: Option<f64>,
) -> Result<IlpProblem, ModelError> {
    if thresholds.is_empty()
        || thresholds.windows(2).any(|w| w[0] >= w[1])
        || thresholds.iter().any(|x| !(0.0..=1.0).contains(x) || !x.is_finite())
    {
        return Err(ModelError::BadCascadeThresholds);
    }
    check_profile(question, scores)?;
    let required = 1.0 + base.vars.iter().map(|v| v.weight.abs()).sum::<f64>();
    let m = big_m.unwrap_or(required);
    if m < required {
        return Err(ModelError::BigMTooSmall { m, required });
    }
    let mut p = base.clone();
    for (j, &xi) in thresholds.iter().enumerate() {
        let members = omega(scores, xi);
        let z = p.add_var(format!("z_{j}"), m, Some(VarKind::CascadeStage { stage: j }));
        let mut terms: Vec<(VarId, f64)> = vec![(z, members.len() as f64)];
        for l in members {
            if let Some(v) = p.var_of_kind(&VarKind::Constituent { index: l }) {
                terms.push((v, -1.0));
            }
        }
        p.add_constraint(ConstraintTag::CascadeStageLink, terms, Sense::Le, 0.0);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Constituent;

    fn question(n: usize) -> QuestionInstance {
        QuestionInstance {
            id: "q".into(),
            text: "t".into(),
            constituents: (0..n)
                .map(|position| Constituent { text: format!("c{position}"), position })
                .collect(),
            options: vec!["x".into(), "y".into()],
            gold: None,
        }
    }

    fn base_with_cons(n: usize) -> IlpProblem {
        let mut p = IlpProblem::new("b");
        for l in 0..n {
            p.add_var(format!("xq{l}"), 0.3, Some(VarKind::Constituent { index: l }));
        }
        p
    }

    #[test]
    fn omega_is_strict() {
        assert_eq!(omega(&[0.2, 0.5, 0.5, 0.9], 0.5), vec![3]);
        assert_eq!(omega(&[0.2, 0.5, 0.9], 0.2), vec![1, 2]);
        assert!(omega(&[0.4], 1.0).is_empty());
    }

    #[test]
    fn forcing_pins_selected_constituents() {
        let base = base_with_cons(3);
        let p = add_essential_forcing(&base, &question(3), &[0.9, 0.1, 0.8], 0.5).unwrap();
        assert_eq!(base.n_constraints(), 0);
        let forced: Vec<_> = p
            .constraints
            .iter()
            .filter(|c| c.tag == ConstraintTag::EssentialTermForcing)
            .collect();
        assert_eq!(forced.len(), 2);
        assert!(forced.iter().all(|c| c.sense == Sense::Eq && c.rhs == 1.0));
        assert!(p.is_feasible(&[true, false, true], 1e-6));
        assert!(!p.is_feasible(&[true, false, false], 1e-6));
    }

    #[test]
    fn forcing_without_variable_is_marker_infeasible() {
        // Constituent 1 has no variable in the base program.
        let mut base = IlpProblem::new("b");
        base.add_var("xq0", 0.3, Some(VarKind::Constituent { index: 0 }));
        let p = add_essential_forcing(&base, &question(2), &[0.9, 0.9], 0.5).unwrap();
        let marker = p
            .constraints
            .iter()
            .find(|c| c.terms.is_empty())
            .expect("marker row");
        assert_eq!((marker.sense, marker.rhs), (Sense::Eq, 1.0));
        assert!(!p.is_feasible(&[true], 1e-6));
    }

    #[test]
    fn forcing_rejects_bad_inputs() {
        let base = base_with_cons(2);
        assert!(matches!(
            add_essential_forcing(&base, &question(2), &[0.1, 0.2], 1.5),
            Err(ModelError::InvalidThreshold { .. })
        ));
        assert!(matches!(
            add_essential_forcing(&base, &question(2), &[0.1], 0.5),
            Err(ModelError::ProfileMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn cascade_extension_links_stages() {
        let base = base_with_cons(2);
        let p = build_cascade_extension(&base, &question(2), &[0.7, 0.5], &[0.4, 0.6], None)
            .unwrap();
        assert_eq!(p.n_vars(), 4);
        // required M = 1 + 0.3 + 0.3.
        assert!((p.vars[2].weight - 1.6).abs() < 1e-12);
        let links: Vec<_> = p
            .constraints
            .iter()
            .filter(|c| c.tag == ConstraintTag::CascadeStageLink)
            .collect();
        assert_eq!(links.len(), 2);
        // Stage 0 forces both constituents, stage 1 only the first.
        assert_eq!(links[0].terms[0].1, 2.0);
        assert_eq!(links[1].terms.len(), 2);
        // Both stages on requires both constituents on.
        assert!(p.is_feasible(&[true, true, true, true], 1e-6));
        assert!(!p.is_feasible(&[true, false, true, false], 1e-6));
        assert!(p.is_feasible(&[true, false, false, true], 1e-6));
    }

    #[test]
    fn cascade_extension_rejects_bad_thresholds_and_small_m() {
        let base = base_with_cons(1);
        let q = question(1);
        for bad in [&[][..], &[0.6, 0.4][..], &[0.4, 0.4][..], &[-0.1][..]] {
            assert!(matches!(
                build_cascade_extension(&base, &q, &[0.5], bad, None),
                Err(ModelError::BadCascadeThresholds)
            ));
        }
        assert!(matches!(
            build_cascade_extension(&base, &q, &[0.5], &[0.4], Some(1.0)),
            Err(ModelError::BigMTooSmall { .. })
        ));
    }
}
