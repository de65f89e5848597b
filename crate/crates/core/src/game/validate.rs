use std::fmt;

use super::GameSpec;

const SUM_TOL: f64 = 1e-9;

/// One broken invariant of a [`GameSpec`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoStates,
    NoTypes,
    DuplicateName { kind: &'static str, name: String },
    Shape(String),
    ThetaNegative { state: String },
    ThetaSum { state: String, sum: f64 },
    EmptyActions { state: String, player: String },
    TransitionNegative { state: String, d_action: String, attacker_type: String, a_action: String },
    TransitionSum { state: String, d_action: String, attacker_type: String, a_action: String, sum: f64 },
    NonFiniteUtility { state: String, attacker_type: String },
    Discount(f64),
    NoStartStates,
    StateOutOfRange { role: &'static str, index: usize },
    StartIsTerminal { state: String },
    UnknownReference(String),
    DuplicateRecord(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoStates => write!(f, "no states"),
            NoTypes => write!(f, "no attacker types"),
            DuplicateName { kind, name } => write!(f, "duplicate {kind} name {name:?}"),
            Shape(msg) => write!(f, "shape: {msg}"),
            ThetaNegative { state } => write!(f, "theta({state}) has a negative entry"),
            ThetaSum { state, sum } => write!(f, "theta({state}) sums to {sum}"),
            EmptyActions { state, player } => write!(f, "{player} has no actions in {state}"),
            TransitionNegative { state, d_action, attacker_type, a_action } => write!(
                f,
                "transition ({state}, {d_action}, {attacker_type}, {a_action}) has a negative entry"
            ),
            TransitionSum { state, d_action, attacker_type, a_action, sum } => write!(
                f,
                "transition ({state}, {d_action}, {attacker_type}, {a_action}) sums to {sum}"
            ),
            NonFiniteUtility { state, attacker_type } => {
                write!(f, "non-finite utility in ({state}, {attacker_type})")
            }
            Discount(g) => write!(f, "discount out of [0,1): {g}"),
            NoStartStates => write!(f, "start_states is empty"),
            StateOutOfRange { role, index } => write!(f, "{role} state index {index} out of range"),
            StartIsTerminal { state } => write!(f, "{state} is both a start and a terminal state"),
            UnknownReference(msg) => write!(f, "unknown reference: {msg}"),
            DuplicateRecord(msg) => write!(f, "duplicate record: {msg}"),
        }
    }
}

/// Every invariant violation found in a spec. Empty means valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

fn duplicates(kind: &'static str, names: &[String], out: &mut Vec<Violation>) {
    for (k, name) in names.iter().enumerate() {
        if names[..k].contains(name) {
            out.push(Violation::DuplicateName { kind, name: name.clone() });
        }
    }
}

fn check_distribution(p: &[f64]) -> (bool, Option<f64>) {
    let negative = p.iter().any(|&v| !(v >= 0.0));
    let sum: f64 = p.iter().sum();
    let bad_sum = !((sum - 1.0).abs() <= SUM_TOL);
    (negative, bad_sum.then_some(sum))
}

/// Checks every structural and probabilistic invariant of `spec`.
pub fn validate(spec: &GameSpec) -> ValidationReport {
    let mut out = Vec::new();
    let n = spec.n_states();
    let t = spec.n_types();
    if n == 0 {
        out.push(Violation::NoStates);
    }
    if t == 0 {
        out.push(Violation::NoTypes);
    }
    duplicates("state", &spec.states, &mut out);
    duplicates("attacker type", &spec.attacker_types, &mut out);

    if !(spec.discount >= 0.0 && spec.discount < 1.0) {
        out.push(Violation::Discount(spec.discount));
    }

    if spec.theta.len() != n
        || spec.defender_actions.len() != n
        || spec.attacker_actions.len() != n
        || spec.blocks.len() != n
    {
        out.push(Violation::Shape(format!(
            "{n} states but theta/defender_actions/attacker_actions/blocks have lengths {}/{}/{}/{}",
            spec.theta.len(),
            spec.defender_actions.len(),
            spec.attacker_actions.len(),
            spec.blocks.len()
        )));
        return ValidationReport { violations: out };
    }

    for s in 0..n {
        let state = &spec.states[s];
        let theta = &spec.theta[s];
        if theta.len() != t {
            out.push(Violation::Shape(format!("theta({state}) has {} entries for {t} types", theta.len())));
        } else {
            let (neg, sum) = check_distribution(theta);
            if neg {
                out.push(Violation::ThetaNegative { state: state.clone() });
            }
            if let Some(sum) = sum {
                out.push(Violation::ThetaSum { state: state.clone(), sum });
            }
        }

        let d_actions = &spec.defender_actions[s];
        if d_actions.is_empty() {
            out.push(Violation::EmptyActions { state: state.clone(), player: "defender".into() });
        }
        duplicates("defender action", d_actions, &mut out);

        if spec.attacker_actions[s].len() != t || spec.blocks[s].len() != t {
            out.push(Violation::Shape(format!(
                "state {state}: attacker action lists / blocks do not cover {t} types"
            )));
            continue;
        }

        for i in 0..t {
            let ty = &spec.attacker_types[i];
            let a_actions = &spec.attacker_actions[s][i];
            if a_actions.is_empty() {
                out.push(Violation::EmptyActions { state: state.clone(), player: format!("attacker type {ty}") });
            }
            duplicates("attacker action", a_actions, &mut out);

            let block = &spec.blocks[s][i];
            let shape = (d_actions.len(), a_actions.len());
            if block.u_defender.shape() != shape
                || block.u_attacker.shape() != shape
                || block.transitions.len() != shape.0 * shape.1
            {
                out.push(Violation::Shape(format!(
                    "({state}, {ty}): utilities {:?}/{:?} and {} transition rows for action sets {shape:?}",
                    block.u_defender.shape(),
                    block.u_attacker.shape(),
                    block.transitions.len()
                )));
                continue;
            }
            if !block.u_defender.is_finite() || !block.u_attacker.is_finite() {
                out.push(Violation::NonFiniteUtility { state: state.clone(), attacker_type: ty.clone() });
            }
            for d in 0..shape.0 {
                for a in 0..shape.1 {
                    let next = block.next_distribution(d, a);
                    let cell = || (state.clone(), d_actions[d].clone(), ty.clone(), a_actions[a].clone());
                    if next.len() != n {
                        let (st, da, ty, aa) = cell();
                        out.push(Violation::Shape(format!(
                            "transition ({st}, {da}, {ty}, {aa}) has {} entries for {n} states",
                            next.len()
                        )));
                        continue;
                    }
                    let (neg, sum) = check_distribution(next);
                    if neg {
                        let (state, d_action, attacker_type, a_action) = cell();
                        out.push(Violation::TransitionNegative { state, d_action, attacker_type, a_action });
                    }
                    if let Some(sum) = sum {
                        let (state, d_action, attacker_type, a_action) = cell();
                        out.push(Violation::TransitionSum { state, d_action, attacker_type, a_action, sum });
                    }
                }
            }
        }
    }

    if spec.start_states.is_empty() {
        out.push(Violation::NoStartStates);
    }
    for (role, list) in [("start", &spec.start_states), ("terminal", &spec.terminal_states)] {
        for &index in list.iter() {
            if index >= n {
                out.push(Violation::StateOutOfRange { role, index });
            }
        }
    }
    for &s in &spec.start_states {
        if s < n && spec.terminal_states.contains(&s) {
            out.push(Violation::StartIsTerminal { state: spec.states[s].clone() });
        }
    }

    ValidationReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_bsmg, RandomSpecParams};

    fn two_type_spec() -> GameSpec {
        let mut spec = generate_random_bsmg(&RandomSpecParams::new(3, 2, 2, vec![2], (0.0, 1.0), 3)).unwrap();
        spec.theta = vec![vec![0.5, 0.5]; 3];
        spec
    }

    #[test]
    fn valid_even_prior() {
        assert!(validate(&two_type_spec()).is_empty());
    }

    #[test]
    fn short_transition_row_named() {
        let mut spec = two_type_spec();
        let row = spec.blocks[1][0].next_distribution_mut(1, 0);
        *row = vec![0.3, 0.3, 0.3];
        let report = validate(&spec);
        assert_eq!(report.len(), 1);
        match &report.violations[0] {
            Violation::TransitionSum { state, d_action, attacker_type, a_action, sum } => {
                assert_eq!(state, &spec.states[1]);
                assert_eq!(d_action, &spec.defender_actions[1][1]);
                assert_eq!(attacker_type, &spec.attacker_types[0]);
                assert_eq!(a_action, &spec.attacker_actions[1][0][0]);
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected violation {other}"),
        }
    }

    #[test]
    fn discount_of_one_rejected() {
        let mut spec = two_type_spec();
        spec.discount = 1.0;
        let report = validate(&spec);
        assert_eq!(report.violations, vec![Violation::Discount(1.0)]);
        assert!(report.violations[0].to_string().contains("discount out of [0,1)"));
    }

    #[test]
    fn negative_theta_and_overlap() {
        let mut spec = two_type_spec();
        spec.theta[0] = vec![-0.1, 1.1];
        spec.terminal_states = vec![spec.start_states[0]];
        let report = validate(&spec);
        assert!(report.violations.contains(&Violation::ThetaNegative { state: spec.states[0].clone() }));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::StartIsTerminal { .. })));
    }

    #[test]
    fn empty_action_list() {
        let mut spec = GameSpec::single_state(1.0, 0.0, 0.5);
        spec.attacker_actions[0][0].clear();
        let report = validate(&spec);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::EmptyActions { .. })));
    }

    #[test]
    fn validate_does_not_mutate() {
        let mut spec = two_type_spec();
        spec.discount = 2.0;
        let before = spec.clone();
        let _ = validate(&spec);
        assert_eq!(spec, before);
    }
}
