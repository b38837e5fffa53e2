//! JSON model and strategy files.
//!
//! Nested tables are keyed `state -> action1 -> action2`. The canonical
//! writer emits keys in model order, omits zero transition targets and
//! terminates the document with a newline, so `save(load(x)) == x` for
//! every canonical document.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{GameModel, Grid, Player, RunningCost, SojournDist, StationaryStrategy};
use crate::error::{Error, Result};

type Nested<T> = BTreeMap<String, BTreeMap<String, BTreeMap<String, T>>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    states: Vec<String>,
    theta: f64,
    horizon_bound: f64,
    reference_state: String,
    actions1: BTreeMap<String, Vec<String>>,
    actions2: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    immediate_cost: Option<Nested<f64>>,
    running_cost1: Nested<Vec<f64>>,
    #[serde(default)]
    running_cost2: Option<Nested<Vec<f64>>>,
    sojourn: Nested<SojournDist>,
    transition: Nested<BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    player: Player,
    probs: BTreeMap<String, BTreeMap<String, f64>>,
}

fn decode<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}

/// Parses a model document and resolves names to indices.
///
/// Only structure is checked here: every table must cover exactly the
/// declared states and actions. Numeric invariants are left to
/// [`GameModel::check`] so that `validate` can report them.
pub fn parse_model(text: &str) -> Result<GameModel> {
    let raw: RawModel = decode(text)?;
    let states = raw.states;
    for (k, s) in states.iter().enumerate() {
        if states[..k].contains(s) {
            return Err(Error::dimension(
                format!("states[{k}]"),
                format!("duplicate state `{s}`"),
            ));
        }
    }
    let actions1 = action_lists("actions1", &states, raw.actions1)?;
    let actions2 = action_lists("actions2", &states, raw.actions2)?;
    let reference_state = states
        .iter()
        .position(|s| *s == raw.reference_state)
        .ok_or_else(|| {
            Error::dimension(
                "reference_state",
                format!("unknown state `{}`", raw.reference_state),
            )
        })?;

    let shape = Shape {
        states: &states,
        actions1: &actions1,
        actions2: &actions2,
    };
    let immediate_cost = raw
        .immediate_cost
        .map(|t| shape.grid("immediate_cost", t, Ok))
        .transpose()?;
    let running_cost1 = shape.grid("running_cost1", raw.running_cost1, |c| {
        Ok(RunningCost::new(c))
    })?;
    let running_cost2 = raw
        .running_cost2
        .map(|t| shape.grid("running_cost2", t, |c| Ok(RunningCost::new(c))))
        .transpose()?;
    let sojourn = shape.grid("sojourn", raw.sojourn, Ok)?;
    let transition = shape.grid_at("transition", raw.transition, |loc, row| {
        let mut out = vec![0.0; states.len()];
        for (target, p) in row {
            let j = states.iter().position(|s| *s == target).ok_or_else(|| {
                Error::dimension(
                    format!("{loc}[{target}]"),
                    format!("unknown target state `{target}`"),
                )
            })?;
            out[j] = p;
        }
        Ok(out)
    })?;

    Ok(GameModel {
        states,
        actions1,
        actions2,
        theta: raw.theta,
        horizon_bound: raw.horizon_bound,
        reference_state,
        immediate_cost,
        running_cost1,
        running_cost2,
        sojourn,
        transition,
    })
}

/// Parses a model and rejects any violated hard invariant.
pub fn load_model(text: &str) -> Result<GameModel> {
    let model = parse_model(text)?;
    model.check()?;
    Ok(model)
}

fn action_lists(
    field: &str,
    states: &[String],
    mut raw: BTreeMap<String, Vec<String>>,
) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::with_capacity(states.len());
    for s in states {
        let acts = raw
            .remove(s)
            .ok_or_else(|| Error::dimension(format!("{field}[{s}]"), "missing action list"))?;
        for (k, a) in acts.iter().enumerate() {
            if acts[..k].contains(a) {
                return Err(Error::dimension(
                    format!("{field}[{s}][{k}]"),
                    format!("duplicate action `{a}`"),
                ));
            }
        }
        out.push(acts);
    }
    if let Some(extra) = raw.keys().next() {
        return Err(Error::dimension(
            format!("{field}[{extra}]"),
            format!("unknown state `{extra}`"),
        ));
    }
    Ok(out)
}

struct Shape<'a> {
    states: &'a [String],
    actions1: &'a [Vec<String>],
    actions2: &'a [Vec<String>],
}

impl Shape<'_> {
    fn grid<T, U>(
        &self,
        field: &str,
        raw: Nested<T>,
        convert: impl Fn(T) -> Result<U>,
    ) -> Result<Grid<U>> {
        self.grid_at(field, raw, |_, v| convert(v))
    }

    fn grid_at<T, U>(
        &self,
        field: &str,
        mut raw: Nested<T>,
        convert: impl Fn(&str, T) -> Result<U>,
    ) -> Result<Grid<U>> {
        let mut grid = Vec::with_capacity(self.states.len());
        for (i, s) in self.states.iter().enumerate() {
            let mut by_a = raw
                .remove(s)
                .ok_or_else(|| Error::dimension(format!("{field}[{s}]"), "missing state"))?;
            let mut rows = Vec::with_capacity(self.actions1[i].len());
            for a in &self.actions1[i] {
                let mut by_b = by_a.remove(a).ok_or_else(|| {
                    Error::dimension(format!("{field}[{s}][{a}]"), "missing action")
                })?;
                let mut cells = Vec::with_capacity(self.actions2[i].len());
                for b in &self.actions2[i] {
                    let loc = format!("{field}[{s}][{a}][{b}]");
                    let v = by_b
                        .remove(b)
                        .ok_or_else(|| Error::dimension(loc.clone(), "missing action"))?;
                    cells.push(convert(&loc, v)?);
                }
                if let Some(extra) = by_b.keys().next() {
                    return Err(Error::dimension(
                        format!("{field}[{s}][{a}][{extra}]"),
                        format!("unknown action `{extra}`"),
                    ));
                }
                rows.push(cells);
            }
            if let Some(extra) = by_a.keys().next() {
                return Err(Error::dimension(
                    format!("{field}[{s}][{extra}]"),
                    format!("unknown action `{extra}`"),
                ));
            }
            grid.push(rows);
        }
        if let Some(extra) = raw.keys().next() {
            return Err(Error::dimension(
                format!("{field}[{extra}]"),
                format!("unknown state `{extra}`"),
            ));
        }
        Ok(grid)
    }
}

fn nested<T>(model: &GameModel, grid: &Grid<T>, cell: impl Fn(&T) -> Value) -> Value {
    let mut by_s = Map::new();
    for (i, s) in model.states.iter().enumerate() {
        let mut by_a = Map::new();
        for (a, an) in model.actions1[i].iter().enumerate() {
            let mut by_b = Map::new();
            for (b, bn) in model.actions2[i].iter().enumerate() {
                by_b.insert(bn.clone(), cell(&grid[i][a][b]));
            }
            by_a.insert(an.clone(), Value::Object(by_b));
        }
        by_s.insert(s.clone(), Value::Object(by_a));
    }
    Value::Object(by_s)
}

fn action_map(model: &GameModel, lists: &[Vec<String>]) -> Value {
    let mut m = Map::new();
    for (s, acts) in model.states.iter().zip(lists) {
        m.insert(s.clone(), json!(acts));
    }
    Value::Object(m)
}

/// Model as a JSON value in canonical key order.
pub(crate) fn model_to_value(model: &GameModel) -> Value {
    let mut doc = Map::new();
    doc.insert("states".into(), json!(model.states));
    doc.insert("theta".into(), json!(model.theta));
    doc.insert("horizon_bound".into(), json!(model.horizon_bound));
    doc.insert(
        "reference_state".into(),
        json!(model.states.get(model.reference_state)),
    );
    doc.insert("actions1".into(), action_map(model, &model.actions1));
    doc.insert("actions2".into(), action_map(model, &model.actions2));
    if let Some(c) = &model.immediate_cost {
        doc.insert("immediate_cost".into(), nested(model, c, |v| json!(v)));
    }
    doc.insert(
        "running_cost1".into(),
        nested(model, &model.running_cost1, |rc| json!(rc.coefficients)),
    );
    if let Some(rc2) = &model.running_cost2 {
        doc.insert(
            "running_cost2".into(),
            nested(model, rc2, |rc| json!(rc.coefficients)),
        );
    }
    doc.insert(
        "sojourn".into(),
        nested(model, &model.sojourn, |d| {
            serde_json::to_value(d).expect("sojourn law serializes")
        }),
    );
    doc.insert(
        "transition".into(),
        nested(model, &model.transition, |row| {
            let mut m = Map::new();
            for (j, &p) in row.iter().enumerate() {
                if p != 0.0 {
                    m.insert(model.states[j].clone(), json!(p));
                }
            }
            Value::Object(m)
        }),
    );
    Value::Object(doc)
}

/// Canonical JSON text of a model.
pub fn save_model(model: &GameModel) -> String {
    let mut text =
        serde_json::to_string_pretty(&model_to_value(model)).expect("model serializes");
    text.push('\n');
    text
}

/// Parses a strategy file against `model`; omitted actions get probability 0.
pub fn parse_strategy(text: &str, model: &GameModel) -> Result<(Player, StationaryStrategy)> {
    let raw: RawStrategy = decode(text)?;
    let player = raw.player;
    let mut by_state = raw.probs;
    let mut probs = Vec::with_capacity(model.n_states());
    for (i, s) in model.states.iter().enumerate() {
        let mut row_raw = by_state
            .remove(s)
            .ok_or_else(|| Error::dimension(format!("probs[{s}]"), "missing state"))?;
        let acts = &model.actions(player)[i];
        let row = acts
            .iter()
            .map(|a| row_raw.remove(a).unwrap_or(0.0))
            .collect();
        if let Some(extra) = row_raw.keys().next() {
            return Err(Error::dimension(
                format!("probs[{s}][{extra}]"),
                format!("unknown action `{extra}` for player {player}"),
            ));
        }
        probs.push(row);
    }
    if let Some(extra) = by_state.keys().next() {
        return Err(Error::dimension(
            format!("probs[{extra}]"),
            format!("unknown state `{extra}`"),
        ));
    }
    let strategy = StationaryStrategy::new(probs);
    strategy.check(model, player)?;
    Ok((player, strategy))
}

pub(crate) fn strategy_to_value(model: &GameModel, player: Player, s: &StationaryStrategy) -> Value {
    let mut by_state = Map::new();
    for (i, name) in model.states.iter().enumerate() {
        let mut row = Map::new();
        for (a, act) in model.actions(player)[i].iter().enumerate() {
            row.insert(act.clone(), json!(s.probs[i][a]));
        }
        by_state.insert(name.clone(), Value::Object(row));
    }
    json!({ "player": player, "probs": Value::Object(by_state) })
}

/// Strategy file text for `player`.
pub fn save_strategy(model: &GameModel, player: Player, s: &StationaryStrategy) -> String {
    let mut text = serde_json::to_string_pretty(&strategy_to_value(model, player, s))
        .expect("strategy serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "states": ["s"],
  "theta": 1.0,
  "horizon_bound": 1.0,
  "reference_state": "s",
  "actions1": {"s": ["a"]},
  "actions2": {"s": ["b"]},
  "running_cost1": {"s": {"a": {"b": [0.0]}}},
  "sojourn": {"s": {"a": {"b": {"kind": "atoms", "atoms": [[0.5, 1.0]]}}}},
  "transition": {"s": {"a": {"b": {"s": 1.0}}}}
}"#;

    #[test]
    fn minimal_document_loads() {
        let m = load_model(MINIMAL).unwrap();
        assert_eq!(m.n_states(), 1);
        assert_eq!(m.sojourn[0][0][0], SojournDist::deterministic(0.5));
        assert!(m.immediate_cost.is_none());
    }

    #[test]
    fn row_sum_violation_names_the_row() {
        let text = MINIMAL.replace(r#"{"s": 1.0}"#, r#"{"s": 0.9}"#);
        // structural parse succeeds, the invariant check fails
        assert!(parse_model(&text).is_ok());
        match load_model(&text) {
            Err(Error::Invalid { check, location, .. }) => {
                assert_eq!(check, "stochasticity");
                assert_eq!(location, "(s, a, b)");
            }
            other => panic!("expected invalid model, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected_with_path() {
        let text = MINIMAL.replace(r#""theta": 1.0,"#, r#""theta": 1.0, "gamma": 2,"#);
        match parse_model(&text) {
            Err(Error::Parse { message, line, .. }) => {
                assert!(message.contains("gamma"), "{message}");
                assert_eq!(line, 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = MINIMAL.replace(r#""atoms": [[0.5, 1.0]]"#, r#""atoms": [[0.5, 1.0]], "x": 1"#);
        match parse_model(&text) {
            Err(Error::Parse { path, .. }) => assert!(path.starts_with("sojourn.s.a.b"), "{path}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_errors_name_the_cell() {
        let text = MINIMAL.replace(r#"{"s": 1.0}"#, r#"{"t": 1.0}"#);
        match parse_model(&text) {
            Err(Error::Dimension { location, .. }) => assert_eq!(location, "transition[s][a][b][t]"),
            other => panic!("expected dimension error, got {other:?}"),
        }
        let text = MINIMAL.replace(r#""actions2": {"s": ["b"]}"#, r#""actions2": {"s": ["b", "c"]}"#);
        match parse_model(&text) {
            Err(Error::Dimension { location, .. }) => assert_eq!(location, "running_cost1[s][a][c]"),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_garbage_is_a_parse_error() {
        let text = format!("{MINIMAL} x");
        assert!(matches!(parse_model(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn strategy_file_fills_omitted_actions() {
        let m = load_model(MINIMAL).unwrap();
        let (p, s) = parse_strategy(r#"{"player": 2, "probs": {"s": {"b": 1.0}}}"#, &m).unwrap();
        assert_eq!(p, Player::Two);
        assert_eq!(s.probs, vec![vec![1.0]]);
        assert!(parse_strategy(r#"{"player": 3, "probs": {"s": {"b": 1.0}}}"#, &m).is_err());
        assert!(parse_strategy(r#"{"player": 1, "probs": {"s": {"b": 1.0}}}"#, &m).is_err());
        assert!(parse_strategy(r#"{"player": 1, "probs": {"s": {"a": 0.5}}}"#, &m).is_err());
        let text = save_strategy(&m, p, &s);
        assert_eq!(parse_strategy(&text, &m).unwrap().1, s);
    }
}
