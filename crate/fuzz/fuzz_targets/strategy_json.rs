#![no_main]

use libfuzzer_sys::fuzz_target;
use rsgame::model::{load_model, parse_strategy, save_strategy};

const MODEL: &str = r#"{
  "states": ["s0", "s1"],
  "theta": 0.5,
  "horizon_bound": 1.0,
  "reference_state": "s0",
  "actions1": {"s0": ["a0", "a1"], "s1": ["a0"]},
  "actions2": {"s0": ["b0"], "s1": ["b0", "b1", "b2"]},
  "running_cost1": {
    "s0": {"a0": {"b0": [1.0]}, "a1": {"b0": [0.5]}},
    "s1": {"a0": {"b0": [0.0], "b1": [1.0], "b2": [2.0]}}
  },
  "sojourn": {
    "s0": {"a0": {"b0": {"kind": "atoms", "atoms": [[0.5, 1.0]]}}, "a1": {"b0": {"kind": "uniform", "lo": 0.0, "hi": 1.0}}},
    "s1": {"a0": {"b0": {"kind": "atoms", "atoms": [[1.0, 1.0]]}, "b1": {"kind": "truncated_exponential", "rate": 2.0}, "b2": {"kind": "atoms", "atoms": [[0.25, 1.0]]}}}
  },
  "transition": {
    "s0": {"a0": {"b0": {"s1": 1.0}}, "a1": {"b0": {"s0": 0.5, "s1": 0.5}}},
    "s1": {"a0": {"b0": {"s0": 1.0}, "b1": {"s0": 1.0}, "b2": {"s0": 1.0}}}
  }
}"#;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let model = load_model(MODEL).expect("embedded model is valid");
    if let Ok((player, s)) = parse_strategy(text, &model) {
        let again = parse_strategy(&save_strategy(&model, player, &s), &model).expect("saved strategy parses");
        assert_eq!(again, (player, s));
    }
});
