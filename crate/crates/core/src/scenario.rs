//! Experiment descriptions: an initial state and a chain of (possibly
//! adaptive) interventions.
//!
//! ```json
//! {
//!   "name": "two-observer",
//!   "initial_state": {"amplitudes": [[0.7071, 0], [0, 0], [0, 0], [0.7071, 0]]},
//!   "stages": [
//!     {"intervention": {"input_dim": 4, "outcomes": [...]}},
//!     {"adaptive": {"0": {...}, "1": {"file": "bob_x.json"}}}
//!   ],
//!   "shots": 100000,
//!   "seed": 7
//! }
//! ```
//!
//! An intervention may be given inline or as `{"file": path}`, resolved
//! relative to the scenario file. Adaptive branches are keyed by the prior
//! record (see [`AdaptiveIntervention::lookup`]).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::intervention::{
    exact_records, join_labels, sample_records, AdaptiveIntervention, Intervention, Record,
    RecordTable, WILDCARD,
};
use crate::io::StateFile;
use crate::random::Stream;
use crate::state::DensityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial_state: StateFile,
    pub stages: Vec<AdaptiveIntervention>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
}

struct StageOut<'a>(&'a AdaptiveIntervention);

impl Serialize for StageOut<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(1))?;
        let branches = self.0.branches();
        match branches.get(WILDCARD) {
            Some(k) if branches.len() == 1 => map.serialize_entry("intervention", k)?,
            _ => map.serialize_entry("adaptive", branches)?,
        }
        map.end()
    }
}

impl Serialize for Scenario {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("name", &self.name)?;
        map.serialize_entry("initial_state", &self.initial_state)?;
        let stages: Vec<StageOut> = self.stages.iter().map(StageOut).collect();
        map.serialize_entry("stages", &stages)?;
        if let Some(shots) = self.shots {
            map.serialize_entry("shots", &shots)?;
        }
        if let Some(seed) = self.seed {
            map.serialize_entry("seed", &seed)?;
        }
        map.end()
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Parse(format!("missing field {key:?}")))
}

fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a serde_json::Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse(format!("{what} must be a JSON object")))
}

fn only_keys(obj: &serde_json::Map<String, Value>, allowed: &[&str], what: &str) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Parse(format!("unknown field {k:?} in {what}"))),
        None => Ok(()),
    }
}

/// Reads `{"file": path}` references. `None` rejects them.
fn intervention_ref(v: &Value, base: Option<&Path>) -> Result<Intervention> {
    let obj = as_object(v, "intervention")?;
    if let Some(path) = obj.get("file") {
        only_keys(obj, &["file"], "file reference")?;
        let path = path
            .as_str()
            .ok_or_else(|| Error::Parse("file reference must be a string".into()))?;
        let base = base.ok_or_else(|| {
            Error::InvalidArgument(format!("file reference {path:?} not allowed here"))
        })?;
        let full: PathBuf = base.join(path);
        let bytes = std::fs::read(&full)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", full.display())))?;
        return crate::io::parse_intervention(&bytes);
    }
    crate::intervention::intervention_from_value(v.clone())
}

fn stage(v: &Value, base: Option<&Path>) -> Result<AdaptiveIntervention> {
    let obj = as_object(v, "stage")?;
    if obj.len() != 1 {
        return Err(Error::Parse(
            "a stage has exactly one of \"intervention\", \"adaptive\"".into(),
        ));
    }
    if let Some(k) = obj.get("intervention") {
        return Ok(AdaptiveIntervention::uniform(intervention_ref(k, base)?));
    }
    if let Some(branches) = obj.get("adaptive") {
        let map = as_object(branches, "adaptive stage")?
            .iter()
            .map(|(label, k)| Ok((label.clone(), intervention_ref(k, base)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        return AdaptiveIntervention::new(map);
    }
    Err(Error::Parse(
        "a stage has exactly one of \"intervention\", \"adaptive\"".into(),
    ))
}

/// Parses a scenario. File references are resolved against `base`; with
/// `None` they are rejected.
pub fn parse_scenario(bytes: &[u8], base: Option<&Path>) -> Result<Scenario> {
    let value: Value = serde_json::from_slice(bytes).map_err(json_err)?;
    let obj = as_object(&value, "scenario")?;
    only_keys(
        obj,
        &["name", "initial_state", "stages", "shots", "seed"],
        "scenario",
    )?;
    let name = field(obj, "name")?
        .as_str()
        .ok_or_else(|| Error::Parse("name must be a string".into()))?
        .to_string();
    let state_json = serde_json::to_vec(field(obj, "initial_state")?).map_err(json_err)?;
    let initial_state = crate::io::parse_state(&state_json)?;
    let stages = field(obj, "stages")?
        .as_array()
        .ok_or_else(|| Error::Parse("stages must be an array".into()))?
        .iter()
        .map(|s| stage(s, base))
        .collect::<Result<Vec<_>>>()?;
    let opt_u64 = |key: &str| -> Result<Option<u64>> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Error::Parse(format!("{key} must be a non-negative integer"))),
        }
    };
    let scenario = Scenario {
        name,
        shots: opt_u64("shots")?,
        seed: opt_u64("seed")?,
        initial_state,
        stages,
    };
    scenario.check_chain()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&bytes, Some(path.parent().unwrap_or(Path::new("."))))
}

impl Scenario {
    pub fn initial_density(&self) -> DensityMatrix {
        self.initial_state.density()
    }

    /// Every record prefix reachable through the chain must find a branch
    /// whose input dimension matches the state it receives.
    pub fn check_chain(&self) -> Result<()> {
        let first = self
            .stages
            .first()
            .ok_or(Error::Empty("scenario needs at least one stage"))?;
        if first.branches().len() != 1 {
            return Err(Error::InvalidArgument(
                "first stage must have exactly one branch".into(),
            ));
        }
        // (chronological history, dimension of the state after it)
        let mut frontier: Vec<(Vec<String>, usize)> =
            vec![(Vec::new(), self.initial_density().dim())];
        for (depth, st) in self.stages.iter().enumerate() {
            let mut next = Vec::new();
            for (history, dim) in frontier {
                let label = join_labels(&history);
                let k = if depth == 0 {
                    first.branches().values().next().expect("one branch")
                } else {
                    st.lookup(&label)
                        .ok_or_else(|| Error::MissingBranch(label.clone()))?
                };
                if k.input_dim() != dim {
                    return Err(Error::dim(
                        format!("stage {depth} after record {label:?}"),
                        dim,
                        k.input_dim(),
                    ));
                }
                for o in k.outcomes() {
                    let mut h = history.clone();
                    h.push(o.label.clone());
                    next.push((h, o.output_dim));
                }
            }
            frontier = next;
        }
        Ok(())
    }

    pub fn exact_records(&self) -> Result<Vec<Record>> {
        exact_records(&self.stages, &self.initial_density())
    }

    /// Samples `shots` records with `seed`, falling back to the values in
    /// the file. Both must be present somewhere.
    pub fn sample(&self, shots: Option<u64>, seed: Option<u64>) -> Result<RecordTable> {
        let shots = shots
            .or(self.shots)
            .ok_or_else(|| Error::InvalidArgument("number of shots required".into()))?;
        let seed = seed
            .or(self.seed)
            .ok_or_else(|| Error::InvalidArgument("seed required for sampling".into()))?;
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        sample_records(
            &self.stages,
            &self.initial_density(),
            shots,
            Stream::new(seed),
        )
    }
}

const BUNDLED: &[(&str, &str)] = &[
    (
        "computational",
        include_str!("../scenarios/computational.json"),
    ),
    ("trine", include_str!("../scenarios/trine.json")),
    (
        "amplitude-damping",
        include_str!("../scenarios/amplitude-damping.json"),
    ),
    (
        "bell-discard",
        include_str!("../scenarios/bell-discard.json"),
    ),
    (
        "two-observer",
        include_str!("../scenarios/two-observer.json"),
    ),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, json)| {
        parse_scenario(json.as_bytes(), None).expect("bundled scenarios are valid")
    })
}

/// The raw JSON of a bundled scenario.
pub fn bundled_json(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, json)| *json)
}

/// In-code construction of the bundled scenarios from [`crate::fixtures`].
pub mod builders {
    use super::*;
    use crate::fixtures::{
        amplitude_damping, basis_projector, bell_discard_measurement, computational_pvm,
        trine_intervention,
    };
    use crate::intervention::Outcome;
    use crate::linalg::{c, tensor, ComplexMatrix};
    use crate::state::PureState;

    fn pure(amplitudes: Vec<crate::linalg::C64>) -> StateFile {
        StateFile::Pure(PureState::normalized(amplitudes).expect("nonzero"))
    }

    fn plus() -> Vec<crate::linalg::C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![c(s, 0.0), c(s, 0.0)]
    }

    fn single(name: &str, state: StateFile, k: Intervention) -> Scenario {
        Scenario {
            name: name.into(),
            initial_state: state,
            stages: vec![AdaptiveIntervention::uniform(k)],
            shots: Some(10_000),
            seed: Some(1),
        }
    }

    pub fn computational() -> Scenario {
        single("computational", pure(plus()), computational_pvm(2))
    }

    pub fn trine() -> Scenario {
        single(
            "trine",
            StateFile::Pure(PureState::basis(2, 0)),
            trine_intervention(),
        )
    }

    pub fn amplitude_damping_scenario() -> Scenario {
        single(
            "amplitude-damping",
            StateFile::Pure(PureState::basis(2, 1)),
            amplitude_damping(0.25),
        )
    }

    /// Bell-basis measurement on `|0>|+>` that keeps nothing: every outcome
    /// has a single-row Kraus matrix.
    pub fn bell_discard() -> Scenario {
        let p = plus();
        let state = vec![p[0], p[1], c(0.0, 0.0), c(0.0, 0.0)];
        single("bell-discard", pure(state), bell_discard_measurement())
    }

    /// Alice and Bob share `|Phi+>`. Alice measures her qubit; on "0" Bob
    /// applies the trine measurement, on "1" Bob measures in the X basis
    /// and Alice's qubit is discarded.
    pub fn two_observer() -> Scenario {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = pure(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let id = ComplexMatrix::identity(2);
        let alice = Intervention::new(
            4,
            (0..2)
                .map(|a| Outcome {
                    label: a.to_string(),
                    output_dim: 4,
                    kraus: vec![tensor(&basis_projector(2, a), &id).expect("small")],
                })
                .collect(),
        )
        .expect("complete");
        let trine = trine_intervention();
        let bob_trine = Intervention::new(
            4,
            trine
                .outcomes()
                .iter()
                .map(|o| Outcome {
                    label: format!("t{}", o.label),
                    output_dim: 4,
                    kraus: vec![tensor(&id, &o.kraus[0]).expect("small")],
                })
                .collect(),
        )
        .expect("complete");
        let minus = [c(s, 0.0), c(-s, 0.0)];
        let plus_v = [c(s, 0.0), c(s, 0.0)];
        let bob_x = Intervention::new(
            4,
            [("+", plus_v), ("-", minus)]
                .into_iter()
                .map(|(label, v)| Outcome {
                    label: label.into(),
                    output_dim: 2,
                    kraus: (0..2)
                        .map(|a| {
                            let bra = ComplexMatrix::from_complex_rows(&[&{
                                let mut e = [c(0.0, 0.0); 2];
                                e[a] = c(1.0, 0.0);
                                e
                            }])
                            .expect("finite");
                            tensor(&bra, &ComplexMatrix::projector(&v)).expect("small")
                        })
                        .collect(),
                })
                .collect(),
        )
        .expect("complete");
        Scenario {
            name: "two-observer".into(),
            initial_state: bell,
            stages: vec![
                AdaptiveIntervention::uniform(alice),
                AdaptiveIntervention::from_pairs([("0", bob_trine), ("1", bob_x)])
                    .expect("complete"),
            ],
            shots: Some(100_000),
            seed: Some(7),
        }
    }

    pub fn all() -> Vec<Scenario> {
        vec![
            computational(),
            trine(),
            amplitude_damping_scenario(),
            bell_discard(),
            two_observer(),
        ]
    }
}
