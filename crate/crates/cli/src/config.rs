//! Run configuration: one JSON document per run, flags layered on top.
//!
//! Precedence for every field: command-line flag, then the config document,
//! then the built-in default. The seed additionally falls back to
//! `COPYGRAPH_SEED` before the default of 42.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "COPYGRAPH_SEED";
pub const DEFAULT_OUT: &str = "copygraph-out";

/// Keys every document may carry besides the subcommand's own fields.
const GLOBAL_KEYS: [&str; 2] = ["seed", "out"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub seed: u64,
    pub out: PathBuf,
    pub params: T,
}

/// Subcommand parameters: defaults, plus checks that need more than types.
pub trait Params: Serialize + DeserializeOwned + Default {
    /// Semantic problems, one message per bad field.
    fn check(&self) -> Vec<String>;
    /// Input files this run reads.
    fn inputs(&self) -> Vec<PathBuf>;
}

pub fn read_document(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(vec![format!("{}: top level must be a JSON object", path.display())])),
        Err(e) => Err(CliError::Config(vec![format!("{}: {e}", path.display())])),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn resolve_seed(doc: Option<&Value>, flag: Option<u64>, env: Option<&str>, errors: &mut Vec<String>) -> u64 {
    let from_doc = match doc {
        None => None,
        Some(v) => match v.as_u64() {
            Some(s) => Some(s),
            None => {
                errors.push(format!("seed: expected an unsigned 64-bit integer, got {v}"));
                None
            }
        },
    };
    let from_env = env.and_then(|s| match s.trim().parse::<u64>() {
        Ok(x) => Some(x),
        Err(_) => {
            errors.push(format!("{SEED_ENV}: expected an unsigned 64-bit integer, got {s:?}"));
            None
        }
    });
    flag.or(from_doc).or(from_env).unwrap_or(DEFAULT_SEED)
}

/// Merges flag overrides into the document and builds the typed config,
/// reporting every bad field at once.
pub fn validate<T: Params>(
    mut doc: Map<String, Value>,
    overrides: Map<String, Value>,
    seed_flag: Option<u64>,
    out_flag: Option<PathBuf>,
    seed_env: Option<&str>,
) -> Result<RunConfig<T>, CliError> {
    let mut errors = Vec::new();
    let seed = resolve_seed(doc.remove("seed").as_ref(), seed_flag, seed_env, &mut errors);
    let out = match (out_flag, doc.remove("out")) {
        (Some(p), _) => p,
        (None, Some(Value::String(s))) => PathBuf::from(s),
        (None, Some(v)) => {
            errors.push(format!("out: expected a path string, got {}", type_name(&v)));
            PathBuf::from(DEFAULT_OUT)
        }
        (None, None) => PathBuf::from(DEFAULT_OUT),
    };
    doc.extend(overrides);

    let defaults = match serde_json::to_value(T::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("parameter records serialize to objects"),
    };
    for (key, value) in &doc {
        if !defaults.contains_key(key) {
            let mut known: Vec<&str> = defaults.keys().map(String::as_str).chain(GLOBAL_KEYS).collect();
            known.sort_unstable();
            errors.push(format!("unknown key `{key}` (expected one of: {})", known.join(", ")));
            continue;
        }
        // Each field is tried on its own against the defaults so that one bad
        // field does not hide the next.
        let mut probe = defaults.clone();
        probe.insert(key.clone(), value.clone());
        if let Err(e) = serde_json::from_value::<T>(Value::Object(probe)) {
            errors.push(format!("{key}: {e}"));
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let mut merged = defaults;
    merged.extend(doc);
    let params: T = serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let mut errors = params.check();
    for p in params.inputs() {
        if !p.exists() {
            errors.push(format!("input file {} does not exist", p.display()));
        }
    }
    if errors.is_empty() {
        Ok(RunConfig { seed, out, params })
    } else {
        Err(CliError::Config(errors))
    }
}

/// Collects "`field` is required" messages for unset inputs.
pub fn require<T>(errors: &mut Vec<String>, name: &str, value: &Option<T>) {
    if value.is_none() {
        errors.push(format!("{name}: required"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct Toy {
        n_graphs: usize,
        rate: f64,
        graph: Option<PathBuf>,
    }

    impl Default for Toy {
        fn default() -> Self {
            Toy {
                n_graphs: 10,
                rate: 0.5,
                graph: None,
            }
        }
    }

    impl Params for Toy {
        fn check(&self) -> Vec<String> {
            let mut e = Vec::new();
            if !(0.0..=1.0).contains(&self.rate) {
                e.push(format!("rate: {} outside [0, 1]", self.rate));
            }
            e
        }
        fn inputs(&self) -> Vec<PathBuf> {
            self.graph.iter().cloned().collect()
        }
    }

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn missing_seed_defaults_to_42() {
        let c: RunConfig<Toy> = validate(Map::new(), Map::new(), None, None, None).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.params, Toy::default());
        assert_eq!(c.out, PathBuf::from(DEFAULT_OUT));
    }

    #[test]
    fn env_seed_only_replaces_the_default() {
        let c: RunConfig<Toy> = validate(Map::new(), Map::new(), None, None, Some("7")).unwrap();
        assert_eq!(c.seed, 7);
        let c: RunConfig<Toy> = validate(obj(json!({"seed": 3})), Map::new(), None, None, Some("7")).unwrap();
        assert_eq!(c.seed, 3);
        let c: RunConfig<Toy> = validate(obj(json!({"seed": 3})), Map::new(), Some(5), None, Some("7")).unwrap();
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn flags_override_the_document() {
        let c: RunConfig<Toy> =
            validate(obj(json!({"n_graphs": 3})), obj(json!({"n_graphs": 4})), None, None, None).unwrap();
        assert_eq!(c.params.n_graphs, 4);
    }

    #[test]
    fn every_bad_field_is_reported() {
        let doc = obj(json!({"n_graphs": -1, "rte": 0.1, "seed": "x"}));
        let Err(CliError::Config(errs)) = validate::<Toy>(doc, Map::new(), None, None, None) else {
            panic!("expected config error");
        };
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("n_graphs:")));
        assert!(errs.iter().any(|e| e.contains("unknown key `rte`")));
        assert!(errs.iter().any(|e| e.starts_with("seed:")));
    }

    #[test]
    fn semantic_and_path_checks_are_combined() {
        let doc = obj(json!({"rate": 2.0, "graph": "/definitely/not/here.txt"}));
        let Err(CliError::Config(errs)) = validate::<Toy>(doc, Map::new(), None, None, None) else {
            panic!("expected config error");
        };
        assert_eq!(errs.len(), 2, "{errs:?}");
    }
}
