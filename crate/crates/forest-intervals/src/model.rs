use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::StandardizationParams;
use crate::error::{Error, Result};
use crate::forest::{FittedConfig, Forest, Tree};

/// Model files written by this build carry this version; loading rejects any
/// other value before touching the rest of the document.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: FittedConfig,
    standardization: StandardizationParams,
    targets: Vec<f64>,
    trees: Vec<Tree>,
}

/// Serializes a fitted forest to its JSON model document. The output is a
/// pure function of the forest, so identical forests give identical bytes.
pub fn to_json(forest: &Forest) -> Result<String> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        config: forest.fitted_config(),
        standardization: forest.standardization(),
        targets: forest.targets().to_vec(),
        trees: forest.trees().to_vec(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Parses a JSON model document back into a forest, checking the format
/// version first and then revalidating all structural invariants, so a
/// hand-edited or truncated file cannot produce a forest that later panics.
pub fn from_json(json: &str) -> Result<Forest> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedFormatVersion {
            got: version as u32,
            supported: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value)?;
    Forest::from_parts(file.trees, file.targets, file.standardization, file.config)
}

/// Writes the model document to `path` atomically: the JSON goes to a
/// temporary file in the same directory, which is then renamed over the
/// destination, so a crash never leaves a half-written model behind.
pub fn save<P: AsRef<Path>>(forest: &Forest, path: P) -> Result<()> {
    let path = path.as_ref();
    let json = to_json(forest)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    tmp.write_all(json.as_bytes())?;
    tmp.write_all(b"\n")?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads a model document from disk.
pub fn load<P: AsRef<Path>>(path: P) -> Result<Forest> {
    from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::forest::{fit_forest, ForestConfig};

    fn small_forest(seed: u64) -> Forest {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.4).sin(), i as f64])
            .collect();
        let targets: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).cos() * 2.0).collect();
        let data = Dataset::new(rows, targets, vec!["a".into(), "b".into()]).unwrap();
        fit_forest(
            &data,
            &ForestConfig {
                n_trees: 7,
                min_leaf: 2,
                max_features: None,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip_preserves_the_forest() {
        let forest = small_forest(3);
        let json = to_json(&forest).unwrap();
        let back = from_json(&json).unwrap();
        assert_eq!(forest, back);
    }

    #[test]
    fn serialization_is_byte_stable() {
        let a = to_json(&small_forest(5)).unwrap();
        let b = to_json(&small_forest(5)).unwrap();
        assert_eq!(a, b);
        let c = to_json(&small_forest(6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let forest = small_forest(8);
        save(&forest, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(forest, back);
    }

    #[test]
    fn rejects_unknown_format_versions() {
        let json = to_json(&small_forest(1)).unwrap();
        let bumped = json.replace("\"format_version\":1", "\"format_version\":2");
        assert!(matches!(
            from_json(&bumped),
            Err(Error::UnsupportedFormatVersion {
                got: 2,
                supported: 1
            })
        ));
    }

    #[test]
    fn rejects_tampered_documents() {
        let json = to_json(&small_forest(2)).unwrap();
        // Not JSON at all.
        assert!(matches!(from_json("{"), Err(Error::Json(_))));
        // Valid JSON, missing version.
        assert!(matches!(
            from_json("{\"trees\":[]}"),
            Err(Error::CorruptModel(_))
        ));
        // Structurally valid JSON whose first leaf references a training row
        // that does not exist.
        let dangling = json.replacen("\"member_indices\":[", "\"member_indices\":[999999,", 1);
        assert!(matches!(from_json(&dangling), Err(Error::CorruptModel(_))));
    }
}
