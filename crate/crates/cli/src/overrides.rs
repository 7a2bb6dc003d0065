use serde_json::Value;

/// Applies `key.path=value` to a JSON document, creating objects on the way.
/// The value is parsed as JSON and taken as a plain string when that fails,
/// so `--set synth.trajectory=s-curve` works without quoting.
pub fn apply(doc: &mut Value, assignment: &str) -> Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override '{assignment}' is not key.path=value"))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(format!("override '{assignment}' has an empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for key in path.split('.') {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return Err(format!("override '{path}': '{key}' is inside a non-object"));
            }
        }
        node = node.as_object_mut().expect("object").entry(key).or_insert(Value::Null);
    }
    *node = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_keys_are_created() {
        let mut v = json!({"odom": {"enabled": false}});
        apply(&mut v, "odom.enabled=true").unwrap();
        apply(&mut v, "odom.params.k=8").unwrap();
        apply(&mut v, "synth.trajectory=s-curve").unwrap();
        assert_eq!(v, json!({"odom": {"enabled": true, "params": {"k": 8}}, "synth": {"trajectory": "s-curve"}}));
    }

    #[test]
    fn malformed_overrides_fail() {
        let mut v = json!({"seed": 1});
        assert!(apply(&mut v, "seed").is_err());
        assert!(apply(&mut v, "a..b=1").is_err());
        assert!(apply(&mut v, "seed.x=1").is_err());
    }
}
