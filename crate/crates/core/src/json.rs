//! Byte-stable JSON output: sorted keys, two-space indent, trailing newline.
//! Floats use the shortest representation that round-trips.

use serde::Serialize;

pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // serde_json's default Map is a BTreeMap, so going through Value sorts keys
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
