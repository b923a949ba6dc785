//! Indexed context blocks shown to the worker.

/// Upper bound on materials per worker call.
pub const MAX_MATERIALS: usize = 64;

/// One retrievable item as shown to the worker. For knowledge-graph triples
/// `entity` is the tail handle, which the planner may visit next.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Material {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
}

impl Material {
    pub fn text(text: impl Into<String>) -> Self {
        Material {
            text: text.into(),
            entity: None,
        }
    }
}

/// `"[i] content"` lines, zero-based, newline-separated. Items beyond
/// [`MAX_MATERIALS`] are dropped.
pub fn format_materials<S: AsRef<str>>(items: &[S]) -> String {
    items
        .iter()
        .take(MAX_MATERIALS)
        .enumerate()
        .map(|(i, s)| format!("[{i}] {}", s.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Recovers `(index, content)` pairs from a block built by
/// [`format_materials`]. Assumes items themselves contain no newlines.
pub fn parse_materials(block: &str) -> Vec<(usize, String)> {
    block
        .lines()
        .filter_map(|line| {
            let rest = line.strip_prefix('[')?;
            let (num, body) = rest.split_once("] ")?;
            Some((num.parse().ok()?, body.to_owned()))
        })
        .collect()
}
