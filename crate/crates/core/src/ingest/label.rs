/// Normalizes a raw SNI hostname into a class label: lowercase, with ASCII
/// digits, hyphens and underscores removed from every dot-separated label.
/// Labels left empty are dropped together with their dot.
///
/// Returns `None` when nothing remains (e.g. `"123.456"`), meaning the flow
/// cannot be labeled.
pub fn clean_label(raw: &str) -> Option<String> {
    let cleaned: Vec<String> = raw
        .split('.')
        .map(|part| {
            part.chars()
                .filter(|c| !(c.is_ascii_digit() || *c == '-' || *c == '_'))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|part| !part.is_empty())
        .collect();
    if cleaned.is_empty() {
        None
    } else {
        Some(cleaned.join("."))
    }
}
