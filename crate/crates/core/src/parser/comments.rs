/// Strips comment markers from a run of `///`, `//` or `/** */` comments and
/// collapses whitespace. NatSpec tags such as `@param` are kept verbatim.
pub fn clean_comment(raw: &str) -> String {
    let mut words = Vec::new();
    for line in raw.lines() {
        let mut line = line.trim();
        if let Some(rest) = line.strip_prefix("/**") {
            line = rest;
        } else if let Some(rest) = line.strip_prefix("/*") {
            line = rest;
        } else if line.starts_with("//") {
            line = line.trim_start_matches('/');
        }
        if let Some(rest) = line.strip_suffix("*/") {
            line = rest;
        }
        let line = line.trim_start();
        let line = line.strip_prefix('*').unwrap_or(line);
        words.extend(line.split_whitespace());
    }
    words.join(" ")
}
