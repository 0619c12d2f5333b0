use super::tokens::multiline_string_spans;

/// Leading whitespace of the line containing `offset`.
pub fn line_indent(text: &str, offset: usize) -> &str {
    let start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line = &text[start..];
    let width = line.len() - line.trim_start_matches([' ', '\t']).len();
    &line[..width]
}

/// The indentation step used by the file: the smallest positive increase
/// between consecutive indented code lines. Defaults to four spaces.
pub fn indent_unit(text: &str) -> String {
    let mut prev = "";
    let mut best: Option<&str> = None;
    for line in text.lines() {
        let trimmed = line.trim_start_matches([' ', '\t']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = &line[..line.len() - trimmed.len()];
        if indent.len() > prev.len() && indent.starts_with(prev) {
            let step = &indent[prev.len()..];
            if best.is_none_or(|b| step.len() < b.len()) {
                best = Some(step);
            }
        }
        prev = indent;
    }
    best.unwrap_or("    ").to_string()
}

/// Byte offsets where lines start that lie inside a multi-line string, so
/// their leading whitespace is string content.
fn string_interior_lines(text: &str) -> Vec<usize> {
    let spans = multiline_string_spans(text);
    let mut out = Vec::new();
    for s in spans {
        for (i, b) in text[s.start..s.end].bytes().enumerate() {
            if b == b'\n' {
                out.push(s.start + i + 1);
            }
        }
    }
    out
}

fn map_lines(text: &str, mut f: impl FnMut(&str) -> Option<String>) -> Option<String> {
    let interior = string_interior_lines(text);
    let mut out = String::with_capacity(text.len());
    let mut offset = 0;
    for (n, line) in text.split_inclusive('\n').enumerate() {
        if n == 0 || interior.binary_search(&offset).is_ok() {
            out.push_str(line);
        } else {
            out.push_str(&f(line)?);
        }
        offset += line.len();
    }
    Some(out)
}

/// Removes `prefix` from every line after the first. Lines that lack the
/// full prefix (blank lines, bracket continuations) lose only their leading
/// whitespace; lines inside multi-line strings are left untouched.
pub fn dedent_block(block: &str, prefix: &str) -> String {
    map_lines(block, |line| {
        Some(match line.strip_prefix(prefix) {
            Some(rest) => rest.to_string(),
            None => line.trim_start_matches([' ', '\t']).to_string(),
        })
    })
    .unwrap_or_else(|| block.to_string())
}

/// Prepends `prefix` to every non-blank line after the first, except lines
/// inside multi-line strings.
pub fn reindent_block(block: &str, prefix: &str) -> String {
    map_lines(block, |line| {
        if line.trim().is_empty() {
            Some(line.to_string())
        } else {
            Some(format!("{prefix}{line}"))
        }
    })
    .unwrap_or_else(|| block.to_string())
}

/// Strips the whitespace prefix common to all non-blank lines.
pub fn dedent_common(text: &str) -> String {
    let common = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| &l[..l.len() - l.trim_start_matches([' ', '\t']).len()])
        .reduce(|a, b| {
            let n = a
                .bytes()
                .zip(b.bytes())
                .take_while(|(x, y)| x == y)
                .count();
            &a[..n]
        })
        .unwrap_or("");
    if common.is_empty() {
        return text.to_string();
    }
    text.split_inclusive('\n')
        .map(|l| l.strip_prefix(common).unwrap_or(l.trim_start_matches([' ', '\t'])))
        .collect()
}
