use super::{Elem, FiniteSubset, GroupError, GroupModel};

/// One element per line, coordinates separated by spaces. A lamplighter element
/// is written as its cursor followed by its lamp positions.
pub fn write_subset(set: &FiniteSubset) -> String {
    let mut s = format!("# group {}\n", set.model().name());
    for e in set {
        s.push_str(&e.to_string());
        s.push('\n');
    }
    s
}

/// Inverse of [`write_subset`]. Blank lines and `#` comments are ignored.
pub fn parse_subset(model: GroupModel, text: &str) -> Result<FiniteSubset, GroupError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut coords = Vec::new();
        for tok in line.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() {
                continue;
            }
            let v: i64 = tok
                .parse()
                .map_err(|_| GroupError::Parse { line: i + 1, msg: format!("bad integer {tok:?}") })?;
            coords.push(v);
        }
        let e = Elem::new(&coords);
        model.validate(&e).map_err(|err| GroupError::Parse { line: i + 1, msg: err.to_string() })?;
        out.push(e);
    }
    Ok(FiniteSubset::new(model, out))
}
