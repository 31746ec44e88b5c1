//! Shared CSV and Markdown row rendering.

pub(crate) fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') || value.contains('\r') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

pub(crate) fn csv_row(values: &[String]) -> String {
    values
        .iter()
        .map(|v| csv_field(v))
        .collect::<Vec<_>>()
        .join(",")
}

pub(crate) fn md_row(values: &[String]) -> String {
    let escaped: Vec<String> = values.iter().map(|v| v.replace('|', "\\|")).collect();
    format!("| {} |", escaped.join(" | "))
}

pub(crate) fn md_separator(width: usize) -> String {
    format!("|{}", " --- |".repeat(width))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_row(&["a".into(), "b,c".into()]), "a,\"b,c\"");
    }
}
