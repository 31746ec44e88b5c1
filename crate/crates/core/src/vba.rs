//! Macro module documentation headers and lint rules.
//!
//! Modules arrive as exported plain-text source. Procedure detection is
//! line-based, not a VBA grammar: the documentation headers and all lint
//! patterns are line-local.

use serde::Serialize;

use crate::doc_comment::{parse_doc_comment, DocOrigin, DocRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProcedureKind {
    Sub,
    Function,
    Event,
}

/// One Sub/Function in a module. Line numbers are 1-based and inclusive
/// of the declaration and `End` lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Procedure {
    pub name: String,
    pub kind: ProcedureKind,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroModule {
    pub name: String,
    pub source: String,
    pub procedures: Vec<Procedure>,
}

impl MacroModule {
    /// Scan exported source for procedures. The source is kept verbatim.
    pub fn from_source(name: impl Into<String>, source: impl Into<String>) -> Self {
        let name = name.into();
        let source = source.into();
        let procedures = scan_procedures(&source);
        MacroModule {
            name,
            source,
            procedures,
        }
    }

    pub fn line_count(&self) -> usize {
        self.source.lines().count()
    }

    fn lines(&self) -> Vec<&str> {
        self.source.lines().collect()
    }
}

fn scan_procedures(source: &str) -> Vec<Procedure> {
    let lines: Vec<&str> = source.lines().collect();
    let mut procedures = Vec::new();
    let mut open: Option<(String, ProcedureKind, usize)> = None;

    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if open.is_none() {
            if let Some((name, kind)) = parse_declaration(line) {
                open = Some((name, kind, line_no));
            }
        } else if is_end_line(line) {
            let (name, kind, start) = open.take().unwrap();
            procedures.push(Procedure {
                name,
                kind,
                start_line: start,
                end_line: line_no,
            });
        }
    }
    // Unterminated procedure: runs to end of source.
    if let Some((name, kind, start)) = open {
        procedures.push(Procedure {
            name,
            kind,
            start_line: start,
            end_line: lines.len(),
        });
    }
    procedures
}

fn parse_declaration(line: &str) -> Option<(String, ProcedureKind)> {
    let mut tokens = line.split_whitespace().peekable();
    while matches!(
        tokens.peek().map(|t| t.to_ascii_lowercase()),
        Some(ref t) if t == "private" || t == "public" || t == "friend" || t == "static"
    ) {
        tokens.next();
    }
    let keyword = tokens.next()?.to_ascii_lowercase();
    let kind = match keyword.as_str() {
        "sub" => ProcedureKind::Sub,
        "function" => ProcedureKind::Function,
        _ => return None,
    };
    let rest = tokens.next()?;
    let name: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    if name.is_empty() {
        return None;
    }
    let kind = if kind == ProcedureKind::Sub && is_event_name(&name) {
        ProcedureKind::Event
    } else {
        kind
    };
    Some((name, kind))
}

fn is_event_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.starts_with("worksheet_") || lower.starts_with("workbook_")
}

fn is_end_line(line: &str) -> bool {
    let lower = line.trim().to_ascii_lowercase();
    lower == "end sub" || lower == "end function"
}

/// A comment line's payload, if the line is a comment (`'` or `Rem`).
fn comment_payload(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    if let Some(rest) = trimmed.strip_prefix('\'') {
        return Some(rest);
    }
    let lower = trimmed.to_ascii_lowercase();
    if lower == "rem" {
        return Some("");
    }
    if lower.starts_with("rem ") || lower.starts_with("rem\t") {
        return Some(&trimmed[4..]);
    }
    None
}

/// Documentation header extracted from one procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroHeader {
    pub procedure: String,
    /// The joined comment lines at the top of the body ("" when the
    /// procedure has no leading comment).
    pub header_text: String,
    /// `None` when the header does not parse as a structured record.
    pub record: Option<DocRecord>,
}

/// Extract the leading comment block of every procedure and parse it as a
/// structured documentation record. One entry per procedure, in order.
pub fn parse_macro_headers(module: &MacroModule) -> Vec<MacroHeader> {
    let lines = module.lines();
    module
        .procedures
        .iter()
        .map(|proc| {
            let mut header_lines = Vec::new();
            for line in lines
                .iter()
                .take(proc.end_line.saturating_sub(1))
                .skip(proc.start_line)
            {
                match comment_payload(line) {
                    Some(payload) => header_lines.push(payload.to_string()),
                    None => break,
                }
            }
            let header_text = header_lines.join("\n");
            let record = parse_doc_comment(&header_text).map(|r| {
                r.with_origin(DocOrigin::Macro {
                    module: module.name.clone(),
                    procedure: proc.name.clone(),
                })
            });
            MacroHeader {
                procedure: proc.name.clone(),
                header_text,
                record,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum MacroLintRule {
    ManualCalculation,
    PrecisionAsDisplayed,
    HardcodedSavePath,
    UndocumentedProcedure,
}

impl MacroLintRule {
    pub fn code(&self) -> &'static str {
        match self {
            MacroLintRule::ManualCalculation => "manual-calculation",
            MacroLintRule::PrecisionAsDisplayed => "precision-as-displayed",
            MacroLintRule::HardcodedSavePath => "hardcoded-save-path",
            MacroLintRule::UndocumentedProcedure => "undocumented-procedure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroLintFinding {
    pub rule: MacroLintRule,
    pub module: String,
    pub procedure: String,
    pub line: usize,
    pub message: String,
}

/// Run the line-pattern rules over every procedure of every module.
pub fn lint_macros(modules: &[MacroModule]) -> Vec<MacroLintFinding> {
    let mut findings = Vec::new();
    for module in modules {
        let lines = module.lines();
        let headers = parse_macro_headers(module);
        for (proc, header) in module.procedures.iter().zip(&headers) {
            if header.record.is_none() {
                findings.push(MacroLintFinding {
                    rule: MacroLintRule::UndocumentedProcedure,
                    module: module.name.clone(),
                    procedure: proc.name.clone(),
                    line: proc.start_line,
                    message: format!(
                        "procedure {} has no structured documentation header",
                        proc.name
                    ),
                });
            }
            for (offset, line) in lines[proc.start_line - 1..proc.end_line].iter().enumerate() {
                let line_no = proc.start_line + offset;
                if comment_payload(line).is_some() {
                    continue;
                }
                if let Some(rule) = match_hazard(line) {
                    findings.push(MacroLintFinding {
                        rule,
                        module: module.name.clone(),
                        procedure: proc.name.clone(),
                        line: line_no,
                        message: hazard_message(rule, line),
                    });
                }
            }
        }
    }
    findings
}

fn match_hazard(line: &str) -> Option<MacroLintRule> {
    let lower = line.to_ascii_lowercase();
    if let Some(eq) = lower.find('=') {
        let (lhs, rhs) = (lower[..eq].trim_end(), lower[eq + 1..].trim_start());
        let lhs_prop = lhs.rsplit('.').next().unwrap_or(lhs).trim();
        if lhs_prop == "calculation"
            && (rhs.starts_with("xlmanual") || rhs.starts_with("xlcalculationmanual"))
        {
            return Some(MacroLintRule::ManualCalculation);
        }
        if lhs_prop == "precisionasdisplayed" && rhs.starts_with("true") {
            return Some(MacroLintRule::PrecisionAsDisplayed);
        }
    }
    if lower.contains("saveas") && has_string_literal(line) {
        return Some(MacroLintRule::HardcodedSavePath);
    }
    None
}

fn has_string_literal(line: &str) -> bool {
    let mut parts = line.split('"');
    parts.next();
    matches!(parts.next(), Some(lit) if !lit.is_empty())
}

fn hazard_message(rule: MacroLintRule, line: &str) -> String {
    match rule {
        MacroLintRule::ManualCalculation => {
            "calculation set to manual; totals will not update on change".to_string()
        }
        MacroLintRule::PrecisionAsDisplayed => {
            "precision-as-displayed enabled; stored values are rounded to their display".to_string()
        }
        MacroLintRule::HardcodedSavePath => {
            format!("SaveAs with a literal path: {}", line.trim())
        }
        MacroLintRule::UndocumentedProcedure => line.trim().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MANUAL_CALC: &str = "\
Private Sub Worksheet_Activate()
    With Application
        .Calculation = xlManual
        .MaxChange = 0.001
    End With
    ActiveWorkbook.PrecisionAsDisplayed = False
End Sub
";

    const DOCUMENTED_SAVER: &str = "\
Private Sub Worksheet_Activate()
    'Author: Ken Jones
    'Date: 02/22/2006
    'Time: 9:38 AM
    'Purpose: To save the file every time the worksheet is used
    'Type: macro
    'Source: MyFile.xls, Sheet2, Worksheet_Activate
    'Range: Entire Workbook
    'Format: Excel file
    'Checked by: Raymond Payette
    'Date: 02/22/2006
    'Update: Review yearly
    ActiveWorkbook.SaveAs Filename:=\"C:\\MyFile.xls\"
End Sub
";

    #[test]
    fn detects_procedures_and_line_ranges() {
        let module = MacroModule::from_source("M", MANUAL_CALC);
        assert_eq!(module.procedures.len(), 1);
        let proc = &module.procedures[0];
        assert_eq!(proc.name, "Worksheet_Activate");
        assert_eq!(proc.kind, ProcedureKind::Event);
        assert_eq!(proc.start_line, 1);
        assert_eq!(proc.end_line, 7);
        assert_eq!(module.line_count(), 7);
    }

    #[test]
    fn line_count_conservation() {
        let source = format!("Option Explicit\n\n{MANUAL_CALC}\n{DOCUMENTED_SAVER}");
        let module = MacroModule::from_source("M", &source);
        let proc_lines: usize = module
            .procedures
            .iter()
            .map(|p| p.end_line - p.start_line + 1)
            .sum();
        let total = module.line_count();
        let mut covered = vec![false; total];
        for p in &module.procedures {
            for slot in &mut covered[p.start_line - 1..p.end_line] {
                assert!(!*slot, "procedure ranges overlap");
                *slot = true;
            }
        }
        let outside = covered.iter().filter(|c| !**c).count();
        assert_eq!(proc_lines + outside, total);
    }

    #[test]
    fn undocumented_manual_calc_listing() {
        let module = MacroModule::from_source("SheetEvents", MANUAL_CALC);
        let mut rules: Vec<_> = lint_macros(std::slice::from_ref(&module))
            .iter()
            .map(|f| f.rule)
            .collect();
        rules.sort();
        assert_eq!(
            rules,
            vec![
                MacroLintRule::ManualCalculation,
                MacroLintRule::UndocumentedProcedure
            ]
        );
        let findings = lint_macros(std::slice::from_ref(&module));
        for finding in &findings {
            let proc = &module.procedures[0];
            assert!(finding.line >= proc.start_line && finding.line <= proc.end_line);
        }
        let manual = findings
            .iter()
            .find(|f| f.rule == MacroLintRule::ManualCalculation)
            .unwrap();
        assert_eq!(manual.line, 3);
    }

    #[test]
    fn documented_saver_listing() {
        let module = MacroModule::from_source("Saver", DOCUMENTED_SAVER);
        let findings = lint_macros(std::slice::from_ref(&module));
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule, MacroLintRule::HardcodedSavePath);

        let headers = parse_macro_headers(&module);
        assert_eq!(headers.len(), 1);
        let record = headers[0].record.as_ref().expect("structured header");
        assert_eq!(record.author, "Ken Jones");
        assert_eq!(record.update.as_deref(), Some("Review yearly"));
        assert!(record.range.is_none());
        assert_eq!(record.range_note.as_deref(), Some("Entire Workbook"));
    }

    #[test]
    fn two_procedures_one_documented() {
        let source = format!("{DOCUMENTED_SAVER}\n{MANUAL_CALC}");
        let module = MacroModule::from_source("M", &source);
        assert_eq!(module.procedures.len(), 2);
        let headers = parse_macro_headers(&module);
        assert_eq!(headers.len(), 2);
        assert!(headers[0].record.is_some());
        assert!(headers[1].record.is_none());
        assert!(headers[1].header_text.is_empty());
    }

    #[test]
    fn precision_true_flagged_false_ignored() {
        let risky = "Sub A()\n    ActiveWorkbook.PrecisionAsDisplayed = True\nEnd Sub\n";
        let module = MacroModule::from_source("M", risky);
        let rules: Vec<_> = lint_macros(std::slice::from_ref(&module))
            .iter()
            .map(|f| f.rule)
            .collect();
        assert!(rules.contains(&MacroLintRule::PrecisionAsDisplayed));

        let safe = MacroModule::from_source("M", MANUAL_CALC);
        let rules: Vec<_> = lint_macros(std::slice::from_ref(&safe))
            .iter()
            .map(|f| f.rule)
            .collect();
        assert!(!rules.contains(&MacroLintRule::PrecisionAsDisplayed));
    }

    #[test]
    fn hazards_in_comments_do_not_fire() {
        let source =
            "Sub A()\n    ' .Calculation = xlManual\n    ' SaveAs \"C:\\x.xls\"\nEnd Sub\n";
        let module = MacroModule::from_source("M", source);
        let rules: Vec<_> = lint_macros(&[module]).iter().map(|f| f.rule).collect();
        assert_eq!(rules, vec![MacroLintRule::UndocumentedProcedure]);
    }

    #[test]
    fn rem_comments_count_as_header() {
        let source = "Sub A()\nRem Author: K\nRem Purpose: p\nEnd Sub\n";
        let module = MacroModule::from_source("M", source);
        let headers = parse_macro_headers(&module);
        assert_eq!(headers[0].header_text, "Author: K\nPurpose: p");
    }

    #[test]
    fn empty_module_list_yields_no_findings() {
        assert!(lint_macros(&[]).is_empty());
    }
}
