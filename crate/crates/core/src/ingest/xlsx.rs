//! Office Open XML workbook reader.
//!
//! Reads the parts the analyses need: workbook/sheet XML, shared strings,
//! styles (number formats and cell lock state), comments, defined names,
//! external link targets, and the core/app document properties. Small
//! parts are handled as element trees; sheet data is streamed.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use zip::ZipArchive;

use crate::formula::parse_formula;
use crate::model::{
    Cell, CellAddress, CellContent, CellRange, CommentText, DefinedNameTarget, ErrorCode, Scalar,
    Sheet, SheetFlag, SheetVisibility, Workbook,
};

use super::{attach_sidecar_vba, file_meta_from_fs, serial_to_date, IngestError, IngestReport};

type Zip = ZipArchive<BufReader<File>>;

pub fn load_xlsx(path: &Path) -> Result<IngestReport, IngestError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: display.clone(),
        source,
    })?;
    let mut zip =
        ZipArchive::new(BufReader::new(file)).map_err(|_| IngestError::NotAZipContainer {
            path: display.clone(),
        })?;

    let mut observations = Vec::new();
    let workbook_xml =
        read_part(&mut zip, "xl/workbook.xml").ok_or(IngestError::MissingWorkbookPart {
            part: "xl/workbook.xml".to_string(),
        })?;
    let workbook_tree =
        parse_tree(&workbook_xml).map_err(|detail| IngestError::SheetXmlMalformed {
            sheet: "(workbook)".to_string(),
            detail,
        })?;
    let workbook_root = workbook_tree.find("workbook").unwrap_or(&workbook_tree);

    let rels = read_relationships(&mut zip, "xl/_rels/workbook.xml.rels");
    let shared_strings = load_shared_strings(&mut zip, &mut observations);
    let styles = load_styles(&mut zip, &mut observations);

    let mut wb = Workbook::new(display);
    let date1904 = workbook_root
        .find("workbookPr")
        .and_then(|pr| pr.attr("date1904"))
        .is_some_and(|v| v == "1" || v == "true");
    if date1904 {
        observations.push("workbook uses the 1904 date system".to_string());
    }
    let iterative = workbook_root
        .find("calcPr")
        .and_then(|pr| pr.attr("iterate"))
        .is_some_and(|v| v == "1" || v == "true");

    // Sheets, in workbook order.
    let sheet_metas: Vec<&Element> = workbook_root
        .find("sheets")
        .map(|s| s.children_named("sheet").collect())
        .unwrap_or_default();
    if sheet_metas.is_empty() {
        return Err(IngestError::SheetXmlMalformed {
            sheet: "(workbook)".to_string(),
            detail: "workbook declares no sheets".to_string(),
        });
    }
    let mut last_error = None;
    for meta in &sheet_metas {
        let name = meta.attr("name").unwrap_or("Sheet").to_string();
        if wb.sheets.iter().any(|s| s.name == name) {
            observations.push(format!(
                "duplicate sheet name {name:?} in workbook part (skipped)"
            ));
            continue;
        }
        let rid = meta.attr("id").unwrap_or_default().to_string();
        let Some(target) = rels.iter().find(|r| r.id == rid).map(|r| r.target.clone()) else {
            observations.push(format!("sheet {name:?} has no part in the container"));
            continue;
        };
        let part_path = resolve_path("xl", &target);
        let Some(xml) = read_part(&mut zip, &part_path) else {
            observations.push(format!("sheet part {part_path} missing"));
            continue;
        };
        let mut sheet = Sheet::new(&name);
        sheet.visibility = match meta.attr("state") {
            Some("hidden") => SheetVisibility::Hidden,
            Some("veryHidden") => SheetVisibility::VeryHidden,
            _ => SheetVisibility::Visible,
        };
        if iterative {
            sheet.flags.insert(SheetFlag::CircularReference);
        }
        match parse_sheet_xml(
            &xml,
            &mut sheet,
            &shared_strings,
            &styles,
            &mut observations,
        ) {
            Ok(()) => {}
            Err(detail) => {
                observations.push(format!("sheet {name:?} could not be read: {detail}"));
                last_error = Some(IngestError::SheetXmlMalformed {
                    sheet: name,
                    detail,
                });
                continue;
            }
        }
        attach_sheet_extras(&mut zip, &part_path, &mut sheet, &mut observations);
        wb.sheets.push(sheet);
    }
    if wb.sheets.is_empty() {
        return Err(last_error.unwrap_or(IngestError::SheetXmlMalformed {
            sheet: "(workbook)".to_string(),
            detail: "no sheet could be read".to_string(),
        }));
    }

    load_defined_names(workbook_root, &mut wb, &mut observations);
    load_external_links(workbook_root, &mut zip, &rels, &mut wb);
    load_doc_properties(&mut zip, path, &mut wb);
    attach_sidecar_vba(path, &mut wb, &mut observations);

    Ok(IngestReport {
        workbook: wb,
        observations,
    })
}

// ---------------------------------------------------------------------
// Container plumbing

fn read_part(zip: &mut Zip, name: &str) -> Option<String> {
    let mut file = zip.by_name(name).ok()?;
    let mut text = String::new();
    file.read_to_string(&mut text).ok()?;
    Some(text)
}

#[derive(Debug, Clone)]
struct Relationship {
    id: String,
    rel_type: String,
    target: String,
}

fn read_relationships(zip: &mut Zip, part: &str) -> Vec<Relationship> {
    let Some(xml) = read_part(zip, part) else {
        return Vec::new();
    };
    let Ok(tree) = parse_tree(&xml) else {
        return Vec::new();
    };
    let root = tree.find("Relationships").unwrap_or(&tree);
    root.children_named("Relationship")
        .filter_map(|rel| {
            Some(Relationship {
                id: rel.attr("Id")?.to_string(),
                rel_type: rel.attr("Type")?.to_string(),
                target: rel.attr("Target")?.to_string(),
            })
        })
        .collect()
}

/// Resolve a relationship target against a base directory, handling
/// leading `/` and `..` segments.
fn resolve_path(base_dir: &str, target: &str) -> String {
    if let Some(absolute) = target.strip_prefix('/') {
        return absolute.to_string();
    }
    let mut segments: Vec<&str> = base_dir.split('/').filter(|s| !s.is_empty()).collect();
    for part in target.split('/') {
        match part {
            "" | "." => {}
            ".." => {
                segments.pop();
            }
            other => segments.push(other),
        }
    }
    segments.join("/")
}

fn rels_path_for(part_path: &str) -> String {
    match part_path.rsplit_once('/') {
        Some((dir, file)) => format!("{dir}/_rels/{file}.rels"),
        None => format!("_rels/{part_path}.rels"),
    }
}

// ---------------------------------------------------------------------
// Minimal XML element tree for the small parts

#[derive(Debug, Default)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Element>,
    text: String,
}

impl Element {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn find(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> {
        self.children.iter().filter(move |c| c.name == name)
    }

    fn collect_text_of(&self, name: &str, out: &mut String) {
        if self.name == name {
            out.push_str(&self.text);
        }
        for child in &self.children {
            child.collect_text_of(name, out);
        }
    }
}

fn local_name(start: &BytesStart) -> String {
    String::from_utf8_lossy(start.local_name().as_ref()).into_owned()
}

fn element_from(start: &BytesStart) -> Result<Element, String> {
    let mut element = Element {
        name: local_name(start),
        ..Element::default()
    };
    for attr in start.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(attr.key.local_name().as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| e.to_string())?
            .into_owned();
        element.attrs.push((key, value));
    }
    Ok(element)
}

fn parse_tree(xml: &str) -> Result<Element, String> {
    let mut reader = Reader::from_str(xml);
    let mut stack: Vec<Element> = vec![Element::default()];
    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Start(e) => stack.push(element_from(&e)?),
            Event::Empty(e) => {
                let element = element_from(&e)?;
                stack.last_mut().unwrap().children.push(element);
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| e.to_string())?;
                stack.last_mut().unwrap().text.push_str(&text);
            }
            Event::End(_) => {
                let element = stack
                    .pop()
                    .ok_or_else(|| "unbalanced end tag".to_string())?;
                stack
                    .last_mut()
                    .ok_or_else(|| "unbalanced end tag".to_string())?
                    .children
                    .push(element);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if stack.len() != 1 {
        return Err("unclosed element".to_string());
    }
    Ok(stack.pop().unwrap())
}

// ---------------------------------------------------------------------
// Shared strings and styles

fn load_shared_strings(zip: &mut Zip, observations: &mut Vec<String>) -> Vec<String> {
    let Some(xml) = read_part(zip, "xl/sharedStrings.xml") else {
        return Vec::new();
    };
    match parse_tree(&xml) {
        Ok(tree) => {
            let sst = tree.find("sst").unwrap_or(&tree);
            sst.children_named("si")
                .map(|si| {
                    let mut text = String::new();
                    si.collect_text_of("t", &mut text);
                    text
                })
                .collect()
        }
        Err(detail) => {
            observations.push(format!("sharedStrings.xml unreadable: {detail}"));
            Vec::new()
        }
    }
}

#[derive(Debug, Clone)]
struct StyleInfo {
    format_code: String,
    is_date: bool,
    locked: bool,
}

struct Styles {
    xfs: Vec<StyleInfo>,
}

impl Styles {
    fn get(&self, idx: Option<usize>) -> StyleInfo {
        idx.and_then(|i| self.xfs.get(i).cloned())
            .unwrap_or(StyleInfo {
                format_code: "General".to_string(),
                is_date: false,
                locked: true,
            })
    }
}

fn load_styles(zip: &mut Zip, observations: &mut Vec<String>) -> Styles {
    let mut styles = Styles { xfs: Vec::new() };
    let Some(xml) = read_part(zip, "xl/styles.xml") else {
        return styles;
    };
    let tree = match parse_tree(&xml) {
        Ok(tree) => tree,
        Err(detail) => {
            observations.push(format!("styles.xml unreadable: {detail}"));
            return styles;
        }
    };
    let root = tree.find("styleSheet").unwrap_or(&tree);
    let mut custom: Vec<(u32, String)> = Vec::new();
    if let Some(num_fmts) = root.find("numFmts") {
        for fmt in num_fmts.children_named("numFmt") {
            if let (Some(id), Some(code)) = (fmt.attr("numFmtId"), fmt.attr("formatCode")) {
                if let Ok(id) = id.parse() {
                    custom.push((id, code.to_string()));
                }
            }
        }
    }
    if let Some(cell_xfs) = root.find("cellXfs") {
        for xf in cell_xfs.children_named("xf") {
            let numfmt_id: u32 = xf
                .attr("numFmtId")
                .and_then(|v| v.parse().ok())
                .unwrap_or(0);
            let code = custom
                .iter()
                .find(|(id, _)| *id == numfmt_id)
                .map(|(_, code)| code.clone())
                .or_else(|| builtin_format_code(numfmt_id).map(str::to_string))
                .unwrap_or_else(|| "General".to_string());
            let locked = match xf.find("protection").and_then(|p| p.attr("locked")) {
                Some(v) => v == "1" || v == "true",
                None => true,
            };
            styles.xfs.push(StyleInfo {
                is_date: is_date_format(numfmt_id, &code),
                format_code: code,
                locked,
            });
        }
    }
    styles
}

fn builtin_format_code(id: u32) -> Option<&'static str> {
    Some(match id {
        0 => "General",
        1 => "0",
        2 => "0.00",
        3 => "#,##0",
        4 => "#,##0.00",
        9 => "0%",
        10 => "0.00%",
        11 => "0.00E+00",
        12 => "# ?/?",
        13 => "# ??/??",
        14 => "m/d/yyyy",
        15 => "d-mmm-yy",
        16 => "d-mmm",
        17 => "mmm-yy",
        18 => "h:mm AM/PM",
        19 => "h:mm:ss AM/PM",
        20 => "h:mm",
        21 => "h:mm:ss",
        22 => "m/d/yyyy h:mm",
        37 => "#,##0;(#,##0)",
        38 => "#,##0;[Red](#,##0)",
        39 => "#,##0.00;(#,##0.00)",
        40 => "#,##0.00;[Red](#,##0.00)",
        45 => "mm:ss",
        46 => "[h]:mm:ss",
        47 => "mm:ss.0",
        48 => "##0.0E+0",
        49 => "@",
        _ => return None,
    })
}

const BUILTIN_DATE_IDS: [u32; 6] = [14, 15, 16, 17, 22, 58];

fn is_date_format(id: u32, code: &str) -> bool {
    if BUILTIN_DATE_IDS.contains(&id) || (27..=36).contains(&id) || (50..=57).contains(&id) {
        return true;
    }
    if id > 0 && id < 164 {
        return false;
    }
    // Custom codes: date tokens outside quoted/bracketed runs, and no
    // characters foreign to date/number codes (keeps plain words like
    // "Currency" from reading as dates via their stray y).
    let mut stripped = String::new();
    let mut in_quote = false;
    let mut in_bracket = false;
    for c in code.chars() {
        match c {
            '"' => in_quote = !in_quote,
            '[' if !in_quote => in_bracket = true,
            ']' if !in_quote => in_bracket = false,
            _ if !in_quote && !in_bracket => stripped.push(c.to_ascii_lowercase()),
            _ => {}
        }
    }
    const CODE_ALPHABET: &str = "ymdhsap0#?.,:;/\\-_*@() ";
    if !stripped.chars().all(|c| CODE_ALPHABET.contains(c)) {
        return false;
    }
    stripped.contains('y')
        || stripped.contains('d')
        || (stripped.contains('m') && !stripped.contains('h') && !stripped.contains('s'))
}

// ---------------------------------------------------------------------
// Sheet XML

#[derive(Default)]
struct PendingCell {
    reference: Option<String>,
    style: Option<usize>,
    cell_type: String,
    value: Option<String>,
    formula: Option<String>,
    formula_shared_index: Option<u32>,
    formula_is_shared: bool,
    inline: Option<String>,
}

enum TextMode {
    None,
    Value,
    Formula,
    Inline,
}

fn parse_sheet_xml(
    xml: &str,
    sheet: &mut Sheet,
    shared_strings: &[String],
    styles: &Styles,
    observations: &mut Vec<String>,
) -> Result<(), String> {
    let mut reader = Reader::from_str(xml);
    let mut pending: Option<PendingCell> = None;
    let mut mode = TextMode::None;
    let mut any_hidden_row = false;
    let mut has_autofilter = false;
    let mut validation_ranges: Vec<CellRange> = Vec::new();
    // Shared-formula masters: (group index, text, anchor).
    let mut shared_formulas: Vec<(u32, String, CellAddress)> = Vec::new();

    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Start(e) => match local_name(&e).as_str() {
                "row" => {
                    if attr_of(&e, "hidden").is_some_and(|v| v == "1" || v == "true") {
                        any_hidden_row = true;
                    }
                }
                "c" => pending = Some(pending_from(&e)),
                "v" => {
                    if let Some(cell) = pending.as_mut() {
                        cell.value = Some(String::new());
                        mode = TextMode::Value;
                    }
                }
                "f" => {
                    if let Some(cell) = pending.as_mut() {
                        read_formula_attrs(&e, cell);
                        cell.formula = Some(String::new());
                        mode = TextMode::Formula;
                    }
                }
                "t" => {
                    if let Some(cell) = pending.as_mut() {
                        cell.inline.get_or_insert_with(String::new);
                        mode = TextMode::Inline;
                    }
                }
                "sheetProtection" => sheet.protected = true,
                "autoFilter" => has_autofilter = true,
                "scenarios" => {
                    sheet.flags.insert(SheetFlag::Scenarios);
                }
                "oleObjects" => {
                    sheet.flags.insert(SheetFlag::OleObjects);
                }
                "dataConsolidate" => {
                    sheet.flags.insert(SheetFlag::ConsolidationSources);
                }
                "dataValidation" => read_validation(&e, &mut validation_ranges),
                _ => {}
            },
            Event::Empty(e) => match local_name(&e).as_str() {
                "row" => {
                    if attr_of(&e, "hidden").is_some_and(|v| v == "1" || v == "true") {
                        any_hidden_row = true;
                    }
                }
                "c" => {
                    let cell = pending_from(&e);
                    finalize_cell(
                        cell,
                        sheet,
                        shared_strings,
                        styles,
                        &mut shared_formulas,
                        observations,
                    );
                }
                "f" => {
                    if let Some(cell) = pending.as_mut() {
                        read_formula_attrs(&e, cell);
                    }
                }
                "sheetProtection" => sheet.protected = true,
                "autoFilter" => has_autofilter = true,
                "scenarios" => {
                    sheet.flags.insert(SheetFlag::Scenarios);
                }
                "oleObjects" => {
                    sheet.flags.insert(SheetFlag::OleObjects);
                }
                "dataConsolidate" => {
                    sheet.flags.insert(SheetFlag::ConsolidationSources);
                }
                "dataValidation" => read_validation(&e, &mut validation_ranges),
                _ => {}
            },
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| e.to_string())?;
                if let Some(cell) = pending.as_mut() {
                    match mode {
                        TextMode::Value => {
                            cell.value.get_or_insert_with(String::new).push_str(&text)
                        }
                        TextMode::Formula => {
                            cell.formula.get_or_insert_with(String::new).push_str(&text)
                        }
                        TextMode::Inline => {
                            cell.inline.get_or_insert_with(String::new).push_str(&text)
                        }
                        TextMode::None => {}
                    }
                }
            }
            Event::End(e) => match String::from_utf8_lossy(e.local_name().as_ref()).as_ref() {
                "v" | "f" | "t" => mode = TextMode::None,
                "c" => {
                    if let Some(cell) = pending.take() {
                        finalize_cell(
                            cell,
                            sheet,
                            shared_strings,
                            styles,
                            &mut shared_formulas,
                            observations,
                        );
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }

    if has_autofilter && any_hidden_row {
        sheet.flags.insert(SheetFlag::FilteredHiddenRows);
    }
    apply_validation(sheet, &validation_ranges, observations);
    Ok(())
}

fn attr_of(e: &BytesStart, name: &str) -> Option<String> {
    e.attributes().flatten().find_map(|a| {
        if a.key.local_name().as_ref() == name.as_bytes() {
            a.unescape_value().ok().map(|v| v.into_owned())
        } else {
            None
        }
    })
}

fn pending_from(e: &BytesStart) -> PendingCell {
    PendingCell {
        reference: attr_of(e, "r"),
        style: attr_of(e, "s").and_then(|v| v.parse().ok()),
        cell_type: attr_of(e, "t").unwrap_or_default(),
        ..PendingCell::default()
    }
}

fn read_formula_attrs(e: &BytesStart, cell: &mut PendingCell) {
    if attr_of(e, "t").as_deref() == Some("shared") {
        cell.formula_is_shared = true;
        cell.formula_shared_index = attr_of(e, "si").and_then(|v| v.parse().ok());
    }
}

fn read_validation(e: &BytesStart, ranges: &mut Vec<CellRange>) {
    if let Some(sqref) = attr_of(e, "sqref") {
        for token in sqref.split_whitespace() {
            if let Ok(range) = CellRange::parse(token) {
                ranges.push(range);
            }
        }
    }
}

fn apply_validation(sheet: &mut Sheet, ranges: &[CellRange], observations: &mut Vec<String>) {
    for range in ranges {
        if range.area() > 10_000 {
            // Mark existing cells only; materializing a giant empty
            // validated region would swamp the model.
            observations.push(format!(
                "sheet {:?}: validation range {} too large to materialize empty cells",
                sheet.name,
                range.render()
            ));
            let addrs: Vec<CellAddress> = sheet
                .cells()
                .map(|c| c.address)
                .filter(|a| range.contains(*a))
                .collect();
            for addr in addrs {
                sheet.cell_entry(addr).has_validation = true;
            }
        } else {
            for addr in range.iter() {
                sheet.cell_entry(addr).has_validation = true;
            }
        }
    }
}

fn finalize_cell(
    pending: PendingCell,
    sheet: &mut Sheet,
    shared_strings: &[String],
    styles: &Styles,
    shared_formulas: &mut Vec<(u32, String, CellAddress)>,
    observations: &mut Vec<String>,
) {
    let Some(reference) = pending.reference.as_deref() else {
        observations.push(format!("sheet {:?}: cell without an address", sheet.name));
        return;
    };
    let addr = match CellAddress::parse_a1(reference) {
        Ok(addr) => addr,
        Err(e) => {
            observations.push(format!("sheet {:?}: {e}", sheet.name));
            return;
        }
    };
    let style = styles.get(pending.style);

    // Resolve shared formulas: the master carries text, followers are
    // rebased copies of it.
    let formula_text = match (&pending.formula, pending.formula_is_shared) {
        (Some(text), true) if !text.is_empty() => {
            if let Some(index) = pending.formula_shared_index {
                shared_formulas.push((index, text.clone(), addr));
            }
            Some(text.clone())
        }
        (Some(text), false) if !text.is_empty() => Some(text.clone()),
        (_, true) => {
            let master = pending
                .formula_shared_index
                .and_then(|index| shared_formulas.iter().find(|(i, _, _)| *i == index));
            match master {
                Some((_, master_text, master_addr)) => {
                    match parse_formula(master_text).and_then(|ast| ast.rebase(*master_addr, addr))
                    {
                        Ok(ast) => Some(ast.render().trim_start_matches('=').to_string()),
                        Err(e) => {
                            observations.push(format!(
                                "sheet {:?}: shared formula at {} could not be rebased: {e}",
                                sheet.name,
                                addr.render_a1()
                            ));
                            Some(master_text.clone())
                        }
                    }
                }
                None => {
                    observations.push(format!(
                        "sheet {:?}: shared formula at {} has no master",
                        sheet.name,
                        addr.render_a1()
                    ));
                    None
                }
            }
        }
        _ => None,
    };

    let mut cell = if let Some(text) = formula_text {
        let text = if text.starts_with('=') {
            text
        } else {
            format!("={text}")
        };
        let mut cell = Cell::new(addr, CellContent::Formula(text));
        cell.cached_value = cached_scalar(&pending, shared_strings, observations, sheet, addr);
        cell
    } else {
        constant_cell(addr, &pending, &style, shared_strings, sheet, observations)
    };

    cell.number_format = style.format_code.clone();
    cell.locked = style.locked;

    if sheet.cell(addr).is_some_and(|c| !c.content.is_empty()) {
        observations.push(format!(
            "sheet {:?}: duplicate cell {} in source part (first kept)",
            sheet.name,
            addr.render_a1()
        ));
        return;
    }
    if cell.is_blank_record() {
        return;
    }
    // Preserve anything a validation pass or comment already attached.
    if let Some(existing) = sheet.cell(addr) {
        cell.has_validation |= existing.has_validation;
        if cell.comment.is_none() {
            cell.comment = existing.comment.clone();
        }
    }
    sheet.insert(cell);
}

fn cached_scalar(
    pending: &PendingCell,
    shared_strings: &[String],
    observations: &mut Vec<String>,
    sheet: &Sheet,
    addr: CellAddress,
) -> Option<Scalar> {
    let value = pending.value.as_deref()?;
    match pending.cell_type.as_str() {
        "" | "n" => value.trim().parse::<f64>().ok().map(Scalar::Number),
        "str" => Some(Scalar::Text(value.to_string())),
        "s" => shared_string_at(shared_strings, value, observations, sheet, addr).map(Scalar::Text),
        "b" => Some(Scalar::Bool(value.trim() == "1" || value.trim() == "true")),
        "e" => match ErrorCode::parse(value.trim()) {
            Some(code) => Some(Scalar::Error(code)),
            None => {
                observations.push(format!(
                    "sheet {:?}: unknown error value {value:?} at {}",
                    sheet.name,
                    addr.render_a1()
                ));
                Some(Scalar::Text(value.to_string()))
            }
        },
        _ => Some(Scalar::Text(value.to_string())),
    }
}

fn shared_string_at(
    shared_strings: &[String],
    raw_index: &str,
    observations: &mut Vec<String>,
    sheet: &Sheet,
    addr: CellAddress,
) -> Option<String> {
    let index: usize = match raw_index.trim().parse() {
        Ok(i) => i,
        Err(_) => {
            observations.push(format!(
                "sheet {:?}: bad shared string index {raw_index:?} at {}",
                sheet.name,
                addr.render_a1()
            ));
            return None;
        }
    };
    match shared_strings.get(index) {
        Some(text) => Some(text.clone()),
        None => {
            observations.push(format!(
                "sheet {:?}: shared string {index} out of range at {}",
                sheet.name,
                addr.render_a1()
            ));
            None
        }
    }
}

fn constant_cell(
    addr: CellAddress,
    pending: &PendingCell,
    style: &StyleInfo,
    shared_strings: &[String],
    sheet: &Sheet,
    observations: &mut Vec<String>,
) -> Cell {
    let value = pending.value.as_deref();
    match pending.cell_type.as_str() {
        "s" => {
            let text = value
                .and_then(|v| shared_string_at(shared_strings, v, observations, sheet, addr))
                .unwrap_or_default();
            Cell::new(addr, CellContent::Text(text))
        }
        "inlineStr" => Cell::new(
            addr,
            CellContent::Text(pending.inline.clone().unwrap_or_default()),
        ),
        "str" => Cell::new(
            addr,
            CellContent::Text(value.unwrap_or_default().to_string()),
        ),
        "b" => {
            let truthy = value
                .map(str::trim)
                .is_some_and(|v| v == "1" || v == "true");
            Cell::new(addr, CellContent::Number(if truthy { 1.0 } else { 0.0 }))
        }
        "e" => {
            let text = value.unwrap_or_default().to_string();
            let mut cell = Cell::new(addr, CellContent::Text(text.clone()));
            if let Some(code) = ErrorCode::parse(text.trim()) {
                cell.cached_value = Some(Scalar::Error(code));
            }
            cell
        }
        "d" => match value.and_then(parse_iso_datetime) {
            Some(datetime) => {
                let mut cell = Cell::new(addr, CellContent::Date(datetime));
                cell.cached_value = Some(Scalar::Number(super::date_to_serial(datetime)));
                cell
            }
            None => {
                observations.push(format!(
                    "sheet {:?}: unparseable ISO date at {}",
                    sheet.name,
                    addr.render_a1()
                ));
                Cell::new(
                    addr,
                    CellContent::Text(value.unwrap_or_default().to_string()),
                )
            }
        },
        "" | "n" => match value.map(str::trim).and_then(|v| v.parse::<f64>().ok()) {
            Some(number) => {
                if style.is_date {
                    match serial_to_date(number) {
                        Some(datetime) => {
                            let mut cell = Cell::new(addr, CellContent::Date(datetime));
                            cell.cached_value = Some(Scalar::Number(number));
                            cell
                        }
                        None => {
                            observations.push(format!(
                                "sheet {:?}: serial {number} at {} is outside the date range",
                                sheet.name,
                                addr.render_a1()
                            ));
                            Cell::new(addr, CellContent::Number(number))
                        }
                    }
                } else {
                    Cell::new(addr, CellContent::Number(number))
                }
            }
            None => {
                if let Some(v) = value {
                    if !v.trim().is_empty() {
                        observations.push(format!(
                            "sheet {:?}: unparseable number {v:?} at {}",
                            sheet.name,
                            addr.render_a1()
                        ));
                        return Cell::new(addr, CellContent::Text(v.to_string()));
                    }
                }
                Cell::new(addr, CellContent::Empty)
            }
        },
        other => {
            observations.push(format!(
                "sheet {:?}: unknown cell type {other:?} at {} (kept as text)",
                sheet.name,
                addr.render_a1()
            ));
            Cell::new(
                addr,
                CellContent::Text(value.unwrap_or_default().to_string()),
            )
        }
    }
}

fn parse_iso_datetime(text: &str) -> Option<chrono::NaiveDateTime> {
    let text = text.trim().trim_end_matches('Z');
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S") {
        return Some(dt);
    }
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f") {
        return Some(dt);
    }
    chrono::NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .map(|d| d.into())
}

// ---------------------------------------------------------------------
// Per-sheet companion parts: comments and part-backed flags

fn attach_sheet_extras(
    zip: &mut Zip,
    part_path: &str,
    sheet: &mut Sheet,
    observations: &mut Vec<String>,
) {
    let rels = read_relationships(zip, &rels_path_for(part_path));
    let base_dir = part_path.rsplit_once('/').map(|(d, _)| d).unwrap_or("");
    for rel in &rels {
        if rel.rel_type.ends_with("/comments") {
            let comments_path = resolve_path(base_dir, &rel.target);
            match read_part(zip, &comments_path) {
                Some(xml) => attach_comments(&xml, sheet, observations),
                None => observations.push(format!("comments part {comments_path} missing")),
            }
        } else if rel.rel_type.ends_with("/pivotTable") {
            sheet.flags.insert(SheetFlag::PivotTables);
        } else if rel.rel_type.ends_with("/queryTable") {
            sheet.flags.insert(SheetFlag::QueryTables);
        }
    }
}

fn attach_comments(xml: &str, sheet: &mut Sheet, observations: &mut Vec<String>) {
    let tree = match parse_tree(xml) {
        Ok(tree) => tree,
        Err(detail) => {
            observations.push(format!(
                "comments for sheet {:?} unreadable: {detail}",
                sheet.name
            ));
            return;
        }
    };
    let root = tree.find("comments").unwrap_or(&tree);
    let authors: Vec<String> = root
        .find("authors")
        .map(|a| {
            a.children_named("author")
                .map(|el| el.text.clone())
                .collect()
        })
        .unwrap_or_default();
    let Some(list) = root.find("commentList") else {
        return;
    };
    for comment in list.children_named("comment") {
        let Some(reference) = comment.attr("ref") else {
            continue;
        };
        let addr = match CellAddress::parse_a1(reference) {
            Ok(addr) => addr,
            Err(e) => {
                observations.push(format!("comment with bad address: {e}"));
                continue;
            }
        };
        let mut body = String::new();
        if let Some(text) = comment.find("text") {
            text.collect_text_of("t", &mut body);
        }
        let author_prefix = comment
            .attr("authorId")
            .and_then(|id| id.parse::<usize>().ok())
            .and_then(|id| authors.get(id))
            .filter(|a| !a.is_empty())
            .cloned();
        sheet.cell_entry(addr).comment = Some(CommentText {
            author_prefix,
            body,
        });
    }
}

// ---------------------------------------------------------------------
// Workbook-level parts

fn load_defined_names(tree: &Element, wb: &mut Workbook, observations: &mut Vec<String>) {
    let Some(names) = tree.find("definedNames") else {
        return;
    };
    for defined in names.children_named("definedName") {
        let Some(name) = defined.attr("name") else {
            continue;
        };
        if name.starts_with("_xlnm") {
            continue;
        }
        if wb
            .defined_names
            .keys()
            .any(|k| k.eq_ignore_ascii_case(name))
        {
            observations.push(format!("duplicate defined name {name:?} (first kept)"));
            continue;
        }
        let target = parse_name_target(defined.text.trim());
        wb.defined_names.insert(name.to_string(), target);
    }
}

fn parse_name_target(text: &str) -> DefinedNameTarget {
    if let Some((sheet_part, range_part)) = text.rsplit_once('!') {
        let sheet = sheet_part.trim_matches('\'').replace("''", "'");
        let plain: String = range_part.chars().filter(|c| *c != '$').collect();
        if let Ok(range) = CellRange::parse(&plain) {
            return DefinedNameTarget::Range { sheet, range };
        }
    }
    DefinedNameTarget::Formula(text.to_string())
}

fn load_external_links(tree: &Element, zip: &mut Zip, rels: &[Relationship], wb: &mut Workbook) {
    let Some(references) = tree.find("externalReferences") else {
        return;
    };
    for reference in references.children_named("externalReference") {
        let Some(rid) = reference.attr("id") else {
            continue;
        };
        let Some(rel) = rels.iter().find(|r| r.id == rid) else {
            continue;
        };
        let link_part = resolve_path("xl", &rel.target);
        let link_rels = read_relationships(zip, &rels_path_for(&link_part));
        for link_rel in link_rels {
            if link_rel.rel_type.ends_with("/externalLinkPath") {
                wb.external_links.push(link_rel.target);
            }
        }
    }
}

fn load_doc_properties(zip: &mut Zip, path: &Path, wb: &mut Workbook) {
    wb.file_meta = file_meta_from_fs(path);
    let mut application = None;
    let mut app_version = None;
    if let Some(xml) = read_part(zip, "docProps/core.xml") {
        if let Ok(tree) = parse_tree(&xml) {
            let root = tree.find("coreProperties").unwrap_or(&tree);
            if let Some(creator) = root.find("creator") {
                if !creator.text.is_empty() {
                    wb.file_meta.author_property = Some(creator.text.clone());
                }
            }
            if wb.file_meta.created.is_none() {
                wb.file_meta.created = root
                    .find("created")
                    .and_then(|e| parse_iso_datetime(&e.text));
            }
            if wb.file_meta.modified.is_none() {
                wb.file_meta.modified = root
                    .find("modified")
                    .and_then(|e| parse_iso_datetime(&e.text));
            }
        }
    }
    if let Some(xml) = read_part(zip, "docProps/app.xml") {
        if let Ok(tree) = parse_tree(&xml) {
            let root = tree.find("Properties").unwrap_or(&tree);
            if let Some(manager) = root.find("Manager") {
                if !manager.text.is_empty() {
                    wb.file_meta.manager_property = Some(manager.text.clone());
                }
            }
            application = root
                .find("Application")
                .map(|e| e.text.clone())
                .filter(|t| !t.is_empty());
            app_version = root
                .find("AppVersion")
                .map(|e| e.text.clone())
                .filter(|t| !t.is_empty());
        }
    }
    wb.file_meta.file_format = match (application, app_version) {
        (Some(app), Some(version)) => format!("xlsx ({app} {version})"),
        (Some(app), None) => format!("xlsx ({app})"),
        _ => "xlsx".to_string(),
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_resolution() {
        assert_eq!(
            resolve_path("xl", "worksheets/sheet1.xml"),
            "xl/worksheets/sheet1.xml"
        );
        assert_eq!(
            resolve_path("xl/worksheets", "../comments1.xml"),
            "xl/comments1.xml"
        );
        assert_eq!(resolve_path("xl", "/xl/styles.xml"), "xl/styles.xml");
        assert_eq!(
            rels_path_for("xl/worksheets/sheet1.xml"),
            "xl/worksheets/_rels/sheet1.xml.rels"
        );
        assert_eq!(
            rels_path_for("xl/workbook.xml"),
            "xl/_rels/workbook.xml.rels"
        );
    }

    #[test]
    fn date_format_detection() {
        assert!(is_date_format(14, "m/d/yyyy"));
        assert!(is_date_format(22, "m/d/yyyy h:mm"));
        assert!(is_date_format(164, "yyyy-mm-dd"));
        assert!(is_date_format(165, "dd\\.mm\\.yy"));
        assert!(!is_date_format(0, "General"));
        assert!(!is_date_format(4, "#,##0.00"));
        assert!(!is_date_format(20, "h:mm"));
        assert!(!is_date_format(45, "mm:ss"));
        // Quoted and bracketed runs are not date tokens.
        assert!(!is_date_format(166, "0.00\"dkr\""));
        // Plain words never read as date codes.
        assert!(!is_date_format(164, "Currency"));
        assert!(!is_date_format(164, "Currency-rounded"));
        assert!(!is_date_format(164, "General Ledger"));
        assert!(!is_date_format(167, "[h]:mm:ss"));
        assert!(is_date_format(168, "[Blue]yyyy"));
    }

    #[test]
    fn name_target_parsing() {
        match parse_name_target("Sheet1!$A$2:$A$10") {
            DefinedNameTarget::Range { sheet, range } => {
                assert_eq!(sheet, "Sheet1");
                assert_eq!(range, CellRange::parse("A2:A10").unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_name_target("'Data One'!$B$1") {
            DefinedNameTarget::Range { sheet, .. } => assert_eq!(sheet, "Data One"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_name_target("OFFSET(Sheet1!$A$1,0,0,3,1)"),
            DefinedNameTarget::Formula(_)
        ));
    }

    #[test]
    fn element_tree_collects_rich_text() {
        let tree = parse_tree(
            "<text><r><rPr><b/></rPr><t>Author: </t></r><r><t xml:space=\"preserve\">Ray</t></r></text>",
        )
        .unwrap();
        let mut out = String::new();
        tree.find("text").unwrap().collect_text_of("t", &mut out);
        assert_eq!(out, "Author: Ray");
    }
}
