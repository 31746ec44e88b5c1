//! Renders the plain-text workbook fixture format as an Office Open XML
//! container, for cross-loader equivalence testing.
//!
//! This crate deliberately re-implements the fixture grammar instead of
//! reusing the main loader, so the xlsx route stays an independent
//! construction path: fixture text -> (this crate) -> xlsx bytes ->
//! (main loader) -> model, compared against fixture text -> (fixture
//! loader) -> model.

use std::collections::BTreeMap;
use std::io::Write;

use zip::write::SimpleFileOptions;
use zip::ZipWriter;

#[derive(Debug)]
pub struct FixtureError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for FixtureError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "fixture line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for FixtureError {}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Text(String),
    Number(f64),
    Date(chrono::NaiveDateTime),
    Formula {
        cached: Option<Cached>,
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Cached {
    Number(f64),
    Text(String),
    Bool(bool),
    Error(String),
}

#[derive(Debug, Clone)]
struct FixtureCell {
    row: u32,
    col: u32,
    value: Value,
    format: Option<String>,
    locked: bool,
    validated: bool,
}

#[derive(Debug, Clone)]
struct FixtureComment {
    row: u32,
    col: u32,
    body: String,
}

#[derive(Debug, Default)]
struct FixtureSheet {
    name: String,
    cells: Vec<FixtureCell>,
    comments: Vec<FixtureComment>,
}

#[derive(Debug, Default)]
struct Fixture {
    sheets: Vec<FixtureSheet>,
    /// name -> (sheet, start_a1, end_a1)
    names: Vec<(String, String, String)>,
}

/// Convert fixture text to xlsx bytes.
pub fn fixture_to_xlsx(text: &str) -> Result<Vec<u8>, FixtureError> {
    let fixture = parse_fixture(text)?;
    Ok(write_xlsx(&fixture))
}

// ---------------------------------------------------------------------
// Independent fixture parser

const ERROR_CODES: [&str; 7] = [
    "#DIV/0!", "#N/A", "#NAME?", "#NULL!", "#NUM!", "#REF!", "#VALUE!",
];
const KEYWORDS: [&str; 4] = ["FORMULA", "FORMAT", "LOCKED", "VALIDATED"];

fn err(line: usize, message: impl Into<String>) -> FixtureError {
    FixtureError {
        line,
        message: message.into(),
    }
}

fn parse_a1(text: &str, line: usize) -> Result<(u32, u32), FixtureError> {
    let letters: String = text
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    let digits = &text[letters.len()..];
    if letters.is_empty() || digits.is_empty() {
        return Err(err(line, format!("bad address {text:?}")));
    }
    let mut col: u32 = 0;
    for c in letters.chars() {
        col = col * 26 + (c.to_ascii_uppercase() as u32 - 'A' as u32 + 1);
    }
    let row: u32 = digits
        .parse()
        .map_err(|_| err(line, format!("bad address {text:?}")))?;
    if row == 0 {
        return Err(err(line, format!("bad address {text:?}")));
    }
    Ok((row, col))
}

fn col_letters(col: u32) -> String {
    let mut n = col;
    let mut out = Vec::new();
    while n > 0 {
        out.push(b'A' + ((n - 1) % 26) as u8);
        n = (n - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

fn a1(row: u32, col: u32) -> String {
    format!("{}{}", col_letters(col), row)
}

fn parse_fixture(text: &str) -> Result<Fixture, FixtureError> {
    let lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    let mut fixture = Fixture::default();
    let mut i = 0;
    while i < lines.len() {
        let line_no = i + 1;
        let line = lines[i];
        i += 1;
        if line.trim().is_empty() {
            continue;
        }
        let (directive, rest) = line.split_once(' ').unwrap_or((line, ""));
        let rest = rest.trim();
        match directive {
            "SHEET" => fixture.sheets.push(FixtureSheet {
                name: rest.to_string(),
                ..Default::default()
            }),
            "CELL" => {
                let sheet = fixture
                    .sheets
                    .last_mut()
                    .ok_or_else(|| err(line_no, "CELL before SHEET"))?;
                sheet.cells.push(parse_cell(rest, line_no)?);
            }
            "COMMENT" => {
                let mut tokens = rest.split_whitespace();
                let addr = tokens
                    .next()
                    .ok_or_else(|| err(line_no, "COMMENT needs address"))?;
                let (row, col) = parse_a1(addr, line_no)?;
                if tokens.next() != Some("<<<") {
                    return Err(err(line_no, "COMMENT must open with <<<"));
                }
                let mut body = Vec::new();
                let mut closed = false;
                while i < lines.len() {
                    let body_line = lines[i];
                    i += 1;
                    if body_line == ">>>" {
                        closed = true;
                        break;
                    }
                    body.push(body_line.to_string());
                }
                if !closed {
                    return Err(err(line_no, "COMMENT never closed"));
                }
                let sheet = fixture
                    .sheets
                    .last_mut()
                    .ok_or_else(|| err(line_no, "COMMENT before SHEET"))?;
                sheet.comments.push(FixtureComment {
                    row,
                    col,
                    body: body.join("\n"),
                });
            }
            "NAME" => {
                let (name, target) = rest
                    .split_once(' ')
                    .ok_or_else(|| err(line_no, "NAME needs a range"))?;
                let target = target.trim();
                let (sheet_name, range_text) = match target.rsplit_once('!') {
                    Some((sheet, range)) => (sheet.trim_matches('\'').to_string(), range),
                    None => {
                        let current = fixture
                            .sheets
                            .last()
                            .ok_or_else(|| err(line_no, "NAME before SHEET"))?;
                        (current.name.clone(), target)
                    }
                };
                let (start, end) = match range_text.split_once(':') {
                    Some((a, b)) => (a.to_string(), b.to_string()),
                    None => (range_text.to_string(), range_text.to_string()),
                };
                parse_a1(&start, line_no)?;
                parse_a1(&end, line_no)?;
                fixture
                    .names
                    .push((name.to_string(), sheet_name, format!("{start}:{end}")));
            }
            other => return Err(err(line_no, format!("unknown directive {other:?}"))),
        }
    }
    if fixture.sheets.is_empty() {
        return Err(err(1, "no sheets"));
    }
    Ok(fixture)
}

fn parse_cell(rest: &str, line_no: usize) -> Result<FixtureCell, FixtureError> {
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    if tokens.len() < 4 || tokens[1] != "TYPE" || tokens[3] != "VALUE" {
        return Err(err(
            line_no,
            "CELL syntax: CELL <addr> TYPE <kind> VALUE <literal> ...",
        ));
    }
    let (row, col) = parse_a1(tokens[0], line_no)?;
    let kind = tokens[2];
    let mut pos = 4;
    let grab = |pos: &mut usize| {
        let start = *pos;
        while *pos < tokens.len() && !KEYWORDS.contains(&tokens[*pos]) {
            *pos += 1;
        }
        tokens[start..*pos].join(" ")
    };
    let value_text = grab(&mut pos);
    let mut formula = None;
    let mut format = None;
    let mut locked = false;
    let mut validated = false;
    while pos < tokens.len() {
        match tokens[pos] {
            "FORMULA" => {
                pos += 1;
                formula = Some(grab(&mut pos));
            }
            "FORMAT" => {
                pos += 1;
                format = Some(grab(&mut pos));
            }
            "LOCKED" => {
                pos += 1;
                locked = true;
            }
            "VALIDATED" => {
                pos += 1;
                validated = true;
            }
            other => return Err(err(line_no, format!("unexpected {other:?}"))),
        }
    }

    let value = match kind {
        "text" => Value::Text(value_text),
        "num" => Value::Number(
            value_text
                .parse()
                .map_err(|_| err(line_no, format!("bad number {value_text:?}")))?,
        ),
        "date" => {
            let parsed = chrono::NaiveDateTime::parse_from_str(&value_text, "%Y-%m-%dT%H:%M:%S")
                .ok()
                .or_else(|| {
                    chrono::NaiveDate::parse_from_str(&value_text, "%Y-%m-%d")
                        .ok()
                        .map(|d| d.into())
                })
                .ok_or_else(|| err(line_no, format!("bad date {value_text:?}")))?;
            Value::Date(parsed)
        }
        "formula" => {
            let text = formula.ok_or_else(|| err(line_no, "formula cells need FORMULA"))?;
            let text = text.strip_prefix('=').unwrap_or(&text).to_string();
            Value::Formula {
                cached: parse_cached(&value_text),
                text,
            }
        }
        other => return Err(err(line_no, format!("unknown cell type {other:?}"))),
    };
    Ok(FixtureCell {
        row,
        col,
        value,
        format,
        locked,
        validated,
    })
}

fn parse_cached(text: &str) -> Option<Cached> {
    if text.is_empty() {
        return None;
    }
    let upper = text.to_ascii_uppercase();
    if ERROR_CODES.contains(&upper.as_str()) {
        return Some(Cached::Error(upper));
    }
    if let Ok(n) = text.parse::<f64>() {
        return Some(Cached::Number(n));
    }
    match text {
        "TRUE" => Some(Cached::Bool(true)),
        "FALSE" => Some(Cached::Bool(false)),
        _ => Some(Cached::Text(text.to_string())),
    }
}

fn date_serial(d: chrono::NaiveDateTime) -> f64 {
    let base = chrono::NaiveDate::from_ymd_opt(1899, 12, 30).unwrap();
    let days = (d.date() - base).num_days();
    let days = if days < 60 { days - 1 } else { days };
    let seconds = d
        .time()
        .signed_duration_since(chrono::NaiveTime::from_hms_opt(0, 0, 0).unwrap());
    days as f64 + seconds.num_seconds() as f64 / 86_400.0
}

// ---------------------------------------------------------------------
// XML/zip writing

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Distinct (format code, locked) pairs become cellXfs entries; every
/// cell carries an explicit style so the lock state survives the trip.
#[derive(Default)]
struct StyleTable {
    // (format_code, locked) -> xf index
    xfs: Vec<(String, bool)>,
}

impl StyleTable {
    fn style_for(&mut self, format: &str, locked: bool) -> usize {
        let key = (format.to_string(), locked);
        if let Some(idx) = self.xfs.iter().position(|e| *e == key) {
            return idx;
        }
        self.xfs.push(key);
        self.xfs.len() - 1
    }

    fn styles_xml(&self) -> String {
        let mut custom: Vec<(u32, &str)> = Vec::new();
        let mut ids: Vec<u32> = Vec::new();
        for (code, _) in &self.xfs {
            let id = match builtin_id(code) {
                Some(id) => id,
                None => match custom.iter().find(|(_, c)| c == code) {
                    Some((id, _)) => *id,
                    None => {
                        let id = 164 + custom.len() as u32;
                        custom.push((id, code));
                        id
                    }
                },
            };
            ids.push(id);
        }
        let mut xml = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<styleSheet xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\">",
        );
        if !custom.is_empty() {
            xml.push_str(&format!("<numFmts count=\"{}\">", custom.len()));
            for (id, code) in &custom {
                xml.push_str(&format!(
                    "<numFmt numFmtId=\"{id}\" formatCode=\"{}\"/>",
                    xml_escape(code)
                ));
            }
            xml.push_str("</numFmts>");
        }
        xml.push_str(
            "<fonts count=\"1\"><font><sz val=\"11\"/><name val=\"Calibri\"/></font></fonts>",
        );
        xml.push_str("<fills count=\"1\"><fill><patternFill patternType=\"none\"/></fill></fills>");
        xml.push_str("<borders count=\"1\"><border/></borders>");
        xml.push_str(
            "<cellStyleXfs count=\"1\"><xf numFmtId=\"0\" fontId=\"0\" fillId=\"0\" borderId=\"0\"/></cellStyleXfs>",
        );
        xml.push_str(&format!("<cellXfs count=\"{}\">", self.xfs.len()));
        for (idx, (_, locked)) in self.xfs.iter().enumerate() {
            let id = ids[idx];
            xml.push_str(&format!(
                "<xf numFmtId=\"{id}\" fontId=\"0\" fillId=\"0\" borderId=\"0\" applyNumberFormat=\"1\" applyProtection=\"1\"><protection locked=\"{}\"/></xf>",
                if *locked { "1" } else { "0" }
            ));
        }
        xml.push_str("</cellXfs></styleSheet>");
        xml
    }
}

fn builtin_id(code: &str) -> Option<u32> {
    match code {
        "General" => Some(0),
        "0" => Some(1),
        "0.00" => Some(2),
        "#,##0" => Some(3),
        "#,##0.00" => Some(4),
        "m/d/yyyy" => Some(14),
        "@" => Some(49),
        _ => None,
    }
}

fn write_xlsx(fixture: &Fixture) -> Vec<u8> {
    let mut shared: Vec<String> = Vec::new();
    let mut shared_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut styles = StyleTable::default();
    // Ensure style 0 is a locked default so unstyled cells stay locked.
    styles.style_for("General", true);

    let mut sheet_parts: Vec<(String, Option<String>)> = Vec::new();
    for sheet in &fixture.sheets {
        sheet_parts.push(sheet_xml(
            sheet,
            &mut shared,
            &mut shared_index,
            &mut styles,
        ));
    }

    let mut buffer = Vec::new();
    {
        let mut zip = ZipWriter::new(std::io::Cursor::new(&mut buffer));
        let options =
            SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
        let mut put = |name: &str, content: &str| {
            zip.start_file(name, options).expect("zip entry");
            zip.write_all(content.as_bytes()).expect("zip write");
        };

        put("[Content_Types].xml", &content_types(fixture));
        put(
            "_rels/.rels",
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\"><Relationship Id=\"rId1\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument\" Target=\"xl/workbook.xml\"/><Relationship Id=\"rId2\" Type=\"http://schemas.openxmlformats.org/package/2006/relationships/metadata/core-properties\" Target=\"docProps/core.xml\"/><Relationship Id=\"rId3\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/extended-properties\" Target=\"docProps/app.xml\"/></Relationships>",
        );
        put(
            "docProps/core.xml",
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<cp:coreProperties xmlns:cp=\"http://schemas.openxmlformats.org/package/2006/metadata/core-properties\" xmlns:dc=\"http://purl.org/dc/elements/1.1/\" xmlns:dcterms=\"http://purl.org/dc/terms/\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\"><dc:creator></dc:creator><dcterms:created xsi:type=\"dcterms:W3CDTF\">2006-02-20T10:43:00Z</dcterms:created></cp:coreProperties>",
        );
        put(
            "docProps/app.xml",
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Properties xmlns=\"http://schemas.openxmlformats.org/officeDocument/2006/extended-properties\"><Application>sheetdoc-testkit</Application></Properties>",
        );
        put("xl/workbook.xml", &workbook_xml(fixture));
        put("xl/_rels/workbook.xml.rels", &workbook_rels(fixture));
        put("xl/styles.xml", &styles.styles_xml());
        put("xl/sharedStrings.xml", &shared_strings_xml(&shared));
        for (idx, (sheet_xml, comments_xml)) in sheet_parts.iter().enumerate() {
            let n = idx + 1;
            put(&format!("xl/worksheets/sheet{n}.xml"), sheet_xml);
            if let Some(comments) = comments_xml {
                put(
                    &format!("xl/worksheets/_rels/sheet{n}.xml.rels"),
                    &format!(
                        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\"><Relationship Id=\"rId1\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/comments\" Target=\"../comments{n}.xml\"/></Relationships>"
                    ),
                );
                put(&format!("xl/comments{n}.xml"), comments);
            }
        }
        zip.finish().expect("zip finish");
    }
    buffer
}

fn content_types(fixture: &Fixture) -> String {
    let mut xml = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\"><Default Extension=\"rels\" ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/><Default Extension=\"xml\" ContentType=\"application/xml\"/><Override PartName=\"/xl/workbook.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml\"/><Override PartName=\"/xl/styles.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.styles+xml\"/><Override PartName=\"/xl/sharedStrings.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml\"/><Override PartName=\"/docProps/core.xml\" ContentType=\"application/vnd.openxmlformats-package.core-properties+xml\"/><Override PartName=\"/docProps/app.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.extended-properties+xml\"/>",
    );
    for (idx, sheet) in fixture.sheets.iter().enumerate() {
        let n = idx + 1;
        xml.push_str(&format!(
            "<Override PartName=\"/xl/worksheets/sheet{n}.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml\"/>"
        ));
        if !sheet.comments.is_empty() {
            xml.push_str(&format!(
                "<Override PartName=\"/xl/comments{n}.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.comments+xml\"/>"
            ));
        }
    }
    xml.push_str("</Types>");
    xml
}

fn workbook_xml(fixture: &Fixture) -> String {
    let mut xml = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<workbook xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\"><sheets>",
    );
    for (idx, sheet) in fixture.sheets.iter().enumerate() {
        let n = idx + 1;
        xml.push_str(&format!(
            "<sheet name=\"{}\" sheetId=\"{n}\" r:id=\"rId{n}\"/>",
            xml_escape(&sheet.name)
        ));
    }
    xml.push_str("</sheets>");
    if !fixture.names.is_empty() {
        xml.push_str("<definedNames>");
        for (name, sheet, range) in &fixture.names {
            let sheet_ref = if sheet.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                sheet.clone()
            } else {
                format!("'{}'", sheet.replace('\'', "''"))
            };
            let dollars = range
                .split_once(':')
                .map(|(a, b)| format!("{}:{}", dollar(a), dollar(b)))
                .unwrap();
            xml.push_str(&format!(
                "<definedName name=\"{}\">{}!{}</definedName>",
                xml_escape(name),
                xml_escape(&sheet_ref),
                dollars
            ));
        }
        xml.push_str("</definedNames>");
    }
    xml.push_str("</workbook>");
    xml
}

fn dollar(addr: &str) -> String {
    let letters: String = addr
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    format!("${}${}", letters, &addr[letters.len()..])
}

fn workbook_rels(fixture: &Fixture) -> String {
    let mut xml = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">",
    );
    let sheet_count = fixture.sheets.len();
    for n in 1..=sheet_count {
        xml.push_str(&format!(
            "<Relationship Id=\"rId{n}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet\" Target=\"worksheets/sheet{n}.xml\"/>"
        ));
    }
    xml.push_str(&format!(
        "<Relationship Id=\"rId{}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/styles\" Target=\"styles.xml\"/>",
        sheet_count + 1
    ));
    xml.push_str(&format!(
        "<Relationship Id=\"rId{}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/sharedStrings\" Target=\"sharedStrings.xml\"/>",
        sheet_count + 2
    ));
    xml.push_str("</Relationships>");
    xml
}

fn shared_strings_xml(shared: &[String]) -> String {
    let mut xml = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<sst xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" count=\"{}\" uniqueCount=\"{}\">",
        shared.len(),
        shared.len()
    );
    for s in shared {
        xml.push_str(&format!(
            "<si><t xml:space=\"preserve\">{}</t></si>",
            xml_escape(s)
        ));
    }
    xml.push_str("</sst>");
    xml
}

/// Returns (sheet xml, optional comments xml).
fn sheet_xml(
    sheet: &FixtureSheet,
    shared: &mut Vec<String>,
    shared_index: &mut BTreeMap<String, usize>,
    styles: &mut StyleTable,
) -> (String, Option<String>) {
    let mut rows: BTreeMap<u32, Vec<&FixtureCell>> = BTreeMap::new();
    for cell in &sheet.cells {
        rows.entry(cell.row).or_default().push(cell);
    }

    let mut xml = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<worksheet xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\"><sheetData>",
    );
    for (row, mut cells) in rows {
        cells.sort_by_key(|c| c.col);
        xml.push_str(&format!("<row r=\"{row}\">"));
        for cell in cells {
            let default_format = match &cell.value {
                Value::Date(_) => "m/d/yyyy",
                _ => "General",
            };
            let format = cell.format.as_deref().unwrap_or(default_format);
            let style = styles.style_for(format, cell.locked);
            let addr = a1(cell.row, cell.col);
            match &cell.value {
                Value::Text(text) => {
                    let idx = *shared_index.entry(text.clone()).or_insert_with(|| {
                        shared.push(text.clone());
                        shared.len() - 1
                    });
                    xml.push_str(&format!(
                        "<c r=\"{addr}\" s=\"{style}\" t=\"s\"><v>{idx}</v></c>"
                    ));
                }
                Value::Number(n) => {
                    xml.push_str(&format!("<c r=\"{addr}\" s=\"{style}\"><v>{n}</v></c>"));
                }
                Value::Date(d) => {
                    // ISO date cell; the serial stays available through
                    // the style's date format on load.
                    let _ = date_serial(*d);
                    xml.push_str(&format!(
                        "<c r=\"{addr}\" s=\"{style}\" t=\"d\"><v>{}</v></c>",
                        d.format("%Y-%m-%dT%H:%M:%S")
                    ));
                }
                Value::Formula { cached, text } => {
                    let (t_attr, v) = match cached {
                        Some(Cached::Number(n)) => (String::new(), Some(format!("{n}"))),
                        Some(Cached::Text(s)) => (" t=\"str\"".to_string(), Some(xml_escape(s))),
                        Some(Cached::Bool(b)) => (
                            " t=\"b\"".to_string(),
                            Some(if *b { "1" } else { "0" }.to_string()),
                        ),
                        Some(Cached::Error(e)) => (" t=\"e\"".to_string(), Some(e.clone())),
                        None => (String::new(), None),
                    };
                    xml.push_str(&format!("<c r=\"{addr}\" s=\"{style}\"{t_attr}>"));
                    xml.push_str(&format!("<f>{}</f>", xml_escape(text)));
                    if let Some(v) = v {
                        xml.push_str(&format!("<v>{v}</v>"));
                    }
                    xml.push_str("</c>");
                }
            }
        }
        xml.push_str("</row>");
    }
    xml.push_str("</sheetData>");

    let validated: Vec<String> = sheet
        .cells
        .iter()
        .filter(|c| c.validated)
        .map(|c| a1(c.row, c.col))
        .collect();
    if !validated.is_empty() {
        xml.push_str(&format!(
            "<dataValidations count=\"1\"><dataValidation type=\"decimal\" sqref=\"{}\"/></dataValidations>",
            validated.join(" ")
        ));
    }
    xml.push_str("</worksheet>");

    let comments = if sheet.comments.is_empty() {
        None
    } else {
        let mut c = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<comments xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\"><authors><author></author></authors><commentList>",
        );
        for comment in &sheet.comments {
            c.push_str(&format!(
                "<comment ref=\"{}\" authorId=\"0\"><text><t xml:space=\"preserve\">{}</t></text></comment>",
                a1(comment.row, comment.col),
                xml_escape(&comment.body)
            ));
        }
        c.push_str("</commentList></comments>");
        Some(c)
    };
    (xml, comments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn produces_a_zip_with_the_expected_parts() {
        let bytes = fixture_to_xlsx(
            "SHEET S\nCELL A1 TYPE text VALUE Items\nCELL A2 TYPE num VALUE 1385.45\nCOMMENT A2 <<<\nhello\n>>>\nNAME N A1:A2\n",
        )
        .unwrap();
        let mut zip = zip::ZipArchive::new(std::io::Cursor::new(bytes)).unwrap();
        for part in [
            "[Content_Types].xml",
            "_rels/.rels",
            "xl/workbook.xml",
            "xl/_rels/workbook.xml.rels",
            "xl/styles.xml",
            "xl/sharedStrings.xml",
            "xl/worksheets/sheet1.xml",
            "xl/worksheets/_rels/sheet1.xml.rels",
            "xl/comments1.xml",
        ] {
            assert!(zip.by_name(part).is_ok(), "missing {part}");
        }
    }

    #[test]
    fn escapes_xml_metacharacters() {
        let bytes = fixture_to_xlsx("SHEET S\nCELL A1 TYPE text VALUE a<b&c\n").unwrap();
        let mut zip = zip::ZipArchive::new(std::io::Cursor::new(bytes)).unwrap();
        let mut content = String::new();
        std::io::Read::read_to_string(
            &mut zip.by_name("xl/sharedStrings.xml").unwrap(),
            &mut content,
        )
        .unwrap();
        assert!(content.contains("a&lt;b&amp;c"));
    }

    #[test]
    fn rejects_bad_fixtures() {
        assert!(fixture_to_xlsx("").is_err());
        assert!(fixture_to_xlsx("CELL A1 TYPE num VALUE 1\n").is_err());
        assert!(fixture_to_xlsx("SHEET S\nCELL A0 TYPE num VALUE 1\n").is_err());
    }

    #[test]
    fn serial_math_matches_known_anchor() {
        let d = chrono::NaiveDate::from_ymd_opt(2006, 2, 20).unwrap().into();
        assert_eq!(date_serial(d), 38768.0);
    }
}
