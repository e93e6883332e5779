use indexmap::IndexMap;

use crate::catalog::{apply_filter, render_description, DatabaseCatalog, FilteredSchema};

use super::{
    AgentError, Classification, CompletionParams, ModelClient, ProcessorOutput, PromptBundle,
};

const SECTIONS: [&str; 4] = [
    "Filtered Schema",
    "New Schema",
    "Augmented Explanation",
    "Classification",
];

/// Position of `[name]` in `text`, case-insensitive, and the offset just
/// past the header line.
fn find_header(text: &str, name: &str, from: usize) -> Option<(usize, usize)> {
    let needle = format!("[{}]", name.to_ascii_lowercase());
    let lower = text.to_ascii_lowercase();
    let at = lower[from..].find(&needle)? + from;
    let after = at + needle.len();
    let line_end = text[after..]
        .find('\n')
        .map(|i| after + i + 1)
        .unwrap_or(text.len());
    // keep anything written on the header line itself
    let same_line =
        text[after..line_end].trim_matches(|c: char| c.is_whitespace() || c == '*' || c == ':');
    let body_start = if same_line.is_empty() {
        line_end
    } else {
        after
    };
    Some((at, body_start))
}

/// Splits a processor response into its four bracketed sections.
fn split_sections(text: &str) -> IndexMap<&'static str, String> {
    let mut found: Vec<(&'static str, usize, usize)> = Vec::new();
    for name in SECTIONS {
        if let Some((at, body)) = find_header(text, name, 0) {
            found.push((name, at, body));
        }
    }
    found.sort_by_key(|f| f.1);
    let mut out = IndexMap::new();
    for (i, (name, _, body)) in found.iter().enumerate() {
        let end = found.get(i + 1).map(|n| n.1).unwrap_or(text.len());
        let end = end.max(*body);
        let section = text[*body..end]
            .trim_end_matches(|c: char| c.is_whitespace() || c == '*')
            .trim_start_matches(['*', ':'])
            .trim();
        out.insert(*name, section.to_string());
    }
    out
}

/// Reads the `{"Table": ["col", ...]}` block. Tolerates code fences,
/// single quotes and trailing commas.
pub fn parse_filter_block(text: &str) -> Option<FilteredSchema> {
    let open = text.find('{')?;
    let close = text.rfind('}')?;
    if close <= open {
        return None;
    }
    let raw = &text[open..=close];
    let mut json = String::with_capacity(raw.len());
    let mut in_double = false;
    let mut in_single = false;
    for c in raw.chars() {
        match c {
            '"' if !in_single => {
                in_double = !in_double;
                json.push('"');
            }
            '\'' if !in_double => {
                in_single = !in_single;
                json.push('"');
            }
            '"' if in_single => json.push_str("\\\""),
            _ => json.push(c),
        }
    }
    // drop trailing commas before a closing bracket
    let mut cleaned = String::with_capacity(json.len());
    let chars: Vec<char> = json.chars().collect();
    let mut in_str = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            cleaned.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        cleaned.push(c);
    }
    let entries: IndexMap<String, Vec<String>> = serde_json::from_str(&cleaned).ok()?;
    Some(FilteredSchema::new(entries))
}

fn parse_classification(text: &str) -> Option<Classification> {
    let token: String = text
        .trim_start_matches(|c: char| !c.is_ascii_alphabetic())
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    match token.to_ascii_uppercase().as_str() {
        "SINGLE" => Some(Classification::Single),
        "MULTIPLE" => Some(Classification::Multiple),
        _ => None,
    }
}

/// Parses the processor's four-section answer.
///
/// `[New Schema]` may be absent; the caller then renders it from the filter.
pub fn parse_processor_response(text: &str) -> Result<ProcessorOutput, AgentError> {
    let sections = split_sections(text);
    let section = |name: &'static str| {
        sections
            .get(name)
            .ok_or_else(|| AgentError::ResponseFormat(name.to_string()))
    };
    let filtered_schema = parse_filter_block(section("Filtered Schema")?)
        .ok_or_else(|| AgentError::ResponseFormat("Filtered Schema".into()))?;
    let augmented_explanation = section("Augmented Explanation")?.clone();
    let classification = parse_classification(section("Classification")?)
        .ok_or_else(|| AgentError::ResponseFormat("Classification".into()))?;
    Ok(ProcessorOutput {
        filtered_schema,
        new_schema_text: sections.get("New Schema").cloned().unwrap_or_default(),
        augmented_explanation,
        classification,
        fallback: false,
    })
}

/// MULTIPLE iff the filter keeps two or more tables.
pub fn classify_rule(filtered: &FilteredSchema) -> Classification {
    if filtered.table_count() >= 2 {
        Classification::Multiple
    } else {
        Classification::Single
    }
}

/// Filter, explanation and classification for `query`.
///
/// An unusable answer is re-asked once; a second failure falls back to the
/// full schema and the rule-based classification.
pub fn run_processor(
    client: &dyn ModelClient,
    bundle: &PromptBundle,
    params: &CompletionParams,
    catalog: &DatabaseCatalog,
    query: &str,
) -> Result<ProcessorOutput, AgentError> {
    let schema = render_description(catalog, None)?;
    let prompt = bundle.render_processor(catalog.db_id(), &schema, query)?;
    for attempt in 0..2 {
        let response = client.complete(&prompt, params)?;
        match parse_processor_response(&response) {
            Ok(mut out) => match apply_filter(catalog, &out.filtered_schema) {
                Ok((filtered, warnings)) => {
                    for w in &warnings {
                        tracing::warn!(%w, "processor filter entry ignored");
                    }
                    // keep only what resolved, in catalog order
                    out.filtered_schema = FilteredSchema::full(&filtered);
                    if out.new_schema_text.trim().is_empty() {
                        out.new_schema_text = render_description(&filtered, None)?;
                    }
                    let rule = classify_rule(&out.filtered_schema);
                    if rule != out.classification {
                        tracing::warn!(
                            model = ?out.classification,
                            ?rule,
                            "processor classification disagrees with table count; keeping the model's label"
                        );
                    }
                    return Ok(out);
                }
                Err(e) => tracing::warn!(attempt, error = %e, "processor filter unusable"),
            },
            Err(e) => tracing::warn!(attempt, error = %e, "processor response unparseable"),
        }
    }
    let filtered_schema = FilteredSchema::full(catalog);
    Ok(ProcessorOutput {
        classification: classify_rule(&filtered_schema),
        new_schema_text: schema,
        augmented_explanation: String::new(),
        filtered_schema,
        fallback: true,
    })
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn clean_line(line: &str) -> String {
    line.trim()
        .trim_matches(|c: char| c == '`' || c == '*')
        .trim()
        .to_string()
}

/// The VQL line following the last `Final VQL:` marker.
pub fn extract_final_vql(text: &str) -> Option<String> {
    let lower = text.to_ascii_lowercase();
    let at = lower.rfind("final vql:")? + "final vql:".len();
    let rest = &text[at..];
    let (first, tail) = rest.split_once('\n').unwrap_or((rest, ""));
    let inline = clean_line(first);
    if !inline.is_empty() {
        return Some(inline);
    }
    tail.lines()
        .filter(|l| !is_fence(l))
        .map(clean_line)
        .find(|l| !l.is_empty())
}

/// Writes a VQL sentence with the composer template matching the
/// processor's classification.
pub fn run_composer(
    client: &dyn ModelClient,
    bundle: &PromptBundle,
    params: &CompletionParams,
    p: &ProcessorOutput,
    query: &str,
) -> Result<String, AgentError> {
    let prompt = bundle.render_composer(
        p.classification,
        &p.new_schema_text,
        &p.augmented_explanation,
        query,
    )?;
    let response = client.complete(&prompt, params)?;
    extract_final_vql(&response).ok_or_else(|| AgentError::ResponseFormat("Final VQL".into()))
}

/// The single line under the last `[Corrected VQL]` header.
pub fn extract_corrected_vql(text: &str) -> Option<String> {
    let lower = text.to_ascii_lowercase();
    let at = lower.rfind("[corrected vql]")? + "[corrected vql]".len();
    let rest = &text[at..];
    let (first, tail) = rest.split_once('\n').unwrap_or((rest, ""));
    let inline = clean_line(first.trim_start_matches([':', '*']));
    if !inline.is_empty() {
        return Some(inline);
    }
    let mut lines = tail
        .lines()
        .skip_while(|l| l.trim().is_empty() || is_fence(l));
    let mut body = Vec::new();
    for l in lines.by_ref() {
        if l.trim().is_empty() || is_fence(l) || l.trim_start().starts_with('[') {
            break;
        }
        body.push(clean_line(l));
    }
    match body.as_slice() {
        [one] if !one.is_empty() => Some(one.clone()),
        _ => None,
    }
}

/// Asks the validator prompt to repair `vql_text` given its error.
pub fn run_validator_refine(
    client: &dyn ModelClient,
    bundle: &PromptBundle,
    params: &CompletionParams,
    vql_text: &str,
    error: &str,
    query: &str,
    db_info: &str,
) -> Result<String, AgentError> {
    let prompt = bundle.render_validator(query, db_info, vql_text, error)?;
    let response = client.complete(&prompt, params)?;
    extract_corrected_vql(&response)
        .ok_or_else(|| AgentError::ResponseFormat("Corrected VQL".into()))
}
