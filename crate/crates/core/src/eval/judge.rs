use crate::agents::{render_template, CompletionParams, ModelClient};
use crate::engine::ChartSpec;

use super::EvalError;

pub const READABILITY_TEMPLATE: &str = include_str!("../../prompts/readability.txt");

/// Asks a judge model to score a chart's readability.
pub fn judge_readability(
    client: &dyn ModelClient,
    spec: &ChartSpec,
    params: &CompletionParams,
) -> Result<f64, EvalError> {
    let prompt = render_template(READABILITY_TEMPLATE, &[("chart", &spec.to_json())])
        .expect("readability template has one slot");
    let reply = client.complete(&prompt, params)?;
    parse_score(&reply)
}

/// The first numeral in [1, 5] wins. Failing that, the first numeral is
/// clamped into range.
pub fn parse_score(reply: &str) -> Result<f64, EvalError> {
    let bytes = reply.as_bytes();
    let mut nums = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if let Ok(n) = reply[start..i].parse::<f64>() {
            nums.push(n);
        }
    }
    if let Some(n) = nums.iter().find(|n| (1.0..=5.0).contains(*n)) {
        return Ok(*n);
    }
    nums.first()
        .map(|n| n.clamp(1.0, 5.0))
        .ok_or_else(|| EvalError::ScoreParse(reply.chars().take(80).collect()))
}
