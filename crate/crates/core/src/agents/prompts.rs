use thiserror::Error;

use super::Classification;

/// Divider that opens the slot-bearing tail of each composer template.
const NEW_QUESTION: &str = "==============================\nHere is a new question:";

pub const MAX_SHOTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template slot {{{0}}} has no binding")]
    UnboundSlot(String),
    #[error("shot count must be between 1 and {MAX_SHOTS}, got {0}")]
    ShotCount(usize),
    #[error("composer template lacks the new-question divider")]
    NoDivider,
}

/// The four stage templates plus the extra composer examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub processor: String,
    pub composer_single: String,
    pub composer_multiple: String,
    pub validator: String,
    pub single_shots: Vec<String>,
    pub multiple_shots: Vec<String>,
    shot_count: usize,
}

impl Default for PromptBundle {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptBundle {
    /// Templates compiled into the binary, with all four shots.
    pub fn builtin() -> Self {
        PromptBundle {
            processor: include_str!("../../prompts/processor.txt").to_string(),
            composer_single: include_str!("../../prompts/composer_single.txt").to_string(),
            composer_multiple: include_str!("../../prompts/composer_multiple.txt").to_string(),
            validator: include_str!("../../prompts/validator.txt").to_string(),
            single_shots: vec![
                include_str!("../../prompts/shots/single_1.txt").to_string(),
                include_str!("../../prompts/shots/single_2.txt").to_string(),
                include_str!("../../prompts/shots/single_3.txt").to_string(),
            ],
            multiple_shots: vec![
                include_str!("../../prompts/shots/multiple_1.txt").to_string(),
                include_str!("../../prompts/shots/multiple_2.txt").to_string(),
                include_str!("../../prompts/shots/multiple_3.txt").to_string(),
            ],
            shot_count: MAX_SHOTS,
        }
    }

    /// Keeps the template's own example plus `n - 1` extra shots.
    pub fn with_shot_count(mut self, n: usize) -> Result<Self, TemplateError> {
        if !(1..=MAX_SHOTS).contains(&n) {
            return Err(TemplateError::ShotCount(n));
        }
        self.shot_count = n;
        Ok(self)
    }

    pub fn shot_count(&self) -> usize {
        self.shot_count
    }

    /// Composer template with the configured shots spliced in before the
    /// new-question divider.
    pub fn composer_template(&self, c: Classification) -> Result<String, TemplateError> {
        let (base, shots) = match c {
            Classification::Single => (&self.composer_single, &self.single_shots),
            Classification::Multiple => (&self.composer_multiple, &self.multiple_shots),
        };
        let at = base.rfind(NEW_QUESTION).ok_or(TemplateError::NoDivider)?;
        let extra: String = shots
            .iter()
            .take(self.shot_count - 1)
            .map(String::as_str)
            .collect();
        Ok(format!("{}{}{}", &base[..at], extra, &base[at..]))
    }

    pub fn render_processor(
        &self,
        db_id: &str,
        db_schema: &str,
        query: &str,
    ) -> Result<String, TemplateError> {
        render_template(
            &self.processor,
            &[("db_id", db_id), ("db_schema", db_schema), ("query", query)],
        )
    }

    pub fn render_composer(
        &self,
        c: Classification,
        desc_str: &str,
        augmented_explanation: &str,
        query: &str,
    ) -> Result<String, TemplateError> {
        render_template(
            &self.composer_template(c)?,
            &[
                ("desc_str", desc_str),
                ("augmented_explanation", augmented_explanation),
                ("query", query),
            ],
        )
    }

    pub fn render_validator(
        &self,
        query: &str,
        db_info: &str,
        vql: &str,
        error: &str,
    ) -> Result<String, TemplateError> {
        render_template(
            &self.validator,
            &[
                ("query", query),
                ("db_info", db_info),
                ("vql", vql),
                ("error", error),
            ],
        )
    }
}

/// Slot names appearing in `template`, in order, with repeats.
pub fn template_slots(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            out.push(after[..name_len].to_string());
            rest = &after[name_len + 1..];
        } else {
            rest = after;
        }
    }
    out
}

/// Replaces every `{name}` slot in one pass. Bound values are inserted
/// verbatim and never rescanned.
pub fn render_template(template: &str, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            let value = slots
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::UnboundSlot(name.to_string()))?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_per_template() {
        let b = PromptBundle::builtin();
        assert_eq!(
            template_slots(&b.processor),
            ["db_id", "db_schema", "query"]
        );
        for c in [Classification::Single, Classification::Multiple] {
            assert_eq!(
                template_slots(&b.composer_template(c).unwrap()),
                ["desc_str", "augmented_explanation", "query"]
            );
        }
        assert_eq!(
            template_slots(&b.validator),
            ["query", "db_info", "vql", "error"]
        );
    }

    #[test]
    fn literal_braces_survive() {
        let b = PromptBundle::builtin();
        let p = b.render_processor("d", "s", "{query}").unwrap();
        assert!(p.contains("The output should be {{tables: [columns]}}."));
        assert!(p.ends_with("[Query]\n{query}\n\nNow give your answer following this format strictly without other explanation:\n\n[Filtered Schema]\n\n[New Schema]\n\n[Augmented Explanation]\n\n[Classification]\n"));
    }

    #[test]
    fn unbound_slot_is_an_error() {
        assert_eq!(
            render_template("a {x} b", &[]),
            Err(TemplateError::UnboundSlot("x".into()))
        );
    }

    #[test]
    fn shot_count_controls_examples() {
        let count = |n| {
            PromptBundle::builtin()
                .with_shot_count(n)
                .unwrap()
                .composer_template(Classification::Multiple)
                .unwrap()
                .matches("Here is a typical example:")
                .count()
        };
        assert_eq!((1..=4).map(count).collect::<Vec<_>>(), [1, 2, 3, 4]);
        assert!(PromptBundle::builtin().with_shot_count(0).is_err());
        assert!(PromptBundle::builtin().with_shot_count(5).is_err());
    }

    #[test]
    fn extra_shots_parse_as_vql() {
        let b = PromptBundle::builtin();
        for shot in b.single_shots.iter().chain(&b.multiple_shots) {
            let vql = super::super::extract_final_vql(shot).unwrap();
            crate::vql::parse_vql(&vql).unwrap();
        }
    }
}
