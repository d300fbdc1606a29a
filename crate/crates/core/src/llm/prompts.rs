//! Zero-shot prompt templates. Every template is a pure function of its
//! inputs; the exact bytes are pinned by golden tests.

use thiserror::Error;

use super::{GenParams, LlmError, Message, MethodId, Prompt, Role, Task};
use crate::text::{truncate_tokens, Sentence, TokenBudget};
use crate::triples::{render_triples, RenderStyle, Triple};

pub const ANSWER_FORMAT_INSTRUCTION: &str = "Answer with a single entity only.";
pub const COT_TRIGGER: &str = "Let's think step by step.";

const SYSTEM: &str = "You are a knowledgeable assistant that answers open-domain questions.";

const ANSWER_TOKENS: u32 = 32;
const COT_TOKENS: u32 = 256;
const TRIPLE_TOKENS: u32 = 256;
const EVIDENCE_TOKENS: u32 = 400;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("method {method} requires {missing}")]
    Missing {
        method: MethodId,
        missing: &'static str,
    },
    #[error("question is empty")]
    EmptyQuestion,
}

impl From<PromptError> for LlmError {
    fn from(e: PromptError) -> Self {
        LlmError::Input(e.to_string())
    }
}

/// Ingredients available for an answer prompt. Each method uses only the ones
/// it is defined over; extras are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptInputs<'a> {
    pub question: &'a str,
    pub document: Option<&'a str>,
    pub triples: Option<&'a [Triple]>,
    pub sentences: Option<&'a [Sentence]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptOptions {
    /// Final line of every answer prompt.
    pub format_instruction: String,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            format_instruction: ANSWER_FORMAT_INSTRUCTION.to_owned(),
        }
    }
}

fn params(max_output_tokens: u32) -> GenParams {
    GenParams {
        temperature: 0.0,
        max_output_tokens,
    }
}

fn chat(task: Task, user: String, max_output_tokens: u32) -> Prompt {
    Prompt::new(
        task,
        vec![
            Message {
                role: Role::System,
                content: SYSTEM.to_owned(),
            },
            Message {
                role: Role::User,
                content: user,
            },
        ],
        params(max_output_tokens),
    )
    .expect("templates produce valid prompts")
}

fn non_empty_question(q: &str) -> Result<&str, PromptError> {
    let q = q.trim();
    if q.is_empty() {
        Err(PromptError::EmptyQuestion)
    } else {
        Ok(q)
    }
}

pub fn triple_prompt(question: &str) -> Result<Prompt, PromptError> {
    let q = non_empty_question(question)?;
    let user = format!(
        "Identify the subject entity of the question below: the person, place, organization or \
         other entity that the question is about. Then write 3 to 5 knowledge triples that use \
         the subject entity as the head entity and state facts useful for answering the question.\n\
         Write one triple per line in the form (head, relation, tail). Do not use commas inside \
         the head, relation or tail.\n\n\
         Question: {q}\n\
         Triples:"
    );
    Ok(chat(Task::ConstructTriples, user, TRIPLE_TOKENS))
}

pub fn evidence_prompt(question: &str) -> Result<Prompt, PromptError> {
    let q = non_empty_question(question)?;
    let user = format!(
        "Write a short background document of about 150 words that contains facts relevant to \
         answering the question below. Do not answer the question directly.\n\n\
         Question: {q}\n\
         Document:"
    );
    Ok(chat(Task::GenerateEvidence, user, EVIDENCE_TOKENS))
}

fn sentence_block(sentences: &[Sentence]) -> String {
    let mut ordered: Vec<&Sentence> = sentences.iter().collect();
    ordered.sort_by_key(|s| s.index);
    ordered.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n")
}

pub fn build_prompt(
    method: MethodId,
    inputs: &PromptInputs<'_>,
    budget: TokenBudget,
    options: &PromptOptions,
) -> Result<Prompt, PromptError> {
    let q = non_empty_question(inputs.question)?;
    let missing = |what| PromptError::Missing {
        method,
        missing: what,
    };
    let document = || {
        inputs
            .document
            .map(|d| truncate_tokens(d, budget))
            .ok_or(missing("an evidence document"))
    };
    let triples = || {
        inputs
            .triples
            .map(|t| render_triples(t, RenderStyle::Prompt))
            .ok_or(missing("triples"))
    };
    let sentences = || inputs.sentences.map(sentence_block).ok_or(missing("evidence sentences"));

    let mut sections: Vec<String> = Vec::new();
    let mut tokens = ANSWER_TOKENS;
    match method {
        MethodId::Standard => {
            sections.push("Answer the following question.".into());
        }
        MethodId::StandardDoc | MethodId::CotDoc => {
            let doc = document()?;
            sections.push("Answer the following question based on the document.".into());
            sections.push(format!("Document:\n{doc}"));
        }
        MethodId::KsQ | MethodId::KsS => {
            let s = sentences()?;
            sections.push("Answer the following question based on the evidence sentences.".into());
            if !s.is_empty() {
                sections.push(format!("Evidence sentences:\n{s}"));
            }
        }
        MethodId::KsT => {
            let t = triples()?;
            sections.push("Answer the following question based on the knowledge triples.".into());
            if !t.is_empty() {
                sections.push(format!("Knowledge triples:\n{t}"));
            }
        }
        MethodId::KsLlm => {
            let t = triples()?;
            let s = sentences()?;
            sections.push(
                "Answer the following question based on the knowledge triples and evidence \
                 sentences."
                    .into(),
            );
            if !t.is_empty() {
                sections.push(format!("Knowledge triples:\n{t}"));
            }
            if !s.is_empty() {
                sections.push(format!("Evidence sentences:\n{s}"));
            }
        }
    }
    sections.push(format!("Question: {q}"));
    if method == MethodId::CotDoc {
        sections.push(format!(
            "{COT_TRIGGER} Then write the final answer on a last line starting with \"Answer:\".\n{}",
            options.format_instruction
        ));
        tokens = COT_TOKENS;
    } else {
        sections.push(options.format_instruction.clone());
    }
    Ok(chat(Task::Answer(method), sections.join("\n\n"), tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{count_tokens, split_sentences};

    const Q: &str = "What star sign is Jamie Lee Curtis?";

    fn curtis_triples() -> Vec<Triple> {
        vec![
            Triple::new("Jamie Lee Curtis", "occupation", "actress").unwrap(),
            Triple::new("Jamie Lee Curtis", "birthdate", "November 22 1958").unwrap(),
            Triple::new("Jamie Lee Curtis", "notable work", "Halloween").unwrap(),
        ]
    }

    #[test]
    fn standard_golden() {
        let p = build_prompt(
            MethodId::Standard,
            &PromptInputs {
                question: Q,
                ..Default::default()
            },
            TokenBudget::DEFAULT,
            &PromptOptions::default(),
        )
        .unwrap();
        assert_eq!(
            p.user_content(),
            "Answer the following question.\n\nQuestion: What star sign is Jamie Lee Curtis?\n\n\
             Answer with a single entity only."
        );
        assert_eq!(p.params.temperature, 0.0);
        assert_eq!(p.messages[0].role, Role::System);
    }

    #[test]
    fn standard_ignores_document() {
        let p = build_prompt(
            MethodId::Standard,
            &PromptInputs {
                question: Q,
                document: Some("SECRET DOCUMENT"),
                ..Default::default()
            },
            TokenBudget::DEFAULT,
            &PromptOptions::default(),
        )
        .unwrap();
        assert!(!p.content().contains("SECRET"));
    }

    #[test]
    fn document_is_truncated_to_budget() {
        let doc = (0..2000).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let p = build_prompt(
            MethodId::StandardDoc,
            &PromptInputs {
                question: Q,
                document: Some(&doc),
                ..Default::default()
            },
            TokenBudget::new(300).unwrap(),
            &PromptOptions::default(),
        )
        .unwrap();
        let user = p.user_content();
        let start = user.find("Document:\n").unwrap() + "Document:\n".len();
        let end = user.find("\n\nQuestion:").unwrap();
        assert_eq!(count_tokens(&user[start..end]), 300);
        assert!(user.ends_with(ANSWER_FORMAT_INSTRUCTION));
    }

    #[test]
    fn cot_golden() {
        let p = build_prompt(
            MethodId::CotDoc,
            &PromptInputs {
                question: Q,
                document: Some("She was born on November 22, 1958."),
                ..Default::default()
            },
            TokenBudget::DEFAULT,
            &PromptOptions::default(),
        )
        .unwrap();
        assert_eq!(
            p.user_content(),
            "Answer the following question based on the document.\n\n\
             Document:\nShe was born on November 22, 1958.\n\n\
             Question: What star sign is Jamie Lee Curtis?\n\n\
             Let's think step by step. Then write the final answer on a last line starting with \"Answer:\".\n\
             Answer with a single entity only."
        );
        assert_eq!(p.task, Task::Answer(MethodId::CotDoc));
    }

    #[test]
    fn ks_llm_golden_with_document_order() {
        let doc = split_sentences(
            "Jamie Lee Curtis is an American actress. She was born on November 22, 1958. \
             Scorpio corresponds to the solar calendar time from October 23 to November 22.",
        );
        // Selection order is nearest-first; the prompt uses document order.
        let selected = vec![doc[2].clone(), doc[1].clone()];
        let triples = curtis_triples();
        let p = build_prompt(
            MethodId::KsLlm,
            &PromptInputs {
                question: Q,
                triples: Some(&triples),
                sentences: Some(&selected),
                document: None,
            },
            TokenBudget::DEFAULT,
            &PromptOptions::default(),
        )
        .unwrap();
        assert_eq!(
            p.user_content(),
            "Answer the following question based on the knowledge triples and evidence sentences.\n\n\
             Knowledge triples:\n\
             (Jamie Lee Curtis, occupation, actress)\n\
             (Jamie Lee Curtis, birthdate, November 22 1958)\n\
             (Jamie Lee Curtis, notable work, Halloween)\n\n\
             Evidence sentences:\n\
             She was born on November 22, 1958.\n\
             Scorpio corresponds to the solar calendar time from October 23 to November 22.\n\n\
             Question: What star sign is Jamie Lee Curtis?\n\n\
             Answer with a single entity only."
        );
    }

    #[test]
    fn ks_t_and_ks_s_goldens() {
        let triples = curtis_triples();
        let doc = split_sentences("She was born on November 22, 1958.");
        let inputs = PromptInputs {
            question: Q,
            document: Some("FULL DOCUMENT"),
            triples: Some(&triples),
            sentences: Some(&doc),
        };
        let t = build_prompt(MethodId::KsT, &inputs, TokenBudget::DEFAULT, &PromptOptions::default())
            .unwrap();
        assert_eq!(
            t.user_content(),
            "Answer the following question based on the knowledge triples.\n\n\
             Knowledge triples:\n\
             (Jamie Lee Curtis, occupation, actress)\n\
             (Jamie Lee Curtis, birthdate, November 22 1958)\n\
             (Jamie Lee Curtis, notable work, Halloween)\n\n\
             Question: What star sign is Jamie Lee Curtis?\n\n\
             Answer with a single entity only."
        );
        for m in [MethodId::KsS, MethodId::KsQ] {
            let s = build_prompt(m, &inputs, TokenBudget::DEFAULT, &PromptOptions::default()).unwrap();
            assert_eq!(
                s.user_content(),
                "Answer the following question based on the evidence sentences.\n\n\
                 Evidence sentences:\n\
                 She was born on November 22, 1958.\n\n\
                 Question: What star sign is Jamie Lee Curtis?\n\n\
                 Answer with a single entity only."
            );
        }
    }

    #[test]
    fn missing_ingredients_are_named() {
        let inputs = PromptInputs {
            question: Q,
            ..Default::default()
        };
        let opts = PromptOptions::default();
        let b = TokenBudget::DEFAULT;
        assert_eq!(
            build_prompt(MethodId::StandardDoc, &inputs, b, &opts).unwrap_err(),
            PromptError::Missing {
                method: MethodId::StandardDoc,
                missing: "an evidence document"
            }
        );
        assert!(matches!(
            build_prompt(MethodId::KsT, &inputs, b, &opts),
            Err(PromptError::Missing { missing: "triples", .. })
        ));
        assert!(matches!(
            build_prompt(MethodId::KsQ, &inputs, b, &opts),
            Err(PromptError::Missing { missing: "evidence sentences", .. })
        ));
        let t = curtis_triples();
        let only_triples = PromptInputs {
            triples: Some(&t),
            ..inputs
        };
        assert!(matches!(
            build_prompt(MethodId::KsLlm, &only_triples, b, &opts),
            Err(PromptError::Missing { missing: "evidence sentences", .. })
        ));
        assert_eq!(
            build_prompt(MethodId::Standard, &PromptInputs::default(), b, &opts).unwrap_err(),
            PromptError::EmptyQuestion
        );
    }

    #[test]
    fn format_instruction_override() {
        let opts = PromptOptions {
            format_instruction: "Reply with the entity name.".into(),
        };
        let p = build_prompt(
            MethodId::Standard,
            &PromptInputs {
                question: Q,
                ..Default::default()
            },
            TokenBudget::DEFAULT,
            &opts,
        )
        .unwrap();
        assert!(p.user_content().ends_with("Reply with the entity name."));
    }

    #[test]
    fn triple_prompt_mentions_format() {
        let p = triple_prompt(Q).unwrap();
        assert!(p.user_content().contains("(head, relation, tail)"));
        assert!(p.user_content().contains("3 to 5"));
        assert!(p.user_content().ends_with("Question: What star sign is Jamie Lee Curtis?\nTriples:"));
        assert!(triple_prompt("  ").is_err());
    }
}
