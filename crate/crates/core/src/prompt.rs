//! Scoring-prompt rendering.
//!
//! The template instructs the policy to judge conditional similarity in two
//! steps (binary judgment, then fine-grained score), shows three worked
//! examples, and fixes the output grammar the parser expects:
//! `<answer>yes(k)</answer>` / `<answer>no(k)</answer>`.

use crate::domain::Sample;

/// The few-shot scoring prompt. `{sentence1}`, `{sentence2}` and
/// `{condition}` are substituted verbatim by [`render_prompt`].
pub const PROMPT_TEMPLATE: &str = r#"Judge the semantic similarity between Sentence 1 and Sentence 2 based completely on the given Condition.
The final output must be exactly in this format: the similarity judgment ('yes' or 'no') followed by the score in parentheses, wrapped in <answer></answer> tags. Examples: <answer>yes(4)</answer>, <answer>no(1)</answer>. Include no other text, tags, or explanations.

To arrive at this output, follow these two steps:

Step 1: Binary Judgment. Determine if the sentences are 'similar' ('yes') or 'not similar' ('no').
- 'similar': The sentences are roughly, mostly, or completely equivalent under the condition.
- 'not similar': The sentences are dissimilar under the condition.

Step 2: Fine-grained Score. Assign an integer score based on Step 1:
- For a 'yes' judgment:
  - 5: The two sentences are completely equivalent as they mean the same thing with respect to the condition.
  - 4: The two sentences are mostly equivalent, but some unimportant details differ with respect to the condition.
  - 3: The two sentences are roughly equivalent, but some important information differs or is missing with respect to the condition.
- For a 'no' judgment:
  - 2: The two sentences are dissimilar, but are on a similar topic with respect to the condition or shares a close semantic relationship. This applies when items are clearly different, but not direct opposites.
  - 1: The two sentences are dissimilar with respect to the condition, representing a direct opposition or a clear, unrelated difference. (e.g., 'man' vs. 'woman').

Here are some examples:

Example 1:
<Sentence1>: A girl is cooking in a kitchen and a man is standing next to her.
<Sentence2>: A man sitting with a pizza in his hand in front of pizza on the table.
<Condition>: The number of people.
<answer>no(1)</answer>
Explanation: The first sentence mentions two people, while the second sentence mentions only one person.

Example 2:
<Sentence1>: A wood table sitting by a wood framed bed with a lamp on it.
<Sentence2>: A microwave, refrigerator, television, and wooden drawers sit in the corner of a bedroom.
<Condition>: The room type.
<answer>yes(5)</answer>
Explanation: We can infer from the two sentences that the room type are both bedroom.

Example 3:
<Sentence1>: A small crowd gathered around the injured person.
<Sentence2>: A crowd jumps up and down to the tunes played by an artist.
<Condition>: The number of people
<answer>yes(3)</answer>
Explanation: While both sentences mention crowds, it is important and unclear how many people there are.

Now, apply these steps to the following sentences:

<Sentence1>: {sentence1}
<Sentence2>: {sentence2}
<Condition>: {condition}
"#;

/// Substitutes the sample's fields into the template. Each placeholder is
/// replaced exactly once and substituted values are never rescanned, so
/// brace sequences inside the texts pass through untouched.
pub fn render_prompt(sample: &Sample) -> String {
    let substitutions = [
        ("{sentence1}", sample.text1.as_str()),
        ("{sentence2}", sample.text2.as_str()),
        ("{condition}", sample.condition.as_str()),
    ];
    let mut out = String::with_capacity(PROMPT_TEMPLATE.len() + 256);
    let mut rest = PROMPT_TEMPLATE;
    for (placeholder, value) in substitutions {
        let at = rest
            .find(placeholder)
            .expect("placeholder present in template");
        out.push_str(&rest[..at]);
        out.push_str(value);
        rest = &rest[at + placeholder.len()..];
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t1: &str, t2: &str, c: &str) -> Sample {
        Sample::new(t1, t2, c, 3).unwrap()
    }

    #[test]
    fn rendered_prompt_carries_the_answer_format() {
        let p = render_prompt(&sample("a", "b", "color"));
        assert!(p.contains("<answer>"));
        assert!(p.contains("<answer>yes(4)</answer>"));
        assert!(p.contains("<answer>no(1)</answer>"));
    }

    #[test]
    fn fields_are_substituted_verbatim() {
        let p = render_prompt(&sample("naïve café ☕", "b", "condición"));
        assert!(p.contains("<Sentence1>: naïve café ☕\n"));
        assert!(p.contains("<Condition>: condición\n"));
    }

    #[test]
    fn placeholder_like_text_is_not_rescanned() {
        let p = render_prompt(&sample("{sentence2}", "B", "C"));
        // The literal brace text from sentence1 must survive, and sentence2
        // must still land in its own slot.
        assert!(p.contains("<Sentence1>: {sentence2}\n"));
        assert!(p.contains("<Sentence2>: B\n"));
    }

    #[test]
    fn no_placeholders_remain_after_rendering() {
        let p = render_prompt(&sample("a", "b", "c"));
        assert!(!p.contains("{sentence1}"));
        assert!(!p.contains("{sentence2}"));
        assert!(!p.contains("{condition}"));
    }
}
