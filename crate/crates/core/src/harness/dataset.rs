//! JSONL metadata ingestion. One task per line; unknown fields are ignored;
//! a gold answer of "?" (hidden-split placeholder) counts as absent.

use std::path::Path;

use super::{HarnessError, Task};

pub fn load_dataset(path: &Path) -> Result<Vec<Task>, HarnessError> {
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    let raw = std::fs::read_to_string(path)?;
    let mut tasks = Vec::new();

    for (index, line) in raw.lines().enumerate() {
        let line_number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |reason: String| HarnessError::Format {
            line: line_number,
            reason,
        };

        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| fail(format!("invalid JSON: {e}")))?;

        let task_id =
            string_field(&value, &["task_id"]).ok_or_else(|| fail("missing \"task_id\"".into()))?;
        let question = string_field(&value, &["Question", "question"])
            .ok_or_else(|| fail("missing \"Question\"".into()))?;
        let level = integer_field(&value, &["Level", "level"])
            .ok_or_else(|| fail("missing \"Level\"".into()))?;
        if !(1..=3).contains(&level) {
            return Err(fail(format!("level {level} outside 1..=3")));
        }

        let gold_answer = string_field(&value, &["Final answer", "Final Answer", "final_answer"])
            .filter(|answer| !answer.is_empty() && answer != "?");

        let file_name = string_field(&value, &["file_name"])
            .filter(|name| !name.is_empty())
            .map(|name| {
                let resolved = root.join(&name);
                if resolved.is_file() {
                    Ok(resolved)
                } else {
                    Err(fail(format!(
                        "attachment `{name}` not found beside the dataset"
                    )))
                }
            })
            .transpose()?;

        let annotator_steps = value
            .get("Annotator Metadata")
            .or_else(|| value.get("annotator_metadata"))
            .and_then(|meta| {
                meta.get("Number of steps")
                    .or_else(|| meta.get("number_of_steps"))
            })
            .and_then(|steps| match steps {
                serde_json::Value::Number(n) => n.as_u64(),
                serde_json::Value::String(s) => s.trim().parse().ok(),
                _ => None,
            })
            .and_then(|steps| u32::try_from(steps).ok())
            .filter(|steps| *steps > 0);

        tasks.push(Task {
            task_id,
            question,
            level: level as u8,
            gold_answer,
            file_name,
            annotator_steps,
        });
    }
    Ok(tasks)
}

fn string_field(value: &serde_json::Value, names: &[&str]) -> Option<String> {
    names
        .iter()
        .find_map(|name| value.get(name))
        .and_then(|v| v.as_str())
        .map(str::to_string)
}

fn integer_field(value: &serde_json::Value, names: &[&str]) -> Option<i64> {
    let field = names.iter().find_map(|name| value.get(name))?;
    match field {
        serde_json::Value::Number(n) => n.as_i64(),
        serde_json::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}
