use std::fs;

use egbo::LoopState;
use serde_json::{json, Value};

use crate::{runtime, CliError, ReplayArgs, OUTPUT_SCHEMA_VERSION};

/// Finds the loop document inside a trace, a session document or on its own.
fn loop_document(value: &Value) -> Option<&Value> {
    match value.get("loop_state") {
        Some(doc) if doc.is_null() => None,
        Some(doc) => Some(doc),
        None => Some(value),
    }
}

pub fn execute(args: ReplayArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.file)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.file.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{} is not JSON: {e}", args.file.display())))?;
    let doc = loop_document(&value)
        .ok_or_else(|| CliError::Usage("the document has no committed loop state yet".into()))?;
    let state = LoopState::from_json(&doc.to_string()).map_err(|e| CliError::Usage(e.to_string()))?;

    let iterations = state.history().len();
    let mut outcome = state.replay().map_err(|e| e.to_string()).and_then(|replayed| {
        if replayed.dataset() != state.dataset() {
            return Err("replayed observations differ from the record".to_string());
        }
        Ok(replayed)
    });
    // a session document also carries the pending choice set
    if let (Ok(replayed), Some(pending)) = (&outcome, value.get("choices").filter(|c| !c.is_null())) {
        let regenerated = replayed
            .propose_choices()
            .map_err(|e| e.to_string())
            .and_then(|c| serde_json::to_value(c).map_err(|e| e.to_string()));
        match regenerated {
            Ok(c) if &c == pending => {}
            Ok(_) => outcome = Err("the pending choice set is not reproduced".into()),
            Err(e) => outcome = Err(e),
        }
    }

    let message = match &outcome {
        Ok(_) => format!("replayed {iterations} iterations: identical"),
        Err(e) => format!("replay failed: {e}"),
    };
    println!("{message}");
    if let Some(out) = &args.out {
        let report = json!({
            "schema_version": OUTPUT_SCHEMA_VERSION,
            "file": args.file.display().to_string(),
            "iterations": iterations,
            "evaluations": state.evaluations(),
            "identical": outcome.is_ok(),
            "message": message,
        });
        fs::write(out, serde_json::to_string_pretty(&report).map_err(runtime)?).map_err(runtime)?;
    }
    outcome.map(|_| ()).map_err(CliError::Runtime)
}
