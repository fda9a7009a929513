//! Plain-text run configs:
//!
//! ```text
//! # shared by every subcommand
//! graph = lattice:2
//! seed = 7
//!
//! [pack]
//! eps = 0.2
//! segment-length = 64
//! ```
//!
//! Keys are flag names without the leading dashes. Keys before the first
//! section header, or under `[run]`, apply to every subcommand; a section
//! named after a subcommand applies to it alone. Flags given on the command
//! line win.

use std::path::Path;

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

/// Flag arguments for `command` from config `text`, in file order.
pub fn to_args(text: &str, command: &str) -> Result<Vec<String>, ConfigError> {
    let mut args = Vec::new();
    let mut active = true;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError { line: i + 1, message: format!("unterminated section header '{line}'") })?
                .trim();
            active = name == "run" || name == command;
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError { line: i + 1, message: format!("expected 'key = value', got '{line}'") })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.starts_with('-') {
            return Err(ConfigError { line: i + 1, message: format!("bad key '{key}'") });
        }
        if !active {
            continue;
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

/// Splices config arguments in right after the subcommand so that later
/// command-line flags override them.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let (path, consumed) = match argv[pos].strip_prefix("--config=") {
        Some(p) => (p.to_string(), 1),
        None => (argv.get(pos + 1).cloned().ok_or("--config needs a path")?, 2),
    };
    let command = argv.get(1).filter(|c| !c.starts_with('-')).cloned().ok_or("--config must follow a subcommand")?;
    if pos < 2 {
        return Err("--config must follow a subcommand".into());
    }
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| format!("{path}: {e}"))?;
    let extra = to_args(&text, &command).map_err(|e| format!("{path}: line {}: {}", e.line, e.message))?;
    let mut out: Vec<String> = argv[..2].to_vec();
    out.extend(extra);
    out.extend(argv[2..pos].iter().cloned());
    out.extend(argv[pos + consumed..].iter().cloned());
    Ok(out)
}
