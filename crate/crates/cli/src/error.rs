use std::fmt;

/// A failed run. Validation problems exit with 1, numerical failures with 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Validation {
        field: Option<String>,
        line: Option<usize>,
        message: String,
    },
    Numerical {
        message: String,
    },
}

impl CliError {
    pub fn validation(field: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: Some(field.into()),
            line,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Numerical { .. } => 2,
        }
    }

    /// Maps a library error, locating the offending field in the job text.
    pub fn from_core(err: errvar::Error, text: &str) -> Self {
        if err.is_numerical() {
            return CliError::Numerical {
                message: err.to_string(),
            };
        }
        match err.field() {
            Some(field) => CliError::Validation {
                field: Some(field.to_string()),
                line: locate_key(text, field),
                message: err.to_string(),
            },
            None => CliError::Validation {
                field: None,
                line: None,
                message: err.to_string(),
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation { field, line, message } => {
                write!(f, "invalid input")?;
                if let Some(field) = field {
                    write!(f, " in field `{field}`")?;
                }
                if let Some(line) = line {
                    write!(f, " (line {line})")?;
                }
                write!(f, ": {message}")
            }
            CliError::Numerical { message } => write!(f, "numerical failure: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

/// 1-based line of the first `"key":` in a JSON document.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&quoted) {
        let at = from + pos;
        let rest = text[at + quoted.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(text[..at].matches('\n').count() + 1);
        }
        from = at + quoted.len();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_keys_not_values() {
        let text = "{\n  \"kind\": \"design\",\n  \"design\" : [1]\n}";
        assert_eq!(locate_key(text, "design"), Some(3));
        assert_eq!(locate_key(text, "kind"), Some(2));
        assert_eq!(locate_key(text, "missing"), None);
    }
}
