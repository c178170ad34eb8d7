//! Method signatures of the form `Qualifier.methodName(ParamType, ...)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("malformed signature `{0}`: missing parentheses")]
    MissingParens(String),
    #[error("malformed signature `{0}`: empty method name")]
    EmptyMethod(String),
    #[error("malformed signature `{0}`: missing class qualifier")]
    MissingQualifier(String),
    #[error("malformed signature `{0}`: invalid identifier `{1}`")]
    BadIdentifier(String, String),
    #[error("malformed signature `{0}`: unbalanced brackets in parameter list")]
    Unbalanced(String),
}

/// A parsed method signature.
///
/// Parameters are kept as whitespace-normalized type text; no type
/// resolution is attempted. A parameter list written as `(...)` means
/// "any arity".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodSignature {
    qualifier: Vec<String>,
    method: String,
    params: Vec<String>,
}

impl MethodSignature {
    pub fn new(
        qualifier: impl IntoIterator<Item = impl Into<String>>,
        method: impl Into<String>,
        params: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            qualifier: qualifier.into_iter().map(Into::into).collect(),
            method: method.into(),
            params: params.into_iter().map(|p| normalize_ws(&p.into())).collect(),
        }
    }

    pub fn parse(sig: &str) -> Result<Self, SignatureError> {
        validate_signature(sig)
    }

    /// Dot-joined class qualifier, e.g. `com.acme.DocumentHelper`.
    pub fn qualifier(&self) -> String {
        self.qualifier.join(".")
    }

    pub fn qualifier_segments(&self) -> &[String] {
        &self.qualifier
    }

    /// Last qualifier segment, normally the simple class name.
    pub fn class_name(&self) -> &str {
        self.qualifier.last().map(String::as_str).unwrap_or("")
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn is_wildcard(&self) -> bool {
        self.params.len() == 1 && self.params[0] == "..."
    }

    /// Number of parameters, or `None` for a `(...)` wildcard.
    pub fn arity(&self) -> Option<usize> {
        if self.is_wildcard() {
            None
        } else {
            Some(self.params.len())
        }
    }

    /// Equality on whitespace-stripped text, the comparison used for
    /// matching sinks against API lists.
    pub fn same_as(&self, other: &MethodSignature) -> bool {
        strip_ws(&self.to_string()) == strip_ws(&other.to_string())
    }
}

impl fmt::Display for MethodSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}({})", self.qualifier(), self.method, self.params.join(", "))
    }
}

impl FromStr for MethodSignature {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        validate_signature(s)
    }
}

impl Serialize for MethodSignature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodSignature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        validate_signature(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse `ClassName.methodName(parameterlist)` into its parts.
pub fn validate_signature(sig: &str) -> Result<MethodSignature, SignatureError> {
    let trimmed = sig.trim();
    let err_text = || trimmed.to_string();
    let open = trimmed
        .find('(')
        .ok_or_else(|| SignatureError::MissingParens(err_text()))?;
    if !trimmed.ends_with(')') {
        return Err(SignatureError::MissingParens(err_text()));
    }
    let head = trimmed[..open].trim();
    let inner = &trimmed[open + 1..trimmed.len() - 1];

    let (qual, method) = match head.rfind('.') {
        Some(dot) => (head[..dot].trim(), head[dot + 1..].trim()),
        None if head.is_empty() => return Err(SignatureError::EmptyMethod(err_text())),
        None => return Err(SignatureError::MissingQualifier(err_text())),
    };
    if method.is_empty() {
        return Err(SignatureError::EmptyMethod(err_text()));
    }
    check_ident(method).map_err(|id| SignatureError::BadIdentifier(err_text(), id))?;

    let qualifier: Vec<String> = qual.split('.').map(|s| s.trim().to_string()).collect();
    for seg in &qualifier {
        check_ident(seg).map_err(|id| SignatureError::BadIdentifier(err_text(), id))?;
    }

    let params = split_params(inner).ok_or_else(|| SignatureError::Unbalanced(err_text()))?;
    Ok(MethodSignature {
        qualifier,
        method: method.to_string(),
        params,
    })
}

fn check_ident(s: &str) -> Result<(), String> {
    let mut chars = s.chars();
    let ok = match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' => {
            chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(s.to_string())
    }
}

/// Split on top-level commas, respecting `<...>`, `(...)` and `[...]`.
fn split_params(inner: &str) -> Option<Vec<String>> {
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth: i32 = 0;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '<' | '(' | '[' => depth += 1,
            '>' | ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(normalize_ws(&cur));
                cur.clear();
                continue;
            }
            _ => {}
        }
        if depth < 0 {
            return None;
        }
        cur.push(c);
    }
    if depth != 0 {
        return None;
    }
    out.push(normalize_ws(&cur));
    if out.iter().any(String::is_empty) {
        return None;
    }
    Some(out)
}

pub(crate) fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn strip_ws(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}
