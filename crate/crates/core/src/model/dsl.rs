//! The `.fm` text format.
//!
//! ```text
//! # comments start with '#'
//! model Synthline 1.0
//!
//! Synthline
//!   Generator
//!     LLM
//!       xor:
//!         GPT4o "GPT-4o"
//!         DeepSeekV3 "DeepSeek-V3"
//!     Temperature attr number [0, 2]
//!   Notes? attr text multiple
//!   Format attr enum {CSV, JSON, "Plain text"}
//! constraints
//!   Notes requires Generator
//! ```
//!
//! * One feature per line; nesting is expressed by indentation (spaces only).
//! * Children of a plain feature are mandatory unless suffixed with `?`
//!   (`!` is accepted as an explicit mandatory marker).
//! * A line `or:` or `xor:` turns its parent into a group; the group members are
//!   indented below it and carry no marker. A group header must be the only child.
//! * A quoted string after the name is the feature's label, used as the value
//!   when the feature is selected inside a group.
//! * `attr enum {..}`, `attr number [min, max]` and `attr text` attach an attribute
//!   to a leaf, optionally followed by `single` (default) or `multiple`.
//! * After a `constraints` line at column 0, each line is `A requires B` or `A excludes B`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{
    AttributeKind, AttributeSpec, Constraint, ConstraintKind, Decomposition, Feature,
    FeatureModel, ModelError, Multiplicity, Optionality,
};

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Quoted(q) => format!("\"{q}\""),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
        }
    }
}

fn is_special(c: char) -> bool {
    matches!(c, '{' | '}' | '[' | ']' | ',' | '"')
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Splits one line into tokens, each paired with its 1-based column.
fn lex(line_no: usize, line: &str) -> Result<Vec<(Tok, usize)>, ModelError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, column));
            i += 1;
            continue;
        }
        if c == '"' {
            let mut value = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(line_no, column, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => match chars.get(i + 1) {
                        Some(&e @ ('"' | '\\')) => {
                            value.push(e);
                            i += 2;
                        }
                        _ => return Err(syntax(line_no, i + 1, "invalid escape in string")),
                    },
                    Some(&other) => {
                        value.push(other);
                        i += 1;
                    }
                }
            }
            out.push((Tok::Quoted(value), column));
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() && !is_special(chars[i]) {
            i += 1;
        }
        out.push((Tok::Word(chars[start..i].iter().collect()), column));
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |(_, c)| *c)
    }

    fn next(&mut self, expected: &str) -> Result<&'a Tok, ModelError> {
        match self.toks.get(self.pos) {
            Some((t, _)) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(syntax(self.line, self.end_column, format!("expected {expected}, found end of line"))),
        }
    }

    fn unexpected(&self, expected: &str) -> ModelError {
        let found = self.peek().map_or_else(|| "end of line".to_string(), Tok::describe);
        syntax(self.line, self.column(), format!("expected {expected}, found {found}"))
    }

    fn word(&mut self, expected: &str) -> Result<&'a str, ModelError> {
        let column = self.column();
        match self.next(expected)? {
            Tok::Word(w) => Ok(w),
            other => Err(syntax(self.line, column, format!("expected {expected}, found {}", other.describe()))),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ModelError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn number(&mut self) -> Result<f64, ModelError> {
        let column = self.column();
        let w = self.word("a number")?;
        w.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| syntax(self.line, column, format!("`{w}` is not a number")))
    }

    fn finish(&self) -> Result<(), ModelError> {
        if self.pos < self.toks.len() {
            Err(self.unexpected("end of line"))
        } else {
            Ok(())
        }
    }
}

enum Marker {
    None,
    Optional,
    Mandatory,
}

struct FeatureLine {
    name: String,
    marker: Marker,
    label: Option<String>,
    attribute: Option<AttributeSpec>,
}

fn parse_feature_line(line_no: usize, toks: &[(Tok, usize)], end_column: usize) -> Result<FeatureLine, ModelError> {
    let mut cur = Cursor { toks, pos: 0, line: line_no, end_column };
    let name_column = cur.column();
    let raw = cur.word("a feature name")?;
    let (name, marker) = if let Some(n) = raw.strip_suffix('?') {
        (n, Marker::Optional)
    } else if let Some(n) = raw.strip_suffix('!') {
        (n, Marker::Mandatory)
    } else {
        (raw, Marker::None)
    };
    if !is_identifier(name) {
        return Err(syntax(line_no, name_column, format!("`{name}` is not a valid feature name")));
    }
    let label = match cur.peek() {
        Some(Tok::Quoted(q)) => {
            cur.pos += 1;
            Some(q.clone())
        }
        _ => None,
    };
    let attribute = match cur.peek() {
        None => None,
        Some(Tok::Word(w)) if w == "attr" => {
            cur.pos += 1;
            Some(parse_attribute(&mut cur)?)
        }
        Some(_) => return Err(cur.unexpected("`attr` or end of line")),
    };
    cur.finish()?;
    Ok(FeatureLine {
        name: name.to_string(),
        marker,
        label,
        attribute,
    })
}

fn parse_attribute(cur: &mut Cursor<'_>) -> Result<AttributeSpec, ModelError> {
    let kind_column = cur.column();
    let kind = match cur.word("an attribute kind (enum, number, text)")? {
        "enum" => {
            cur.expect(Tok::LBrace, "`{`")?;
            let mut allowed_values = Vec::new();
            loop {
                let column = cur.column();
                match cur.next("an enumeration value")? {
                    Tok::Word(w) | Tok::Quoted(w) => allowed_values.push(w.clone()),
                    other => {
                        return Err(syntax(cur.line, column, format!("expected an enumeration value, found {}", other.describe())))
                    }
                }
                match cur.peek() {
                    Some(Tok::Comma) => cur.pos += 1,
                    Some(Tok::RBrace) => {
                        cur.pos += 1;
                        break;
                    }
                    _ => return Err(cur.unexpected("`,` or `}`")),
                }
            }
            AttributeKind::Enumeration { allowed_values }
        }
        "number" => {
            cur.expect(Tok::LBracket, "`[`")?;
            let min = cur.number()?;
            cur.expect(Tok::Comma, "`,`")?;
            let max = cur.number()?;
            cur.expect(Tok::RBracket, "`]`")?;
            AttributeKind::Number { min, max }
        }
        "text" => AttributeKind::Text,
        other => return Err(syntax(cur.line, kind_column, format!("unknown attribute kind `{other}`"))),
    };
    let multiplicity = match cur.peek() {
        Some(Tok::Word(w)) if w == "single" => {
            cur.pos += 1;
            Multiplicity::Single
        }
        Some(Tok::Word(w)) if w == "multiple" => {
            cur.pos += 1;
            Multiplicity::Multiple
        }
        _ => Multiplicity::Single,
    };
    let spec = AttributeSpec { kind, multiplicity };
    spec.validate().map_err(|reason| syntax(cur.line, kind_column, reason))?;
    Ok(spec)
}

enum NodeKind {
    Feature(FeatureLine),
    Group(Decomposition),
}

struct Node {
    kind: NodeKind,
    indent: usize,
    line: usize,
    children: Vec<usize>,
    child_indent: Option<usize>,
}

pub fn parse(text: &str) -> Result<FeatureModel, ModelError> {
    let mut header: Option<(String, String)> = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut root: Option<usize> = None;
    let mut constraints = Vec::new();
    let mut in_constraints = false;

    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let content = line.trim_start_matches(' ');
        let indent = line.len() - content.len();
        if content.trim().is_empty() || content.starts_with('#') {
            continue;
        }
        if content.starts_with('\t') {
            return Err(syntax(line_no, indent + 1, "tabs are not allowed in indentation"));
        }
        let toks = lex(line_no, line)?;
        let end_column = line.chars().count() + 1;

        if header.is_none() {
            let mut cur = Cursor { toks: &toks, pos: 0, line: line_no, end_column };
            if cur.word("`model`")? != "model" {
                return Err(syntax(line_no, indent + 1, "the first line must be `model <name> <version>`"));
            }
            let name_column = cur.column();
            let name = cur.word("a model name")?.to_string();
            if !is_identifier(&name) {
                return Err(syntax(line_no, name_column, format!("`{name}` is not a valid model name")));
            }
            let version = match cur.next("a version")? {
                Tok::Word(w) | Tok::Quoted(w) => w.clone(),
                other => return Err(syntax(line_no, name_column, format!("expected a version, found {}", other.describe()))),
            };
            cur.finish()?;
            header = Some((name, version));
            continue;
        }

        if indent == 0 && toks.len() == 1 && toks[0].0 == Tok::Word("constraints".into()) {
            if in_constraints {
                return Err(syntax(line_no, 1, "duplicate `constraints` section"));
            }
            in_constraints = true;
            continue;
        }

        if in_constraints {
            let mut cur = Cursor { toks: &toks, pos: 0, line: line_no, end_column };
            let lhs = cur.word("a feature name")?.to_string();
            let kind_column = cur.column();
            let kind = match cur.word("`requires` or `excludes`")? {
                "requires" => ConstraintKind::Requires,
                "excludes" => ConstraintKind::Excludes,
                other => {
                    return Err(syntax(line_no, kind_column, format!("expected `requires` or `excludes`, found `{other}`")))
                }
            };
            let rhs = cur.word("a feature name")?.to_string();
            cur.finish()?;
            constraints.push(Constraint { kind, lhs, rhs });
            continue;
        }

        let kind = match toks.as_slice() {
            [(Tok::Word(w), _)] if w == "or:" => NodeKind::Group(Decomposition::Or),
            [(Tok::Word(w), _)] if w == "xor:" => NodeKind::Group(Decomposition::Xor),
            _ => NodeKind::Feature(parse_feature_line(line_no, &toks, end_column)?),
        };

        while let Some(&top) = stack.last() {
            if nodes[top].indent >= indent {
                stack.pop();
            } else {
                break;
            }
        }

        let id = nodes.len();
        match stack.last().copied() {
            None => {
                if root.is_some() {
                    return Err(syntax(line_no, indent + 1, "a model has exactly one root feature"));
                }
                if indent != 0 {
                    return Err(syntax(line_no, indent + 1, "the root feature must not be indented"));
                }
                match &kind {
                    NodeKind::Group(_) => return Err(syntax(line_no, 1, "a group header needs a parent feature")),
                    NodeKind::Feature(f) if !matches!(f.marker, Marker::None) => {
                        return Err(syntax(line_no, 1, "the root feature takes no optional/mandatory marker"))
                    }
                    NodeKind::Feature(_) => {}
                }
                root = Some(id);
            }
            Some(parent) => {
                let has_group_child = nodes[parent]
                    .children
                    .first()
                    .is_some_and(|&c| matches!(nodes[c].kind, NodeKind::Group(_)));
                let p = &mut nodes[parent];
                match p.child_indent {
                    None => p.child_indent = Some(indent),
                    Some(ci) if ci != indent => {
                        return Err(syntax(line_no, indent + 1, "inconsistent indentation"));
                    }
                    Some(_) => {}
                }
                match (&p.kind, &kind) {
                    (NodeKind::Group(_), NodeKind::Group(_)) => {
                        return Err(syntax(line_no, indent + 1, "group headers cannot be nested directly"))
                    }
                    (NodeKind::Group(_), NodeKind::Feature(f)) if !matches!(f.marker, Marker::None) => {
                        return Err(syntax(line_no, indent + 1, "group members take no optional/mandatory marker"))
                    }
                    (NodeKind::Feature(pf), _) if pf.attribute.is_some() => {
                        return Err(syntax(line_no, indent + 1, format!("`{}` has an attribute and cannot have children", pf.name)))
                    }
                    (NodeKind::Feature(_), NodeKind::Group(_)) if !p.children.is_empty() => {
                        return Err(syntax(line_no, indent + 1, "a group header must be the only child of its feature"))
                    }
                    (NodeKind::Feature(_), NodeKind::Feature(_)) if has_group_child => {
                        return Err(syntax(line_no, indent + 1, "a group header must be the only child of its feature"))
                    }
                    _ => {}
                }
                nodes[parent].children.push(id);
            }
        }
        nodes.push(Node {
            kind,
            indent,
            line: line_no,
            children: Vec::new(),
            child_indent: None,
        });
        stack.push(id);
    }

    let (name, version) = header.ok_or_else(|| syntax(1, 1, "missing `model <name> <version>` header"))?;
    let root = root.ok_or_else(|| syntax(text.split('\n').count(), 1, "missing root feature"))?;
    let root = build(&mut nodes, root, Optionality::Mandatory)?;
    FeatureModel::new(name, version, root, constraints)
}

fn build(nodes: &mut Vec<Node>, id: usize, optionality: Optionality) -> Result<Feature, ModelError> {
    let children = core::mem::take(&mut nodes[id].children);
    let NodeKind::Feature(fl) = core::mem::replace(&mut nodes[id].kind, NodeKind::Group(Decomposition::Leaf)) else {
        unreachable!("group nodes are built by their parent")
    };
    let (decomposition, built) = match children.as_slice() {
        [] => (Decomposition::Leaf, Vec::new()),
        [only] if matches!(nodes[*only].kind, NodeKind::Group(_)) => {
            let NodeKind::Group(kind) = nodes[*only].kind else { unreachable!() };
            let members = core::mem::take(&mut nodes[*only].children);
            if members.is_empty() {
                return Err(syntax(nodes[*only].line, nodes[*only].indent + 1, "group has no members"));
            }
            let members = members
                .into_iter()
                .map(|m| build(nodes, m, Optionality::Optional))
                .collect::<Result<Vec<_>, _>>()?;
            (kind, members)
        }
        _ => {
            let mut built = Vec::with_capacity(children.len());
            for c in children {
                let NodeKind::Feature(f) = &nodes[c].kind else { unreachable!() };
                let opt = match f.marker {
                    Marker::Optional => Optionality::Optional,
                    Marker::Mandatory | Marker::None => Optionality::Mandatory,
                };
                built.push(build(nodes, c, opt)?);
            }
            (Decomposition::And, built)
        }
    };
    Ok(Feature {
        name: fl.name,
        label: fl.label,
        optionality,
        decomposition,
        children: built,
        attribute: fl.attribute,
    })
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn word_or_quoted(s: &str) -> String {
    let plain = !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || is_special(c));
    if plain {
        s.to_string()
    } else {
        quote(s)
    }
}

/// Canonical text form; [`parse`] of the output yields an equal model.
pub fn serialize(model: &FeatureModel) -> String {
    let mut out = format!("model {} {}\n\n", model.name, word_or_quoted(&model.version));
    write_feature(&mut out, &model.root, 0, false);
    if !model.constraints.is_empty() {
        out.push_str("constraints\n");
        for c in &model.constraints {
            let kind = match c.kind {
                ConstraintKind::Requires => "requires",
                ConstraintKind::Excludes => "excludes",
            };
            out.push_str(&format!("  {} {} {}\n", c.lhs, kind, c.rhs));
        }
    }
    out
}

fn write_feature(out: &mut String, f: &Feature, depth: usize, marked: bool) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(&f.name);
    if marked && f.optionality == Optionality::Optional {
        out.push('?');
    }
    if let Some(label) = &f.label {
        out.push(' ');
        out.push_str(&quote(label));
    }
    if let Some(attr) = &f.attribute {
        out.push_str(" attr ");
        match &attr.kind {
            AttributeKind::Enumeration { allowed_values } => {
                let items: Vec<String> = allowed_values.iter().map(|v| word_or_quoted(v)).collect();
                out.push_str(&format!("enum {{{}}}", items.join(", ")));
            }
            AttributeKind::Number { min, max } => out.push_str(&format!("number [{min}, {max}]")),
            AttributeKind::Text => out.push_str("text"),
        }
        if attr.multiplicity == Multiplicity::Multiple {
            out.push_str(" multiple");
        }
    }
    out.push('\n');
    match f.decomposition {
        Decomposition::Leaf => {}
        Decomposition::And => {
            for c in &f.children {
                write_feature(out, c, depth + 1, true);
            }
        }
        Decomposition::Or | Decomposition::Xor => {
            for _ in 0..=depth {
                out.push_str("  ");
            }
            out.push_str(if f.decomposition == Decomposition::Or { "or:\n" } else { "xor:\n" });
            for c in &f.children {
                write_feature(out, c, depth + 2, false);
            }
        }
    }
}
