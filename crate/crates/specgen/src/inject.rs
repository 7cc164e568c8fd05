//! Source rewriting: rename the target method, wrap it, and guard the
//! postcondition.
//!
//! The original method keeps its body untouched and gains a
//! `_ToBeValidated` suffix. A wrapper with the identical signature runs
//! pre-ghost statements, forwards the call (binding the result to `ret`
//! for non-void methods), runs post-ghost statements, and throws
//! `IllegalStateException` with a unique marker when the condition fails.
//! The transformation is purely syntactic: spec text that breaks
//! compilation is classified downstream by the compiler.

use thiserror::Error;
use tree_sitter::Node;

use crate::java;
use crate::spec_io::SpecCandidate;

pub const RENAME_SUFFIX: &str = "_ToBeValidated";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSite {
    pub class_fqn: String,
    pub method_name: String,
    /// Normalized parameter type texts, for overload disambiguation.
    pub param_types: Vec<String>,
    pub params: Vec<(String, String)>,
    pub modifiers: Vec<String>,
    pub type_params: String,
    pub return_type: String,
    pub throws: Vec<String>,
    pub is_static: bool,
    pub is_void: bool,
    pub doc_span: Option<(usize, usize)>,
    /// Entire declaration, modifiers through closing brace.
    pub decl_span: (usize, usize),
    /// The method name identifier token.
    pub name_span: (usize, usize),
    pub body_span: (usize, usize),
    /// Leading whitespace of the declaration's first line.
    pub indent: String,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InjectError {
    #[error("source file does not parse")]
    ParseError,
    #[error("class {0} not found in source")]
    ClassNotFound(String),
    #[error("method {0} not found")]
    NotFound(String),
    #[error("method {0} is ambiguous after normalization; give parameter types")]
    AmbiguousOverload(String),
    #[error("unsupported member kind: {0}")]
    UnsupportedMember(&'static str),
    #[error("bad method signature {0:?}: expected name(T1, T2, ...)")]
    BadSignature(String),
    #[error("target already instrumented ({0} present)")]
    AlreadyInstrumented(String),
}

#[derive(Debug, Clone)]
pub struct InstrumentedFile {
    pub rewritten: String,
    pub marker: String,
    pub diff: String,
}

/// Resolve the unique method declaration matching `method_signature`
/// (name plus parameter types after whitespace/qualification
/// normalization) inside `class_fqn`.
pub fn locate_method(
    source: &str,
    class_fqn: &str,
    method_signature: &str,
) -> Result<MethodSite, InjectError> {
    let (want_name, want_params) = parse_signature(method_signature)
        .ok_or_else(|| InjectError::BadSignature(method_signature.to_string()))?;
    let tree = java::parse(source).ok_or(InjectError::ParseError)?;
    let root = tree.root_node();
    let package = java::package_name(root, source);

    let class = find_class(root, source, package.as_deref(), class_fqn)
        .ok_or_else(|| InjectError::ClassNotFound(class_fqn.to_string()))?;
    let body = class
        .child_by_field_name("body")
        .ok_or(InjectError::ClassNotFound(class_fqn.to_string()))?;

    let mut matches = Vec::new();
    let mut ctor_match = false;
    let mut cursor = body.walk();
    for member in body.children(&mut cursor) {
        match member.kind() {
            "method_declaration" => {
                let Some(sig) = crate::index::method_sig(member, source) else { continue };
                if sig.name != want_name {
                    continue;
                }
                if !params_match(&sig.params, &want_params) {
                    continue;
                }
                matches.push(member);
            }
            "constructor_declaration" => {
                if let Some(name) = member.child_by_field_name("name") {
                    if java::text(name, source) == want_name {
                        ctor_match = true;
                    }
                }
            }
            _ => {}
        }
    }

    match matches.len() {
        0 if ctor_match => Err(InjectError::UnsupportedMember("constructor")),
        0 => Err(InjectError::NotFound(want_name)),
        1 => site_from_node(matches[0], source, class_fqn),
        _ => Err(InjectError::AmbiguousOverload(want_name)),
    }
}

/// Produce the rewritten file text for one spec candidate.
pub fn instrument(
    source: &str,
    site: &MethodSite,
    spec: &SpecCandidate,
    marker: &str,
) -> Result<InstrumentedFile, InjectError> {
    let renamed = format!("{}{}", site.method_name, RENAME_SUFFIX);
    if source.contains(&renamed) {
        return Err(InjectError::AlreadyInstrumented(renamed));
    }

    let wrapper = render_wrapper(site, spec, marker, &renamed);

    // Apply the two body edits back to front so spans stay valid.
    let mut rewritten = String::with_capacity(source.len() + wrapper.len() + 64);
    rewritten.push_str(&source[..site.name_span.0]);
    rewritten.push_str(&renamed);
    rewritten.push_str(&source[site.name_span.1..site.decl_span.1]);
    rewritten.push_str("\n\n");
    rewritten.push_str(&wrapper);
    rewritten.push_str(&source[site.decl_span.1..]);

    let rewritten = insert_imports(&rewritten, &spec.imports);

    let diff = similar::TextDiff::from_lines(source, &rewritten)
        .unified_diff()
        .header("original", "instrumented")
        .to_string();

    Ok(InstrumentedFile { rewritten, marker: marker.to_string(), diff })
}

/// Default marker format; enables failure attribution in the runner.
pub fn marker_for(task_id: &str, sample: u32) -> String {
    format!("SPEC_VIOLATION::{task_id}::{sample}")
}

fn render_wrapper(site: &MethodSite, spec: &SpecCandidate, marker: &str, renamed: &str) -> String {
    let outer = &site.indent;
    let inner = format!("{outer}    ");
    let mut out = String::new();

    out.push_str(outer);
    for m in &site.modifiers {
        out.push_str(m);
        out.push(' ');
    }
    if !site.type_params.is_empty() {
        out.push_str(&site.type_params);
        out.push(' ');
    }
    out.push_str(&site.return_type);
    out.push(' ');
    out.push_str(&site.method_name);
    out.push('(');
    for (i, (ty, name)) in site.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(ty);
        out.push(' ');
        out.push_str(name);
    }
    out.push(')');
    if !site.throws.is_empty() {
        out.push_str(" throws ");
        out.push_str(&site.throws.join(", "));
    }
    out.push_str(" {\n");

    for line in spec.pre_ghost.lines() {
        out.push_str(&inner);
        out.push_str(line);
        out.push('\n');
    }

    let args: Vec<&str> = site.params.iter().map(|(_, n)| n.as_str()).collect();
    out.push_str(&inner);
    if site.is_void {
        out.push_str(&format!("{renamed}({});\n", args.join(", ")));
    } else {
        out.push_str(&format!(
            "{} ret = {renamed}({});\n",
            site.return_type,
            args.join(", ")
        ));
    }

    for line in spec.post_ghost.lines() {
        out.push_str(&inner);
        out.push_str(line);
        out.push('\n');
    }

    let condition = join_condition(&spec.condition, &inner);
    out.push_str(&inner);
    out.push_str(&format!(
        "if (!({condition})) {{ throw new IllegalStateException(\"{marker}\"); }}\n"
    ));

    if !site.is_void {
        out.push_str(&inner);
        out.push_str("return ret;\n");
    }
    out.push_str(outer);
    out.push('}');
    out
}

fn join_condition(condition: &str, inner: &str) -> String {
    let mut lines = condition.lines();
    let mut out = lines.next().unwrap_or("").trim_end().to_string();
    for line in lines {
        out.push('\n');
        out.push_str(inner);
        out.push_str("        ");
        out.push_str(line.trim_end());
    }
    out
}

/// Insert each missing import after the package declaration (or at the
/// top of the file when there is none). Exact-text duplicates are
/// skipped.
fn insert_imports(source: &str, imports: &[String]) -> String {
    let missing: Vec<&String> = imports
        .iter()
        .filter(|imp| !source.lines().any(|l| l.trim() == imp.trim()))
        .collect();
    if missing.is_empty() {
        return source.to_string();
    }
    let mut block = String::new();
    for imp in missing {
        block.push_str(imp);
        block.push('\n');
    }
    let insert_at = package_end(source).unwrap_or(0);
    let mut out = String::with_capacity(source.len() + block.len());
    out.push_str(&source[..insert_at]);
    if insert_at > 0 {
        out.push_str("\n\n");
    }
    out.push_str(&block);
    let rest = source[insert_at..].trim_start_matches('\n');
    if insert_at > 0 && !rest.is_empty() {
        out.push('\n');
    }
    out.push_str(rest);
    out
}

fn package_end(source: &str) -> Option<usize> {
    let tree = java::parse(source)?;
    let root = tree.root_node();
    let mut cursor = root.walk();
    for child in root.children(&mut cursor) {
        if child.kind() == "package_declaration" {
            return Some(child.end_byte());
        }
    }
    None
}

fn site_from_node(node: Node, source: &str, class_fqn: &str) -> Result<MethodSite, InjectError> {
    let sig = crate::index::method_sig(node, source).ok_or(InjectError::ParseError)?;
    let Some(body_span) = sig.body_span else {
        return Err(InjectError::UnsupportedMember("abstract or native method"));
    };
    if sig.modifiers.iter().any(|m| m == "abstract" || m == "native") {
        return Err(InjectError::UnsupportedMember("abstract or native method"));
    }
    let return_type = sig.return_type.clone().unwrap_or_default();
    let name_node = node.child_by_field_name("name").ok_or(InjectError::ParseError)?;

    let decl_start = node.start_byte();
    let line_start = source[..decl_start].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let indent: String = source[line_start..decl_start]
        .chars()
        .take_while(|c| c.is_whitespace())
        .collect();

    let doc_span = java::doc_comment(node, source).map(|_| {
        let prev = node.prev_sibling().unwrap();
        (prev.start_byte(), prev.end_byte())
    });

    Ok(MethodSite {
        class_fqn: class_fqn.to_string(),
        method_name: sig.name.clone(),
        param_types: sig.params.iter().map(|(t, _)| java::simple_type(t)).collect(),
        params: sig.params,
        modifiers: sig.modifiers,
        type_params: sig.type_params,
        is_void: return_type == "void",
        return_type,
        throws: sig.throws,
        is_static: false, // set below
        doc_span,
        decl_span: (decl_start, node.end_byte()),
        name_span: (name_node.start_byte(), name_node.end_byte()),
        body_span,
        indent,
    })
    .map(|mut site| {
        site.is_static = site.modifiers.iter().any(|m| m == "static");
        site
    })
}

fn find_class<'t>(
    root: Node<'t>,
    source: &str,
    package: Option<&str>,
    class_fqn: &str,
) -> Option<Node<'t>> {
    fn walk<'t>(
        node: Node<'t>,
        source: &str,
        enclosing: &str,
        package: Option<&str>,
        class_fqn: &str,
        out: &mut Vec<Node<'t>>,
    ) {
        if !matches!(
            node.kind(),
            "class_declaration" | "interface_declaration" | "enum_declaration"
        ) {
            let mut cursor = node.walk();
            for child in node.children(&mut cursor) {
                walk(child, source, enclosing, package, class_fqn, out);
            }
            return;
        }
        let Some(name) = node.child_by_field_name("name") else { return };
        let simple = java::text(name, source);
        let local = if enclosing.is_empty() {
            simple.to_string()
        } else {
            format!("{enclosing}.{simple}")
        };
        let qualified = match package {
            Some(p) => format!("{p}.{local}"),
            None => local.clone(),
        };
        if qualified == class_fqn || local == class_fqn || simple == class_fqn {
            out.push(node);
        }
        if let Some(body) = node.child_by_field_name("body") {
            let mut cursor = body.walk();
            for child in body.children(&mut cursor) {
                walk(child, source, &local, package, class_fqn, out);
            }
        }
    }
    let mut hits = Vec::new();
    let mut cursor = root.walk();
    for child in root.children(&mut cursor) {
        walk(child, source, "", package, class_fqn, &mut hits);
    }
    hits.into_iter().next()
}

/// Parse `name(T1, T2)` or a full declaration-style signature like
/// `public String f(String x)` into (name, normalized parameter types).
fn parse_signature(signature: &str) -> Option<(String, Vec<String>)> {
    let open = signature.find('(')?;
    let close = signature.rfind(')')?;
    if close < open {
        return None;
    }
    let head = &signature[..open];
    let name = head
        .rsplit(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .find(|s| !s.is_empty())?
        .to_string();

    let inner = &signature[open + 1..close];
    let mut params = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for ch in inner.chars() {
        match ch {
            '<' | '[' | '(' => {
                depth += 1;
                current.push(ch);
            }
            '>' | ']' | ')' => {
                depth -= 1;
                current.push(ch);
            }
            ',' if depth == 0 => {
                params.push(std::mem::take(&mut current));
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    if !current.trim().is_empty() {
        params.push(current);
    }
    let types = params
        .iter()
        .map(|p| param_type_text(p))
        .collect::<Vec<_>>();
    Some((name, types))
}

/// Strip `final`, annotations, and a trailing parameter name from one
/// parameter text, leaving the type.
fn param_type_text(param: &str) -> String {
    let param = param.trim();
    let mut chunks: Vec<&str> = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes: Vec<char> = param.chars().collect();
    let mut i = 0;
    let n = bytes.len();
    let s = param;
    // split on top-level whitespace
    while i < n {
        let ch = bytes[i];
        match ch {
            '<' | '[' | '(' => depth += 1,
            '>' | ']' | ')' => depth -= 1,
            c if c.is_whitespace() && depth == 0 => {
                let chunk = &s[char_index(s, start)..char_index(s, i)];
                if !chunk.trim().is_empty() {
                    chunks.push(chunk.trim());
                }
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    let tail = &s[char_index(s, start)..];
    if !tail.trim().is_empty() {
        chunks.push(tail.trim());
    }
    chunks.retain(|c| *c != "final" && !c.starts_with('@'));
    let ty = match chunks.len() {
        0 => String::new(),
        1 => chunks[0].to_string(),
        _ => {
            // last chunk is the parameter name iff it is a bare identifier
            let last = chunks[chunks.len() - 1];
            let is_ident = last
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '$');
            if is_ident {
                chunks[..chunks.len() - 1].join(" ")
            } else {
                chunks.join(" ")
            }
        }
    };
    java::simple_type(&ty)
}

fn char_index(s: &str, nth: usize) -> usize {
    s.char_indices().nth(nth).map(|(i, _)| i).unwrap_or(s.len())
}

fn params_match(actual: &[(String, String)], wanted: &[String]) -> bool {
    if actual.len() != wanted.len() {
        return false;
    }
    actual
        .iter()
        .zip(wanted)
        .all(|((ty, _), want)| java::simple_type(ty) == *want || want.is_empty())
}
