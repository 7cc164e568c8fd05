//! Thin wrapper around the tree-sitter Java grammar shared by the
//! skeleton extractor and the injector.

use tree_sitter::{Node, Parser, Tree};

pub fn parse(source: &str) -> Option<Tree> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("java grammar");
    let tree = parser.parse(source, None)?;
    if tree.root_node().has_error() {
        return None;
    }
    Some(tree)
}

pub fn text<'a>(node: Node, source: &'a str) -> &'a str {
    &source[node.byte_range()]
}

/// Modifier tokens of a declaration, in source order. Annotations are kept
/// as written (`@Override`, `@Deprecated`, ...).
pub fn modifiers(node: Node, source: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.kind() == "modifiers" {
            let mut inner = child.walk();
            for m in child.children(&mut inner) {
                out.push(text(m, source).to_string());
            }
        }
    }
    out
}

/// The `/** ... */` comment immediately preceding `node`, if any.
/// Only whitespace may separate the comment from the declaration.
pub fn doc_comment(node: Node, source: &str) -> Option<String> {
    let prev = node.prev_sibling()?;
    if prev.kind() != "block_comment" {
        return None;
    }
    let raw = text(prev, source);
    if !raw.starts_with("/**") {
        return None;
    }
    let between = &source[prev.end_byte()..node.start_byte()];
    if !between.chars().all(char::is_whitespace) {
        return None;
    }
    Some(raw.to_string())
}

/// Package name declared in a compilation unit, if any.
pub fn package_name(root: Node, source: &str) -> Option<String> {
    let mut cursor = root.walk();
    for child in root.children(&mut cursor) {
        if child.kind() == "package_declaration" {
            let mut inner = child.walk();
            for c in child.children(&mut inner) {
                if matches!(c.kind(), "scoped_identifier" | "identifier") {
                    return Some(text(c, source).to_string());
                }
            }
        }
    }
    None
}

/// Collapse all whitespace runs in a type text to single spaces and trim.
pub fn normalize_type(ty: &str) -> String {
    let mut out = String::with_capacity(ty.len());
    let mut last_space = true;
    for ch in ty.chars() {
        if ch.is_whitespace() {
            if !last_space {
                out.push(' ');
                last_space = true;
            }
        } else {
            out.push(ch);
            last_space = false;
        }
    }
    out.trim().to_string()
}

/// Reduce qualified type names to their simple names (`java.util.List` ->
/// `List`) and drop whitespace entirely, for overload matching.
pub fn simple_type(ty: &str) -> String {
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            out.push_str(word.rsplit('.').next().unwrap());
            word.clear();
        }
    };
    for ch in ty.chars() {
        if ch.is_alphanumeric() || ch == '_' || ch == '.' || ch == '$' {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            if !ch.is_whitespace() {
                out.push(ch);
            }
        }
    }
    flush(&mut word, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_class() {
        let tree = parse("class A { void f() {} }").unwrap();
        assert_eq!(tree.root_node().kind(), "program");
    }

    #[test]
    fn rejects_broken_source() {
        assert!(parse("class A { void f( {").is_none());
    }

    #[test]
    fn simple_type_strips_qualifiers_and_space() {
        assert_eq!(simple_type("java.util.List< String >"), "List<String>");
        assert_eq!(simple_type("int[]"), "int[]");
        assert_eq!(simple_type("Map.Entry<K, V>"), "Entry<K,V>");
    }
}
