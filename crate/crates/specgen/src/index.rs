//! Signature-only class skeletons extracted from a Java source tree, plus
//! TF-IDF retrieval over them.
//!
//! Skeletons keep declarations and doc comments but never method bodies.
//! Retrieval is purely lexical: identifiers are split on camelCase and
//! underscores, lowercased, and ranked by cosine similarity of TF-IDF
//! vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use tree_sitter::Node;
use walkdir::WalkDir;

use crate::java;

pub const CORPUS_MAGIC: &str = "SPECGEN-CORPUS";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSig {
    pub name: String,
    pub modifiers: Vec<String>,
    #[serde(default)]
    pub type_params: String,
    /// Absent for constructors.
    pub return_type: Option<String>,
    /// (type text, parameter name), in source order.
    pub params: Vec<(String, String)>,
    pub throws: Vec<String>,
    pub doc: Option<String>,
    /// Byte range of the body in the original file; absent for
    /// abstract/interface methods.
    pub body_span: Option<(usize, usize)>,
}

impl MethodSig {
    /// Declaration line as it appears in a rendered skeleton, without doc
    /// or trailing `;`.
    pub fn declaration(&self) -> String {
        let mut s = String::new();
        for m in &self.modifiers {
            s.push_str(m);
            s.push(' ');
        }
        if !self.type_params.is_empty() {
            s.push_str(&self.type_params);
            s.push(' ');
        }
        if let Some(rt) = &self.return_type {
            s.push_str(rt);
            s.push(' ');
        }
        s.push_str(&self.name);
        s.push('(');
        for (i, (ty, name)) in self.params.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "{ty} {name}");
        }
        s.push(')');
        if !self.throws.is_empty() {
            let _ = write!(s, " throws {}", self.throws.join(", "));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
}

impl TypeKind {
    fn keyword(self) -> &'static str {
        match self {
            TypeKind::Class => "class",
            TypeKind::Interface => "interface",
            TypeKind::Enum => "enum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub modifiers: Vec<String>,
    pub ty: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSkeleton {
    pub qualified_name: String,
    pub kind: TypeKind,
    #[serde(default)]
    pub type_params: String,
    pub supertypes: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodSig>,
    pub doc: Option<String>,
    pub source_path: String,
}

impl ClassSkeleton {
    pub fn simple_name(&self) -> &str {
        self.qualified_name.rsplit('.').next().unwrap()
    }
}

/// Render a skeleton as class-like text: declaration header, fields, and
/// `;`-terminated method signatures. Never contains bodies.
pub fn render_skeleton(s: &ClassSkeleton) -> String {
    let mut out = String::new();
    if let Some(doc) = &s.doc {
        out.push_str(doc);
        out.push('\n');
    }
    let public = s.kind.keyword();
    let _ = write!(out, "{} {}{}", public, s.simple_name(), s.type_params);
    if !s.supertypes.is_empty() {
        let _ = write!(out, " extends {}", s.supertypes.join(", "));
    }
    out.push_str(" {\n");
    for f in &s.fields {
        out.push_str("    ");
        for m in &f.modifiers {
            out.push_str(m);
            out.push(' ');
        }
        let _ = writeln!(out, "{} {};", f.ty, f.name);
    }
    for m in &s.methods {
        if let Some(doc) = &m.doc {
            for line in doc.lines() {
                let _ = writeln!(out, "    {}", line.trim());
            }
        }
        let _ = writeln!(out, "    {};", m.declaration());
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct BuildReport {
    pub files_seen: usize,
    pub files_parsed: usize,
    pub skeleton_count: usize,
    /// (path, reason) for every file that failed to parse. Never fatal.
    pub skipped: Vec<(String, String)>,
}

impl BuildReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "corpus build report");
        let _ = writeln!(out, "files seen:    {}", self.files_seen);
        let _ = writeln!(out, "files parsed:  {}", self.files_parsed);
        let _ = writeln!(out, "skeletons:     {}", self.skeleton_count);
        let _ = writeln!(out, "files skipped: {}", self.skipped.len());
        for (path, reason) in &self.skipped {
            let _ = writeln!(out, "  skipped {path}: {reason}");
        }
        out
    }
}

#[derive(Debug)]
pub struct SkeletonCorpus {
    pub skeletons: Vec<ClassSkeleton>,
    /// term -> (skeleton index, term frequency), skeleton indices ascending.
    term_index: HashMap<String, Vec<(usize, u32)>>,
    doc_freq: HashMap<String, u32>,
    /// Precomputed TF-IDF vector norms, one per skeleton.
    norms: Vec<f64>,
    by_fqn: HashMap<String, usize>,
}

/// A retrieval query: free text plus the class the target method belongs
/// to, which is always ranked first when present in the corpus.
#[derive(Debug, Clone)]
pub struct Query {
    pub text: String,
    pub target_class: Option<String>,
}

impl SkeletonCorpus {
    pub fn build(mut skeletons: Vec<ClassSkeleton>) -> Self {
        skeletons.sort_by(|a, b| {
            (a.source_path.as_str(), a.qualified_name.as_str())
                .cmp(&(b.source_path.as_str(), b.qualified_name.as_str()))
        });
        let mut term_index: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_freq: HashMap<String, u32> = HashMap::new();
        for (i, s) in skeletons.iter().enumerate() {
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for term in subtokens(&render_skeleton(s)) {
                *counts.entry(term).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                term_index.entry(term.clone()).or_default().push((i, tf));
                *doc_freq.entry(term).or_insert(0) += 1;
            }
        }
        let n = skeletons.len();
        let mut norms = vec![0.0f64; n];
        for (term, postings) in &term_index {
            let idf = idf(n, doc_freq[term]);
            for &(doc, tf) in postings {
                let w = tf as f64 * idf;
                norms[doc] += w * w;
            }
        }
        for v in &mut norms {
            *v = v.sqrt();
        }
        let by_fqn = skeletons
            .iter()
            .enumerate()
            .map(|(i, s)| (s.qualified_name.clone(), i))
            .collect();
        SkeletonCorpus { skeletons, term_index, doc_freq, norms, by_fqn }
    }

    pub fn len(&self) -> usize {
        self.skeletons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skeletons.is_empty()
    }

    pub fn find(&self, qualified_name: &str) -> Option<&ClassSkeleton> {
        self.by_fqn.get(qualified_name).map(|&i| &self.skeletons[i])
    }

    /// Look a class up by FQN, falling back to a unique simple-name match.
    pub fn find_loose(&self, name: &str) -> Option<&ClassSkeleton> {
        if let Some(s) = self.find(name) {
            return Some(s);
        }
        let mut hits = self.skeletons.iter().filter(|s| s.simple_name() == name);
        let first = hits.next()?;
        if hits.next().is_some() {
            return None;
        }
        Some(first)
    }

    /// Rank skeletons by descending TF-IDF cosine similarity to the query.
    /// The query's target class, when present, is forced to rank 1. Ties
    /// break by ascending qualified name. The list is cut to `top_m`
    /// entries and then greedily to `char_budget` characters of rendered
    /// text.
    pub fn retrieve(&self, query: &Query, top_m: usize, char_budget: usize) -> Vec<&ClassSkeleton> {
        let mut scores = vec![0.0f64; self.skeletons.len()];
        let mut query_counts: BTreeMap<String, u32> = BTreeMap::new();
        for term in subtokens(&query.text) {
            *query_counts.entry(term).or_insert(0) += 1;
        }
        let n = self.skeletons.len();
        let mut query_norm = 0.0f64;
        for (term, qtf) in &query_counts {
            let Some(&df) = self.doc_freq.get(term) else { continue };
            let idf = idf(n, df);
            let qw = *qtf as f64 * idf;
            query_norm += qw * qw;
            for &(doc, tf) in &self.term_index[term] {
                scores[doc] += qw * tf as f64 * idf;
            }
        }
        let query_norm = query_norm.sqrt();
        let mut order: Vec<usize> = (0..n).collect();
        let target = query
            .target_class
            .as_deref()
            .and_then(|fqn| self.by_fqn.get(fqn).copied());
        order.sort_by(|&a, &b| {
            let pin_a = Some(a) == target;
            let pin_b = Some(b) == target;
            pin_b
                .cmp(&pin_a)
                .then_with(|| {
                    let sa = cosine(scores[a], query_norm, self.norms[a]);
                    let sb = cosine(scores[b], query_norm, self.norms[b]);
                    sb.partial_cmp(&sa).unwrap()
                })
                .then_with(|| {
                    self.skeletons[a]
                        .qualified_name
                        .cmp(&self.skeletons[b].qualified_name)
                })
        });
        order.truncate(top_m);
        let mut used = 0usize;
        let mut out = Vec::new();
        for i in order {
            let s = &self.skeletons[i];
            let len = render_skeleton(s).len();
            if used + len > char_budget && !out.is_empty() {
                break;
            }
            if used + len > char_budget && out.is_empty() {
                // always admit at least the first hit
                out.push(s);
                break;
            }
            used += len;
            out.push(s);
        }
        out
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Cache<'a> {
            magic: &'a str,
            version: u32,
            skeletons: &'a [ClassSkeleton],
        }
        let cache = Cache {
            magic: CORPUS_MAGIC,
            version: CORPUS_VERSION,
            skeletons: &self.skeletons,
        };
        fs::write(path, serde_json::to_vec_pretty(&cache)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        #[derive(Deserialize)]
        struct Cache {
            magic: String,
            version: u32,
            skeletons: Vec<ClassSkeleton>,
        }
        let cache: Cache = serde_json::from_slice(&fs::read(path)?)?;
        anyhow::ensure!(
            cache.magic == CORPUS_MAGIC,
            "not a corpus cache file: bad magic {:?}",
            cache.magic
        );
        anyhow::ensure!(
            cache.version == CORPUS_VERSION,
            "unsupported corpus cache version {}",
            cache.version
        );
        Ok(SkeletonCorpus::build(cache.skeletons))
    }
}

/// Concatenate a target method's signature with its class's rendered
/// skeleton to form a retrieval query. When the class is missing from the
/// corpus the query is the signature alone and the second return value is
/// true (caller should warn).
pub fn build_query(
    method_signature: &str,
    class_fqn: &str,
    corpus: &SkeletonCorpus,
) -> (Query, bool) {
    match corpus.find_loose(class_fqn) {
        Some(skel) => {
            let text = format!("{}\n{}", method_signature, render_skeleton(skel));
            (
                Query { text, target_class: Some(skel.qualified_name.clone()) },
                false,
            )
        }
        None => (
            Query { text: method_signature.to_string(), target_class: None },
            true,
        ),
    }
}

fn idf(n_docs: usize, df: u32) -> f64 {
    // smoothed so that a term present in every document still contributes
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn cosine(dot: f64, qnorm: f64, dnorm: f64) -> f64 {
    if qnorm == 0.0 || dnorm == 0.0 {
        0.0
    } else {
        dot / (qnorm * dnorm)
    }
}

/// Split text into lowercased subtoken terms: identifiers are broken on
/// underscores and camelCase boundaries.
pub fn subtokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else if !word.is_empty() {
            split_camel(&word, &mut out);
            word.clear();
        }
    }
    if !word.is_empty() {
        split_camel(&word, &mut out);
    }
    out
}

fn split_camel(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    for i in 1..chars.len() {
        let boundary = (chars[i].is_uppercase() && chars[i - 1].is_lowercase())
            || (chars[i].is_uppercase()
                && i + 1 < chars.len()
                && chars[i + 1].is_lowercase()
                && chars[i - 1].is_uppercase())
            || (chars[i].is_ascii_digit() != chars[i - 1].is_ascii_digit());
        if boundary {
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    out.push(chars[start..].iter().collect::<String>().to_lowercase());
}

/// Walk `repo_root` for `.java` files matching the include/exclude globs
/// and extract one skeleton per declared type, nested types included.
/// Files that fail to parse are recorded in the report and skipped.
pub fn extract_skeletons(
    repo_root: &Path,
    include: &[String],
    exclude: &[String],
) -> anyhow::Result<(SkeletonCorpus, BuildReport)> {
    anyhow::ensure!(
        repo_root.is_dir(),
        "repo root {} is not a readable directory",
        repo_root.display()
    );
    let default_include = ["**/*.java".to_string()];
    let include_set = build_globset(if include.is_empty() { &default_include } else { include })?;
    let exclude_set = build_globset(exclude)?;

    let mut files: Vec<PathBuf> = WalkDir::new(repo_root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            let rel = p.strip_prefix(repo_root).unwrap_or(p);
            include_set.is_match(rel) && !exclude_set.is_match(rel)
        })
        .collect();
    files.sort();

    let mut report = BuildReport::default();
    let mut skeletons = Vec::new();
    for path in files {
        report.files_seen += 1;
        let rel = path
            .strip_prefix(repo_root)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        let source = match fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) => {
                report.skipped.push((rel, format!("read error: {e}")));
                continue;
            }
        };
        match skeletons_from_source(&source, &rel) {
            Some(mut ss) => {
                report.files_parsed += 1;
                skeletons.append(&mut ss);
            }
            None => report.skipped.push((rel, "parse error".to_string())),
        }
    }
    report.skeleton_count = skeletons.len();
    Ok((SkeletonCorpus::build(skeletons), report))
}

fn build_globset(patterns: &[String]) -> anyhow::Result<GlobSet> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        builder.add(Glob::new(p)?);
    }
    Ok(builder.build()?)
}

/// Extract every type declared in one compilation unit.
pub fn skeletons_from_source(source: &str, source_path: &str) -> Option<Vec<ClassSkeleton>> {
    let tree = java::parse(source)?;
    let root = tree.root_node();
    let package = java::package_name(root, source);
    let mut out = Vec::new();
    let mut cursor = root.walk();
    for child in root.children(&mut cursor) {
        collect_types(child, source, package.as_deref(), "", source_path, &mut out);
    }
    Some(out)
}

fn collect_types(
    node: Node,
    source: &str,
    package: Option<&str>,
    enclosing: &str,
    source_path: &str,
    out: &mut Vec<ClassSkeleton>,
) {
    let kind = match node.kind() {
        "class_declaration" => TypeKind::Class,
        "interface_declaration" => TypeKind::Interface,
        "enum_declaration" => TypeKind::Enum,
        _ => return,
    };
    let Some(name_node) = node.child_by_field_name("name") else { return };
    let simple = java::text(name_node, source);
    let local = if enclosing.is_empty() {
        simple.to_string()
    } else {
        format!("{enclosing}.{simple}")
    };
    let qualified = match package {
        Some(p) => format!("{p}.{local}"),
        None => local.clone(),
    };

    let type_params = node
        .child_by_field_name("type_parameters")
        .map(|n| java::text(n, source).to_string())
        .unwrap_or_default();

    let mut supertypes = Vec::new();
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        match child.kind() {
            "superclass" | "super_interfaces" | "extends_interfaces" => {
                let mut inner = child.walk();
                for c in child.children(&mut inner) {
                    collect_type_names(c, source, &mut supertypes);
                }
            }
            _ => {}
        }
    }

    let mut fields = Vec::new();
    let mut methods = Vec::new();
    if let Some(body) = node.child_by_field_name("body") {
        let mut cursor = body.walk();
        for member in body.children(&mut cursor) {
            match member.kind() {
                "field_declaration" => collect_fields(member, source, &mut fields),
                "method_declaration" | "constructor_declaration" => {
                    if let Some(sig) = method_sig(member, source) {
                        methods.push(sig);
                    }
                }
                "class_declaration" | "interface_declaration" | "enum_declaration" => {
                    collect_types(member, source, package, &local, source_path, out);
                }
                "enum_body_declarations" => {
                    let mut inner = member.walk();
                    for m in member.children(&mut inner) {
                        match m.kind() {
                            "field_declaration" => collect_fields(m, source, &mut fields),
                            "method_declaration" | "constructor_declaration" => {
                                if let Some(sig) = method_sig(m, source) {
                                    methods.push(sig);
                                }
                            }
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
    }

    out.push(ClassSkeleton {
        qualified_name: qualified,
        kind,
        type_params,
        supertypes,
        fields,
        methods,
        doc: java::doc_comment(node, source),
        source_path: source_path.to_string(),
    });
}

fn collect_type_names(node: Node, source: &str, out: &mut Vec<String>) {
    match node.kind() {
        "type_identifier" | "scoped_type_identifier" | "generic_type" => {
            out.push(java::normalize_type(java::text(node, source)));
        }
        "type_list" => {
            let mut cursor = node.walk();
            for c in node.children(&mut cursor) {
                collect_type_names(c, source, out);
            }
        }
        _ => {}
    }
}

fn collect_fields(node: Node, source: &str, out: &mut Vec<FieldDecl>) {
    let modifiers = java::modifiers(node, source);
    let Some(ty) = node.child_by_field_name("type") else { return };
    let ty = java::normalize_type(java::text(ty, source));
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.kind() == "variable_declarator" {
            if let Some(name) = child.child_by_field_name("name") {
                out.push(FieldDecl {
                    modifiers: modifiers.clone(),
                    ty: ty.clone(),
                    name: java::text(name, source).to_string(),
                });
            }
        }
    }
}

pub(crate) fn method_sig(node: Node, source: &str) -> Option<MethodSig> {
    let is_ctor = node.kind() == "constructor_declaration";
    let name = java::text(node.child_by_field_name("name")?, source).to_string();
    let return_type = if is_ctor {
        None
    } else {
        Some(java::normalize_type(java::text(
            node.child_by_field_name("type")?,
            source,
        )))
    };
    let type_params = node
        .child_by_field_name("type_parameters")
        .map(|n| java::text(n, source).to_string())
        .unwrap_or_default();
    let mut params = Vec::new();
    if let Some(plist) = node.child_by_field_name("parameters") {
        let mut cursor = plist.walk();
        for p in plist.children(&mut cursor) {
            match p.kind() {
                "formal_parameter" | "spread_parameter" => {
                    let ty = p
                        .child_by_field_name("type")
                        .map(|n| java::normalize_type(java::text(n, source)))
                        .unwrap_or_default();
                    let pname = p
                        .child_by_field_name("name")
                        .or_else(|| {
                            // spread_parameter holds a variable_declarator
                            let mut c = p.walk();
                            let found = p
                                .children(&mut c)
                                .find(|n| n.kind() == "variable_declarator")
                                .and_then(|d| d.child_by_field_name("name"));
                            found
                        })
                        .map(|n| java::text(n, source).to_string())
                        .unwrap_or_default();
                    let ty = if p.kind() == "spread_parameter" {
                        format!("{ty}...")
                    } else {
                        ty
                    };
                    params.push((ty, pname));
                }
                _ => {}
            }
        }
    }
    let mut throws = Vec::new();
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.kind() == "throws" {
            let mut inner = child.walk();
            for c in child.children(&mut inner) {
                collect_type_names(c, source, &mut throws);
            }
        }
    }
    let body_span = node
        .child_by_field_name("body")
        .map(|b| (b.start_byte(), b.end_byte()));
    Some(MethodSig {
        name,
        modifiers: java::modifiers(node, source),
        type_params,
        return_type,
        params,
        throws,
        doc: java::doc_comment(node, source),
        body_span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
package org.jfree.chart.imagemap;

/** Generates tooltips. */
public class StandardToolTipTagFragmentGenerator {

    private String prefix;

    /**
     * Generates a tooltip string to go in an HTML image map.
     * @param toolTipText  the tooltip.
     * @return The formatted HTML area tag attribute(s).
     */
    public String generateToolTipFragment(String toolTipText) {
        return " title=\"" + toolTipText + "\"";
    }

    private int helper() { return 1; }
}
"#;

    #[test]
    fn extracts_signatures_without_bodies() {
        let ss = skeletons_from_source(SAMPLE, "a/B.java").unwrap();
        assert_eq!(ss.len(), 1);
        let s = &ss[0];
        assert_eq!(
            s.qualified_name,
            "org.jfree.chart.imagemap.StandardToolTipTagFragmentGenerator"
        );
        assert_eq!(s.methods.len(), 2);
        let m = &s.methods[0];
        assert_eq!(m.name, "generateToolTipFragment");
        assert_eq!(m.params, vec![("String".to_string(), "toolTipText".to_string())]);
        assert!(m.body_span.is_some());
        let rendered = render_skeleton(s);
        assert!(rendered.contains("public String generateToolTipFragment(String toolTipText);"));
        assert!(!rendered.contains("title=")); // body text stripped
        assert!(rendered.contains("@return")); // doc text kept
    }

    #[test]
    fn empty_class_renders_brace_shape() {
        let ss = skeletons_from_source("class Foo {}", "Foo.java").unwrap();
        assert_eq!(render_skeleton(&ss[0]), "class Foo {\n}\n");
    }

    #[test]
    fn nested_types_get_dotted_names() {
        let src = "package p; class Outer { static class Inner { void g() {} } }";
        let ss = skeletons_from_source(src, "p/Outer.java").unwrap();
        let names: Vec<&str> = ss.iter().map(|s| s.qualified_name.as_str()).collect();
        assert!(names.contains(&"p.Outer"));
        assert!(names.contains(&"p.Outer.Inner"));
    }

    #[test]
    fn subtokens_split_camel_and_underscore() {
        assert_eq!(
            subtokens("getLegendItems my_field HTTPServer"),
            vec!["get", "legend", "items", "my", "field", "http", "server"]
        );
    }

    #[test]
    fn empty_corpus_retrieves_nothing() {
        let corpus = SkeletonCorpus::build(Vec::new());
        let q = Query { text: "anything".into(), target_class: None };
        assert!(corpus.retrieve(&q, 10, 10_000).is_empty());
    }
}
