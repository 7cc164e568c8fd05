//! Golden tests for the method rewriter. Each fixture is instrumented
//! with a fixed spec and compared byte-for-byte with a reviewed golden.
//!
//! Set `BLESS=1` to regenerate the goldens after an intentional change.

use std::fs;
use std::path::PathBuf;

use specgen::inject::{instrument, locate_method};
use specgen::spec_io::{CandidateId, SpecCandidate};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/inject")
}

fn spec(imports: &[&str], pre: &str, post: &str, condition: &str) -> SpecCandidate {
    SpecCandidate {
        candidate_id: CandidateId { task_id: "golden".into(), sample: 1 },
        imports: imports.iter().map(|s| s.to_string()).collect(),
        pre_ghost: pre.into(),
        post_ghost: post.into(),
        condition: condition.into(),
        reasoning: String::new(),
        raw: String::new(),
    }
}

fn check(fixture: &str, class_fqn: &str, signature: &str, spec: &SpecCandidate, marker: &str) {
    let dir = fixture_dir();
    let source = fs::read_to_string(dir.join(format!("{fixture}.java"))).unwrap();
    let site = locate_method(&source, class_fqn, signature).unwrap();
    let out = instrument(&source, &site, spec, marker).unwrap();

    let golden_path = dir.join(format!("{fixture}.golden.java"));
    if std::env::var("BLESS").is_ok() {
        fs::write(&golden_path, &out.rewritten).unwrap();
        return;
    }
    let golden = fs::read_to_string(&golden_path).expect("golden missing; run with BLESS=1");
    assert_eq!(out.rewritten, golden, "fixture {fixture} drifted from golden");
}

#[test]
fn instance_with_ghosts_matches_golden() {
    // mirrors the legend-items wrapper shape: pre-ghost capture, call,
    // post-ghost projection, guard, return
    let s = spec(
        &["import java.util.Arrays;"],
        "List oldItems = this.items();",
        "List retItems = ret.items();",
        "Arrays.deepEquals(oldItems.toArray(), retItems.toArray())",
    );
    check(
        "instance",
        "org.jfree.chart.plot.CategoryPlot",
        "getLegendItems()",
        &s,
        "SPEC_VIOLATION::golden::1",
    );

    let rewritten = fs::read_to_string(fixture_dir().join("instance.golden.java")).unwrap();
    // documented ordering: rename, wrapper, pre-ghost before the call,
    // post-ghost after, guard before the return
    let renamed = rewritten.find("getLegendItems_ToBeValidated() {").unwrap();
    let pre = rewritten.find("List oldItems = this.items();").unwrap();
    let call = rewritten.find("ret = getLegendItems_ToBeValidated();").unwrap();
    let post = rewritten.find("List retItems = ret.items();").unwrap();
    let guard = rewritten.find("throw new IllegalStateException").unwrap();
    let ret = rewritten.find("return ret;").unwrap();
    assert!(renamed < pre && pre < call && call < post && post < guard && guard < ret);
    assert!(rewritten.contains("import java.util.Arrays;"));
}

#[test]
fn static_method_matches_golden() {
    let s = spec(&[], "", "", "ret >= 0");
    check("static", "util.MathOps", "abs(int)", &s, "SPEC_VIOLATION::golden::1");
    let rewritten = fs::read_to_string(fixture_dir().join("static.golden.java")).unwrap();
    assert!(rewritten.contains("public static int abs(int x) {"));
    assert!(rewritten.contains("int ret = abs_ToBeValidated(x);"));
}

#[test]
fn void_method_matches_golden() {
    let s = spec(&[], "int oldCount = this.count;", "", "this.count == oldCount + 1");
    check("void_method", "util.Counter", "increment()", &s, "SPEC_VIOLATION::golden::1");
    let rewritten = fs::read_to_string(fixture_dir().join("void_method.golden.java")).unwrap();
    assert!(!rewritten.contains("return ret;"));
    assert!(!rewritten.contains(" ret ="));
}

#[test]
fn overloaded_method_matches_golden() {
    let s = spec(&[], "", "", "ret != null && ret.startsWith(\"[\")");
    check("overloaded", "util.Formatter", "format(String)", &s, "SPEC_VIOLATION::golden::1");
    let rewritten = fs::read_to_string(fixture_dir().join("overloaded.golden.java")).unwrap();
    // the int overload is untouched
    assert!(rewritten.contains("public String format(int value) {\n        return Integer.toString(value);\n    }"));
    assert!(rewritten.contains("format_ToBeValidated(value)"));
}

#[test]
fn generic_static_method_matches_golden() {
    let s = spec(&[], "", "", "ret == x");
    check("generic", "util.Identity", "id(T)", &s, "SPEC_VIOLATION::golden::1");
    let rewritten = fs::read_to_string(fixture_dir().join("generic.golden.java")).unwrap();
    assert!(rewritten.contains("public static <T> T id(T x) {"));
    assert!(rewritten.contains("T ret = id_ToBeValidated(x);"));
}

#[test]
fn throws_declaring_method_matches_golden() {
    let s = spec(&[], "", "", "ret != null");
    check("throws_decl", "io.Reader", "readLine(int)", &s, "SPEC_VIOLATION::golden::1");
    let rewritten = fs::read_to_string(fixture_dir().join("throws_decl.golden.java")).unwrap();
    assert_eq!(
        rewritten
            .matches("throws IOException, IllegalArgumentException")
            .count(),
        2
    );
}
