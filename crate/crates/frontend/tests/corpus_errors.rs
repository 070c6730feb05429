//! Corrupted copies of the corpus: each mutation plants one offending token,
//! and the diagnostic must point inside it with the right kind.

use std::fs;
use std::path::Path;

use ogwb::error::ErrorKind;
use ogwb::model::parse_model;

struct Case {
    file: &'static str,
    find: &'static str,
    replace: &'static str,
    /// The offending token within `replace`.
    token: &'static str,
    kind: ErrorKind,
}

const CASES: &[Case] = &[
    Case { file: "lock.og", find: "held := false", replace: "held := 3", token: "3", kind: ErrorKind::Type },
    Case { file: "lock.og", find: "await (!held)", replace: "await (!hled)", token: "hled", kind: ErrorKind::UnknownIdentifier },
    Case { file: "lock.og", find: "inside union {2}", replace: "inside union {2,}", token: "}", kind: ErrorKind::Syntax },
    Case { file: "toy.og", find: "users = 2", replace: "users = two", token: "two", kind: ErrorKind::ConfigInvalid },
    Case { file: "toy.og", find: "users = 2", replace: "userz = 2", token: "userz", kind: ErrorKind::ConfigInvalid },
    Case { file: "toy.og", find: "Second: y := 2;", replace: "Second: y := 2 +;", token: "+", kind: ErrorKind::Syntax },
    Case { file: "toy.og", find: "y in {0, 1, 2, 3}", replace: "y in {0, 1, true, 3}", token: "true", kind: ErrorKind::Type },
    Case { file: "toy.og", find: "Third: y := 3;", replace: "Third: z := 3;", token: "z", kind: ErrorKind::UnknownIdentifier },
    Case { file: "lock.og", find: "card(inside) = 1)", replace: "card(inside) = held)", token: "held", kind: ErrorKind::Type },
    Case { file: "maps.og", find: "var", replace: "vra", token: "vra", kind: ErrorKind::Syntax },
    Case { file: "tiny.og", find: "preset echronos", replace: "preset linux", token: "linux", kind: ErrorKind::UnknownIdentifier },
];

/// 1-based line and column of byte offset `at`.
fn position(text: &str, at: usize) -> (u32, u32) {
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let col = before.chars().rev().take_while(|c| *c != '\n').count() + 1;
    (line as u32, col as u32)
}

#[test]
fn diagnostics_point_into_the_offending_token() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("models/corpus");
    for c in CASES {
        let text = fs::read_to_string(dir.join(c.file)).unwrap();
        let at = text.find(c.find).unwrap_or_else(|| panic!("{}: no `{}`", c.file, c.find));
        let bad = format!("{}{}{}", &text[..at], c.replace, &text[at + c.find.len()..]);
        let tok = at + c.replace.find(c.token).unwrap();
        let (line, col) = position(&bad, tok);
        let e = parse_model(&bad).expect_err(c.replace);
        let width = c.token.chars().count() as u32;
        assert_eq!(e.kind, c.kind, "{}: {e}", c.replace);
        assert_eq!(e.line, line, "{}: {e}", c.replace);
        assert!((col..col + width).contains(&e.col), "{}: {e}, token at {line}:{col}", c.replace);
    }
}
