//! Localization prompt: fixed instruction text followed by the commit diff.
//!
//! Diff layout (one section per file, files in order of first appearance):
//!
//! ```text
//! Commit message:
//! <message>
//!
//! diff --git a/<file> b/<file>
//! --- a/<file>
//! +++ b/<file>
//! -<removed line>
//! +<post-change line number>: <added line>
//! ```

use std::fmt::Write;

use crate::corpus::Commit;
use crate::error::{Error, Result};

/// The instruction block sent ahead of every diff.
pub const INSTRUCTION: &str = include_str!("instruction.txt");

pub fn render_diff(commit: &Commit) -> String {
    let mut files: Vec<&str> = Vec::new();
    for l in commit.removed_lines.iter().chain(&commit.added_lines) {
        if !files.contains(&l.file_path.as_str()) {
            files.push(&l.file_path);
        }
    }
    let mut out = String::new();
    for f in files {
        let _ = writeln!(out, "diff --git a/{f} b/{f}");
        let _ = writeln!(out, "--- a/{f}");
        let _ = writeln!(out, "+++ b/{f}");
        for l in commit.removed_lines.iter().filter(|l| l.file_path == f) {
            let _ = writeln!(out, "-{}", l.content);
        }
        for l in commit.added_lines.iter().filter(|l| l.file_path == f) {
            let _ = writeln!(out, "+{}: {}", l.line_number, l.content);
        }
    }
    out
}

pub fn build_prompt(commit: &Commit) -> Result<String> {
    if commit.added_lines.is_empty() && commit.removed_lines.is_empty() {
        return Err(Error::Contract(format!(
            "commit `{}` has an empty diff",
            commit.commit_id
        )));
    }
    let mut out = String::with_capacity(INSTRUCTION.len() + 256);
    out.push_str(INSTRUCTION);
    out.push('\n');
    out.push_str("Commit message:\n");
    out.push_str(commit.message.trim_end());
    out.push_str("\n\n");
    out.push_str(&render_diff(commit));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ExpertFeatureVector, LineChange};

    fn change(file: &str, n: u32, c: &str) -> LineChange {
        LineChange {
            file_path: file.into(),
            line_number: n,
            content: c.into(),
            is_defective: false,
        }
    }

    fn commit(added: Vec<LineChange>, removed: Vec<LineChange>) -> Commit {
        Commit {
            commit_id: "abc".into(),
            project: "p".into(),
            author_timestamp: 1,
            message: "Fix NPE in parser\n".into(),
            added_lines: added,
            removed_lines: removed,
            expert: ExpertFeatureVector::new(&[0.0; 14]).unwrap(),
            is_defect_inducing: false,
            first_fix_timestamp: None,
        }
    }

    fn body_plus_lines(prompt: &str) -> usize {
        prompt
            .lines()
            .filter(|l| l.starts_with('+') && !l.starts_with("+++"))
            .count()
    }

    #[test]
    fn instruction_is_embedded() {
        let p = build_prompt(&commit(vec![change("A.java", 3, "x();")], vec![])).unwrap();
        assert!(p.starts_with(INSTRUCTION));
        assert!(p.contains("Return the results in JSON format"));
    }

    #[test]
    fn single_added_line_renders_once() {
        let p = build_prompt(&commit(
            vec![change("A.java", 3, "x();")],
            vec![change("A.java", 3, "y();")],
        ))
        .unwrap();
        assert_eq!(body_plus_lines(&p), 1);
        assert!(p.contains("\n+3: x();\n"));
        assert!(p.contains("\n-y();\n"));
    }

    #[test]
    fn sections_follow_first_appearance() {
        let c = commit(
            vec![change("B.java", 1, "b();"), change("A.java", 2, "a();")],
            vec![change("A.java", 2, "old();")],
        );
        let d = render_diff(&c);
        assert!(d.find("a/A.java").unwrap() < d.find("a/B.java").unwrap());
        assert_eq!(build_prompt(&c).unwrap(), build_prompt(&c).unwrap());
    }

    #[test]
    fn empty_diff_is_rejected() {
        assert!(matches!(
            build_prompt(&commit(vec![], vec![])),
            Err(Error::Contract(_))
        ));
    }
}
