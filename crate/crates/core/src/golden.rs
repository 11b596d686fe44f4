//! Frozen-output fixtures for unit tests. Values are stored as the hex bits
//! of each `f32`, one row per line, so a replay compares bitwise. Set
//! `MVMIFT_BLESS=1` to rewrite a file from the current output.

use std::path::PathBuf;

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn encode(rows: &[Vec<f32>]) -> String {
    let mut out = String::new();
    for row in rows {
        let words: Vec<String> = row.iter().map(|v| format!("{:08x}", v.to_bits())).collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

fn decode(text: &str) -> Vec<Vec<f32>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|w| f32::from_bits(u32::from_str_radix(w, 16).expect("hex word")))
                .collect()
        })
        .collect()
}

/// Asserts `rows` equals the stored fixture bit for bit.
pub(crate) fn check(name: &str, rows: &[Vec<f32>]) {
    let p = path(name);
    if std::env::var_os("MVMIFT_BLESS").is_some() {
        std::fs::write(&p, encode(rows)).expect("write golden file");
        return;
    }
    let text = std::fs::read_to_string(&p)
        .unwrap_or_else(|e| panic!("{}: {e}; rerun with MVMIFT_BLESS=1 to record", p.display()));
    let want = decode(&text);
    assert_eq!(want.len(), rows.len(), "{name}: row count");
    for (i, (w, g)) in want.iter().zip(rows).enumerate() {
        let wb: Vec<u32> = w.iter().map(|v| v.to_bits()).collect();
        let gb: Vec<u32> = g.iter().map(|v| v.to_bits()).collect();
        assert_eq!(wb, gb, "{name}: row {i} differs ({w:?} vs {g:?})");
    }
}

pub(crate) fn matrix_rows(m: &crate::Matrix) -> Vec<Vec<f32>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}
