use std::io::{self, BufRead, Write};

use super::pairs::{QueryPair, ThreadRef};
use super::similarity::lcs_similarity;

pub fn write_pairs_jsonl<W: Write>(pairs: &[QueryPair], mut out: W) -> io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_pairs_jsonl<R: BufRead>(input: R) -> io::Result<Vec<QueryPair>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(pair);
    }
    Ok(out)
}

/// `original \t reformulated` per line.
pub fn write_pairs_tsv<W: Write>(pairs: &[QueryPair], mut out: W) -> io::Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}", p.original.replace('\t', " "), p.reformulated.replace('\t', " "))?;
    }
    Ok(())
}

/// Reads `original \t reformulated` lines; similarity is recomputed and the
/// thread reference is left blank.
pub fn read_pairs_tsv<R: BufRead>(input: R) -> io::Result<Vec<QueryPair>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (original, reformulated) = line.split_once('\t').ok_or_else(|| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: expected original<TAB>reformulated", i + 1))
        })?;
        out.push(QueryPair {
            original: original.to_string(),
            reformulated: reformulated.to_string(),
            similarity: lcs_similarity(original, reformulated),
            thread_ref: ThreadRef { session_id: String::new(), query_index: i, terminal_post: String::new() },
        });
    }
    Ok(out)
}
