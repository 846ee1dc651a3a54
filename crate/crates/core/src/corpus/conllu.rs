//! Dependency rows and a CoNLL-U reader.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConlluError {
    #[error("no token is attached to the root")]
    MissingRoot,
    #[error("tokens {0} and {1} are both attached to the root")]
    MultipleRoots(usize, usize),
    #[error("head links form a cycle through token {0}")]
    CyclicHeads(usize),
    #[error("row {row}: expected 10 columns, found {found}")]
    BadColumnCount { row: usize, found: usize },
    #[error("row {row}: multiword ranges and empty nodes are not supported (`{id}`)")]
    UnsupportedTokenId { row: usize, id: String },
    #[error("row {row}: token id `{id}` is out of sequence")]
    BadTokenId { row: usize, id: String },
    #[error("token {token}: head `{head}` is not a valid token reference")]
    BadHead { token: usize, head: String },
    #[error("empty sentence")]
    Empty,
}

/// One token's attachment. `head` is `None` for the root token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepRow {
    pub head: Option<usize>,
    pub deprel: String,
}

/// Validated per-token head/relation table (0-based heads).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRows {
    rows: Vec<DepRow>,
    root: usize,
}

impl DependencyRows {
    /// Validates that the heads form a single-rooted tree.
    pub fn new(rows: Vec<DepRow>) -> Result<Self, ConlluError> {
        if rows.is_empty() {
            return Err(ConlluError::Empty);
        }
        let n = rows.len();
        let mut root = None;
        for (i, row) in rows.iter().enumerate() {
            match row.head {
                None => {
                    if let Some(r) = root {
                        return Err(ConlluError::MultipleRoots(r, i));
                    }
                    root = Some(i);
                }
                Some(h) if h == i => return Err(ConlluError::CyclicHeads(i)),
                Some(h) if h >= n => {
                    return Err(ConlluError::BadHead {
                        token: i,
                        head: h.to_string(),
                    })
                }
                Some(_) => {}
            }
        }
        let root = root.ok_or(ConlluError::MissingRoot)?;

        // Every token must reach the root in fewer than n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(h) = rows[cur].head {
                cur = h;
                steps += 1;
                if steps > n {
                    return Err(ConlluError::CyclicHeads(start));
                }
            }
        }
        Ok(DependencyRows { rows, root })
    }

    /// Builds rows from `(head, deprel)` pairs where `head = -1` marks the root.
    pub fn from_pairs(pairs: &[(i64, String)]) -> Result<Self, ConlluError> {
        let rows = pairs
            .iter()
            .enumerate()
            .map(|(i, (head, rel))| {
                let head = match *head {
                    -1 => None,
                    h if h >= 0 => Some(h as usize),
                    h => {
                        return Err(ConlluError::BadHead {
                            token: i,
                            head: h.to_string(),
                        })
                    }
                };
                Ok(DepRow {
                    head,
                    deprel: rel.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        DependencyRows::new(rows)
    }

    pub fn to_pairs(&self) -> Vec<(i64, String)> {
        self.rows
            .iter()
            .map(|r| (r.head.map_or(-1, |h| h as i64), r.deprel.clone()))
            .collect()
    }

    pub fn rows(&self) -> &[DepRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }
}

/// Token forms plus dependency rows read from one CoNLL-U sentence block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConlluSentence {
    pub forms: Vec<String>,
    pub rows: DependencyRows,
}

fn split_columns(line: &str) -> Vec<&str> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() == 10 {
        cols
    } else {
        line.split_whitespace().collect()
    }
}

/// Reads one sentence block. Comment lines (`#`) and blank lines are skipped.
pub fn read_conllu_sentence(text: &str) -> Result<ConlluSentence, ConlluError> {
    let mut forms = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let row = rows.len();
        let cols = split_columns(line);
        if cols.len() != 10 {
            return Err(ConlluError::BadColumnCount { row, found: cols.len() });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            return Err(ConlluError::UnsupportedTokenId { row, id: id.to_string() });
        }
        if id.parse::<usize>().ok() != Some(row + 1) {
            return Err(ConlluError::BadTokenId { row, id: id.to_string() });
        }
        let head = match cols[6].parse::<usize>() {
            Ok(0) => None,
            Ok(h) => Some(h - 1),
            Err(_) => {
                return Err(ConlluError::BadHead {
                    token: row,
                    head: cols[6].to_string(),
                })
            }
        };
        forms.push(cols[1].to_string());
        rows.push(DepRow {
            head,
            deprel: cols[7].to_string(),
        });
    }
    Ok(ConlluSentence {
        forms,
        rows: DependencyRows::new(rows)?,
    })
}

/// Reads only the dependency rows of one sentence block.
pub fn read_conllu(text: &str) -> Result<DependencyRows, ConlluError> {
    read_conllu_sentence(text).map(|s| s.rows)
}

/// Splits a CoNLL-U document into sentence blocks on blank lines.
pub fn read_conllu_document(text: &str) -> Result<Vec<ConlluSentence>, ConlluError> {
    let mut blocks = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if current.lines().any(|l| !l.starts_with('#')) {
                blocks.push(std::mem::take(&mut current));
            }
            current.clear();
        } else {
            current.push_str(line);
            current.push('\n');
        }
    }
    if current.lines().any(|l| !l.starts_with('#')) {
        blocks.push(current);
    }
    blocks.iter().map(|b| read_conllu_sentence(b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, form: &str, head: usize, rel: &str) -> String {
        format!("{id}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_")
    }

    #[test]
    fn single_token_is_root() {
        let rows = read_conllu(&row(1, "Hi", 0, "ROOT")).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows.root(), 0);
        assert_eq!(rows.rows()[0].head, None);
    }

    #[test]
    fn two_roots_rejected() {
        let text = [row(1, "a", 0, "ROOT"), row(2, "b", 0, "ROOT")].join("\n");
        assert_eq!(read_conllu(&text), Err(ConlluError::MultipleRoots(0, 1)));
    }

    #[test]
    fn missing_root_and_cycles() {
        let text = [row(1, "a", 2, "x"), row(2, "b", 1, "y")].join("\n");
        assert_eq!(read_conllu(&text), Err(ConlluError::MissingRoot));
        let text = [row(1, "a", 0, "ROOT"), row(2, "b", 3, "x"), row(3, "c", 2, "y")].join("\n");
        assert!(matches!(read_conllu(&text), Err(ConlluError::CyclicHeads(_))));
    }

    #[test]
    fn running_example_head_is_likes() {
        let spec = [
            ("Mary", 3, "poss"),
            ("'s", 1, "case"),
            ("cat", 4, "nsubj"),
            ("likes", 0, "ROOT"),
            ("playing", 4, "xcomp"),
            ("plush", 7, "amod"),
            ("toys", 5, "dobj"),
            ("in", 5, "prep"),
            ("the", 10, "det"),
            ("room", 8, "pobj"),
            (".", 4, "punct"),
        ];
        let text: Vec<String> = spec
            .iter()
            .enumerate()
            .map(|(i, (f, h, r))| row(i + 1, f, *h, r))
            .collect();
        let s = read_conllu_sentence(&format!("# text = x\n{}", text.join("\n"))).unwrap();
        assert_eq!(s.forms[3], "likes");
        assert_eq!(s.rows.rows()[3].head, None);
        assert_eq!(s.rows.root(), 3);
        assert_eq!(s.rows.rows()[0].head, Some(2));
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            read_conllu("1\ta\t_\t0\tROOT"),
            Err(ConlluError::BadColumnCount { found: 5, .. })
        ));
        let mwt = format!("1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n{}", row(1, "do", 0, "ROOT"));
        assert!(matches!(read_conllu(&mwt), Err(ConlluError::UnsupportedTokenId { .. })));
        let empty = format!("{}\n1.1\tx\t_\t_\t_\t_\t_\t_\t_\t_", row(1, "do", 0, "ROOT"));
        assert!(matches!(read_conllu(&empty), Err(ConlluError::UnsupportedTokenId { .. })));
        assert!(matches!(read_conllu(&row(2, "a", 0, "ROOT")), Err(ConlluError::BadTokenId { .. })));
        assert!(matches!(read_conllu(&row(1, "a", 5, "x")), Err(ConlluError::BadHead { .. })));
    }

    #[test]
    fn pairs_round_trip() {
        let pairs = vec![(1, "nsubj".to_string()), (-1, "ROOT".to_string()), (1, "dobj".to_string())];
        let rows = DependencyRows::from_pairs(&pairs).unwrap();
        assert_eq!(rows.to_pairs(), pairs);
        assert!(DependencyRows::from_pairs(&[(-2, "x".to_string())]).is_err());
    }

    #[test]
    fn document_blocks() {
        let doc = format!("{}\n\n# c\n{}\n{}\n", row(1, "a", 0, "ROOT"), row(1, "b", 2, "x"), row(2, "c", 0, "ROOT"));
        let sents = read_conllu_document(&doc).unwrap();
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[1].forms, vec!["b", "c"]);
    }
}
