//! ORB-SLAM / DBoW2 vocabulary text layout.
//!
//! ```text
//! k L scoring_id weighting_id
//! parent is_leaf b_0 ... b_{D/8-1} weight      (one line per non-root node)
//! ```
//!
//! Nodes are written breadth-first; the i-th node line defines node i + 1 and the root is
//! node 0. Weights use Rust's shortest round-tripping decimal form.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::descriptor::BinaryDescriptor;
use crate::error::{FormatError, Result};
use crate::vocabulary::{Scoring, VocabNode, Vocabulary, Weighting};

/// Renders a vocabulary in the text layout, renumbering nodes breadth-first.
pub fn vocab_to_text(vocab: &Vocabulary) -> String {
    let nodes = vocab.nodes();
    let mut order = Vec::with_capacity(nodes.len());
    let mut new_id = vec![0usize; nodes.len()];
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        new_id[id] = order.len();
        order.push(id);
        queue.extend(nodes[id].children.iter().copied());
    }

    let mut out = String::with_capacity(nodes.len() * (vocab.descriptor_bits / 2 + 16));
    writeln!(
        out,
        "{} {} {} {}",
        vocab.k,
        vocab.depth,
        vocab.scoring.id(),
        vocab.weighting.id()
    )
    .unwrap();
    for &id in &order[1..] {
        let node = &nodes[id];
        let parent = new_id[node.parent.expect("non-root node has a parent")];
        write!(out, "{} {}", parent, u8::from(node.is_leaf())).unwrap();
        for b in node
            .centroid
            .as_ref()
            .expect("non-root centroid")
            .as_bytes()
        {
            write!(out, " {b}").unwrap();
        }
        writeln!(out, " {}", node.weight).unwrap();
    }
    out
}

fn line_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, FormatError> {
    tok.parse()
        .map_err(|_| line_err(line, format!("{what}: cannot parse {tok:?}")))
}

/// Parses the text layout. Word ids are assigned depth-first, as for trained trees.
pub fn parse_vocab_text(text: &str) -> Result<Vocabulary> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| line_err(1, "missing header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 {
        return Err(line_err(1, format!("header needs 4 fields, found {}", h.len())).into());
    }
    let k: usize = parse_num(h[0], 1, "k")?;
    let depth: usize = parse_num(h[1], 1, "L")?;
    let scoring: u32 = parse_num(h[2], 1, "scoring id")?;
    let weighting: u32 = parse_num(h[3], 1, "weighting id")?;
    if scoring != Scoring::L1.id() || weighting != Weighting::TfIdf.id() {
        return Err(line_err(
            1,
            format!("unsupported scoring/weighting {scoring}/{weighting}; only L1/TF-IDF (0 0)"),
        )
        .into());
    }

    let mut nodes = vec![VocabNode {
        id: 0,
        parent: None,
        children: Vec::new(),
        centroid: None,
        word_id: None,
        weight: 0.0,
    }];
    let mut declared_leaf = vec![false];
    let mut octets: Option<usize> = None;
    for (line, content) in lines {
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 4 {
            return Err(
                line_err(line, "node line needs parent, leaf flag, octets and weight").into(),
            );
        }
        let id = nodes.len();
        let parent: usize = parse_num(toks[0], line, "parent id")?;
        if parent >= id {
            return Err(line_err(
                line,
                format!("parent {parent} is not defined before node {id}"),
            )
            .into());
        }
        if declared_leaf[parent] {
            return Err(line_err(line, format!("parent {parent} was declared a leaf")).into());
        }
        let is_leaf = match toks[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(
                    line_err(line, format!("leaf flag must be 0 or 1, found {other:?}")).into(),
                )
            }
        };
        let n = toks.len() - 3;
        match octets {
            None => octets = Some(n),
            Some(expected) if expected != n => {
                return Err(line_err(line, format!("expected {expected} octets, found {n}")).into())
            }
            _ => {}
        }
        let bytes = toks[2..2 + n]
            .iter()
            .map(|t| {
                t.parse::<u8>()
                    .map_err(|_| line_err(line, format!("octet {t:?} outside 0-255")))
            })
            .collect::<Result<Vec<u8>, _>>()?;
        let weight: f64 = parse_num(toks[2 + n], line, "weight")?;
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(line_err(
                line,
                format!("weight {weight} must be finite and non-negative"),
            )
            .into());
        }
        nodes[parent].children.push(id);
        nodes.push(VocabNode {
            id,
            parent: Some(parent),
            children: Vec::new(),
            centroid: Some(BinaryDescriptor::from_bytes(bytes)),
            word_id: None,
            weight,
        });
        declared_leaf.push(is_leaf);
    }
    for node in &nodes[1..] {
        if !declared_leaf[node.id] && node.children.is_empty() {
            return Err(line_err(
                node.id + 1,
                format!("node {} is marked internal but has no children", node.id),
            )
            .into());
        }
    }
    let bits = octets.ok_or_else(|| line_err(2, "vocabulary has no nodes"))? * 8;
    Vocabulary::from_nodes(k, depth, None, bits, nodes)
}

pub fn write_vocab_text(path: &Path, vocab: &Vocabulary) -> Result<()> {
    super::write_atomic(path, vocab_to_text(vocab).as_bytes())
}

pub fn read_vocab_text(path: &Path) -> Result<Vocabulary> {
    parse_vocab_text(&fs::read_to_string(path)?)
}
