//! Indented tree listings.
//!
//! The parser relies on the conditions, not on indentation: a condition line
//! either ends in a leaf or is followed by the complete subtree it guards, and
//! is then matched by the complementary condition on the same attribute and
//! threshold. Listings whose indentation was flattened still parse.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::{DecisionTree, LeafNode, Node, SplitNode};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("empty tree text")]
    Empty,
    #[error("line {line}: cannot parse '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unparseable number '{text}'")]
    Number { line: usize, text: String },
    #[error("line {line}: expected the sibling of '{expected}', found '{found}'")]
    MismatchedSibling {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("condition '{0}' has neither a subtree nor a leaf")]
    Dangling(String),
    #[error("line {line}: unexpected text after a complete tree")]
    Trailing { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Less,
    GreaterEq,
}

#[derive(Debug, Clone)]
struct Leaf {
    class: String,
    purity_pct: f64,
    count: u64,
}

#[derive(Debug, Clone)]
enum Line {
    Cond {
        attr: String,
        op: Op,
        threshold: f64,
        leaf: Option<Leaf>,
        text: String,
    },
    Leaf(Leaf),
}

fn leaf_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^then\s+classe?\s*=\s*(.+?)\s*\(\s*([0-9]+(?:[.,][0-9]+)?)\s*%\s*of\s+([0-9]+)\s+(?:examples|cases)\s*\)$",
        )
        .unwrap()
    })
}

fn cond_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(.+?)\s*(<|>=|≥)\s*(\S+)$").unwrap())
}

fn parse_number(s: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = s.replace(',', ".").parse().map_err(|_| ParseError::Number {
        line,
        text: s.to_string(),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParseError::Number {
            line,
            text: s.to_string(),
        })
    }
}

fn parse_leaf(s: &str, line: usize) -> Result<Leaf, ParseError> {
    let caps = leaf_re().captures(s).ok_or_else(|| ParseError::Syntax {
        line,
        text: s.to_string(),
    })?;
    let class = caps[1].trim_matches('*').trim().to_string();
    if class.is_empty() {
        return Err(ParseError::Syntax {
            line,
            text: s.to_string(),
        });
    }
    Ok(Leaf {
        class,
        purity_pct: parse_number(&caps[2], line)?,
        count: caps[3].parse().map_err(|_| ParseError::Number {
            line,
            text: caps[3].to_string(),
        })?,
    })
}

fn strip_bullet(s: &str) -> &str {
    let s = s.trim();
    for b in ["- ", "* ", "• ", "+ "] {
        if let Some(rest) = s.strip_prefix(b) {
            return rest.trim_start();
        }
    }
    s
}

fn parse_line(raw: &str, line: usize) -> Result<Line, ParseError> {
    let s = strip_bullet(raw);
    let lower = s.to_ascii_lowercase();
    if lower.starts_with("then ") {
        return Ok(Line::Leaf(parse_leaf(s, line)?));
    }
    let (cond, leaf) = match lower.find(" then ") {
        Some(i) => (s[..i].trim(), Some(parse_leaf(s[i..].trim(), line)?)),
        None => (s, None),
    };
    let caps = cond_re().captures(cond).ok_or_else(|| ParseError::Syntax {
        line,
        text: raw.trim().to_string(),
    })?;
    let op = if &caps[2] == "<" { Op::Less } else { Op::GreaterEq };
    Ok(Line::Cond {
        attr: caps[1].trim().to_string(),
        op,
        threshold: parse_number(&caps[3], line)?,
        leaf,
        text: cond.to_string(),
    })
}

struct Parser {
    lines: Vec<(usize, Line)>,
    pos: usize,
    nodes: Vec<Node>,
}

impl Parser {
    fn next(&mut self) -> Option<(usize, Line)> {
        let item = self.lines.get(self.pos).cloned();
        self.pos += 1;
        item
    }

    fn push_leaf(&mut self, leaf: Leaf) -> usize {
        self.nodes.push(Node::Leaf(LeafNode {
            class: leaf.class,
            purity_pct: leaf.purity_pct,
            count: leaf.count,
        }));
        self.nodes.len() - 1
    }

    fn child(&mut self, leaf: Option<Leaf>, cond: &str) -> Result<usize, ParseError> {
        match leaf {
            Some(l) => Ok(self.push_leaf(l)),
            None => {
                match self.lines.get(self.pos) {
                    None => Err(ParseError::Dangling(cond.to_string())),
                    Some((_, Line::Leaf(l))) => {
                        let l = l.clone();
                        self.pos += 1;
                        Ok(self.push_leaf(l))
                    }
                    Some(_) => self.subtree(),
                }
            }
        }
    }

    fn subtree(&mut self) -> Result<usize, ParseError> {
        let (line, first) = self.next().expect("subtree() with input left");
        let (attr, op, threshold, leaf, text) = match first {
            Line::Cond {
                attr,
                op,
                threshold,
                leaf,
                text,
            } => (attr, op, threshold, leaf, text),
            Line::Leaf(_) => {
                return Err(ParseError::Syntax {
                    line,
                    text: "leaf without a condition".to_string(),
                })
            }
        };
        let id = self.nodes.len();
        // placeholder, filled once both children are known
        self.nodes.push(Node::Leaf(LeafNode {
            class: String::new(),
            purity_pct: 0.0,
            count: 0,
        }));
        let first_child = self.child(leaf, &text)?;

        let (line2, second) = self
            .next()
            .ok_or_else(|| ParseError::Dangling(text.clone()))?;
        let (leaf2, text2) = match second {
            Line::Cond {
                attr: a2,
                op: op2,
                threshold: t2,
                leaf,
                text: text2,
            } if a2 == attr && op2 != op && t2 == threshold => (leaf, text2),
            Line::Cond { text: found, .. } => {
                return Err(ParseError::MismatchedSibling {
                    line: line2,
                    expected: text,
                    found,
                })
            }
            Line::Leaf(_) => {
                return Err(ParseError::MismatchedSibling {
                    line: line2,
                    expected: text,
                    found: "leaf".to_string(),
                })
            }
        };
        let second_child = self.child(leaf2, &text2)?;
        let (low, high) = match op {
            Op::Less => (first_child, second_child),
            Op::GreaterEq => (second_child, first_child),
        };
        self.nodes[id] = Node::Split(SplitNode {
            attribute: attr,
            threshold,
            low,
            high,
        });
        Ok(id)
    }
}

pub(super) fn parse(text: &str) -> Result<DecisionTree, ParseError> {
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !strip_bullet(l).is_empty())
        .map(|(i, l)| parse_line(l, i + 1).map(|parsed| (i + 1, parsed)))
        .collect::<Result<Vec<_>, _>>()?;
    if lines.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        lines,
        pos: 0,
        nodes: Vec::new(),
    };
    if let Line::Leaf(leaf) = p.lines[0].1.clone() {
        p.pos = 1;
        p.push_leaf(leaf);
    } else {
        p.subtree()?;
    }
    if let Some((line, _)) = p.lines.get(p.pos) {
        return Err(ParseError::Trailing { line: *line });
    }
    Ok(DecisionTree::from_preorder(p.nodes))
}

fn format_threshold(t: f64) -> String {
    let fixed = format!("{t:.4}");
    if fixed.parse::<f64>() == Ok(t) {
        fixed
    } else {
        t.to_string()
    }
}

fn format_leaf(l: &LeafNode) -> String {
    format!(
        "then class = {} ({:.2} % of {} examples)",
        l.class, l.purity_pct, l.count
    )
}

pub(super) fn print(tree: &DecisionTree) -> String {
    fn go(tree: &DecisionTree, id: usize, depth: usize, out: &mut String) {
        let s = match &tree.nodes()[id] {
            Node::Split(s) => s,
            Node::Leaf(_) => unreachable!("go() is called on splits"),
        };
        for (op, child) in [("<", s.low), (">=", s.high)] {
            out.push_str(&"  ".repeat(depth));
            out.push_str(&format!("- {} {} {}", s.attribute, op, format_threshold(s.threshold)));
            match &tree.nodes()[child] {
                Node::Leaf(l) => {
                    out.push(' ');
                    out.push_str(&format_leaf(l));
                    out.push('\n');
                }
                Node::Split(_) => {
                    out.push('\n');
                    go(tree, child, depth + 1, out);
                }
            }
        }
    }
    let mut out = String::new();
    match &tree.nodes()[0] {
        Node::Leaf(l) => {
            out.push_str(&format_leaf(l));
            out.push('\n');
        }
        Node::Split(_) => go(tree, 0, 0, &mut out),
    }
    out
}
