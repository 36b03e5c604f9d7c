//! Parser for Penman-notation AMR text:
//! `(v / concept :role (v2 / concept2) :role2 v :role3 "constant")`.
//!
//! Re-entrant bare variable references are allowed anywhere a target can
//! appear. Unquoted targets must reference a bound variable unless they are
//! numbers or the conventional `-` / `+` / `imperative` / `expressive`
//! constants; string constants use double quotes.

use crate::graph::{AmrEdge, AmrGraph, AmrTarget};
use crate::{AmrError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LParen,
    RParen,
    Slash,
    Role(String),
    Symbol(String),
    Quoted(String),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' {
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(AmrError::Parse("unterminated string constant".into()));
                }
                tokens.push(Token::Quoted(chars[start..j].iter().collect()));
                i = j + 1;
            }
            ':' => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && !chars[j].is_whitespace() && !"()/".contains(chars[j]) {
                    j += 1;
                }
                tokens.push(Token::Role(chars[start..j].iter().collect()));
                i = j;
            }
            c if c.is_whitespace() => i += 1,
            _ => {
                let start = i;
                let mut j = i;
                while j < chars.len() && !chars[j].is_whitespace() && !"()/\":".contains(chars[j]) {
                    j += 1;
                }
                tokens.push(Token::Symbol(chars[start..j].iter().collect()));
                i = j;
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    nodes: Vec<(String, String)>,
    edges: Vec<(String, String, PendingTarget)>,
}

enum PendingTarget {
    Var(String),
    Quoted(String),
    Bare(String),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn parse_node(&mut self) -> Result<String> {
        match self.next() {
            Some(Token::LParen) => {}
            other => return Err(AmrError::Parse(format!("expected '(', found {other:?}"))),
        }
        let var = match self.next() {
            Some(Token::Symbol(v)) => v,
            other => return Err(AmrError::Parse(format!("expected variable, found {other:?}"))),
        };
        match self.next() {
            Some(Token::Slash) => {}
            other => {
                return Err(AmrError::Parse(format!(
                    "expected '/' after variable {var:?}, found {other:?}"
                )))
            }
        }
        let concept = match self.next() {
            Some(Token::Symbol(c)) => c,
            other => return Err(AmrError::Parse(format!("expected concept, found {other:?}"))),
        };
        if self.nodes.iter().any(|(v, _)| v == &var) {
            return Err(AmrError::DuplicateBinding(var));
        }
        self.nodes.push((var.clone(), concept));

        loop {
            match self.peek() {
                Some(Token::Role(_)) => {
                    let role = match self.next() {
                        Some(Token::Role(r)) => r,
                        _ => unreachable!(),
                    };
                    let target = match self.peek() {
                        Some(Token::LParen) => PendingTarget::Var(self.parse_node()?),
                        Some(Token::Quoted(_)) => match self.next() {
                            Some(Token::Quoted(s)) => PendingTarget::Quoted(s),
                            _ => unreachable!(),
                        },
                        Some(Token::Symbol(_)) => match self.next() {
                            Some(Token::Symbol(s)) => PendingTarget::Bare(s),
                            _ => unreachable!(),
                        },
                        other => {
                            return Err(AmrError::Parse(format!(
                                "expected a target after {role}, found {other:?}"
                            )))
                        }
                    };
                    self.edges.push((var.clone(), role, target));
                }
                Some(Token::RParen) => {
                    self.next();
                    return Ok(var);
                }
                other => {
                    return Err(AmrError::Parse(format!(
                        "expected a role or ')', found {other:?}"
                    )))
                }
            }
        }
    }
}

fn is_constant_symbol(s: &str) -> bool {
    s == "-"
        || s == "+"
        || s == "imperative"
        || s == "expressive"
        || s.parse::<f64>().is_ok()
}

/// Parses one Penman graph. Variables are deduplicated (a second `/` binding
/// for the same variable is an error), edges keep document order, and bare
/// targets resolve to variable references when bound anywhere in the text.
pub fn parse_penman(text: &str) -> Result<AmrGraph> {
    let mut depth = 0i64;
    for (i, c) in text.chars().enumerate() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(AmrError::Unbalanced(i));
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(AmrError::Unbalanced(text.len()));
    }

    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, nodes: Vec::new(), edges: Vec::new() };
    let root = parser.parse_node()?;
    if let Some(tok) = parser.peek() {
        return Err(AmrError::Parse(format!("trailing content after graph: {tok:?}")));
    }

    let mut graph = AmrGraph::new(root);
    for (var, concept) in parser.nodes {
        graph.nodes.insert(var, concept);
    }
    for (source, role, pending) in parser.edges {
        let target = match pending {
            PendingTarget::Var(v) => AmrTarget::Var(v),
            PendingTarget::Quoted(s) => AmrTarget::Const(s),
            PendingTarget::Bare(s) => {
                if graph.nodes.contains_key(&s) {
                    AmrTarget::Var(s)
                } else if is_constant_symbol(&s) {
                    AmrTarget::Const(s)
                } else {
                    return Err(AmrError::DanglingReference(s));
                }
            }
        };
        graph.edges.push(AmrEdge { source, role, target });
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_graph() {
        let g = parse_penman("(a / animal)").unwrap();
        assert_eq!(g.root, "a");
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes["a"], "animal");
        assert!(g.edges.is_empty());
    }

    #[test]
    fn nested_edges_hand_parse() {
        let g = parse_penman("(r / require-01 :ARG0 (a / animal) :ARG1 (o / oxygen))").unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.edges[0].source, "r");
        assert_eq!(g.edges[0].role, ":ARG0");
        assert_eq!(g.edges[0].target, AmrTarget::Var("a".into()));
        assert_eq!(g.edges[1].role, ":ARG1");
    }

    #[test]
    fn reentrant_reference_shares_node() {
        let g = parse_penman(
            "(k / kind :domain (s / scar) :ARG1-of (h / have-03 :ARG0 s))",
        )
        .unwrap();
        assert_eq!(g.nodes.len(), 3); // k, s, h - s referenced twice
        let incoming: Vec<_> = g
            .edges
            .iter()
            .filter(|e| e.target == AmrTarget::Var("s".into()))
            .collect();
        assert_eq!(incoming.len(), 2);
    }

    #[test]
    fn constants_and_polarity() {
        let g = parse_penman("(f / fossil :polarity - :quant 3 :name \"Fuel Wood\")").unwrap();
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.edges[0].target, AmrTarget::Const("-".into()));
        assert_eq!(g.edges[1].target, AmrTarget::Const("3".into()));
        assert_eq!(g.edges[2].target, AmrTarget::Const("Fuel Wood".into()));
    }

    #[test]
    fn unbalanced_rejected() {
        assert!(matches!(parse_penman("(a / animal"), Err(AmrError::Unbalanced(_))));
        assert!(matches!(parse_penman("(a / animal))"), Err(AmrError::Unbalanced(_))));
    }

    #[test]
    fn duplicate_binding_rejected() {
        let err = parse_penman("(a / animal :domain (a / beast))").unwrap_err();
        assert!(matches!(err, AmrError::DuplicateBinding(v) if v == "a"));
    }

    #[test]
    fn dangling_reference_rejected() {
        let err = parse_penman("(a / animal :ARG0 ghost)").unwrap_err();
        assert!(matches!(err, AmrError::DanglingReference(v) if v == "ghost"));
    }

    #[test]
    fn forward_reference_resolves() {
        // Reference appears before the binding in document order.
        let g = parse_penman("(a / and :op1 b :op2 (b / bird))").unwrap();
        assert_eq!(g.edges[0].target, AmrTarget::Var("b".into()));
    }
}
