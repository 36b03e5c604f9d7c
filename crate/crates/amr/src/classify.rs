//! The inference-type annotation cascade over (P1, P2, C) triples: find the
//! premise most similar to the conclusion, test for premise copies and
//! one3-word substitutions, then walk the graph branches (conditional frames,
//! property inheritance, argument/frame substitution and insertion,
//! conjunction, generalisation) before the surface-lexical causality and
//! example checks.

use std::collections::BTreeMap;
use std::fmt;

use crate::graph::{graph_equal, is_core_role, relaxed_subset, AmrGraph, AmrTarget};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InferenceType {
    ArgSub,
    PredSub,
    FrameSub,
    CondFrame,
    ArgIns,
    FrameIns,
    FrameConj,
    ArgPredGen,
    ArgSubProp,
    Ift,
    Example,
    PremCopy,
    Unk,
}

impl InferenceType {
    pub const ALL: [InferenceType; 13] = [
        InferenceType::ArgSub,
        InferenceType::PredSub,
        InferenceType::FrameSub,
        InferenceType::CondFrame,
        InferenceType::ArgIns,
        InferenceType::FrameIns,
        InferenceType::FrameConj,
        InferenceType::ArgPredGen,
        InferenceType::ArgSubProp,
        InferenceType::Ift,
        InferenceType::Example,
        InferenceType::PremCopy,
        InferenceType::Unk,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InferenceType::ArgSub => "ARG-SUB",
            InferenceType::PredSub => "PRED-SUB",
            InferenceType::FrameSub => "FRAME-SUB",
            InferenceType::CondFrame => "COND-FRAME",
            InferenceType::ArgIns => "ARG-INS",
            InferenceType::FrameIns => "FRAME-INS",
            InferenceType::FrameConj => "FRAME-CONJ",
            InferenceType::ArgPredGen => "ARG/PRED-GEN",
            InferenceType::ArgSubProp => "ARG-SUB-PROP",
            InferenceType::Ift => "IFT",
            InferenceType::Example => "EXAMPLE",
            InferenceType::PremCopy => "PREM-COPY",
            InferenceType::Unk => "UNK",
        }
    }
}

impl fmt::Display for InferenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Premise {
    P1,
    P2,
}

/// One annotated instance: both premise texts and graphs plus the
/// conclusion's.
#[derive(Debug, Clone)]
pub struct Triple {
    pub p1_text: String,
    pub p2_text: String,
    pub c_text: String,
    pub p1: AmrGraph,
    pub p2: AmrGraph,
    pub c: AmrGraph,
}

/// Multiset Jaccard similarity over concept labels.
fn concept_jaccard(a: &AmrGraph, b: &AmrGraph) -> f64 {
    let mut counts_a: BTreeMap<&str, usize> = BTreeMap::new();
    for c in a.nodes.values() {
        *counts_a.entry(c).or_insert(0) += 1;
    }
    let mut counts_b: BTreeMap<&str, usize> = BTreeMap::new();
    for c in b.nodes.values() {
        *counts_b.entry(c).or_insert(0) += 1;
    }
    let mut min_sum = 0usize;
    let mut max_sum = 0usize;
    let keys: Vec<&str> = counts_a.keys().chain(counts_b.keys()).copied().collect();
    let mut seen: Vec<&str> = Vec::new();
    for k in keys {
        if seen.contains(&k) {
            continue;
        }
        seen.push(k);
        let ca = counts_a.get(k).copied().unwrap_or(0);
        let cb = counts_b.get(k).copied().unwrap_or(0);
        min_sum += ca.min(cb);
        max_sum += ca.max(cb);
    }
    if max_sum == 0 {
        0.0
    } else {
        min_sum as f64 / max_sum as f64
    }
}

/// The premise whose concept-label multiset overlaps the conclusion's the
/// most (Jaccard); ties go to P1.
pub fn most_similar_premise(c: &AmrGraph, p1: &AmrGraph, p2: &AmrGraph) -> Premise {
    if concept_jaccard(p2, c) > concept_jaccard(p1, c) {
        Premise::P2
    } else {
        Premise::P1
    }
}

/// Closed verb lexicon for the surface heuristic (explanatory-corpus
/// vocabulary), consulted after lowercasing. AMR concepts are instead
/// treated as verbal when they carry a PropBank sense suffix (-01..-99).
const VERB_LEXICON: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "can",
    "cannot", "may", "will", "would", "do", "does", "did", "require", "requires", "required",
    "contain", "contains", "contained", "store", "stores", "stored", "cause", "causes",
    "caused", "mean", "means", "meant", "make", "makes", "made", "produce", "produces",
    "produced", "eat", "eats", "ate", "block", "blocks", "blocked", "use", "uses", "used",
    "live", "lives", "lived", "come", "comes", "came", "go", "goes", "went", "release",
    "releases", "released", "absorb", "absorbs", "absorbed", "provide", "provides",
    "provided", "need", "needs", "needed", "move", "moves", "moved", "grow", "grows", "grew",
    "help", "helps", "helped", "occur", "occurs", "occurred", "become", "becomes", "became",
];

/// Surface-word verb test: lexicon membership, or a PropBank-style sense
/// suffix for AMR concept tokens.
pub fn is_verb_word(word: &str) -> bool {
    let w = word.to_lowercase();
    VERB_LEXICON.contains(&w.as_str()) || has_sense_suffix(&w)
}

fn has_sense_suffix(concept: &str) -> bool {
    concept
        .rsplit_once('-')
        .is_some_and(|(_, suffix)| suffix.len() == 2 && suffix.chars().all(|c| c.is_ascii_digit()))
}

/// AMR concepts count as nouns unless verbal by the sense-suffix/lexicon
/// heuristic.
pub fn is_noun_concept(concept: &str) -> bool {
    !has_sense_suffix(concept) && !VERB_LEXICON.contains(&concept.to_lowercase().as_str())
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

/// Some((word_out, word_in, is_verb)) when the whitespace-tokenised,
/// lowercased sentences have equal length and differ at exactly one
/// position; None otherwise.
pub fn one_word_diff(p_text: &str, c_text: &str) -> Option<(String, String, bool)> {
    let a = tokens(p_text);
    let b = tokens(c_text);
    if a.len() != b.len() {
        return None;
    }
    let mut diff = None;
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            if diff.is_some() {
                return None;
            }
            diff = Some((x.clone(), y.clone()));
        }
    }
    diff.map(|(out, inn)| {
        let verb = is_verb_word(&out) || is_verb_word(&inn);
        (out, inn, verb)
    })
}

/// An `:ARG*` edge of C sourced in P_x's material whose target imports a
/// concept present in the other premise but absent from P_x.
fn find_arg_import<'a>(
    c: &'a AmrGraph,
    g_x: &AmrGraph,
    g_xbar: &AmrGraph,
) -> Option<&'a str> {
    for edge in &c.edges {
        if !edge.role.starts_with(":ARG") {
            continue;
        }
        let Some(source_concept) = c.concept(&edge.source) else { continue };
        if !g_x.contains_concept(source_concept) {
            continue;
        }
        if let AmrTarget::Var(t) = &edge.target {
            if let Some(target_concept) = c.concept(t) {
                if g_xbar.contains_concept(target_concept)
                    && !g_x.contains_concept(target_concept)
                {
                    return Some(t);
                }
            }
        }
    }
    None
}

/// Does the graph's root carry a `:condition` edge whose subtree shares a
/// concept with `other`?
fn root_condition_overlaps(g: &AmrGraph, other: &AmrGraph) -> bool {
    g.edges
        .iter()
        .filter(|e| e.source == g.root && e.role == ":condition")
        .any(|e| match &e.target {
            AmrTarget::Var(t) => subtree_concepts(g, t)
                .iter()
                .any(|c| other.contains_concept(c)),
            AmrTarget::Const(_) => false,
        })
}

fn subtree_concepts(g: &AmrGraph, start: &str) -> Vec<String> {
    let mut seen = vec![start.to_string()];
    let mut frontier = vec![start.to_string()];
    while let Some(var) = frontier.pop() {
        for edge in &g.edges {
            if edge.source == var {
                if let AmrTarget::Var(t) = &edge.target {
                    if !seen.contains(t) {
                        seen.push(t.clone());
                        frontier.push(t.clone());
                    }
                }
            }
        }
    }
    seen.into_iter()
        .filter_map(|v| g.concept(&v).map(str::to_string))
        .collect()
}

/// `:domain` targets of the graph's root.
fn root_domain_targets(g: &AmrGraph) -> Vec<String> {
    g.edges
        .iter()
        .filter(|e| e.source == g.root && e.role == ":domain")
        .filter_map(|e| match &e.target {
            AmrTarget::Var(t) => g.concept(t).map(str::to_string),
            AmrTarget::Const(_) => None,
        })
        .collect()
}

/// Nodes of C without a counterpart in the embedding witness, i.e. the
/// remainder `G_c - G_x`. The remainder root is the node closest to C's root
/// (BFS over all edges), ties broken by variable order.
fn remainder_root<'a>(
    c: &'a AmrGraph,
    witness: &BTreeMap<String, String>,
) -> Option<&'a str> {
    let covered: Vec<&String> = witness.values().collect();
    let mut depth: BTreeMap<&str, usize> = BTreeMap::new();
    depth.insert(c.root.as_str(), 0);
    let mut frontier = vec![c.root.as_str()];
    while let Some(var) = frontier.pop() {
        let d = depth[var];
        for edge in &c.edges {
            if edge.source == var {
                if let AmrTarget::Var(t) = &edge.target {
                    if !depth.contains_key(t.as_str()) {
                        depth.insert(t.as_str(), d + 1);
                        frontier.push(t.as_str());
                    }
                }
            }
        }
    }
    c.nodes
        .keys()
        .filter(|v| !covered.contains(v))
        .min_by_key(|v| (depth.get(v.as_str()).copied().unwrap_or(usize::MAX), v.as_str()))
        .map(|v| v.as_str())
}

/// Full annotation cascade. Total: every triple receives exactly one type;
/// where several branches could apply, the earlier one wins.
pub fn classify(t: &Triple) -> Result<InferenceType> {
    let (g_x, g_xbar, x_text) = match most_similar_premise(&t.c, &t.p1, &t.p2) {
        Premise::P1 => (&t.p1, &t.p2, &t.p1_text),
        Premise::P2 => (&t.p2, &t.p1, &t.p2_text),
    };

    // Premise copied into the conclusion (relaxed comparison).
    if graph_equal(g_x, &t.c, true) || graph_equal(g_xbar, &t.c, true) {
        return Ok(InferenceType::PremCopy);
    }

    // Single-word substitution at the surface level.
    if let Some((_, _, verb)) = one_word_diff(x_text, &t.c_text) {
        return Ok(if verb { InferenceType::PredSub } else { InferenceType::ArgSub });
    }

    // Argument material imported from the other premise.
    if let Some(a) = find_arg_import(&t.c, g_x, g_xbar) {
        if root_condition_overlaps(g_x, g_xbar) {
            return Ok(InferenceType::CondFrame);
        }
        let a_concept = t.c.concept(a).unwrap_or_default();
        if is_noun_concept(a_concept) {
            if g_xbar.root_concept() == "make-01"
                && g_xbar.edges.iter().any(|e| {
                    e.source == g_xbar.root
                        && e.role.starts_with(":ARG")
                        && match &e.target {
                            AmrTarget::Var(v) => g_xbar.concept(v) == Some(a_concept),
                            AmrTarget::Const(c) => c == a_concept,
                        }
                })
            {
                return Ok(InferenceType::ArgSubProp);
            }
            return Ok(InferenceType::ArgSub);
        }
        return Ok(InferenceType::FrameSub);
    }

    // Both premises embed into the conclusion.
    let x_embeds = relaxed_subset(g_x, &t.c)?;
    let xbar_embeds = relaxed_subset(g_xbar, &t.c)?;
    if x_embeds.is_some() && xbar_embeds.is_some() {
        return Ok(InferenceType::FrameConj);
    }

    // Premise roots joined under a conjunction node via :domain material.
    let dx = root_domain_targets(g_x);
    let dy = root_domain_targets(g_xbar);
    if !dx.is_empty() && !dy.is_empty() {
        let conj_ops: Vec<String> = t
            .c
            .nodes
            .iter()
            .filter(|(_, concept)| *concept == "and" || *concept == "or")
            .flat_map(|(var, _)| {
                t.c.edges
                    .iter()
                    .filter(move |e| &e.source == var && is_core_role(&e.role))
                    .filter_map(|e| match &e.target {
                        AmrTarget::Var(v) => t.c.concept(v).map(str::to_string),
                        AmrTarget::Const(c) => Some(c.clone()),
                    })
            })
            .collect();
        if dx.iter().any(|c| conj_ops.contains(c)) && dy.iter().any(|c| conj_ops.contains(c)) {
            return Ok(InferenceType::FrameConj);
        }
    }

    // One premise embeds; the remainder decides insertion type.
    if let Some(witness) = &x_embeds {
        if let Some(rem) = remainder_root(&t.c, witness) {
            let concept = t.c.concept(rem).unwrap_or_default();
            return Ok(if is_noun_concept(concept) {
                InferenceType::ArgIns
            } else {
                InferenceType::FrameIns
            });
        }
    }

    // Generalisation: the conclusion's root :domain links material across
    // the two premises.
    for edge in &t.c.edges {
        if edge.source == t.c.root && edge.role == ":domain" {
            if let AmrTarget::Var(y) = &edge.target {
                let rc = t.c.root_concept();
                let yc = t.c.concept(y).unwrap_or_default();
                let forward = g_x.contains_concept(rc) && g_xbar.contains_concept(yc);
                let backward = g_xbar.contains_concept(rc) && g_x.contains_concept(yc);
                if forward || backward {
                    return Ok(InferenceType::ArgPredGen);
                }
            }
        }
    }

    // Surface-lexical types, per the conclusion's key characteristic.
    let c_tokens = tokens(&t.c_text);
    if c_tokens.iter().any(|t| t == "if" || t.starts_with("if,"))
        && c_tokens.iter().any(|t| t == "then" || t.starts_with("then,"))
    {
        return Ok(InferenceType::Ift);
    }
    if c_tokens.iter().any(|t| t.trim_matches(|c: char| !c.is_alphanumeric()) == "example") {
        return Ok(InferenceType::Example);
    }

    Ok(InferenceType::Unk)
}
