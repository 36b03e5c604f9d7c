//! Rooted AMR graphs and their comparison. Variable names never matter:
//! equality is isomorphism over concept-labelled nodes and role-labelled
//! edges, and the relaxed mode drops every edge whose role is not an
//! argument (`:ARGn`, `:ARGn-of`) or operand (`:opn`) together with the
//! subgraphs only reachable through them.

use std::collections::BTreeMap;

use crate::{AmrError, Result};

pub const SUBGRAPH_SEARCH_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AmrTarget {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrEdge {
    pub source: String,
    pub role: String,
    pub target: AmrTarget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrGraph {
    pub root: String,
    /// Variable to concept label.
    pub nodes: BTreeMap<String, String>,
    /// Document order.
    pub edges: Vec<AmrEdge>,
}

impl AmrGraph {
    pub fn new(root: impl Into<String>) -> Self {
        AmrGraph { root: root.into(), nodes: BTreeMap::new(), edges: Vec::new() }
    }

    pub fn concept(&self, var: &str) -> Option<&str> {
        self.nodes.get(var).map(String::as_str)
    }

    pub fn root_concept(&self) -> &str {
        self.concept(&self.root).unwrap_or_default()
    }

    /// Concept-label multiset (sorted).
    pub fn concept_multiset(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.nodes.values().map(String::as_str).collect();
        out.sort_unstable();
        out
    }

    pub fn contains_concept(&self, concept: &str) -> bool {
        self.nodes.values().any(|c| c == concept)
    }

    /// The relaxed view: only core (`:ARG*` / `:op*`) edges, restricted to
    /// the nodes still reachable from the root through them.
    pub fn relaxed_view(&self) -> AmrGraph {
        let mut reachable = vec![self.root.clone()];
        let mut frontier = vec![self.root.clone()];
        while let Some(var) = frontier.pop() {
            for edge in &self.edges {
                if edge.source == var && is_core_role(&edge.role) {
                    if let AmrTarget::Var(t) = &edge.target {
                        if !reachable.contains(t) {
                            reachable.push(t.clone());
                            frontier.push(t.clone());
                        }
                    }
                }
            }
        }
        let mut view = AmrGraph::new(self.root.clone());
        for var in &reachable {
            if let Some(c) = self.nodes.get(var) {
                view.nodes.insert(var.clone(), c.clone());
            }
        }
        view.edges = self
            .edges
            .iter()
            .filter(|e| {
                is_core_role(&e.role)
                    && reachable.contains(&e.source)
                    && match &e.target {
                        AmrTarget::Var(t) => reachable.contains(t),
                        AmrTarget::Const(_) => true,
                    }
            })
            .cloned()
            .collect();
        view
    }

    /// Renames every variable via the map (tests use this to check
    /// alpha-invariance).
    pub fn rename_vars(&self, rename: &BTreeMap<String, String>) -> AmrGraph {
        let map = |v: &String| rename.get(v).cloned().unwrap_or_else(|| v.clone());
        AmrGraph {
            root: map(&self.root),
            nodes: self.nodes.iter().map(|(v, c)| (map(v), c.clone())).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| AmrEdge {
                    source: map(&e.source),
                    role: e.role.clone(),
                    target: match &e.target {
                        AmrTarget::Var(t) => AmrTarget::Var(map(t)),
                        c => c.clone(),
                    },
                })
                .collect(),
        }
    }
}

pub fn is_core_role(role: &str) -> bool {
    role.starts_with(":ARG") || role.starts_with(":op")
}

/// Rooted isomorphism over concepts and roles; variable names are
/// irrelevant. In relaxed mode non-core edges (and the material hanging off
/// them) are ignored on both sides.
pub fn graph_equal(g1: &AmrGraph, g2: &AmrGraph, relaxed: bool) -> bool {
    let (a, b) = if relaxed {
        (g1.relaxed_view(), g2.relaxed_view())
    } else {
        (g1.clone(), g2.clone())
    };
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    if a.concept_multiset() != b.concept_multiset() {
        return false;
    }
    // Injective mapping with equal node counts and pinned roots; edge counts
    // equal, so covering all of a's edges makes the correspondence exact.
    let mut state = MatchState::new(&a, &b, true);
    matches!(state.search(SUBGRAPH_SEARCH_CAP), Ok(true))
}

/// Injective concept/edge-preserving embedding of `small`'s relaxed view
/// into `big`. Returns the witness variable mapping when one exists; a
/// search-cap overrun is reported as an error, distinct from "no embedding".
pub fn relaxed_subset(
    small: &AmrGraph,
    big: &AmrGraph,
) -> Result<Option<BTreeMap<String, String>>> {
    relaxed_subset_with_budget(small, big, SUBGRAPH_SEARCH_CAP)
}

/// As `relaxed_subset` with an explicit state budget.
pub fn relaxed_subset_with_budget(
    small: &AmrGraph,
    big: &AmrGraph,
    budget: usize,
) -> Result<Option<BTreeMap<String, String>>> {
    let a = small.relaxed_view();
    let mut state = MatchState::new(&a, big, false);
    match state.search(budget) {
        Ok(true) => Ok(Some(state.assignment_map())),
        Ok(false) => Ok(None),
        Err(e) => Err(e),
    }
}

struct MatchState<'a> {
    small: &'a AmrGraph,
    big: &'a AmrGraph,
    small_vars: Vec<String>,
    assignment: Vec<Option<String>>,
    pin_roots: bool,
    big_out_degree: BTreeMap<String, usize>,
}

impl<'a> MatchState<'a> {
    fn new(small: &'a AmrGraph, big: &'a AmrGraph, pin_roots: bool) -> MatchState<'a> {
        // Order small's variables by descending core degree so constrained
        // nodes are assigned first.
        let mut small_vars: Vec<String> = small.nodes.keys().cloned().collect();
        let degree = |v: &str| {
            small
                .edges
                .iter()
                .filter(|e| e.source == v || e.target == AmrTarget::Var(v.to_string()))
                .count()
        };
        small_vars.sort_by(|a, b| degree(b).cmp(&degree(a)).then_with(|| a.cmp(b)));
        if pin_roots {
            // Assign the root first so the pinning prunes immediately.
            if let Some(pos) = small_vars.iter().position(|v| v == &small.root) {
                small_vars.swap(0, pos);
            }
        }
        let mut big_out_degree = BTreeMap::new();
        for v in big.nodes.keys() {
            big_out_degree.insert(
                v.clone(),
                big.edges.iter().filter(|e| &e.source == v).count(),
            );
        }
        MatchState {
            small,
            big,
            assignment: vec![None; small.nodes.len()],
            small_vars,
            pin_roots,
            big_out_degree,
        }
    }

    fn assignment_map(&self) -> BTreeMap<String, String> {
        self.small_vars
            .iter()
            .zip(self.assignment.iter())
            .filter_map(|(v, a)| a.as_ref().map(|t| (v.clone(), t.clone())))
            .collect()
    }

    fn search(&mut self, budget: usize) -> Result<bool> {
        let mut remaining = budget;
        self.assign(0, &mut remaining)
            .map_err(|_| AmrError::SearchCapExceeded(budget))
    }

    fn assign(&mut self, idx: usize, budget: &mut usize) -> Result<bool> {
        if *budget == 0 {
            return Err(AmrError::SearchCapExceeded(SUBGRAPH_SEARCH_CAP));
        }
        *budget -= 1;
        if idx == self.small_vars.len() {
            return Ok(self.all_edges_preserved());
        }
        let var = self.small_vars[idx].clone();
        let concept = &self.small.nodes[&var];
        let needed_degree = self
            .small
            .edges
            .iter()
            .filter(|e| e.source == var)
            .count();
        let candidates: Vec<String> = self
            .big
            .nodes
            .iter()
            .filter(|(bv, bc)| {
                *bc == concept
                    && !self.assignment.iter().any(|a| a.as_deref() == Some(bv.as_str()))
                    && self.big_out_degree[*bv] >= needed_degree
            })
            .map(|(bv, _)| bv.clone())
            .collect();
        for candidate in candidates {
            if self.pin_roots
                && (var == self.small.root) != (candidate == self.big.root)
            {
                continue;
            }
            self.assignment[idx] = Some(candidate);
            if self.partial_consistent(idx) && self.assign(idx + 1, budget)? {
                return Ok(true);
            }
            self.assignment[idx] = None;
        }
        Ok(false)
    }

    fn mapped(&self, var: &str) -> Option<&str> {
        self.small_vars
            .iter()
            .position(|v| v == var)
            .and_then(|i| self.assignment[i].as_deref())
    }

    /// Checks every small edge whose endpoints are both assigned.
    fn partial_consistent(&self, _latest: usize) -> bool {
        for edge in &self.small.edges {
            let Some(src) = self.mapped(&edge.source) else { continue };
            match &edge.target {
                AmrTarget::Var(t) => {
                    let Some(tgt) = self.mapped(t) else { continue };
                    if !self.big_has_edge(src, &edge.role, &AmrTarget::Var(tgt.to_string())) {
                        return false;
                    }
                }
                c @ AmrTarget::Const(_) => {
                    if !self.big_has_edge(src, &edge.role, c) {
                        return false;
                    }
                }
            }
        }
        true
    }

    // With every variable assigned, the partial check covers every edge.
    fn all_edges_preserved(&self) -> bool {
        self.partial_consistent(0)
    }

    fn big_has_edge(&self, source: &str, role: &str, target: &AmrTarget) -> bool {
        self.big
            .edges
            .iter()
            .any(|e| e.source == source && e.role == role && &e.target == target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_penman;

    #[test]
    fn graph_equals_itself() {
        let g = parse_penman("(r / require-01 :ARG0 (a / animal) :ARG1 (o / oxygen))").unwrap();
        assert!(graph_equal(&g, &g, false));
        assert!(graph_equal(&g, &g, true));
    }

    #[test]
    fn alpha_renaming_is_invisible() {
        let g1 = parse_penman("(r / require-01 :ARG0 (a / animal) :ARG1 (o / oxygen))").unwrap();
        let g2 = parse_penman("(x / require-01 :ARG0 (y / animal) :ARG1 (z / oxygen))").unwrap();
        assert!(graph_equal(&g1, &g2, false));
    }

    #[test]
    fn manner_edge_ignored_when_relaxed() {
        let g1 = parse_penman("(r / run-01 :ARG0 (d / dog))").unwrap();
        let g2 = parse_penman("(r / run-01 :ARG0 (d / dog) :manner (q / quick))").unwrap();
        assert!(graph_equal(&g1, &g2, true));
        assert!(!graph_equal(&g1, &g2, false));
    }

    #[test]
    fn different_concepts_never_equal() {
        let g1 = parse_penman("(a / animal)").unwrap();
        let g2 = parse_penman("(p / plant)").unwrap();
        assert!(!graph_equal(&g1, &g2, false));
        assert!(!graph_equal(&g1, &g2, true));
    }

    #[test]
    fn swapped_arguments_not_equal() {
        let g1 = parse_penman("(e / eat-01 :ARG0 (c / cat) :ARG1 (f / fish))").unwrap();
        let g2 = parse_penman("(e / eat-01 :ARG0 (f / fish) :ARG1 (c / cat))").unwrap();
        assert!(!graph_equal(&g1, &g2, false));
    }

    #[test]
    fn single_node_subset_by_concept() {
        let small = parse_penman("(s / scar)").unwrap();
        let big = parse_penman("(k / kind :ARG1 (s / scar :location (kn / knee)))").unwrap();
        assert!(relaxed_subset(&small, &big).unwrap().is_some());
        let absent = parse_penman("(w / wolf)").unwrap();
        assert!(relaxed_subset(&absent, &big).unwrap().is_none());
    }

    #[test]
    fn graph_is_subset_of_itself() {
        let g = parse_penman("(r / require-01 :ARG0 (a / animal) :ARG1 (o / oxygen))").unwrap();
        assert!(relaxed_subset(&g, &g).unwrap().is_some());
    }

    #[test]
    fn crafted_pair_matches_exhaustive_injection_enumeration() {
        // 4-node small graph into a 6-node big graph; compare against brute
        // force over all injective concept-respecting assignments.
        let small = parse_penman(
            "(s / store-01 :ARG0 (p / photosynthesis) :ARG1 (e / energy) :op1 (x / light))",
        )
        .unwrap();
        let big = parse_penman(
            "(a / and :op1 (s / store-01 :ARG0 (p / photosynthesis) :ARG1 (e / energy) :op1 (l / light)) :op2 (r / release-01 :ARG0 (q / respiration) :ARG1 (e2 / energy)))",
        )
        .unwrap();
        let found = relaxed_subset(&small, &big).unwrap();
        assert!(found.is_some());

        // Brute force: enumerate all var assignments small -> big.
        let small_vars: Vec<&String> = small.nodes.keys().collect();
        let big_vars: Vec<&String> = big.nodes.keys().collect();
        let mut any = false;
        let mut stack = vec![Vec::<usize>::new()];
        while let Some(partial) = stack.pop() {
            if partial.len() == small_vars.len() {
                let ok = small.edges.iter().all(|edge| {
                    let si = small_vars.iter().position(|v| **v == edge.source).unwrap();
                    let src = big_vars[partial[si]];
                    match &edge.target {
                        AmrTarget::Var(t) => {
                            let ti = small_vars.iter().position(|v| *v == t).unwrap();
                            let tgt = big_vars[partial[ti]];
                            big.edges.iter().any(|e| {
                                &e.source == src
                                    && e.role == edge.role
                                    && e.target == AmrTarget::Var(tgt.clone())
                            })
                        }
                        c => big
                            .edges
                            .iter()
                            .any(|e| &e.source == src && e.role == edge.role && &e.target == c),
                    }
                });
                if ok {
                    any = true;
                }
                continue;
            }
            let si = partial.len();
            for (bi, bv) in big_vars.iter().enumerate() {
                if partial.contains(&bi) {
                    continue;
                }
                if small.nodes[small_vars[si]] != big.nodes[*bv] {
                    continue;
                }
                let mut next = partial.clone();
                next.push(bi);
                stack.push(next);
            }
        }
        assert!(any, "oracle must also find an embedding");
    }

    #[test]
    fn exhausted_budget_is_an_error_not_a_no() {
        // A same-concept chain one deeper than anything in the target keeps
        // partial matches alive; a tiny budget must surface as a distinct
        // outcome rather than `false`.
        let small = parse_penman(
            "(a / n :op1 (b / n :op1 (c / n :op1 (d / n :op1 (e / n)))))",
        )
        .unwrap();
        let big = parse_penman(
            "(x1 / n :op1 (a2 / n :op1 (a3 / n :op1 (a4 / n))) :op1 (b2 / n :op1 (b3 / n :op1 (b4 / n))) :op1 (c2 / n :op1 (c3 / n :op1 (c4 / n))))",
        )
        .unwrap();
        let err = relaxed_subset_with_budget(&small, &big, 3).unwrap_err();
        assert!(matches!(err, crate::AmrError::SearchCapExceeded(_)));
        // With the full budget the answer is a definite no.
        assert!(relaxed_subset(&small, &big).unwrap().is_none());
    }

    #[test]
    fn strict_subset_implies_relaxed_subset() {
        let small = parse_penman("(c / cat :ARG0-of (e / eat-01))").unwrap();
        let big =
            parse_penman("(h / house :op1 (c / cat :ARG0-of (e / eat-01) :mod (b / black)))")
                .unwrap();
        assert!(relaxed_subset(&small, &big).unwrap().is_some());
    }
}
