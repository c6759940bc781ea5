//! A small NFA engine over field-label alphabets. Supports epsilon
//! transitions, the receiver-root transition, and a wildcard transition that
//! expands over the finite field alphabet before intersection.

use crate::resolved::SymId;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Eps,
    Root,
    Any,
    Field(SymId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nfa {
    pub n_states: usize,
    pub initial: usize,
    pub accepting: Vec<bool>,
    pub transitions: Vec<(usize, Label, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptMode {
    /// Every state except the initial accepts (read automata: each prefix of
    /// an access is itself read).
    AllNonInitial,
    /// Only the final state accepts (write automata: the full path is
    /// written, its prefixes are only read).
    FinalOnly,
}

impl Nfa {
    /// The empty language.
    pub fn empty() -> Nfa {
        Nfa {
            n_states: 1,
            initial: 0,
            accepting: vec![false],
            transitions: Vec::new(),
        }
    }

    pub fn add_state(&mut self) -> usize {
        self.n_states += 1;
        self.accepting.push(false);
        self.n_states - 1
    }

    pub fn add_transition(&mut self, from: usize, label: Label, to: usize) {
        let t = (from, label, to);
        if !self.transitions.contains(&t) {
            self.transitions.push(t);
        }
    }

    /// A linear chain for one access path. `rooted` prepends the
    /// traversed-node transition; `any_tail` appends a wildcard self-loop on
    /// the final state (opaque objects and new/delete closures).
    pub fn chain(rooted: bool, segs: &[SymId], mode: AcceptMode, any_tail: bool) -> Nfa {
        let mut nfa = Nfa::empty();
        let mut cur = nfa.initial;
        if rooted {
            let next = nfa.add_state();
            nfa.add_transition(cur, Label::Root, next);
            cur = next;
        }
        for &s in segs {
            let next = nfa.add_state();
            nfa.add_transition(cur, Label::Field(s), next);
            cur = next;
        }
        match mode {
            AcceptMode::AllNonInitial => {
                for i in 0..nfa.n_states {
                    if i != nfa.initial {
                        nfa.accepting[i] = true;
                    }
                }
            }
            AcceptMode::FinalOnly => {
                if cur != nfa.initial {
                    nfa.accepting[cur] = true;
                }
            }
        }
        if any_tail && cur != nfa.initial {
            nfa.add_transition(cur, Label::Any, cur);
            nfa.accepting[cur] = true;
        }
        nfa
    }

    /// Language union via a fresh initial state with epsilon moves.
    pub fn union(a: &Nfa, b: &Nfa) -> Nfa {
        let mut out = Nfa {
            n_states: 1 + a.n_states + b.n_states,
            initial: 0,
            accepting: vec![false],
            transitions: Vec::new(),
        };
        let off_a = 1;
        let off_b = 1 + a.n_states;
        out.accepting.extend(a.accepting.iter().copied());
        out.accepting.extend(b.accepting.iter().copied());
        for &(f, l, t) in &a.transitions {
            out.transitions.push((f + off_a, l, t + off_a));
        }
        for &(f, l, t) in &b.transitions {
            out.transitions.push((f + off_b, l, t + off_b));
        }
        out.transitions.push((0, Label::Eps, a.initial + off_a));
        out.transitions.push((0, Label::Eps, b.initial + off_b));
        out
    }

    pub fn union_all<I: IntoIterator<Item = Nfa>>(items: I) -> Nfa {
        let mut acc: Option<Nfa> = None;
        for item in items {
            acc = Some(match acc {
                None => item,
                Some(prev) => Nfa::union(&prev, &item),
            });
        }
        acc.unwrap_or_else(Nfa::empty)
    }

    /// Language concatenation.
    pub fn concat(a: &Nfa, b: &Nfa) -> Nfa {
        let mut out = Nfa {
            n_states: a.n_states + b.n_states,
            initial: a.initial,
            accepting: vec![false; a.n_states],
            transitions: a.transitions.clone(),
        };
        let off_b = a.n_states;
        out.accepting.extend(b.accepting.iter().copied());
        for &(f, l, t) in &b.transitions {
            out.transitions.push((f + off_b, l, t + off_b));
        }
        for (i, acc) in a.accepting.iter().enumerate() {
            if *acc {
                out.transitions.push((i, Label::Eps, b.initial + off_b));
            }
        }
        out
    }

    fn eps_closure(&self, seed: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = seed.clone();
        let mut queue: Vec<usize> = seed.iter().copied().collect();
        while let Some(s) = queue.pop() {
            for &(f, l, t) in &self.transitions {
                if f == s && l == Label::Eps && out.insert(t) {
                    queue.push(t);
                }
            }
        }
        out
    }

    /// Membership test. Input symbols are `Root` or `Field`; a wildcard
    /// transition matches any field symbol.
    pub fn accepts(&self, input: &[Label]) -> bool {
        let mut cur = self.eps_closure(&BTreeSet::from([self.initial]));
        for sym in input {
            let mut next = BTreeSet::new();
            for &s in &cur {
                for &(f, l, t) in &self.transitions {
                    if f != s {
                        continue;
                    }
                    let hit = match (l, sym) {
                        (Label::Field(a), Label::Field(b)) => a == *b,
                        (Label::Any, Label::Field(_)) => true,
                        (Label::Root, Label::Root) => true,
                        _ => false,
                    };
                    if hit {
                        next.insert(t);
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            cur = self.eps_closure(&next);
        }
        cur.iter().any(|&s| self.accepting[s])
    }

    /// Remove epsilon transitions (language-preserving).
    pub fn eliminate_eps(&self) -> Nfa {
        let mut out = Nfa {
            n_states: self.n_states,
            initial: self.initial,
            accepting: vec![false; self.n_states],
            transitions: Vec::new(),
        };
        for s in 0..self.n_states {
            let closure = self.eps_closure(&BTreeSet::from([s]));
            if closure.iter().any(|&c| self.accepting[c]) {
                out.accepting[s] = true;
            }
            for &c in &closure {
                for &(f, l, t) in &self.transitions {
                    if f == c && l != Label::Eps {
                        out.add_transition(s, l, t);
                    }
                }
            }
        }
        out
    }

    /// Replace every wildcard transition with one transition per symbol of
    /// the finite field alphabet.
    pub fn expand_any(&self, field_syms: &[SymId]) -> Nfa {
        let mut out = Nfa {
            n_states: self.n_states,
            initial: self.initial,
            accepting: self.accepting.clone(),
            transitions: Vec::new(),
        };
        for &(f, l, t) in &self.transitions {
            match l {
                Label::Any => {
                    for &s in field_syms {
                        out.add_transition(f, Label::Field(s), t);
                    }
                }
                other => out.add_transition(f, other, t),
            }
        }
        out
    }

    /// Normalize for intersection: epsilon-free and wildcard-free.
    pub fn normalize(&self, field_syms: &[SymId]) -> Nfa {
        self.eliminate_eps().expand_any(field_syms)
    }

    /// Product construction over normalized automata (reachable part only).
    pub fn intersect(a: &Nfa, b: &Nfa, field_syms: &[SymId]) -> Nfa {
        let a = a.normalize(field_syms);
        let b = b.normalize(field_syms);
        let mut out = Nfa {
            n_states: 0,
            initial: 0,
            accepting: Vec::new(),
            transitions: Vec::new(),
        };
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut queue = VecDeque::new();
        let start = (a.initial, b.initial);
        ids.insert(start, 0);
        out.n_states = 1;
        out.accepting.push(a.accepting[a.initial] && b.accepting[b.initial]);
        queue.push_back(start);
        while let Some((sa, sb)) = queue.pop_front() {
            let from = ids[&(sa, sb)];
            for &(fa, la, ta) in &a.transitions {
                if fa != sa {
                    continue;
                }
                for &(fb, lb, tb) in &b.transitions {
                    if fb != sb || la != lb {
                        continue;
                    }
                    let key = (ta, tb);
                    let to = *ids.entry(key).or_insert_with(|| {
                        let id = out.n_states;
                        out.n_states += 1;
                        out.accepting.push(a.accepting[ta] && b.accepting[tb]);
                        queue.push_back(key);
                        id
                    });
                    out.add_transition(from, la, to);
                }
            }
        }
        out
    }

    /// True iff no accepting state is reachable.
    pub fn is_empty(&self) -> bool {
        let mut seen = vec![false; self.n_states];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(s) = queue.pop_front() {
            if self.accepting[s] {
                return false;
            }
            for &(f, _, t) in &self.transitions {
                if f == s && !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        true
    }

    /// Emptiness of the intersection with early exit; agrees with
    /// `is_empty(intersect(a, b))` but skips materializing the product.
    pub fn intersects_nonempty(a: &Nfa, b: &Nfa) -> bool {
        // callers pass normalized automata
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut queue = VecDeque::from([(a.initial, b.initial)]);
        seen.insert((a.initial, b.initial));
        let mut a_adj: Vec<Vec<(Label, usize)>> = vec![Vec::new(); a.n_states];
        for &(f, l, t) in &a.transitions {
            a_adj[f].push((l, t));
        }
        let mut b_adj: Vec<Vec<(Label, usize)>> = vec![Vec::new(); b.n_states];
        for &(f, l, t) in &b.transitions {
            b_adj[f].push((l, t));
        }
        while let Some((sa, sb)) = queue.pop_front() {
            if a.accepting[sa] && b.accepting[sb] {
                return true;
            }
            for &(la, ta) in &a_adj[sa] {
                for &(lb, tb) in &b_adj[sb] {
                    if la == lb && seen.insert((ta, tb)) {
                        queue.push_back((ta, tb));
                    }
                }
            }
        }
        false
    }

    /// Canonical minimized deterministic form, used for dumps and golden
    /// structural comparisons. Wildcards and the root transition are treated
    /// as ordinary alphabet symbols here.
    pub fn minimize(&self) -> CanonicalDfa {
        let nfa = self.eliminate_eps();
        // subset construction, reachable part
        let labels: BTreeSet<Label> = nfa.transitions.iter().map(|&(_, l, _)| l).collect();
        let start: BTreeSet<usize> = BTreeSet::from([nfa.initial]);
        let mut ids: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
        let mut accepting = Vec::new();
        let mut trans: Vec<BTreeMap<Label, usize>> = Vec::new();
        ids.insert(start.clone(), 0);
        accepting.push(start.iter().any(|&s| nfa.accepting[s]));
        trans.push(BTreeMap::new());
        let mut queue = VecDeque::from([start]);
        while let Some(set) = queue.pop_front() {
            let from = ids[&set];
            for &l in &labels {
                let mut next = BTreeSet::new();
                for &s in &set {
                    for &(f, tl, t) in &nfa.transitions {
                        if f == s && tl == l {
                            next.insert(t);
                        }
                    }
                }
                if next.is_empty() {
                    continue;
                }
                let id = match ids.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = ids.len();
                        ids.insert(next.clone(), id);
                        accepting.push(next.iter().any(|&s| nfa.accepting[s]));
                        trans.push(BTreeMap::new());
                        queue.push_back(next);
                        id
                    }
                };
                trans[from].insert(l, id);
            }
        }
        // drop states that cannot reach an accepting state
        let n = ids.len();
        let mut live = vec![false; n];
        loop {
            let mut changed = false;
            for s in 0..n {
                if live[s] {
                    continue;
                }
                if accepting[s] || trans[s].values().any(|&t| live[t]) {
                    live[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !live[0] {
            return CanonicalDfa {
                n_states: 1,
                accepting: vec![false],
                transitions: Vec::new(),
            };
        }
        // Moore partition refinement on the live part
        let mut class = vec![0usize; n];
        for s in 0..n {
            class[s] = if accepting[s] { 1 } else { 0 };
        }
        loop {
            let mut sig: BTreeMap<(usize, Vec<(Label, Option<usize>)>), usize> = BTreeMap::new();
            let mut next_class = vec![0usize; n];
            for s in 0..n {
                if !live[s] {
                    continue;
                }
                let mut row = Vec::new();
                for (&l, &t) in &trans[s] {
                    row.push((l, if live[t] { Some(class[t]) } else { None }));
                }
                let key = (class[s], row);
                let id = sig.len();
                let entry = *sig.entry(key).or_insert(id);
                next_class[s] = entry;
            }
            if next_class == class {
                break;
            }
            class = next_class;
        }
        // canonical BFS renumbering from the initial class
        let mut order: Vec<usize> = Vec::new(); // class -> canonical id by discovery
        let mut canon: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([class[0]]);
        canon.insert(class[0], 0);
        order.push(class[0]);
        let mut canon_trans: Vec<Vec<(Label, usize)>> = Vec::new();
        let mut canon_accept: Vec<bool> = Vec::new();
        while let Some(c) = queue.pop_front() {
            // representative state for this class
            let rep = (0..n).find(|&s| live[s] && class[s] == c).unwrap();
            canon_accept.push(accepting[rep]);
            let mut row = Vec::new();
            for (&l, &t) in &trans[rep] {
                if !live[t] {
                    continue;
                }
                let tc = class[t];
                let id = match canon.get(&tc) {
                    Some(&id) => id,
                    None => {
                        let id = order.len();
                        canon.insert(tc, id);
                        order.push(tc);
                        queue.push_back(tc);
                        id
                    }
                };
                row.push((l, id));
            }
            canon_trans.push(row);
        }
        let mut transitions = Vec::new();
        for (from, row) in canon_trans.iter().enumerate() {
            for &(l, to) in row {
                transitions.push((from, l, to));
            }
        }
        transitions.sort();
        CanonicalDfa {
            n_states: order.len(),
            accepting: canon_accept,
            transitions,
        }
    }
}

/// Minimized DFA in canonical numbering (state 0 initial, BFS order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalDfa {
    pub n_states: usize,
    pub accepting: Vec<bool>,
    pub transitions: Vec<(usize, Label, usize)>,
}

impl CanonicalDfa {
    pub fn label_name(l: Label, names: &[String]) -> String {
        match l {
            Label::Eps => "eps".to_string(),
            Label::Root => "root".to_string(),
            Label::Any => "any".to_string(),
            Label::Field(s) => names[s.idx()].clone(),
        }
    }

    /// Stable one-line-per-fact structural text for golden comparisons.
    pub fn structure_string(&self, names: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states {}", self.n_states);
        let accepts: Vec<String> = self
            .accepting
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(i, _)| i.to_string())
            .collect();
        let _ = writeln!(out, "accepting {}", accepts.join(" "));
        let mut lines: Vec<String> = self
            .transitions
            .iter()
            .map(|&(f, l, t)| format!("{f} -{}-> {t}", Self::label_name(l, names)))
            .collect();
        lines.sort();
        for line in lines {
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn to_dot(&self, names: &[String], title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{title}\" {{");
        let _ = writeln!(out, "  rankdir=LR;");
        for s in 0..self.n_states {
            let shape = if self.accepting[s] {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(out, "  s{s} [shape={shape}];");
        }
        for &(f, l, t) in &self.transitions {
            let _ = writeln!(out, "  s{f} -> s{t} [label=\"{}\"];", Self::label_name(l, names));
        }
        out.push_str("}\n");
        out
    }
}
