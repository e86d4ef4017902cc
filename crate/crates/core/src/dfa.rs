//! Deterministic finite automata with partial transition functions.
//!
//! A missing transition rejects: a run that falls off the graph kills the
//! word. Completion (adding an explicit dead state) is a separate,
//! language-preserving operation, and canonical minimization always returns
//! a complete automaton renumbered in breadth-first discovery order.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::alphabet::{Alphabet, Word};
use crate::error::{AutomatonError, ParseError};

/// Verdict of a language-equivalence check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equal,
    /// A shortest word accepted by exactly one of the two automata; ties are
    /// broken lexicographically by alphabet order.
    Counterexample(Word),
}

impl Equivalence {
    pub fn is_equal(&self) -> bool {
        matches!(self, Equivalence::Equal)
    }
}

/// A deterministic finite automaton over dense state indices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Alphabet,
    /// `next[q][a]` is the target of the transition from `q` on symbol
    /// index `a`, if defined.
    next: Vec<Vec<Option<usize>>>,
    initial: usize,
    finals: BTreeSet<usize>,
}

impl Dfa {
    /// Creates a DFA with `num_states` states, no transitions and no finals.
    pub fn new(alphabet: Alphabet, num_states: usize, initial: usize) -> Result<Dfa, AutomatonError> {
        if initial >= num_states {
            return Err(AutomatonError::StateOutOfRange(initial, num_states));
        }
        let width = alphabet.len();
        Ok(Dfa {
            alphabet,
            next: vec![vec![None; width]; num_states],
            initial,
            finals: BTreeSet::new(),
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.next.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    pub fn set_final(&mut self, q: usize) -> Result<(), AutomatonError> {
        if q >= self.num_states() {
            return Err(AutomatonError::StateOutOfRange(q, self.num_states()));
        }
        self.finals.insert(q);
        Ok(())
    }

    /// Adds the transition `src --symbol--> dst`. At most one target per
    /// `(state, symbol)` pair.
    pub fn add_transition(&mut self, src: usize, symbol: &str, dst: usize) -> Result<(), AutomatonError> {
        let n = self.num_states();
        if src >= n {
            return Err(AutomatonError::StateOutOfRange(src, n));
        }
        if dst >= n {
            return Err(AutomatonError::StateOutOfRange(dst, n));
        }
        let a = self
            .alphabet
            .index_of(symbol)
            .ok_or_else(|| AutomatonError::UnknownSymbol(symbol.to_string()))?;
        if self.next[src][a].is_some() {
            return Err(AutomatonError::DuplicateTransition(src, symbol.to_string()));
        }
        self.next[src][a] = Some(dst);
        Ok(())
    }

    /// Target of the transition from `q` on the symbol with index `a`.
    pub fn step(&self, q: usize, a: usize) -> Option<usize> {
        self.next[q][a]
    }

    /// Runs the automaton on `word`; `None` when the run falls off an
    /// undefined transition.
    pub fn run<S: AsRef<str>>(&self, word: &[S]) -> Result<Option<usize>, AutomatonError> {
        let encoded = self.alphabet.encode(word)?;
        let mut q = self.initial;
        for a in encoded {
            match self.next[q][a] {
                Some(p) => q = p,
                None => return Ok(None),
            }
        }
        Ok(Some(q))
    }

    /// Membership: the unique run consumes the whole word and ends in a
    /// final state.
    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> Result<bool, AutomatonError> {
        Ok(matches!(self.run(word)?, Some(q) if self.is_final(q)))
    }

    /// True when every `(state, symbol)` pair has a transition.
    pub fn is_complete(&self) -> bool {
        self.next.iter().all(|row| row.iter().all(Option::is_some))
    }

    /// Totalizes the transition function. A single fresh dead state is added
    /// only if some transition was undefined; the language is unchanged.
    pub fn complete(&self) -> Dfa {
        if self.is_complete() {
            return self.clone();
        }
        let sink = self.num_states();
        let mut out = self.clone();
        out.next.push(vec![Some(sink); self.alphabet.len()]);
        for row in out.next.iter_mut() {
            for t in row.iter_mut() {
                if t.is_none() {
                    *t = Some(sink);
                }
            }
        }
        out
    }

    /// States from which no final state is reachable.
    pub fn dead_states(&self) -> BTreeSet<usize> {
        let n = self.num_states();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (q, row) in self.next.iter().enumerate() {
            for t in row.iter().flatten() {
                rev[*t].push(q);
            }
        }
        let mut alive = vec![false; n];
        let mut queue: VecDeque<usize> = self.finals.iter().copied().collect();
        for &f in &self.finals {
            alive[f] = true;
        }
        while let Some(q) = queue.pop_front() {
            for &p in &rev[q] {
                if !alive[p] {
                    alive[p] = true;
                    queue.push_back(p);
                }
            }
        }
        (0..n).filter(|&q| !alive[q]).collect()
    }

    /// States reachable from the initial state.
    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(q) = queue.pop_front() {
            for t in self.next[q].iter().flatten() {
                if !seen[*t] {
                    seen[*t] = true;
                    queue.push_back(*t);
                }
            }
        }
        seen
    }

    /// The minimal complete DFA of the language, renumbered canonically by
    /// breadth-first discovery order from the initial state with symbols in
    /// alphabet order.
    pub fn minimize(&self) -> Dfa {
        // Work on the reachable part of the completed automaton.
        let complete = self.complete();
        let reach = complete.reachable();
        let states: Vec<usize> = (0..complete.num_states()).filter(|&q| reach[q]).collect();
        let dense: HashMap<usize, usize> = states.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let n = states.len();
        let width = complete.alphabet.len();

        // Moore partition refinement, starting from finals vs non-finals.
        let mut class: Vec<usize> = states
            .iter()
            .map(|q| usize::from(complete.is_final(*q)))
            .collect();
        loop {
            let mut sig_to_class: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
            let mut next_class = vec![0usize; n];
            for (i, &q) in states.iter().enumerate() {
                let sig: Vec<usize> = (0..width)
                    .map(|a| class[dense[&complete.next[q][a].unwrap()]])
                    .collect();
                let fresh = sig_to_class.len();
                let c = *sig_to_class.entry((class[i], sig)).or_insert(fresh);
                next_class[i] = c;
            }
            let stable = next_class == class;
            class = next_class;
            if stable {
                break;
            }
        }

        // BFS renumbering of the quotient, symbols in alphabet order.
        let init_class = class[dense[&complete.initial]];
        let mut order: HashMap<usize, usize> = HashMap::new();
        order.insert(init_class, 0);
        // One representative per class suffices: all members agree on
        // successor classes by construction.
        let mut rep: HashMap<usize, usize> = HashMap::new();
        for (i, &q) in states.iter().enumerate() {
            rep.entry(class[i]).or_insert(q);
        }
        let mut queue = VecDeque::from([init_class]);
        while let Some(c) = queue.pop_front() {
            let q = rep[&c];
            for a in 0..width {
                let tc = class[dense[&complete.next[q][a].unwrap()]];
                if !order.contains_key(&tc) {
                    order.insert(tc, order.len());
                    queue.push_back(tc);
                }
            }
        }

        let m = order.len();
        let mut out = Dfa::new(complete.alphabet.clone(), m, 0).unwrap();
        for (&c, &idx) in &order {
            let q = rep[&c];
            if complete.is_final(q) {
                out.finals.insert(idx);
            }
            for a in 0..width {
                let tc = class[dense[&complete.next[q][a].unwrap()]];
                out.next[idx][a] = Some(order[&tc]);
            }
        }
        out
    }

    /// The minimal *partial* DFA: the canonical minimal complete DFA with its
    /// dead state removed (unless the dead state is initial, as for the empty
    /// language). Its state count is the smallest over all DFAs for the
    /// language when transitions may be left undefined.
    pub fn trim_minimal(&self) -> Dfa {
        let min = self.minimize();
        let dead = min.dead_states();
        let keep: Vec<usize> = (0..min.num_states())
            .filter(|q| !dead.contains(q) || *q == min.initial)
            .collect();
        let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let mut out = Dfa::new(min.alphabet.clone(), keep.len(), remap[&min.initial]).unwrap();
        for &q in &keep {
            if min.is_final(q) {
                out.finals.insert(remap[&q]);
            }
            for a in 0..min.alphabet.len() {
                if let Some(t) = min.next[q][a] {
                    if let Some(&ti) = remap.get(&t) {
                        out.next[remap[&q]][a] = Some(ti);
                    }
                }
            }
        }
        out
    }

    /// Language equivalence with a shortest counterexample on failure.
    ///
    /// The counterexample is the first word, in breadth-first order with
    /// symbols in alphabet order, accepted by exactly one automaton.
    pub fn equivalent(&self, other: &Dfa) -> Result<Equivalence, AutomatonError> {
        if self.alphabet != other.alphabet {
            return Err(AutomatonError::AlphabetMismatch(
                self.alphabet.to_header(),
                other.alphabet.to_header(),
            ));
        }
        let a = self.complete();
        let b = other.complete();
        let width = a.alphabet.len();
        let start = (a.initial, b.initial);
        let mut parent: HashMap<(usize, usize), ((usize, usize), usize)> = HashMap::new();
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some((qa, qb)) = queue.pop_front() {
            if a.is_final(qa) != b.is_final(qb) {
                // Rebuild the word along the parent chain.
                let mut word_rev = Vec::new();
                let mut cur = (qa, qb);
                while cur != start {
                    let (prev, sym) = parent[&cur];
                    word_rev.push(a.alphabet.symbol(sym).to_string());
                    cur = prev;
                }
                word_rev.reverse();
                return Ok(Equivalence::Counterexample(word_rev));
            }
            for sym in 0..width {
                let nxt = (a.next[qa][sym].unwrap(), b.next[qb][sym].unwrap());
                if seen.insert(nxt) {
                    parent.insert(nxt, ((qa, qb), sym));
                    queue.push_back(nxt);
                }
            }
        }
        Ok(Equivalence::Equal)
    }

    /// Serializes to the DFA text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "dfa {} {}", self.num_states(), self.alphabet.to_header()).unwrap();
        writeln!(s, "initial {}", self.initial).unwrap();
        let finals: Vec<String> = self.finals.iter().map(|q| q.to_string()).collect();
        writeln!(s, "finals {}", finals.join(" ")).unwrap();
        for (q, row) in self.next.iter().enumerate() {
            for (a, t) in row.iter().enumerate() {
                if let Some(t) = t {
                    writeln!(s, "{} {} {}", q, self.alphabet.symbol(a), t).unwrap();
                }
            }
        }
        s
    }

    /// Parses the DFA text format:
    ///
    /// ```text
    /// dfa <num_states> <alphabet as comma-separated symbols>
    /// initial <index>
    /// finals <space-separated indices>
    /// <src> <symbol> <dst>
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(input: &str) -> Result<Dfa, ParseError> {
        let mut lines = content_lines(input);
        let (ln, header) = lines
            .next()
            .ok_or_else(|| ParseError::Truncated("missing dfa header".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("dfa") {
            return Err(ParseError::syntax(ln, "expected `dfa <n> <alphabet>`"));
        }
        let n: usize = parse_field(ln, parts.next(), "state count")?;
        let alpha_str = parts
            .next()
            .ok_or_else(|| ParseError::syntax(ln, "missing alphabet"))?;
        let alphabet = Alphabet::new(alpha_str.split(','))
            .map_err(|e| ParseError::Semantic { line: ln, source: e })?;

        let (ln, init_line) = lines
            .next()
            .ok_or_else(|| ParseError::Truncated("missing initial line".into()))?;
        let init = init_line
            .strip_prefix("initial")
            .ok_or_else(|| ParseError::syntax(ln, "expected `initial <index>`"))?;
        let initial: usize = parse_field(ln, Some(init.trim()), "initial state")?;
        let mut dfa =
            Dfa::new(alphabet, n, initial).map_err(|e| ParseError::Semantic { line: ln, source: e })?;

        let (ln, finals_line) = lines
            .next()
            .ok_or_else(|| ParseError::Truncated("missing finals line".into()))?;
        let finals = finals_line
            .strip_prefix("finals")
            .ok_or_else(|| ParseError::syntax(ln, "expected `finals <indices>`"))?;
        for tok in finals.split_whitespace() {
            let q: usize = parse_field(ln, Some(tok), "final state")?;
            dfa.set_final(q)
                .map_err(|e| ParseError::Semantic { line: ln, source: e })?;
        }

        for (ln, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(ParseError::syntax(ln, "expected `<src> <symbol> <dst>`"));
            }
            let src: usize = parse_field(ln, Some(toks[0]), "source state")?;
            let dst: usize = parse_field(ln, Some(toks[2]), "target state")?;
            dfa.add_transition(src, toks[1], dst)
                .map_err(|e| ParseError::Semantic { line: ln, source: e })?;
        }
        Ok(dfa)
    }
}

/// Iterator over non-blank, non-comment lines with 1-based line numbers.
pub(crate) fn content_lines(input: &str) -> impl Iterator<Item = (usize, &str)> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    line: usize,
    field: Option<&str>,
    what: &str,
) -> Result<T, ParseError> {
    field
        .ok_or_else(|| ParseError::syntax(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| ParseError::syntax(line, format!("invalid {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal partial DFA of a⁺ over {a,b}: states {0,1}, 0-a→1, 1-a→1.
    pub(crate) fn aplus() -> Dfa {
        let mut d = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 2, 0).unwrap();
        d.add_transition(0, "a", 1).unwrap();
        d.add_transition(1, "a", 1).unwrap();
        d.set_final(1).unwrap();
        d
    }

    /// Minimal partial DFA of a*b over {a,b}: 0-a→0, 0-b→1.
    pub(crate) fn astarb() -> Dfa {
        let mut d = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 2, 0).unwrap();
        d.add_transition(0, "a", 0).unwrap();
        d.add_transition(0, "b", 1).unwrap();
        d.set_final(1).unwrap();
        d
    }

    fn astar() -> Dfa {
        let mut d = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 1, 0).unwrap();
        d.add_transition(0, "a", 0).unwrap();
        d.set_final(0).unwrap();
        d
    }

    #[test]
    fn membership_on_aplus() {
        let d = aplus();
        assert!(d.accepts(&["a"]).unwrap());
        assert!(!d.accepts::<&str>(&[]).unwrap());
        // No b-transition defined: the run falls off.
        assert!(!d.accepts(&["a", "b"]).unwrap());
        assert!(matches!(
            d.accepts(&["c"]),
            Err(AutomatonError::UnknownSymbol(_))
        ));
    }

    #[test]
    fn completion_adds_one_sink() {
        let d = astarb();
        let c = d.complete();
        assert_eq!(c.num_states(), 3);
        assert!(c.is_complete());
        // Idempotent on already-total automata.
        assert_eq!(c.complete(), c);
        // A transitionless automaton gains a sink that everything enters.
        let lonely = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 1, 0).unwrap();
        let lc = lonely.complete();
        assert_eq!(lc.num_states(), 2);
        assert_eq!(lc.step(0, 0), Some(1));
        assert_eq!(lc.step(1, 1), Some(1));
    }

    #[test]
    fn minimize_astarb_complete_is_fixed_point() {
        let c = astarb().complete();
        let m = c.minimize();
        assert_eq!(m.num_states(), 3);
        assert!(m.equivalent(&c).unwrap().is_equal());
        // Idempotent bit for bit.
        assert_eq!(m.minimize(), m);
    }

    #[test]
    fn minimize_drops_unreachable_copy() {
        // Disjoint union of two copies of the a⁺ DFA, initial in copy 1.
        let mut d = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 4, 0).unwrap();
        d.add_transition(0, "a", 1).unwrap();
        d.add_transition(1, "a", 1).unwrap();
        d.add_transition(2, "a", 3).unwrap();
        d.add_transition(3, "a", 3).unwrap();
        d.set_final(1).unwrap();
        d.set_final(3).unwrap();
        let m = d.minimize();
        assert_eq!(m.num_states(), 3);
        assert!(m.equivalent(&aplus()).unwrap().is_equal());
    }

    #[test]
    fn minimize_empty_language() {
        let d = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 3, 0).unwrap();
        let m = d.minimize();
        assert_eq!(m.num_states(), 1);
        assert!(m.finals().is_empty());
        assert!(m.is_complete());
    }

    #[test]
    fn equivalence_verdicts() {
        let d = aplus();
        assert!(d.equivalent(&d).unwrap().is_equal());
        match d.equivalent(&astar()).unwrap() {
            Equivalence::Counterexample(w) => assert!(w.is_empty()),
            Equivalence::Equal => panic!("a⁺ equals a*?"),
        }
        let other = Dfa::new(Alphabet::new(["a"]).unwrap(), 1, 0).unwrap();
        assert!(d.equivalent(&other).is_err());
    }

    #[test]
    fn counterexample_is_shortest_lex_least() {
        // L(d1) = a⁺, L(d2) = a⁺ ∪ {b}: difference is {b}.
        let mut d2 = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 3, 0).unwrap();
        d2.add_transition(0, "a", 1).unwrap();
        d2.add_transition(1, "a", 1).unwrap();
        d2.add_transition(0, "b", 2).unwrap();
        d2.set_final(1).unwrap();
        d2.set_final(2).unwrap();
        match aplus().equivalent(&d2).unwrap() {
            Equivalence::Counterexample(w) => assert_eq!(w, vec!["b".to_string()]),
            Equivalence::Equal => panic!(),
        }
    }

    #[test]
    fn dead_state_sets() {
        let c = astarb().complete().minimize();
        let dead = c.dead_states();
        assert_eq!(dead.len(), 1);
        // The sink is the only state that cannot reach the final state.
        for q in 0..c.num_states() {
            let is_dead = dead.contains(&q);
            assert_eq!(is_dead, q != c.initial() && !c.is_final(q) && c.step(q, 0) == Some(q));
        }

        let no_finals = Dfa::new(Alphabet::new(["a"]).unwrap(), 2, 0).unwrap();
        assert_eq!(no_finals.dead_states().len(), 2);

        // (a|b)*: single accepting state, no dead states.
        let mut all = Dfa::new(Alphabet::new(["a", "b"]).unwrap(), 1, 0).unwrap();
        all.add_transition(0, "a", 0).unwrap();
        all.add_transition(0, "b", 0).unwrap();
        all.set_final(0).unwrap();
        assert!(all.minimize().dead_states().is_empty());
    }

    #[test]
    fn trim_minimal_sizes() {
        assert_eq!(aplus().trim_minimal().num_states(), 2);
        assert_eq!(astarb().trim_minimal().num_states(), 2);
        // Empty language keeps its (dead) initial state.
        let empty = Dfa::new(Alphabet::new(["a"]).unwrap(), 2, 0).unwrap();
        assert_eq!(empty.trim_minimal().num_states(), 1);
    }

    #[test]
    fn text_round_trip() {
        for d in [aplus(), astarb(), astar()] {
            let parsed = Dfa::parse(&d.to_text()).unwrap();
            assert_eq!(parsed, d);
        }
        assert!(Dfa::parse("nonsense").is_err());
        assert!(Dfa::parse("dfa 2 a,b\ninitial 5\nfinals\n").is_err());
    }
}
