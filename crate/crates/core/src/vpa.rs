//! Visibly pushdown automata.
//!
//! The input symbol alone dictates the stack operation: call symbols push,
//! return symbols pop, internal symbols leave the stack alone. A return
//! attempted on the empty stack is a rejecting dead end, and acceptance
//! does not require the final configuration to have an empty stack.
//!
//! The size of a VPA is its number of states; the stack alphabet is
//! reported as metadata only.

use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::cmp::Reverse;
use std::fmt::Write as _;

use crate::alphabet::Word;
use crate::dfa::{content_lines, parse_field, Equivalence};
use crate::error::{AutomatonError, ParseError};

/// An alphabet partitioned into call, return and internal symbols.
///
/// The three sets are pairwise disjoint and at least one is non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisiblyAlphabet {
    calls: Vec<String>,
    returns: Vec<String>,
    internals: Vec<String>,
    classes: HashMap<String, SymbolClass>,
}

/// Where a symbol lives in the partition, with its index inside that class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolClass {
    Call(usize),
    Return(usize),
    Internal(usize),
}

impl VisiblyAlphabet {
    pub fn new<S: Into<String>>(
        calls: Vec<S>,
        returns: Vec<S>,
        internals: Vec<S>,
    ) -> Result<VisiblyAlphabet, AutomatonError> {
        let calls: Vec<String> = calls.into_iter().map(Into::into).collect();
        let returns: Vec<String> = returns.into_iter().map(Into::into).collect();
        let internals: Vec<String> = internals.into_iter().map(Into::into).collect();
        if calls.is_empty() && returns.is_empty() && internals.is_empty() {
            return Err(AutomatonError::Invalid(
                "visibly pushdown alphabet must have at least one symbol".into(),
            ));
        }
        let mut classes = HashMap::new();
        let groups: [(&[String], fn(usize) -> SymbolClass); 3] = [
            (&calls, SymbolClass::Call),
            (&returns, SymbolClass::Return),
            (&internals, SymbolClass::Internal),
        ];
        for (group, make) in groups {
            for (i, s) in group.iter().enumerate() {
                if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == ',') {
                    return Err(AutomatonError::BadSymbol(s.clone()));
                }
                if classes.insert(s.clone(), make(i)).is_some() {
                    return Err(AutomatonError::DuplicateSymbol(s.clone()));
                }
            }
        }
        Ok(VisiblyAlphabet {
            calls,
            returns,
            internals,
            classes,
        })
    }

    pub fn classify(&self, symbol: &str) -> Option<SymbolClass> {
        self.classes.get(symbol).copied()
    }

    pub fn calls(&self) -> &[String] {
        &self.calls
    }

    pub fn returns(&self) -> &[String] {
        &self.returns
    }

    pub fn internals(&self) -> &[String] {
        &self.internals
    }
}

/// `(from, call symbol, target, pushed stack symbol)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallRule {
    pub from: usize,
    pub symbol: usize,
    pub target: usize,
    pub push: usize,
}

/// `(from, return symbol, popped stack symbol, target)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReturnRule {
    pub from: usize,
    pub symbol: usize,
    pub pop: usize,
    pub target: usize,
}

/// `(from, internal symbol, target)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct InternalRule {
    pub from: usize,
    pub symbol: usize,
    pub target: usize,
}

/// Witness of a determinism violation: two rules (or two initial states)
/// that can fire on the same input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeterminismViolation {
    MultipleInitials(usize, usize),
    CallConflict(CallRule, CallRule),
    ReturnConflict(ReturnRule, ReturnRule),
    InternalConflict(InternalRule, InternalRule),
}

/// A visibly pushdown automaton over dense state indices.
///
/// Nondeterministic VPAs may be represented, but every language-level
/// operation (membership, product, equivalence) requires determinism and
/// fails fast otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vpa {
    alphabet: VisiblyAlphabet,
    num_states: usize,
    initials: BTreeSet<usize>,
    finals: BTreeSet<usize>,
    stack_symbols: Vec<String>,
    calls: Vec<CallRule>,
    returns: Vec<ReturnRule>,
    internals: Vec<InternalRule>,
}

impl Vpa {
    pub fn new<S: Into<String>>(
        alphabet: VisiblyAlphabet,
        num_states: usize,
        stack_symbols: Vec<S>,
    ) -> Result<Vpa, AutomatonError> {
        let stack_symbols: Vec<String> = stack_symbols.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for s in &stack_symbols {
            if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == ',') {
                return Err(AutomatonError::BadSymbol(s.clone()));
            }
            if !seen.insert(s.clone()) {
                return Err(AutomatonError::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Vpa {
            alphabet,
            num_states,
            initials: BTreeSet::new(),
            finals: BTreeSet::new(),
            stack_symbols,
            calls: Vec::new(),
            returns: Vec::new(),
            internals: Vec::new(),
        })
    }

    pub fn alphabet(&self) -> &VisiblyAlphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initials(&self) -> &BTreeSet<usize> {
        &self.initials
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn stack_symbols(&self) -> &[String] {
        &self.stack_symbols
    }

    pub fn call_rules(&self) -> &[CallRule] {
        &self.calls
    }

    pub fn return_rules(&self) -> &[ReturnRule] {
        &self.returns
    }

    pub fn internal_rules(&self) -> &[InternalRule] {
        &self.internals
    }

    fn check_state(&self, q: usize) -> Result<(), AutomatonError> {
        if q >= self.num_states {
            return Err(AutomatonError::StateOutOfRange(q, self.num_states));
        }
        Ok(())
    }

    pub fn add_initial(&mut self, q: usize) -> Result<(), AutomatonError> {
        self.check_state(q)?;
        self.initials.insert(q);
        Ok(())
    }

    pub fn add_final(&mut self, q: usize) -> Result<(), AutomatonError> {
        self.check_state(q)?;
        self.finals.insert(q);
        Ok(())
    }

    pub fn add_call(
        &mut self,
        from: usize,
        symbol: &str,
        target: usize,
        push: &str,
    ) -> Result<(), AutomatonError> {
        self.check_state(from)?;
        self.check_state(target)?;
        let symbol = match self.alphabet.classify(symbol) {
            Some(SymbolClass::Call(i)) => i,
            _ => return Err(AutomatonError::UnknownSymbol(symbol.to_string())),
        };
        let push = self
            .stack_symbols
            .iter()
            .position(|s| s == push)
            .ok_or_else(|| AutomatonError::UnknownSymbol(push.to_string()))?;
        self.calls.push(CallRule {
            from,
            symbol,
            target,
            push,
        });
        Ok(())
    }

    pub fn add_return(
        &mut self,
        from: usize,
        symbol: &str,
        pop: &str,
        target: usize,
    ) -> Result<(), AutomatonError> {
        self.check_state(from)?;
        self.check_state(target)?;
        let symbol = match self.alphabet.classify(symbol) {
            Some(SymbolClass::Return(i)) => i,
            _ => return Err(AutomatonError::UnknownSymbol(symbol.to_string())),
        };
        let pop = self
            .stack_symbols
            .iter()
            .position(|s| s == pop)
            .ok_or_else(|| AutomatonError::UnknownSymbol(pop.to_string()))?;
        self.returns.push(ReturnRule {
            from,
            symbol,
            pop,
            target,
        });
        Ok(())
    }

    pub fn add_internal(&mut self, from: usize, symbol: &str, target: usize) -> Result<(), AutomatonError> {
        self.check_state(from)?;
        self.check_state(target)?;
        let symbol = match self.alphabet.classify(symbol) {
            Some(SymbolClass::Internal(i)) => i,
            _ => return Err(AutomatonError::UnknownSymbol(symbol.to_string())),
        };
        self.internals.push(InternalRule {
            from,
            symbol,
            target,
        });
        Ok(())
    }

    /// Checks the three determinism clauses plus uniqueness of the initial
    /// state, returning the first offending rule pair.
    pub fn check_deterministic(&self) -> Result<(), DeterminismViolation> {
        let mut inits = self.initials.iter();
        if let (Some(&a), Some(&b)) = (inits.next(), inits.next()) {
            return Err(DeterminismViolation::MultipleInitials(a, b));
        }
        let mut call_seen: HashMap<(usize, usize), CallRule> = HashMap::new();
        for r in &self.calls {
            if let Some(prev) = call_seen.insert((r.from, r.symbol), *r) {
                if (prev.target, prev.push) != (r.target, r.push) {
                    return Err(DeterminismViolation::CallConflict(prev, *r));
                }
            }
        }
        let mut ret_seen: HashMap<(usize, usize, usize), ReturnRule> = HashMap::new();
        for r in &self.returns {
            if let Some(prev) = ret_seen.insert((r.from, r.symbol, r.pop), *r) {
                if prev.target != r.target {
                    return Err(DeterminismViolation::ReturnConflict(prev, *r));
                }
            }
        }
        let mut int_seen: HashMap<(usize, usize), InternalRule> = HashMap::new();
        for r in &self.internals {
            if let Some(prev) = int_seen.insert((r.from, r.symbol), *r) {
                if prev.target != r.target {
                    return Err(DeterminismViolation::InternalConflict(prev, *r));
                }
            }
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.check_deterministic().is_ok()
    }

    /// Renders a determinism violation with symbol names.
    pub fn describe_violation(&self, v: &DeterminismViolation) -> String {
        match v {
            DeterminismViolation::MultipleInitials(a, b) => {
                format!("two initial states: {a} and {b}")
            }
            DeterminismViolation::CallConflict(x, y) => format!(
                "call rules ({}, {}, {}, {}) and ({}, {}, {}, {})",
                x.from,
                self.alphabet.calls()[x.symbol],
                x.target,
                self.stack_symbols[x.push],
                y.from,
                self.alphabet.calls()[y.symbol],
                y.target,
                self.stack_symbols[y.push],
            ),
            DeterminismViolation::ReturnConflict(x, y) => format!(
                "return rules ({}, {}, {}, {}) and ({}, {}, {}, {})",
                x.from,
                self.alphabet.returns()[x.symbol],
                self.stack_symbols[x.pop],
                x.target,
                y.from,
                self.alphabet.returns()[y.symbol],
                self.stack_symbols[y.pop],
                y.target,
            ),
            DeterminismViolation::InternalConflict(x, y) => format!(
                "internal rules ({}, {}, {}) and ({}, {}, {})",
                x.from,
                self.alphabet.internals()[x.symbol],
                x.target,
                y.from,
                self.alphabet.internals()[y.symbol],
                y.target,
            ),
        }
    }

    fn require_deterministic(&self) -> Result<(), AutomatonError> {
        self.check_deterministic()
            .map_err(|v| AutomatonError::Nondeterministic(self.describe_violation(&v)))
    }

    fn call_lookup(&self) -> HashMap<(usize, usize), (usize, usize)> {
        self.calls
            .iter()
            .map(|r| ((r.from, r.symbol), (r.target, r.push)))
            .collect()
    }

    fn return_lookup(&self) -> HashMap<(usize, usize, usize), usize> {
        self.returns
            .iter()
            .map(|r| ((r.from, r.symbol, r.pop), r.target))
            .collect()
    }

    fn internal_lookup(&self) -> HashMap<(usize, usize), usize> {
        self.internals
            .iter()
            .map(|r| ((r.from, r.symbol), r.target))
            .collect()
    }

    /// Membership for deterministic VPAs: runs the unique computation from
    /// `(q0, ε)`. A missing rule or a return on the empty stack rejects.
    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> Result<bool, AutomatonError> {
        self.require_deterministic()?;
        let &q0 = match self.initials.iter().next() {
            Some(q) => q,
            None => return Ok(false),
        };
        let calls = self.call_lookup();
        let rets = self.return_lookup();
        let ints = self.internal_lookup();
        let mut q = q0;
        let mut stack: Vec<usize> = Vec::new();
        for s in word {
            let class = self
                .alphabet
                .classify(s.as_ref())
                .ok_or_else(|| AutomatonError::UnknownSymbol(s.as_ref().to_string()))?;
            match class {
                SymbolClass::Call(c) => match calls.get(&(q, c)) {
                    Some(&(p, gamma)) => {
                        stack.push(gamma);
                        q = p;
                    }
                    None => return Ok(false),
                },
                SymbolClass::Return(r) => {
                    let gamma = match stack.pop() {
                        Some(g) => g,
                        None => return Ok(false),
                    };
                    match rets.get(&(q, r, gamma)) {
                        Some(&p) => q = p,
                        None => return Ok(false),
                    }
                }
                SymbolClass::Internal(a) => match ints.get(&(q, a)) {
                    Some(&p) => q = p,
                    None => return Ok(false),
                },
            }
        }
        Ok(self.finals.contains(&q))
    }

    /// The well-matched reachability relation: `(q, q')` is in the result
    /// iff some word in which every call is matched by its return labels a
    /// run from `q` to `q'`.
    pub fn summaries(&self) -> BTreeSet<(usize, usize)> {
        let n = self.num_states;
        let mut fwd: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut rev: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
        let mut add = |fwd: &mut Vec<BTreeSet<usize>>,
                       rev: &mut Vec<BTreeSet<usize>>,
                       queue: &mut VecDeque<(usize, usize)>,
                       q: usize,
                       t: usize| {
            if fwd[q].insert(t) {
                rev[t].insert(q);
                queue.push_back((q, t));
            }
        };
        for q in 0..n {
            add(&mut fwd, &mut rev, &mut queue, q, q);
        }
        // Index the rules for the saturation triggers.
        let mut ints_from: Vec<Vec<&InternalRule>> = vec![Vec::new(); n];
        for r in &self.internals {
            ints_from[r.from].push(r);
        }
        let mut calls_from: Vec<Vec<&CallRule>> = vec![Vec::new(); n];
        let mut calls_into: Vec<Vec<&CallRule>> = vec![Vec::new(); n];
        for r in &self.calls {
            calls_from[r.from].push(r);
            calls_into[r.target].push(r);
        }
        let mut rets_from: Vec<Vec<&ReturnRule>> = vec![Vec::new(); n];
        for r in &self.returns {
            rets_from[r.from].push(r);
        }

        while let Some((x, y)) = queue.pop_front() {
            // Extend (x, y) by one internal step.
            for r in &ints_from[y] {
                add(&mut fwd, &mut rev, &mut queue, x, r.target);
            }
            // Extend (x, y) by a matched call/return block starting at y.
            for c in &calls_from[y] {
                let inner: Vec<usize> = fwd[c.target].iter().copied().collect();
                for p2 in inner {
                    for r in &rets_from[p2] {
                        if r.pop == c.push {
                            add(&mut fwd, &mut rev, &mut queue, x, r.target);
                        }
                    }
                }
            }
            // (x, y) as the inner part of a block: calls into x, returns from y.
            for c in &calls_into[x] {
                for r in &rets_from[y] {
                    if r.pop == c.push {
                        let outers: Vec<usize> = rev[c.from].iter().copied().collect();
                        for q in outers {
                            add(&mut fwd, &mut rev, &mut queue, q, r.target);
                        }
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        for (q, set) in fwd.iter().enumerate() {
            for &t in set {
                out.insert((q, t));
            }
        }
        out
    }

    /// A shortest accepted word, or `None` when the language is empty.
    ///
    /// Unmatched calls are allowed (acceptance ignores the remaining stack),
    /// so reachability alternates well-matched summary jumps with pending
    /// call steps. Ties between equal-length witnesses are broken by state
    /// and rule order, which makes the result deterministic.
    pub fn shortest_accepted_word(&self) -> Option<Word> {
        let searcher = WitnessSearch::new(self);
        searcher.shortest_accepted()
    }

    pub fn is_language_empty(&self) -> bool {
        self.shortest_accepted_word().is_none()
    }

    /// Adds a non-final sink state (if needed) so that every call, return
    /// and internal lookup is total. The language is unchanged; note that a
    /// return on the empty stack still rejects.
    fn complete(&self) -> Vpa {
        let calls = self.call_lookup();
        let rets = self.return_lookup();
        let ints = self.internal_lookup();
        let n = self.num_states;
        let mut missing = false;
        'scan: for q in 0..n {
            for c in 0..self.alphabet.calls().len() {
                if !calls.contains_key(&(q, c)) {
                    missing = true;
                    break 'scan;
                }
            }
            for a in 0..self.alphabet.internals().len() {
                if !ints.contains_key(&(q, a)) {
                    missing = true;
                    break 'scan;
                }
            }
            for r in 0..self.alphabet.returns().len() {
                for g in 0..self.stack_symbols.len() {
                    if !rets.contains_key(&(q, r, g)) {
                        missing = true;
                        break 'scan;
                    }
                }
            }
        }
        if !missing {
            return self.clone();
        }

        let mut out = self.clone();
        let sink = n;
        out.num_states = n + 1;
        // Calls need something to push; add a reserved stack symbol if the
        // automaton has none.
        if out.stack_symbols.is_empty() && !out.alphabet.calls().is_empty() {
            out.stack_symbols.push(fresh_name("sink", &out.stack_symbols));
        }
        let width_g = out.stack_symbols.len();
        for q in 0..=n {
            for c in 0..out.alphabet.calls().len() {
                if q == sink || !calls.contains_key(&(q, c)) {
                    out.calls.push(CallRule {
                        from: q,
                        symbol: c,
                        target: sink,
                        push: 0,
                    });
                }
            }
            for a in 0..out.alphabet.internals().len() {
                if q == sink || !ints.contains_key(&(q, a)) {
                    out.internals.push(InternalRule {
                        from: q,
                        symbol: a,
                        target: sink,
                    });
                }
            }
            for r in 0..out.alphabet.returns().len() {
                for g in 0..width_g {
                    if q == sink || !rets.contains_key(&(q, r, g)) {
                        out.returns.push(ReturnRule {
                            from: q,
                            symbol: r,
                            pop: g,
                            target: sink,
                        });
                    }
                }
            }
        }
        out
    }

    /// Synchronized product of two deterministic VPAs over the same
    /// partitioned alphabet. Both factors are completed first, so the
    /// product tracks each factor even where the other falls off. Product
    /// finals are the pairs where `final_pred(a final, b final)` holds;
    /// completion sinks are never final.
    pub fn product(
        &self,
        other: &Vpa,
        final_pred: impl Fn(bool, bool) -> bool,
    ) -> Result<Vpa, AutomatonError> {
        if self.alphabet != other.alphabet {
            return Err(AutomatonError::AlphabetMismatch(
                format!("{:?}", (self.alphabet.calls(), self.alphabet.returns(), self.alphabet.internals())),
                format!("{:?}", (other.alphabet.calls(), other.alphabet.returns(), other.alphabet.internals())),
            ));
        }
        self.require_deterministic()?;
        other
            .check_deterministic()
            .map_err(|v| AutomatonError::Nondeterministic(other.describe_violation(&v)))?;

        let a = self.complete();
        let b = other.complete();
        let (na, nb) = (a.num_states, b.num_states);
        let (ga, gb) = (a.stack_symbols.len(), b.stack_symbols.len());
        let pair = |qa: usize, qb: usize| qa * nb + qb;
        let gpair = |x: usize, y: usize| x * gb + y;

        let mut stack_names = Vec::with_capacity(ga * gb);
        for x in 0..ga {
            for y in 0..gb {
                stack_names.push(format!("g{x}.{y}"));
            }
        }
        let mut prod = Vpa::new(self.alphabet.clone(), na * nb, stack_names)?;

        let ac = a.call_lookup();
        let bc = b.call_lookup();
        let ar = a.return_lookup();
        let br = b.return_lookup();
        let ai = a.internal_lookup();
        let bi = b.internal_lookup();

        for qa in 0..na {
            for qb in 0..nb {
                let q = pair(qa, qb);
                for c in 0..self.alphabet.calls().len() {
                    if let (Some(&(pa, xa)), Some(&(pb, xb))) = (ac.get(&(qa, c)), bc.get(&(qb, c))) {
                        prod.calls.push(CallRule {
                            from: q,
                            symbol: c,
                            target: pair(pa, pb),
                            push: gpair(xa, xb),
                        });
                    }
                }
                for s in 0..self.alphabet.internals().len() {
                    if let (Some(&pa), Some(&pb)) = (ai.get(&(qa, s)), bi.get(&(qb, s))) {
                        prod.internals.push(InternalRule {
                            from: q,
                            symbol: s,
                            target: pair(pa, pb),
                        });
                    }
                }
                for r in 0..self.alphabet.returns().len() {
                    for xa in 0..ga {
                        for xb in 0..gb {
                            if let (Some(&pa), Some(&pb)) =
                                (ar.get(&(qa, r, xa)), br.get(&(qb, r, xb)))
                            {
                                prod.returns.push(ReturnRule {
                                    from: q,
                                    symbol: r,
                                    pop: gpair(xa, xb),
                                    target: pair(pa, pb),
                                });
                            }
                        }
                    }
                }
                if final_pred(a.finals.contains(&qa), b.finals.contains(&qb)) {
                    prod.finals.insert(q);
                }
            }
        }
        for &ia in &a.initials {
            for &ib in &b.initials {
                prod.initials.insert(pair(ia, ib));
            }
        }
        Ok(prod)
    }

    /// Polynomial-time language equivalence of deterministic VPAs: the
    /// product with xor-finals is checked for emptiness, and its witness is
    /// the counterexample (a word accepted by exactly one automaton).
    pub fn equivalent(&self, other: &Vpa) -> Result<Equivalence, AutomatonError> {
        let diff = self.product(other, |fa, fb| fa != fb)?;
        Ok(match diff.shortest_accepted_word() {
            None => Equivalence::Equal,
            Some(w) => Equivalence::Counterexample(w),
        })
    }

    /// Serializes to the VPA text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "vpa {}", self.num_states).unwrap();
        writeln!(s, "calls {}", self.alphabet.calls().join(" ")).unwrap();
        writeln!(s, "returns {}", self.alphabet.returns().join(" ")).unwrap();
        writeln!(s, "internals {}", self.alphabet.internals().join(" ")).unwrap();
        writeln!(s, "stack {}", self.stack_symbols.join(" ")).unwrap();
        let fmt_set = |set: &BTreeSet<usize>| {
            set.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
        };
        writeln!(s, "initials {}", fmt_set(&self.initials)).unwrap();
        writeln!(s, "finals {}", fmt_set(&self.finals)).unwrap();
        for r in &self.calls {
            writeln!(
                s,
                "call {} {} {} {}",
                r.from,
                self.alphabet.calls()[r.symbol],
                r.target,
                self.stack_symbols[r.push]
            )
            .unwrap();
        }
        for r in &self.returns {
            writeln!(
                s,
                "ret {} {} {} {}",
                r.from,
                self.alphabet.returns()[r.symbol],
                self.stack_symbols[r.pop],
                r.target
            )
            .unwrap();
        }
        for r in &self.internals {
            writeln!(
                s,
                "int {} {} {}",
                r.from,
                self.alphabet.internals()[r.symbol],
                r.target
            )
            .unwrap();
        }
        s
    }

    /// Parses the VPA text format (see [`Vpa::to_text`]).
    pub fn parse(input: &str) -> Result<Vpa, ParseError> {
        let mut lines = content_lines(input);
        let (ln, header) = lines
            .next()
            .ok_or_else(|| ParseError::Truncated("missing vpa header".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("vpa") {
            return Err(ParseError::syntax(ln, "expected `vpa <num_states>`"));
        }
        let n: usize = parse_field(ln, parts.next(), "state count")?;

        let mut expect = |key: &str| -> Result<(usize, Vec<String>), ParseError> {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| ParseError::Truncated(format!("missing `{key}` line")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| ParseError::syntax(ln, format!("expected `{key} ...`")))?;
            Ok((ln, rest.split_whitespace().map(str::to_string).collect()))
        };
        let (cl, calls) = expect("calls")?;
        let (_, returns) = expect("returns")?;
        let (_, internals) = expect("internals")?;
        let (sl, stack) = expect("stack")?;
        let (il, initials) = expect("initials")?;
        let (fl, finals) = expect("finals")?;

        let alphabet = VisiblyAlphabet::new(calls, returns, internals)
            .map_err(|e| ParseError::Semantic { line: cl, source: e })?;
        let mut vpa =
            Vpa::new(alphabet, n, stack).map_err(|e| ParseError::Semantic { line: sl, source: e })?;
        for tok in initials {
            let q = parse_field(il, Some(&tok), "initial state")?;
            vpa.add_initial(q)
                .map_err(|e| ParseError::Semantic { line: il, source: e })?;
        }
        for tok in finals {
            let q = parse_field(fl, Some(&tok), "final state")?;
            vpa.add_final(q)
                .map_err(|e| ParseError::Semantic { line: fl, source: e })?;
        }

        for (ln, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| ParseError::syntax(ln, msg);
            match toks.as_slice() {
                ["call", q, a, t, g] => {
                    let q = parse_field(ln, Some(q), "state")?;
                    let t = parse_field(ln, Some(t), "state")?;
                    vpa.add_call(q, a, t, g)
                        .map_err(|e| ParseError::Semantic { line: ln, source: e })?;
                }
                ["ret", q, a, g, t] => {
                    let q = parse_field(ln, Some(q), "state")?;
                    let t = parse_field(ln, Some(t), "state")?;
                    vpa.add_return(q, a, g, t)
                        .map_err(|e| ParseError::Semantic { line: ln, source: e })?;
                }
                ["int", q, a, t] => {
                    let q = parse_field(ln, Some(q), "state")?;
                    let t = parse_field(ln, Some(t), "state")?;
                    vpa.add_internal(q, a, t)
                        .map_err(|e| ParseError::Semantic { line: ln, source: e })?;
                }
                _ => return Err(err("expected `call|ret|int` transition line")),
            }
        }
        Ok(vpa)
    }
}

fn fresh_name(base: &str, taken: &[String]) -> String {
    let mut name = base.to_string();
    while taken.contains(&name) {
        name.push('\'');
    }
    name
}

/// Shortest-witness search: Dijkstra over summary pairs (shortest
/// well-matched word per pair), then Dijkstra over states allowing pending
/// calls, with full word reconstruction.
struct WitnessSearch<'a> {
    vpa: &'a Vpa,
    ints_from: Vec<Vec<InternalRule>>,
    calls_from: Vec<Vec<CallRule>>,
    calls_into: Vec<Vec<CallRule>>,
    rets_from: Vec<Vec<ReturnRule>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairDeriv {
    Eps,
    Internal { prev: (usize, usize), rule: InternalRule },
    Block {
        prev: (usize, usize),
        call: CallRule,
        inner: (usize, usize),
        ret: ReturnRule,
    },
}

impl<'a> WitnessSearch<'a> {
    fn new(vpa: &'a Vpa) -> Self {
        let n = vpa.num_states;
        let mut ints_from = vec![Vec::new(); n];
        for r in &vpa.internals {
            ints_from[r.from].push(*r);
        }
        let mut calls_from = vec![Vec::new(); n];
        let mut calls_into = vec![Vec::new(); n];
        for r in &vpa.calls {
            calls_from[r.from].push(*r);
            calls_into[r.target].push(*r);
        }
        let mut rets_from = vec![Vec::new(); n];
        for r in &vpa.returns {
            rets_from[r.from].push(*r);
        }
        for v in ints_from.iter_mut() {
            v.sort();
        }
        for v in calls_from.iter_mut() {
            v.sort();
        }
        for v in calls_into.iter_mut() {
            v.sort();
        }
        for v in rets_from.iter_mut() {
            v.sort();
        }
        WitnessSearch {
            vpa,
            ints_from,
            calls_from,
            calls_into,
            rets_from,
        }
    }

    /// Shortest well-matched word per summary pair, seeded at the states
    /// where summaries can start in an initial run: initials and call
    /// targets.
    fn summary_distances(&self) -> HashMap<(usize, usize), (usize, PairDeriv)> {
        let mut seeds: BTreeSet<usize> = self.vpa.initials.iter().copied().collect();
        for r in &self.vpa.calls {
            seeds.insert(r.target);
        }
        let mut settled: HashMap<(usize, usize), (usize, PairDeriv)> = HashMap::new();
        let mut settled_by_first: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut settled_by_second: HashMap<usize, Vec<usize>> = HashMap::new();
        // Each heap entry carries its derivation through `derivs[seq]`; the
        // first pop per pair is a shortest derivation (ties resolved by pair
        // then insertion order, so the search is deterministic).
        let mut heap: BinaryHeap<Reverse<(usize, (usize, usize), usize)>> = BinaryHeap::new();
        let mut derivs: Vec<PairDeriv> = Vec::new();
        for &q in &seeds {
            heap.push(Reverse((0, (q, q), derivs.len())));
            derivs.push(PairDeriv::Eps);
        }
        while let Some(Reverse((d, pair, seq))) = heap.pop() {
            if settled.contains_key(&pair) {
                continue;
            }
            settled.insert(pair, (d, derivs[seq]));
            settled_by_first.entry(pair.0).or_default().push(pair.1);
            settled_by_second.entry(pair.1).or_default().push(pair.0);
            let (x, y) = pair;

            let mut push = |cand: (usize, usize),
                            len: usize,
                            deriv: PairDeriv,
                            heap: &mut BinaryHeap<Reverse<(usize, (usize, usize), usize)>>,
                            derivs: &mut Vec<PairDeriv>,
                            settled: &HashMap<(usize, usize), (usize, PairDeriv)>| {
                if settled.contains_key(&cand) {
                    return;
                }
                heap.push(Reverse((len, cand, derivs.len())));
                derivs.push(deriv);
            };

            for r in &self.ints_from[y] {
                push(
                    (x, r.target),
                    d + 1,
                    PairDeriv::Internal { prev: pair, rule: *r },
                    &mut heap,
                    &mut derivs,
                    &settled,
                );
            }
            // pair as the outer prefix of a block starting at y.
            for c in &self.calls_from[y] {
                if let Some(inners) = settled_by_first.get(&c.target) {
                    let inners = inners.clone();
                    for p2 in inners {
                        let (d2, _) = settled[&(c.target, p2)];
                        for r in &self.rets_from[p2] {
                            if r.pop == c.push {
                                push(
                                    (x, r.target),
                                    d + 1 + d2 + 1,
                                    PairDeriv::Block {
                                        prev: pair,
                                        call: *c,
                                        inner: (c.target, p2),
                                        ret: *r,
                                    },
                                    &mut heap,
                                    &mut derivs,
                                    &settled,
                                );
                            }
                        }
                    }
                }
            }
            // pair as the inner part of a block: calls into x, returns from y.
            for c in &self.calls_into[x] {
                for r in &self.rets_from[y] {
                    if r.pop != c.push {
                        continue;
                    }
                    if let Some(outers) = settled_by_second.get(&c.from) {
                        let outers = outers.clone();
                        for q in outers {
                            let (d1, _) = settled[&(q, c.from)];
                            push(
                                (q, r.target),
                                d1 + 1 + d + 1,
                                PairDeriv::Block {
                                    prev: (q, c.from),
                                    call: *c,
                                    inner: pair,
                                    ret: *r,
                                },
                                &mut heap,
                                &mut derivs,
                                &settled,
                            );
                        }
                    }
                }
            }
        }
        settled
    }

    fn expand_pair(
        &self,
        pair: (usize, usize),
        table: &HashMap<(usize, usize), (usize, PairDeriv)>,
        out: &mut Word,
    ) {
        match table[&pair].1 {
            PairDeriv::Eps => {}
            PairDeriv::Internal { prev, rule } => {
                self.expand_pair(prev, table, out);
                out.push(self.vpa.alphabet.internals()[rule.symbol].clone());
            }
            PairDeriv::Block { prev, call, inner, ret } => {
                self.expand_pair(prev, table, out);
                out.push(self.vpa.alphabet.calls()[call.symbol].clone());
                self.expand_pair(inner, table, out);
                out.push(self.vpa.alphabet.returns()[ret.symbol].clone());
            }
        }
    }

    fn shortest_accepted(&self) -> Option<Word> {
        #[derive(Clone, Copy)]
        enum StateDeriv {
            Init,
            Call { prev: usize, rule: CallRule },
            Jump { prev: usize, pair: (usize, usize) },
        }
        let summaries = self.summary_distances();
        let seeds: BTreeSet<usize> = {
            let mut s: BTreeSet<usize> = self.vpa.initials.iter().copied().collect();
            for r in &self.vpa.calls {
                s.insert(r.target);
            }
            s
        };
        // Jumps from seed states, grouped by source.
        let mut jumps: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for (&(q, t), &(d, _)) in &summaries {
            jumps.entry(q).or_default().push((t, d));
        }
        for v in jumps.values_mut() {
            v.sort();
        }

        let mut dist: HashMap<usize, (usize, StateDeriv)> = HashMap::new();
        let mut heap: BinaryHeap<Reverse<(usize, usize, usize)>> = BinaryHeap::new();
        let mut derivs: Vec<StateDeriv> = Vec::new();
        for &q in &self.vpa.initials {
            heap.push(Reverse((0, q, derivs.len())));
            derivs.push(StateDeriv::Init);
        }
        while let Some(Reverse((d, q, seq))) = heap.pop() {
            if dist.contains_key(&q) {
                continue;
            }
            dist.insert(q, (d, derivs[seq]));
            if seeds.contains(&q) {
                if let Some(js) = jumps.get(&q) {
                    for &(t, dj) in js {
                        if !dist.contains_key(&t) {
                            heap.push(Reverse((d + dj, t, derivs.len())));
                            derivs.push(StateDeriv::Jump { prev: q, pair: (q, t) });
                        }
                    }
                }
            }
            for c in &self.calls_from[q] {
                if !dist.contains_key(&c.target) {
                    heap.push(Reverse((d + 1, c.target, derivs.len())));
                    derivs.push(StateDeriv::Call { prev: q, rule: *c });
                }
            }
        }

        let best = self
            .vpa
            .finals
            .iter()
            .filter_map(|f| dist.get(f).map(|(d, _)| (*d, *f)))
            .min()?;
        let mut word = Vec::new();
        let mut chain = Vec::new();
        let mut cur = best.1;
        loop {
            let (_, deriv) = dist[&cur];
            match deriv {
                StateDeriv::Init => break,
                StateDeriv::Call { prev, rule } => {
                    chain.push((prev, StateDeriv::Call { prev, rule }));
                    cur = prev;
                }
                StateDeriv::Jump { prev, pair } => {
                    chain.push((prev, StateDeriv::Jump { prev, pair }));
                    cur = prev;
                }
            }
        }
        for (_, step) in chain.into_iter().rev() {
            match step {
                StateDeriv::Init => {}
                StateDeriv::Call { rule, .. } => {
                    word.push(self.vpa.alphabet.calls()[rule.symbol].clone());
                }
                StateDeriv::Jump { pair, .. } => {
                    self.expand_pair(pair, &summaries, &mut word);
                }
            }
        }
        Some(word)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_alphabet() -> VisiblyAlphabet {
        VisiblyAlphabet::new(vec!["c1", "c2"], vec!["r"], vec!["a", "b"]).unwrap()
    }

    /// The 5-state VPA for K = c1 a⁺ r ∪ c2 a*b r: graph states 0..2 host
    /// the 3-state immersion (0-a→1, 1-a→1, 1-b→2), 3 is initial, 4 final.
    pub(crate) fn k_vpa() -> Vpa {
        let mut v = Vpa::new(simple_alphabet(), 5, vec!["1", "2"]).unwrap();
        v.add_initial(3).unwrap();
        v.add_final(4).unwrap();
        v.add_call(3, "c1", 0, "1").unwrap();
        v.add_call(3, "c2", 1, "2").unwrap();
        v.add_internal(0, "a", 1).unwrap();
        v.add_internal(1, "a", 1).unwrap();
        v.add_internal(1, "b", 2).unwrap();
        v.add_return(1, "r", "1", 4).unwrap();
        v.add_return(2, "r", "2", 4).unwrap();
        v
    }

    #[test]
    fn alphabet_partition_is_disjoint() {
        assert!(VisiblyAlphabet::new(vec!["c"], vec!["c"], vec![]).is_err());
        assert!(VisiblyAlphabet::new(Vec::<&str>::new(), vec![], vec![]).is_err());
    }

    #[test]
    fn determinism_witnesses() {
        let v = k_vpa();
        assert!(v.is_deterministic());

        let mut two_inits = Vpa::new(simple_alphabet(), 2, vec!["A"]).unwrap();
        two_inits.add_initial(0).unwrap();
        two_inits.add_initial(1).unwrap();
        assert_eq!(
            two_inits.check_deterministic(),
            Err(DeterminismViolation::MultipleInitials(0, 1))
        );

        let mut conflict = Vpa::new(simple_alphabet(), 3, vec!["A"]).unwrap();
        conflict.add_initial(0).unwrap();
        conflict.add_call(0, "c1", 1, "A").unwrap();
        conflict.add_call(0, "c1", 2, "A").unwrap();
        match conflict.check_deterministic() {
            Err(DeterminismViolation::CallConflict(x, y)) => {
                assert_eq!((x.target, y.target), (1, 2));
            }
            other => panic!("expected call conflict, got {other:?}"),
        }
    }

    #[test]
    fn membership_on_k() {
        let v = k_vpa();
        assert!(v.accepts(&["c1", "a", "r"]).unwrap());
        assert!(!v.accepts(&["c1", "r"]).unwrap());
        assert!(v.accepts(&["c2", "b", "r"]).unwrap());
        assert!(v.accepts(&["c2", "a", "a", "b", "r"]).unwrap());
        assert!(!v.accepts(&["c1", "a", "r", "r"]).unwrap());
        assert!(!v.accepts(&["a"]).unwrap());
        assert!(matches!(
            v.accepts(&["z"]),
            Err(AutomatonError::UnknownSymbol(_))
        ));
    }

    #[test]
    fn empty_word_accepted_when_initial_is_final() {
        let mut v = Vpa::new(simple_alphabet(), 1, Vec::<&str>::new()).unwrap();
        v.add_initial(0).unwrap();
        v.add_final(0).unwrap();
        assert!(v.accepts::<&str>(&[]).unwrap());
    }

    #[test]
    fn summaries_internal_path() {
        let al = VisiblyAlphabet::new(Vec::<&str>::new(), vec![], vec!["a"]).unwrap();
        let mut v = Vpa::new(al, 3, Vec::<&str>::new()).unwrap();
        v.add_internal(0, "a", 1).unwrap();
        v.add_internal(1, "a", 2).unwrap();
        let r = v.summaries();
        let expected: BTreeSet<(usize, usize)> =
            [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)].into();
        assert_eq!(r, expected);
    }

    #[test]
    fn summaries_matched_block() {
        let al = VisiblyAlphabet::new(vec!["c"], vec!["r"], vec![]).unwrap();
        let mut v = Vpa::new(al, 3, vec!["A"]).unwrap();
        v.add_call(0, "c", 1, "A").unwrap();
        v.add_return(1, "r", "A", 2).unwrap();
        let r = v.summaries();
        assert!(r.contains(&(0, 2)));
        assert!(!r.contains(&(0, 1)));
    }

    #[test]
    fn summaries_on_k() {
        let v = k_vpa();
        let r = v.summaries();
        assert!(r.contains(&(3, 4)));
        let from_init: Vec<(usize, usize)> = r.iter().copied().filter(|p| p.0 == 3).collect();
        assert_eq!(from_init, vec![(3, 3), (3, 4)]);
    }

    #[test]
    fn emptiness_and_witnesses() {
        let mut no_finals = k_vpa();
        no_finals.finals.clear();
        assert!(no_finals.is_language_empty());

        let mut eps = Vpa::new(simple_alphabet(), 1, Vec::<&str>::new()).unwrap();
        eps.add_initial(0).unwrap();
        eps.add_final(0).unwrap();
        assert_eq!(eps.shortest_accepted_word(), Some(vec![]));

        let w = k_vpa().shortest_accepted_word().expect("K is non-empty");
        assert_eq!(w.len(), 3);
        assert!(k_vpa().accepts(&w).unwrap());
        assert_eq!(w.first().map(String::as_str), Some("c1"));
        assert_eq!(w.last().map(String::as_str), Some("r"));
    }

    #[test]
    fn product_self_difference_is_empty() {
        let v = k_vpa();
        let diff = v.product(&v, |fa, fb| fa != fb).unwrap();
        assert!(diff.is_language_empty());
        assert!(diff.num_states() <= (v.num_states() + 1) * (v.num_states() + 1));
    }

    #[test]
    fn product_detects_dropped_call() {
        let v = k_vpa();
        let mut v2 = k_vpa();
        v2.calls.retain(|c| c.symbol != 1);
        let diff = v.product(&v2, |fa, fb| fa != fb).unwrap();
        let w = diff.shortest_accepted_word().expect("c2-words differ");
        assert!(v.accepts(&w).unwrap() != v2.accepts(&w).unwrap());
    }

    #[test]
    fn equivalence_counterexample_c1_r() {
        // c1 a⁺ r versus c1 a* r: ε ∈ a* \ a⁺ gives "c1 r".
        let al = VisiblyAlphabet::new(vec!["c1"], vec!["r"], vec!["a"]).unwrap();
        let mut plus = Vpa::new(al.clone(), 4, vec!["1"]).unwrap();
        plus.add_initial(2).unwrap();
        plus.add_final(3).unwrap();
        plus.add_call(2, "c1", 0, "1").unwrap();
        plus.add_internal(0, "a", 1).unwrap();
        plus.add_internal(1, "a", 1).unwrap();
        plus.add_return(1, "r", "1", 3).unwrap();

        let mut star = Vpa::new(al, 3, vec!["1"]).unwrap();
        star.add_initial(1).unwrap();
        star.add_final(2).unwrap();
        star.add_call(1, "c1", 0, "1").unwrap();
        star.add_internal(0, "a", 0).unwrap();
        star.add_return(0, "r", "1", 2).unwrap();

        match plus.equivalent(&star).unwrap() {
            Equivalence::Counterexample(w) => {
                assert_eq!(w, vec!["c1".to_string(), "r".to_string()]);
            }
            Equivalence::Equal => panic!("languages differ"),
        }
        assert!(plus.equivalent(&plus).unwrap().is_equal());
    }

    #[test]
    fn text_round_trip() {
        let v = k_vpa();
        let parsed = Vpa::parse(&v.to_text()).unwrap();
        assert_eq!(parsed, v);
        assert!(Vpa::parse("vpa x").is_err());
    }
}
