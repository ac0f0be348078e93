//! The SCAN* command grammar.
//!
//! A command is an `and`-separated list of conjuncts, each conjunct an
//! `after`-separated chain of phrases. `after` binds tighter than `and`, so
//! `walk and run after look` groups as `walk and (run after look)`.
//!
//! ```text
//! command := chain ("and" chain)*
//! chain   := phrase ("after" phrase)*
//! phrase  := verb [modifier direction | direction] [repetition]
//! ```
//!
//! The same [`GrammarConfig`] also describes the original SCAN grammar
//! (four verbs, a `turn` verb, at most one conjunction), see
//! [`GrammarConfig::scan_legacy`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TURN: &str = "turn";
pub const LEFT: &str = "left";
pub const RIGHT: &str = "right";
pub const OPPOSITE: &str = "opposite";
pub const AROUND: &str = "around";
pub const AND: &str = "and";
pub const AFTER: &str = "after";

/// Number of primitives carried by the default SCAN* grammar.
pub const SCAN_STAR_PRIMITIVES: usize = 200;

const SCAN_VERBS: [&str; 4] = ["walk", "look", "run", "jump"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("invalid grammar config: {0}")]
    InvalidConfig(String),
    #[error("unparseable input at position {position}: {reason}")]
    UnparseableInput { position: usize, reason: String },
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("unknown primitive {0:?}")]
    UnknownPrimitive(String),
    #[error("cannot read grammar config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Left, Direction::Right];

    pub fn surface(self) -> &'static str {
        match self {
            Direction::Left => LEFT,
            Direction::Right => RIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modifier {
    Opposite,
    Around,
}

impl Modifier {
    pub fn surface(self) -> &'static str {
        match self {
            Modifier::Opposite => OPPOSITE,
            Modifier::Around => AROUND,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conjunction {
    And,
    After,
}

impl Conjunction {
    pub fn surface(self) -> &'static str {
        match self {
            Conjunction::And => AND,
            Conjunction::After => AFTER,
        }
    }
}

/// Action tokens emitted for the two turn directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directions {
    pub left: String,
    pub right: String,
}

impl Directions {
    pub fn action(&self, dir: Direction) -> &str {
        match dir {
            Direction::Left => &self.left,
            Direction::Right => &self.right,
        }
    }
}

impl Default for Directions {
    fn default() -> Self {
        Directions {
            left: "I_TURN_LEFT".to_string(),
            right: "I_TURN_RIGHT".to_string(),
        }
    }
}

/// Serializable description of a SCAN-family grammar.
///
/// Surface tokens of the function words (`left`, `right`, `opposite`,
/// `around`, `and`, `after`, `turn`) are fixed; the config selects which of
/// them are enabled and which action tokens they map to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarConfig {
    /// `(surface, action)` pairs, in index order.
    pub primitives: Vec<(String, String)>,
    #[serde(default)]
    pub directions: Directions,
    #[serde(default = "all_modifiers")]
    pub modifiers: Vec<Modifier>,
    #[serde(default = "default_repetitions")]
    pub repetitions: BTreeMap<String, u32>,
    #[serde(default = "all_conjunctions")]
    pub conjunctions: Vec<Conjunction>,
    #[serde(default)]
    pub allow_turn_verb: bool,
    #[serde(default = "yes")]
    pub unify_around_opposite: bool,
    #[serde(default)]
    pub max_conjunctions: Option<usize>,
}

fn all_modifiers() -> Vec<Modifier> {
    vec![Modifier::Opposite, Modifier::Around]
}

fn all_conjunctions() -> Vec<Conjunction> {
    vec![Conjunction::And, Conjunction::After]
}

fn default_repetitions() -> BTreeMap<String, u32> {
    BTreeMap::from([("twice".to_string(), 2), ("thrice".to_string(), 3)])
}

fn yes() -> bool {
    true
}

/// Action token for a generated primitive: upper-cased surface with an `I_` prefix.
pub fn action_for(surface: &str) -> String {
    format!("I_{}", surface.to_uppercase())
}

/// Surface names for generated primitives beyond the four SCAN verbs.
/// Letters only, so digit-suffixed mutations can never collide with them.
fn generated_name(index: usize) -> String {
    let mut n = index;
    let mut letters = Vec::new();
    loop {
        letters.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    while letters.len() < 2 {
        letters.push('a');
    }
    letters.reverse();
    format!("x{}", letters.into_iter().collect::<String>())
}

impl GrammarConfig {
    /// SCAN* grammar with `n` primitives: the four SCAN verbs followed by
    /// generated ones, no `turn` verb, unlimited conjunctions.
    pub fn scan_star_with(n: usize) -> Self {
        let mut primitives: Vec<(String, String)> = SCAN_VERBS
            .iter()
            .take(n)
            .map(|v| (v.to_string(), action_for(v)))
            .collect();
        let mut i = 0;
        while primitives.len() < n {
            let name = generated_name(i);
            primitives.push((name.clone(), action_for(&name)));
            i += 1;
        }
        GrammarConfig {
            primitives,
            directions: Directions::default(),
            modifiers: all_modifiers(),
            repetitions: default_repetitions(),
            conjunctions: all_conjunctions(),
            allow_turn_verb: false,
            unify_around_opposite: true,
            max_conjunctions: None,
        }
    }

    /// The default SCAN* grammar (200 primitives).
    pub fn scan_star() -> Self {
        Self::scan_star_with(SCAN_STAR_PRIMITIVES)
    }

    /// The original SCAN grammar: four verbs, `turn`, at most one conjunction.
    pub fn scan_legacy() -> Self {
        GrammarConfig {
            primitives: SCAN_VERBS.iter().map(|v| (v.to_string(), action_for(v))).collect(),
            directions: Directions::default(),
            modifiers: all_modifiers(),
            repetitions: default_repetitions(),
            conjunctions: all_conjunctions(),
            allow_turn_verb: true,
            unify_around_opposite: false,
            max_conjunctions: Some(1),
        }
    }

    /// Copy of this config with additional `(surface, action)` primitives appended.
    pub fn with_extra_primitives<I>(&self, extra: I) -> Self
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut out = self.clone();
        out.primitives.extend(extra);
        out
    }

    pub fn from_json(text: &str) -> Result<Self, GrammarError> {
        let config: GrammarConfig =
            serde_json::from_str(text).map_err(|e| GrammarError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GrammarError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grammar config serializes")
    }

    pub fn primitive_index(&self, surface: &str) -> Option<usize> {
        self.primitives.iter().position(|(s, _)| s == surface)
    }

    pub fn validate(&self) -> Result<(), GrammarError> {
        let bad = |msg: String| Err(GrammarError::InvalidConfig(msg));
        if self.primitives.is_empty() {
            return bad("at least one primitive is required".into());
        }
        let mut surface: HashSet<&str> = HashSet::new();
        let mut fixed = vec![LEFT, RIGHT, OPPOSITE, AROUND, AND, AFTER];
        if self.allow_turn_verb {
            fixed.push(TURN);
        }
        for tok in fixed {
            surface.insert(tok);
        }
        for tok in self.repetitions.keys() {
            if !surface.insert(tok.as_str()) {
                return bad(format!("repetition token {tok:?} collides with another surface token"));
            }
        }
        let mut counts = HashSet::new();
        for (tok, &n) in &self.repetitions {
            if n == 0 {
                return bad(format!("repetition {tok:?} must repeat at least once"));
            }
            if !counts.insert(n) {
                return bad(format!("two repetition tokens share the count {n}"));
            }
        }
        let mut actions: HashSet<&str> = HashSet::new();
        for tok in [&self.directions.left, &self.directions.right] {
            if !actions.insert(tok.as_str()) {
                return bad("direction action tokens must differ".into());
            }
        }
        for (s, a) in &self.primitives {
            for tok in [s, a] {
                if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                    return bad(format!("token {tok:?} is empty or contains whitespace"));
                }
            }
            if !surface.insert(s.as_str()) {
                return bad(format!("duplicate surface token {s:?}"));
            }
            if !actions.insert(a.as_str()) {
                return bad(format!("duplicate action token {a:?}"));
            }
        }
        if let Some(clash) = surface.iter().find(|t| actions.contains(*t)) {
            return bad(format!("token {clash:?} is both a surface and an action token"));
        }
        Ok(())
    }
}

/// The verb slot of a phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verb {
    /// Index into [`GrammarConfig::primitives`].
    Primitive(usize),
    /// The legacy `turn` verb; only valid with a direction.
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phrase {
    pub verb: Verb,
    pub modifier: Option<Modifier>,
    pub direction: Option<Direction>,
    /// Repeat count; `None` means no repetition token.
    pub repetition: Option<u32>,
}

impl Phrase {
    pub fn bare(primitive: usize) -> Self {
        Phrase {
            verb: Verb::Primitive(primitive),
            modifier: None,
            direction: None,
            repetition: None,
        }
    }

    /// Number of surface tokens the phrase serializes to.
    pub fn len(&self) -> usize {
        1 + self.modifier.is_some() as usize
            + self.direction.is_some() as usize
            + self.repetition.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Phrases joined by `after`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AfterChain {
    pub phrases: Vec<Phrase>,
}

/// Parsed SCAN* command: `and`-joined after-chains.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Command {
    pub conjuncts: Vec<AfterChain>,
}

impl Command {
    pub fn single(phrase: Phrase) -> Self {
        Command {
            conjuncts: vec![AfterChain {
                phrases: vec![phrase],
            }],
        }
    }

    pub fn phrases(&self) -> impl Iterator<Item = &Phrase> {
        self.conjuncts.iter().flat_map(|c| c.phrases.iter())
    }

    pub fn phrase_count(&self) -> usize {
        self.conjuncts.iter().map(|c| c.phrases.len()).sum()
    }

    /// Total number of conjunction tokens (`and` plus `after`).
    pub fn conjunction_count(&self) -> usize {
        self.phrase_count().saturating_sub(1)
    }

    /// Serialized length in tokens.
    pub fn token_len(&self) -> usize {
        self.phrases().map(Phrase::len).sum::<usize>() + self.conjunction_count()
    }

    /// Rebuild a command from phrases and the conjunctions between them.
    /// `joins.len()` must be `phrases.len() - 1`.
    pub fn from_parts(phrases: &[Phrase], joins: &[Conjunction]) -> Self {
        assert_eq!(phrases.len(), joins.len() + 1, "one conjunction between each pair of phrases");
        let mut conjuncts = vec![AfterChain {
            phrases: vec![phrases[0]],
        }];
        for (phrase, join) in phrases[1..].iter().zip(joins) {
            match join {
                Conjunction::After => conjuncts.last_mut().unwrap().phrases.push(*phrase),
                Conjunction::And => conjuncts.push(AfterChain {
                    phrases: vec![*phrase],
                }),
            }
        }
        Command { conjuncts }
    }

    /// Flatten into phrases and the conjunctions between them.
    pub fn to_parts(&self) -> (Vec<Phrase>, Vec<Conjunction>) {
        let mut phrases = Vec::new();
        let mut joins = Vec::new();
        for (ci, chain) in self.conjuncts.iter().enumerate() {
            if ci > 0 {
                joins.push(Conjunction::And);
            }
            for (pi, p) in chain.phrases.iter().enumerate() {
                if pi > 0 {
                    joins.push(Conjunction::After);
                }
                phrases.push(*p);
            }
        }
        (phrases, joins)
    }

    /// Distinct primitive indices used by the command.
    pub fn primitives(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .phrases()
            .filter_map(|p| match p.verb {
                Verb::Primitive(i) => Some(i),
                Verb::Turn => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Primitive(usize),
    Turn,
    Direction(Direction),
    Modifier(Modifier),
    Repetition(u32),
    Conjunction(Conjunction),
}

/// A validated [`GrammarConfig`] with its token index; all grammar operations
/// hang off this type.
#[derive(Debug, Clone)]
pub struct Grammar {
    config: GrammarConfig,
    tokens: HashMap<String, TokenKind>,
    repetition_tokens: HashMap<u32, String>,
}

impl Grammar {
    pub fn new(config: GrammarConfig) -> Result<Self, GrammarError> {
        config.validate()?;
        let mut tokens = HashMap::new();
        for (i, (s, _)) in config.primitives.iter().enumerate() {
            tokens.insert(s.clone(), TokenKind::Primitive(i));
        }
        if config.allow_turn_verb {
            tokens.insert(TURN.to_string(), TokenKind::Turn);
        }
        for d in Direction::ALL {
            tokens.insert(d.surface().to_string(), TokenKind::Direction(d));
        }
        for &m in &config.modifiers {
            tokens.insert(m.surface().to_string(), TokenKind::Modifier(m));
        }
        for &c in &config.conjunctions {
            tokens.insert(c.surface().to_string(), TokenKind::Conjunction(c));
        }
        let mut repetition_tokens = HashMap::new();
        for (tok, &n) in &config.repetitions {
            tokens.insert(tok.clone(), TokenKind::Repetition(n));
            repetition_tokens.insert(n, tok.clone());
        }
        Ok(Grammar {
            config,
            tokens,
            repetition_tokens,
        })
    }

    pub fn config(&self) -> &GrammarConfig {
        &self.config
    }

    pub fn primitive_count(&self) -> usize {
        self.config.primitives.len()
    }

    pub fn primitive_index(&self, surface: &str) -> Option<usize> {
        match self.tokens.get(surface) {
            Some(TokenKind::Primitive(i)) => Some(*i),
            _ => None,
        }
    }

    /// Repeat counts available to phrases, ascending.
    pub fn repetition_counts(&self) -> Vec<u32> {
        let mut counts: Vec<u32> = self.repetition_tokens.keys().copied().collect();
        counts.sort_unstable();
        counts
    }

    fn conjunction_enabled(&self, c: Conjunction) -> bool {
        self.config.conjunctions.contains(&c)
    }

    /// Parse whitespace-tokenized input into a command.
    pub fn parse<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Command, GrammarError> {
        let err = |position: usize, reason: String| GrammarError::UnparseableInput { position, reason };
        if tokens.is_empty() {
            return Err(err(0, "empty input".into()));
        }
        let mut kinds = Vec::with_capacity(tokens.len());
        for (pos, tok) in tokens.iter().enumerate() {
            let tok = tok.as_ref();
            match self.tokens.get(tok) {
                Some(k) => kinds.push(*k),
                None => return Err(err(pos, format!("token {tok:?} is not in the grammar"))),
            }
        }

        let mut conjuncts = vec![AfterChain { phrases: Vec::new() }];
        let mut conjunctions = 0usize;
        let mut pos = 0;
        loop {
            let verb = match kinds.get(pos) {
                Some(TokenKind::Primitive(i)) => Verb::Primitive(*i),
                Some(TokenKind::Turn) => Verb::Turn,
                Some(_) => return Err(err(pos, format!("expected a verb, found {:?}", tokens[pos].as_ref()))),
                None => return Err(err(pos, "expected a verb, found end of input".into())),
            };
            pos += 1;
            let mut modifier = None;
            let mut direction = None;
            if let Some(TokenKind::Modifier(m)) = kinds.get(pos) {
                modifier = Some(*m);
                pos += 1;
                match kinds.get(pos) {
                    Some(TokenKind::Direction(d)) => {
                        direction = Some(*d);
                        pos += 1;
                    }
                    _ => return Err(err(pos, format!("{:?} must be followed by a direction", m.surface()))),
                }
            } else if let Some(TokenKind::Direction(d)) = kinds.get(pos) {
                direction = Some(*d);
                pos += 1;
            }
            if verb == Verb::Turn && direction.is_none() {
                return Err(err(pos, "\"turn\" must be followed by a direction".into()));
            }
            let mut repetition = None;
            if let Some(TokenKind::Repetition(n)) = kinds.get(pos) {
                repetition = Some(*n);
                pos += 1;
            }
            conjuncts.last_mut().unwrap().phrases.push(Phrase {
                verb,
                modifier,
                direction,
                repetition,
            });

            match kinds.get(pos) {
                None => break,
                Some(TokenKind::Conjunction(c)) => {
                    conjunctions += 1;
                    if let Some(limit) = self.config.max_conjunctions {
                        if conjunctions > limit {
                            return Err(err(pos, format!("more than {limit} conjunction(s)")));
                        }
                    }
                    if *c == Conjunction::And {
                        conjuncts.push(AfterChain { phrases: Vec::new() });
                    }
                    pos += 1;
                }
                Some(_) => {
                    return Err(err(
                        pos,
                        format!("expected a conjunction or end of input, found {:?}", tokens[pos].as_ref()),
                    ))
                }
            }
        }
        Ok(Command { conjuncts })
    }

    /// Convenience wrapper splitting `text` on whitespace.
    pub fn parse_str(&self, text: &str) -> Result<Command, GrammarError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        self.parse(&tokens)
    }

    /// Check every invariant a command must satisfy under this grammar.
    pub fn check(&self, cmd: &Command) -> Result<(), GrammarError> {
        let bad = |msg: String| Err(GrammarError::InvalidCommand(msg));
        if cmd.conjuncts.is_empty() {
            return bad("command has no conjuncts".into());
        }
        if cmd.conjuncts.iter().any(|c| c.phrases.is_empty()) {
            return bad("after-chain without phrases".into());
        }
        if cmd.conjuncts.len() > 1 && !self.conjunction_enabled(Conjunction::And) {
            return bad("\"and\" is not enabled".into());
        }
        if cmd.conjuncts.iter().any(|c| c.phrases.len() > 1) && !self.conjunction_enabled(Conjunction::After) {
            return bad("\"after\" is not enabled".into());
        }
        if let Some(limit) = self.config.max_conjunctions {
            if cmd.conjunction_count() > limit {
                return bad(format!("{} conjunctions exceed the limit of {limit}", cmd.conjunction_count()));
            }
        }
        for p in cmd.phrases() {
            match p.verb {
                Verb::Primitive(i) if i >= self.primitive_count() => {
                    return bad(format!("primitive index {i} out of range"));
                }
                Verb::Turn if !self.config.allow_turn_verb => return bad("\"turn\" is not enabled".into()),
                Verb::Turn if p.direction.is_none() => return bad("\"turn\" without a direction".into()),
                _ => {}
            }
            if let Some(m) = p.modifier {
                if p.direction.is_none() {
                    return bad(format!("modifier {:?} without a direction", m.surface()));
                }
                if !self.config.modifiers.contains(&m) {
                    return bad(format!("modifier {:?} is not enabled", m.surface()));
                }
            }
            if let Some(n) = p.repetition {
                if !self.repetition_tokens.contains_key(&n) {
                    return bad(format!("no repetition token repeats {n} times"));
                }
            }
        }
        Ok(())
    }

    fn push_phrase_tokens(&self, p: &Phrase, out: &mut Vec<String>) {
        out.push(match p.verb {
            Verb::Primitive(i) => self.config.primitives[i].0.clone(),
            Verb::Turn => TURN.to_string(),
        });
        if let Some(m) = p.modifier {
            out.push(m.surface().to_string());
        }
        if let Some(d) = p.direction {
            out.push(d.surface().to_string());
        }
        if let Some(n) = p.repetition {
            out.push(self.repetition_tokens[&n].clone());
        }
    }

    /// Serialize a command back into surface tokens.
    pub fn serialize(&self, cmd: &Command) -> Result<Vec<String>, GrammarError> {
        self.check(cmd)?;
        let mut out = Vec::with_capacity(cmd.token_len());
        for (ci, chain) in cmd.conjuncts.iter().enumerate() {
            if ci > 0 {
                out.push(AND.to_string());
            }
            for (pi, p) in chain.phrases.iter().enumerate() {
                if pi > 0 {
                    out.push(AFTER.to_string());
                }
                self.push_phrase_tokens(p, &mut out);
            }
        }
        Ok(out)
    }

    fn interpret_phrase(&self, p: &Phrase, out: &mut Vec<String>) {
        let act = match p.verb {
            Verb::Primitive(i) => Some(self.config.primitives[i].1.as_str()),
            Verb::Turn => None,
        };
        let start = out.len();
        let turn = p.direction.map(|d| self.config.directions.action(d));
        match (p.modifier, turn) {
            (None, None) => out.extend(act.map(str::to_string)),
            (None, Some(t)) => {
                out.push(t.to_string());
                out.extend(act.map(str::to_string));
            }
            (Some(Modifier::Opposite), Some(t)) => {
                out.push(t.to_string());
                out.push(t.to_string());
                out.extend(act.map(str::to_string));
            }
            (Some(Modifier::Around), Some(t)) => {
                for _ in 0..4 {
                    out.push(t.to_string());
                    out.extend(act.map(str::to_string));
                }
            }
            (Some(_), None) => unreachable!("checked: modifier requires a direction"),
        }
        let times = p.repetition.unwrap_or(1) as usize;
        if times > 1 {
            let once = out[start..].to_vec();
            for _ in 1..times {
                out.extend_from_slice(&once);
            }
        }
    }

    /// Execute a command into its action sequence.
    pub fn interpret(&self, cmd: &Command) -> Result<Vec<String>, GrammarError> {
        self.check(cmd)?;
        let mut out = Vec::new();
        for chain in &cmd.conjuncts {
            // `x after y` runs y first, so a chain executes right to left.
            for p in chain.phrases.iter().rev() {
                self.interpret_phrase(p, &mut out);
            }
        }
        Ok(out)
    }

    /// Every phrase producible from `primitives` (plus `turn` when enabled),
    /// in a fixed canonical order.
    pub fn phrases_for(&self, primitives: &[usize]) -> Vec<Phrase> {
        let mut verbs: Vec<Verb> = primitives.iter().map(|&i| Verb::Primitive(i)).collect();
        if self.config.allow_turn_verb {
            verbs.push(Verb::Turn);
        }
        let mut reps: Vec<Option<u32>> = vec![None];
        reps.extend(self.repetition_counts().into_iter().map(Some));
        let mut out = Vec::new();
        for verb in verbs {
            for shape in self.shapes(verb) {
                for &repetition in &reps {
                    out.push(Phrase {
                        verb,
                        modifier: shape.0,
                        direction: shape.1,
                        repetition,
                    });
                }
            }
        }
        out
    }

    /// Valid (modifier, direction) combinations for a verb.
    pub fn shapes(&self, verb: Verb) -> Vec<(Option<Modifier>, Option<Direction>)> {
        let mut shapes = Vec::new();
        if verb != Verb::Turn {
            shapes.push((None, None));
        }
        for d in Direction::ALL {
            shapes.push((None, Some(d)));
        }
        for &m in &self.config.modifiers {
            for d in Direction::ALL {
                shapes.push((Some(m), Some(d)));
            }
        }
        shapes
    }

    /// Enumerate every valid command with at most `max_phrases` phrases over
    /// the given primitive subset. Each command appears exactly once.
    pub fn enumerate(&self, max_phrases: usize, primitives: &[usize]) -> Result<CommandEnumerator, GrammarError> {
        if max_phrases == 0 {
            return Err(GrammarError::InvalidCommand("at least one phrase is required".into()));
        }
        if let Some(&bad) = primitives.iter().find(|&&i| i >= self.primitive_count()) {
            return Err(GrammarError::InvalidCommand(format!("primitive index {bad} out of range")));
        }
        let mut limit = max_phrases;
        if let Some(max_conj) = self.config.max_conjunctions {
            limit = limit.min(max_conj + 1);
        }
        if self.config.conjunctions.is_empty() {
            limit = 1;
        }
        let mut joins = self.config.conjunctions.clone();
        joins.sort();
        joins.dedup();
        Ok(CommandEnumerator::new(self.phrases_for(primitives), joins, limit))
    }
}

/// Iterator over all commands up to a phrase count; see [`Grammar::enumerate`].
#[derive(Debug, Clone)]
pub struct CommandEnumerator {
    phrases: Vec<Phrase>,
    joins: Vec<Conjunction>,
    max_phrases: usize,
    n: usize,
    phrase_idx: Vec<usize>,
    join_idx: Vec<usize>,
    done: bool,
}

impl CommandEnumerator {
    fn new(phrases: Vec<Phrase>, joins: Vec<Conjunction>, max_phrases: usize) -> Self {
        let done = phrases.is_empty();
        CommandEnumerator {
            phrases,
            joins,
            max_phrases,
            n: 1,
            phrase_idx: vec![0],
            join_idx: Vec::new(),
            done,
        }
    }

    fn advance(&mut self) {
        // Odometer over phrase choices, then conjunction choices, then length.
        for d in self.phrase_idx.iter_mut().rev() {
            *d += 1;
            if *d < self.phrases.len() {
                return;
            }
            *d = 0;
        }
        for d in self.join_idx.iter_mut().rev() {
            *d += 1;
            if *d < self.joins.len() {
                return;
            }
            *d = 0;
        }
        self.n += 1;
        if self.n > self.max_phrases {
            self.done = true;
            return;
        }
        self.phrase_idx = vec![0; self.n];
        self.join_idx = vec![0; self.n - 1];
    }
}

impl Iterator for CommandEnumerator {
    type Item = Command;

    fn next(&mut self) -> Option<Command> {
        if self.done {
            return None;
        }
        let phrases: Vec<Phrase> = self.phrase_idx.iter().map(|&i| self.phrases[i]).collect();
        let joins: Vec<Conjunction> = self.join_idx.iter().map(|&i| self.joins[i]).collect();
        self.advance();
        Some(Command::from_parts(&phrases, &joins))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Command{:?}", self.conjuncts.iter().map(|c| &c.phrases).collect::<Vec<_>>())
    }
}
