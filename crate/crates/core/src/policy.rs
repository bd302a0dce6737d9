//! Monotone access policies over named attributes.
//!
//! Grammar (keywords are case-insensitive, AND binds tighter than OR, both
//! are left-associative):
//!
//! ```text
//! expr   := term (OR term)*
//! term   := factor (AND factor)*
//! factor := NAME | '(' expr ')'
//! NAME   := [A-Za-z0-9_:.-]+
//! ```
//!
//! Multi-word attribute names are written with underscores (`New_York`).
//! The canonical text form is fully parenthesized with lowercase keywords,
//! so equal policies always hash to the same digest.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::wire::{Reader, WireError, Writer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("empty policy")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("invalid attribute name {0:?}")]
    InvalidName(String),
    #[error("conjunction over an empty attribute list")]
    EmptyConjunction,
}

pub fn is_valid_attribute_name(name: &str) -> bool {
    !name.is_empty()
        && name.bytes().all(is_name_byte)
        && !name.eq_ignore_ascii_case("and")
        && !name.eq_ignore_ascii_case("or")
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b':' | b'.' | b'-')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyExpr {
    Leaf(String),
    And(Box<PolicyExpr>, Box<PolicyExpr>),
    Or(Box<PolicyExpr>, Box<PolicyExpr>),
}

impl PolicyExpr {
    pub fn attr(name: impl Into<String>) -> Result<Self, PolicyError> {
        let name = name.into();
        if !is_valid_attribute_name(&name) {
            return Err(PolicyError::InvalidName(name));
        }
        Ok(Self::Leaf(name))
    }

    pub fn and(left: PolicyExpr, right: PolicyExpr) -> Self {
        Self::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: PolicyExpr, right: PolicyExpr) -> Self {
        Self::Or(Box::new(left), Box::new(right))
    }

    /// Leaf names in left-to-right order, duplicates included.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Self::Leaf(name) => out.push(name),
            Self::And(l, r) | Self::Or(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn attribute_names(&self) -> BTreeSet<&str> {
        self.leaves().into_iter().collect()
    }

    /// Canonical text form.
    pub fn to_canonical(&self) -> String {
        self.to_string()
    }

    /// SHA-256 over the canonical text.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_canonical().as_bytes()).into()
    }

    pub fn satisfied_by(&self, attrs: &AttributeSet) -> bool {
        satisfies(attrs, self)
    }
}

impl fmt::Display for PolicyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Leaf(name) => f.write_str(name),
            Self::And(l, r) => write!(f, "({l} and {r})"),
            Self::Or(l, r) => write!(f, "({l} or {r})"),
        }
    }
}

impl std::str::FromStr for PolicyExpr {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for PolicyExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_canonical())
    }
}

impl<'de> Deserialize<'de> for PolicyExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

/// A set of attribute names. Ordered so that encodings are deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeSet(BTreeSet<String>);

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>) -> bool {
        self.0.insert(name.into())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.0.iter().map(String::as_str)
    }

    pub fn is_subset(&self, other: &AttributeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn union(&self, other: &AttributeSet) -> AttributeSet {
        Self(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &AttributeSet) -> AttributeSet {
        Self(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn to_vec(&self) -> Vec<String> {
        self.0.iter().cloned().collect()
    }
}

impl<S: Into<String>> FromIterator<S> for AttributeSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

impl<'a> IntoIterator for &'a AttributeSet {
    type Item = &'a String;
    type IntoIter = std::collections::btree_set::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for AttributeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, name) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(name)?;
        }
        f.write_str("}")
    }
}

/// True iff assigning true to exactly the names in `attrs` makes `policy` true.
pub fn satisfies(attrs: &AttributeSet, policy: &PolicyExpr) -> bool {
    match policy {
        PolicyExpr::Leaf(name) => attrs.contains(name),
        PolicyExpr::And(l, r) => satisfies(attrs, l) && satisfies(attrs, r),
        PolicyExpr::Or(l, r) => satisfies(attrs, l) || satisfies(attrs, r),
    }
}

/// Right-folded AND over `names`: `[a, b, c]` becomes `a and (b and c)`.
pub fn conjunction<S: AsRef<str>>(names: &[S]) -> Result<PolicyExpr, PolicyError> {
    let (last, rest) = names.split_last().ok_or(PolicyError::EmptyConjunction)?;
    let mut acc = PolicyExpr::attr(last.as_ref())?;
    for name in rest.iter().rev() {
        acc = PolicyExpr::and(PolicyExpr::attr(name.as_ref())?, acc);
    }
    Ok(acc)
}

pub fn parse(text: &str) -> Result<PolicyExpr, PolicyError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(PolicyError::Empty);
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(PolicyError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Name(String),
    And,
    Or,
    Open,
    Close,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            Self::Name(n) => format!("attribute {n:?}"),
            Self::And => "'and'".into(),
            Self::Or => "'or'".into(),
            Self::Open => "'('".into(),
            Self::Close => "')'".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, PolicyError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                out.push(Token { kind: TokenKind::Open, offset: i });
                i += 1;
            }
            b')' => {
                out.push(Token { kind: TokenKind::Close, offset: i });
                i += 1;
            }
            _ if is_name_byte(b) => {
                let start = i;
                while i < bytes.len() && is_name_byte(bytes[i]) {
                    i += 1;
                }
                let word = &text[start..i];
                let kind = if word.eq_ignore_ascii_case("and") {
                    TokenKind::And
                } else if word.eq_ignore_ascii_case("or") {
                    TokenKind::Or
                } else {
                    TokenKind::Name(word.to_owned())
                };
                out.push(Token { kind, offset: start });
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(PolicyError::Syntax {
                    offset: i,
                    message: format!("unexpected character {ch:?}"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<PolicyExpr, PolicyError> {
        let mut acc = self.term()?;
        while self.eat(&TokenKind::Or) {
            acc = PolicyExpr::or(acc, self.term()?);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<PolicyExpr, PolicyError> {
        let mut acc = self.factor()?;
        while self.eat(&TokenKind::And) {
            acc = PolicyExpr::and(acc, self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<PolicyExpr, PolicyError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(PolicyError::Syntax {
                offset: self.end,
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Name(name) => Ok(PolicyExpr::Leaf(name)),
            TokenKind::Open => {
                let inner = self.expr()?;
                if !self.eat(&TokenKind::Close) {
                    let offset = self.peek().map_or(self.end, |t| t.offset);
                    return Err(PolicyError::Syntax {
                        offset,
                        message: "expected ')'".into(),
                    });
                }
                Ok(inner)
            }
            other => Err(PolicyError::Syntax {
                offset: tok.offset,
                message: format!("expected attribute or '(', found {}", other.describe()),
            }),
        }
    }
}

/// Threshold-tree form of a policy as consumed by ABE schemes.
///
/// AND becomes a 2-of-2 gate and OR a 1-of-2 gate. Leaves are numbered
/// left to right starting at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessNode {
    Leaf { index: usize, attribute: String },
    Gate { threshold: usize, children: Vec<AccessNode> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessStructure {
    root: AccessNode,
    leaves: Vec<String>,
}

/// One leaf chosen to reconstruct the root secret, with the gate path used
/// to compute its recombination coefficient. Each path entry holds the
/// leaf-side child position (1-based) and the set of selected positions at
/// that gate. Entries run from the root downward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedLeaf {
    pub leaf: usize,
    pub path: Vec<(u32, Vec<u32>)>,
}

const ACCESS_STRUCTURE_VERSION: u8 = 1;

pub fn compile_access_structure(policy: &PolicyExpr) -> AccessStructure {
    fn build(p: &PolicyExpr, leaves: &mut Vec<String>) -> AccessNode {
        match p {
            PolicyExpr::Leaf(name) => {
                leaves.push(name.clone());
                AccessNode::Leaf {
                    index: leaves.len() - 1,
                    attribute: name.clone(),
                }
            }
            PolicyExpr::And(l, r) => AccessNode::Gate {
                threshold: 2,
                children: vec![build(l, leaves), build(r, leaves)],
            },
            PolicyExpr::Or(l, r) => AccessNode::Gate {
                threshold: 1,
                children: vec![build(l, leaves), build(r, leaves)],
            },
        }
    }
    let mut leaves = Vec::new();
    let root = build(policy, &mut leaves);
    AccessStructure { root, leaves }
}

impl AccessStructure {
    pub fn root(&self) -> &AccessNode {
        &self.root
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn satisfied_by(&self, has_leaf: impl Fn(usize) -> bool) -> bool {
        fn eval(n: &AccessNode, has: &dyn Fn(usize) -> bool) -> bool {
            match n {
                AccessNode::Leaf { index, .. } => has(*index),
                AccessNode::Gate { threshold, children } => {
                    children.iter().filter(|c| eval(c, has)).count() >= *threshold
                }
            }
        }
        eval(&self.root, &has_leaf)
    }

    pub fn satisfied_by_set(&self, attrs: &AttributeSet) -> bool {
        self.satisfied_by(|i| attrs.contains(&self.leaves[i]))
    }

    /// Picks a minimal-threshold set of leaves reconstructing the root,
    /// preferring earlier children. `None` when unsatisfied.
    pub fn select(&self, has_leaf: impl Fn(usize) -> bool) -> Option<Vec<SelectedLeaf>> {
        fn go(
            n: &AccessNode,
            has: &dyn Fn(usize) -> bool,
            path: &mut Vec<(u32, Vec<u32>)>,
            out: &mut Vec<SelectedLeaf>,
        ) -> bool {
            match n {
                AccessNode::Leaf { index, .. } => {
                    if has(*index) {
                        out.push(SelectedLeaf {
                            leaf: *index,
                            path: path.clone(),
                        });
                        true
                    } else {
                        false
                    }
                }
                AccessNode::Gate { threshold, children } => {
                    let chosen: Vec<u32> = children
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| probe(c, has))
                        .map(|(i, _)| i as u32 + 1)
                        .take(*threshold)
                        .collect();
                    if chosen.len() < *threshold {
                        return false;
                    }
                    for &pos in &chosen {
                        path.push((pos, chosen.clone()));
                        go(&children[pos as usize - 1], has, path, out);
                        path.pop();
                    }
                    true
                }
            }
        }
        fn probe(n: &AccessNode, has: &dyn Fn(usize) -> bool) -> bool {
            match n {
                AccessNode::Leaf { index, .. } => has(*index),
                AccessNode::Gate { threshold, children } => {
                    children.iter().filter(|c| probe(c, has)).count() >= *threshold
                }
            }
        }
        let mut out = Vec::new();
        go(&self.root, &has_leaf, &mut Vec::new(), &mut out).then_some(out)
    }

    /// Rebuilds the equivalent policy formula.
    pub fn to_policy(&self) -> Result<PolicyExpr, PolicyError> {
        fn go(n: &AccessNode) -> Result<PolicyExpr, PolicyError> {
            match n {
                AccessNode::Leaf { attribute, .. } => PolicyExpr::attr(attribute.clone()),
                AccessNode::Gate { threshold, children } if children.len() == 2 => {
                    let (l, r) = (go(&children[0])?, go(&children[1])?);
                    match threshold {
                        1 => Ok(PolicyExpr::or(l, r)),
                        2 => Ok(PolicyExpr::and(l, r)),
                        _ => Err(PolicyError::Syntax {
                            offset: 0,
                            message: format!("unsupported {threshold}-of-2 gate"),
                        }),
                    }
                }
                AccessNode::Gate { children, .. } => Err(PolicyError::Syntax {
                    offset: 0,
                    message: format!("unsupported gate arity {}", children.len()),
                }),
            }
        }
        go(&self.root)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        fn enc(n: &AccessNode, w: &mut Writer) {
            match n {
                AccessNode::Leaf { attribute, .. } => {
                    w.u8(0).str(attribute);
                }
                AccessNode::Gate { threshold, children } => {
                    w.u8(1).u32(*threshold as u32).u32(children.len() as u32);
                    for c in children {
                        enc(c, w);
                    }
                }
            }
        }
        let mut w = Writer::with_version(ACCESS_STRUCTURE_VERSION);
        enc(&self.root, &mut w);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        fn dec(r: &mut Reader<'_>, leaves: &mut Vec<String>, depth: usize) -> Result<AccessNode, WireError> {
            if depth > 512 {
                return Err(WireError::Invalid("access tree too deep".into()));
            }
            match r.u8()? {
                0 => {
                    let name = r.str()?.to_owned();
                    if !is_valid_attribute_name(&name) {
                        return Err(WireError::Invalid(format!("attribute name {name:?}")));
                    }
                    leaves.push(name.clone());
                    Ok(AccessNode::Leaf {
                        index: leaves.len() - 1,
                        attribute: name,
                    })
                }
                1 => {
                    let threshold = r.u32()? as usize;
                    let n = r.u32()? as usize;
                    if n == 0 || threshold == 0 || threshold > n || n > r.remaining() {
                        return Err(WireError::Invalid(format!("gate {threshold}-of-{n}")));
                    }
                    let children = (0..n)
                        .map(|_| dec(r, leaves, depth + 1))
                        .collect::<Result<_, _>>()?;
                    Ok(AccessNode::Gate { threshold, children })
                }
                t => Err(WireError::Invalid(format!("access node tag {t}"))),
            }
        }
        let mut r = Reader::versioned(buf, ACCESS_STRUCTURE_VERSION)?;
        let mut leaves = Vec::new();
        let root = dec(&mut r, &mut leaves, 0)?;
        r.finish()?;
        Ok(Self { root, leaves })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn leaf(n: &str) -> PolicyExpr {
        PolicyExpr::attr(n).unwrap()
    }

    fn set(names: &[&str]) -> AttributeSet {
        names.iter().copied().collect()
    }

    #[test]
    fn scenario_one_policy() {
        let p = parse("CEO or (Manager and New_York)").unwrap();
        assert_eq!(
            p,
            PolicyExpr::or(leaf("CEO"), PolicyExpr::and(leaf("Manager"), leaf("New_York")))
        );
        assert!(satisfies(&set(&["CEO"]), &p));
        assert!(satisfies(&set(&["Manager", "New_York"]), &p));
        assert!(!satisfies(&set(&["Manager"]), &p));
    }

    #[test]
    fn unquoted_multi_word_name_is_rejected() {
        let err = parse("CEO or (Manager and New York)").unwrap_err();
        assert_eq!(
            err,
            PolicyError::Syntax {
                offset: 24,
                message: "expected ')'".into()
            }
        );
    }

    #[test]
    fn single_leaf() {
        assert_eq!(parse("A").unwrap(), leaf("A"));
        assert!(!satisfies(&AttributeSet::new(), &leaf("A")));
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let (a, b, c) = (leaf("A"), leaf("B"), leaf("C"));
        assert_eq!(
            parse("A and B or C").unwrap(),
            PolicyExpr::or(PolicyExpr::and(a.clone(), b.clone()), c.clone())
        );
        assert_eq!(
            parse("A or B and C").unwrap(),
            PolicyExpr::or(a.clone(), PolicyExpr::and(b.clone(), c.clone()))
        );
        assert_eq!(
            parse("A or B or C").unwrap(),
            PolicyExpr::or(PolicyExpr::or(a, b), c)
        );
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert_eq!(parse("a AND b Or c").unwrap(), parse("a and b or c").unwrap());
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse("   "), Err(PolicyError::Empty));
        assert_eq!(parse(""), Err(PolicyError::Empty));
        assert!(matches!(parse("a and"), Err(PolicyError::Syntax { offset: 5, .. })));
        assert!(matches!(parse("a b"), Err(PolicyError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("(a"), Err(PolicyError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("a)"), Err(PolicyError::Syntax { offset: 1, .. })));
        assert!(matches!(parse("a & b"), Err(PolicyError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("or a"), Err(PolicyError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn canonical_form() {
        let p = parse("A AND b or (c)").unwrap();
        assert_eq!(p.to_canonical(), "((A and b) or c)");
        assert_eq!(p.digest(), parse("(A and b) or c").unwrap().digest());
    }

    #[test]
    fn conjunction_folds_right() {
        assert_eq!(conjunction(&["A"]).unwrap(), leaf("A"));
        assert_eq!(
            conjunction(&["A", "B", "C"]).unwrap(),
            PolicyExpr::and(leaf("A"), PolicyExpr::and(leaf("B"), leaf("C")))
        );
        assert_eq!(conjunction::<&str>(&[]), Err(PolicyError::EmptyConjunction));
        assert!(matches!(conjunction(&["ok", "bad name"]), Err(PolicyError::InvalidName(_))));
    }

    #[test]
    fn access_structure_gates() {
        let s = compile_access_structure(&leaf("A"));
        assert_eq!(
            s.root(),
            &AccessNode::Leaf {
                index: 0,
                attribute: "A".into()
            }
        );
        let s = compile_access_structure(&parse("A and B").unwrap());
        assert_eq!(
            s.root(),
            &AccessNode::Gate {
                threshold: 2,
                children: vec![
                    AccessNode::Leaf { index: 0, attribute: "A".into() },
                    AccessNode::Leaf { index: 1, attribute: "B".into() },
                ]
            }
        );
        let s = compile_access_structure(&parse("A or B").unwrap());
        assert!(matches!(s.root(), AccessNode::Gate { threshold: 1, .. }));
    }

    #[test]
    fn selection_picks_reconstructing_leaves() {
        let s = compile_access_structure(&parse("(A or B) and C").unwrap());
        let has = |held: &'static [usize]| move |i: usize| held.contains(&i);
        let sel = s.select(has(&[1, 2])).unwrap();
        assert_eq!(sel.len(), 2);
        assert_eq!(sel[0].leaf, 1);
        assert_eq!(sel[0].path, vec![(1, vec![1, 2]), (2, vec![2])]);
        assert_eq!(sel[1].leaf, 2);
        assert!(s.select(has(&[0, 1])).is_none());
    }

    #[test]
    fn access_structure_bytes_reject_garbage() {
        assert!(AccessStructure::from_bytes(&[1, 9]).is_err());
        assert!(AccessStructure::from_bytes(&[1, 1, 0, 0, 0, 3, 0, 0, 0, 2]).is_err());
    }

    // ---- property tests ---------------------------------------------------

    const NAMES: [&str; 10] = ["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"];

    pub(crate) fn arb_policy(universe: usize) -> impl Strategy<Value = PolicyExpr> {
        let leaf = (0..universe).prop_map(|i| PolicyExpr::Leaf(NAMES[i].to_string()));
        leaf.prop_recursive(5, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| PolicyExpr::and(l, r)),
                (inner.clone(), inner).prop_map(|(l, r)| PolicyExpr::or(l, r)),
            ]
        })
    }

    fn subset(mask: u32, universe: usize) -> AttributeSet {
        (0..universe).filter(|i| mask & (1 << i) != 0).map(|i| NAMES[i]).collect()
    }

    /// Minimal-parenthesis rendering with random keyword casing, so the
    /// parser has to resolve precedence itself.
    fn render_loose(p: &PolicyExpr, upper: bool) -> String {
        let kw = |s: &str| if upper { s.to_uppercase() } else { s.to_string() };
        match p {
            PolicyExpr::Leaf(n) => n.clone(),
            PolicyExpr::And(l, r) => {
                let wrap = |e: &PolicyExpr, right: bool| match e {
                    PolicyExpr::Or(..) => format!("({})", render_loose(e, upper)),
                    PolicyExpr::And(..) if right => format!("({})", render_loose(e, upper)),
                    _ => render_loose(e, upper),
                };
                format!("{} {} {}", wrap(l, false), kw("and"), wrap(r, true))
            }
            PolicyExpr::Or(l, r) => {
                let rs = match **r {
                    PolicyExpr::Or(..) => format!("({})", render_loose(r, upper)),
                    _ => render_loose(r, upper),
                };
                format!("{} {} {}", render_loose(l, upper), kw("or"), rs)
            }
        }
    }

    /// Independent oracle: shunting-yard to RPN, then evaluate the RPN
    /// either to a tree or to a truth value.
    fn to_rpn(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut ops: Vec<String> = Vec::new();
        let prec = |op: &str| if op == "and" { 2 } else { 1 };
        let spaced = text.replace('(', " ( ").replace(')', " ) ");
        for raw in spaced.split_whitespace() {
            let tok = raw.to_lowercase();
            match tok.as_str() {
                "and" | "or" => {
                    while let Some(top) = ops.last() {
                        if top != "(" && prec(top) >= prec(&tok) {
                            out.push(ops.pop().unwrap());
                        } else {
                            break;
                        }
                    }
                    ops.push(tok);
                }
                "(" => ops.push(tok),
                ")" => {
                    while let Some(top) = ops.pop() {
                        if top == "(" {
                            break;
                        }
                        out.push(top);
                    }
                }
                _ => out.push(raw.to_string()),
            }
        }
        while let Some(op) = ops.pop() {
            out.push(op);
        }
        out
    }

    fn rpn_tree(rpn: &[String]) -> PolicyExpr {
        let mut stack = Vec::new();
        for t in rpn {
            match t.as_str() {
                "and" | "or" => {
                    let r = stack.pop().unwrap();
                    let l = stack.pop().unwrap();
                    stack.push(if t == "and" { PolicyExpr::and(l, r) } else { PolicyExpr::or(l, r) });
                }
                name => stack.push(PolicyExpr::Leaf(name.to_string())),
            }
        }
        assert_eq!(stack.len(), 1);
        stack.pop().unwrap()
    }

    fn rpn_eval(rpn: &[String], attrs: &AttributeSet) -> bool {
        let mut stack = Vec::new();
        for t in rpn {
            match t.as_str() {
                "and" | "or" => {
                    let r = stack.pop().unwrap();
                    let l = stack.pop().unwrap();
                    stack.push(if t == "and" { l && r } else { l || r });
                }
                name => stack.push(attrs.contains(name)),
            }
        }
        stack.pop().unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn parse_agrees_with_shunting_yard_oracle(p in arb_policy(6), upper in any::<bool>()) {
            let text = render_loose(&p, upper);
            let parsed = parse(&text).unwrap();
            prop_assert_eq!(&parsed, &rpn_tree(&to_rpn(&text)));
            prop_assert_eq!(parsed, p);
        }

        #[test]
        fn canonical_text_round_trips(p in arb_policy(10)) {
            prop_assert_eq!(parse(&p.to_canonical()).unwrap(), p);
        }

        #[test]
        fn satisfies_matches_truth_table(p in arb_policy(10)) {
            let rpn = to_rpn(&p.to_canonical());
            for mask in 0..(1u32 << 10) {
                let s = subset(mask, 10);
                prop_assert_eq!(satisfies(&s, &p), rpn_eval(&rpn, &s));
            }
        }

        #[test]
        fn monotone(p in arb_policy(8), s in 0u32..256, extra in 0u32..256) {
            let small = subset(s, 8);
            let big = subset(s | extra, 8);
            if satisfies(&small, &p) {
                prop_assert!(satisfies(&big, &p));
            }
        }

        #[test]
        fn conjunction_is_subset_test(names in proptest::sample::subsequence(NAMES.to_vec(), 1..8), s in 0u32..1024) {
            let held = subset(s, 10);
            let required: AttributeSet = names.iter().copied().collect();
            prop_assert_eq!(satisfies(&held, &conjunction(&names).unwrap()), required.is_subset(&held));
        }

        #[test]
        fn access_structure_agrees_with_formula(p in arb_policy(8)) {
            let tree = compile_access_structure(&p);
            let tree = AccessStructure::from_bytes(&tree.to_bytes()).unwrap();
            prop_assert_eq!(tree.to_policy().unwrap(), p.clone());
            prop_assert_eq!(tree.leaves().len(), p.leaves().len());
            for mask in 0..256u32 {
                let s = subset(mask, 8);
                let sat = satisfies(&s, &p);
                prop_assert_eq!(tree.satisfied_by_set(&s), sat);
                let sel = tree.select(|i| s.contains(&tree.leaves()[i]));
                prop_assert_eq!(sel.is_some(), sat);
                if let Some(sel) = sel {
                    prop_assert!(sel.iter().all(|l| s.contains(&tree.leaves()[l.leaf])));
                }
            }
        }
    }
}
