//! Text formats: rule sets, databases, CQs, labeled instance trees, the
//! leveled chase dump, and the JSON verdict emitted by the CLI.
//!
//! Grammar (statements end with `.`; `#` comments to end of line):
//!
//! ```text
//! rule  :=  [atom {"," atom}] "->" ["exists" var {"," var} "."] atom {"," atom}
//! fact  :=  NAME "(" const {"," const} ")"
//! cq    :=  NAME "(" [var {"," var}] ")" ":-" atom {"," atom}
//! ```
//!
//! In rule and query files every identifier is a variable. Database files
//! are ground; identifiers matching `[u-z][0-9]*` are reserved for
//! variables and identifiers matching `n[0-9]+` are reserved for nulls,
//! so neither may name a database constant. The relation name `true` is
//! reserved and only accepted inside instance-tree bags.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{
    Atom, ConstantId, Cq, Database, Fact, Instance, Tgd, Var, TRUE_RELATION,
};
use crate::verdict::Verdict;

/// 1-based source location of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lex,
    Syntax,
    ArityMismatch,
    UnboundFrontier,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::Lex => "LEX",
            ParseErrorKind::Syntax => "SYNTAX",
            ParseErrorKind::ArityMismatch => "ARITY_MISMATCH",
            ParseErrorKind::UnboundFrontier => "UNBOUND_FRONTIER",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{kind} at {}:{}: {message}", span.line, span.column)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    fn new(span: SourceSpan, kind: ParseErrorKind, message: impl Into<String>) -> Self {
        ParseError { span, kind, message: message.into() }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Ident(String),
    Arrow,   // ->
    Entail,  // :-
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    span: SourceSpan,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let span = SourceSpan { line, column, length: 1 };
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '(' => {
                tokens.push(Token { kind: TokenKind::LParen, span });
                chars.next();
                column += 1;
            }
            ')' => {
                tokens.push(Token { kind: TokenKind::RParen, span });
                chars.next();
                column += 1;
            }
            '{' => {
                tokens.push(Token { kind: TokenKind::LBrace, span });
                chars.next();
                column += 1;
            }
            '}' => {
                tokens.push(Token { kind: TokenKind::RBrace, span });
                chars.next();
                column += 1;
            }
            ',' => {
                tokens.push(Token { kind: TokenKind::Comma, span });
                chars.next();
                column += 1;
            }
            '.' => {
                tokens.push(Token { kind: TokenKind::Dot, span });
                chars.next();
                column += 1;
            }
            '-' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    column += 1;
                    tokens.push(Token {
                        kind: TokenKind::Arrow,
                        span: SourceSpan { length: 2, ..span },
                    });
                } else {
                    return Err(ParseError::new(span, ParseErrorKind::Lex, "expected `->`"));
                }
            }
            ':' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'-') {
                    chars.next();
                    column += 1;
                    tokens.push(Token {
                        kind: TokenKind::Entail,
                        span: SourceSpan { length: 2, ..span },
                    });
                } else {
                    return Err(ParseError::new(span, ParseErrorKind::Lex, "expected `:-`"));
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                let length = ident.len();
                tokens.push(Token {
                    kind: TokenKind::Ident(ident),
                    span: SourceSpan { length, ..span },
                });
            }
            other => {
                return Err(ParseError::new(
                    span,
                    ParseErrorKind::Lex,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    Ok(tokens)
}

fn is_variable_like(ident: &str) -> bool {
    let mut cs = ident.chars();
    match cs.next() {
        Some(c) if ('u'..='z').contains(&c) => cs.all(|d| d.is_ascii_digit()),
        _ => false,
    }
}

fn is_null_like(ident: &str) -> bool {
    let mut cs = ident.chars();
    cs.next() == Some('n') && {
        let rest: String = cs.collect();
        !rest.is_empty() && rest.chars().all(|d| d.is_ascii_digit())
    }
}

// ---------------------------------------------------------------------------
// Parser session (tracks relation arities across files)
// ---------------------------------------------------------------------------

/// A parsing session. Relation arities are inferred at first use and must
/// stay consistent across every file parsed through the same session.
#[derive(Debug, Default)]
pub struct Session {
    arities: BTreeMap<String, usize>,
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eof_span(&self) -> SourceSpan {
        self.tokens
            .last()
            .map(|t| t.span)
            .unwrap_or(SourceSpan { line: 1, column: 1, length: 1 })
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, SourceSpan), ParseError> {
        match self.next() {
            Some(Token { kind: TokenKind::Ident(name), span }) => Ok((name, span)),
            Some(t) => Err(ParseError::new(
                t.span,
                ParseErrorKind::Syntax,
                format!("expected {what}"),
            )),
            None => Err(ParseError::new(
                self.eof_span(),
                ParseErrorKind::Syntax,
                format!("expected {what}, found end of input"),
            )),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<SourceSpan, ParseError> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(t.span),
            Some(t) => Err(ParseError::new(
                t.span,
                ParseErrorKind::Syntax,
                format!("expected {what}"),
            )),
            None => Err(ParseError::new(
                self.eof_span(),
                ParseErrorKind::Syntax,
                format!("expected {what}, found end of input"),
            )),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}

impl Session {
    pub fn new() -> Self {
        Session::default()
    }

    pub fn arities(&self) -> &BTreeMap<String, usize> {
        &self.arities
    }

    fn check_arity(
        &mut self,
        name: &str,
        arity: usize,
        span: SourceSpan,
    ) -> Result<(), ParseError> {
        match self.arities.get(name) {
            Some(&known) if known != arity => Err(ParseError::new(
                span,
                ParseErrorKind::ArityMismatch,
                format!("relation `{name}` used with arity {arity}, previously {known}"),
            )),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    /// one atom: NAME "(" term {"," term} ")"
    fn parse_atom_terms(
        &mut self,
        cursor: &mut Cursor,
    ) -> Result<(String, Vec<(String, SourceSpan)>, SourceSpan), ParseError> {
        let (name, span) = cursor.expect_ident("a relation name")?;
        cursor.expect(TokenKind::LParen, "`(`")?;
        let mut terms = Vec::new();
        if !cursor.eat(&TokenKind::RParen) {
            loop {
                let term = cursor.expect_ident("a term")?;
                terms.push(term);
                if cursor.eat(&TokenKind::RParen) {
                    break;
                }
                cursor.expect(TokenKind::Comma, "`,` or `)`")?;
            }
        }
        if terms.is_empty() {
            return Err(ParseError::new(
                span,
                ParseErrorKind::Syntax,
                "nullary relations are not supported",
            ));
        }
        self.check_arity(&name, terms.len(), span)?;
        Ok((name, terms, span))
    }

    /// Parses a rule file: one TGD per `.`-terminated statement.
    pub fn parse_rules(&mut self, text: &str) -> Result<Vec<Tgd>, ParseError> {
        let mut cursor = Cursor { tokens: lex(text)?, pos: 0 };
        let mut rules = Vec::new();
        while cursor.peek().is_some() {
            rules.push(self.parse_rule(&mut cursor)?);
        }
        Ok(rules)
    }

    fn parse_rule(&mut self, cursor: &mut Cursor) -> Result<Tgd, ParseError> {
        let mut body: Vec<Atom> = Vec::new();
        let rule_span = cursor.peek().map(|t| t.span).unwrap_or(cursor.eof_span());
        if !cursor.eat(&TokenKind::Arrow) {
            loop {
                let (name, terms, span) = self.parse_atom_terms(cursor)?;
                if name == TRUE_RELATION {
                    return Err(ParseError::new(
                        span,
                        ParseErrorKind::Syntax,
                        "`true` is reserved and may not appear in rules",
                    ));
                }
                body.push(Atom {
                    relation: name,
                    args: terms.into_iter().map(|(v, _)| v).collect(),
                });
                if cursor.eat(&TokenKind::Arrow) {
                    break;
                }
                cursor.expect(TokenKind::Comma, "`,` or `->`")?;
            }
        }
        // optional `exists v1,...,vk .`
        let mut declared: Vec<(Var, SourceSpan)> = Vec::new();
        if let Some(Token { kind: TokenKind::Ident(word), .. }) = cursor.peek() {
            if word == "exists" {
                cursor.next();
                loop {
                    let (v, span) = cursor.expect_ident("a variable")?;
                    declared.push((v, span));
                    if cursor.eat(&TokenKind::Dot) {
                        break;
                    }
                    cursor.expect(TokenKind::Comma, "`,` or `.`")?;
                }
            }
        }
        let mut head: Vec<Atom> = Vec::new();
        loop {
            let (name, terms, span) = self.parse_atom_terms(cursor)?;
            if name == TRUE_RELATION {
                return Err(ParseError::new(
                    span,
                    ParseErrorKind::Syntax,
                    "`true` is reserved and may not appear in rules",
                ));
            }
            head.push(Atom {
                relation: name,
                args: terms.into_iter().map(|(v, _)| v).collect(),
            });
            if cursor.eat(&TokenKind::Dot) {
                break;
            }
            cursor.expect(TokenKind::Comma, "`,` or `.`")?;
        }
        let body_vars: std::collections::BTreeSet<&String> =
            body.iter().flat_map(|a| a.args.iter()).collect();
        let head_vars: std::collections::BTreeSet<&String> =
            head.iter().flat_map(|a| a.args.iter()).collect();
        for (v, span) in &declared {
            if body_vars.contains(v) {
                return Err(ParseError::new(
                    *span,
                    ParseErrorKind::Syntax,
                    format!("existential variable `{v}` also occurs in the body"),
                ));
            }
            if !head_vars.contains(v) {
                return Err(ParseError::new(
                    *span,
                    ParseErrorKind::Syntax,
                    format!("existential variable `{v}` does not occur in the head"),
                ));
            }
        }
        Tgd::new(body, head).map_err(|e| {
            ParseError::new(rule_span, ParseErrorKind::Syntax, e.to_string())
        })
    }

    /// Parses a database file: ground facts, one per statement.
    pub fn parse_database(&mut self, text: &str) -> Result<Database, ParseError> {
        let mut cursor = Cursor { tokens: lex(text)?, pos: 0 };
        let mut facts = Vec::new();
        while cursor.peek().is_some() {
            let (name, terms, span) = self.parse_atom_terms(&mut cursor)?;
            if name == TRUE_RELATION {
                return Err(ParseError::new(
                    span,
                    ParseErrorKind::Syntax,
                    "`true` is reserved and may not appear in databases",
                ));
            }
            let mut args = Vec::new();
            for (c, cspan) in terms {
                if is_variable_like(&c) {
                    return Err(ParseError::new(
                        cspan,
                        ParseErrorKind::Syntax,
                        format!("`{c}` is a reserved variable name; databases are ground"),
                    ));
                }
                if is_null_like(&c) {
                    return Err(ParseError::new(
                        cspan,
                        ParseErrorKind::Syntax,
                        format!("`{c}` is a reserved null name; databases are ground"),
                    ));
                }
                args.push(ConstantId::named(c));
            }
            facts.push(Fact { relation: name, args });
            cursor.expect(TokenKind::Dot, "`.`")?;
        }
        Ok(Database::from_facts(facts).expect("all constants named"))
    }

    /// Parses a CQ: `q(x,...) :- atom, ..., atom .` (the final `.` is
    /// optional for single-query strings).
    pub fn parse_cq(&mut self, text: &str) -> Result<Cq, ParseError> {
        let mut cursor = Cursor { tokens: lex(text)?, pos: 0 };
        let cq = self.parse_cq_inner(&mut cursor)?;
        cursor.eat(&TokenKind::Dot);
        if let Some(t) = cursor.peek() {
            return Err(ParseError::new(
                t.span,
                ParseErrorKind::Syntax,
                "trailing input after query",
            ));
        }
        Ok(cq)
    }

    fn parse_cq_inner(&mut self, cursor: &mut Cursor) -> Result<Cq, ParseError> {
        let (_, head_span) = cursor.expect_ident("a query head")?;
        cursor.expect(TokenKind::LParen, "`(`")?;
        let mut answer_vars: Vec<Var> = Vec::new();
        if !cursor.eat(&TokenKind::RParen) {
            loop {
                let (v, _) = cursor.expect_ident("an answer variable")?;
                answer_vars.push(v);
                if cursor.eat(&TokenKind::RParen) {
                    break;
                }
                cursor.expect(TokenKind::Comma, "`,` or `)`")?;
            }
        }
        cursor.expect(TokenKind::Entail, "`:-`")?;
        let mut atoms: Vec<Atom> = Vec::new();
        loop {
            let (name, terms, span) = self.parse_atom_terms(cursor)?;
            if name == TRUE_RELATION {
                return Err(ParseError::new(
                    span,
                    ParseErrorKind::Syntax,
                    "`true` is reserved and may not appear in queries",
                ));
            }
            atoms.push(Atom {
                relation: name,
                args: terms.into_iter().map(|(v, _)| v).collect(),
            });
            match cursor.peek().map(|t| &t.kind) {
                Some(TokenKind::Comma) => {
                    cursor.next();
                }
                _ => break,
            }
        }
        let bound: std::collections::BTreeSet<&String> =
            atoms.iter().flat_map(|a| a.args.iter()).collect();
        for v in &answer_vars {
            if !bound.contains(v) {
                return Err(ParseError::new(
                    head_span,
                    ParseErrorKind::UnboundFrontier,
                    format!("answer variable `{v}` does not occur in the body"),
                ));
            }
        }
        let q = Cq {
            answer_vars,
            atoms: atoms.into_iter().collect(),
        };
        Ok(q)
    }
}

pub fn parse_rules(text: &str) -> Result<Vec<Tgd>, ParseError> {
    Session::new().parse_rules(text)
}

pub fn parse_database(text: &str) -> Result<Database, ParseError> {
    Session::new().parse_database(text)
}

pub fn parse_cq(text: &str) -> Result<Cq, ParseError> {
    Session::new().parse_cq(text)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

pub fn serialize_rules(rules: &[Tgd]) -> String {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&rule.to_string());
        out.push_str(".\n");
    }
    out
}

pub fn serialize_database(db: &Database) -> String {
    db.instance().to_string()
}

pub fn serialize_cq(q: &Cq) -> String {
    format!("{q}.\n")
}

/// Leveled chase dump: facts grouped under `# level k` banners.
pub fn serialize_chase(result: &crate::chase::ChaseResult) -> String {
    let mut by_level: BTreeMap<u32, Vec<&Fact>> = BTreeMap::new();
    for (fact, lvl) in &result.levels {
        by_level.entry(*lvl).or_default().push(fact);
    }
    let mut out = String::new();
    for (lvl, facts) in by_level {
        out.push_str(&format!("# level {lvl}\n"));
        for fact in facts {
            out.push_str(&format!("{fact}.\n"));
        }
    }
    out.push_str(&format!(
        "# saturated {}\n# rounds {}\n",
        result.saturated, result.rounds
    ));
    out
}

/// Emits the JSON verdict document (sorted keys, byte-stable).
pub fn emit_verdict(v: &Verdict) -> String {
    emit_verdict_with(v, &BTreeMap::new())
}

/// Like [`emit_verdict`], with extra top-level context fields (inputs,
/// subcommand) merged in; keys stay sorted.
pub fn emit_verdict_with(v: &Verdict, extra: &BTreeMap<String, Value>) -> String {
    let verdict = match v.value {
        crate::verdict::VerdictValue::Holds => "holds",
        crate::verdict::VerdictValue::Fails => "fails",
        crate::verdict::VerdictValue::Unknown => "unknown",
    };
    let mut doc = serde_json::Map::new();
    doc.insert("verdict".to_string(), json!(verdict));
    doc.insert(
        "certificate".to_string(),
        match &v.certificate {
            Some(c) => serde_json::to_value(c).expect("certificate serializes"),
            None => Value::Null,
        },
    );
    doc.insert("budget".to_string(), json!(v.budget));
    if let Some(basis) = &v.basis {
        doc.insert("basis".to_string(), serde_json::to_value(basis).unwrap());
    }
    for (k, val) in extra {
        doc.insert(k.clone(), val.clone());
    }
    serde_json::to_string_pretty(&Value::Object(doc)).expect("verdict serializes")
}

// ---------------------------------------------------------------------------
// Labeled instance trees
// ---------------------------------------------------------------------------

/// Textual form of a labeled instance tree plus named type definitions.
///
/// ```text
/// node v0 { R(c1,c0). }
/// node v1 { true(c2). }
/// edge v1 -> v0.
/// label c0 t1.
/// type t1 { q(x) :- B(x). q() :- B(x). }
/// ```
#[derive(Debug, Clone, Default)]
pub struct TreeFile {
    pub nodes: Vec<(String, Instance)>,
    pub edges: Vec<(String, String)>,
    pub labels: BTreeMap<String, String>,
    pub types: BTreeMap<String, Vec<Cq>>,
}

impl Session {
    pub fn parse_tree(&mut self, text: &str) -> Result<TreeFile, ParseError> {
        let mut cursor = Cursor { tokens: lex(text)?, pos: 0 };
        let mut tree = TreeFile::default();
        while cursor.peek().is_some() {
            let (word, span) = cursor.expect_ident("`node`, `edge`, `label` or `type`")?;
            match word.as_str() {
                "node" => {
                    let (name, _) = cursor.expect_ident("a node name")?;
                    cursor.expect(TokenKind::LBrace, "`{`")?;
                    let mut facts = Vec::new();
                    while !cursor.eat(&TokenKind::RBrace) {
                        let (rel, terms, _) = self.parse_atom_terms(&mut cursor)?;
                        facts.push(Fact {
                            relation: rel,
                            args: terms
                                .into_iter()
                                .map(|(c, _)| ConstantId::named(c))
                                .collect(),
                        });
                        cursor.expect(TokenKind::Dot, "`.`")?;
                    }
                    tree.nodes.push((name, Instance::from_facts(facts)));
                }
                "edge" => {
                    let (from, _) = cursor.expect_ident("a node name")?;
                    cursor.expect(TokenKind::Arrow, "`->`")?;
                    let (to, _) = cursor.expect_ident("a node name")?;
                    cursor.expect(TokenKind::Dot, "`.`")?;
                    tree.edges.push((from, to));
                }
                "label" => {
                    let (constant, _) = cursor.expect_ident("a constant")?;
                    let (ty, _) = cursor.expect_ident("a type name")?;
                    cursor.expect(TokenKind::Dot, "`.`")?;
                    tree.labels.insert(constant, ty);
                }
                "type" => {
                    let (name, _) = cursor.expect_ident("a type name")?;
                    cursor.expect(TokenKind::LBrace, "`{`")?;
                    let mut cqs = Vec::new();
                    while !cursor.eat(&TokenKind::RBrace) {
                        let q = self.parse_cq_inner(&mut cursor)?;
                        cursor.expect(TokenKind::Dot, "`.`")?;
                        cqs.push(q);
                    }
                    tree.types.insert(name, cqs);
                }
                other => {
                    return Err(ParseError::new(
                        span,
                        ParseErrorKind::Syntax,
                        format!("unknown statement `{other}`"),
                    ));
                }
            }
        }
        Ok(tree)
    }
}

/// Parses a fact rendered by `Display` (used by certificate re-verifiers;
/// identifiers `n<digits>` decode as nulls).
pub fn parse_certificate_fact(text: &str) -> Result<Fact, ParseError> {
    let mut cursor = Cursor { tokens: lex(text)?, pos: 0 };
    let mut session = Session::new();
    let (name, terms, _) = session.parse_atom_terms(&mut cursor)?;
    Ok(Fact {
        relation: name,
        args: terms
            .into_iter()
            .map(|(c, _)| {
                if is_null_like(&c) {
                    ConstantId::Null(c[1..].parse().expect("digits"))
                } else {
                    ConstantId::named(c)
                }
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::classify;

    #[test]
    fn parse_example_rule() {
        let rules = parse_rules("A(x) -> exists y. S(x,y), B(y).").unwrap();
        assert_eq!(rules.len(), 1);
        let flags = classify(&rules[0]).unwrap();
        assert!(flags.linear && flags.frontier_one);
        assert_eq!(rules[0].frontier, vec!["x".to_string()]);
    }

    #[test]
    fn parse_empty_body_rule() {
        let rules = parse_rules("-> exists x. P(x).").unwrap();
        assert_eq!(rules.len(), 1);
        assert!(rules[0].body.is_empty());
    }

    #[test]
    fn arity_mismatch_detected() {
        let err = parse_rules("A(x), A(x,y) -> B(x).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ArityMismatch);
    }

    #[test]
    fn parse_database_basics() {
        let db = parse_database("Encounter(b1,b0).").unwrap();
        assert_eq!(db.instance().len(), 1);
        let reflexive = parse_database("R(a,a).").unwrap();
        assert_eq!(reflexive.instance().len(), 1);
        assert!(parse_database("").unwrap().instance().is_empty());
        // duplicates collapse
        let dedup = parse_database("R(a,b). R(a,b).").unwrap();
        assert_eq!(dedup.instance().len(), 1);
    }

    #[test]
    fn database_rejects_variable_like_tokens() {
        let err = parse_database("R(x,a).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        let err2 = parse_database("R(n3,a).").unwrap_err();
        assert_eq!(err2.kind, ParseErrorKind::Syntax);
    }

    #[test]
    fn parse_cq_shapes() {
        let boolean = parse_cq("q() :- R(x,y), R(y,z).").unwrap();
        assert!(boolean.is_boolean());
        assert_eq!(boolean.atoms.len(), 2);

        let unary = parse_cq("q(x) :- A(x).").unwrap();
        assert_eq!(unary.arity(), 1);

        let err = parse_cq("q(x) :- B(y).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnboundFrontier);
    }

    #[test]
    fn round_trip_rules_and_database() {
        let text = "A(x) -> exists y. S(x,y), B(y).\nR(x,y), S(y,z) -> T(x,z).\n";
        let rules = parse_rules(text).unwrap();
        let reparsed = parse_rules(&serialize_rules(&rules)).unwrap();
        assert_eq!(rules, reparsed);

        let db = parse_database("R(a,b). A(c).").unwrap();
        let reparsed = parse_database(&serialize_database(&db)).unwrap();
        assert_eq!(db, reparsed);

        let q = parse_cq("q(x) :- R(x,y), S(y,x).").unwrap();
        let reparsed = parse_cq(&serialize_cq(&q)).unwrap();
        assert_eq!(q.canonicalize(), reparsed.canonicalize());
    }

    #[test]
    fn spans_are_one_based() {
        let err = parse_rules("A(x) ->\n  B(x,).").unwrap_err();
        assert_eq!(err.span.line, 2);
        assert!(err.span.column >= 1);
    }

    #[test]
    fn true_reserved_in_user_input() {
        assert!(parse_rules("A(x) -> true(x).").is_err());
        assert!(parse_database("true(c).").is_err());
        assert!(parse_cq("q(x) :- true(x).").is_err());
    }

    #[test]
    fn emit_verdict_shapes() {
        use crate::verdict::{Basis, Certificate, Verdict};
        let fails = Verdict::fails(
            Certificate::Database { facts: vec!["A(c)".to_string()] },
            Basis::SaturatedChase,
        );
        let text = emit_verdict(&fails);
        assert!(text.contains("\"verdict\": \"fails\""));
        assert!(text.contains("\"A(c)\""));

        let holds = Verdict::holds(
            Certificate::SearchSummary { summary: BTreeMap::new() },
            Basis::FiniteProblem,
        );
        let text = emit_verdict(&Verdict { certificate: None, ..holds });
        assert!(text.contains("\"certificate\": null"));

        let unknown = Verdict::unknown(crate::verdict::budget_echo(&[("depth", 8)]));
        let text = emit_verdict(&unknown);
        assert!(text.contains("\"depth\": 8"));
    }

    #[test]
    fn parse_tree_file() {
        let text = "node v0 { R(c1,c0). }\nnode v1 { true(c2). }\nedge v1 -> v0.\nlabel c0 t1.\ntype t1 { q(x) :- B(x). q() :- B(x). }\n";
        let tree = Session::new().parse_tree(text).unwrap();
        assert_eq!(tree.nodes.len(), 2);
        assert_eq!(tree.edges, vec![("v1".to_string(), "v0".to_string())]);
        assert_eq!(tree.labels["c0"], "t1");
        assert_eq!(tree.types["t1"].len(), 2);
    }

    #[test]
    fn parsing_is_total_on_junk() {
        for junk in [
            "((((", "R(", "-> ->", "q( :-", "A(x) -> ", "R(a,b) R(c,d)", "....",
            "node", "exists x.", "A(x,", "#", "A(x) -> B(x)",
        ] {
            let _ = parse_rules(junk);
            let _ = parse_database(junk);
            let _ = parse_cq(junk);
            let _ = Session::new().parse_tree(junk);
        }
    }
}
