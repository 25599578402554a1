//! Recursive-descent parser for `.tm` documents. Collects every syntax
//! error it can, resynchronizing at statement keywords.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::lexer::{lex, Tok, Token};
use super::{
    ActionDecl, ArcRefDecl, Diagnostic, Document, EdgeDecl, EventDecl, FlowDecl, NegEdgeDecl,
    ScenarioDecl, SourceSpan, Spanned, ThimacDecl, TimelineDecl, TimelineEventDecl, TriggerDecl,
    VarDeclNode,
};
use crate::event::ArcKind;
use crate::expr::{Assignment, BinOp, Expr, UnOp, Value, ValueType};
use crate::model::ActionKind;
use crate::timeline::{Category, TimeAnchor, TimePoint};

const KEYWORDS: &[&str] = &[
    "thimac", "create", "process", "release", "transfer", "receive", "in", "out", "as", "flow",
    "trigger", "var", "queue", "event", "edge", "negedge", "revert", "region", "guard", "effect",
    "external", "note", "timeline", "scenario", "bind", "stimulus", "at", "from", "to", "after",
    "unknown", "int", "bool", "text", "true", "false",
];

const STATEMENT_KEYWORDS: &[&str] = &[
    "thimac", "flow", "trigger", "var", "queue", "event", "edge", "negedge", "timeline", "scenario",
];

/// Parse UTF-8 text into a [`Document`]. On failure, all syntax errors are
/// returned, each with a span inside the input.
pub fn parse(file_name: &str, text: &str) -> Result<Document, Vec<Diagnostic>> {
    let file: Arc<str> = Arc::from(file_name);
    let tokens = lex(&file, text)?;
    let mut parser = Parser {
        file,
        tokens,
        pos: 0,
        errors: Vec::new(),
    };
    let doc = parser.document();
    if parser.errors.is_empty() {
        Ok(doc)
    } else {
        Err(parser.errors)
    }
}

struct Parser {
    file: Arc<str>,
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<Diagnostic>,
}

struct ParseAbort;

type PResult<T> = Result<T, ParseAbort>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1)
    }

    fn next(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).cloned();
        if token.is_some() {
            self.pos += 1;
        }
        token
    }

    fn eof_span(&self) -> SourceSpan {
        self.tokens
            .last()
            .map(|t| SourceSpan {
                file: self.file.clone(),
                line: t.span.line,
                column: t.end_column,
            })
            .unwrap_or_else(|| SourceSpan::start_of(&self.file))
    }

    fn current_span(&self) -> SourceSpan {
        self.peek()
            .map(|t| t.span.clone())
            .unwrap_or_else(|| self.eof_span())
    }

    fn error(&mut self, expected: &str) -> ParseAbort {
        let (span, found) = match self.peek() {
            Some(token) => (token.span.clone(), token.tok.describe()),
            None => (self.eof_span(), "end of input".into()),
        };
        self.errors.push(Diagnostic {
            span,
            rule: "SyntaxError".into(),
            message: format!("expected {expected}, found {found}"),
        });
        ParseAbort
    }

    fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(name), .. }) if name == word)
    }

    fn eat_keyword(&mut self, word: &str) -> bool {
        if self.is_keyword(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, word: &str) -> PResult<()> {
        if self.eat_keyword(word) {
            Ok(())
        } else {
            Err(self.error(&format!("`{word}`")))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if self.peek().map(|t| &t.tok) == Some(&tok) {
            Ok(self.next().expect("peeked"))
        } else {
            Err(self.error(&tok.describe()))
        }
    }

    /// A plain identifier that is not a reserved word.
    fn ident(&mut self, what: &str) -> PResult<(String, Token)> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(name),
                ..
            }) if !KEYWORDS.contains(&name.as_str()) => {
                let token = self.next().expect("peeked");
                let Tok::Ident(name) = token.tok.clone() else {
                    unreachable!()
                };
                Ok((name, token))
            }
            _ => Err(self.error(what)),
        }
    }

    /// A name that may contain dashes (scenario and timeline names). The
    /// dash must be column-adjacent: `reject-partial`, not `reject -
    /// partial`.
    fn dashed_name(&mut self, what: &str) -> PResult<(String, Token)> {
        let (mut name, token) = self.ident(what)?;
        let mut end = token.end_column;
        let line = token.span.line;
        loop {
            let dash_adjacent = matches!(
                self.peek(),
                Some(Token { tok: Tok::Minus, span, .. }) if span.line == line && span.column == end
            );
            if !dash_adjacent {
                break;
            }
            let glued = matches!(
                self.peek2(),
                Some(Token { tok: Tok::Ident(_), span, .. })
                    if span.line == line && span.column == end + 1
            );
            if !glued {
                break;
            }
            self.next();
            let part = self.next().expect("peeked ident");
            let Tok::Ident(word) = part.tok else {
                unreachable!()
            };
            name.push('-');
            name.push_str(&word);
            end = part.end_column;
        }
        Ok((name, token))
    }

    /// `Thimac.action` reference. The local action name may be a kind
    /// keyword (`Customer.create`) or a plain identifier (`Shop.compare`).
    fn action_ref(&mut self) -> PResult<String> {
        let (thimac, _) = self.ident("thimac name")?;
        self.expect(Tok::Dot)?;
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(name),
                ..
            }) => {
                let name = name.clone();
                self.pos += 1;
                Ok(format!("{thimac}.{name}"))
            }
            _ => Err(self.error("action name")),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Token {
                tok: Tok::Str(_), ..
            }) => {
                let token = self.next().expect("peeked");
                let Tok::Str(s) = token.tok else {
                    unreachable!()
                };
                Ok(s)
            }
            _ => Err(self.error(what)),
        }
    }

    fn note_clause(&mut self) -> PResult<Option<String>> {
        if self.eat_keyword("note") {
            Ok(Some(self.string("note text")?))
        } else {
            Ok(None)
        }
    }

    /// Skip ahead to the next top-level statement keyword, balancing
    /// braces, so one bad statement does not hide the rest.
    fn synchronize(&mut self) {
        let mut depth = 0i32;
        while let Some(token) = self.peek() {
            match &token.tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => depth -= 1,
                Tok::Ident(name) if depth <= 0 && STATEMENT_KEYWORDS.contains(&name.as_str()) => {
                    return;
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn document(&mut self) -> Document {
        let mut doc = Document::default();
        let mut names: BTreeSet<(&'static str, String)> = BTreeSet::new();
        while self.peek().is_some() {
            let before = self.pos;
            if self.statement(&mut doc, &mut names).is_err() {
                if self.pos == before {
                    self.pos += 1;
                }
                self.synchronize();
            }
        }
        doc
    }

    fn check_unique(
        &mut self,
        names: &mut BTreeSet<(&'static str, String)>,
        namespace: &'static str,
        name: &str,
        span: &SourceSpan,
    ) {
        if !names.insert((namespace, name.to_string())) {
            self.errors.push(Diagnostic {
                span: span.clone(),
                rule: "DuplicateName".into(),
                message: format!("{namespace} `{name}` declared more than once"),
            });
        }
    }

    fn statement(
        &mut self,
        doc: &mut Document,
        names: &mut BTreeSet<(&'static str, String)>,
    ) -> PResult<()> {
        let span = self.current_span();
        if self.eat_keyword("thimac") {
            let thimac = self.thimac_block(None, names)?;
            doc.thimacs.extend(thimac);
            Ok(())
        } else if self.eat_keyword("flow") {
            self.flow_statement(doc, span)
        } else if self.eat_keyword("trigger") {
            let from = self.action_ref()?;
            self.expect(Tok::Arrow)?;
            let to = self.action_ref()?;
            doc.triggers.push(Spanned {
                node: TriggerDecl { from, to },
                span,
            });
            Ok(())
        } else if self.eat_keyword("var") {
            let (name, _) = self.ident("variable name")?;
            self.check_unique(names, "variable", &name, &span);
            self.expect(Tok::Colon)?;
            let ty = self.value_type()?;
            let default = if self.eat(&Tok::Equal) {
                Some(self.literal(ty)?)
            } else {
                None
            };
            doc.variables.push(Spanned {
                node: VarDeclNode { name, ty, default },
                span,
            });
            Ok(())
        } else if self.eat_keyword("queue") {
            let (name, _) = self.ident("queue name")?;
            self.check_unique(names, "queue", &name, &span);
            doc.queues.push(Spanned { node: name, span });
            Ok(())
        } else if self.eat_keyword("event") {
            let event = self.event_statement(names, &span)?;
            doc.events.push(Spanned { node: event, span });
            Ok(())
        } else if self.eat_keyword("edge") {
            let (from, _) = self.ident("event id")?;
            self.expect(Tok::Arrow)?;
            let (to, _) = self.ident("event id")?;
            let guard = if self.eat_keyword("guard") {
                Some(self.expression()?)
            } else {
                None
            };
            doc.edges.push(Spanned {
                node: EdgeDecl { from, to, guard },
                span,
            });
            Ok(())
        } else if self.eat_keyword("negedge") {
            let (from, _) = self.ident("event id")?;
            self.expect(Tok::Arrow)?;
            self.expect_keyword("revert")?;
            let (revert, _) = self.ident("event id")?;
            doc.negedges.push(Spanned {
                node: NegEdgeDecl { from, revert },
                span,
            });
            Ok(())
        } else if self.eat_keyword("timeline") {
            let timeline = self.timeline_statement(names, &span)?;
            doc.timelines.push(Spanned {
                node: timeline,
                span,
            });
            Ok(())
        } else if self.eat_keyword("scenario") {
            let scenario = self.scenario_statement(names, &span)?;
            doc.scenarios.push(Spanned {
                node: scenario,
                span,
            });
            Ok(())
        } else {
            Err(self.error("a statement (thimac, flow, trigger, var, queue, event, edge, negedge, timeline, scenario)"))
        }
    }

    /// Returns the thimac and all nested sub-thimacs, flattened, parents
    /// first.
    fn thimac_block(
        &mut self,
        parent: Option<&str>,
        names: &mut BTreeSet<(&'static str, String)>,
    ) -> PResult<Vec<Spanned<ThimacDecl>>> {
        let span = self.current_span();
        let (name, _) = self.ident("thimac name")?;
        self.check_unique(names, "thimac", &name, &span);
        let note = self.note_clause()?;
        self.expect(Tok::LBrace)?;
        let mut decl = ThimacDecl {
            name: name.clone(),
            parent: parent.map(String::from),
            note,
            actions: Vec::new(),
        };
        let mut nested = Vec::new();
        let mut local_names: BTreeSet<String> = BTreeSet::new();
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.eat_keyword("thimac") {
                nested.extend(self.thimac_block(Some(&name), names)?);
                continue;
            }
            let action_span = self.current_span();
            let action = self.action_decl()?;
            if !local_names.insert(action.local_name().to_string()) {
                self.errors.push(Diagnostic {
                    span: action_span.clone(),
                    rule: "DuplicateName".into(),
                    message: format!(
                        "action `{}.{}` declared more than once; use `as NAME`",
                        name,
                        action.local_name()
                    ),
                });
            }
            decl.actions.push(Spanned {
                node: action,
                span: action_span,
            });
        }
        let mut out = vec![Spanned { node: decl, span }];
        out.extend(nested);
        Ok(out)
    }

    fn action_decl(&mut self) -> PResult<ActionDecl> {
        let kind = if self.eat_keyword("create") {
            ActionKind::Create
        } else if self.eat_keyword("process") {
            ActionKind::Process
        } else if self.eat_keyword("release") {
            ActionKind::Release
        } else if self.eat_keyword("receive") {
            ActionKind::Receive
        } else if self.eat_keyword("transfer") {
            if self.eat_keyword("in") {
                ActionKind::TransferIn
            } else if self.eat_keyword("out") {
                ActionKind::TransferOut
            } else {
                return Err(self.error("`in` or `out` after `transfer`"));
            }
        } else {
            return Err(self.error("an action (create, process, release, transfer, receive)"));
        };

        // Optional entity label on `create`.
        let entity = if kind == ActionKind::Create {
            match self.peek() {
                Some(Token {
                    tok: Tok::Ident(word),
                    ..
                }) if !KEYWORDS.contains(&word.as_str()) => Some(self.ident("entity label")?.0),
                _ => None,
            }
        } else {
            None
        };
        let name = if self.eat_keyword("as") {
            // Normalize `as create` on a create back to the default.
            Some(self.ident("action name")?.0).filter(|n| n != kind.default_name())
        } else {
            None
        };
        let note = self.note_clause()?;
        Ok(ActionDecl {
            kind,
            name,
            entity,
            note,
        })
    }

    fn flow_statement(&mut self, doc: &mut Document, span: SourceSpan) -> PResult<()> {
        // `flow LABEL: a -> b` or `flow a -> b`; a leading label is an
        // identifier directly followed by `:`.
        let label = match (self.peek(), self.peek2()) {
            (
                Some(Token {
                    tok: Tok::Ident(word),
                    ..
                }),
                Some(Token {
                    tok: Tok::Colon, ..
                }),
            ) if !KEYWORDS.contains(&word.as_str()) => {
                let (label, _) = self.ident("flow label")?;
                self.expect(Tok::Colon)?;
                Some(label)
            }
            _ => None,
        };
        let mut from = self.action_ref()?;
        self.expect(Tok::Arrow)?;
        loop {
            let to = self.action_ref()?;
            doc.flows.push(Spanned {
                node: FlowDecl {
                    label: label.clone(),
                    from: from.clone(),
                    to: to.clone(),
                },
                span: span.clone(),
            });
            if self.eat(&Tok::Arrow) {
                from = to;
            } else {
                break;
            }
        }
        Ok(())
    }

    fn event_statement(
        &mut self,
        names: &mut BTreeSet<(&'static str, String)>,
        span: &SourceSpan,
    ) -> PResult<EventDecl> {
        let (id, _) = self.ident("event id")?;
        self.check_unique(names, "event", &id, span);
        let external = self.eat_keyword("external");
        let label = match self.peek() {
            Some(Token {
                tok: Tok::Str(_), ..
            }) => Some(self.string("label")?),
            _ => None,
        };
        let note = self.note_clause()?;
        self.expect(Tok::Equal)?;
        self.expect_keyword("region")?;
        self.expect(Tok::LBrace)?;

        let mut actions = Vec::new();
        let mut arcs = Vec::new();
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            let mut from = self.action_ref()?;
            let mut bare = true;
            loop {
                let kind = if self.eat(&Tok::Arrow) {
                    Some(ArcKind::Flow)
                } else if self.eat(&Tok::TriggerArrow) {
                    Some(ArcKind::Trigger)
                } else {
                    None
                };
                let Some(kind) = kind else { break };
                bare = false;
                let to = self.action_ref()?;
                arcs.push(ArcRefDecl {
                    kind,
                    from: from.clone(),
                    to: to.clone(),
                });
                from = to;
            }
            if bare {
                actions.push(from);
            }
        }

        let mut guard = None;
        let mut effects = Vec::new();
        loop {
            if self.eat_keyword("guard") {
                if guard.is_some() {
                    let span = self.current_span();
                    self.errors.push(Diagnostic {
                        span,
                        rule: "SyntaxError".into(),
                        message: "an event may carry at most one guard".into(),
                    });
                    return Err(ParseAbort);
                }
                guard = Some(self.expression()?);
            } else if self.eat_keyword("effect") {
                let (var, _) = self.ident("variable name")?;
                self.expect(Tok::Assign)?;
                let expr = self.expression()?;
                effects.push(Assignment { var, expr });
            } else {
                break;
            }
        }

        Ok(EventDecl {
            id,
            external,
            label,
            note,
            actions,
            arcs,
            guard,
            effects,
        })
    }

    fn timeline_statement(
        &mut self,
        names: &mut BTreeSet<(&'static str, String)>,
        span: &SourceSpan,
    ) -> PResult<TimelineDecl> {
        let (name, _) = self.dashed_name("timeline name")?;
        self.check_unique(names, "timeline", &name, span);
        self.expect(Tok::LBrace)?;
        let mut events = Vec::new();
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            let event_span = self.current_span();
            self.expect_keyword("event")?;
            let (id, _) = self.ident("event id")?;
            let category = match self.peek() {
                Some(Token { tok: Tok::Ident(word), .. }) => match word.parse::<Category>() {
                    Ok(category) => {
                        self.pos += 1;
                        category
                    }
                    Err(_) => {
                        return Err(self.error(
                            "a category (Admission, Medication, LabResult, Diagnosis, Procedure, Other)",
                        ))
                    }
                },
                _ => {
                    return Err(self.error("a category name"));
                }
            };
            let label = self.string("event label")?;
            let anchor = self.anchor()?;
            events.push(Spanned {
                node: TimelineEventDecl {
                    id,
                    category,
                    label,
                    anchor,
                },
                span: event_span,
            });
        }
        Ok(TimelineDecl { name, events })
    }

    fn anchor(&mut self) -> PResult<TimeAnchor> {
        if self.eat_keyword("at") {
            Ok(TimeAnchor::Instant(self.date()?))
        } else if self.eat_keyword("from") {
            let start = self.date()?;
            self.expect_keyword("to")?;
            let end = self.date()?;
            match TimeAnchor::interval(start, end) {
                Ok(anchor) => Ok(anchor),
                Err(message) => {
                    let span = self.current_span();
                    self.errors.push(Diagnostic {
                        span,
                        rule: "SyntaxError".into(),
                        message,
                    });
                    Err(ParseAbort)
                }
            }
        } else if self.eat_keyword("after") {
            Ok(TimeAnchor::After(self.date()?))
        } else if self.eat_keyword("unknown") {
            Ok(TimeAnchor::Unknown)
        } else {
            Err(self.error("an anchor (`at`, `from .. to ..`, `after`, `unknown`)"))
        }
    }

    fn date(&mut self) -> PResult<TimePoint> {
        match self.peek() {
            Some(Token {
                tok: Tok::Date(_), ..
            }) => {
                let token = self.next().expect("peeked");
                let Tok::Date(raw) = token.tok else {
                    unreachable!()
                };
                match raw.parse::<TimePoint>() {
                    Ok(point) => Ok(point),
                    Err(message) => {
                        self.errors.push(Diagnostic {
                            span: token.span,
                            rule: "SyntaxError".into(),
                            message,
                        });
                        Err(ParseAbort)
                    }
                }
            }
            _ => Err(self.error("an ISO-8601 date")),
        }
    }

    fn scenario_statement(
        &mut self,
        names: &mut BTreeSet<(&'static str, String)>,
        span: &SourceSpan,
    ) -> PResult<ScenarioDecl> {
        let (name, _) = self.dashed_name("scenario name")?;
        self.check_unique(names, "scenario", &name, span);
        self.expect(Tok::LBrace)?;
        let mut bindings = Vec::new();
        let mut stimuli = Vec::new();
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.eat_keyword("bind") {
                let (var, _) = self.ident("variable name")?;
                self.expect(Tok::Equal)?;
                let value = self.any_literal()?;
                bindings.push((var, value));
            } else if self.eat_keyword("stimulus") {
                let (event, _) = self.ident("event id")?;
                self.expect_keyword("at")?;
                let step = match self.peek().map(|t| t.tok.clone()) {
                    Some(Tok::Int(n)) if n >= 0 => {
                        self.pos += 1;
                        n as u64
                    }
                    _ => return Err(self.error("a step number")),
                };
                stimuli.push((event, step));
            } else {
                return Err(self.error("`bind` or `stimulus`"));
            }
        }
        Ok(ScenarioDecl {
            name,
            bindings,
            stimuli,
        })
    }

    fn value_type(&mut self) -> PResult<ValueType> {
        if self.eat_keyword("int") {
            Ok(ValueType::Int)
        } else if self.eat_keyword("bool") {
            Ok(ValueType::Bool)
        } else if self.eat_keyword("text") {
            Ok(ValueType::Text)
        } else {
            Err(self.error("a type (int, bool, text)"))
        }
    }

    fn literal(&mut self, ty: ValueType) -> PResult<Value> {
        let span = self.current_span();
        let value = self.any_literal()?;
        if value.value_type() != ty {
            self.errors.push(Diagnostic {
                span,
                rule: "SyntaxError".into(),
                message: format!(
                    "expected a literal of type {ty}, found {}",
                    value.value_type()
                ),
            });
            return Err(ParseAbort);
        }
        Ok(value)
    }

    fn any_literal(&mut self) -> PResult<Value> {
        let negative = self.eat(&Tok::Minus);
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Value::Int(if negative { -n } else { n }))
            }
            Some(Tok::Ident(word)) if !negative && word == "true" => {
                self.pos += 1;
                Ok(Value::Bool(true))
            }
            Some(Tok::Ident(word)) if !negative && word == "false" => {
                self.pos += 1;
                Ok(Value::Bool(false))
            }
            Some(Tok::Str(s)) if !negative => {
                self.pos += 1;
                Ok(Value::Text(s))
            }
            _ => Err(self.error("a literal")),
        }
    }

    // Expression grammar, loosest first: || < && < comparison < additive.
    fn expression(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.comparison()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.comparison()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    /// Comparisons do not chain: `a < b < c` is a syntax error.
    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek().map(|t| &t.tok) {
            Some(Tok::Lt) => Some(BinOp::Lt),
            Some(Tok::Le) => Some(BinOp::Le),
            Some(Tok::Gt) => Some(BinOp::Gt),
            Some(Tok::Ge) => Some(BinOp::Ge),
            Some(Tok::EqEq) => Some(BinOp::Eq),
            Some(Tok::NotEq) => Some(BinOp::Ne),
            _ => None,
        };
        match op {
            Some(op) => {
                self.pos += 1;
                let rhs = self.additive()?;
                Ok(Expr::binary(op, lhs, rhs))
            }
            None => Ok(lhs),
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.tok) {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            // Fold literal negation so `-5` is one literal.
            Ok(match self.unary()? {
                Expr::Literal(Value::Int(n)) => Expr::Literal(Value::Int(-n)),
                other => Expr::Unary(UnOp::Neg, Box::new(other)),
            })
        } else if self.eat(&Tok::Bang) {
            Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::LParen) {
            let inner = self.expression()?;
            self.expect(Tok::RParen)?;
            return Ok(inner);
        }
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Expr::int(n))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Text(s)))
            }
            Some(Tok::Ident(word)) if word == "true" => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Bool(true)))
            }
            Some(Tok::Ident(word)) if word == "false" => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Bool(false)))
            }
            Some(Tok::Ident(word)) if !KEYWORDS.contains(&word.as_str()) => {
                self.pos += 1;
                Ok(Expr::var(word))
            }
            _ => Err(self.error("an expression")),
        }
    }
}

/// Parse a guard/effect expression on its own, used by tests and tooling.
pub fn parse_expression(text: &str) -> Result<Expr, Vec<Diagnostic>> {
    let file: Arc<str> = Arc::from("<expr>");
    let tokens = lex(&file, text)?;
    let mut parser = Parser {
        file,
        tokens,
        pos: 0,
        errors: Vec::new(),
    };
    match parser.expression() {
        Ok(expr) if parser.pos == parser.tokens.len() && parser.errors.is_empty() => Ok(expr),
        Ok(_) => {
            let _ = parser.error("end of expression");
            Err(parser.errors)
        }
        Err(_) => Err(parser.errors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(text: &str) -> Document {
        parse("test.tm", text).unwrap_or_else(|e| panic!("parse failed: {e:?}"))
    }

    #[test]
    fn empty_input_is_empty_document() {
        let doc = parse_ok("");
        assert!(doc.is_empty());
    }

    #[test]
    fn create_binds_entity_label() {
        let doc = parse_ok("thimac Customer { create order }");
        assert_eq!(doc.thimacs.len(), 1);
        let actions = &doc.thimacs[0].node.actions;
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].node.kind, ActionKind::Create);
        assert_eq!(actions[0].node.entity.as_deref(), Some("order"));
        assert_eq!(actions[0].node.local_name(), "create");
    }

    #[test]
    fn nested_thimacs_flatten_with_parent() {
        let doc = parse_ok("thimac Socrates { create thimac Walk { create process } }");
        assert_eq!(doc.thimacs.len(), 2);
        assert_eq!(doc.thimacs[1].node.name, "Walk");
        assert_eq!(doc.thimacs[1].node.parent.as_deref(), Some("Socrates"));
    }

    #[test]
    fn flow_chain_expands_to_arcs() {
        let doc = parse_ok(
            "thimac A { create release transfer out }\nflow order: A.create -> A.release -> A.transfer_out",
        );
        assert_eq!(doc.flows.len(), 2);
        assert_eq!(doc.flows[0].node.label.as_deref(), Some("order"));
        assert_eq!(doc.flows[0].node.from, "A.create");
        assert_eq!(doc.flows[1].node.from, "A.release");
    }

    #[test]
    fn event_with_region_guard_effects() {
        let doc = parse_ok(
            "event E4 = region { Shop.compare }\n  guard Quantity <= Inventory\n  effect Inventory := Inventory - Quantity",
        );
        let event = &doc.events[0].node;
        assert_eq!(event.id, "E4");
        assert_eq!(event.actions, vec!["Shop.compare".to_string()]);
        assert_eq!(
            event.guard.as_ref().unwrap().to_string(),
            "Quantity <= Inventory"
        );
        assert_eq!(
            event.effects[0].to_string(),
            "Inventory := Inventory - Quantity"
        );
    }

    #[test]
    fn region_chains_mix_flow_and_trigger() {
        let doc = parse_ok("event E7 = region { Shop.pay ~> Inv.deliver -> Inv.ship }");
        let event = &doc.events[0].node;
        assert_eq!(event.arcs.len(), 2);
        assert_eq!(event.arcs[0].kind, ArcKind::Trigger);
        assert_eq!(event.arcs[1].kind, ArcKind::Flow);
        assert!(event.actions.is_empty());
    }

    #[test]
    fn scenario_names_glue_dashes() {
        let doc = parse_ok("scenario reject-partial { bind Inventory = 2 stimulus E14 at 5 }");
        let scenario = &doc.scenarios[0].node;
        assert_eq!(scenario.name, "reject-partial");
        assert_eq!(scenario.bindings[0], ("Inventory".into(), Value::Int(2)));
        assert_eq!(scenario.stimuli[0], ("E14".into(), 5));
    }

    #[test]
    fn timeline_block_parses_anchors() {
        let doc = parse_ok(
            "timeline dili {\n  event E1 Admission \"admitted\" at 2020-03-01\n  event E4 Medication \"cipro\" from 2020-03-04 to 2020-03-10\n  event E9 Other \"gap\" unknown\n}",
        );
        let timeline = &doc.timelines[0].node;
        assert_eq!(timeline.events.len(), 3);
        assert!(matches!(
            timeline.events[1].node.anchor,
            TimeAnchor::Interval(..)
        ));
        assert!(matches!(
            timeline.events[2].node.anchor,
            TimeAnchor::Unknown
        ));
    }

    #[test]
    fn errors_carry_spans_and_parsing_continues() {
        let err = parse("test.tm", "thimac {\n}\nvar X: int = 1\nedge ->").unwrap_err();
        assert!(err.len() >= 2);
        for diagnostic in &err {
            assert!(diagnostic.span.line >= 1);
            assert!(diagnostic.span.column >= 1);
            assert_eq!(diagnostic.span.file.as_ref(), "test.tm");
        }
    }

    #[test]
    fn duplicate_names_rejected_per_namespace() {
        let err = parse("test.tm", "thimac A { create }\nthimac A { create }").unwrap_err();
        assert_eq!(err[0].rule, "DuplicateName");
        // Same name in different namespaces is fine.
        parse_ok("thimac Q { create }\nqueue Q");
    }

    #[test]
    fn expression_parser_round_trips() {
        for text in [
            "Quantity <= Inventory",
            "Quantity > Inventory && Inventory > 0",
            "a + b - c",
            "!(a || b) && c",
            "-x + 1 != 2 - (3 - 4)",
        ] {
            let expr = parse_expression(text).unwrap();
            let printed = expr.to_string();
            let again = parse_expression(&printed).unwrap();
            assert_eq!(expr, again, "round-trip of `{text}` via `{printed}`");
        }
    }

    #[test]
    fn comparison_chains_rejected() {
        assert!(parse_expression("a < b < c").is_err());
    }
}
