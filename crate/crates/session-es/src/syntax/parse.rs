//! Text format for processes, global types, and networks.
//!
//! A source file is a sequence of definitions:
//!
//! ```text
//! process Buyer = s!request; &{s?accept;0, s?reject;Buyer}
//! global Deal = b->s:{request. s->b:quote;end}
//! network Shop = b::Buyer | s::Seller
//! ```
//!
//! Processes use `0` for termination, `+{p!l;P, ...}` for output choices,
//! `&{p?l;P, ...}` for input choices, and `p!l;P` / `p?l;P` for singleton
//! choices. Global types use `end`, `p->q:l;G`, and `p->q:{l1. G1, ...}`.
//! Networks are `p::P | q::Q | ...`. Names refer to definitions of the same
//! kind, which may be mutually recursive; `//` starts a line comment. The
//! words `process`, `global`, `network`, and `end` are reserved.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{
    build_global_expr, build_process_expr, BuildError, Communication, GlobalExpr, Message,
    Network, Participant, ProcExpr, Trace,
};
use crate::syntax::{Global, Process};

/// A syntax error with its source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Failure to load a source file: either it does not parse, or the parsed
/// equations do not assemble into well-shaped terms.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// The definitions of one source file, fully resolved.
#[derive(Debug, Clone, Default)]
pub struct Module {
    pub processes: BTreeMap<String, Process>,
    pub globals: BTreeMap<String, Global>,
    pub networks: BTreeMap<String, Network>,
}

const RESERVED: [&str; 4] = ["process", "global", "network", "end"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Zero,
    Arrow,       // ->
    DoubleColon, // ::
    Bang,
    Question,
    Semi,
    Colon,
    Comma,
    Dot,
    LBrace,
    RBrace,
    Plus,
    Amp,
    Pipe,
    Eq,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "`{name}`"),
            Tok::Zero => "`0`",
            Tok::Arrow => "`->`",
            Tok::DoubleColon => "`::`",
            Tok::Bang => "`!`",
            Tok::Question => "`?`",
            Tok::Semi => "`;`",
            Tok::Colon => "`:`",
            Tok::Comma => "`,`",
            Tok::Dot => "`.`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::Plus => "`+`",
            Tok::Amp => "`&`",
            Tok::Pipe => "`|`",
            Tok::Eq => "`=`",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().expect("peeked");
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '/' {
            bump(&mut chars);
            if chars.peek() == Some(&'/') {
                while let Some(&c) = chars.peek() {
                    bump(&mut chars);
                    if c == '\n' {
                        break;
                    }
                }
                continue;
            }
            return Err(ParseError {
                line: tline,
                col: tcol,
                message: "expected `//` to start a comment".to_owned(),
            });
        }
        if c.is_ascii_alphabetic() {
            let mut name = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    name.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            out.push(Spanned { tok: Tok::Ident(name), line: tline, col: tcol });
            continue;
        }
        if c == '0' {
            bump(&mut chars);
            out.push(Spanned { tok: Tok::Zero, line: tline, col: tcol });
            continue;
        }
        let tok = match c {
            '-' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    Tok::Arrow
                } else {
                    return Err(ParseError {
                        line: tline,
                        col: tcol,
                        message: "expected `->`".to_owned(),
                    });
                }
            }
            ':' => {
                bump(&mut chars);
                if chars.peek() == Some(&':') {
                    bump(&mut chars);
                    Tok::DoubleColon
                } else {
                    Tok::Colon
                }
            }
            '!' => {
                bump(&mut chars);
                Tok::Bang
            }
            '?' => {
                bump(&mut chars);
                Tok::Question
            }
            ';' => {
                bump(&mut chars);
                Tok::Semi
            }
            ',' => {
                bump(&mut chars);
                Tok::Comma
            }
            '.' => {
                bump(&mut chars);
                Tok::Dot
            }
            '{' => {
                bump(&mut chars);
                Tok::LBrace
            }
            '}' => {
                bump(&mut chars);
                Tok::RBrace
            }
            '+' => {
                bump(&mut chars);
                Tok::Plus
            }
            '&' => {
                bump(&mut chars);
                Tok::Amp
            }
            '|' => {
                bump(&mut chars);
                Tok::Pipe
            }
            '=' => {
                bump(&mut chars);
                Tok::Eq
            }
            other => {
                return Err(ParseError {
                    line: tline,
                    col: tcol,
                    message: format!("unexpected character `{other}`"),
                });
            }
        };
        out.push(Spanned { tok, line: tline, col: tcol });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        let toks = tokenize(src)?;
        let end_line = src.lines().count().max(1);
        let end_col = src.lines().last().map_or(1, |l| l.chars().count() + 1);
        Ok(Parser { toks, pos: 0, end_line, end_col })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or((self.end_line, self.end_col), |s| (s.line, s.col))
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError { line, col, message: message.into() }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.next();
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected {tok}, found {t}"))),
            None => Err(self.error(format!("expected {tok}, found end of input"))),
        }
    }

    /// An identifier that is not a reserved word.
    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(name)) if RESERVED.contains(&name.as_str()) => {
                Err(self.error(format!("`{name}` is reserved and cannot be used as {what}")))
            }
            Some(Tok::Ident(_)) => {
                let Some(Spanned { tok: Tok::Ident(name), .. }) = self.next() else {
                    unreachable!("peeked an identifier");
                };
                Ok(name)
            }
            Some(t) => Err(self.error(format!("expected {what}, found {t}"))),
            None => Err(self.error(format!("expected {what}, found end of input"))),
        }
    }

    fn participant(&mut self) -> Result<Participant, ParseError> {
        Ok(Participant::new(self.ident("a participant name")?))
    }

    fn message(&mut self) -> Result<Message, ParseError> {
        Ok(Message::new(self.ident("a message label")?))
    }

    // proc := "0" | NAME | "+{" branches "}" | "&{" branches "}"
    //       | PART "!" MSG ";" proc | PART "?" MSG ";" proc
    fn proc(&mut self) -> Result<ProcExpr, ParseError> {
        match self.peek() {
            Some(Tok::Zero) => {
                self.next();
                Ok(ProcExpr::End)
            }
            Some(Tok::Plus) => {
                self.next();
                self.expect(Tok::LBrace)?;
                let (peer, branches) = self.proc_branches(Tok::Bang)?;
                Ok(ProcExpr::Out { peer, branches })
            }
            Some(Tok::Amp) => {
                self.next();
                self.expect(Tok::LBrace)?;
                let (peer, branches) = self.proc_branches(Tok::Question)?;
                Ok(ProcExpr::In { peer, branches })
            }
            Some(Tok::Ident(_)) => {
                // LL(2): `p!...` / `p?...` is a singleton choice, a bare
                // identifier is a reference to a definition.
                match self.peek2() {
                    Some(Tok::Bang) | Some(Tok::Question) => {
                        let peer = self.participant()?;
                        let output = matches!(self.peek(), Some(Tok::Bang));
                        self.next();
                        let message = self.message()?;
                        self.expect(Tok::Semi)?;
                        let cont = self.proc()?;
                        Ok(if output {
                            ProcExpr::Out { peer, branches: vec![(message, cont)] }
                        } else {
                            ProcExpr::In { peer, branches: vec![(message, cont)] }
                        })
                    }
                    _ => Ok(ProcExpr::Ref(self.ident("a process name")?)),
                }
            }
            Some(t) => Err(self.error(format!("expected a process, found {t}"))),
            None => Err(self.error("expected a process, found end of input")),
        }
    }

    /// Branches of an explicit choice; `mark` is the expected direction
    /// token. All branches must address the same peer.
    fn proc_branches(
        &mut self,
        mark: Tok,
    ) -> Result<(Participant, Vec<(Message, ProcExpr)>), ParseError> {
        let mut peer: Option<Participant> = None;
        let mut branches = Vec::new();
        if self.peek() == Some(&Tok::RBrace) {
            return Err(self.error("a choice must have at least one branch"));
        }
        loop {
            let (bline, bcol) = self.here();
            let part = self.participant()?;
            match &peer {
                None => peer = Some(part),
                Some(p) if *p == part => {}
                Some(p) => {
                    return Err(ParseError {
                        line: bline,
                        col: bcol,
                        message: format!(
                            "all branches of a choice must address the same peer \
                             (`{p}` here, `{part}` in this branch)"
                        ),
                    });
                }
            }
            self.expect(mark.clone())?;
            let message = self.message()?;
            self.expect(Tok::Semi)?;
            let cont = self.proc()?;
            branches.push((message, cont));
            match self.peek() {
                Some(Tok::Comma) => {
                    self.next();
                }
                _ => break,
            }
        }
        self.expect(Tok::RBrace)?;
        Ok((peer.expect("at least one branch"), branches))
    }

    // glob := "end" | NAME | PART "->" PART ":" "{" MSG "." glob , ... "}"
    //       | PART "->" PART ":" MSG ";" glob
    fn glob(&mut self) -> Result<GlobalExpr, ParseError> {
        match self.peek() {
            Some(Tok::Ident(name)) if name == "end" => {
                self.next();
                Ok(GlobalExpr::End)
            }
            Some(Tok::Ident(_)) => {
                if self.peek2() == Some(&Tok::Arrow) {
                    let sender = self.participant()?;
                    self.expect(Tok::Arrow)?;
                    let receiver = self.participant()?;
                    self.expect(Tok::Colon)?;
                    if self.peek() == Some(&Tok::LBrace) {
                        self.next();
                        let branches = self.glob_branches()?;
                        Ok(GlobalExpr::Comm { sender, receiver, branches })
                    } else {
                        let message = self.message()?;
                        self.expect(Tok::Semi)?;
                        let cont = self.glob()?;
                        Ok(GlobalExpr::Comm { sender, receiver, branches: vec![(message, cont)] })
                    }
                } else {
                    Ok(GlobalExpr::Ref(self.ident("a global type name")?))
                }
            }
            Some(t) => Err(self.error(format!("expected a global type, found {t}"))),
            None => Err(self.error("expected a global type, found end of input")),
        }
    }

    fn glob_branches(&mut self) -> Result<Vec<(Message, GlobalExpr)>, ParseError> {
        let mut branches = Vec::new();
        if self.peek() == Some(&Tok::RBrace) {
            return Err(self.error("a choice must have at least one branch"));
        }
        loop {
            let message = self.message()?;
            self.expect(Tok::Dot)?;
            let cont = self.glob()?;
            branches.push((message, cont));
            match self.peek() {
                Some(Tok::Comma) => {
                    self.next();
                }
                _ => break,
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(branches)
    }

    // net := PART "::" proc ("|" PART "::" proc)*
    fn net(&mut self) -> Result<Vec<(Participant, ProcExpr)>, ParseError> {
        let mut bindings = Vec::new();
        loop {
            let part = self.participant()?;
            self.expect(Tok::DoubleColon)?;
            let proc = self.proc()?;
            bindings.push((part, proc));
            match self.peek() {
                Some(Tok::Pipe) => {
                    self.next();
                }
                _ => break,
            }
        }
        Ok(bindings)
    }
}

#[derive(Debug)]
enum RawDef {
    Process(String, ProcExpr),
    Global(String, GlobalExpr),
    Network(String, Vec<(Participant, ProcExpr)>),
}

fn parse_defs(src: &str) -> Result<Vec<RawDef>, ParseError> {
    let mut parser = Parser::new(src)?;
    let mut defs = Vec::new();
    while let Some(tok) = parser.peek() {
        let kind = match tok {
            Tok::Ident(k) if k == "process" || k == "global" || k == "network" => k.clone(),
            t => {
                return Err(parser.error(format!(
                    "expected `process`, `global`, or `network`, found {t}"
                )))
            }
        };
        parser.next();
        let name = parser.ident("a definition name")?;
        parser.expect(Tok::Eq)?;
        let def = match kind.as_str() {
            "process" => RawDef::Process(name, parser.proc()?),
            "global" => RawDef::Global(name, parser.glob()?),
            _ => RawDef::Network(name, parser.net()?),
        };
        defs.push(def);
    }
    Ok(defs)
}

/// Parses a source file and resolves every definition. Process and global
/// type names live in separate namespaces; definitions of the same kind may
/// refer to each other freely, in any order.
pub fn parse_module(src: &str) -> Result<Module, LoadError> {
    let defs = parse_defs(src)?;
    let mut proc_defs: Vec<(String, ProcExpr)> = Vec::new();
    let mut glob_defs: Vec<(String, GlobalExpr)> = Vec::new();
    let mut net_defs: Vec<(String, Vec<(Participant, ProcExpr)>)> = Vec::new();
    for def in defs {
        match def {
            RawDef::Process(name, body) => proc_defs.push((name, body)),
            RawDef::Global(name, body) => glob_defs.push((name, body)),
            RawDef::Network(name, bindings) => {
                if net_defs.iter().any(|(n, _)| *n == name) {
                    return Err(BuildError::DuplicateDefinition(name).into());
                }
                net_defs.push((name, bindings));
            }
        }
    }
    let mut module = Module::default();
    for (name, _) in &proc_defs {
        let built = build_process_expr(&proc_defs, &ProcExpr::Ref(name.clone()))?;
        module.processes.insert(name.clone(), built);
    }
    for (name, _) in &glob_defs {
        let built = build_global_expr(&glob_defs, &GlobalExpr::Ref(name.clone()))?;
        module.globals.insert(name.clone(), built);
    }
    for (name, bindings) in net_defs {
        let mut resolved = Vec::new();
        for (part, expr) in bindings {
            resolved.push((part, build_process_expr(&proc_defs, &expr)?));
        }
        module.networks.insert(name, Network::new(resolved)?);
    }
    Ok(module)
}

/// Parses a trace written `p->q:l,r->s:l2`. The empty string is the empty
/// trace.
pub fn parse_trace(src: &str) -> Result<Trace, LoadError> {
    let mut parser = Parser::new(src)?;
    let mut items = Vec::new();
    if parser.peek().is_none() {
        return Ok(Trace::empty());
    }
    loop {
        let sender = parser.participant()?;
        parser.expect(Tok::Arrow)?;
        let receiver = parser.participant()?;
        parser.expect(Tok::Colon)?;
        let message = parser.message()?;
        items.push(Communication::new(sender, message, receiver)?);
        match parser.peek() {
            Some(Tok::Comma) => {
                parser.next();
            }
            Some(t) => {
                let t = t.clone();
                return Err(parser.error(format!("expected `,` or end of trace, found {t}")).into());
            }
            None => break,
        }
    }
    Ok(Trace::new(items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::process_equal;

    #[test]
    fn parses_definitions_of_all_kinds() {
        let src = "
            // running example
            process Buyer = s!request; &{s?accept;0, s?reject;Buyer}
            process Seller = b?request; +{b!accept;0, b!reject;Seller}
            global Deal = b->s:request;s->b:{accept. end, reject. Deal}
            network Shop = b::Buyer | s::Seller
        ";
        let module = parse_module(src).unwrap();
        assert_eq!(module.processes.len(), 2);
        assert_eq!(module.globals.len(), 1);
        let shop = &module.networks["Shop"];
        assert_eq!(shop.len(), 2);
        assert!(module.processes["Buyer"].is_recursive());
        assert!(module.globals["Deal"].is_recursive());
    }

    #[test]
    fn definitions_round_trip_through_the_printer() {
        let src = "
            process P = +{q!l1;r!l;0, q!l2;P}
            process Q = &{p?l1;0, p?l2;Q}
            network N = p::P | q::Q | r::p?l;0
        ";
        let module = parse_module(src).unwrap();
        for (name, proc) in &module.processes {
            let printed = proc.to_definitions(name);
            let reparsed = parse_module(&printed).unwrap();
            assert!(
                process_equal(proc, &reparsed.processes[name]),
                "{name} did not round-trip:\n{printed}"
            );
        }
        let net = &module.networks["N"];
        let printed = net.to_definitions("N");
        let reparsed = parse_module(&printed).unwrap();
        assert!(net.equal(&reparsed.networks["N"]), "network did not round-trip:\n{printed}");
    }

    #[test]
    fn global_round_trips_through_the_printer() {
        let src = "global G = p->q:{l1. q->r:l3;end, l2. G}";
        let module = parse_module(src).unwrap();
        let g = &module.globals["G"];
        let printed = g.to_definitions("G");
        let reparsed = parse_module(&printed).unwrap();
        assert!(g.equal(&reparsed.globals["G"]), "global did not round-trip:\n{printed}");
    }

    #[test]
    fn rejects_mixed_peers_in_a_choice() {
        let err = parse_module("process P = +{q!l1;0, r!l2;0}").unwrap_err();
        let LoadError::Parse(e) = err else { panic!("expected a parse error") };
        assert!(e.message.contains("same peer"), "{e}");
    }

    #[test]
    fn rejects_reserved_words_as_names() {
        assert!(parse_module("process end = 0").is_err());
        assert!(parse_module("process P = end!l;0").is_err());
    }

    #[test]
    fn reports_positions() {
        let err = parse_module("process P =\n  q!l;;0").unwrap_err();
        let LoadError::Parse(e) = err else { panic!("expected a parse error") };
        assert_eq!(e.line, 2);
    }

    #[test]
    fn build_errors_surface_through_loading() {
        let err = parse_module("process P = P").unwrap_err();
        assert!(matches!(err, LoadError::Build(BuildError::NonContractive(_))));
        let err = parse_module("process P = q!l;Q").unwrap_err();
        assert!(matches!(err, LoadError::Build(BuildError::UndefinedName(_))));
        let err = parse_module("global G = p->p:l;end").unwrap_err();
        assert!(matches!(err, LoadError::Build(BuildError::SelfCommunication { .. })));
        let err = parse_module("network N = p::0 | p::q!l;0").unwrap_err();
        assert!(matches!(err, LoadError::Build(BuildError::DuplicateParticipant(_))));
    }

    #[test]
    fn parses_traces() {
        let t = parse_trace("p->q:l1,r->s:l2").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.to_string(), "p->q:l1,r->s:l2");
        assert!(parse_trace("").unwrap().is_empty());
        assert!(parse_trace("p->p:l").is_err());
        assert!(parse_trace("p->q:l r->s:l2").is_err());
    }
}
