//! Recursive-descent parsers for the service and entity DSLs.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::diagnostic::{Diagnostic, Location, SourceMap};
use super::lexer::{tokenize, Tok, Token};
use crate::model::{
    DelayMatrix, EntityEvent, EntitySpec, FlatMachine, FlatState, FlatTransition, Label, MessageId, Region, SapId,
    ServiceSpec, State, StateId, StateKind, TimeInterval, Transition, TransitionId,
};
use crate::rational::parse_rational;

const PSEUDOSTATES: [&str; 4] = ["fork", "join", "junction", "choice"];

/// A parsed service spec with the source locations of its elements.
#[derive(Debug, Clone)]
pub struct ParsedService {
    pub spec: ServiceSpec,
    pub source_map: SourceMap,
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Self {
            tokens: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn loc(&self) -> Location {
        self.peek().loc
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        Diagnostic::error(
            "syntax",
            format!("expected {expected}, found {}", self.peek().tok.describe()),
        )
        .at(self.loc())
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<Location> {
        if self.is_keyword(kw) {
            Ok(self.advance().loc)
        } else {
            Err(self.unexpected(&format!("'{kw}'")))
        }
    }

    fn punct(&mut self, tok: Tok) -> PResult<()> {
        if self.peek().tok == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Location)> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let loc = self.advance().loc;
                Ok((s, loc))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected("string")),
        }
    }

    fn interval(&mut self) -> PResult<TimeInterval> {
        let loc = self.loc();
        self.punct(Tok::LBracket)?;
        let min = self.number()?;
        self.punct(Tok::Comma)?;
        let max = self.number()?;
        self.punct(Tok::RBracket)?;
        TimeInterval::new(min, max).map_err(|e| Diagnostic::error("interval", e.to_string()).at(loc))
    }

    fn number(&mut self) -> PResult<crate::rational::Rational> {
        match &self.peek().tok {
            Tok::Num(s) => {
                let s = s.clone();
                let loc = self.advance().loc;
                parse_rational(&s).map_err(|e| Diagnostic::error("number", e.to_string()).at(loc))
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn finish(&mut self) -> PResult<()> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }
}

struct RawTransition {
    transition: Transition,
    loc: Location,
    source_loc: Location,
}

/// Parses the service DSL into a [`ServiceSpec`].
pub fn parse_service_spec(src: &str) -> Result<ServiceSpec, Vec<Diagnostic>> {
    parse_service_spec_with_map(src).map(|p| p.spec)
}

pub fn parse_service_spec_with_map(src: &str) -> Result<ParsedService, Vec<Diagnostic>> {
    let mut p = Parser::new(src).map_err(|d| vec![d])?;
    let mut map = SourceMap::default();
    let mut errors = Vec::new();
    let spec = parse_service(&mut p, &mut map, &mut errors).map_err(|d| vec![d])?;
    check_service_references(&spec, &map, &mut errors);
    if errors.is_empty() {
        Ok(ParsedService { spec, source_map: map })
    } else {
        Err(errors)
    }
}

fn parse_service(p: &mut Parser, map: &mut SourceMap, errors: &mut Vec<Diagnostic>) -> PResult<ServiceSpec> {
    if !p.is_keyword("service") {
        return Err(Diagnostic::error("syntax", "expected 'service'").at(p.loc()));
    }
    p.advance();
    let (name, _) = p.ident("service name")?;
    p.punct(Tok::LBrace)?;

    p.keyword("saps")?;
    let mut saps = Vec::new();
    let mut seen = HashSet::new();
    loop {
        let (sap, loc) = p.ident("SAP name")?;
        if !seen.insert(sap.clone()) {
            errors.push(
                Diagnostic::error("duplicate-id", format!("duplicate SAP '{sap}'"))
                    .at(loc)
                    .on(&sap),
            );
        }
        map.insert(&sap, loc);
        saps.push(SapId::new(sap));
        if p.peek().tok == Tok::Comma {
            p.advance();
        } else {
            break;
        }
    }

    let mut delays = DelayMatrix::new();
    while p.is_keyword("channel") {
        let loc = p.advance().loc;
        let (from, from_loc) = p.ident("SAP name")?;
        p.punct(Tok::Arrow)?;
        let (to, to_loc) = p.ident("SAP name")?;
        p.keyword("delay")?;
        let delay = p.interval()?;
        for (sap, l) in [(&from, from_loc), (&to, to_loc)] {
            if !seen.contains(sap) {
                errors.push(
                    Diagnostic::error("undeclared-sap", format!("channel references undeclared SAP '{sap}'")).at(l),
                );
            }
        }
        match delays.insert(SapId::new(from.clone()), SapId::new(to.clone()), delay) {
            Ok(Some(_)) => {
                errors.push(Diagnostic::error("duplicate-id", format!("duplicate channel {from} -> {to}")).at(loc))
            }
            Ok(None) => {}
            Err(e) => errors.push(Diagnostic::error("channel", e.to_string()).at(loc)),
        }
    }

    p.keyword("machine")?;
    p.punct(Tok::LBrace)?;
    let machine = parse_elements(p, map)?;
    p.punct(Tok::RBrace)?;
    p.punct(Tok::RBrace)?;
    p.finish()?;

    Ok(ServiceSpec {
        name,
        saps,
        delays,
        machine,
    })
}

/// Parses region elements up to (not including) the closing brace.
fn parse_elements(p: &mut Parser, map: &mut SourceMap) -> PResult<Region> {
    let mut states = Vec::new();
    let mut raw = Vec::new();
    loop {
        let loc = p.loc();
        let kw = match &p.peek().tok {
            Tok::RBrace => break,
            Tok::Ident(s) => s.clone(),
            _ => return Err(p.unexpected("state or transition declaration")),
        };
        match kw.as_str() {
            "initial" | "state" | "final" => {
                p.advance();
                let (id, id_loc) = p.ident("state name")?;
                map.insert(&id, id_loc);
                let kind = match kw.as_str() {
                    "initial" => StateKind::Initial,
                    "state" => StateKind::Simple,
                    _ => StateKind::Final,
                };
                states.push(State::new(id, kind));
            }
            "composite" => {
                p.advance();
                let (id, id_loc) = p.ident("state name")?;
                map.insert(&id, id_loc);
                p.punct(Tok::LBrace)?;
                let region = if p.is_keyword("region") {
                    let mut regions = Vec::new();
                    while p.is_keyword("region") {
                        let rloc = p.advance().loc;
                        p.punct(Tok::LBrace)?;
                        regions.push((parse_elements(p, map)?, rloc));
                        p.punct(Tok::RBrace)?;
                    }
                    if regions.len() > 1 {
                        return Err(Diagnostic::error(
                            "unsupported",
                            format!("unsupported: multiple regions in composite '{id}'"),
                        )
                        .at(regions[1].1)
                        .on(&id));
                    }
                    regions.pop().map(|(r, _)| r).unwrap_or_default()
                } else {
                    parse_elements(p, map)?
                };
                p.punct(Tok::RBrace)?;
                states.push(State::new(id, StateKind::Composite(region)));
            }
            "trans" => {
                p.advance();
                raw.push(parse_service_transition(p, loc)?);
            }
            other if PSEUDOSTATES.contains(&other) => {
                return Err(Diagnostic::error("unsupported", format!("unsupported pseudostate '{other}'")).at(loc));
            }
            "region" => {
                return Err(
                    Diagnostic::error("syntax", "'region' is only allowed directly inside a composite").at(loc),
                );
            }
            other => {
                return Err(Diagnostic::error("syntax", format!("unknown keyword '{other}'")).at(loc));
            }
        }
    }
    let mut transitions = Vec::with_capacity(raw.len());
    for r in raw {
        map.insert(r.transition.id.as_str(), r.loc);
        map.insert(&format!("{}.source", r.transition.id), r.source_loc);
        transitions.push(r.transition);
    }
    Ok(Region::new(states, transitions))
}

fn parse_service_transition(p: &mut Parser, loc: Location) -> PResult<RawTransition> {
    let (id, _) = p.ident("transition id")?;
    p.punct(Tok::Colon)?;
    let source_loc = p.loc();
    let (source, _) = p.ident("source state")?;
    p.punct(Tok::Arrow)?;
    let (dest, _) = p.ident("destination state")?;
    p.keyword("on")?;
    let (sp, _) = p.ident("service primitive")?;
    p.keyword("at")?;
    let (sap, _) = p.ident("SAP name")?;
    p.keyword("within")?;
    let interval = p.interval()?;
    let (guard, action) = parse_guard_action(p)?;
    Ok(RawTransition {
        transition: Transition {
            id: TransitionId::new(id),
            source: StateId::new(source),
            dest: StateId::new(dest),
            sp,
            sap: SapId::new(sap),
            interval,
            guard,
            action,
        },
        loc,
        source_loc,
    })
}

fn parse_guard_action(p: &mut Parser) -> PResult<(Option<String>, Option<String>)> {
    let mut guard = None;
    let mut action = None;
    if p.is_keyword("guard") {
        p.advance();
        guard = Some(p.string()?);
    }
    if p.is_keyword("do") {
        p.advance();
        action = Some(p.string()?);
    }
    Ok((guard, action))
}

fn check_service_references(spec: &ServiceSpec, map: &SourceMap, errors: &mut Vec<Diagnostic>) {
    let saps: HashSet<&SapId> = spec.saps.iter().collect();
    let mut states = HashSet::new();
    for s in spec.machine.all_states() {
        if !states.insert(s.id.clone()) {
            errors.push(Diagnostic::error("duplicate-id", format!("duplicate state '{}'", s.id)).on(s.id.as_str()));
        }
    }
    let mut ids = HashSet::new();
    for t in spec.machine.all_transitions() {
        let at = map.get(t.id.as_str());
        let with = |d: Diagnostic| match at {
            Some(l) => d.at(l),
            None => d,
        };
        if !ids.insert(t.id.clone()) || states.contains(&StateId::new(t.id.as_str())) {
            errors.push(with(Diagnostic::error(
                "duplicate-id",
                format!("duplicate identifier '{}'", t.id),
            )));
        }
        for (role, s) in [("source", &t.source), ("destination", &t.dest)] {
            if !states.contains(s) {
                errors.push(with(Diagnostic::error(
                    "undeclared-state",
                    format!("transition '{}' {role} '{s}' is not declared", t.id),
                )));
            }
        }
        if !saps.contains(&t.sap) {
            errors.push(with(Diagnostic::error(
                "undeclared-sap",
                format!("transition '{}' references undeclared SAP '{}'", t.id, t.sap),
            )));
        }
    }
    // Duplicate states point at the first declaration.
    map.locate(errors);
}

/// Parses the entity DSL emitted by [`super::emit_entity_spec`].
pub fn parse_entity_spec(src: &str) -> Result<EntitySpec, Vec<Diagnostic>> {
    let mut p = Parser::new(src).map_err(|d| vec![d])?;
    parse_entity(&mut p)
}

fn parse_entity(p: &mut Parser) -> Result<EntitySpec, Vec<Diagnostic>> {
    let one = |d: Diagnostic| vec![d];
    if !p.is_keyword("entity") {
        return Err(vec![Diagnostic::error("syntax", "expected 'entity'").at(p.loc())]);
    }
    p.advance();
    let (sap, _) = p.ident("SAP name").map_err(one)?;
    p.keyword("of").map_err(one)?;
    let (service, _) = p.ident("service name").map_err(one)?;
    p.punct(Tok::LBrace).map_err(one)?;

    let mut states: Vec<FlatState> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut initial = None;
    let mut raw: Vec<(String, String, Location, String, Location, Label)> = Vec::new();
    let mut errors = Vec::new();

    loop {
        let loc = p.loc();
        let kw = match &p.peek().tok {
            Tok::RBrace => break,
            Tok::Ident(s) => s.clone(),
            _ => return Err(vec![p.unexpected("state or transition declaration")]),
        };
        match kw.as_str() {
            "initial" | "state" | "final" => {
                p.advance();
                let is_initial = kw == "initial";
                let mut is_final = kw == "final";
                if is_initial && p.is_keyword("final") {
                    // `initial final x` unless `final` is itself the state name.
                    if matches!(p.tokens.get(p.pos + 1).map(|t| &t.tok), Some(Tok::Ident(_))) {
                        p.advance();
                        is_final = true;
                    }
                }
                let (id, id_loc) = p.ident("state name").map_err(one)?;
                if index.contains_key(&id) {
                    errors.push(Diagnostic::error("duplicate-id", format!("duplicate state '{id}'")).at(id_loc));
                    continue;
                }
                if is_initial {
                    if initial.is_some() {
                        errors.push(Diagnostic::error("initial-count", "more than one initial state").at(loc));
                    } else {
                        initial = Some(states.len());
                    }
                }
                index.insert(id.clone(), states.len());
                states.push(FlatState {
                    id: StateId::new(id),
                    is_final,
                });
            }
            "trans" => {
                p.advance();
                let (id, _) = p.ident("transition id").map_err(one)?;
                p.punct(Tok::Colon).map_err(one)?;
                let src_loc = p.loc();
                let (source, _) = p.ident("source state").map_err(one)?;
                p.punct(Tok::Arrow).map_err(one)?;
                let dst_loc = p.loc();
                let (dest, _) = p.ident("destination state").map_err(one)?;
                let label = parse_entity_event(p, &id).map_err(one)?;
                raw.push((id, source, src_loc, dest, dst_loc, label));
            }
            other if PSEUDOSTATES.contains(&other) => {
                return Err(vec![Diagnostic::error(
                    "unsupported",
                    format!("unsupported pseudostate '{other}'"),
                )
                .at(loc)]);
            }
            other => {
                return Err(vec![
                    Diagnostic::error("syntax", format!("unknown keyword '{other}'")).at(loc)
                ]);
            }
        }
    }
    let close = p.loc();
    p.punct(Tok::RBrace).map_err(one)?;
    p.finish().map_err(one)?;

    let mut transitions = Vec::new();
    for (id, source, src_loc, dest, dst_loc, label) in raw {
        let s = index.get(&source).copied();
        let d = index.get(&dest).copied();
        if s.is_none() {
            errors.push(Diagnostic::error("undeclared-state", format!("state '{source}' is not declared")).at(src_loc));
        }
        if d.is_none() {
            errors.push(Diagnostic::error("undeclared-state", format!("state '{dest}' is not declared")).at(dst_loc));
        }
        if let (Some(source), Some(dest)) = (s, d) {
            transitions.push(FlatTransition {
                id: TransitionId::new(id),
                source,
                dest,
                label,
            });
        }
    }
    let Some(initial) = initial else {
        errors.push(Diagnostic::error("initial-count", "entity has no initial state").at(close));
        return Err(errors);
    };
    if !errors.is_empty() {
        return Err(errors);
    }
    transitions.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(EntitySpec {
        service,
        sap: SapId::new(sap),
        machine: FlatMachine {
            states,
            initial,
            transitions,
        },
    })
}

fn parse_entity_event(p: &mut Parser, id: &str) -> PResult<Label> {
    let loc = p.loc();
    if p.is_keyword("exec") {
        p.advance();
        let (sp, _) = p.ident("service primitive")?;
        p.keyword("within")?;
        let interval = p.interval()?;
        let mut send_to = BTreeSet::new();
        let mut msg = None;
        if p.is_keyword("send") {
            p.advance();
            let (m, _) = p.ident("message name")?;
            p.keyword("to")?;
            p.punct(Tok::LBrace)?;
            loop {
                let (sap, _) = p.ident("SAP name")?;
                send_to.insert(SapId::new(sap));
                if p.peek().tok == Tok::Comma {
                    p.advance();
                } else {
                    break;
                }
            }
            p.punct(Tok::RBrace)?;
            msg = Some(MessageId::new(m));
        }
        let (guard, action) = parse_guard_action(p)?;
        Ok(Label {
            event: EntityEvent::Execute {
                sp,
                interval,
                send_to,
                msg,
            },
            guard,
            action,
        })
    } else if p.is_keyword("recv") {
        p.advance();
        let (m, _) = p.ident("message name")?;
        p.keyword("from")?;
        let (from, _) = p.ident("SAP name")?;
        Ok(Label::plain(EntityEvent::Receive {
            msg: MessageId::new(m),
            from: SapId::new(from),
        }))
    } else if p.is_keyword("eps") {
        p.advance();
        Ok(Label::plain(EntityEvent::Epsilon))
    } else {
        Err(Diagnostic::error(
            "syntax",
            format!("transition '{id}' needs an event: 'exec', 'recv' or 'eps'"),
        )
        .at(loc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FIG2;
    use crate::model::KindTag;
    use crate::rational::{int, ratio};

    fn first_error(src: &str) -> Diagnostic {
        parse_service_spec(src).unwrap_err().remove(0)
    }

    #[test]
    fn fixture_parses_field_by_field() {
        let spec = parse_service_spec(FIG2).unwrap();
        assert_eq!(spec.name, "fig2");
        assert_eq!(spec.saps, vec![SapId::from("S1"), "S2".into(), "S3".into()]);
        assert_eq!(spec.delays.len(), 5);
        assert_eq!(
            spec.delays.get(&"S1".into(), &"S3".into()).unwrap(),
            &TimeInterval::new(ratio(1, 10), ratio(2, 10)).unwrap()
        );
        assert_eq!(spec.machine.all_transitions().len(), 5);
        let composites: Vec<_> = spec
            .machine
            .all_states()
            .into_iter()
            .filter(|s| s.kind.tag() == KindTag::Composite)
            .collect();
        assert_eq!(composites.len(), 1);
        assert_eq!(composites[0].id.as_str(), "cs");
        let ta = spec.transition(&"tA".into()).unwrap();
        assert_eq!((ta.source.as_str(), ta.dest.as_str()), ("i0", "cs"));
        assert_eq!(ta.sp, "A");
        assert_eq!(ta.sap.as_str(), "S1");
        assert_eq!(ta.interval, TimeInterval::new(int(1), int(3)).unwrap());
        let tc = spec.transition(&"tC".into()).unwrap();
        assert_eq!(
            (tc.source.as_str(), tc.dest.as_str(), tc.sap.as_str()),
            ("ci", "c1", "S3")
        );
        // Region-internal transitions live in the composite's region.
        let index = spec.index();
        let region = index.region_of(&"cs".into()).unwrap();
        let inner: Vec<_> = region.transitions.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(inner, ["tB", "tC"]);
    }

    #[test]
    fn empty_input() {
        let e = first_error("");
        assert_eq!(e.message, "expected 'service'");
        assert!(e.location.is_some());
    }

    #[test]
    fn inverted_delay() {
        let e = first_error("service x { saps A, B channel A -> B delay [0.3, 0.1] machine { initial i } }");
        assert!(e.message.contains("interval min exceeds max"), "{e}");
        assert_eq!(e.location.unwrap().column, 44);
    }

    #[test]
    fn guard_and_action_are_kept_verbatim() {
        let spec = parse_service_spec(
            r#"service g { saps A machine { initial i state s
               trans t: i -> s on X at A within [1/3, 1] guard "n > 0" do "n := n - 1" } }"#,
        )
        .unwrap();
        let t = spec.transition(&"t".into()).unwrap();
        assert_eq!(t.guard.as_deref(), Some("n > 0"));
        assert_eq!(t.action.as_deref(), Some("n := n - 1"));
        assert_eq!(t.interval.lower(), &ratio(1, 3));
    }

    #[test]
    fn rejects_pseudostates_and_regions() {
        for kw in ["fork", "join", "junction", "choice"] {
            let e = first_error(&format!("service x {{ saps A machine {{ initial i {kw} j }} }}"));
            assert!(e.message.contains("unsupported pseudostate"), "{e}");
        }
        let e = first_error(
            "service x { saps A machine { initial i composite c { region { initial a } region { initial b } } } }",
        );
        assert!(e.message.contains("unsupported: multiple regions"), "{e}");
        // A single explicit region is the same as the implicit one.
        let spec =
            parse_service_spec("service x { saps A machine { initial i composite c { region { initial a } } } }")
                .unwrap();
        assert!(spec.index().region_of(&"c".into()).unwrap().initial().is_some());
    }

    #[test]
    fn reference_errors_are_collected() {
        let errs = parse_service_spec(
            "service x { saps A, A machine { initial i state i trans t: i -> nowhere on X at B within [0, 1] } }",
        )
        .unwrap_err();
        let codes: Vec<_> = errs.iter().map(|e| e.code.as_str()).collect();
        assert!(codes.contains(&"duplicate-id"));
        assert!(codes.contains(&"undeclared-state"));
        assert!(codes.contains(&"undeclared-sap"));
        assert!(errs.iter().all(|e| e.location.is_some()));
    }

    #[test]
    fn unknown_keyword_and_trailing_garbage() {
        let e = first_error("service x { saps A machine { initial i history h } }");
        assert!(e.message.contains("unknown keyword 'history'"));
        let e = first_error("service x { saps A machine { initial i } } extra");
        assert!(e.message.contains("end of input"));
        let e = first_error("service x { saps A channel A -> A delay [0, 1] machine { initial i } }");
        assert_eq!(e.code, "channel");
        let e = first_error("service x { saps A channel A -> B delay [0, 1] machine { initial i } }");
        assert_eq!(e.code, "undeclared-sap");
    }

    #[test]
    fn entity_parse_errors() {
        assert!(parse_entity_spec("").is_err());
        let e = parse_entity_spec("entity S1 of x { state a }").unwrap_err();
        assert_eq!(e[0].code, "initial-count");
        let e = parse_entity_spec("entity S1 of x { initial a trans t: a -> b eps }").unwrap_err();
        assert_eq!(e[0].code, "undeclared-state");
        let ok = parse_entity_spec("entity S1 of x { initial final a trans t: a -> a eps }").unwrap();
        assert!(ok.machine.states[0].is_final);
    }
}
