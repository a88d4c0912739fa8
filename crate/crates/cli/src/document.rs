//! Text formats for models and reconfiguration diffs.
//!
//! Model documents:
//!
//! ```text
//! # comment
//! params p, q;
//! state i volatile;
//! state 1 reward 2*p;
//! state ok;
//! state err;
//! init i;
//! target err;
//! i -> 1 : q;
//! i -> ok : 1 - q;
//! 1 -> err : p;
//! 1 -> i : 1 - p;
//! ```
//!
//! `params` is optional and must come first. States are declared before
//! use; names are identifiers or unsigned integers. `init` appears once,
//! `target` once with one or more states.
//!
//! Diff documents, interpreted against the model they are applied to:
//!
//! ```text
//! add state 2 reward 1;
//! remove state 1;
//! set i -> 2 : q;
//! set i -> 1 : 0;      # a zero value removes the transition
//! set reward i : 3;
//! volatile i, 2;       # volatile set of the reconfigured model
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use vpmc_core::incremental::Diff;
use vpmc_core::model::{Pmc, RawModel, StateId, Vpmc};
use vpmc_core::ratfunc::parse::{ParseError, ParseErrorKind, Spanned, Token, Tokens};
use vpmc_core::{Field, RatFunc, Rational};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DocErrorKind {
    Syntax,
    UnknownParameter,
    DivisionByZero,
    DuplicateParameter,
    DuplicateState,
    UnknownState,
    DuplicateTransition,
    ZeroTransition,
    /// A required statement (`init`, `target`) is absent or repeated.
    Structure,
}

/// Error in a model or diff document, addressed by 1-based line and column.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DocError {
    pub kind: DocErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl DocError {
    fn at(kind: DocErrorKind, at: &Spanned, message: impl Into<String>) -> Self {
        DocError {
            kind,
            line: at.line,
            col: at.col,
            message: message.into(),
        }
    }
}

impl From<ParseError> for DocError {
    fn from(e: ParseError) -> Self {
        let kind = match e.kind {
            ParseErrorKind::Syntax => DocErrorKind::Syntax,
            ParseErrorKind::UnknownParameter => DocErrorKind::UnknownParameter,
            ParseErrorKind::DivisionByZero => DocErrorKind::DivisionByZero,
        };
        DocError {
            kind,
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for DocError {}

pub type DocResult<T> = std::result::Result<T, DocError>;

/// State name: an identifier or an unsigned integer.
fn expect_name(tokens: &mut Tokens) -> DocResult<(String, Spanned)> {
    let t = tokens.next();
    match &t.token {
        Token::Ident(s) => Ok((s.clone(), t.clone())),
        Token::Number(s) if !s.contains('.') => Ok((s.clone(), t.clone())),
        other => Err(DocError::at(
            DocErrorKind::Syntax,
            &t,
            format!("expected state name, found {other}"),
        )),
    }
}

fn expect_keyword(tokens: &mut Tokens, word: &str) -> DocResult<Spanned> {
    let t = tokens.next();
    match &t.token {
        Token::Ident(s) if s == word => Ok(t),
        other => Err(DocError::at(
            DocErrorKind::Syntax,
            &t,
            format!("expected `{word}`, found {other}"),
        )),
    }
}

/// Comma-separated names up to (not including) `;`; possibly empty.
fn name_list(tokens: &mut Tokens) -> DocResult<Vec<(String, Spanned)>> {
    let mut out = Vec::new();
    if tokens.is_sym(';') {
        return Ok(out);
    }
    loop {
        out.push(expect_name(tokens)?);
        if !tokens.eat_sym(',') {
            return Ok(out);
        }
    }
}

fn is_name_token(t: &Token) -> bool {
    matches!(t, Token::Ident(_)) || matches!(t, Token::Number(s) if !s.contains('.'))
}

/// Parses a model document.
pub fn parse_model(text: &str) -> DocResult<RawModel<RatFunc>> {
    let mut tokens = Tokens::new(text)?;
    let mut params: Vec<String> = Vec::new();
    if tokens.is_keyword("params") && tokens.peek_at(1) != &Token::Arrow {
        tokens.next();
        if !tokens.is_sym(';') {
            loop {
                let (name, at) = tokens.expect_ident()?;
                if params.contains(&name) {
                    return Err(DocError::at(
                        DocErrorKind::DuplicateParameter,
                        &at,
                        format!("parameter `{name}` declared twice"),
                    ));
                }
                params.push(name);
                if !tokens.eat_sym(',') {
                    break;
                }
            }
        }
        tokens.expect_sym(';')?;
    }

    let mut pmc: Pmc<RatFunc> = Pmc::new(params.clone());
    let mut volatile = BTreeSet::new();
    let mut reward = BTreeMap::new();
    let mut targets: Option<BTreeSet<StateId>> = None;
    let mut initial: Option<StateId> = None;
    let lookup = |pmc: &Pmc<RatFunc>, name: &str, at: &Spanned| {
        pmc.id(name).ok_or_else(|| {
            DocError::at(
                DocErrorKind::UnknownState,
                at,
                format!("state `{name}` is not declared"),
            )
        })
    };

    while !tokens.at_eof() {
        let head = tokens.peek().clone();
        if tokens.peek_at(1) == &Token::Arrow && is_name_token(&head.token) {
            let (from, at_from) = expect_name(&mut tokens)?;
            tokens.expect_arrow()?;
            let (to, at_to) = expect_name(&mut tokens)?;
            tokens.expect_sym(':')?;
            let expr_at = tokens.peek().clone();
            let w: RatFunc = tokens.parse_expr(&params)?;
            tokens.expect_sym(';')?;
            let a = lookup(&pmc, &from, &at_from)?;
            let b = lookup(&pmc, &to, &at_to)?;
            if w.is_zero() {
                return Err(DocError::at(
                    DocErrorKind::ZeroTransition,
                    &expr_at,
                    format!("transition `{from}` -> `{to}` is identically zero"),
                ));
            }
            if pmc.get(a, b).is_some() {
                return Err(DocError::at(
                    DocErrorKind::DuplicateTransition,
                    &head,
                    format!("transition `{from}` -> `{to}` is defined twice"),
                ));
            }
            pmc.set(a, b, w);
            continue;
        }
        let (word, _) = tokens.expect_ident().map_err(|_| {
            DocError::at(
                DocErrorKind::Syntax,
                &head,
                format!("expected a statement, found {}", head.token),
            )
        })?;
        match word.as_str() {
            "state" => {
                let (name, at) = expect_name(&mut tokens)?;
                let s = pmc.add_state(&name).map_err(|_| {
                    DocError::at(
                        DocErrorKind::DuplicateState,
                        &at,
                        format!("state `{name}` declared twice"),
                    )
                })?;
                let mut seen_volatile = false;
                let mut seen_reward = false;
                while !tokens.is_sym(';') {
                    let t = tokens.peek().clone();
                    if tokens.is_keyword("volatile") && !seen_volatile {
                        tokens.next();
                        seen_volatile = true;
                        volatile.insert(s);
                    } else if tokens.is_keyword("reward") && !seen_reward {
                        tokens.next();
                        seen_reward = true;
                        let r: RatFunc = tokens.parse_expr(&params)?;
                        if !r.is_zero() {
                            reward.insert(s, r);
                        }
                    } else {
                        return Err(DocError::at(
                            DocErrorKind::Syntax,
                            &t,
                            format!("expected `volatile`, `reward` or `;`, found {}", t.token),
                        ));
                    }
                }
                tokens.expect_sym(';')?;
            }
            "init" => {
                let (name, at) = expect_name(&mut tokens)?;
                tokens.expect_sym(';')?;
                if initial.is_some() {
                    return Err(DocError::at(
                        DocErrorKind::Structure,
                        &head,
                        "initial state declared twice",
                    ));
                }
                initial = Some(lookup(&pmc, &name, &at)?);
            }
            "target" => {
                let names = name_list(&mut tokens)?;
                tokens.expect_sym(';')?;
                if targets.is_some() {
                    return Err(DocError::at(DocErrorKind::Structure, &head, "target declared twice"));
                }
                if names.is_empty() {
                    return Err(DocError::at(DocErrorKind::Structure, &head, "empty target list"));
                }
                let mut set = BTreeSet::new();
                for (name, at) in &names {
                    set.insert(lookup(&pmc, name, at)?);
                }
                targets = Some(set);
            }
            "params" => {
                return Err(DocError::at(
                    DocErrorKind::Structure,
                    &head,
                    "`params` must be the first statement and appear once",
                ));
            }
            other => {
                return Err(DocError::at(
                    DocErrorKind::Syntax,
                    &head,
                    format!("unknown statement `{other}`"),
                ));
            }
        }
    }

    let end = tokens.peek().clone();
    let initial = initial.ok_or_else(|| DocError::at(DocErrorKind::Structure, &end, "missing `init` statement"))?;
    let targets = targets.ok_or_else(|| DocError::at(DocErrorKind::Structure, &end, "missing `target` statement"))?;
    pmc.set_initial(initial);
    Ok(RawModel {
        pmc,
        targets,
        volatile,
        reward,
    })
}

fn function(w: &RatFunc, params: &[String]) -> String {
    w.display(params).to_string()
}

/// Prints a model document that [`parse_model`] reads back to the same
/// model (up to removed-state slots, which are not printed).
pub fn print_model(raw: &RawModel<RatFunc>) -> String {
    let pmc = &raw.pmc;
    let params = pmc.params();
    let mut out = String::new();
    if !params.is_empty() {
        writeln!(out, "params {};", params.join(", ")).unwrap();
    }
    for s in pmc.states() {
        write!(out, "state {}", pmc.name(s)).unwrap();
        if raw.volatile.contains(&s) {
            out.push_str(" volatile");
        }
        if let Some(r) = raw.reward.get(&s) {
            write!(out, " reward {}", function(r, params)).unwrap();
        }
        out.push_str(";\n");
    }
    if let Ok(s0) = pmc.initial() {
        writeln!(out, "init {};", pmc.name(s0)).unwrap();
    }
    let targets: Vec<&str> = raw.targets.iter().map(|&t| pmc.name(t)).collect();
    writeln!(out, "target {};", targets.join(", ")).unwrap();
    for (a, b, w) in pmc.transitions() {
        writeln!(out, "{} -> {} : {};", pmc.name(a), pmc.name(b), function(w, params)).unwrap();
    }
    out
}

/// [`print_model`] for a preprocessed model.
pub fn print_vpmc(vpmc: &Vpmc<RatFunc>) -> String {
    print_model(&vpmc.to_raw())
}

/// Parses a diff document against the model it will be applied to.
/// Names are resolved in statement order: states added by earlier `add`
/// statements are known, removed ones are not.
pub fn parse_diff(text: &str, base: &Vpmc<RatFunc>) -> DocResult<Diff<RatFunc>> {
    let params = base.pmc.params().to_vec();
    let mut tokens = Tokens::new(text)?;
    let mut diff: Diff<RatFunc> = Diff::default();
    let mut known: BTreeSet<String> = base.pmc.states().map(|s| base.pmc.name(s).to_string()).collect();
    let mut set_entries: BTreeSet<(String, String)> = BTreeSet::new();
    let mut set_rewards: BTreeSet<String> = BTreeSet::new();
    let resolve = |known: &BTreeSet<String>, name: &str, at: &Spanned| {
        if known.contains(name) {
            Ok(())
        } else {
            Err(DocError::at(
                DocErrorKind::UnknownState,
                at,
                format!("state `{name}` does not exist"),
            ))
        }
    };

    while !tokens.at_eof() {
        let head = tokens.peek().clone();
        let (word, _) = tokens.expect_ident().map_err(|_| {
            DocError::at(
                DocErrorKind::Syntax,
                &head,
                format!("expected a statement, found {}", head.token),
            )
        })?;
        match word.as_str() {
            "add" => {
                expect_keyword(&mut tokens, "state")?;
                let (name, at) = expect_name(&mut tokens)?;
                let mut reward = None;
                if tokens.is_keyword("reward") {
                    tokens.next();
                    reward = Some(tokens.parse_expr(&params)?);
                }
                tokens.expect_sym(';')?;
                if !known.insert(name.clone()) || diff.removed_states.contains(&name) {
                    return Err(DocError::at(
                        DocErrorKind::DuplicateState,
                        &at,
                        format!("state `{name}` already exists"),
                    ));
                }
                diff.added_states.push((name, reward));
            }
            "remove" => {
                expect_keyword(&mut tokens, "state")?;
                let (name, at) = expect_name(&mut tokens)?;
                tokens.expect_sym(';')?;
                resolve(&known, &name, &at)?;
                if diff.added_states.iter().any(|(n, _)| n == &name) {
                    return Err(DocError::at(
                        DocErrorKind::Syntax,
                        &at,
                        format!("state `{name}` is added and removed by the same diff"),
                    ));
                }
                known.remove(&name);
                diff.removed_states.push(name);
            }
            "set" if tokens.is_keyword("reward") && tokens.peek_at(1) != &Token::Arrow => {
                tokens.next();
                let (name, at) = expect_name(&mut tokens)?;
                tokens.expect_sym(':')?;
                let r = tokens.parse_expr(&params)?;
                tokens.expect_sym(';')?;
                resolve(&known, &name, &at)?;
                if !set_rewards.insert(name.clone()) {
                    return Err(DocError::at(
                        DocErrorKind::Syntax,
                        &head,
                        format!("reward of `{name}` is set twice"),
                    ));
                }
                diff.set_rewards.push((name, r));
            }
            "set" => {
                let (from, at_from) = expect_name(&mut tokens)?;
                tokens.expect_arrow()?;
                let (to, at_to) = expect_name(&mut tokens)?;
                tokens.expect_sym(':')?;
                let w = tokens.parse_expr(&params)?;
                tokens.expect_sym(';')?;
                resolve(&known, &from, &at_from)?;
                resolve(&known, &to, &at_to)?;
                if !set_entries.insert((from.clone(), to.clone())) {
                    return Err(DocError::at(
                        DocErrorKind::DuplicateTransition,
                        &head,
                        format!("transition `{from}` -> `{to}` is set twice"),
                    ));
                }
                diff.set_transitions.push((from, to, w));
            }
            "volatile" => {
                let names = name_list(&mut tokens)?;
                tokens.expect_sym(';')?;
                if diff.next_volatile.is_some() {
                    return Err(DocError::at(
                        DocErrorKind::Structure,
                        &head,
                        "volatile set declared twice",
                    ));
                }
                let mut set = BTreeSet::new();
                for (name, at) in names {
                    resolve(&known, &name, &at)?;
                    set.insert(name);
                }
                diff.next_volatile = Some(set);
            }
            other => {
                return Err(DocError::at(
                    DocErrorKind::Syntax,
                    &head,
                    format!("unknown diff statement `{other}`"),
                ));
            }
        }
    }
    Ok(diff)
}

/// Prints a diff document; statements are grouped as add, remove, set,
/// set reward, volatile.
pub fn print_diff(diff: &Diff<RatFunc>, params: &[String]) -> String {
    let mut out = String::new();
    for (name, reward) in &diff.added_states {
        write!(out, "add state {name}").unwrap();
        if let Some(r) = reward {
            write!(out, " reward {}", function(r, params)).unwrap();
        }
        out.push_str(";\n");
    }
    for name in &diff.removed_states {
        writeln!(out, "remove state {name};").unwrap();
    }
    for (a, b, w) in &diff.set_transitions {
        writeln!(out, "set {a} -> {b} : {};", function(w, params)).unwrap();
    }
    for (name, r) in &diff.set_rewards {
        writeln!(out, "set reward {name} : {};", function(r, params)).unwrap();
    }
    if let Some(vol) = &diff.next_volatile {
        let names: Vec<&str> = vol.iter().map(String::as_str).collect();
        if names.is_empty() {
            out.push_str("volatile;\n");
        } else {
            writeln!(out, "volatile {};", names.join(", ")).unwrap();
        }
    }
    out
}

/// Parses `name=value` where `value` is an exact constant such as `1/2`
/// or `0.25`.
pub fn parse_assignment(text: &str) -> Result<(String, Rational), String> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, found `{text}`"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("missing parameter name in `{text}`"));
    }
    let f: RatFunc = vpmc_core::ratfunc::parse::parse_expression(value, &[])
        .map_err(|e| format!("bad value for `{name}`: {}", e.message))?;
    let v = f
        .constant_value()
        .ok_or_else(|| format!("value for `{name}` is not a constant"))?;
    Ok((name.to_string(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use vpmc_core::families::{gen_zeroconf, same_up_to_identity};
    use vpmc_core::model::preprocess;

    const ZEROCONF_1: &str = "\
params p, q;
state i volatile; state 1 volatile; state ok; state err;
init i;
target err;
i -> 1 : q; i -> ok : 1 - q;
1 -> err : p; 1 -> i : 1 - p; ok -> ok : 1; err -> err : 1;
";

    #[test]
    fn zeroconf_document_matches_generator() {
        let raw = parse_model(ZEROCONF_1).unwrap();
        let parsed = preprocess(&raw).unwrap();
        let (generated, _) = gen_zeroconf(1);
        assert_eq!(parsed.pmc.num_states(), 4);
        assert!(same_up_to_identity(&parsed, &generated));
    }

    #[test]
    fn model_round_trip() {
        let (v, diff) = gen_zeroconf(3);
        let text = print_vpmc(&v);
        let back = preprocess(&parse_model(&text).unwrap()).unwrap();
        assert!(same_up_to_identity(&back, &v));
        assert_eq!(print_vpmc(&back), text);
        let dtext = print_diff(&diff, v.pmc.params());
        assert_eq!(parse_diff(&dtext, &v).unwrap(), diff);
    }

    #[test]
    fn errors_carry_positions() {
        let cases: &[(&str, DocErrorKind, usize)] = &[
            ("state a;\ninit a;\ntarget b;", DocErrorKind::UnknownState, 3),
            ("state a;\nstate a;", DocErrorKind::DuplicateState, 2),
            ("params p;\nstate a; state b;\na -> b : p;\na -> b : 1;", DocErrorKind::DuplicateTransition, 4),
            ("state a; state b;\n\na -> b : 0;", DocErrorKind::ZeroTransition, 3),
            ("state a; state b;\na -> b : x;", DocErrorKind::UnknownParameter, 2),
            ("state a\ninit a;", DocErrorKind::Syntax, 2),
            ("state a;\ninit a;", DocErrorKind::Structure, 2),
        ];
        for (text, kind, line) in cases {
            let e = parse_model(text).unwrap_err();
            assert_eq!((e.kind, e.line), (*kind, *line), "{text}: {e}");
        }
    }

    #[test]
    fn states_may_be_named_like_keywords() {
        let text = "state state; state target;\ninit state;\ntarget target;\nstate -> target : 1;";
        let raw = parse_model(text).unwrap();
        assert_eq!(raw.pmc.num_transitions(), 1);
    }

    #[test]
    fn diff_errors() {
        let (v, _) = gen_zeroconf(1);
        let e = parse_diff("add state 2;\nset 2 -> 3 : p;", &v).unwrap_err();
        assert_eq!((e.kind, e.line, e.col), (DocErrorKind::UnknownState, 2, 10));
        let e = parse_diff("set i -> 1 : q;\nset i -> 1 : p;", &v).unwrap_err();
        assert_eq!((e.kind, e.line), (DocErrorKind::DuplicateTransition, 2));
    }

    #[test]
    fn assignments() {
        let (n, v) = parse_assignment("p=1/2").unwrap();
        assert_eq!((n.as_str(), v), ("p", Rational::new(1.into(), 2.into())));
        assert!(parse_assignment("p").is_err());
        assert!(parse_assignment("p=q").is_err());
    }
}
