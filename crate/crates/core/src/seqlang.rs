//! Line-oriented pulse-sequence language (`.pseq`).
//!
//! One statement per line, `#` starts a comment:
//!
//! ```text
//! ions N=<int>
//! trap nu=<float> eta=<float> rabi=<float> nmax=<int>
//! frame R | frame Rprime delta=<float>
//! carrier_pi2 ion=<int> [phase=<float>]
//! jc_pi ion=<int> n=<int> [mode=ideal|physical]
//! disp_pi ion=<int> n=<int> [mode=...]
//! disp_pi all n=<int> [mode=...]
//! wait T=<float>
//! ```
//!
//! `ion=N` names the last ion, whatever N turns out to be, and is the
//! default for `carrier_pi2` and `jc_pi`. Header lines may appear at most once.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{Frame, StateVector, TrapParams, MAX_IONS};
use crate::pulses::{self, Mode, PulseSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.column, self.severity, self.message)
    }
}

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonRef {
    /// Ion N.
    Last,
    Index(usize),
}

impl IonRef {
    pub fn resolve(self, n_ions: usize) -> usize {
        match self {
            IonRef::Last => n_ions,
            IonRef::Index(i) => i,
        }
    }
}

impl fmt::Display for IonRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IonRef::Last => f.write_str("N"),
            IonRef::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DispTarget {
    Ion(IonRef),
    All,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    CarrierPiHalf { ion: IonRef, phase: f64 },
    JcPi { ion: IonRef, n: usize, mode: Mode },
    DispPi { target: DispTarget, n: usize, mode: Mode },
    Wait { duration: f64 },
}

impl Step {
    pub fn to_pulse(&self, n_ions: usize) -> PulseSpec {
        match *self {
            Step::CarrierPiHalf { ion, phase } => {
                PulseSpec::carrier_pi_half(ion.resolve(n_ions)).with_phase(phase)
            }
            Step::JcPi { ion, n, mode } => PulseSpec::jc_pi(ion.resolve(n_ions), n, mode),
            Step::DispPi { target: DispTarget::All, n, mode } => {
                PulseSpec::dispersive_collective(n, mode)
            }
            Step::DispPi { target: DispTarget::Ion(ion), n, mode } => {
                PulseSpec::dispersive_single(ion.resolve(n_ions), n, mode)
            }
            Step::Wait { duration } => PulseSpec::wait(duration),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::CarrierPiHalf { ion, phase } => {
                write!(f, "carrier_pi2 ion={ion}")?;
                if *phase != 0.0 {
                    write!(f, " phase={phase:?}")?;
                }
                Ok(())
            }
            Step::JcPi { ion, n, mode } => write!(f, "jc_pi ion={ion} n={n} mode={mode}"),
            Step::DispPi { target: DispTarget::All, n, mode } => {
                write!(f, "disp_pi all n={n} mode={mode}")
            }
            Step::DispPi { target: DispTarget::Ion(ion), n, mode } => {
                write!(f, "disp_pi ion={ion} n={n} mode={mode}")
            }
            Step::Wait { duration } => write!(f, "wait T={duration:?}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrapOverrides {
    pub nu: Option<f64>,
    pub eta: Option<f64>,
    pub rabi: Option<f64>,
    pub nmax: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrameDecl {
    R,
    RPrime { delta: f64 },
}

impl FrameDecl {
    pub fn frame(self) -> Frame {
        match self {
            FrameDecl::R => Frame::RESONANT,
            FrameDecl::RPrime { delta } => Frame::laser(delta),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Header {
    pub ions: Option<usize>,
    pub trap: Option<TrapOverrides>,
    pub frame: Option<FrameDecl>,
}

/// A parsed program. Equality is structural: source positions are ignored.
#[derive(Clone, Debug, Default)]
pub struct SequenceProgram {
    pub header: Header,
    pub steps: Vec<Step>,
    /// Position of each step's keyword, parallel to `steps`.
    pub spans: Vec<Span>,
}

impl PartialEq for SequenceProgram {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.steps == other.steps
    }
}

impl SequenceProgram {
    pub fn new(header: Header, steps: Vec<Step>) -> Self {
        let spans = vec![Span::default(); steps.len()];
        Self { header, steps, spans }
    }

    /// The five-pulse GHZ preparation, addressing ion N symbolically.
    pub fn canonical() -> Self {
        let steps = vec![
            Step::CarrierPiHalf { ion: IonRef::Last, phase: 0.0 },
            Step::JcPi { ion: IonRef::Last, n: 0, mode: Mode::Ideal },
            Step::DispPi { target: DispTarget::All, n: 1, mode: Mode::Ideal },
            Step::DispPi { target: DispTarget::Ion(IonRef::Last), n: 1, mode: Mode::Ideal },
            Step::JcPi { ion: IonRef::Last, n: 0, mode: Mode::Ideal },
        ];
        Self::new(Header::default(), steps)
    }

    /// Applies header overrides on top of `base`.
    pub fn resolve_params(&self, base: TrapParams) -> TrapParams {
        let mut p = base;
        if let Some(n) = self.header.ions {
            p.n_ions = n;
        }
        if let Some(t) = self.header.trap {
            p.trap_freq = t.nu.unwrap_or(p.trap_freq);
            p.lamb_dicke = t.eta.unwrap_or(p.lamb_dicke);
            p.base_rabi = t.rabi.unwrap_or(p.base_rabi);
            p.fock_cutoff = t.nmax.unwrap_or(p.fock_cutoff);
        }
        p
    }

    pub fn frame(&self) -> Frame {
        self.header.frame.map(FrameDecl::frame).unwrap_or(Frame::RESONANT)
    }

    /// Checks every step against resolved parameters.
    pub fn validate(&self, params: &TrapParams) -> Vec<ParseDiagnostic> {
        self.steps
            .iter()
            .zip(self.spans.iter().copied().chain(std::iter::repeat(Span::default())))
            .filter_map(|(step, span)| {
                step.to_pulse(params.n_ions).validate(params).err().map(|e| ParseDiagnostic {
                    severity: Severity::Error,
                    line: span.line,
                    column: span.column,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

/// A successful parse plus any warnings.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub program: SequenceProgram,
    pub warnings: Vec<ParseDiagnostic>,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (byte, column)
    let mut column = 0;
    for (byte, ch) in code.char_indices() {
        column += 1;
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((byte, column)),
            (true, Some((b, c))) => {
                tokens.push(Token { text: &code[b..byte], column: c });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((b, c)) = start {
        tokens.push(Token { text: &code[b..], column: c });
    }
    tokens
}

/// Collects diagnostics for one line.
struct LineParser<'a> {
    line: usize,
    keyword: &'a Token<'a>,
    args: &'a [Token<'a>],
    diags: &'a mut Vec<ParseDiagnostic>,
    seen: Vec<&'a str>,
}

impl<'a> LineParser<'a> {
    fn error(&mut self, column: usize, message: impl Into<String>) {
        self.diags.push(ParseDiagnostic {
            severity: Severity::Error,
            line: self.line,
            column,
            message: message.into(),
        });
    }

    /// Splits `key=value` arguments, reporting unknown or repeated keys.
    fn pairs(&mut self, allowed: &[&str], bare: &[&str]) -> Vec<(&'a str, &'a str, usize)> {
        let mut out = Vec::new();
        for tok in self.args {
            match tok.text.split_once('=') {
                Some((key, value)) => {
                    if !allowed.contains(&key) {
                        self.error(tok.column, format!("unknown key '{key}' for '{}'", self.keyword.text));
                    } else if self.seen.contains(&key) {
                        self.error(tok.column, format!("duplicate key '{key}'"));
                    } else if value.is_empty() {
                        self.error(tok.column, format!("missing value for '{key}'"));
                    } else {
                        self.seen.push(key);
                        out.push((key, value, tok.column));
                    }
                }
                None if bare.contains(&tok.text) => {
                    if self.seen.contains(&tok.text) {
                        self.error(tok.column, format!("duplicate '{}'", tok.text));
                    } else {
                        self.seen.push(tok.text);
                        out.push((tok.text, "", tok.column));
                    }
                }
                None => self.error(
                    tok.column,
                    format!("unexpected token '{}' for '{}'", tok.text, self.keyword.text),
                ),
            }
        }
        out
    }

    fn float(&mut self, key: &str, value: &str, column: usize) -> Option<f64> {
        match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.error(column, format!("malformed number '{value}' for '{key}'"));
                None
            }
        }
    }

    fn int(&mut self, key: &str, value: &str, column: usize) -> Option<usize> {
        match value.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(column, format!("malformed integer '{value}' for '{key}'"));
                None
            }
        }
    }

    fn ion(&mut self, value: &str, column: usize) -> Option<IonRef> {
        if value == "N" {
            return Some(IonRef::Last);
        }
        match self.int("ion", value, column)? {
            0 => {
                self.error(column, "ions are numbered from 1");
                None
            }
            i => Some(IonRef::Index(i)),
        }
    }

    fn mode(&mut self, value: &str, column: usize) -> Option<Mode> {
        match value.parse::<Mode>() {
            Ok(m) => Some(m),
            Err(msg) => {
                self.error(column, msg);
                None
            }
        }
    }
}

/// Parses `.pseq` source. Never panics; every failure is a positioned
/// diagnostic.
pub fn parse(source: &str) -> std::result::Result<Parsed, Vec<ParseDiagnostic>> {
    let mut diags: Vec<ParseDiagnostic> = Vec::new();
    let mut header = Header::default();
    let mut header_lines: [Option<usize>; 3] = [None; 3];
    let mut steps = Vec::new();
    let mut spans = Vec::new();
    // (ion token position, ion) for range checks once the header is known.
    let mut ion_uses: Vec<(Span, IonRef)> = Vec::new();
    let mut jc_uses: Vec<(Span, usize)> = Vec::new();
    let mut disp_uses: Vec<(Span, usize)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw);
        let Some((keyword, args)) = tokens.split_first() else { continue };
        let mut lp = LineParser { line, keyword, args, diags: &mut diags, seen: Vec::new() };
        let kw_span = Span { line, column: keyword.column };

        let header_slot = match keyword.text {
            "ions" => Some(0),
            "trap" => Some(1),
            "frame" => Some(2),
            _ => None,
        };
        if let Some(slot) = header_slot {
            if let Some(first) = header_lines[slot] {
                lp.error(keyword.column, format!("duplicate '{}' header (first at line {first})", keyword.text));
                continue;
            }
            header_lines[slot] = Some(line);
        }

        match keyword.text {
            "ions" => {
                let pairs = lp.pairs(&["N"], &[]);
                let mut n = None;
                for (_, v, col) in pairs {
                    n = lp.int("N", v, col);
                    if let Some(k) = n {
                        if k == 0 || k > MAX_IONS {
                            lp.error(col, format!("N = {k} must lie in 1..={MAX_IONS}"));
                            n = None;
                        }
                    }
                }
                match n {
                    Some(_) => header.ions = n,
                    None if !lp.seen.contains(&"N") => lp.error(keyword.column, "'ions' requires N=<int>"),
                    None => {}
                }
            }
            "trap" => {
                let pairs = lp.pairs(&["nu", "eta", "rabi", "nmax"], &[]);
                if pairs.is_empty() && args.is_empty() {
                    lp.error(keyword.column, "'trap' requires at least one of nu, eta, rabi, nmax");
                }
                let mut t = TrapOverrides::default();
                for (k, v, col) in pairs {
                    match k {
                        "nmax" => {
                            t.nmax = lp.int(k, v, col);
                            if t.nmax == Some(0) {
                                lp.error(col, "nmax must be at least 1");
                            }
                        }
                        _ => {
                            let x = lp.float(k, v, col);
                            if let Some(x) = x {
                                if x < 0.0 {
                                    lp.error(col, format!("{k} must be non-negative"));
                                }
                            }
                            match k {
                                "nu" => t.nu = x,
                                "eta" => t.eta = x,
                                _ => t.rabi = x,
                            }
                        }
                    }
                }
                header.trap = Some(t);
            }
            "frame" => {
                let pairs = lp.pairs(&["delta"], &["R", "Rprime"]);
                let tag = pairs.iter().find(|(k, _, _)| *k == "R" || *k == "Rprime").map(|p| p.0);
                let delta = pairs.iter().find(|(k, _, _)| *k == "delta").copied();
                match (tag, delta) {
                    (Some("R"), Some((_, _, col))) => lp.error(col, "frame R has no detuning"),
                    (Some("R"), None) => header.frame = Some(FrameDecl::R),
                    (Some(_), Some((k, v, col))) => {
                        if let Some(delta) = lp.float(k, v, col) {
                            header.frame = Some(FrameDecl::RPrime { delta });
                        }
                    }
                    (Some(_), None) => lp.error(keyword.column, "frame Rprime requires delta=<float>"),
                    (None, _) => lp.error(keyword.column, "'frame' requires R or Rprime"),
                }
                if pairs.iter().filter(|(k, _, _)| *k == "R" || *k == "Rprime").count() > 1 {
                    lp.error(keyword.column, "frame given twice on one line");
                }
            }
            "carrier_pi2" => {
                let pairs = lp.pairs(&["ion", "phase"], &[]);
                let mut ion = Some(IonRef::Last);
                let mut phase = Some(0.0);
                for (k, v, col) in pairs {
                    match k {
                        "ion" => {
                            ion = lp.ion(v, col);
                            if let Some(i) = ion {
                                ion_uses.push((Span { line, column: col }, i));
                            }
                        }
                        _ => phase = lp.float(k, v, col),
                    }
                }
                if let (Some(ion), Some(phase)) = (ion, phase) {
                    steps.push(Step::CarrierPiHalf { ion, phase });
                    spans.push(kw_span);
                }
            }
            "jc_pi" | "disp_pi" => {
                let is_jc = keyword.text == "jc_pi";
                let bare: &[&str] = if is_jc { &[] } else { &["all"] };
                let pairs = lp.pairs(&["ion", "n", "mode"], bare);
                let mut ion: Option<Option<IonRef>> = None;
                let mut all = false;
                let mut n: Option<usize> = None;
                let mut n_ok = true;
                let mut mode = Some(Mode::Ideal);
                for (k, v, col) in pairs {
                    match k {
                        "ion" => {
                            let parsed = lp.ion(v, col);
                            if let Some(i) = parsed {
                                ion_uses.push((Span { line, column: col }, i));
                            }
                            ion = Some(parsed);
                        }
                        "all" => all = true,
                        "n" => {
                            n = lp.int(k, v, col);
                            match n {
                                Some(0) if !is_jc => {
                                    lp.error(
                                        col,
                                        "dispersive pulse requires n >= 1 (Omega_dis^(0) = 0: no coupling at n = 0)",
                                    );
                                    n_ok = false;
                                }
                                Some(v) if is_jc => jc_uses.push((Span { line, column: col }, v)),
                                Some(v) => disp_uses.push((Span { line, column: col }, v)),
                                None => n_ok = false,
                            }
                        }
                        _ => mode = lp.mode(v, col),
                    }
                }
                if n.is_none() && n_ok {
                    lp.error(keyword.column, format!("'{}' requires n=<int>", keyword.text));
                }
                if all && ion.is_some() {
                    lp.error(keyword.column, "disp_pi takes either 'all' or ion=<int>, not both");
                    continue;
                }
                if !is_jc && !all && ion.is_none() {
                    lp.error(keyword.column, "disp_pi requires 'all' or ion=<int>");
                    continue;
                }
                let ion = match ion {
                    None => Some(IonRef::Last),
                    Some(i) => i,
                };
                if let (Some(ion), Some(n), Some(mode), true) = (ion, n, mode, n_ok) {
                    let step = if is_jc {
                        Step::JcPi { ion, n, mode }
                    } else if all {
                        Step::DispPi { target: DispTarget::All, n, mode }
                    } else {
                        Step::DispPi { target: DispTarget::Ion(ion), n, mode }
                    };
                    steps.push(step);
                    spans.push(kw_span);
                }
            }
            "wait" => {
                let pairs = lp.pairs(&["T"], &[]);
                let mut duration = None;
                let mut present = false;
                for (k, v, col) in pairs {
                    present = true;
                    duration = lp.float(k, v, col);
                    if let Some(t) = duration {
                        if t < 0.0 {
                            lp.error(col, format!("wait time {t} is negative"));
                            duration = None;
                        }
                    }
                }
                if !present && !lp.seen.contains(&"T") {
                    lp.error(keyword.column, "'wait' requires T=<float>");
                }
                if let Some(duration) = duration {
                    steps.push(Step::Wait { duration });
                    spans.push(kw_span);
                }
            }
            other => lp.error(keyword.column, format!("unknown keyword '{other}'")),
        }
    }

    // Range checks that only need the header.
    if let Some(n_ions) = header.ions {
        for (span, ion) in &ion_uses {
            if let IonRef::Index(i) = ion {
                if *i > n_ions {
                    diags.push(ParseDiagnostic {
                        severity: Severity::Error,
                        line: span.line,
                        column: span.column,
                        message: format!("ion {i} out of range 1..={n_ions}"),
                    });
                }
            }
        }
    }
    if let Some(n_max) = header.trap.and_then(|t| t.nmax) {
        for (span, n) in &jc_uses {
            if n + 1 > n_max {
                diags.push(ParseDiagnostic {
                    severity: Severity::Error,
                    line: span.line,
                    column: span.column,
                    message: format!("sideband pulse on n = {n} couples to n = {} beyond nmax = {n_max}", n + 1),
                });
            }
        }
        for (span, n) in &disp_uses {
            if *n > n_max {
                diags.push(ParseDiagnostic {
                    severity: Severity::Error,
                    line: span.line,
                    column: span.column,
                    message: format!("dispersive pulse on n = {n} beyond nmax = {n_max}"),
                });
            }
        }
    }

    diags.sort_by_key(|d| (d.line, d.column));
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(diags);
    }
    if steps.is_empty() {
        diags.push(ParseDiagnostic {
            severity: Severity::Warning,
            line: 1,
            column: 1,
            message: "no steps".into(),
        });
    }
    Ok(Parsed { program: SequenceProgram { header, steps, spans }, warnings: diags })
}

/// Canonical source: header first (ions, trap, frame), one step per line,
/// fixed key order, comments dropped.
pub fn format(program: &SequenceProgram) -> String {
    let mut out = String::new();
    let h = &program.header;
    if let Some(n) = h.ions {
        out.push_str(&std::format!("ions N={n}\n"));
    }
    if let Some(t) = h.trap {
        out.push_str("trap");
        if let Some(v) = t.nu {
            out.push_str(&std::format!(" nu={v:?}"));
        }
        if let Some(v) = t.eta {
            out.push_str(&std::format!(" eta={v:?}"));
        }
        if let Some(v) = t.rabi {
            out.push_str(&std::format!(" rabi={v:?}"));
        }
        if let Some(v) = t.nmax {
            out.push_str(&std::format!(" nmax={v}"));
        }
        out.push('\n');
    }
    match h.frame {
        Some(FrameDecl::R) => out.push_str("frame R\n"),
        Some(FrameDecl::RPrime { delta }) => out.push_str(&std::format!("frame Rprime delta={delta:?}\n")),
        None => {}
    }
    for step in &program.steps {
        out.push_str(&step.to_string());
        out.push('\n');
    }
    out
}

/// Snapshot after one executed step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub step: usize,
    pub line: usize,
    pub statement: String,
    pub clock: f64,
    pub norm: f64,
    pub fock_populations: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Execution {
    pub final_state: StateVector,
    pub trace: Vec<TraceEntry>,
}

/// Runs `program` with header overrides applied on top of `base`, starting
/// from `initial` or the motional and electronic ground state.
pub fn execute(
    program: &SequenceProgram,
    base: TrapParams,
    initial: Option<StateVector>,
) -> Result<Execution> {
    let params = program.resolve_params(base);
    params.validate()?;
    let frame = program.frame();
    if let Some(d) = program.validate(&params).into_iter().next() {
        let source = program
            .steps
            .iter()
            .find_map(|s| s.to_pulse(params.n_ions).validate(&params).err())
            .expect("a diagnostic implies a failing step");
        return Err(Error::AtStep { line: d.line, column: d.column, source: Box::new(source) });
    }
    let mut state = match initial {
        Some(s) => {
            if *s.params() != params || s.frame() != frame {
                return Err(Error::Mismatch(
                    "initial state does not match the program's parameters or frame".into(),
                ));
            }
            s
        }
        None => StateVector::ground_state(params, frame)?,
    };
    let mut trace = Vec::with_capacity(program.steps.len());
    for (k, step) in program.steps.iter().enumerate() {
        let span = program.spans.get(k).copied().unwrap_or_default();
        let at = |e: Error| Error::AtStep { line: span.line, column: span.column, source: Box::new(e) };
        pulses::apply(&mut state, &step.to_pulse(params.n_ions)).map_err(at)?;
        state.check_leakage().map_err(at)?;
        trace.push(TraceEntry {
            step: k + 1,
            line: span.line,
            statement: step.to_string(),
            clock: state.clock(),
            norm: state.norm(),
            fock_populations: state.fock_populations(),
        });
    }
    Ok(Execution { final_state: state, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = "\
# five-pulse GHZ preparation
carrier_pi2
jc_pi n=0
disp_pi all n=1
disp_pi ion=N n=1
jc_pi n=0
";

    fn errors(src: &str) -> Vec<ParseDiagnostic> {
        parse(src).expect_err("expected diagnostics")
    }

    #[test]
    fn canonical_program_parses_to_five_steps() {
        let parsed = parse(CANONICAL).unwrap();
        assert!(parsed.warnings.is_empty());
        assert_eq!(parsed.program.steps.len(), 5);
        assert_eq!(parsed.program, SequenceProgram::canonical());
        assert_eq!(parsed.program.spans[0], Span { line: 2, column: 1 });
    }

    #[test]
    fn dispersive_at_ground_is_rejected() {
        let d = errors("ions N=2\ndisp_pi all n=0\n");
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].line, d[0].column), (2, 13));
        assert!(d[0].message.contains("requires n >= 1"));
        assert_eq!(d[0].to_string(), std::format!("2:13: error: {}", d[0].message));
    }

    #[test]
    fn empty_source_warns() {
        let parsed = parse("").unwrap();
        assert!(parsed.program.steps.is_empty());
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].severity, Severity::Warning);
        assert_eq!(parsed.warnings[0].message, "no steps");
        let parsed = parse("# only a comment\n\n").unwrap();
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn error_positions() {
        let d = errors("frobnicate x=1\n");
        assert_eq!((d[0].line, d[0].column), (1, 1));
        assert!(d[0].message.contains("unknown keyword"));

        let d = errors("wait T=abc\n");
        assert_eq!((d[0].line, d[0].column), (1, 6));
        assert!(d[0].message.contains("malformed number"));

        let d = errors("ions N=2\n  carrier_pi2 ion=3\n");
        assert_eq!((d[0].line, d[0].column), (2, 15));
        assert!(d[0].message.contains("out of range"));

        let d = errors("trap nmax=2\njc_pi ion=1 n=2\n");
        assert_eq!((d[0].line, d[0].column), (2, 13));

        let d = errors("ions N=2\nions N=3\n");
        assert!(d[0].message.contains("duplicate 'ions' header"));
        assert_eq!(d[0].line, 2);

        let d = errors("jc_pi n=0 mode=exact\n");
        assert!(d[0].message.contains("unknown mode"));

        let d = errors("jc_pi n=0 n=1\n");
        assert!(d[0].message.contains("duplicate key"));

        let d = errors("disp_pi n=1\n");
        assert!(d[0].message.contains("'all' or ion"));

        let d = errors("wait T=-1\n");
        assert!(d[0].message.contains("negative"));

        let d = errors("wait T=inf\n");
        assert!(d[0].message.contains("malformed number"));

        let d = errors("frame R delta=0.1\n");
        assert!(d[0].message.contains("no detuning"));

        let d = errors("frame Rprime\n");
        assert!(d[0].message.contains("requires delta"));

        let d = errors("jc_pi ion=0 n=0\n");
        assert!(d[0].message.contains("numbered from 1"));
    }

    #[test]
    fn several_errors_are_all_reported_in_order() {
        let d = errors("wait\nfoo\njc_pi\n");
        let lines: Vec<usize> = d.iter().map(|x| x.line).collect();
        assert_eq!(lines, vec![1, 2, 3]);
    }

    #[test]
    fn non_ascii_input_is_a_diagnostic() {
        let d = errors("wait T=1 Ω=2\n");
        assert_eq!((d[0].line, d[0].column), (1, 10));
    }

    #[test]
    fn format_normalizes() {
        let src = "frame Rprime delta=0.01  # laser frame\njc_pi mode=physical n=0 ion=2\nions N=3\ntrap nmax=4 nu=1\nwait T=2.5\ncarrier_pi2 phase=0.25\n";
        let parsed = parse(src).unwrap();
        let text = format(&parsed.program);
        assert_eq!(
            text,
            "ions N=3\ntrap nu=1.0 nmax=4\nframe Rprime delta=0.01\njc_pi ion=2 n=0 mode=physical\nwait T=2.5\ncarrier_pi2 ion=N phase=0.25\n"
        );
        let again = parse(&text).unwrap().program;
        assert_eq!(again, parsed.program);
        assert_eq!(format(&again), text);
    }

    #[test]
    fn header_overrides_params() {
        let parsed = parse("ions N=5\ntrap eta=0.2 nmax=3\nframe Rprime delta=0.5\n").unwrap();
        let p = parsed.program.resolve_params(TrapParams::default());
        assert_eq!(p.n_ions, 5);
        assert_eq!(p.lamb_dicke, 0.2);
        assert_eq!(p.fock_cutoff, 3);
        assert_eq!(p.trap_freq, 1.0);
        assert_eq!(parsed.program.frame(), Frame::laser(0.5));
    }

    #[test]
    fn execute_canonical_reaches_ghz() {
        let program = parse(CANONICAL).unwrap().program;
        let params = TrapParams::new(3, 4);
        let run = execute(&program, params, None).unwrap();
        let target = StateVector::target_ghz(params, Frame::RESONANT, 0.0).unwrap();
        assert!(run.final_state.fidelity(&target).unwrap() > 1.0 - 1e-12);
        assert_eq!(run.trace.len(), 5);
        assert_eq!(run.trace[4].clock, run.final_state.clock());
        assert!((run.trace[1].fock_populations[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn execute_wait_gives_vibrational_phases_only() {
        let program = parse("wait T=1.0\n").unwrap().program;
        let params = TrapParams::new(2, 2);
        let mut init = StateVector::basis_state(params, Frame::RESONANT, crate::BasisIndex::new(0b01, 1)).unwrap();
        let before = init.amplitudes().to_vec();
        let run = execute(&program, params, Some(init.clone())).unwrap();
        let k = crate::BasisIndex::new(0b01, 1).flat(2);
        let expect = before[k] * num_complex::Complex64::from_polar(1.0, -1.0);
        assert!((run.final_state.amplitudes()[k] - expect).norm() < 1e-15);
        pulses::free_evolve(&mut init, 1.0).unwrap();
        assert_eq!(run.final_state, init);
    }

    #[test]
    fn execute_mirror_returns_ion_n_to_ground_for_even_n() {
        let src = std::format!("{CANONICAL}wait T=0\njc_pi n=0\ndisp_pi ion=N n=1\ndisp_pi all n=1\njc_pi n=0\ncarrier_pi2\n");
        let program = parse(&src).unwrap().program;
        for n in [2, 4] {
            let run = execute(&program, TrapParams::new(n, 4), None).unwrap();
            assert!(run.final_state.excited_population(n).unwrap() < 1e-12);
        }
    }

    #[test]
    fn execution_errors_carry_position() {
        let program = parse("ions N=2\njc_pi ion=2 n=3\n").unwrap().program;
        match execute(&program, TrapParams::new(2, 2), None) {
            Err(Error::AtStep { line: 2, column: 1, source }) => {
                assert!(matches!(*source, Error::SidebandPastCutoff { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
        // Physical-mode pulses that push population to the cutoff trip the guard.
        let program = parse("carrier_pi2\njc_pi n=0\ncarrier_pi2\njc_pi n=1\n").unwrap().program;
        match execute(&program, TrapParams::new(1, 2), None) {
            Err(Error::AtStep { line: 4, source, .. }) => {
                assert!(matches!(*source, Error::Leakage { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
