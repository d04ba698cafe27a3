//! The `.sam` design description format.
//!
//! A `.sam` file is line oriented. Each non-blank line holds one statement;
//! `#` starts a comment that runs to the end of the line. Keywords are
//! lowercase and case-sensitive; whitespace around `=` is optional.
//!
//! ```text
//! device <cantilever|pressure_sensor|linear> [options]
//! param <name> nominal=<real> dist=<kind> [distribution options]
//! bind <device-field> = <param-name | real>
//! metric <name>
//! spec <metric> <ge|le> <real>
//! ```
//!
//! Distribution kinds and their options:
//!
//! | `dist=`       | options                                   |
//! |---------------|-------------------------------------------|
//! | `none`        | (none; the parameter is fixed)            |
//! | `gaussian`    | `sigma=`                                  |
//! | `uniform`     | `lo=` and `hi=`, or `halfwidth=`          |
//! | `exponential` | `rate=`, optional `offset=` (default 0)   |
//!
//! Device options: `cantilever` takes `calib_f=` (the resonant-frequency
//! constant); `linear` takes `c0=` (offset) and `c1=`…`cN=`, which define
//! fields `x1`…`xN` and the metric `response`.
//!
//! Statements may appear in any order. [`serialize`] writes the canonical
//! ordering: device, params, binds, metrics, specs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::devices::{DeviceKind, Metric};
use crate::distributions::{DistKind, Distribution};
use crate::problem::{is_identifier, Binding, DesignProblem, Relation, Specification, StatisticalParameter};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    /// 1-based.
    pub line: usize,
    /// 1-based character column.
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unknown statement keyword '{0}'")]
    UnknownKeyword(String),
    #[error("unknown device kind '{0}'")]
    UnknownDevice(String),
    #[error("unknown distribution kind '{0}'")]
    UnknownDistribution(String),
    #[error("unknown option '{0}'")]
    UnknownOption(String),
    #[error("missing option '{0}'")]
    MissingOption(&'static str),
    #[error("option '{0}' given twice")]
    DuplicateOption(String),
    #[error("malformed number '{0}'")]
    MalformedNumber(String),
    #[error("{0}")]
    Syntax(String),
    #[error("invalid name '{0}'")]
    InvalidName(String),
    #[error("duplicate parameter '{0}'")]
    DuplicateParameter(String),
    #[error("device declared more than once")]
    DuplicateDevice,
    #[error("no device statement")]
    MissingDevice,
    #[error("device has no field '{0}'")]
    UnknownField(String),
    #[error("field '{0}' bound more than once")]
    DuplicateBinding(String),
    #[error("undeclared parameter '{0}'")]
    UnknownParameter(String),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("metric '{metric}' is not provided by device '{device}'")]
    UnsupportedMetric { metric: String, device: &'static str },
    #[error("metric '{0}' declared more than once")]
    DuplicateMetric(String),
    #[error("spec references undeclared metric '{0}'")]
    UndeclaredMetric(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col0, (byte, ch)) in line.char_indices().enumerate() {
        let col = col0 + 1;
        if ch.is_whitespace() || ch == '=' {
            if let Some((b, c)) = start.take() {
                out.push(Token { text: &line[b..byte], column: c });
            }
            if ch == '=' {
                out.push(Token { text: &line[byte..byte + 1], column: col });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push(Token { text: &line[b..], column: c });
    }
    out
}

struct LineCtx {
    line: usize,
    end_column: usize,
}

impl LineCtx {
    fn err(&self, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column, kind }
    }

    fn at(&self, tok: &Token<'_>, kind: ParseErrorKind) -> ParseError {
        self.err(tok.column, kind)
    }

    fn number(&self, tok: &Token<'_>) -> Result<f64, ParseError> {
        match tok.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.at(tok, ParseErrorKind::MalformedNumber(tok.text.to_string()))),
        }
    }

    fn expect<'a, 'b>(&self, toks: &'b [Token<'a>], i: usize, what: &str) -> Result<&'b Token<'a>, ParseError> {
        toks.get(i)
            .ok_or_else(|| self.err(self.end_column, ParseErrorKind::Syntax(format!("expected {what}"))))
    }
}

/// `key=value` pairs, keeping each key's token for error positions.
struct Options<'a> {
    entries: BTreeMap<&'a str, (Token<'a>, Token<'a>)>,
}

impl<'a> Options<'a> {
    fn parse(ctx: &LineCtx, toks: &[Token<'a>]) -> Result<Self, ParseError> {
        let mut entries = BTreeMap::new();
        let mut i = 0;
        while i < toks.len() {
            let key = &toks[i];
            if key.text == "=" {
                return Err(ctx.at(key, ParseErrorKind::Syntax("expected option name before '='".into())));
            }
            match toks.get(i + 1) {
                Some(t) if t.text == "=" => {}
                _ => {
                    return Err(ctx.at(key, ParseErrorKind::Syntax(format!("expected '=' after '{}'", key.text))))
                }
            }
            let value = ctx.expect(toks, i + 2, &format!("value for '{}'", key.text))?;
            if value.text == "=" {
                return Err(ctx.at(value, ParseErrorKind::Syntax(format!("expected value for '{}'", key.text))));
            }
            if entries.insert(key.text, (key.clone(), value.clone())).is_some() {
                return Err(ctx.at(key, ParseErrorKind::DuplicateOption(key.text.to_string())));
            }
            i += 3;
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<Token<'a>> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn take_number(&mut self, ctx: &LineCtx, key: &str) -> Result<Option<f64>, ParseError> {
        self.take(key).map(|t| ctx.number(&t)).transpose()
    }

    fn require_number(&mut self, ctx: &LineCtx, key: &'static str) -> Result<f64, ParseError> {
        self.take_number(ctx, key)?
            .ok_or_else(|| ctx.err(ctx.end_column, ParseErrorKind::MissingOption(key)))
    }

    fn finish(self, ctx: &LineCtx) -> Result<(), ParseError> {
        match self.entries.into_values().next() {
            Some((key, _)) => Err(ctx.at(&key, ParseErrorKind::UnknownOption(key.text.to_string()))),
            None => Ok(()),
        }
    }
}

fn parse_device(ctx: &LineCtx, toks: &[Token<'_>]) -> Result<DeviceKind, ParseError> {
    let kind = ctx.expect(toks, 1, "device kind")?;
    let mut opts = Options::parse(ctx, &toks[2..])?;
    let device = match kind.text {
        "cantilever" => {
            let c = opts.take_number(ctx, "calib_f")?.unwrap_or(0.0);
            if c < 0.0 {
                return Err(ctx.at(kind, ParseErrorKind::Syntax("calib_f must be non-negative".into())));
            }
            DeviceKind::Cantilever { freq_constant: c }
        }
        "pressure_sensor" => DeviceKind::PressureSensor,
        "linear" => {
            let offset = opts.take_number(ctx, "c0")?.unwrap_or(0.0);
            let mut coeffs = Vec::new();
            while let Some(c) = opts.take_number(ctx, &format!("c{}", coeffs.len() + 1))? {
                coeffs.push(c);
            }
            DeviceKind::Affine { offset, coeffs }
        }
        other => return Err(ctx.at(kind, ParseErrorKind::UnknownDevice(other.to_string()))),
    };
    opts.finish(ctx)?;
    Ok(device)
}

fn parse_param(ctx: &LineCtx, toks: &[Token<'_>]) -> Result<StatisticalParameter, ParseError> {
    let name = ctx.expect(toks, 1, "parameter name")?;
    if !is_identifier(name.text) {
        return Err(ctx.at(name, ParseErrorKind::InvalidName(name.text.to_string())));
    }
    let mut opts = Options::parse(ctx, &toks[2..])?;
    let nominal = opts.require_number(ctx, "nominal")?;
    let kind = opts
        .take("dist")
        .ok_or_else(|| ctx.err(ctx.end_column, ParseErrorKind::MissingOption("dist")))?;
    let dist = match kind.text {
        "none" => Distribution::fixed(nominal),
        "gaussian" => {
            let sigma = opts.require_number(ctx, "sigma")?;
            Distribution::gaussian(nominal, sigma)
        }
        "uniform" => {
            let lo = opts.take_number(ctx, "lo")?;
            let hi = opts.take_number(ctx, "hi")?;
            let half = opts.take("halfwidth");
            match (lo, hi, half) {
                (Some(lo), Some(hi), None) => Distribution::uniform(lo, hi),
                (None, None, Some(h)) => {
                    let h = ctx.number(&h)?;
                    Distribution::uniform(nominal - h, nominal + h)
                }
                (_, _, Some(h)) => {
                    return Err(ctx.at(&h, ParseErrorKind::Syntax("give either lo/hi or halfwidth, not both".into())))
                }
                (None, _, None) => return Err(ctx.err(ctx.end_column, ParseErrorKind::MissingOption("lo"))),
                (_, None, None) => return Err(ctx.err(ctx.end_column, ParseErrorKind::MissingOption("hi"))),
            }
        }
        "exponential" => {
            let rate = opts.require_number(ctx, "rate")?;
            let offset = opts.take_number(ctx, "offset")?.unwrap_or(0.0);
            Distribution::exponential(offset, rate)
        }
        other => return Err(ctx.at(&kind, ParseErrorKind::UnknownDistribution(other.to_string()))),
    }
    .map_err(|e| ctx.at(&kind, ParseErrorKind::InvalidParameter(e.to_string())))?;
    opts.finish(ctx)?;
    StatisticalParameter::new(name.text, nominal, dist)
        .map_err(|e| ctx.at(name, ParseErrorKind::InvalidParameter(e.to_string())))
}

struct BindStmt {
    line: usize,
    column: usize,
    field: String,
    target: Binding,
    target_column: usize,
}

fn parse_bind(ctx: &LineCtx, toks: &[Token<'_>]) -> Result<BindStmt, ParseError> {
    let field = ctx.expect(toks, 1, "device field")?;
    let eq = ctx.expect(toks, 2, "'='")?;
    if eq.text != "=" {
        return Err(ctx.at(eq, ParseErrorKind::Syntax("expected '='".into())));
    }
    let target = ctx.expect(toks, 3, "parameter name or value")?;
    if let Some(extra) = toks.get(4) {
        return Err(ctx.at(extra, ParseErrorKind::Syntax("unexpected trailing input".into())));
    }
    let binding = if is_identifier(target.text) {
        Binding::Param(target.text.to_string())
    } else {
        Binding::Literal(ctx.number(target)?)
    };
    Ok(BindStmt {
        line: ctx.line,
        column: field.column,
        field: field.text.to_string(),
        target: binding,
        target_column: target.column,
    })
}

fn parse_metric_name(ctx: &LineCtx, tok: &Token<'_>) -> Result<Metric, ParseError> {
    tok.text
        .parse()
        .map_err(|_| ctx.at(tok, ParseErrorKind::UnknownMetric(tok.text.to_string())))
}

fn no_trailing(ctx: &LineCtx, toks: &[Token<'_>], n: usize) -> Result<(), ParseError> {
    match toks.get(n) {
        Some(t) => Err(ctx.at(t, ParseErrorKind::Syntax("unexpected trailing input".into()))),
        None => Ok(()),
    }
}

/// Parses `.sam` text into a validated [`DesignProblem`].
pub fn parse(text: &str) -> Result<DesignProblem, ParseError> {
    let mut device: Option<(DeviceKind, usize)> = None;
    let mut params: Vec<StatisticalParameter> = Vec::new();
    let mut binds: Vec<BindStmt> = Vec::new();
    let mut metrics: Vec<(Metric, usize, usize)> = Vec::new();
    let mut specs: Vec<(Specification, usize, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokenize(content);
        let Some(first) = toks.first() else { continue };
        let ctx = LineCtx { line: idx + 1, end_column: content.chars().count() + 1 };
        match first.text {
            "device" => {
                let d = parse_device(&ctx, &toks)?;
                if device.is_some() {
                    return Err(ctx.at(first, ParseErrorKind::DuplicateDevice));
                }
                device = Some((d, ctx.line));
            }
            "param" => {
                let p = parse_param(&ctx, &toks)?;
                if params.iter().any(|q| q.name == p.name) {
                    return Err(ctx.at(&toks[1], ParseErrorKind::DuplicateParameter(p.name)));
                }
                params.push(p);
            }
            "bind" => binds.push(parse_bind(&ctx, &toks)?),
            "metric" => {
                let tok = ctx.expect(&toks, 1, "metric name")?;
                let m = parse_metric_name(&ctx, tok)?;
                no_trailing(&ctx, &toks, 2)?;
                if metrics.iter().any(|(n, _, _)| *n == m) {
                    return Err(ctx.at(tok, ParseErrorKind::DuplicateMetric(m.name().to_string())));
                }
                metrics.push((m, ctx.line, tok.column));
            }
            "spec" => {
                let tok = ctx.expect(&toks, 1, "metric name")?;
                let m = parse_metric_name(&ctx, tok)?;
                let rel_tok = ctx.expect(&toks, 2, "'ge' or 'le'")?;
                let relation = match rel_tok.text {
                    "ge" => Relation::Ge,
                    "le" => Relation::Le,
                    other => {
                        return Err(ctx.at(rel_tok, ParseErrorKind::Syntax(format!("expected 'ge' or 'le', got '{other}'"))))
                    }
                };
                let bound = ctx.number(ctx.expect(&toks, 3, "bound")?)?;
                no_trailing(&ctx, &toks, 4)?;
                let spec = Specification { metric: m, relation, bound };
                specs.push((spec, ctx.line, tok.column));
            }
            other => return Err(ctx.at(first, ParseErrorKind::UnknownKeyword(other.to_string()))),
        }
    }

    let Some((device, device_line)) = device else {
        return Err(ParseError { line: 1, column: 1, kind: ParseErrorKind::MissingDevice });
    };

    let mut bound_fields: Vec<&str> = Vec::new();
    for b in &binds {
        let err = |column, kind| ParseError { line: b.line, column, kind };
        if device.field_index(&b.field).is_none() {
            return Err(err(b.column, ParseErrorKind::UnknownField(b.field.clone())));
        }
        if bound_fields.contains(&b.field.as_str()) {
            return Err(err(b.column, ParseErrorKind::DuplicateBinding(b.field.clone())));
        }
        bound_fields.push(&b.field);
        if let Binding::Param(name) = &b.target {
            if !params.iter().any(|p| &p.name == name) {
                return Err(err(b.target_column, ParseErrorKind::UnknownParameter(name.clone())));
            }
        }
    }
    for &(m, line, column) in &metrics {
        if !device.supports(m) {
            return Err(ParseError {
                line,
                column,
                kind: ParseErrorKind::UnsupportedMetric { metric: m.name().to_string(), device: device.name() },
            });
        }
    }
    for (s, line, column) in &specs {
        if !metrics.iter().any(|(m, _, _)| *m == s.metric) {
            return Err(ParseError {
                line: *line,
                column: *column,
                kind: ParseErrorKind::UndeclaredMetric(s.metric.name().to_string()),
            });
        }
    }

    DesignProblem::new(
        device,
        params,
        binds.into_iter().map(|b| (b.field, b.target)).collect(),
        metrics.into_iter().map(|(m, _, _)| m).collect(),
        specs.into_iter().map(|(s, _, _)| s).collect(),
    )
    .map_err(|e| ParseError { line: device_line, column: 1, kind: ParseErrorKind::Syntax(e.to_string()) })
}

/// Canonical text form; `parse(&serialize(p)) == p`.
pub fn serialize(problem: &DesignProblem) -> String {
    let mut out = String::new();
    match problem.device() {
        DeviceKind::Cantilever { freq_constant } if *freq_constant != 0.0 => {
            let _ = writeln!(out, "device cantilever calib_f={freq_constant:e}");
        }
        DeviceKind::Cantilever { .. } => out.push_str("device cantilever\n"),
        DeviceKind::PressureSensor => out.push_str("device pressure_sensor\n"),
        DeviceKind::Affine { offset, coeffs } => {
            let _ = write!(out, "device linear c0={offset:e}");
            for (i, c) in coeffs.iter().enumerate() {
                let _ = write!(out, " c{}={c:e}", i + 1);
            }
            out.push('\n');
        }
    }
    for p in problem.parameters() {
        let _ = write!(out, "param {} nominal={:e} dist=", p.name, p.nominal);
        let _ = match *p.dist.kind() {
            DistKind::Fixed { .. } => writeln!(out, "none"),
            DistKind::Gaussian { sigma, .. } => writeln!(out, "gaussian sigma={sigma:e}"),
            DistKind::Uniform { lo, hi } => writeln!(out, "uniform lo={lo:e} hi={hi:e}"),
            DistKind::Exponential { offset, rate } => writeln!(out, "exponential rate={rate:e} offset={offset:e}"),
        };
    }
    for (field, binding) in problem.bindings() {
        let _ = match binding {
            Binding::Param(name) => writeln!(out, "bind {field} = {name}"),
            Binding::Literal(v) => writeln!(out, "bind {field} = {v:e}"),
        };
    }
    for m in problem.metrics() {
        let _ = writeln!(out, "metric {m}");
    }
    for s in problem.specs() {
        let _ = writeln!(out, "spec {s}");
    }
    out
}
