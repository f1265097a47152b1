//! Textual digit-stream descriptions.
//!
//! One spec per line:
//!
//! ```text
//! rational:<int>/<int>
//! champernowne
//! blocks:cycle=[(l1,m1),(l2,m2),...](;m0=<int>)?
//! blocks:l=<expr>;m=<expr>(;m0=<int>)?
//! random:seed=<u64>(;lmax=<int>)?
//! digits:file=<path>
//! ```
//!
//! Block-family expressions are over the block index `j` (starting at 1) with
//! integer constants, `+`, `*`, `^` (right associative), postfix `!`, `min(a,b)`,
//! `max(a,b)` and parentheses.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

/// Default upper truncation for random block lengths.
pub const DEFAULT_LMAX: u64 = 16;

/// Number of leading family indices checked by [`validate_spec`].
pub const FAMILY_CHECK_RANGE: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Rational,
    Champernowne,
    BlockCycle,
    BlockFamily,
    RandomBlocks,
    RawDigits,
}

/// A parsed, normalized stream description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StreamSpec {
    /// `num/den`, stored in lowest terms.
    Rational {
        num: BigUint,
        den: BigUint,
    },
    Champernowne,
    /// `m0` leading ones, then the `(zeros, ones)` pairs repeated forever.
    BlockCycle {
        pairs: Vec<(u64, u64)>,
        m0: u64,
    },
    BlockFamily {
        zeros: Expr,
        ones: Expr,
        m0: u64,
    },
    RandomBlocks {
        seed: u64,
        lmax: u64,
    },
    RawDigits {
        path: String,
    },
}

impl StreamSpec {
    pub fn kind(&self) -> StreamKind {
        match self {
            StreamSpec::Rational { .. } => StreamKind::Rational,
            StreamSpec::Champernowne => StreamKind::Champernowne,
            StreamSpec::BlockCycle { .. } => StreamKind::BlockCycle,
            StreamSpec::BlockFamily { .. } => StreamKind::BlockFamily,
            StreamSpec::RandomBlocks { .. } => StreamKind::RandomBlocks,
            StreamSpec::RawDigits { .. } => StreamKind::RawDigits,
        }
    }

    /// Block-built kinds declare their own run lengths and are exempt from the
    /// run guard.
    pub fn declares_runs(&self) -> bool {
        matches!(self, StreamSpec::BlockCycle { .. } | StreamSpec::BlockFamily { .. } | StreamSpec::RandomBlocks { .. })
    }

    pub fn rational(num: u64, den: u64) -> Self {
        normalize_rational(BigUint::from(num), BigUint::from(den))
    }

    pub fn cycle(pairs: &[(u64, u64)]) -> Self {
        StreamSpec::BlockCycle { pairs: pairs.to_vec(), m0: 0 }
    }

    /// `x` as a reduced fraction, for rationals and for block cycles whose
    /// period and leading run total at most [`MAX_EXACT_PERIOD`] digits.
    pub fn exact_value(&self) -> Option<(BigUint, BigUint)> {
        match self {
            StreamSpec::Rational { num, den } => Some((num.clone(), den.clone())),
            StreamSpec::BlockCycle { pairs, m0 } => {
                let period: u64 = pairs.iter().try_fold(0u64, |acc, &(l, m)| acc.checked_add(l)?.checked_add(m))?;
                if period == 0 || period.checked_add(*m0)? > MAX_EXACT_PERIOD {
                    return None;
                }
                let one = BigUint::one();
                let mut block = BigUint::zero();
                for &(l, m) in pairs {
                    block <<= (l + m) as usize;
                    block += (&one << m as usize) - &one;
                }
                let repeat = (&one << period as usize) - &one;
                let lead = (&one << *m0 as usize) - &one;
                let num = lead * &repeat + block;
                let den = repeat << *m0 as usize;
                let g = num.gcd(&den);
                Some((num / &g, den / g))
            }
            _ => None,
        }
    }
}

/// Longest block cycle (in digits) that [`StreamSpec::exact_value`] expands.
pub const MAX_EXACT_PERIOD: u64 = 4096;

fn normalize_rational(num: BigUint, den: BigUint) -> StreamSpec {
    if den.is_zero() {
        return StreamSpec::Rational { num, den };
    }
    let g = num.gcd(&den);
    if g.is_zero() || g.is_one() {
        StreamSpec::Rational { num, den }
    } else {
        StreamSpec::Rational { num: &num / &g, den: &den / &g }
    }
}

/// Canonical text; `parse_spec(&spec.to_string()) == Ok(spec)`.
impl fmt::Display for StreamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamSpec::Rational { num, den } => write!(f, "rational:{num}/{den}"),
            StreamSpec::Champernowne => f.write_str("champernowne"),
            StreamSpec::BlockCycle { pairs, m0 } => {
                f.write_str("blocks:cycle=[")?;
                for (i, (l, m)) in pairs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "({l},{m})")?;
                }
                f.write_str("]")?;
                if *m0 != 0 {
                    write!(f, ";m0={m0}")?;
                }
                Ok(())
            }
            StreamSpec::BlockFamily { zeros, ones, m0 } => {
                write!(f, "blocks:l={zeros};m={ones}")?;
                if *m0 != 0 {
                    write!(f, ";m0={m0}")?;
                }
                Ok(())
            }
            StreamSpec::RandomBlocks { seed, lmax } => write!(f, "random:seed={seed};lmax={lmax}"),
            StreamSpec::RawDigits { path } => write!(f, "digits:file={path}"),
        }
    }
}

/// Block-length expression over the index `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(u64),
    Index,
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Factorial(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluates at `j`; `None` on `u64` overflow.
    pub fn eval(&self, j: u64) -> Option<u64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Index => Some(j),
            Expr::Add(a, b) => a.eval(j)?.checked_add(b.eval(j)?),
            Expr::Mul(a, b) => a.eval(j)?.checked_mul(b.eval(j)?),
            Expr::Pow(a, b) => {
                let base = a.eval(j)?;
                let e = u32::try_from(b.eval(j)?).ok()?;
                base.checked_pow(e)
            }
            Expr::Factorial(a) => {
                let n = a.eval(j)?;
                (2..=n).try_fold(1u64, |acc, k| acc.checked_mul(k))
            }
            Expr::Min(a, b) => Some(a.eval(j)?.min(b.eval(j)?)),
            Expr::Max(a, b) => Some(a.eval(j)?.max(b.eval(j)?)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) => 1,
            Expr::Mul(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Factorial(..) => 4,
            _ => 5,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Const(c) => write!(f, "{c}")?,
            Expr::Index => f.write_str("j")?,
            Expr::Add(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str("+")?;
                b.fmt_at(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_at(f, 2)?;
                f.write_str("*")?;
                b.fmt_at(f, 3)?;
            }
            Expr::Pow(a, b) => {
                a.fmt_at(f, 4)?;
                f.write_str("^")?;
                b.fmt_at(f, 3)?;
            }
            Expr::Factorial(a) => {
                a.fmt_at(f, 4)?;
                f.write_str("!")?;
            }
            Expr::Min(a, b) | Expr::Max(a, b) => {
                f.write_str(if matches!(self, Expr::Min(..)) { "min(" } else { "max(" })?;
                a.fmt_at(f, 1)?;
                f.write_str(",")?;
                b.fmt_at(f, 1)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecError {
    /// Byte offset into the input and the tokens that would have been accepted.
    Syntax {
        position: usize,
        expected: Vec<&'static str>,
    },
    UnknownKind(String),
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::Syntax { position, expected } => {
                write!(f, "syntax error at offset {position}: expected ")?;
                for (i, e) in expected.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" or ")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            SpecError::UnknownKind(k) => write!(f, "unknown stream kind `{k}`"),
        }
    }
}

impl core::error::Error for SpecError {}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c == ' ' || c == '\t' {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn err<T>(&self, expected: &[&'static str]) -> Result<T, SpecError> {
        Err(SpecError::Syntax { position: self.pos, expected: expected.to_vec() })
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &'static str) -> Result<(), SpecError> {
        if self.eat(lit) {
            Ok(())
        } else {
            self.err(&[lit])
        }
    }

    fn digits(&mut self) -> Result<&'a str, SpecError> {
        self.skip_ws();
        let len = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return self.err(&["integer"]);
        }
        let s = &self.rest()[..len];
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, SpecError> {
        let start = self.pos;
        let s = self.digits()?;
        s.parse()
            .map_err(|_| SpecError::Syntax { position: start, expected: alloc::vec!["integer fitting in 64 bits"] })
    }

    fn biguint(&mut self) -> Result<BigUint, SpecError> {
        let s = self.digits()?;
        Ok(BigUint::parse_bytes(s.as_bytes(), 10).unwrap_or_default())
    }

    fn end(&mut self) -> Result<(), SpecError> {
        self.skip_ws();
        if self.rest().is_empty() {
            Ok(())
        } else {
            self.err(&["end of input"])
        }
    }

    fn expr(&mut self) -> Result<Expr, SpecError> {
        let mut lhs = self.term()?;
        while self.eat("+") {
            let rhs = self.term()?;
            lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, SpecError> {
        let mut lhs = self.power()?;
        while self.eat("*") {
            let rhs = self.power()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expr, SpecError> {
        let base = self.postfix()?;
        if self.eat("^") {
            let exp = self.power()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn postfix(&mut self) -> Result<Expr, SpecError> {
        let mut e = self.atom()?;
        while self.eat("!") {
            e = Expr::Factorial(Box::new(e));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, SpecError> {
        self.skip_ws();
        for (name, is_min) in [("min", true), ("max", false)] {
            if self.eat(name) {
                self.expect("(")?;
                let a = self.expr()?;
                self.expect(",")?;
                let b = self.expr()?;
                self.expect(")")?;
                let (a, b) = (Box::new(a), Box::new(b));
                return Ok(if is_min { Expr::Min(a, b) } else { Expr::Max(a, b) });
            }
        }
        if self.eat("j") {
            return Ok(Expr::Index);
        }
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        if self.rest().starts_with(|c: char| c.is_ascii_digit()) {
            return Ok(Expr::Const(self.u64()?));
        }
        self.err(&["integer", "j", "(", "min", "max"])
    }

    fn optional_m0(&mut self) -> Result<u64, SpecError> {
        if self.eat(";") {
            self.expect("m0")?;
            self.expect("=")?;
            self.u64()
        } else {
            Ok(0)
        }
    }
}

/// Parses one line of the stream DSL.
pub fn parse_spec(text: &str) -> Result<StreamSpec, SpecError> {
    let mut c = Cursor { src: text, pos: 0 };
    c.skip_ws();
    if c.rest().trim().is_empty() {
        return c.err(&["stream kind"]);
    }
    let kind_len = c.rest().find(':').unwrap_or_else(|| c.rest().trim_end().len());
    let kind = &c.rest()[..kind_len];
    let kind_trimmed = kind.trim();
    c.pos += kind_len;
    let has_colon = c.rest().starts_with(':');
    if has_colon {
        c.pos += 1;
    }
    let spec = match kind_trimmed {
        "champernowne" => {
            if has_colon {
                return c.err(&["end of input"]);
            }
            StreamSpec::Champernowne
        }
        "rational" | "blocks" | "random" | "digits" if !has_colon => return c.err(&[":"]),
        "rational" => {
            let num = c.biguint()?;
            c.expect("/")?;
            let den = c.biguint()?;
            normalize_rational(num, den)
        }
        "blocks" => {
            if c.eat("cycle") {
                c.expect("=")?;
                c.expect("[")?;
                let mut pairs = Vec::new();
                loop {
                    c.expect("(")?;
                    let l = c.u64()?;
                    c.expect(",")?;
                    let m = c.u64()?;
                    c.expect(")")?;
                    pairs.push((l, m));
                    if c.eat("]") {
                        break;
                    }
                    if !c.eat(",") {
                        return c.err(&[",", "]"]);
                    }
                }
                let m0 = c.optional_m0()?;
                StreamSpec::BlockCycle { pairs, m0 }
            } else if c.eat("l") {
                c.expect("=")?;
                let zeros = c.expr()?;
                c.expect(";")?;
                c.expect("m")?;
                c.expect("=")?;
                let ones = c.expr()?;
                let m0 = c.optional_m0()?;
                StreamSpec::BlockFamily { zeros, ones, m0 }
            } else {
                return c.err(&["cycle", "l"]);
            }
        }
        "random" => {
            c.expect("seed")?;
            c.expect("=")?;
            let seed = c.u64()?;
            let lmax = if c.eat(";") {
                c.expect("lmax")?;
                c.expect("=")?;
                c.u64()?
            } else {
                DEFAULT_LMAX
            };
            StreamSpec::RandomBlocks { seed, lmax }
        }
        "digits" => {
            c.expect("file")?;
            c.expect("=")?;
            let path = c.rest().trim();
            if path.is_empty() {
                return c.err(&["path"]);
            }
            c.pos = text.len();
            StreamSpec::RawDigits { path: path.to_string() }
        }
        other => return Err(SpecError::UnknownKind(other.to_string())),
    };
    c.end()?;
    Ok(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssueCode {
    ZeroDenominator,
    /// Numerator is zero or not below the denominator.
    NotProperFraction,
    /// Reduced denominator is a power of two: the number terminates in base 2.
    BinaryRationalDenominator,
    EmptyCycle,
    /// A zero-run or one-run of length zero; the stream would end in a constant tail.
    ZeroBlockLength,
    ZeroLmax,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::ZeroDenominator => "ZeroDenominator",
            IssueCode::NotProperFraction => "NotProperFraction",
            IssueCode::BinaryRationalDenominator => "BinaryRationalDenominator",
            IssueCode::EmptyCycle => "EmptyCycle",
            IssueCode::ZeroBlockLength => "ZeroBlockLength",
            IssueCode::ZeroLmax => "ZeroLmax",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

/// Checks that the spec denotes a non-dyadic point of `[0, 1)`.
pub fn validate_spec(spec: &StreamSpec) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |code, message: String| issues.push(Issue { code, message });
    match spec {
        StreamSpec::Rational { num, den } => {
            if den.is_zero() {
                push(IssueCode::ZeroDenominator, "denominator is zero".to_string());
            } else {
                if num.is_zero() || num >= den {
                    push(IssueCode::NotProperFraction, alloc::format!("{num}/{den} is not in (0, 1)"));
                }
                let odd_part = den >> den.trailing_zeros().unwrap_or(0) as usize;
                if odd_part.is_one() {
                    push(IssueCode::BinaryRationalDenominator, alloc::format!("denominator {den} is a power of two"));
                }
            }
        }
        StreamSpec::BlockCycle { pairs, .. } => {
            if pairs.is_empty() {
                push(IssueCode::EmptyCycle, "cycle has no blocks".to_string());
            }
            for (i, &(l, m)) in pairs.iter().enumerate() {
                if l == 0 || m == 0 {
                    push(IssueCode::ZeroBlockLength, alloc::format!("pair {} is ({l},{m})", i + 1));
                }
            }
        }
        StreamSpec::BlockFamily { zeros, ones, .. } => {
            for j in 1..=FAMILY_CHECK_RANGE {
                let bad = |e: &Expr| e.eval(j) == Some(0);
                if bad(zeros) || bad(ones) {
                    push(IssueCode::ZeroBlockLength, alloc::format!("block length is zero at j={j}"));
                    break;
                }
            }
        }
        StreamSpec::RandomBlocks { lmax, .. } => {
            if *lmax == 0 {
                push(IssueCode::ZeroLmax, "lmax must be at least 1".to_string());
            }
        }
        StreamSpec::Champernowne | StreamSpec::RawDigits { .. } => {}
    }
    ValidationReport { ok: issues.is_empty(), issues }
}
