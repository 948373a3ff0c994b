//! Scalar expressions over `x` and `y` used to describe coefficient fields
//! such as `p(x)`, `q(x)` or `h(x)` in run configurations.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' factor)?          (right-associative)
//! unary  := '-'? base
//! base   := number | 'x' | 'y' | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos exp log abs sqrt` (one argument), `min max` (two).

use std::fmt;
use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError {
    pub message: String,
    /// Byte offsets into the source text.
    pub span: Range<usize>,
}

impl ExprError {
    pub fn new(message: impl Into<String>, span: Range<usize>) -> Self {
        ExprError { message: message.into(), span }
    }
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at bytes {}..{}", self.message, self.span.start, self.span.end)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// A node with the source range it was parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub node: Node,
    pub span: Range<usize>,
}

/// A parsed scalar expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    source: String,
    root: Expr,
}

impl ScalarExpr {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: source, bytes: source.as_bytes(), pos: 0 };
        p.skip_ws();
        if p.pos == p.bytes.len() {
            return Err(ExprError::new("empty expression", 0..0));
        }
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(ExprError::new("unexpected trailing input", p.pos..p.bytes.len()));
        }
        Ok(ScalarExpr { source: source.to_string(), root })
    }

    /// A literal constant, printed with shortest round-trip formatting.
    pub fn constant(value: f64) -> Self {
        ScalarExpr::parse(&format_number(value)).expect("number literal parses")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn uses_y(&self) -> bool {
        self.span_of_y().is_some()
    }

    pub fn span_of_y(&self) -> Option<Range<usize>> {
        fn find(e: &Expr) -> Option<Range<usize>> {
            match &e.node {
                Node::Y => Some(e.span.clone()),
                Node::Num(_) | Node::X => None,
                Node::Neg(a) => find(a),
                Node::Bin(_, a, b) => find(a).or_else(|| find(b)),
                Node::Call(_, args) => args.iter().find_map(find),
            }
        }
        find(&self.root)
    }

    /// Evaluate at `(x, y)`. A non-finite intermediate result is reported
    /// with the span of the sub-expression that produced it.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        eval(&self.root, x, y)
    }

    /// Constant value if the expression has no free variables.
    pub fn as_constant(&self) -> Option<f64> {
        fn has_var(e: &Expr) -> bool {
            match &e.node {
                Node::X | Node::Y => true,
                Node::Num(_) => false,
                Node::Neg(a) => has_var(a),
                Node::Bin(_, a, b) => has_var(a) || has_var(b),
                Node::Call(_, args) => args.iter().any(has_var),
            }
        }
        if has_var(&self.root) {
            None
        } else {
            self.eval(0.0, 0.0).ok()
        }
    }
}

fn eval(e: &Expr, x: f64, y: f64) -> Result<f64, ExprError> {
    let v = match &e.node {
        Node::Num(v) => *v,
        Node::X => x,
        Node::Y => y,
        Node::Neg(a) => -eval(a, x, y)?,
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, y)?, eval(b, x, y)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], x, y)?;
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Abs => a.abs(),
                Func::Sqrt => a.sqrt(),
                Func::Min => a.min(eval(&args[1], x, y)?),
                Func::Max => a.max(eval(&args[1], x, y)?),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::new(format!("evaluates to {v} at (x, y) = ({x}, {y})"), e.span.clone()))
    }
}

fn format_number(v: f64) -> String {
    // `Display` for f64 is the shortest representation that round-trips.
    format!("{v}")
}

impl fmt::Display for Expr {
    /// Fully parenthesised form; re-parsing it yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Num(v) => f.write_str(&format_number(*v)),
            Node::X => f.write_str("x"),
            Node::Y => f.write_str("y"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

impl std::str::FromStr for ScalarExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScalarExpr::parse(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = bin(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.unary()?;
        if self.eat(b'^') {
            let exponent = self.factor()?;
            return Ok(bin(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        if self.eat(b'-') {
            let inner = self.base()?;
            let span = start..inner.span.end;
            return Ok(Expr { node: Node::Neg(Box::new(inner)), span });
        }
        self.base()
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(ExprError::new("unexpected end of input", self.pos..self.pos)),
        };
        let start = self.pos;
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c == b'(' {
            self.pos += 1;
            let mut inner = self.expr()?;
            if !self.eat(b')') {
                return Err(ExprError::new("expected `)`", self.pos..self.pos));
            }
            inner.span = start..self.pos;
            return Ok(inner);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            let ident_span = start..self.pos;
            match name {
                "x" => return Ok(Expr { node: Node::X, span: ident_span }),
                "y" => return Ok(Expr { node: Node::Y, span: ident_span }),
                _ => {}
            }
            let func = Func::lookup(name).ok_or_else(|| ExprError::new(format!("unknown identifier `{name}`"), ident_span.clone()))?;
            if !self.eat(b'(') {
                return Err(ExprError::new(format!("expected `(` after `{name}`"), self.pos..self.pos));
            }
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(ExprError::new("expected `)` or `,`", self.pos..self.pos));
            }
            let span = start..self.pos;
            if args.len() != func.arity() {
                return Err(ExprError::new(
                    format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()),
                    span,
                ));
            }
            return Ok(Expr { node: Node::Call(func, args), span });
        }
        Err(ExprError::new(format!("unexpected character `{}`", c as char), start..start + 1))
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.bytes.len() && p.bytes[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| ExprError::new(format!("malformed number `{text}`"), start..self.pos))?;
        Ok(Expr { node: Node::Num(value), span: start..self.pos })
    }
}

fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span.start..rhs.span.end;
    Expr { node: Node::Bin(op, Box::new(lhs), Box::new(rhs)), span }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        ScalarExpr::parse(s).unwrap().eval(x, 0.0).unwrap()
    }

    #[test]
    fn examples() {
        let e = ScalarExpr::parse("2+x").unwrap();
        assert!(matches!(e.root().node, Node::Bin(BinOp::Add, _, _)));
        assert_eq!(e.eval(0.5, 0.0).unwrap(), 2.5);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("min(x, 1-x)", 0.3), 0.3);
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(ev("1+2*3", 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", 0.0), 9.0);
        assert_eq!(ev("-2^2", 0.0), 4.0);
        assert_eq!(ev("2*-x", 3.0), -6.0);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("1.5e1 + .5", 0.0), 15.5);
        assert_eq!(ev("max(sqrt(4), abs(-3))", 0.0), 3.0);
    }

    #[test]
    fn errors_carry_offsets() {
        let e = ScalarExpr::parse("1 + foo(x)").unwrap_err();
        assert_eq!(e.span, 4..7);
        let e = ScalarExpr::parse("min(x)").unwrap_err();
        assert!(e.message.contains("takes 2"));
        let e = ScalarExpr::parse("2 +").unwrap_err();
        assert_eq!(e.span, 3..3);
        assert!(ScalarExpr::parse("").is_err());
        assert!(ScalarExpr::parse("(x").is_err());
        assert!(ScalarExpr::parse("x x").is_err());
        let e = ScalarExpr::parse("1 + log(x)").unwrap().eval(0.0, 0.0).unwrap_err();
        assert_eq!(e.span, 4..10);
    }

    #[test]
    fn constants() {
        assert_eq!(ScalarExpr::parse("2*3").unwrap().as_constant(), Some(6.0));
        assert_eq!(ScalarExpr::parse("2*x").unwrap().as_constant(), None);
        assert_eq!(ScalarExpr::constant(0.1).eval(0.0, 0.0).unwrap(), 0.1);
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("x".to_string()),
            Just("y".to_string()),
            (0u32..1000).prop_map(|v| format!("{}", v as f64 / 8.0)),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop::sample::select(vec!['+', '-', '*', '/', '^']))
                    .prop_map(|(a, b, op)| format!("{a}{op}{b}")),
                inner.clone().prop_map(|a| format!("(-{a})")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                (inner.clone(), inner).prop_map(|(a, b)| format!("max({a},{b})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(src in arb_expr()) {
            let e = ScalarExpr::parse(&src).unwrap();
            let printed = e.to_string();
            let again = ScalarExpr::parse(&printed).unwrap();
            prop_assert_eq!(again.to_string(), printed);
            for (x, y) in [(0.3, 0.7), (1.1, -0.2)] {
                match (e.eval(x, y), again.eval(x, y)) {
                    (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
                }
            }
        }
    }
}
