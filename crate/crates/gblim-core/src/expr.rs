//! Expression mini-language: parser and exact derivative jets.
//!
//! Grammar (precedence low → high):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?          // right-associative
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are decimal with optional fraction and scientific exponent.
//! Identifiers are declared variables or the function names
//! `sin cos exp log sqrt atan`. Non-smooth primitives (`abs`, `sign`,
//! `floor`) are rejected at parse time: everything downstream assumes C^∞
//! data. `^` requires a constant integer exponent; any other exponent is
//! rewritten at parse time as `exp(b·log(a))`, which confines the expression
//! algebra to smooth operations (and makes non-positive bases a domain
//! error at evaluation time).

use crate::error::{Error, Result};
use crate::jet::{check_public_order, Jet};
use std::fmt::Write as _;

/// Function tags for `ident '(' expr ')'` calls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }
}

/// Parsed expression tree. Variables are indices into the declared list.
#[derive(Clone, Debug, PartialEq)]
pub enum ExprNode {
    Constant(f64),
    Variable(usize),
    Neg(Box<ExprNode>),
    Add(Box<ExprNode>, Box<ExprNode>),
    Sub(Box<ExprNode>, Box<ExprNode>),
    Mul(Box<ExprNode>, Box<ExprNode>),
    Div(Box<ExprNode>, Box<ExprNode>),
    /// Integer power with constant exponent.
    Pow(Box<ExprNode>, i32),
    Call(Func, Box<ExprNode>),
}

/// A validated expression together with its declared variable list.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: ExprNode,
    variables: Vec<String>,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token plus its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' => {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && self.src[self.pos] == b'.' {
                    self.pos += 1;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                if self.pos < self.src.len() && (self.src[self.pos] | 32) == b'e' {
                    let mark = self.pos;
                    self.pos += 1;
                    if self.pos < self.src.len()
                        && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    {
                        self.pos += 1;
                    }
                    if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    } else {
                        // Not an exponent after all (e.g. `2e` as `2 * e`
                        // would be an identifier error later; back off).
                        self.pos = mark;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let value = text.parse::<f64>().map_err(|_| Error::Syntax {
                    position: start,
                    expected: "a number".into(),
                })?;
                Tok::Num(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(std::str::from_utf8(&self.src[start..self.pos]).unwrap().into())
            }
            _ => {
                return Err(Error::Syntax {
                    position: start,
                    expected: "a number, identifier, operator, or parenthesis".into(),
                })
            }
        };
        Ok((tok, start))
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Tok,
    current_pos: usize,
    variables: &'a [String],
}

const NON_SMOOTH: [&str; 3] = ["abs", "sign", "floor"];

impl<'a> Parser<'a> {
    fn new(src: &'a str, variables: &'a [String]) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let (current, current_pos) = lexer.next()?;
        Ok(Parser {
            lexer,
            current,
            current_pos,
            variables,
        })
    }

    fn advance(&mut self) -> Result<()> {
        let (t, p) = self.lexer.next()?;
        self.current = t;
        self.current_pos = p;
        Ok(())
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.current == tok {
            self.advance()
        } else {
            Err(Error::Syntax {
                position: self.current_pos,
                expected: what.into(),
            })
        }
    }

    fn expr(&mut self) -> Result<ExprNode> {
        let mut node = self.term()?;
        loop {
            match self.current {
                Tok::Plus => {
                    self.advance()?;
                    node = ExprNode::Add(Box::new(node), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.advance()?;
                    node = ExprNode::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<ExprNode> {
        let mut node = self.factor()?;
        loop {
            match self.current {
                Tok::Star => {
                    self.advance()?;
                    node = ExprNode::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.advance()?;
                    node = ExprNode::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn factor(&mut self) -> Result<ExprNode> {
        if self.current == Tok::Minus {
            self.advance()?;
            return Ok(ExprNode::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprNode> {
        let base = self.atom()?;
        if self.current != Tok::Caret {
            return Ok(base);
        }
        self.advance()?;
        let exponent = self.factor()?; // right-associative, unary minus allowed
        Ok(make_power(base, exponent))
    }

    fn atom(&mut self) -> Result<ExprNode> {
        match self.current.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(ExprNode::Constant(v))
            }
            Tok::Ident(name) => {
                let pos = self.current_pos;
                self.advance()?;
                if self.current == Tok::LParen {
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)` closing the call")?;
                    let func = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "log" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "atan" => Func::Atan,
                        _ if NON_SMOOTH.contains(&name.as_str()) => {
                            return Err(Error::NonSmoothPrimitive {
                                name,
                                position: pos,
                            })
                        }
                        _ => {
                            return Err(Error::UnknownIdentifier {
                                name,
                                position: pos,
                            })
                        }
                    };
                    Ok(ExprNode::Call(func, Box::new(arg)))
                } else {
                    match self.variables.iter().position(|v| *v == name) {
                        Some(i) => Ok(ExprNode::Variable(i)),
                        None => Err(Error::UnknownIdentifier {
                            name,
                            position: pos,
                        }),
                    }
                }
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(Error::Syntax {
                position: self.current_pos,
                expected: "a number, identifier, `-`, or `(`".into(),
            }),
        }
    }
}

/// Builds a power node: constant integer exponents become [`ExprNode::Pow`],
/// everything else is rewritten as exp(e·log(b)).
fn make_power(base: ExprNode, exponent: ExprNode) -> ExprNode {
    if let Some(v) = const_fold(&exponent) {
        let rounded = v.round();
        if (v - rounded).abs() < 1e-12 && rounded.abs() <= 64.0 {
            return ExprNode::Pow(Box::new(base), rounded as i32);
        }
    }
    ExprNode::Call(
        Func::Exp,
        Box::new(ExprNode::Mul(
            Box::new(exponent),
            Box::new(ExprNode::Call(Func::Log, Box::new(base))),
        )),
    )
}

/// Evaluates a subtree that contains no variables; `None` otherwise.
fn const_fold(node: &ExprNode) -> Option<f64> {
    match node {
        ExprNode::Constant(v) => Some(*v),
        ExprNode::Variable(_) => None,
        ExprNode::Neg(a) => const_fold(a).map(|v| -v),
        ExprNode::Add(a, b) => Some(const_fold(a)? + const_fold(b)?),
        ExprNode::Sub(a, b) => Some(const_fold(a)? - const_fold(b)?),
        ExprNode::Mul(a, b) => Some(const_fold(a)? * const_fold(b)?),
        ExprNode::Div(a, b) => Some(const_fold(a)? / const_fold(b)?),
        ExprNode::Pow(a, n) => Some(const_fold(a)?.powi(*n)),
        ExprNode::Call(f, a) => {
            let v = const_fold(a)?;
            Some(match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Log => v.ln(),
                Func::Sqrt => v.sqrt(),
                Func::Atan => v.atan(),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

/// Parses `source` over the declared variable list.
pub fn parse(source: &str, variables: &[&str]) -> Result<Expr> {
    let vars: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
    let mut parser = Parser::new(source, &vars)?;
    let root = parser.expr()?;
    if parser.current != Tok::End {
        return Err(Error::Syntax {
            position: parser.current_pos,
            expected: "end of expression".into(),
        });
    }
    Ok(Expr {
        root,
        variables: vars,
    })
}

impl Expr {
    /// Declared variable names, in order.
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Root node of the tree.
    pub fn root(&self) -> &ExprNode {
        &self.root
    }

    /// Evaluates the value and all mixed partial derivatives up to `order`
    /// (≤ 3) at `point` by dual-number propagation.
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Jet> {
        check_public_order(order)?;
        self.eval_jet_internal(point, order)
    }

    /// Internal variant without the public order cap (used by geometry
    /// assembly, which needs deeper jets than the public contract exposes).
    pub(crate) fn eval_jet_internal(&self, point: &[f64], order: usize) -> Result<Jet> {
        assert_eq!(
            point.len(),
            self.variables.len(),
            "point dimension must match declared variables"
        );
        let nvars = self.variables.len();
        let vars: Vec<Jet> = (0..nvars)
            .map(|i| Jet::variable(nvars, order, i, point[i]))
            .collect();
        self.eval_with(&vars)
    }

    /// Evaluates the tree with arbitrary jets substituted for the variables.
    ///
    /// This is the composition workhorse: substituting the (u,v)-jets of an
    /// immersion's components for the ambient variables yields the jet of the
    /// pulled-back field directly.
    pub fn eval_with(&self, vars: &[Jet]) -> Result<Jet> {
        assert_eq!(vars.len(), self.variables.len());
        let (nvars, order) = match vars.first() {
            // A variable-free expression has no derivatives; carry its value
            // in the smallest jet shape available.
            None => return Ok(Jet::constant(1, 0, self.eval(&[])?)),
            Some(j) => (j.nvars(), j.order()),
        };
        eval_node(&self.root, vars, nvars, order)
    }

    /// Plain f64 evaluation (no derivatives); domain checks identical to
    /// jet evaluation.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        eval_node_f64(&self.root, point)
    }

    /// Pretty-prints with minimal parentheses; `parse(pretty_print(e))`
    /// returns a structurally identical tree.
    pub fn pretty_print(&self) -> String {
        let mut out = String::new();
        print_node(&self.root, &self.variables, Prec::Add, &mut out);
        out
    }

    /// Maximum over all multi-indices up to `order` of
    /// |jet coefficient − central finite difference| at `point`.
    pub fn finite_diff_check(&self, point: &[f64], order: usize, step: f64) -> Result<f64> {
        check_public_order(order)?;
        assert!(step > 0.0, "step must be positive");
        if self.variables.is_empty() {
            self.eval(point)?;
            return Ok(0.0);
        }
        let jet = self.eval_jet(point, order)?;
        let mut worst = 0.0f64;
        for alpha in jet.multi_indices() {
            let a = &alpha[..point.len()];
            let fd = central_difference(self, point, a, step)?;
            let dev = (jet.derivative(a) - fd).abs();
            if dev > worst {
                worst = dev;
            }
        }
        Ok(worst)
    }
}

fn eval_node(node: &ExprNode, vars: &[Jet], nvars: usize, order: usize) -> Result<Jet> {
    Ok(match node {
        ExprNode::Constant(v) => Jet::constant(nvars, order, *v),
        ExprNode::Variable(i) => vars[*i],
        ExprNode::Neg(a) => -eval_node(a, vars, nvars, order)?,
        ExprNode::Add(a, b) => eval_node(a, vars, nvars, order)? + eval_node(b, vars, nvars, order)?,
        ExprNode::Sub(a, b) => eval_node(a, vars, nvars, order)? - eval_node(b, vars, nvars, order)?,
        ExprNode::Mul(a, b) => eval_node(a, vars, nvars, order)? * eval_node(b, vars, nvars, order)?,
        ExprNode::Div(a, b) => {
            let num = eval_node(a, vars, nvars, order)?;
            let den = eval_node(b, vars, nvars, order)?;
            if den.value() == 0.0 {
                return Err(Error::Domain {
                    what: "division by zero".into(),
                });
            }
            num / den
        }
        ExprNode::Pow(a, n) => {
            let base = eval_node(a, vars, nvars, order)?;
            if *n < 0 && base.value() == 0.0 {
                return Err(Error::Domain {
                    what: "zero base with negative exponent".into(),
                });
            }
            base.powi(*n)
        }
        ExprNode::Call(f, a) => {
            let arg = eval_node(a, vars, nvars, order)?;
            match f {
                Func::Sin => arg.sin(),
                Func::Cos => arg.cos(),
                Func::Exp => arg.exp(),
                Func::Atan => arg.atan(),
                Func::Log => {
                    if arg.value() <= 0.0 {
                        return Err(Error::Domain {
                            what: format!("log of non-positive value {}", arg.value()),
                        });
                    }
                    arg.ln()
                }
                Func::Sqrt => {
                    if arg.value() <= 0.0 {
                        return Err(Error::Domain {
                            what: format!("sqrt of non-positive value {}", arg.value()),
                        });
                    }
                    arg.sqrt()
                }
            }
        }
    })
}

fn eval_node_f64(node: &ExprNode, point: &[f64]) -> Result<f64> {
    Ok(match node {
        ExprNode::Constant(v) => *v,
        ExprNode::Variable(i) => point[*i],
        ExprNode::Neg(a) => -eval_node_f64(a, point)?,
        ExprNode::Add(a, b) => eval_node_f64(a, point)? + eval_node_f64(b, point)?,
        ExprNode::Sub(a, b) => eval_node_f64(a, point)? - eval_node_f64(b, point)?,
        ExprNode::Mul(a, b) => eval_node_f64(a, point)? * eval_node_f64(b, point)?,
        ExprNode::Div(a, b) => {
            let den = eval_node_f64(b, point)?;
            if den == 0.0 {
                return Err(Error::Domain {
                    what: "division by zero".into(),
                });
            }
            eval_node_f64(a, point)? / den
        }
        ExprNode::Pow(a, n) => {
            let base = eval_node_f64(a, point)?;
            if *n < 0 && base == 0.0 {
                return Err(Error::Domain {
                    what: "zero base with negative exponent".into(),
                });
            }
            base.powi(*n)
        }
        ExprNode::Call(f, a) => {
            let v = eval_node_f64(a, point)?;
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Atan => v.atan(),
                Func::Log => {
                    if v <= 0.0 {
                        return Err(Error::Domain {
                            what: format!("log of non-positive value {v}"),
                        });
                    }
                    v.ln()
                }
                Func::Sqrt => {
                    if v <= 0.0 {
                        return Err(Error::Domain {
                            what: format!("sqrt of non-positive value {v}"),
                        });
                    }
                    v.sqrt()
                }
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Pretty-printing
// ---------------------------------------------------------------------------

/// Precedence levels for parenthesization (higher binds tighter).
#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Add,
    Mul,
    Unary,
    Pow,
    Atom,
}

fn print_node(node: &ExprNode, vars: &[String], parent: Prec, out: &mut String) {
    let prec = match node {
        ExprNode::Constant(_) | ExprNode::Variable(_) | ExprNode::Call(..) => Prec::Atom,
        ExprNode::Neg(_) => Prec::Unary,
        ExprNode::Add(..) | ExprNode::Sub(..) => Prec::Add,
        ExprNode::Mul(..) | ExprNode::Div(..) => Prec::Mul,
        ExprNode::Pow(..) => Prec::Pow,
    };
    let need = prec < parent;
    if need {
        out.push('(');
    }
    match node {
        ExprNode::Constant(v) => {
            if *v == v.trunc() && v.abs() < 1e15 && v.is_finite() {
                let _ = write!(out, "{}", *v as i64);
            } else {
                let _ = write!(out, "{v:e}");
            }
        }
        ExprNode::Variable(i) => out.push_str(&vars[*i]),
        ExprNode::Neg(a) => {
            out.push('-');
            print_node(a, vars, Prec::Unary, out);
        }
        ExprNode::Add(a, b) => {
            print_node(a, vars, Prec::Add, out);
            out.push_str(" + ");
            // Right operand needs one level more to keep left associativity.
            print_node(b, vars, Prec::Mul, out);
        }
        ExprNode::Sub(a, b) => {
            print_node(a, vars, Prec::Add, out);
            out.push_str(" - ");
            print_node(b, vars, Prec::Mul, out);
        }
        ExprNode::Mul(a, b) => {
            print_node(a, vars, Prec::Mul, out);
            out.push('*');
            print_node(b, vars, Prec::Unary, out);
        }
        ExprNode::Div(a, b) => {
            print_node(a, vars, Prec::Mul, out);
            out.push('/');
            print_node(b, vars, Prec::Unary, out);
        }
        ExprNode::Pow(a, n) => {
            print_node(a, vars, Prec::Atom, out);
            if *n < 0 {
                let _ = write!(out, "^(-{})", -(*n as i64));
            } else {
                let _ = write!(out, "^{n}");
            }
        }
        ExprNode::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            print_node(a, vars, Prec::Add, out);
            out.push(')');
        }
    }
    if need {
        out.push(')');
    }
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central finite-difference estimate of ∂^α f at `point`, built by nesting
/// the second-order three-point stencil per variable.
fn central_difference(expr: &Expr, point: &[f64], alpha: &[usize], step: f64) -> Result<f64> {
    // Find the first variable with a derivative left to take.
    match alpha.iter().position(|&a| a > 0) {
        None => expr.eval(point),
        Some(i) => {
            let mut lower = alpha.to_vec();
            lower[i] -= 1;
            let mut fwd = point.to_vec();
            fwd[i] += step;
            let mut back = point.to_vec();
            back[i] -= step;
            let hi = central_difference(expr, &fwd, &lower, step)?;
            let lo = central_difference(expr, &back, &lower, step)?;
            Ok((hi - lo) / (2.0 * step))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_shapes() {
        let e = parse("x^2 + y^2", &["x", "y"]).unwrap();
        match e.root() {
            ExprNode::Add(a, b) => {
                assert!(matches!(**a, ExprNode::Pow(_, 2)));
                assert!(matches!(**b, ExprNode::Pow(_, 2)));
            }
            other => panic!("unexpected shape: {other:?}"),
        }
        assert!(parse("z - (x*y)/2", &["x", "y", "z"]).is_ok());
    }

    #[test]
    fn syntax_error_position() {
        match parse("sin(", &["x"]) {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn non_smooth_rejected() {
        assert!(matches!(
            parse("abs(x)", &["x"]),
            Err(Error::NonSmoothPrimitive { .. })
        ));
        assert!(matches!(
            parse("floor(x) + 1", &["x"]),
            Err(Error::NonSmoothPrimitive { .. })
        ));
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(
            parse("x + q", &["x"]),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("tan(x)", &["x"]),
            Err(Error::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn power_rewrite() {
        // Non-integer constant exponent → exp(e·log(b)).
        let e = parse("x^0.5", &["x"]).unwrap();
        assert!(matches!(e.root(), ExprNode::Call(Func::Exp, _)));
        let v = e.eval(&[4.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        // Negative base under the rewrite is a domain error.
        assert!(matches!(e.eval(&[-4.0]), Err(Error::Domain { .. })));
        // Variable exponent also rewritten.
        let e = parse("x^y", &["x", "y"]).unwrap();
        let v = e.eval(&[2.0, 3.0]).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn jet_values_match_hand_derivatives() {
        let e = parse("x^2", &["x"]).unwrap();
        let j = e.eval_jet(&[3.0], 2).unwrap();
        assert_eq!(j.value(), 9.0);
        assert_eq!(j.derivative(&[1]), 6.0);
        assert_eq!(j.derivative(&[2]), 2.0);

        let e = parse("sin(x)", &["x"]).unwrap();
        let j = e.eval_jet(&[0.0], 3).unwrap();
        assert_eq!(j.value(), 0.0);
        assert_eq!(j.derivative(&[1]), 1.0);
        assert_eq!(j.derivative(&[2]), 0.0);
        assert_eq!(j.derivative(&[3]), -1.0);

        let e = parse("exp(x*y)", &["x", "y"]).unwrap();
        let j = e.eval_jet(&[1.0, 1.0], 2).unwrap();
        assert!((j.derivative(&[1, 1]) - 2.0 * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn order_cap_enforced() {
        let e = parse("x", &["x"]).unwrap();
        assert!(matches!(
            e.eval_jet(&[0.0], 4),
            Err(Error::OrderUnsupported { .. })
        ));
    }

    #[test]
    fn finite_difference_examples() {
        let e = parse("x^3", &["x"]).unwrap();
        let dev = e.finite_diff_check(&[2.0], 2, 1e-4).unwrap();
        assert!(dev < 1e-6, "deviation {dev}");

        let e = parse("sin(x)*cos(y)", &["x", "y"]).unwrap();
        let dev = e.finite_diff_check(&[0.3, 0.7], 2, 1e-4).unwrap();
        assert!(dev < 1e-6, "deviation {dev}");

        let e = parse("1", &[]).unwrap();
        let dev = e.finite_diff_check(&[], 0, 1e-4).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn pretty_print_round_trip() {
        for (src, vars) in [
            ("x^2 + y^2", vec!["x", "y"]),
            ("z - (x*y)/2", vec!["x", "y", "z"]),
            ("-x*sin(y) + exp(x/(1 + y^2))", vec!["x", "y"]),
            ("x^-2 + sqrt(x)", vec!["x"]),
            ("1 - 2 - 3", vec![]),
            ("1 - (2 - 3)", vec![]),
            ("x^1.5", vec!["x"]),
            ("2/3/4", vec![]),
        ] {
            let vrefs: Vec<&str> = vars.clone();
            let e1 = parse(src, &vrefs).unwrap();
            let printed = e1.pretty_print();
            let e2 = parse(&printed, &vrefs).unwrap();
            assert_eq!(e1, e2, "round trip failed: {src} → {printed}");
        }
    }
}
