//! Univariate real expressions: parsing, evaluation and symbolic
//! differentiation.
//!
//! The same tree type holds the integrand `f`, its derivative and any
//! user-defined `h(t)`. Trees are immutable once built.

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

pub use diff::NonDifferentiableError;
pub use parse::{parse, parse_in, ParseError};

/// The single free variable of an expression. `x` is used for integrands,
/// `t` for h-functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    X,
    T,
}

impl Variable {
    pub fn name(self) -> char {
        match self {
            Variable::X => 'x',
            Variable::T => 't',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Expression tree. Binary nodes own exactly two children and function
/// nodes exactly one.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Variable),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Evaluation outside an expression's natural domain.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{reason} in `{subexpr}` at {variable} = {input}")]
pub struct DomainError {
    pub subexpr: String,
    pub variable: char,
    pub input: f64,
    pub reason: &'static str,
}

impl DomainError {
    /// Domain error raised by a caller-side evaluator that is not an
    /// expression tree (builtin h kinds, means).
    pub fn new(subexpr: impl Into<String>, variable: char, input: f64, reason: &'static str) -> Self {
        DomainError {
            subexpr: subexpr.into(),
            variable,
            input,
            reason,
        }
    }
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(v: Variable) -> Expr {
        Expr::Var(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call(func, Box::new(arg))
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    /// The variable this tree mentions, if any.
    pub fn variable(&self) -> Option<Variable> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(v) => Some(*v),
            Expr::Neg(e) | Expr::Call(_, e) => e.variable(),
            Expr::Binary(_, l, r) => l.variable().or_else(|| r.variable()),
        }
    }

    pub fn contains_abs(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Call(Func::Abs, _) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.contains_abs(),
            Expr::Binary(_, l, r) => l.contains_abs() || r.contains_abs(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(e) | Expr::Call(_, e) => 1 + e.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Replaces every occurrence of the variable with `replacement`.
    pub fn substitute(&self, replacement: &Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(_) => replacement.clone(),
            Expr::Neg(e) => Expr::negate(e.substitute(replacement)),
            Expr::Call(f, e) => Expr::call(*f, e.substitute(replacement)),
            Expr::Binary(op, l, r) => {
                Expr::binary(*op, l.substitute(replacement), r.substitute(replacement))
            }
        }
    }

    /// Evaluates the tree at `v`. Any out-of-domain operation or
    /// non-finite intermediate is reported instead of producing NaN.
    pub fn eval<T: Real>(&self, v: T) -> Result<T, DomainError> {
        let out = match self {
            Expr::Const(c) => T::lit(*c),
            Expr::Var(_) => v,
            Expr::Neg(e) => -e.eval(v)?,
            Expr::Call(func, arg) => {
                let u = arg.eval(v)?;
                match func {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Abs => u.abs(),
                    Func::Ln => {
                        if u <= T::zero() {
                            return Err(self.domain_error(v, "logarithm of a non-positive number"));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < T::zero() {
                            return Err(self.domain_error(v, "square root of a negative number"));
                        }
                        u.sqrt()
                    }
                }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(v)?;
                let b = r.eval(v)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == T::zero() {
                            return Err(self.domain_error(v, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => power(a, b).ok_or_else(|| {
                        self.domain_error(v, "power outside the real domain")
                    })?,
                }
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(self.domain_error(v, "non-finite result"))
        }
    }

    fn domain_error<T: Real>(&self, v: T, reason: &'static str) -> DomainError {
        DomainError {
            subexpr: self.to_string(),
            variable: self.variable().map_or('x', Variable::name),
            input: v.to_f64_lossy(),
            reason,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() && *c != 0.0 => PREC_NEG,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_NEG,
            Expr::Binary(BinOp::Pow, ..) => PREC_POW,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
        }
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

/// Real power with integer exponents routed through `powi` so negative bases
/// stay in the domain. `None` when the result is not a real number.
fn power<T: Real>(base: T, exponent: T) -> Option<T> {
    if exponent.fract() == T::zero() && exponent.abs() <= T::lit(64.0) {
        if base == T::zero() && exponent < T::zero() {
            return None;
        }
        return Some(base.powi(exponent.to_i32()?));
    }
    if base < T::zero() || (base == T::zero() && exponent < T::zero()) {
        return None;
    }
    Some(base.powf(exponent))
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

/// Unparses with the minimal parentheses the grammar needs to rebuild the
/// same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() && *c != 0.0 {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{}", c.abs())
                }
            }
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, PREC_POW)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Binary(op, l, r) => {
                let (left_min, right_min) = match op {
                    BinOp::Add | BinOp::Sub => (PREC_ADD, PREC_MUL),
                    BinOp::Mul | BinOp::Div => (PREC_MUL, PREC_NEG),
                    BinOp::Pow => (PREC_ATOM, PREC_NEG),
                };
                write_child(f, l, left_min)?;
                write!(f, "{}", op.symbol())?;
                write_child(f, r, right_min)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(Variable::X)
    }

    #[test]
    fn eval_basics() {
        assert_eq!(parse("x^2").unwrap().eval(0.5).unwrap(), 0.25);
        assert_eq!(parse("ln(x+1)").unwrap().eval(0.0).unwrap(), 0.0);
        assert_eq!(parse("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
        let f32_val: f32 = parse("x*x + 1").unwrap().eval(2.0_f32).unwrap();
        assert_eq!(f32_val, 5.0);
    }

    #[test]
    fn eval_domain_errors() {
        let err = parse("sqrt(x)").unwrap().eval(-1.0_f64).unwrap_err();
        assert_eq!(err.input, -1.0);
        assert_eq!(err.subexpr, "sqrt(x)");
        assert!(parse("ln(x)").unwrap().eval(0.0_f64).is_err());
        assert!(parse("1/x").unwrap().eval(0.0_f64).is_err());
        assert!(parse("x^0.5").unwrap().eval(-4.0_f64).is_err());
        assert!(parse("x^-1").unwrap().eval(0.0_f64).is_err());
        assert!(parse("exp(x)").unwrap().eval(1000.0_f64).is_err());
        // integer powers of negative bases are fine
        assert_eq!(parse("x^3").unwrap().eval(-2.0).unwrap(), -8.0);
    }

    #[test]
    fn domain_error_names_innermost_subexpression() {
        let err = parse("1 + ln(x - 2)").unwrap().eval(1.0_f64).unwrap_err();
        assert_eq!(err.subexpr, "ln(x-2)");
    }

    #[test]
    fn unparse_minimal_parens() {
        let cases = [
            ("x^2 + 3*x", "x^2+3*x"),
            ("(x+1)*(x-1)", "(x+1)*(x-1)"),
            ("-x^2", "-x^2"),
            ("(-x)^2", "(-x)^2"),
            ("(2^3)^2", "(2^3)^2"),
            ("2^3^2", "2^3^2"),
            ("x - (1 - x)", "x-(1-x)"),
            ("x / (2 * x)", "x/(2*x)"),
            ("x^-1", "x^-1"),
        ];
        for (src, want) in cases {
            assert_eq!(parse(src).unwrap().to_string(), want, "{src}");
        }
    }

    #[test]
    fn negative_constants_unparse_as_negation() {
        let e = Expr::binary(BinOp::Pow, Expr::constant(-2.0), Expr::constant(2.0));
        assert_eq!(e.to_string(), "(-2)^2");
        assert_eq!(parse(&e.to_string()).unwrap().eval(0.0).unwrap(), 4.0);
    }

    #[test]
    fn substitute_reflects() {
        let f = parse("x^2").unwrap();
        let r = f.substitute(&Expr::binary(BinOp::Sub, Expr::constant(1.0), x()));
        assert_eq!(r.eval(0.25).unwrap(), 0.5625);
        assert_eq!(r.to_string(), "(1-x)^2");
    }
}
