//! Symbolic derivative with constant folding and 0/1 identities.

use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{subexpr}` contains abs(), which is not differentiable at 0")]
pub struct NonDifferentiableError {
    pub subexpr: String,
}

fn as_const(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

// Folding only keeps finite results so unparsing never has to print inf.
fn fold(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Const(v))
}

fn add(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) => fold(a + b).unwrap_or_else(|| Expr::binary(BinOp::Add, l, r)),
        (Some(a), _) if a == 0.0 => r,
        (_, Some(b)) if b == 0.0 => l,
        _ => match r {
            Expr::Neg(inner) => sub(l, *inner),
            r => Expr::binary(BinOp::Add, l, r),
        },
    }
}

fn sub(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) => fold(a - b).unwrap_or_else(|| Expr::binary(BinOp::Sub, l, r)),
        (Some(a), _) if a == 0.0 => neg(r),
        (_, Some(b)) if b == 0.0 => l,
        _ => Expr::binary(BinOp::Sub, l, r),
    }
}

fn neg(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        e => Expr::negate(e),
    }
}

fn mul(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) => fold(a * b).unwrap_or_else(|| Expr::binary(BinOp::Mul, l, r)),
        (Some(a), _) if a == 0.0 => Expr::Const(0.0),
        (_, Some(b)) if b == 0.0 => Expr::Const(0.0),
        (Some(a), _) if a == 1.0 => r,
        (_, Some(b)) if b == 1.0 => l,
        (Some(a), _) if a == -1.0 => neg(r),
        (_, Some(b)) if b == -1.0 => neg(l),
        // keep constants on the left: 2*x rather than x*2
        (None, Some(_)) => mul(r, l),
        _ => match (l, r) {
            (Expr::Neg(a), b) => neg(mul(*a, b)),
            (a, Expr::Neg(b)) => neg(mul(a, *b)),
            (a, b) => Expr::binary(BinOp::Mul, a, b),
        },
    }
}

fn div(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) if b != 0.0 => {
            fold(a / b).unwrap_or_else(|| Expr::binary(BinOp::Div, l, r))
        }
        (Some(a), _) if a == 0.0 => Expr::Const(0.0),
        (_, Some(b)) if b == 1.0 => l,
        _ => Expr::binary(BinOp::Div, l, r),
    }
}

fn pow(base: Expr, exponent: Expr) -> Expr {
    match as_const(&exponent) {
        Some(e) if e == 0.0 => Expr::Const(1.0),
        Some(e) if e == 1.0 => base,
        _ => match (as_const(&base), as_const(&exponent)) {
            (Some(b), Some(e)) if b > 0.0 => {
                fold(b.powf(e)).unwrap_or_else(|| Expr::binary(BinOp::Pow, base, exponent))
            }
            _ => Expr::binary(BinOp::Pow, base, exponent),
        },
    }
}

fn call(func: Func, arg: Expr) -> Expr {
    Expr::call(func, arg)
}

fn is_zero(e: &Expr) -> bool {
    as_const(e) == Some(0.0)
}

impl Expr {
    /// Exact symbolic derivative with respect to the expression variable.
    ///
    /// Rejects trees containing `abs`; callers form `|f'|` outside the
    /// derivative.
    pub fn differentiate(&self) -> Result<Expr, NonDifferentiableError> {
        if self.contains_abs() {
            return Err(NonDifferentiableError {
                subexpr: self.to_string(),
            });
        }
        Ok(derive(self))
    }
}

fn derive(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(_) => Expr::Const(1.0),
        Expr::Neg(u) => neg(derive(u)),
        Expr::Binary(op, u, v) => {
            let (u, v) = (u.as_ref(), v.as_ref());
            match op {
                BinOp::Add => add(derive(u), derive(v)),
                BinOp::Sub => sub(derive(u), derive(v)),
                BinOp::Mul => add(mul(derive(u), v.clone()), mul(u.clone(), derive(v))),
                BinOp::Div => {
                    let du = derive(u);
                    let dv = derive(v);
                    if is_zero(&dv) {
                        div(du, v.clone())
                    } else {
                        div(
                            sub(mul(du, v.clone()), mul(u.clone(), dv)),
                            pow(v.clone(), Expr::Const(2.0)),
                        )
                    }
                }
                BinOp::Pow => derive_pow(u, v),
            }
        }
        Expr::Call(func, u) => {
            let du = derive(u);
            let u = u.as_ref().clone();
            let outer = match func {
                Func::Sin => call(Func::Cos, u),
                Func::Cos => neg(call(Func::Sin, u)),
                Func::Exp => call(Func::Exp, u),
                Func::Ln => return div(du, u),
                Func::Sqrt => return div(du, mul(Expr::Const(2.0), call(Func::Sqrt, u))),
                Func::Abs => unreachable!("abs rejected before derivation"),
            };
            mul(outer, du)
        }
    }
}

fn derive_pow(u: &Expr, v: &Expr) -> Expr {
    let du = derive(u);
    let dv = derive(v);
    if is_zero(&dv) {
        // d(u^c) = c * u^(c-1) * u'
        let reduced = match as_const(v) {
            Some(c) => Expr::Const(c - 1.0),
            None => sub(v.clone(), Expr::Const(1.0)),
        };
        return mul(mul(v.clone(), pow(u.clone(), reduced)), du);
    }
    if is_zero(&du) {
        // d(c^v) = c^v * ln(c) * v'
        return mul(mul(pow(u.clone(), v.clone()), call(Func::Ln, u.clone())), dv);
    }
    // d(u^v) = u^v * (v' ln u + v u' / u)
    mul(
        pow(u.clone(), v.clone()),
        add(
            mul(dv, call(Func::Ln, u.clone())),
            div(mul(v.clone(), du), u.clone()),
        ),
    )
}
