//! Formula language for drivers, barriers and terminal conditions.
//!
//! ```text
//! expr     = term , { ("+" | "-") , term } ;
//! term     = unary , { ("*" | "/") , unary } ;
//! unary    = "-" , unary | power ;
//! power    = atom , [ "^" , exponent ] ;          (* right associative *)
//! exponent = "-" , exponent | power ;
//! atom     = number | variable | call | "(" , expr , ")" ;
//! call     = unary_fn , "(" , expr , ")"
//!          | binary_fn , "(" , expr , "," , expr , ")" ;
//! number   = digit , { digit } , [ "." , { digit } ] , [ ("e" | "E") , [ "+" | "-" ] , digit , { digit } ]
//!          | "." , digit , { digit } , [ exponent part as above ] ;
//! variable = "t" | "y" | "z" | "x" ;
//! unary_fn = "abs" | "exp" | "log" | "sqrt" | "pos" | "sin" | "cos" ;
//! binary_fn= "min" | "max" ;
//! ```
//!
//! Whitespace is ignored; input must be ASCII.

mod parser;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use parser::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    T,
    Y,
    Z,
    X,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::Y => "y",
            Var::Z => "z",
            Var::X => "x",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        match name {
            "t" => Some(Var::T),
            "y" => Some(Var::Y),
            "z" => Some(Var::Z),
            "x" => Some(Var::X),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Log,
    Sqrt,
    Pos,
    Sin,
    Cos,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Pos => "pos",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "pos" => Func::Pos,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
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
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Prints fully parenthesized, so the output reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(Var),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("expression may only use {allowed}, found `{found}`")]
    Disallowed { allowed: String, found: Var },
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    values: [Option<f64>; 4],
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.values[var as usize] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var as usize] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.values[var as usize]
    }
}

pub fn eval(e: &Expr, env: &Env) -> Result<f64, ExprError> {
    let v = match e {
        Expr::Num(v) => *v,
        Expr::Var(var) => env.get(*var).ok_or(ExprError::UnboundVariable(*var))?,
        Expr::Neg(a) => -eval(a, env)?,
        Expr::Binary(op, a, b) => {
            let (a, b) = (eval(a, env)?, eval(b, env)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(ExprError::Domain(format!("division of {a} by zero")));
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            }
        }
        Expr::Call(func, args) => {
            let a = eval(&args[0], env)?;
            match func {
                Func::Abs => a.abs(),
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(ExprError::Domain(format!("log({a})")));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(ExprError::Domain(format!("sqrt({a})")));
                    }
                    a.sqrt()
                }
                Func::Pos => a.max(0.0),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Min => a.min(eval(&args[1], env)?),
                Func::Max => a.max(eval(&args[1], env)?),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Domain(format!("non-finite result in `{e}`")))
    }
}

pub fn free_vars(e: &Expr) -> BTreeSet<Var> {
    fn walk(e: &Expr, out: &mut BTreeSet<Var>) {
        match e {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(a) => walk(a, out),
            Expr::Binary(_, a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
        }
    }
    let mut out = BTreeSet::new();
    walk(e, &mut out);
    out
}

/// Slope bounds `(L_y, L_z)` with `|f(y,z) - f(y',z')| <= L_y |y-y'| + L_z |z-z'|`
/// for all other arguments fixed. `None` when no bound follows from the
/// syntax (e.g. `y * y`, `exp(y)`).
pub fn slope_bounds(e: &Expr) -> Option<(f64, f64)> {
    let constant = |e: &Expr| {
        if free_vars(e).is_empty() {
            eval(e, &Env::new()).ok()
        } else {
            None
        }
    };
    let fixed = |e: &Expr| {
        let vs = free_vars(e);
        !vs.contains(&Var::Y) && !vs.contains(&Var::Z)
    };
    if fixed(e) {
        return Some((0.0, 0.0));
    }
    match e {
        Expr::Num(_) => Some((0.0, 0.0)),
        Expr::Var(Var::Y) => Some((1.0, 0.0)),
        Expr::Var(Var::Z) => Some((0.0, 1.0)),
        Expr::Var(_) => Some((0.0, 0.0)),
        Expr::Neg(a) => slope_bounds(a),
        Expr::Binary(op, a, b) => match (op, a.as_ref(), b.as_ref()) {
            (BinOp::Add | BinOp::Sub, a, b) => {
                let (ay, az) = slope_bounds(a)?;
                let (by, bz) = slope_bounds(b)?;
                Some((ay + by, az + bz))
            }
            (BinOp::Mul, a, b) => {
                let (c, other) = match (constant(a), constant(b)) {
                    (Some(c), _) => (c, b),
                    (_, Some(c)) => (c, a),
                    _ => return None,
                };
                let (ly, lz) = slope_bounds(other)?;
                Some((c.abs() * ly, c.abs() * lz))
            }
            (BinOp::Div, a, b) => {
                let c = constant(b).filter(|c| *c != 0.0)?;
                let (ly, lz) = slope_bounds(a)?;
                Some((ly / c.abs(), lz / c.abs()))
            }
            _ => None,
        },
        Expr::Call(Func::Abs | Func::Pos | Func::Sin | Func::Cos, args) => slope_bounds(&args[0]),
        Expr::Call(Func::Min | Func::Max, args) => {
            let (ay, az) = slope_bounds(&args[0])?;
            let (by, bz) = slope_bounds(&args[1])?;
            Some((ay.max(by), az.max(bz)))
        }
        Expr::Call(..) => None,
    }
}

/// Parses `source` and rejects variables outside `allowed`.
pub fn parse_restricted(source: &str, allowed: &[Var]) -> Result<Expr, ExprError> {
    let e = parse(source)?;
    if let Some(bad) = free_vars(&e).into_iter().find(|v| !allowed.contains(v)) {
        let allowed = allowed
            .iter()
            .map(|v| v.name())
            .collect::<Vec<_>>()
            .join(", ");
        return Err(ExprError::Disallowed {
            allowed: format!("{{{allowed}}}"),
            found: bad,
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, env: Env) -> Result<f64, ExprError> {
        eval(&parse(s).unwrap(), &env)
    }

    #[test]
    fn slopes() {
        let sb = |s: &str| slope_bounds(&parse(s).unwrap());
        assert_eq!(sb("z - y"), Some((1.0, 1.0)));
        assert_eq!(sb("-0.05*y"), Some((0.05, 0.0)));
        assert_eq!(sb("max(2*y, abs(z)/4) + sin(t)*3"), Some((2.0, 0.25)));
        assert_eq!(sb("t*y"), None);
        assert_eq!(sb("sqrt(abs(y))"), None);
        assert_eq!(sb("exp(t) + 1"), Some((0.0, 0.0)));
    }

    #[test]
    fn arithmetic_and_functions() {
        assert_eq!(ev("1 + 2*3", Env::new()).unwrap(), 7.0);
        assert_eq!(ev("pos(x - 1)", Env::new().with(Var::X, 0.5)).unwrap(), 0.0);
        assert_eq!(ev("pos(x - 1)", Env::new().with(Var::X, 3.0)).unwrap(), 2.0);
        let env = Env::new().with(Var::T, 0.0).with(Var::Y, 2.0);
        assert_eq!(ev("min(1+t, y^2)", env).unwrap(), 1.0);
        assert_eq!(ev("exp(0.1)", Env::new()).unwrap(), 1.1051709180756477);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("-2^2", Env::new()).unwrap(), -4.0);
        assert_eq!(ev("2^3^2", Env::new()).unwrap(), 512.0);
        assert_eq!(ev("2^-1", Env::new()).unwrap(), 0.5);
        assert_eq!(ev("8 - 3 - 2", Env::new()).unwrap(), 3.0);
        assert_eq!(ev("8 / 4 / 2", Env::new()).unwrap(), 1.0);
        assert_eq!(ev("-3 * -2", Env::new()).unwrap(), 6.0);
        assert_eq!(ev("1.5e1 + .5", Env::new()).unwrap(), 15.5);
    }

    #[test]
    fn evaluation_errors() {
        assert!(matches!(
            ev("sqrt(-1)", Env::new()),
            Err(ExprError::Domain(_))
        ));
        assert!(matches!(
            ev("log(0)", Env::new()),
            Err(ExprError::Domain(_))
        ));
        assert!(matches!(ev("1/0", Env::new()), Err(ExprError::Domain(_))));
        let env = Env::new().with(Var::T, 0.0).with(Var::Y, 0.0);
        assert_eq!(ev("z", env), Err(ExprError::UnboundVariable(Var::Z)));
    }

    #[test]
    fn free_variable_sets() {
        let fv = |s: &str| free_vars(&parse(s).unwrap());
        assert!(fv("1+2").is_empty());
        assert_eq!(
            fv("pos(x-1)*exp(t)"),
            [Var::X, Var::T].into_iter().collect()
        );
        assert_eq!(fv("min(y, z)"), [Var::Y, Var::Z].into_iter().collect());
    }

    #[test]
    fn restricted_parse() {
        assert!(parse_restricted("y", &[Var::T, Var::X]).is_err());
        assert!(parse_restricted("x + t", &[Var::T, Var::X]).is_ok());
    }

    #[test]
    fn display_reparses() {
        for s in [
            "1 + 2*3",
            "-2^2",
            "min(1+t, y^2)",
            "pos(x - 1)*exp(-0.5*t)",
            "2^-x^2",
        ] {
            let e = parse(s).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{s} -> {e}");
        }
    }
}
