//! Arithmetic expressions over node coordinates, used for prescribed
//! functions in run configurations.
//!
//! Grammar (`^` is right associative and binds tighter than unary minus):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names: `x`, `y`, `z`, `pi`, `scal_B`. Functions: `sin`, `cos`, `exp`,
//! `ln`, `sqrt`, `abs` and `Y(l, m)`, the real orthonormal spherical
//! harmonic evaluated at the normalized position.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Harmonic(i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
    ScalB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

/// Values visible to an expression at one node.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub coords: [f64; 3],
    pub scal_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{text}` in expression")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Name(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}` in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_sym(&self, c: char) -> bool {
        self.toks.get(self.pos) == Some(&Tok::Sym(c))
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{c}` at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.peek_sym('+') {
                Op::Add
            } else if self.peek_sym('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.peek_sym('*') {
                Op::Mul
            } else if self.peek_sym('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_sym('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.peek_sym('^') {
            self.pos += 1;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.peek_sym(',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err(Error::Parse(format!("unexpected `{c}` in expression"))),
            Tok::Name(name) => {
                let func = match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "y" => return Ok(Expr::Var(Var::Y)),
                    "z" => return Ok(Expr::Var(Var::Z)),
                    "scal_B" => return Ok(Expr::Var(Var::ScalB)),
                    "pi" => return Ok(Expr::Num(PI)),
                    "Y" => {
                        let args = self.args()?;
                        let int = |e: &Expr| match e {
                            Expr::Num(v) if v.fract() == 0.0 => Ok(*v as i64),
                            Expr::Neg(inner) => match **inner {
                                Expr::Num(v) if v.fract() == 0.0 => Ok(-(v as i64)),
                                _ => Err(Error::Parse("Y(l, m) takes integer literals".into())),
                            },
                            _ => Err(Error::Parse("Y(l, m) takes integer literals".into())),
                        };
                        if args.len() != 2 {
                            return Err(Error::Parse("Y takes two arguments (l, m)".into()));
                        }
                        let (l, m) = (int(&args[0])?, int(&args[1])?);
                        if l < 0 || m.abs() > l {
                            return Err(Error::Parse(format!("Y({l}, {m}) needs 0 ≤ |m| ≤ l")));
                        }
                        return Ok(Expr::Harmonic(l, m));
                    }
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    other => return Err(Error::Parse(format!("unknown name `{other}` in expression"))),
                };
                let mut args = self.args()?;
                if args.len() != 1 {
                    return Err(Error::Parse(format!("`{name}` takes one argument")));
                }
                Ok(Expr::Call(func, Box::new(args.remove(0))))
            }
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!("trailing input in expression `{src}`")));
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, at: &Point) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => at.coords[0],
            Expr::Var(Var::Y) => at.coords[1],
            Expr::Var(Var::Z) => at.coords[2],
            Expr::Var(Var::ScalB) => at.scal_b,
            Expr::Neg(e) => -e.eval(at)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(at)?, b.eval(at)?);
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(at)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                }
            }
            Expr::Harmonic(l, m) => real_harmonic(*l, *m, at.coords)?,
        })
    }

    pub fn uses_scal_b(&self) -> bool {
        match self {
            Expr::Var(Var::ScalB) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_scal_b(),
            Expr::Bin(_, a, b) => a.uses_scal_b() || b.uses_scal_b(),
            _ => false,
        }
    }
}

/// Real spherical harmonic `Y_l^m`, orthonormal on the unit sphere, at the
/// direction of `p`; no Condon–Shortley phase.
pub fn real_harmonic(l: i64, m: i64, p: [f64; 3]) -> Result<f64> {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if !(r > 0.0) {
        return Err(Error::Domain("Y(l, m) is undefined at the origin".into()));
    }
    let ct = (p[2] / r).clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    let az = p[1].atan2(p[0]);
    let ma = m.unsigned_abs() as usize;
    let l = l as usize;

    // P_m^m, then upward recurrence in l
    let mut pmm = 1.0;
    for i in 0..ma {
        pmm *= (2 * i + 1) as f64 * st;
    }
    let plm = if l == ma {
        pmm
    } else {
        let mut prev = pmm;
        let mut cur = ct * (2 * ma + 1) as f64 * pmm;
        for ll in ma + 2..=l {
            let next = ((2 * ll - 1) as f64 * ct * cur - (ll + ma - 1) as f64 * prev) / (ll - ma) as f64;
            prev = cur;
            cur = next;
        }
        cur
    };
    let ratio: f64 = ((l - ma + 1)..=(l + ma)).map(|i| i as f64).product();
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
    Ok(match m {
        0 => norm * plm,
        m if m > 0 => 2f64.sqrt() * norm * plm * (m as f64 * az).cos(),
        _ => 2f64.sqrt() * norm * plm * (ma as f64 * az).sin(),
    })
}
