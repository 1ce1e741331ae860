//! A small arithmetic expression language for custom payoff files.
//!
//! One expression per file; `#` starts a comment line. Variables, scalar
//! state only: `x0..xN` (path coordinates), `xbar` (mean over all N+1
//! points), `xterm` (terminal value), `nsteps`. Functions: `max`, `min`,
//! `abs`, `exp`, `log`, `sqrt`, `tanh`, `sin`, `cos`, `pow`. Operators
//! `+ - * / ^` with usual precedence, `^` right-associative.
//!
//! Example payoff file:
//!
//! ```text
//! # capped average-strike call
//! min(max(0, xbar - 0.5), 2.0)
//! ```

use cdro_core::{CdroError, DiscretePath, Result};

#[derive(Clone, Debug)]
pub enum Expr {
    Num(f64),
    Var(String),
    Unary(char, Box<Expr>),
    Binary(char, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

fn err(msg: impl Into<String>) -> CdroError {
    CdroError::Config(msg.into())
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expression(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(op @ (b'+' | b'-')) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Binary(op as char, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Some(op @ (b'*' | b'/')) => {
                    self.pos += 1;
                    let rhs = self.power()?;
                    lhs = Expr::Binary(op as char, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if self.eat(b'^') {
            let exp = self.power()?;
            return Ok(Expr::Binary('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Unary('-', Box::new(self.unary()?)));
        }
        let _ = self.eat(b'+');
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expression()?;
                if !self.eat(b')') {
                    return Err(err("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            other => Err(err(format!("unexpected token {:?}", other.map(|c| c as char)))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && matches!(self.src[self.pos], b'0'..=b'9' | b'.' | b'e' | b'E')
        {
            // allow exponent signs directly after e/E
            if matches!(self.src[self.pos], b'e' | b'E')
                && matches!(self.src.get(self.pos + 1), Some(b'+') | Some(b'-'))
            {
                self.pos += 1;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| err(format!("bad number {text:?}")))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        if self.eat(b'(') {
            let mut args = Vec::new();
            if self.peek() != Some(b')') {
                loop {
                    args.push(self.expression()?);
                    if !self.eat(b',') {
                        break;
                    }
                }
            }
            if !self.eat(b')') {
                return Err(err("expected ')' after arguments"));
            }
            return Ok(Expr::Call(name, args));
        }
        Ok(Expr::Var(name))
    }
}

/// Parses an expression file body (comments stripped).
pub fn parse(text: &str) -> Result<Expr> {
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join(" ");
    if body.trim().is_empty() {
        return Err(err("empty expression"));
    }
    let mut p = Parser::new(&body);
    let e = p.expression()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(err(format!(
            "trailing input at byte {} of expression",
            p.pos
        )));
    }
    validate(&e)?;
    Ok(e)
}

fn validate(e: &Expr) -> Result<()> {
    match e {
        Expr::Num(_) => Ok(()),
        Expr::Var(name) => {
            let known = name == "xbar" || name == "xterm" || name == "nsteps";
            let coord = name
                .strip_prefix('x')
                .map(|rest| rest.chars().all(|c| c.is_ascii_digit()) && !rest.is_empty())
                .unwrap_or(false);
            if known || coord {
                Ok(())
            } else {
                Err(err(format!("unknown variable {name:?}")))
            }
        }
        Expr::Unary(_, a) => validate(a),
        Expr::Binary(_, a, b) => {
            validate(a)?;
            validate(b)
        }
        Expr::Call(name, args) => {
            let arity = match name.as_str() {
                "abs" | "exp" | "log" | "sqrt" | "tanh" | "sin" | "cos" => 1,
                "max" | "min" | "pow" => 2,
                _ => return Err(err(format!("unknown function {name:?}"))),
            };
            if args.len() != arity {
                return Err(err(format!("{name} takes {arity} argument(s)")));
            }
            args.iter().try_for_each(validate)
        }
    }
}

/// Evaluates against a scalar path; coordinate variables beyond the path's
/// horizon read as the terminal value.
pub fn eval(e: &Expr, path: &DiscretePath) -> f64 {
    match e {
        Expr::Num(v) => *v,
        Expr::Var(name) => match name.as_str() {
            "xbar" => path.average()[0],
            "xterm" => path.terminal()[0],
            "nsteps" => path.n_steps() as f64,
            _ => {
                let k: usize = name[1..].parse().unwrap_or(0);
                path.point(k.min(path.n_steps()))[0]
            }
        },
        Expr::Unary('-', a) => -eval(a, path),
        Expr::Unary(_, a) => eval(a, path),
        Expr::Binary(op, a, b) => {
            let (x, y) = (eval(a, path), eval(b, path));
            match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                '/' => x / y,
                '^' => x.powf(y),
                _ => f64::NAN,
            }
        }
        Expr::Call(name, args) => {
            let x = eval(&args[0], path);
            match name.as_str() {
                "abs" => x.abs(),
                "exp" => x.exp(),
                "log" => x.ln(),
                "sqrt" => x.sqrt(),
                "tanh" => x.tanh(),
                "sin" => x.sin(),
                "cos" => x.cos(),
                "max" => x.max(eval(&args[1], path)),
                "min" => x.min(eval(&args[1], path)),
                "pow" => x.powf(eval(&args[1], path)),
                _ => f64::NAN,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> DiscretePath {
        DiscretePath::scalar(&[0.0, 1.0, 3.0, 2.0]).unwrap()
    }

    #[test]
    fn arithmetic_and_precedence() {
        let e = parse("1 + 2 * 3 ^ 2").unwrap();
        assert_eq!(eval(&e, &path()), 19.0);
        let e = parse("-(x1 + x2) / 2").unwrap();
        assert_eq!(eval(&e, &path()), -2.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = parse("max(0, xbar - 1)").unwrap();
        assert_eq!(eval(&e, &path()), 0.5);
        let e = parse("abs(xterm - x1)").unwrap();
        assert_eq!(eval(&e, &path()), 1.0);
        let e = parse("nsteps").unwrap();
        assert_eq!(eval(&e, &path()), 3.0);
    }

    #[test]
    fn comments_ignored() {
        let e = parse("# doc line\n x3 * 2\n").unwrap();
        assert_eq!(eval(&e, &path()), 4.0);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(parse("y1 + 2").is_err());
        assert!(parse("frob(x1)").is_err());
        assert!(parse("max(1)").is_err());
        assert!(parse("1 +").is_err());
    }
}
