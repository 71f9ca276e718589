//! Arithmetic expressions over node coordinates for initial conditions.
//!
//! Grammar: `+ - * /`, unary minus, parentheses, the functions `sin`, `cos`,
//! `exp`, numeric literals, the constant `pi`, and the coordinates `x`, `y`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{0}' at position {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unknown identifier '{0}' at position {1}")]
    UnknownIdent(String, usize),
    #[error("expected '{0}' at position {1}")]
    Expected(char, usize),
    #[error("trailing input at position {0}")]
    TrailingInput(usize),
    #[error("malformed number at position {0}")]
    BadNumber(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn parse(input: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { chars: input.char_indices().collect(), pos: 0 };
        let e = p.expression()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(ExprError::TrailingInput(p.chars[p.pos].0));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(e) => -e.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Sin(e) => e.eval(x, y).sin(),
            Expr::Cos(e) => e.eval(x, y).cos(),
            Expr::Exp(e) => e.eval(x, y).exp(),
        }
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expression(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(ExprError::UnexpectedEnd),
            Some('(') => {
                self.bump();
                let e = self.expression()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(ExprError::UnexpectedChar(c, self.offset())),
        }
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map(|c| c.0).unwrap_or_else(|| {
            self.chars.last().map(|c| c.0 + 1).unwrap_or(0)
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(ExprError::Expected(c, self.offset()))
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos].1;
            if c.is_ascii_digit() || c == '.' {
                self.pos += 1;
            } else if (c == 'e' || c == 'E') && self.pos > start {
                self.pos += 1;
                if self.pos < self.chars.len()
                    && (self.chars[self.pos].1 == '+' || self.chars[self.pos].1 == '-')
                {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::BadNumber(self.chars[start].0))
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        match name.as_str() {
            "x" => Ok(Expr::X),
            "y" => Ok(Expr::Y),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "sin" | "cos" | "exp" => {
                self.expect('(')?;
                let arg = self.expression()?;
                self.expect(')')?;
                Ok(match name.as_str() {
                    "sin" => Expr::Sin(Box::new(arg)),
                    "cos" => Expr::Cos(Box::new(arg)),
                    _ => Expr::Exp(Box::new(arg)),
                })
            }
            _ => Err(ExprError::UnknownIdent(name, self.chars[start].0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("1 + 2*3 - 4/2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 5.0);
        let e = Expr::parse("(1 + 2)*3").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 9.0);
        let e = Expr::parse("-x*2 + y").unwrap();
        assert_eq!(e.eval(1.5, 1.0), -2.0);
    }

    #[test]
    fn functions_and_pi() {
        let e = Expr::parse("sin(pi*x)").unwrap();
        assert!((e.eval(0.5, 0.0) - 1.0).abs() < 1e-15);
        let e = Expr::parse("exp(0) + cos(0)").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 2.0);
        let e = Expr::parse("0.5 - 0.4*cos(2*pi*x)").unwrap();
        assert!((e.eval(0.0, 0.0) - 0.1).abs() < 1e-15);
        assert!((e.eval(0.5, 0.0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn scientific_numbers() {
        let e = Expr::parse("1e-3 + 2.5E2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 250.001);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(Expr::parse("1 + "), Err(ExprError::UnexpectedEnd));
        assert_eq!(Expr::parse("sin(x"), Err(ExprError::Expected(')', 5)));
        assert!(matches!(Expr::parse("foo(1)"), Err(ExprError::UnknownIdent(_, 0))));
        assert!(matches!(Expr::parse("1 + &"), Err(ExprError::UnexpectedChar('&', 4))));
        assert!(matches!(Expr::parse("1 2"), Err(ExprError::TrailingInput(2))));
    }
}
