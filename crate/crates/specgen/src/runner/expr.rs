//! Tiny boolean/integer expression evaluator used by the mock adapter to
//! stand in for javac and the test runner. Supports `ret`, integer
//! literals, booleans, comparison, arithmetic, and logical operators.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Val {
    Int(i64),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
}

fn lex(input: &str) -> Result<Vec<Tok>, String> {
    let mut toks = Vec::new();
    let chars: Vec<char> = input.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                toks.push(Tok::Int(text.parse().map_err(|e| format!("bad int: {e}"))?));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            _ => {
                let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
                let op = match two.as_str() {
                    "&&" | "||" | "==" | "!=" | "<=" | ">=" => {
                        i += 2;
                        match two.as_str() {
                            "&&" => "&&",
                            "||" => "||",
                            "==" => "==",
                            "!=" => "!=",
                            "<=" => "<=",
                            _ => ">=",
                        }
                    }
                    _ => {
                        i += 1;
                        match c {
                            '<' => "<",
                            '>' => ">",
                            '!' => "!",
                            '+' => "+",
                            '-' => "-",
                            '*' => "*",
                            '/' => "/",
                            _ => return Err(format!("unexpected character {c:?}")),
                        }
                    }
                };
                toks.push(Tok::Op(op));
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    ret: i64,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Op(o)) if *o == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or_expr(&mut self) -> Result<Val, String> {
        let mut left = self.and_expr()?;
        while self.eat_op("||") {
            let right = self.and_expr()?;
            left = Val::Bool(as_bool(left)? || as_bool(right)?);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Val, String> {
        let mut left = self.cmp_expr()?;
        while self.eat_op("&&") {
            let right = self.cmp_expr()?;
            left = Val::Bool(as_bool(left)? && as_bool(right)?);
        }
        Ok(left)
    }

    fn cmp_expr(&mut self) -> Result<Val, String> {
        let left = self.add_expr()?;
        for op in ["==", "!=", "<=", ">=", "<", ">"] {
            if self.eat_op(op) {
                let right = self.add_expr()?;
                return compare(op, left, right);
            }
        }
        Ok(left)
    }

    fn add_expr(&mut self) -> Result<Val, String> {
        let mut left = self.mul_expr()?;
        loop {
            if self.eat_op("+") {
                left = Val::Int(as_int(left)? + as_int(self.mul_expr()?)?);
            } else if self.eat_op("-") {
                left = Val::Int(as_int(left)? - as_int(self.mul_expr()?)?);
            } else {
                return Ok(left);
            }
        }
    }

    fn mul_expr(&mut self) -> Result<Val, String> {
        let mut left = self.unary()?;
        loop {
            if self.eat_op("*") {
                left = Val::Int(as_int(left)? * as_int(self.unary()?)?);
            } else if self.eat_op("/") {
                let d = as_int(self.unary()?)?;
                if d == 0 {
                    return Err("division by zero".into());
                }
                left = Val::Int(as_int(left)? / d);
            } else {
                return Ok(left);
            }
        }
    }

    fn unary(&mut self) -> Result<Val, String> {
        if self.eat_op("!") {
            return Ok(Val::Bool(!as_bool(self.unary()?)?));
        }
        if self.eat_op("-") {
            return Ok(Val::Int(-as_int(self.unary()?)?));
        }
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(Val::Int(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "ret" => Ok(Val::Int(self.ret)),
                    "true" => Ok(Val::Bool(true)),
                    "false" => Ok(Val::Bool(false)),
                    other => Err(format!("unknown symbol {other:?}")),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let v = self.or_expr()?;
                if !matches!(self.peek(), Some(Tok::RParen)) {
                    return Err("missing closing parenthesis".into());
                }
                self.pos += 1;
                Ok(v)
            }
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

fn as_bool(v: Val) -> Result<bool, String> {
    match v {
        Val::Bool(b) => Ok(b),
        Val::Int(_) => Err("expected boolean, got int".into()),
    }
}

fn as_int(v: Val) -> Result<i64, String> {
    match v {
        Val::Int(i) => Ok(i),
        Val::Bool(_) => Err("expected int, got boolean".into()),
    }
}

fn compare(op: &str, left: Val, right: Val) -> Result<Val, String> {
    match op {
        "==" | "!=" => {
            let eq = match (left, right) {
                (Val::Int(a), Val::Int(b)) => a == b,
                (Val::Bool(a), Val::Bool(b)) => a == b,
                _ => return Err("comparing int with boolean".into()),
            };
            Ok(Val::Bool(if op == "==" { eq } else { !eq }))
        }
        _ => {
            let (a, b) = (as_int(left)?, as_int(right)?);
            let r = match op {
                "<" => a < b,
                "<=" => a <= b,
                ">" => a > b,
                _ => a >= b,
            };
            Ok(Val::Bool(r))
        }
    }
}

/// Evaluate a condition with the given value of `ret`. An `Err` mirrors a
/// compile error (malformed or ill-typed expression).
pub fn eval_condition(condition: &str, ret: i64) -> Result<bool, String> {
    let toks = lex(condition)?;
    let mut parser = Parser { toks: &toks, pos: 0, ret };
    let v = parser.or_expr()?;
    if parser.pos != parser.toks.len() {
        return Err("trailing tokens after expression".into());
    }
    as_bool(v)
}
