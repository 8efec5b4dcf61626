//! Arithmetic expressions used by problem files.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := logic
//! logic   := cmp (("&&" | "||") cmp)*
//! cmp     := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)?
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | "+" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Variables: `t`, `x` (alias of `x1`), `x1`, `x2`, `y` (the solution value,
//! only meaningful for drivers). Constants: `pi`, `e`, `inf`.
//! Comparisons and logic operators evaluate to 1 or 0.
//!
//! Functions: `sin cos tan exp ln log sqrt abs floor ceil sign` (one
//! argument), `min max pow` (two), `if(c, a, b)` (selects `a` when `c != 0`).

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("expression error at byte {pos}: {msg}")]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    T,
    X1,
    X2,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unary {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Floor,
    Ceil,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Unary(Unary, Box<Node>),
    Binary(Binary, Box<Node>, Box<Node>),
    If(Box<Node>, Box<Node>, Box<Node>),
}

/// Evaluation point for an expression.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub t: f64,
    pub x: [f64; 2],
    pub y: f64,
}

impl Env {
    pub fn at(t: f64, x: &[f64]) -> Self {
        let mut p = [0.0; 2];
        for (dst, src) in p.iter_mut().zip(x) {
            *dst = *src;
        }
        Env { t, x: p, y: 0.0 }
    }

    pub fn with_y(mut self, y: f64) -> Self {
        self.y = y;
        self
    }
}

/// A parsed expression, kept together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let root = p.logic()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr { source: src.to_string(), root: fold(root) })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, env: &Env) -> f64 {
        eval(&self.root, env)
    }

    /// Value if the expression does not depend on any variable.
    pub fn constant_value(&self) -> Option<f64> {
        match self.root {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn uses_t(&self) -> bool {
        uses(&self.root, Var::T)
    }

    pub fn uses_y(&self) -> bool {
        uses(&self.root, Var::Y)
    }

    pub fn uses_x2(&self) -> bool {
        uses(&self.root, Var::X2)
    }
}

fn uses(node: &Node, var: Var) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(v) => *v == var,
        Node::Unary(_, a) => uses(a, var),
        Node::Binary(_, a, b) => uses(a, var) || uses(b, var),
        Node::If(c, a, b) => uses(c, var) || uses(a, var) || uses(b, var),
    }
}

fn bool_f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn apply_unary(op: Unary, v: f64) -> f64 {
    match op {
        Unary::Neg => -v,
        Unary::Sin => v.sin(),
        Unary::Cos => v.cos(),
        Unary::Tan => v.tan(),
        Unary::Exp => v.exp(),
        Unary::Ln => v.ln(),
        Unary::Sqrt => v.sqrt(),
        Unary::Abs => v.abs(),
        Unary::Floor => v.floor(),
        Unary::Ceil => v.ceil(),
        Unary::Sign => {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

fn apply_binary(op: Binary, a: f64, b: f64) -> f64 {
    match op {
        Binary::Add => a + b,
        Binary::Sub => a - b,
        Binary::Mul => a * b,
        Binary::Div => a / b,
        Binary::Pow => pow(a, b),
        Binary::Min => a.min(b),
        Binary::Max => a.max(b),
        Binary::Lt => bool_f(a < b),
        Binary::Le => bool_f(a <= b),
        Binary::Gt => bool_f(a > b),
        Binary::Ge => bool_f(a >= b),
        Binary::Eq => bool_f(a == b),
        Binary::Ne => bool_f(a != b),
        Binary::And => bool_f(a != 0.0 && b != 0.0),
        Binary::Or => bool_f(a != 0.0 || b != 0.0),
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn eval(node: &Node, env: &Env) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(Var::T) => env.t,
        Node::Var(Var::X1) => env.x[0],
        Node::Var(Var::X2) => env.x[1],
        Node::Var(Var::Y) => env.y,
        Node::Unary(op, a) => apply_unary(*op, eval(a, env)),
        Node::Binary(Binary::Mul, a, b) => {
            // 0 * inf is 0 here so that indicator products stay finite.
            let l = eval(a, env);
            if l == 0.0 {
                return 0.0;
            }
            let r = eval(b, env);
            if r == 0.0 {
                0.0
            } else {
                l * r
            }
        }
        Node::Binary(op, a, b) => apply_binary(*op, eval(a, env), eval(b, env)),
        Node::If(c, a, b) => {
            if eval(c, env) != 0.0 {
                eval(a, env)
            } else {
                eval(b, env)
            }
        }
    }
}

fn fold(node: Node) -> Node {
    match node {
        Node::Unary(op, a) => match fold(*a) {
            Node::Num(v) => Node::Num(apply_unary(op, v)),
            a => Node::Unary(op, Box::new(a)),
        },
        Node::Binary(op, a, b) => match (fold(*a), fold(*b)) {
            (Node::Num(x), Node::Num(y)) => {
                Node::Num(eval(&Node::Binary(op, Box::new(Node::Num(x)), Box::new(Node::Num(y))), &Env::default()))
            }
            (a, b) => Node::Binary(op, Box::new(a), Box::new(b)),
        },
        Node::If(c, a, b) => match fold(*c) {
            Node::Num(v) if v != 0.0 => fold(*a),
            Node::Num(_) => fold(*b),
            c => Node::If(Box::new(c), Box::new(fold(*a)), Box::new(fold(*b))),
        },
        n => n,
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn logic(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.cmp()?;
        loop {
            let op = if self.eat("&&") {
                Binary::And
            } else if self.eat("||") {
                Binary::Or
            } else {
                return Ok(lhs);
            };
            let rhs = self.cmp()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn cmp(&mut self) -> Result<Node, ExprError> {
        let lhs = self.sum()?;
        let op = if self.eat("<=") {
            Binary::Le
        } else if self.eat(">=") {
            Binary::Ge
        } else if self.eat("==") {
            Binary::Eq
        } else if self.eat("!=") {
            Binary::Ne
        } else if self.eat("<") {
            Binary::Lt
        } else if self.eat(">") {
            Binary::Gt
        } else {
            return Ok(lhs);
        };
        let rhs = self.sum()?;
        Ok(Node::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat("+") {
                Binary::Add
            } else if self.eat("-") {
                Binary::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.product()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                Binary::Mul
            } else if self.eat("/") {
                Binary::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat("-") {
            return Ok(Node::Unary(Unary::Neg, Box::new(self.unary()?)));
        }
        if self.eat("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat("^") {
            let exp = self.unary()?;
            return Ok(Node::Binary(Binary::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        let Some(&c) = self.src.get(self.pos) else {
            return Err(self.err("unexpected end of input"));
        };
        if c == b'(' {
            self.pos += 1;
            let inner = self.logic()?;
            if !self.eat(")") {
                return Err(self.err("expected ')'"));
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
            if self.eat("(") {
                let mut args = vec![self.logic()?];
                while self.eat(",") {
                    args.push(self.logic()?);
                }
                if !self.eat(")") {
                    return Err(self.err("expected ')' after arguments"));
                }
                return self.call(name, args, start);
            }
            return match name {
                "t" => Ok(Node::Var(Var::T)),
                "x" | "x1" => Ok(Node::Var(Var::X1)),
                "x2" => Ok(Node::Var(Var::X2)),
                "y" => Ok(Node::Var(Var::Y)),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                "inf" => Ok(Node::Num(f64::INFINITY)),
                _ => Err(ExprError { pos: start, msg: format!("unknown name '{name}'") }),
            };
        }
        Err(self.err("unexpected character"))
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < s.len() && (s[look] == b'+' || s[look] == b'-') {
                look += 1;
            }
            if look < s.len() && s[look].is_ascii_digit() {
                self.pos = look;
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| ExprError { pos: start, msg: format!("bad number '{text}'") })
    }

    fn call(&self, name: &str, mut args: Vec<Node>, pos: usize) -> Result<Node, ExprError> {
        let arity = |n: usize| -> Result<(), ExprError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(ExprError { pos, msg: format!("'{name}' takes {n} argument(s), got {}", args.len()) })
            }
        };
        let unary = match name {
            "sin" => Some(Unary::Sin),
            "cos" => Some(Unary::Cos),
            "tan" => Some(Unary::Tan),
            "exp" => Some(Unary::Exp),
            "ln" | "log" => Some(Unary::Ln),
            "sqrt" => Some(Unary::Sqrt),
            "abs" => Some(Unary::Abs),
            "floor" => Some(Unary::Floor),
            "ceil" => Some(Unary::Ceil),
            "sign" => Some(Unary::Sign),
            _ => None,
        };
        if let Some(op) = unary {
            arity(1)?;
            return Ok(Node::Unary(op, Box::new(args.pop().expect("one arg"))));
        }
        let binary = match name {
            "min" => Some(Binary::Min),
            "max" => Some(Binary::Max),
            "pow" => Some(Binary::Pow),
            _ => None,
        };
        if let Some(op) = binary {
            arity(2)?;
            let b = args.pop().expect("two args");
            let a = args.pop().expect("two args");
            return Ok(Node::Binary(op, Box::new(a), Box::new(b)));
        }
        if name == "if" {
            arity(3)?;
            let b = args.pop().expect("three args");
            let a = args.pop().expect("three args");
            let c = args.pop().expect("three args");
            return Ok(Node::If(Box::new(c), Box::new(a), Box::new(b)));
        }
        Err(ExprError { pos, msg: format!("unknown function '{name}'") })
    }
}
