//! Small arithmetic-expression language over `x1 x2 x3`.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals, `pi`, and
//! the functions `sin cos exp sqrt abs`. Regions are conjunctions of
//! comparisons such as `abs(x1) + abs(x2) <= 1 && x3 == 0`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

/// A parsed expression in the variables `x1, x2, x3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks: &toks, pos: 0 };
        let root = p.expr()?;
        if p.pos != toks.len() {
            return Err(Error::Parse(format!("trailing input in `{src}` at token {}", p.pos)));
        }
        Ok(Expr { src: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        eval(&self.root, &x)
    }
}

fn eval(n: &Node, x: &[f64; 3]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => {
                    if b.fract() == 0.0 && b.abs() <= 16.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                i += 1;
            }
            if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                let save = i;
                i += 1;
                if i < cs.len() && (cs[i] == '+' || cs[i] == '-') {
                    i += 1;
                }
                if i < cs.len() && cs[i].is_ascii_digit() {
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let t: String = cs[st..i].iter().collect();
            let v = t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{t}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}` in `{s}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
}

impl Parser<'_> {
    fn peek_sym(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Sym(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            // right associative, binds tighter than unary minus on the left
            let e = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match t {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x1" => Ok(Node::Var(0)),
                "x2" => Ok(Node::Var(1)),
                "x3" => Ok(Node::Var(2)),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "sin" | "cos" | "exp" | "sqrt" | "abs" => {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "sqrt" => Func::Sqrt,
                        _ => Func::Abs,
                    };
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    Ok(Node::Call(f, Box::new(a)))
                }
                _ => Err(Error::Parse(format!("unknown identifier `{name}`"))),
            },
            Tok::Sym(c) => Err(Error::Parse(format!("unexpected `{c}`"))),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{c}`")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

/// A conjunction of inequalities `lhs OP rhs`.
#[derive(Clone, Debug)]
pub struct Region {
    src: String,
    parts: Vec<(Expr, Cmp, Expr)>,
}

impl Region {
    pub fn parse(src: &str) -> Result<Self> {
        let mut parts = Vec::new();
        for piece in src.split("&&") {
            let (pos, len, cmp) = ["<=", ">=", "==", "<", ">"]
                .iter()
                .find_map(|op| piece.find(op).map(|p| (p, op.len(), *op)))
                .ok_or_else(|| Error::Parse(format!("no comparison in `{piece}`")))?;
            let cmp = match cmp {
                "<=" => Cmp::Le,
                ">=" => Cmp::Ge,
                "==" => Cmp::Eq,
                "<" => Cmp::Lt,
                _ => Cmp::Gt,
            };
            let lhs = Expr::parse(&piece[..pos])?;
            let rhs = Expr::parse(&piece[pos + len..])?;
            parts.push((lhs, cmp, rhs));
        }
        Ok(Region { src: src.to_string(), parts })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Membership with slack `tol`; equalities hold when `|lhs - rhs| <= tol`.
    pub fn contains(&self, x: [f64; 3], tol: f64) -> bool {
        self.parts.iter().all(|(l, c, r)| {
            let d = l.eval(x) - r.eval(x);
            match c {
                Cmp::Le | Cmp::Lt => d <= tol,
                Cmp::Ge | Cmp::Gt => d >= -tol,
                Cmp::Eq => d.abs() <= tol,
            }
        })
    }
}

/// Where a box sits relative to a region, to first order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxClass {
    Outside,
    Inside,
    Boundary,
}

impl Region {
    /// Classifies the cube of half-side `r` centred at `c` using `|g(c)|` against
    /// `r Σ|∂ᵢg(c)|` (central differences) for each constraint `g = lhs − rhs`.
    /// Exact for affine constraints.
    pub fn classify_box(&self, c: [f64; 3], r: f64) -> BoxClass {
        let e = 0.25 * r;
        let mut inside = true;
        for (l, cmp, rt) in &self.parts {
            let g = |x: [f64; 3]| l.eval(x) - rt.eval(x);
            let d = g(c);
            let mut grad1 = 0.0;
            for i in 0..3 {
                let (mut p, mut m) = (c, c);
                p[i] += e;
                m[i] -= e;
                grad1 += ((g(p) - g(m)) / (2.0 * e)).abs();
            }
            let slack = grad1 * r;
            match cmp {
                Cmp::Le | Cmp::Lt => {
                    if d > slack {
                        return BoxClass::Outside;
                    }
                    inside &= d < -slack;
                }
                Cmp::Ge | Cmp::Gt => {
                    if d < -slack {
                        return BoxClass::Outside;
                    }
                    inside &= d > slack;
                }
                Cmp::Eq => {
                    if d.abs() > slack {
                        return BoxClass::Outside;
                    }
                    inside = false;
                }
            }
        }
        if inside {
            BoxClass::Inside
        } else {
            BoxClass::Boundary
        }
    }
}
