use super::{gate_signature, CircuitIR, Instruction, QasmError, QubitRef, RegDecl, RegKind, Stmt};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

const SYMBOLS: [&str; 12] = ["->", ";", ",", "[", "]", "(", ")", "{", "}", "+", "-", "*"];

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let ch = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if ch == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if ch.is_whitespace() {
            advance(1, &mut i, &mut col);
        } else if ch == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if ch == '/' {
            out.push(Token { tok: Tok::Sym("/"), line: tl, col: tc });
            advance(1, &mut i, &mut col);
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, col: tc });
        } else if ch.is_ascii_digit() || (ch == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())) {
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
            let s: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let v = s.parse::<f64>().map_err(|_| QasmError::Syntax {
                line: tl,
                col: tc,
                msg: format!("bad number `{s}`"),
            })?;
            out.push(Token { tok: Tok::Num(v), line: tl, col: tc });
        } else if ch == '"' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(QasmError::Syntax { line: tl, col: tc, msg: "unterminated string".into() });
            }
            out.push(Token { tok: Tok::Str(chars[start..j].iter().collect()), line: tl, col: tc });
            col += (j + 1 - i) as u32;
            i = j + 1;
        } else {
            let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = SYMBOLS.iter().find(|s| rest.starts_with(**s)).ok_or_else(|| QasmError::Syntax {
                line: tl,
                col: tc,
                msg: format!("unexpected character `{ch}`"),
            })?;
            out.push(Token { tok: Tok::Sym(sym), line: tl, col: tc });
            advance(sym.len(), &mut i, &mut col);
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (u32, u32),
    ir: CircuitIR,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (u32, u32) {
        self.peek().map(|t| (t.line, t.col)).unwrap_or(self.eof)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, QasmError> {
        let (line, col) = self.here();
        Err(QasmError::Syntax { line, col, msg: msg.into() })
    }

    fn next(&mut self) -> Result<Token, QasmError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(x), .. }) if *x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), QasmError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<(String, u32, u32), QasmError> {
        match self.peek().cloned() {
            Some(Token { tok: Tok::Ident(s), line, col }) => {
                self.pos += 1;
                Ok((s, line, col))
            }
            _ => self.err("expected identifier"),
        }
    }

    fn uint(&mut self) -> Result<u32, QasmError> {
        match self.peek().cloned() {
            Some(Token { tok: Tok::Num(v), .. }) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                self.pos += 1;
                Ok(v as u32)
            }
            _ => self.err("expected non-negative integer"),
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut v = self.term()?;
        loop {
            if self.is_sym("+") {
                self.pos += 1;
                v += self.term()?;
            } else if self.is_sym("-") {
                self.pos += 1;
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, QasmError> {
        let mut v = self.factor()?;
        loop {
            if self.is_sym("*") {
                self.pos += 1;
                v *= self.factor()?;
            } else if self.is_sym("/") {
                self.pos += 1;
                v /= self.factor()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn factor(&mut self) -> Result<f64, QasmError> {
        let t = self.next()?;
        match t.tok {
            Tok::Sym("-") => Ok(-self.factor()?),
            Tok::Sym("+") => self.factor(),
            Tok::Sym("(") => {
                let v = self.expr()?;
                self.expect_sym(")")?;
                Ok(v)
            }
            Tok::Num(v) => Ok(v),
            Tok::Ident(ref s) if s == "pi" => Ok(std::f64::consts::PI),
            _ => Err(QasmError::Syntax { line: t.line, col: t.col, msg: "expected expression".into() }),
        }
    }

    fn decl(&self, name: &str, kind: RegKind, line: u32, col: u32) -> Result<&RegDecl, QasmError> {
        self.ir
            .regs
            .iter()
            .find(|r| r.name == name && r.kind == kind)
            .ok_or_else(|| QasmError::UndeclaredRegister { name: name.to_string(), line, col })
    }

    /// `name` or `name[i]`, expanded to single bits.
    fn operand(&mut self, kind: RegKind) -> Result<Vec<QubitRef>, QasmError> {
        let (name, line, col) = self.ident()?;
        let size = self.decl(&name, kind, line, col)?.size;
        if self.is_sym("[") {
            self.pos += 1;
            let idx = self.uint()?;
            self.expect_sym("]")?;
            if idx >= size {
                return Err(QasmError::IndexOutOfRange { name, index: idx, size, line, col });
            }
            Ok(vec![QubitRef { reg: name, index: idx }])
        } else {
            Ok((0..size).map(|i| QubitRef { reg: name.clone(), index: i }).collect())
        }
    }

    fn operands(&mut self, kind: RegKind) -> Result<Vec<Vec<QubitRef>>, QasmError> {
        let mut ops = vec![self.operand(kind)?];
        while self.is_sym(",") {
            self.pos += 1;
            ops.push(self.operand(kind)?);
        }
        Ok(ops)
    }

    fn push(&mut self, stmt: Stmt, line: u32, col: u32) {
        self.ir.instrs.push(Instruction { stmt, line, col });
    }

    // Broadcast register operands: every whole-register operand must have the
    // same size; single-bit operands are repeated.
    fn broadcast(ops: &[Vec<QubitRef>], line: u32, col: u32) -> Result<Vec<Vec<QubitRef>>, QasmError> {
        let n = ops.iter().map(|o| o.len()).max().unwrap_or(0);
        if ops.iter().any(|o| o.len() != 1 && o.len() != n) {
            return Err(QasmError::Syntax { line, col, msg: "register operands differ in size".into() });
        }
        Ok((0..n)
            .map(|k| ops.iter().map(|o| o[if o.len() == 1 { 0 } else { k }].clone()).collect())
            .collect())
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let (kw, line, col) = self.ident()?;
        match kw.as_str() {
            "include" => {
                match self.next()?.tok {
                    Tok::Str(_) => {}
                    _ => return Err(QasmError::Syntax { line, col, msg: "expected file name".into() }),
                }
                self.expect_sym(";")
            }
            "qreg" | "creg" => {
                let (name, nl, nc) = self.ident()?;
                self.expect_sym("[")?;
                let size = self.uint()?;
                self.expect_sym("]")?;
                self.expect_sym(";")?;
                if size == 0 {
                    return Err(QasmError::Syntax { line: nl, col: nc, msg: "register size must be positive".into() });
                }
                if self.ir.regs.iter().any(|r| r.name == name) {
                    return Err(QasmError::Syntax { line: nl, col: nc, msg: format!("register `{name}` redeclared") });
                }
                let kind = if kw == "qreg" { RegKind::Quantum } else { RegKind::Classical };
                self.ir.regs.push(RegDecl { name, size, kind });
                Ok(())
            }
            "measure" => {
                let q = self.operand(RegKind::Quantum)?;
                self.expect_sym("->")?;
                let c = self.operand(RegKind::Classical)?;
                self.expect_sym(";")?;
                if q.len() != c.len() {
                    return Err(QasmError::Syntax { line, col, msg: "measure operands differ in size".into() });
                }
                for (q, c) in q.into_iter().zip(c) {
                    self.push(Stmt::Measure { qubit: q, bit: c }, line, col);
                }
                Ok(())
            }
            "barrier" => {
                let ops = self.operands(RegKind::Quantum)?;
                self.expect_sym(";")?;
                self.push(Stmt::Barrier(ops.into_iter().flatten().collect()), line, col);
                Ok(())
            }
            "qram" => {
                let (addr, al, ac) = self.ident()?;
                self.decl(&addr, RegKind::Quantum, al, ac)?;
                self.expect_sym(",")?;
                let (data, dl, dc) = self.ident()?;
                self.decl(&data, RegKind::Quantum, dl, dc)?;
                self.expect_sym(";")?;
                if addr == data {
                    return Err(QasmError::Syntax { line, col, msg: "qram address and data must differ".into() });
                }
                self.push(Stmt::Qram { addr, data }, line, col);
                Ok(())
            }
            "gate" | "opaque" | "if" | "reset" => Err(QasmError::UnsupportedGate { name: kw, line, col }),
            _ => self.gate(kw, line, col),
        }
    }

    fn gate(&mut self, name: String, line: u32, col: u32) -> Result<(), QasmError> {
        let (np, nq) = gate_signature(&name).ok_or_else(|| QasmError::UnsupportedGate {
            name: name.clone(),
            line,
            col,
        })?;
        let mut params = Vec::new();
        if self.is_sym("(") {
            self.pos += 1;
            if !self.is_sym(")") {
                params.push(self.expr()?);
                while self.is_sym(",") {
                    self.pos += 1;
                    params.push(self.expr()?);
                }
            }
            self.expect_sym(")")?;
        }
        if params.len() != np {
            return Err(QasmError::Arity { name, expected: np, found: params.len(), line, col });
        }
        let ops = self.operands(RegKind::Quantum)?;
        self.expect_sym(";")?;
        if ops.len() != nq {
            return Err(QasmError::Arity { name, expected: nq, found: ops.len(), line, col });
        }
        for qubits in Self::broadcast(&ops, line, col)? {
            for (i, a) in qubits.iter().enumerate() {
                if qubits[..i].contains(a) {
                    return Err(QasmError::Syntax { line, col, msg: format!("qubit {a} used twice") });
                }
            }
            self.push(Stmt::Gate { name: name.clone(), params: params.clone(), qubits }, line, col);
        }
        Ok(())
    }
}

pub fn parse_qasm(text: &str) -> Result<CircuitIR, QasmError> {
    let toks = lex(text)?;
    let eof = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, eof, ir: CircuitIR::default() };
    match p.ident() {
        Ok((kw, _, _)) if kw == "OPENQASM" => {}
        _ => return Err(QasmError::Syntax { line: 1, col: 1, msg: "missing OPENQASM header".into() }),
    }
    match p.next()?.tok {
        Tok::Num(2.0) => {}
        _ => return p.err("only OPENQASM 2.0 is supported"),
    }
    p.expect_sym(";")?;
    while p.peek().is_some() {
        p.statement()?;
    }
    Ok(p.ir)
}
