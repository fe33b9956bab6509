//! A subset of the tcpdump filter language, evaluated against synthetic
//! packets when no capture process is available.
//!
//! Supported: `icmp`, `tcp`, `udp`, `ip`; `[src|dst] host ADDR`,
//! `[src|dst] net CIDR`, `[src|dst] port N` (optionally after `tcp`/`udp`),
//! `[src|dst] ADDR`; combined with `and`/`&&`, `or`/`||`, `not`/`!` and
//! parentheses.

use std::fmt;
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::error::{MapdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proto {
    Icmp,
    Tcp,
    Udp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub proto: Proto,
    pub sport: u16,
    pub dport: u16,
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.proto {
            Proto::Icmp => write!(f, "IP {} > {}: ICMP echo request", self.src, self.dst),
            Proto::Tcp => write!(
                f,
                "IP {}.{} > {}.{}: tcp",
                self.src, self.sport, self.dst, self.dport
            ),
            Proto::Udp => write!(
                f,
                "IP {}.{} > {}.{}: UDP",
                self.src, self.sport, self.dst, self.dport
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dir {
    Either,
    Src,
    Dst,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Expr {
    Any,
    Proto(Proto),
    Host(Dir, Ipv4Addr),
    Net(Dir, Ipv4Net),
    Port(Dir, u16),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

/// A parsed capture filter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filter {
    text: String,
    expr: Expr,
}

impl Filter {
    pub fn parse(text: &str) -> Result<Filter> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(MapdError::FilterRejected("empty expression".into()));
        }
        let mut p = Parser { tokens, pos: 0 };
        let expr = p.or()?;
        if let Some(t) = p.peek() {
            return Err(rejected(format!("unexpected `{t}`")));
        }
        Ok(Filter {
            text: text.trim().to_string(),
            expr,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, packet: &Packet) -> bool {
        eval(&self.expr, packet)
    }
}

fn rejected(msg: String) -> MapdError {
    MapdError::FilterRejected(msg)
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch == '(' || ch == ')' {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

struct Parser {
    tokens: Vec<String>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn next(&mut self) -> Result<String> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| rejected("unexpected end of expression".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn or(&mut self) -> Result<Expr> {
        let mut left = self.and()?;
        while matches!(self.peek(), Some("or" | "||")) {
            self.pos += 1;
            let right = self.and()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Expr> {
        let mut left = self.not()?;
        while matches!(self.peek(), Some("and" | "&&")) {
            self.pos += 1;
            let right = self.not()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some("not" | "!")) {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.next()?;
        match t.as_str() {
            "(" => {
                let e = self.or()?;
                match self.next()?.as_str() {
                    ")" => Ok(e),
                    other => Err(rejected(format!("expected `)`, found `{other}`"))),
                }
            }
            "ip" => Ok(Expr::Any),
            "icmp" => Ok(Expr::Proto(Proto::Icmp)),
            "tcp" | "udp" => {
                let proto = if t == "tcp" { Proto::Tcp } else { Proto::Udp };
                let base = Expr::Proto(proto);
                match self.peek() {
                    Some("port" | "src" | "dst") => {
                        let q = self.qualified()?;
                        Ok(Expr::And(Box::new(base), Box::new(q)))
                    }
                    _ => Ok(base),
                }
            }
            _ => {
                self.pos -= 1;
                self.qualified()
            }
        }
    }

    fn qualified(&mut self) -> Result<Expr> {
        let mut dir = Dir::Either;
        let mut t = self.next()?;
        if t == "src" || t == "dst" {
            dir = if t == "src" { Dir::Src } else { Dir::Dst };
            t = self.next()?;
        }
        match t.as_str() {
            "host" => {
                let v = self.next()?;
                Ok(Expr::Host(dir, addr(&v)?))
            }
            "net" => {
                let v = self.next()?;
                let net = v
                    .parse()
                    .map_err(|_| rejected(format!("`{v}` is not a network")))?;
                Ok(Expr::Net(dir, net))
            }
            "port" => {
                let v = self.next()?;
                let port = v
                    .parse()
                    .map_err(|_| rejected(format!("`{v}` is not a port")))?;
                Ok(Expr::Port(dir, port))
            }
            other if dir != Dir::Either || other.parse::<Ipv4Addr>().is_ok() => {
                Ok(Expr::Host(dir, addr(other)?))
            }
            other => Err(rejected(format!("unknown primitive `{other}`"))),
        }
    }
}

fn addr(v: &str) -> Result<Ipv4Addr> {
    v.parse()
        .map_err(|_| rejected(format!("`{v}` is not an address")))
}

fn dir_match<T: PartialEq>(dir: Dir, src: T, dst: T, pred: impl Fn(T) -> bool) -> bool {
    match dir {
        Dir::Src => pred(src),
        Dir::Dst => pred(dst),
        Dir::Either => pred(src) || pred(dst),
    }
}

fn eval(e: &Expr, p: &Packet) -> bool {
    match e {
        Expr::Any => true,
        Expr::Proto(proto) => p.proto == *proto,
        Expr::Host(d, a) => dir_match(*d, p.src, p.dst, |x| x == *a),
        Expr::Net(d, n) => dir_match(*d, p.src, p.dst, |x| n.contains(&x)),
        Expr::Port(d, port) => {
            p.proto != Proto::Icmp && dir_match(*d, p.sport, p.dport, |x| x == *port)
        }
        Expr::Not(inner) => !eval(inner, p),
        Expr::And(a, b) => eval(a, p) && eval(b, p),
        Expr::Or(a, b) => eval(a, p) || eval(b, p),
    }
}
