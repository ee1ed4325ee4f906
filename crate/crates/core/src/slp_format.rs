//! Versioned binary encoding of a [`StraightLineProgram`] (`.slp` files).
//!
//! Layout, all integers little-endian `u32` unless noted:
//!
//! ```text
//! "SLP1" version
//! n_inputs   { str param, rank, index[rank] }
//! n_nodes    { u8 tag, payload }            children refer to earlier nodes
//! n_assigns  { str name, rank, index[rank], version, u8 kind, rhs node }
//! u8 has_output, [output]
//! ```
//!
//! Strings are a `u32` byte length followed by UTF-8. Constants are stored as
//! their literal text so that emitted code reproduces them exactly.

use std::collections::HashMap;

use thiserror::Error;

use crate::expr::{BinOp, Constant, Expr, Func, Kind};
use crate::flatten::{Assign, AssignKind, InputSlot, StraightLineProgram, Target};

pub const MAGIC: &[u8; 4] = b"SLP1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("not a straight-line program file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("unexpected end of data at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after program")]
    TrailingBytes(usize),
    #[error("unknown {what} tag {tag} at byte {at}")]
    BadTag { what: &'static str, tag: u8, at: usize },
    #[error("node {node} refers to node {target} which is not defined before it")]
    BadReference { node: usize, target: u32 },
    #[error("invalid text at byte {0}")]
    BadText(usize),
    #[error("inconsistent program: {0}")]
    Invalid(String),
}

pub fn serialize(p: &StraightLineProgram) -> Vec<u8> {
    let mut w = Vec::new();
    w.extend_from_slice(MAGIC);
    put_u32(&mut w, VERSION);

    put_u32(&mut w, p.inputs.len() as u32);
    for slot in &p.inputs {
        put_str(&mut w, &slot.param);
        put_index(&mut w, &slot.index);
    }

    let mut nodes = Vec::new();
    let mut count = 0u32;
    let mut ids: HashMap<usize, u32> = HashMap::new();
    let roots: Vec<u32> = p
        .assigns
        .iter()
        .map(|a| {
            a.rhs.fold(&mut ids, &mut |e, kids| {
                encode_node(&mut nodes, e, kids);
                count += 1;
                count - 1
            })
        })
        .collect();
    put_u32(&mut w, count);
    w.extend_from_slice(&nodes);

    put_u32(&mut w, p.assigns.len() as u32);
    for (a, root) in p.assigns.iter().zip(roots) {
        put_str(&mut w, &a.target.name);
        put_index(&mut w, &a.target.index);
        put_u32(&mut w, a.target.version);
        w.push(match a.kind {
            AssignKind::Init => 0,
            AssignKind::Update => 1,
        });
        put_u32(&mut w, root);
    }

    match p.output {
        Some(o) => {
            w.push(1);
            put_u32(&mut w, o);
        }
        None => w.push(0),
    }
    w
}

pub fn deserialize(bytes: &[u8]) -> Result<StraightLineProgram, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }

    let n_inputs = r.u32()?;
    let mut inputs = Vec::new();
    for _ in 0..n_inputs {
        let param = r.str()?;
        let index = r.index()?;
        inputs.push(InputSlot { param, index });
    }

    let n_nodes = r.u32()? as usize;
    let mut nodes: Vec<Expr> = Vec::new();
    for k in 0..n_nodes {
        let at = r.pos;
        let tag = r.u8()?;
        let node = |r: &mut Reader<'_>, nodes: &Vec<Expr>| -> Result<Expr, FormatError> {
            let target = r.u32()?;
            nodes
                .get(target as usize)
                .cloned()
                .ok_or(FormatError::BadReference { node: k, target })
        };
        let e = match tag {
            0 => {
                let at = r.pos;
                let text = r.str()?;
                let value: f64 = text.parse().map_err(|_| FormatError::BadText(at))?;
                Expr::constant(Constant::from_literal(&text, value))
            }
            1 => Expr::input(r.u32()?),
            2 => Expr::temp(r.u32()?),
            3 => Expr::neg(node(&mut r, &nodes)?),
            4 => {
                let op_at = r.pos;
                let op = match r.u8()? {
                    0 => BinOp::Add,
                    1 => BinOp::Sub,
                    2 => BinOp::Mul,
                    3 => BinOp::Div,
                    tag => return Err(FormatError::BadTag { what: "operator", tag, at: op_at }),
                };
                let a = node(&mut r, &nodes)?;
                Expr::binary(op, a, node(&mut r, &nodes)?)
            }
            5 => {
                let f_at = r.pos;
                let f = match r.u8()? {
                    0 => Func::Log,
                    1 => Func::Exp,
                    2 => Func::Sin,
                    3 => Func::Cos,
                    4 => Func::Tan,
                    5 => Func::Sqrt,
                    tag => return Err(FormatError::BadTag { what: "function", tag, at: f_at }),
                };
                Expr::call(f, node(&mut r, &nodes)?)
            }
            6 => {
                let a = node(&mut r, &nodes)?;
                Expr::pow(a, node(&mut r, &nodes)?)
            }
            tag => return Err(FormatError::BadTag { what: "node", tag, at }),
        };
        nodes.push(e);
    }

    let n_assigns = r.u32()?;
    let mut assigns = Vec::new();
    for k in 0..n_assigns {
        let name = r.str()?;
        let index = r.index()?;
        let version = r.u32()?;
        let at = r.pos;
        let kind = match r.u8()? {
            0 => AssignKind::Init,
            1 => AssignKind::Update,
            tag => return Err(FormatError::BadTag { what: "assignment", tag, at }),
        };
        let root = r.u32()?;
        let rhs = nodes.get(root as usize).cloned().ok_or(FormatError::BadReference {
            node: n_nodes + k as usize,
            target: root,
        })?;
        assigns.push(Assign {
            target: Target { name, index, version },
            kind,
            rhs,
        });
    }

    let at = r.pos;
    let output = match r.u8()? {
        0 => None,
        1 => Some(r.u32()?),
        tag => return Err(FormatError::BadTag { what: "output", tag, at }),
    };
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - r.pos));
    }

    let p = StraightLineProgram { inputs, assigns, output };
    p.check().map_err(FormatError::Invalid)?;
    Ok(p)
}

fn encode_node(w: &mut Vec<u8>, e: &Expr, kids: &[u32]) {
    match e.kind() {
        Kind::Const(c) => {
            w.push(0);
            put_str(w, c.text());
        }
        Kind::Input(i) => {
            w.push(1);
            put_u32(w, *i);
        }
        Kind::Temp(t) => {
            w.push(2);
            put_u32(w, *t);
        }
        Kind::Neg(_) => w.push(3),
        Kind::Binary(op, ..) => {
            w.push(4);
            w.push(match op {
                BinOp::Add => 0,
                BinOp::Sub => 1,
                BinOp::Mul => 2,
                BinOp::Div => 3,
            });
        }
        Kind::Call(f, _) => {
            w.push(5);
            w.push(match f {
                Func::Log => 0,
                Func::Exp => 1,
                Func::Sin => 2,
                Func::Cos => 3,
                Func::Tan => 4,
                Func::Sqrt => 5,
            });
        }
        Kind::Pow(..) => w.push(6),
    }
    for k in kids {
        put_u32(w, *k);
    }
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    put_u32(w, s.len() as u32);
    w.extend_from_slice(s.as_bytes());
}

fn put_index(w: &mut Vec<u8>, index: &[usize]) {
    put_u32(w, index.len() as u32);
    for &i in index {
        put_u32(w, i as u32);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(FormatError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, FormatError> {
        let at = self.pos;
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| FormatError::BadText(at))
    }

    fn index(&mut self) -> Result<Vec<usize>, FormatError> {
        let rank = self.u32()?;
        (0..rank).map(|_| Ok(self.u32()? as usize)).collect()
    }
}
