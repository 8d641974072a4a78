use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, ExprKind, Program, StmtKind};
use super::{builtin_arity, method_arity, LimitKind, Limits, RuntimeError};
use crate::raster::{Mask, MaskValues, Raster};
use crate::registry::{Registry, ToolCtx, ToolError};
use crate::value::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub steps: u64,
    pub wall_ms: u64,
    pub peak_value_bytes: usize,
    pub tool_calls: usize,
}

/// A runtime failure and the 1-based line of the statement that raised it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecError {
    pub line: usize,
    pub error: RuntimeError,
}

impl std::fmt::Display for ExecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.error)
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub output: Vec<String>,
    pub result: Result<(), ExecError>,
    pub usage: ResourceUsage,
}

struct Interp<'a> {
    reg: &'a Registry,
    ctx: &'a mut ToolCtx,
    limits: Limits,
    env: BTreeMap<String, Value>,
    store: usize,
    usage: ResourceUsage,
    started: Instant,
    output: Vec<String>,
}

type R<T> = Result<T, RuntimeError>;

fn type_err<T>(msg: impl Into<String>) -> R<T> {
    Err(RuntimeError::TypeError(msg.into()))
}

fn value_err<T>(msg: impl Into<String>) -> R<T> {
    Err(RuntimeError::ValueError(msg.into()))
}

enum Num {
    Int(i64),
    Float(f64),
}

fn num(v: &Value) -> Option<Num> {
    match v {
        Value::Int(i) => Some(Num::Int(*i)),
        Value::Bool(b) => Some(Num::Int(*b as i64)),
        Value::Float(f) => Some(Num::Float(*f)),
        _ => None,
    }
}

fn as_f(n: &Num) -> f64 {
    match n {
        Num::Int(i) => *i as f64,
        Num::Float(f) => *f,
    }
}

fn overflow() -> RuntimeError {
    RuntimeError::ValueError("integer overflow".into())
}

fn arith(op: BinOp, a: Num, b: Num) -> R<Value> {
    if op == BinOp::Div {
        let d = as_f(&b);
        if d == 0.0 {
            return value_err("division by zero");
        }
        return Ok(Value::Float(as_f(&a) / d));
    }
    match (a, b) {
        (Num::Int(x), Num::Int(y)) => {
            let r = match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                _ => unreachable!("arithmetic operator"),
            };
            r.map(Value::Int).ok_or_else(overflow)
        }
        (a, b) => {
            let (x, y) = (as_f(&a), as_f(&b));
            Ok(Value::Float(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                _ => unreachable!("arithmetic operator"),
            }))
        }
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::List(x), Value::List(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_equal(p, q))
        }
        _ => match (num(a), num(b)) {
            (Some(Num::Int(x)), Some(Num::Int(y))) => x == y,
            (Some(x), Some(y)) => as_f(&x) == as_f(&y),
            _ => a == b,
        },
    }
}

fn ordering(op: BinOp, o: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        BinOp::Lt => o == Less,
        BinOp::Le => o != Greater,
        BinOp::Gt => o == Greater,
        BinOp::Ge => o != Less,
        BinOp::Eq => o == Equal,
        BinOp::Ne => o != Equal,
        _ => unreachable!("comparison operator"),
    }
}

fn cmp_f(op: BinOp, x: f64, y: f64) -> bool {
    match x.partial_cmp(&y) {
        Some(o) => ordering(op, o),
        None => op == BinOp::Ne,
    }
}

fn flip(op: BinOp) -> BinOp {
    match op {
        BinOp::Lt => BinOp::Gt,
        BinOp::Le => BinOp::Ge,
        BinOp::Gt => BinOp::Lt,
        BinOp::Ge => BinOp::Le,
        other => other,
    }
}

fn single_band(r: &Raster, what: &str) -> R<usize> {
    if r.bands().len() != 1 {
        return type_err(format!(
            "{what} needs a single-band raster, got bands [{}]; use select_bands",
            r.band_names().join(", ")
        ));
    }
    Ok(0)
}

/// Pixelwise `raster op k` as a boolean mask; nodata pixels are false.
fn raster_cmp(r: &Raster, op: BinOp, k: f64) -> R<Value> {
    let b = single_band(r, "comparison")?;
    let values = r.bands()[b]
        .values()
        .iter()
        .map(|&v| !r.is_nodata(v) && cmp_f(op, v as f64, k))
        .collect();
    let m = Mask::new(r.width(), r.height(), MaskValues::Bool(values), None)
        .map_err(|e| RuntimeError::ValueError(e.to_string()))?
        .with_georef_opt(Some((r.geotransform(), r.crs())));
    Ok(Value::Mask(Arc::new(m)))
}

fn mask_cmp(m: &Mask, op: BinOp, k: f64) -> R<Value> {
    let values = (0..m.len()).map(|i| cmp_f(op, m.get(i) as f64, k)).collect();
    let out = Mask::new(m.width(), m.height(), MaskValues::Bool(values), None)
        .map_err(|e| RuntimeError::ValueError(e.to_string()))?
        .with_georef_opt(m.georef());
    Ok(Value::Mask(Arc::new(out)))
}

fn class_id(v: &Value) -> Option<u32> {
    match num(v)? {
        Num::Int(i) => u32::try_from(i).ok(),
        Num::Float(f) if f.fract() == 0.0 && f >= 0.0 && f <= u32::MAX as f64 => Some(f as u32),
        Num::Float(_) => None,
    }
}

fn compare(op: BinOp, a: &Value, b: &Value) -> R<Value> {
    match (a, b) {
        (Value::Mask(m), k) | (k, Value::Mask(m)) if num(k).is_some() => {
            let op = if matches!(a, Value::Mask(_)) { op } else { flip(op) };
            if op == BinOp::Eq {
                return match class_id(k) {
                    Some(c) => Ok(Value::Mask(Arc::new(m.equals(c)))),
                    None => mask_cmp(m, op, as_f(&num(k).expect("numeric"))),
                };
            }
            mask_cmp(m, op, as_f(&num(k).expect("numeric")))
        }
        (Value::Raster(r), k) | (k, Value::Raster(r)) if num(k).is_some() => {
            let op = if matches!(a, Value::Raster(_)) { op } else { flip(op) };
            raster_cmp(r, op, as_f(&num(k).expect("numeric")))
        }
        _ if matches!(op, BinOp::Eq | BinOp::Ne) => {
            Ok(Value::Bool(values_equal(a, b) == (op == BinOp::Eq)))
        }
        (Value::Str(x), Value::Str(y)) => Ok(Value::Bool(ordering(op, x.cmp(y)))),
        _ => match (num(a), num(b)) {
            (Some(x), Some(y)) => Ok(Value::Bool(cmp_f(op, as_f(&x), as_f(&y)))),
            _ => type_err(format!(
                "'{op}' not supported between {} and {}",
                a.type_name(),
                b.type_name()
            )),
        },
    }
}

fn contains(needle: &Value, hay: &Value) -> R<Value> {
    Ok(Value::Bool(match hay {
        Value::Mask(m) => match class_id(needle) {
            Some(c) => m.contains(c),
            None if num(needle).is_some() => false,
            None => return type_err(format!("'in <mask>' needs a class id, got {}", needle.type_name())),
        },
        Value::List(items) => items.iter().any(|i| values_equal(needle, i)),
        Value::Str(s) => match needle {
            Value::Str(n) => s.contains(n.as_str()),
            other => return type_err(format!("'in <str>' needs a str, got {}", other.type_name())),
        },
        Value::Detections(d) => match class_id(needle) {
            Some(c) => d.iter().any(|det| det.class_id == c),
            None => return type_err("'in <detections>' needs a class id"),
        },
        other => return type_err(format!("'in' not supported for {}", other.type_name())),
    }))
}

fn sum_numbers(items: &[Value]) -> R<Value> {
    let mut int: i64 = 0;
    let mut float = 0.0;
    let mut is_float = false;
    for v in items {
        match num(v) {
            Some(Num::Int(i)) => int = int.checked_add(i).ok_or_else(overflow)?,
            Some(Num::Float(f)) => {
                is_float = true;
                float += f;
            }
            None => return type_err(format!("cannot sum {}", v.type_name())),
        }
    }
    Ok(if is_float {
        Value::Float(float + int as f64)
    } else {
        Value::Int(int)
    })
}

fn valid_pixels(r: &Raster) -> R<impl Iterator<Item = f64> + '_> {
    let b = single_band(r, "this method")?;
    Ok(r.bands()[b]
        .values()
        .iter()
        .filter(move |v| !r.is_nodata(**v))
        .map(|v| *v as f64))
}

fn extreme(items: Vec<f64>, want_max: bool) -> R<Value> {
    let best = items
        .into_iter()
        .reduce(|a, b| if (b > a) == want_max { b } else { a });
    best.map(Value::Float)
        .ok_or_else(|| RuntimeError::ValueError("empty sequence".into()))
}

fn method(recv: &Value, name: &str, args: &[Value]) -> R<Value> {
    match (name, recv) {
        ("sum", Value::List(items)) => sum_numbers(items),
        ("sum", Value::Mask(m)) => Ok(Value::Int(if m.is_boolean() {
            m.count(1) as i64
        } else {
            (0..m.len()).map(|i| m.get(i) as i64).sum()
        })),
        ("sum", Value::Raster(r)) => Ok(Value::Float(valid_pixels(r)?.sum())),
        ("mean", Value::List(items)) => {
            if items.is_empty() {
                return value_err("mean of empty list");
            }
            let total = sum_numbers(items)?;
            Ok(Value::Float(total.as_f64().unwrap_or(0.0) / items.len() as f64))
        }
        ("mean", Value::Mask(m)) => Ok(Value::Float(
            (0..m.len()).map(|i| m.get(i) as f64).sum::<f64>() / m.len() as f64,
        )),
        ("mean", Value::Raster(r)) => {
            let (s, n) = valid_pixels(r)?.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                return value_err("all pixels are nodata");
            }
            Ok(Value::Float(s / n as f64))
        }
        ("count", Value::List(items)) => Ok(Value::Int(
            items.iter().filter(|i| values_equal(i, &args[0])).count() as i64,
        )),
        ("count", Value::Mask(m)) => Ok(Value::Int(class_id(&args[0]).map_or(0, |c| m.count(c)) as i64)),
        ("count", Value::Detections(d)) => Ok(Value::Int(match class_id(&args[0]) {
            Some(c) => d.iter().filter(|det| det.class_id == c).count() as i64,
            None => 0,
        })),
        ("count", Value::Str(s)) => match &args[0] {
            Value::Str(n) if !n.is_empty() => Ok(Value::Int(s.matches(n.as_str()).count() as i64)),
            _ => type_err("str.count() needs a nonempty str"),
        },
        ("count", Value::Raster(r)) => {
            let Some(k) = args[0].as_f64() else {
                return type_err("raster.count() needs a number");
            };
            Ok(Value::Int(valid_pixels(r)?.filter(|v| *v == k as f32 as f64).count() as i64))
        }
        ("min" | "max", Value::List(items)) => {
            let want_max = name == "max";
            if items.iter().all(|i| matches!(i, Value::Str(_))) && !items.is_empty() {
                let best = items
                    .iter()
                    .filter_map(|i| match i {
                        Value::Str(s) => Some(s),
                        _ => None,
                    })
                    .reduce(|a, b| if (b > a) == want_max { b } else { a });
                return Ok(Value::Str(best.cloned().unwrap_or_default()));
            }
            if items.iter().all(|i| matches!(i, Value::Int(_))) && !items.is_empty() {
                let ints = items.iter().filter_map(|i| match i {
                    Value::Int(x) => Some(*x),
                    _ => None,
                });
                let best = if want_max { ints.max() } else { ints.min() };
                return Ok(Value::Int(best.expect("nonempty")));
            }
            let nums: Vec<f64> = items
                .iter()
                .map(|i| num(i).map(|n| as_f(&n)))
                .collect::<Option<_>>()
                .ok_or_else(|| RuntimeError::TypeError(format!("{name}() needs numbers or strings")))?;
            extreme(nums, want_max)
        }
        ("min" | "max", Value::Raster(r)) => extreme(valid_pixels(r)?.collect(), name == "max"),
        ("min" | "max", Value::Mask(m)) => {
            let vals = (0..m.len()).map(|i| m.get(i));
            let best = if name == "max" { vals.max() } else { vals.min() };
            Ok(Value::Int(best.unwrap_or(0) as i64))
        }
        _ => type_err(format!("{} has no method .{name}()", recv.type_name())),
    }
}

fn index(target: &Value, idx: &Value) -> R<Value> {
    let Value::Int(i) = idx else {
        return type_err(format!("indices must be int, got {}", idx.type_name()));
    };
    let pick = |len: usize| -> R<usize> {
        let j = if *i < 0 { len as i64 + i } else { *i };
        if j < 0 || j >= len as i64 {
            return value_err(format!("index {i} out of range for length {len}"));
        }
        Ok(j as usize)
    };
    match target {
        Value::List(items) => Ok(items[pick(items.len())?].clone()),
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            Ok(Value::Str(chars[pick(chars.len())?].to_string()))
        }
        other => type_err(format!("{} is not indexable", other.type_name())),
    }
}

fn python_round(x: f64, digits: Option<i64>) -> R<Value> {
    match digits {
        None => {
            let r = x.round_ties_even();
            if !r.is_finite() || r.abs() > i64::MAX as f64 {
                return value_err(format!("cannot round {x} to an int"));
            }
            Ok(Value::Int(r as i64))
        }
        Some(d) => {
            let d = d.clamp(-308, 308) as i32;
            let scale = 10f64.powi(d);
            let r = (x * scale).round_ties_even() / scale;
            Ok(Value::Float(if r.is_finite() { r } else { x }))
        }
    }
}

impl Interp<'_> {
    fn limit(&self, which: LimitKind, detail: String) -> RuntimeError {
        RuntimeError::ResourceLimit { which, detail }
    }

    fn step(&mut self, n: u64) -> R<()> {
        self.usage.steps = self.usage.steps.saturating_add(n);
        if self.usage.steps > self.limits.max_steps {
            return Err(self.limit(
                LimitKind::Steps,
                format!("more than {} evaluation steps", self.limits.max_steps),
            ));
        }
        self.check_wall()
    }

    fn check_wall(&self) -> R<()> {
        let ms = self.started.elapsed().as_millis() as u64;
        if ms > self.limits.max_wall_ms {
            return Err(self.limit(
                LimitKind::WallClock,
                format!("ran longer than {} ms", self.limits.max_wall_ms),
            ));
        }
        Ok(())
    }

    /// Fails if holding `extra` more bytes would exceed the value store.
    fn reserve(&mut self, extra: usize) -> R<()> {
        let total = self.store.saturating_add(extra);
        if total > self.limits.max_value_bytes {
            return Err(self.limit(
                LimitKind::ValueStore,
                format!(
                    "value store would reach {total} bytes (limit {})",
                    self.limits.max_value_bytes
                ),
            ));
        }
        self.usage.peak_value_bytes = self.usage.peak_value_bytes.max(total);
        Ok(())
    }

    fn assign(&mut self, name: &str, v: Value) -> R<()> {
        let old = self.env.get(name).map_or(0, Value::approx_bytes);
        let new = v.approx_bytes();
        self.store -= old;
        if let Err(e) = self.reserve(new) {
            self.store += old;
            return Err(e);
        }
        self.store += new;
        self.env.insert(name.to_string(), v);
        Ok(())
    }

    fn repeat<T: Clone>(&mut self, items: &[T], n: i64, unit_bytes: usize) -> R<Vec<T>> {
        let n = n.max(0) as usize;
        let count = items.len().saturating_mul(n);
        self.reserve(unit_bytes.saturating_mul(n))?;
        self.step(count as u64)?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..n {
            out.extend_from_slice(items);
        }
        Ok(out)
    }

    fn binary(&mut self, op: BinOp, a: Value, b: Value) -> R<Value> {
        match op {
            BinOp::In => contains(&a, &b),
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => compare(op, &a, &b),
            BinOp::Add => match (&a, &b) {
                (Value::Str(x), Value::Str(y)) => {
                    self.reserve(x.len() + y.len())?;
                    Ok(Value::Str(format!("{x}{y}")))
                }
                (Value::List(x), Value::List(y)) => {
                    self.reserve(a.approx_bytes() + b.approx_bytes())?;
                    self.step((x.len() + y.len()) as u64)?;
                    Ok(Value::List(x.iter().chain(y).cloned().collect()))
                }
                _ => self.numeric(op, &a, &b),
            },
            BinOp::Mul => match (&a, &b) {
                (Value::List(items), Value::Int(n)) | (Value::Int(n), Value::List(items)) => {
                    let unit = a.approx_bytes().max(b.approx_bytes());
                    Ok(Value::List(self.repeat(items, *n, unit)?))
                }
                (Value::Str(s), Value::Int(n)) | (Value::Int(n), Value::Str(s)) => {
                    let chars: Vec<char> = s.chars().collect();
                    Ok(Value::Str(self.repeat(&chars, *n, s.len())?.into_iter().collect()))
                }
                _ => self.numeric(op, &a, &b),
            },
            BinOp::Sub | BinOp::Div => self.numeric(op, &a, &b),
        }
    }

    fn numeric(&self, op: BinOp, a: &Value, b: &Value) -> R<Value> {
        match (num(a), num(b)) {
            (Some(x), Some(y)) => arith(op, x, y),
            _ => type_err(format!(
                "unsupported operand types for {op}: {} and {}",
                a.type_name(),
                b.type_name()
            )),
        }
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>) -> R<Value> {
        match name {
            "print" => {
                let line: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                let line = line.join(" ");
                self.reserve(line.len())?;
                self.output.push(line);
                Ok(Value::None)
            }
            "len" => match &args[0] {
                Value::List(items) => Ok(Value::Int(items.len() as i64)),
                Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                Value::Detections(d) => Ok(Value::Int(d.len() as i64)),
                other => type_err(format!("{} has no len()", other.type_name())),
            },
            "abs" => match num(&args[0]) {
                Some(Num::Int(i)) => i.checked_abs().map(Value::Int).ok_or_else(overflow),
                Some(Num::Float(f)) => Ok(Value::Float(f.abs())),
                None => type_err(format!("bad operand type for abs(): {}", args[0].type_name())),
            },
            "round" => {
                let digits = match args.get(1) {
                    None => None,
                    Some(Value::Int(d)) => Some(*d),
                    Some(other) => return type_err(format!("round() digits must be int, got {}", other.type_name())),
                };
                match num(&args[0]) {
                    Some(Num::Int(i)) if digits.is_none_or(|d| d >= 0) => Ok(Value::Int(i)),
                    Some(n) => python_round(as_f(&n), digits),
                    None => type_err(format!("cannot round {}", args[0].type_name())),
                }
            }
            _ => unreachable!("builtin_arity covers {name}"),
        }
    }

    fn call(&mut self, callee: &Expr, args: &[Expr]) -> R<Value> {
        let ExprKind::Ident(name) = &callee.kind else {
            return type_err("only named tools and functions can be called");
        };
        let argv = args.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?;
        if let Some((min, max)) = builtin_arity(name) {
            if argv.len() < min || argv.len() > max {
                return type_err(format!("{name}() takes {min} to {max} arguments, got {}", argv.len()));
            }
            return self.builtin(name, argv);
        }
        if !self.reg.contains(name) {
            return Err(RuntimeError::Tool(ToolError::UnknownTool(name.clone())));
        }
        if self.usage.tool_calls >= self.limits.max_tool_calls {
            return Err(self.limit(
                LimitKind::ToolCalls,
                format!("more than {} tool calls", self.limits.max_tool_calls),
            ));
        }
        self.usage.tool_calls += 1;
        let out = self.reg.invoke(self.ctx, name, &argv).map_err(RuntimeError::Tool)?;
        self.check_wall()?;
        self.reserve(out.approx_bytes())?;
        Ok(out)
    }

    fn eval(&mut self, e: &Expr) -> R<Value> {
        self.step(1)?;
        match &e.kind {
            ExprKind::Ident(n) => self
                .env
                .get(n)
                .cloned()
                .ok_or_else(|| RuntimeError::NameError(format!("name '{n}' is not defined"))),
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Float(f) => Ok(Value::Float(*f)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::List(items) => {
                let v = Value::List(items.iter().map(|i| self.eval(i)).collect::<R<_>>()?);
                self.reserve(v.approx_bytes())?;
                Ok(v)
            }
            ExprKind::Call { callee, args } => self.call(callee, args),
            ExprKind::Method { receiver, name, args } => {
                let recv = self.eval(receiver)?;
                let argv = args.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?;
                match method_arity(name) {
                    None => type_err(format!("method .{name}() is not permitted")),
                    Some(n) if n != argv.len() => {
                        type_err(format!(".{name}() takes {n} arguments, got {}", argv.len()))
                    }
                    Some(_) => method(&recv, name, &argv),
                }
            }
            ExprKind::Index { target, index: i } => {
                let t = self.eval(target)?;
                let i = self.eval(i)?;
                index(&t, &i)
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                self.binary(*op, a, b)
            }
            ExprKind::Neg(inner) => match self.eval(inner)? {
                Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(overflow),
                Value::Bool(b) => Ok(Value::Int(-(b as i64))),
                Value::Float(f) => Ok(Value::Float(-f)),
                other => type_err(format!("bad operand type for unary -: {}", other.type_name())),
            },
        }
    }
}

/// Evaluates `program` statement by statement in a single scope. Tool
/// calls go through `reg` and are logged in `ctx.calls`.
pub fn execute(program: &Program, reg: &Registry, ctx: &mut ToolCtx, limits: &Limits) -> Execution {
    let mut it = Interp {
        reg,
        ctx,
        limits: *limits,
        env: BTreeMap::new(),
        store: 0,
        usage: ResourceUsage::default(),
        started: Instant::now(),
        output: Vec::new(),
    };
    let mut result = Ok(());
    for stmt in &program.stmts {
        let r = match &stmt.kind {
            StmtKind::Assign { target, value } => it.eval(value).and_then(|v| it.assign(target, v)),
            StmtKind::Expr(e) => it.eval(e).map(drop),
        };
        if let Err(error) = r {
            result = Err(ExecError {
                line: stmt.span.line,
                error,
            });
            break;
        }
    }
    it.usage.wall_ms = it.started.elapsed().as_millis() as u64;
    Execution {
        output: it.output,
        result,
        usage: it.usage,
    }
}
