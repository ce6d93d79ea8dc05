//! A deliberately small unpickler for the Planetoid distribution files.
//!
//! The public citation datasets ship as protocol-2 pickles of numpy arrays,
//! scipy CSR matrices, and a `defaultdict` adjacency list. This decoder runs
//! the handful of opcodes those files use and exposes the results as plain
//! values. Class construction is never executed: `REDUCE`/`NEWOBJ`/`BUILD`
//! produce inert [`Value::Object`] records that the caller interprets.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Bytes(Vec<u8>),
    Str(String),
    Tuple(Vec<Value>),
    List(Vec<Value>),
    Dict(Vec<(Value, Value)>),
    Global {
        module: String,
        name: String,
    },
    Object {
        class: Box<Value>,
        args: Box<Value>,
        state: Option<Box<Value>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PickleError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for PickleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pickle byte {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for PickleError {}

impl Value {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            Value::Bytes(b) => std::str::from_utf8(b).ok(),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    pub fn items(&self) -> Option<&[Value]> {
        match self {
            Value::Tuple(v) | Value::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_global(&self, module_suffix: &str, name: &str) -> bool {
        matches!(self, Value::Global { module, name: n }
            if n == name && (module == module_suffix || module.ends_with(&format!(".{module_suffix}"))
                || module.starts_with(&format!("{module_suffix}."))))
    }

    /// Looks up a string key in a `Dict`.
    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Dict(entries) => entries
                .iter()
                .find(|(k, _)| k.as_text() == Some(key))
                .map(|(_, v)| v),
            _ => None,
        }
    }
}

enum Slot {
    Mark,
    Item(Value),
}

struct Machine<'a> {
    data: &'a [u8],
    pos: usize,
    stack: Vec<Slot>,
    memo: Vec<Option<Value>>,
}

impl<'a> Machine<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, PickleError> {
        Err(PickleError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PickleError> {
        if self.pos + n > self.data.len() {
            return self.err("unexpected end of data");
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, PickleError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, PickleError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, PickleError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn line(&mut self) -> Result<String, PickleError> {
        let rest = &self.data[self.pos..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return self.err("unterminated text argument");
        };
        let s = String::from_utf8_lossy(&rest[..end]).into_owned();
        self.pos += end + 1;
        Ok(s)
    }

    fn push(&mut self, v: Value) {
        self.stack.push(Slot::Item(v));
    }

    fn pop(&mut self) -> Result<Value, PickleError> {
        match self.stack.pop() {
            Some(Slot::Item(v)) => Ok(v),
            Some(Slot::Mark) => self.err("unexpected mark on stack"),
            None => self.err("stack underflow"),
        }
    }

    fn top(&mut self) -> Result<&mut Value, PickleError> {
        let pos = self.pos;
        match self.stack.last_mut() {
            Some(Slot::Item(v)) => Ok(v),
            _ => Err(PickleError {
                offset: pos,
                message: "expected a value on top of the stack".into(),
            }),
        }
    }

    fn pop_to_mark(&mut self) -> Result<Vec<Value>, PickleError> {
        let Some(mark) = self.stack.iter().rposition(|s| matches!(s, Slot::Mark)) else {
            return self.err("no mark on stack");
        };
        let items = self
            .stack
            .drain(mark + 1..)
            .map(|s| match s {
                Slot::Item(v) => v,
                Slot::Mark => unreachable!(),
            })
            .collect();
        self.stack.pop();
        Ok(items)
    }

    fn memo_put(&mut self, index: usize) -> Result<(), PickleError> {
        let v = match self.stack.last() {
            Some(Slot::Item(v)) => v.clone(),
            _ => return self.err("memo put without a value"),
        };
        if self.memo.len() <= index {
            self.memo.resize(index + 1, None);
        }
        self.memo[index] = Some(v);
        Ok(())
    }

    fn memo_get(&mut self, index: usize) -> Result<(), PickleError> {
        match self.memo.get(index).cloned().flatten() {
            Some(v) => {
                self.push(v);
                Ok(())
            }
            None => self.err(format!("memo slot {index} is empty")),
        }
    }

    fn set_items(&mut self, pairs: Vec<Value>) -> Result<(), PickleError> {
        if !pairs.len().is_multiple_of(2) {
            return self.err("odd number of dict items");
        }
        let target = self.top()?;
        let Value::Dict(entries) = target else {
            return self.err("SETITEMS target is not a dict");
        };
        let mut it = pairs.into_iter();
        while let (Some(k), Some(v)) = (it.next(), it.next()) {
            entries.push((k, v));
        }
        Ok(())
    }

    fn extend_list(&mut self, values: Vec<Value>) -> Result<(), PickleError> {
        match self.top()? {
            Value::List(items) => {
                items.extend(values);
                Ok(())
            }
            _ => self.err("APPEND target is not a list"),
        }
    }

    fn run(mut self) -> Result<Value, PickleError> {
        loop {
            let op = self.u8()?;
            match op {
                0x80 => {
                    let proto = self.u8()?;
                    if proto > 2 {
                        return self.err(format!("unsupported pickle protocol {proto}"));
                    }
                }
                b'.' => return self.pop(),
                b'(' => self.stack.push(Slot::Mark),
                b'N' => self.push(Value::None),
                0x88 => self.push(Value::Bool(true)),
                0x89 => self.push(Value::Bool(false)),
                b'K' => {
                    let v = self.u8()? as i64;
                    self.push(Value::Int(v));
                }
                b'M' => {
                    let v = self.u16()? as i64;
                    self.push(Value::Int(v));
                }
                b'J' => {
                    let v = self.u32()? as i32 as i64;
                    self.push(Value::Int(v));
                }
                0x8a => {
                    let n = self.u8()? as usize;
                    let b = self.take(n)?;
                    if n > 8 {
                        return self.err("LONG1 wider than 64 bits");
                    }
                    let mut buf = if b.last().is_some_and(|&x| x & 0x80 != 0) {
                        [0xffu8; 8]
                    } else {
                        [0u8; 8]
                    };
                    buf[..n].copy_from_slice(b);
                    self.push(Value::Int(i64::from_le_bytes(buf)));
                }
                b'G' => {
                    let b = self.take(8)?;
                    let v = f64::from_be_bytes(b.try_into().unwrap());
                    self.push(Value::Float(v));
                }
                b'U' => {
                    let n = self.u8()? as usize;
                    let b = self.take(n)?.to_vec();
                    self.push(Value::Bytes(b));
                }
                b'T' => {
                    let n = self.u32()? as usize;
                    let b = self.take(n)?.to_vec();
                    self.push(Value::Bytes(b));
                }
                b'X' => {
                    let n = self.u32()? as usize;
                    let b = self.take(n)?;
                    let s = String::from_utf8_lossy(b).into_owned();
                    self.push(Value::Str(s));
                }
                b'c' => {
                    let module = self.line()?;
                    let name = self.line()?;
                    self.push(Value::Global { module, name });
                }
                b'q' => {
                    let i = self.u8()? as usize;
                    self.memo_put(i)?;
                }
                b'r' => {
                    let i = self.u32()? as usize;
                    self.memo_put(i)?;
                }
                b'h' => {
                    let i = self.u8()? as usize;
                    self.memo_get(i)?;
                }
                b'j' => {
                    let i = self.u32()? as usize;
                    self.memo_get(i)?;
                }
                b')' => self.push(Value::Tuple(Vec::new())),
                b't' => {
                    let items = self.pop_to_mark()?;
                    self.push(Value::Tuple(items));
                }
                0x85..=0x87 => {
                    let n = (op - 0x84) as usize;
                    let mut items = Vec::with_capacity(n);
                    for _ in 0..n {
                        items.push(self.pop()?);
                    }
                    items.reverse();
                    self.push(Value::Tuple(items));
                }
                b']' => self.push(Value::List(Vec::new())),
                b'l' => {
                    let items = self.pop_to_mark()?;
                    self.push(Value::List(items));
                }
                b'}' => self.push(Value::Dict(Vec::new())),
                b'd' => {
                    let items = self.pop_to_mark()?;
                    self.push(Value::Dict(Vec::new()));
                    self.set_items(items)?;
                }
                b'a' => {
                    let v = self.pop()?;
                    self.extend_list(vec![v])?;
                }
                b'e' => {
                    let items = self.pop_to_mark()?;
                    self.extend_list(items)?;
                }
                b's' => {
                    let v = self.pop()?;
                    let k = self.pop()?;
                    self.set_items(vec![k, v])?;
                }
                b'u' => {
                    let items = self.pop_to_mark()?;
                    self.set_items(items)?;
                }
                b'R' | 0x81 => {
                    let args = self.pop()?;
                    let class = self.pop()?;
                    // Mapping types are materialized directly so SETITEMS can
                    // fill them.
                    if class.is_global("collections", "defaultdict")
                        || class.is_global("collections", "OrderedDict")
                    {
                        self.push(Value::Dict(Vec::new()));
                    } else {
                        self.push(Value::Object {
                            class: Box::new(class),
                            args: Box::new(args),
                            state: None,
                        });
                    }
                }
                b'b' => {
                    let new_state = self.pop()?;
                    match self.top()? {
                        Value::Object { state, .. } => *state = Some(Box::new(new_state)),
                        _ => return self.err("BUILD target is not an object"),
                    }
                }
                other => return self.err(format!("unsupported opcode 0x{other:02x}")),
            }
        }
    }
}

pub fn unpickle(data: &[u8]) -> Result<Value, PickleError> {
    Machine {
        data,
        pos: 0,
        stack: Vec::new(),
        memo: Vec::new(),
    }
    .run()
}

/// A decoded numpy array.
#[derive(Clone, Debug, PartialEq)]
pub struct NdArray {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

fn dtype_code(dtype: &Value) -> Option<String> {
    match dtype {
        Value::Object { class, args, .. } if class.is_global("numpy", "dtype") => {
            args.items()?.first()?.as_text().map(str::to_owned)
        }
        _ => None,
    }
}

fn decode_raw(code: &str, raw: &[u8]) -> Result<Vec<f64>, String> {
    fn chunks<const N: usize>(raw: &[u8]) -> impl Iterator<Item = [u8; N]> + '_ {
        raw.chunks_exact(N).map(|c| c.try_into().unwrap())
    }
    let code = code.trim_start_matches(['<', '|', '=']);
    Ok(match code {
        "f4" => chunks::<4>(raw).map(|b| f32::from_le_bytes(b) as f64).collect(),
        "f8" => chunks::<8>(raw).map(f64::from_le_bytes).collect(),
        "i4" => chunks::<4>(raw).map(|b| i32::from_le_bytes(b) as f64).collect(),
        "i8" => chunks::<8>(raw).map(|b| i64::from_le_bytes(b) as f64).collect(),
        "u1" | "b1" => raw.iter().map(|&b| b as f64).collect(),
        other => return Err(format!("unsupported array dtype {other}")),
    })
}

/// Interprets a `numpy.core.multiarray._reconstruct` record.
pub fn ndarray(v: &Value) -> Result<NdArray, String> {
    let Value::Object { class, state, .. } = v else {
        return Err("expected a numpy array".into());
    };
    if !class.is_global("numpy", "_reconstruct") {
        return Err("expected a numpy array".into());
    }
    let state = state
        .as_deref()
        .and_then(Value::items)
        .ok_or("numpy array without state")?;
    if state.len() != 5 {
        return Err("unexpected numpy array state layout".into());
    }
    let shape = state[1]
        .items()
        .ok_or("array shape is not a tuple")?
        .iter()
        .map(|d| d.as_int().map(|d| d as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or("array shape has non-integer entries")?;
    let code = dtype_code(&state[2]).ok_or("array dtype is not decodable")?;
    if state[3] == Value::Bool(true) && shape.len() > 1 {
        return Err("fortran-ordered arrays are not supported".into());
    }
    let raw = match &state[4] {
        Value::Bytes(b) => b.as_slice(),
        _ => return Err("array payload is not a byte string".into()),
    };
    let values = decode_raw(&code, raw)?;
    let expected: usize = shape.iter().product();
    if values.len() != expected {
        return Err(format!(
            "array payload holds {} values for shape {shape:?}",
            values.len()
        ));
    }
    Ok(NdArray { shape, values })
}

/// A decoded scipy CSR matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrParts {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn csr_matrix(v: &Value) -> Result<CsrParts, String> {
    let Value::Object { class, state, .. } = v else {
        return Err("expected a scipy sparse matrix".into());
    };
    if !class.is_global("scipy.sparse", "csr_matrix") {
        return Err("expected a scipy csr_matrix".into());
    }
    let state = state.as_deref().ok_or("sparse matrix without state")?;
    let shape = state
        .get("_shape")
        .or_else(|| state.get("shape"))
        .and_then(Value::items)
        .ok_or("sparse matrix without a shape")?;
    let dim = |i: usize| -> Result<usize, String> {
        shape
            .get(i)
            .and_then(Value::as_int)
            .map(|d| d as usize)
            .ok_or_else(|| "bad sparse matrix shape".to_string())
    };
    let field = |name: &str| -> Result<NdArray, String> {
        ndarray(state.get(name).ok_or(format!("sparse matrix lacks `{name}`"))?)
    };
    let as_index = |a: NdArray| a.values.into_iter().map(|x| x as usize).collect::<Vec<_>>();
    Ok(CsrParts {
        rows: dim(0)?,
        cols: dim(1)?,
        indptr: as_index(field("indptr")?),
        indices: as_index(field("indices")?),
        data: field("data")?.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_small_containers() {
        // pickle.dumps({'a': [1, 2], 'b': (None, True)}, protocol=2)
        let data = b"\x80\x02}q\x00(X\x01\x00\x00\x00aq\x01]q\x02(K\x01K\x02eX\x01\x00\x00\x00bq\x03N\x88\x86q\x04u.";
        let v = unpickle(data).unwrap();
        assert_eq!(
            v.get("a"),
            Some(&Value::List(vec![Value::Int(1), Value::Int(2)]))
        );
        assert_eq!(
            v.get("b"),
            Some(&Value::Tuple(vec![Value::None, Value::Bool(true)]))
        );
    }

    #[test]
    fn rejects_truncated_and_unknown() {
        assert!(unpickle(b"\x80\x02K").is_err());
        assert!(unpickle(b"\x80\x02\xff.").is_err());
        assert!(unpickle(b"\x80\x05.").is_err());
    }

    #[test]
    fn decodes_little_endian_payloads() {
        let raw: Vec<u8> = [1i32, -2, 3].iter().flat_map(|v| v.to_le_bytes()).collect();
        assert_eq!(decode_raw("<i4", &raw).unwrap(), vec![1.0, -2.0, 3.0]);
        assert!(decode_raw("c16", &raw).is_err());
    }
}
