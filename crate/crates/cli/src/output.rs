//! Printed numbers carry 9 significant digits so golden outputs are stable.

use serde_json::Value;

pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest text for `sig9(x)`, always with a decimal point or exponent.
pub fn num(x: f64) -> String {
    format!("{:?}", sig9(x))
}

pub fn join(values: &[f64]) -> String {
    values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")
}

/// Rounds every floating-point number in `v` to 9 significant digits.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(sig9(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn json<T: serde::Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("output types serialize");
    round_floats(&mut v);
    v.to_string()
}
