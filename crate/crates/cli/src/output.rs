use hecke_core::arith_core::{IMat, PElement};
use hecke_core::dseries_kernel::TraceValue;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Value};

pub const SCHEMA: u32 = 1;

pub fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn traced(t: TraceValue) -> Value {
    json!({ "value": complex(t.value), "err": t.err })
}

pub fn real(v: f64, err: f64) -> Value {
    json!({ "value": v, "err": err })
}

pub fn exact<T: serde::Serialize>(v: T) -> Value {
    json!({ "value": v, "exact": true })
}

pub fn imat(m: &IMat) -> Value {
    json!([[m[0], m[1]], [m[2], m[3]]])
}

pub fn element(g: &PElement) -> Value {
    match g.to_imat() {
        Some(m) => imat(&m),
        None => {
            let e = g.entries();
            json!([[e[0].to_string(), e[1].to_string()], [e[2].to_string(), e[3].to_string()]])
        }
    }
}

/// Row-major list of rows of [re, im] pairs.
pub fn cmatrix(m: &DMatrix<Complex64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| complex(m[(i, j)])).collect())).collect())
}

pub fn check(name: &str, residual: f64, budget: f64) -> (Value, bool) {
    let pass = residual.is_finite() && residual <= budget;
    (json!({ "name": name, "residual": residual, "budget": budget, "pass": pass }), pass)
}
