use hecke_core::arith_core::{relative_index, CongruenceLevel, PElement, ID};
use hecke_core::cosets::{
    classify, coset_identity_check, double_coset_decomp, hecke_product, regular_rep_matrix, right_coset_reps,
    HeckeElement,
};
use hecke_core::dseries_kernel::{integrate_over_f, sum_over_coset, Term, TraceValue};
use hecke_core::hecke_assembly::{
    build_basis, character_estimate, dim_cusp_forms, eigenvalues_on_range, galerkin_trace_err, hecke_block_matrix,
    hecke_trace, multiplicativity_table, normalized_eigenvalue, op_norm, ramanujan_tau, range_deficit,
    range_operator, BlockHeckeMatrix, CharacterOpts, GalerkinBasis, CALIBRATION_KAPPA,
};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{check, cmatrix, complex, element, exact, imat, real, traced, SCHEMA};
use crate::{Failure, Report};

fn header(cmd: &str, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(cmd));
    m.insert("p".into(), exact(cfg.p));
    m.insert("n".into(), exact(cfg.n.n()));
    m.insert("level".into(), json!(cfg.level.label()));
    m.insert("sigma".into(), element(&cfg.sigma));
    m
}

fn done(m: serde_json::Map<String, Value>) -> Result<Report, Failure> {
    Ok(Report { doc: Value::Object(m), ok: true })
}

fn bigint_json(v: &BigInt) -> Value {
    match i64::try_from(v) {
        Ok(x) => json!(x),
        Err(_) => json!(v.to_string()),
    }
}

fn hecke_json(h: &HeckeElement) -> Value {
    Value::Array(h.terms.iter().map(|(m, c)| json!({ "m": m, "coeff": bigint_json(c) })).collect())
}

pub fn cosets(cfg: &RunConfig) -> Result<Report, Failure> {
    let mut m = header("cosets", cfg);
    let reps = right_coset_reps(&cfg.level);
    m.insert("index".into(), exact(reps.len()));
    m.insert("transversal".into(), Value::Array(reps.reps_imat().iter().map(imat).collect()));
    if !cfg.sigma.in_gamma() {
        if cfg.sigma.det_sign() < 0 {
            m.insert("double_coset".into(), json!({ "negative_determinant": true }));
        } else {
            let dc = double_coset_decomp(&cfg.sigma);
            m.insert(
                "double_coset".into(),
                json!({
                    "class_m": exact(dc.m),
                    "degree": exact(dc.degree),
                    "right_reps": dc.right_reps.iter().map(element).collect::<Vec<_>>(),
                    "relative_index": exact(relative_index(&cfg.level, &cfg.sigma)),
                }),
            );
        }
    }
    done(m)
}

pub fn parse_class(s: &str, p: u64) -> Result<u32, Failure> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let m = match lower.as_str() {
        "e" | "gamma" | "[gamma]" | "t1" => Some(0),
        "tp" => Some(1),
        _ => {
            if let Some(rest) = lower.strip_prefix("tp^") {
                rest.parse().ok()
            } else if let Some(rest) = lower.strip_prefix("t") {
                // T<N> with N a power of p
                rest.parse::<u64>().ok().and_then(|nn| {
                    let mut k = 0u32;
                    let mut r = nn;
                    while r > 1 && r % p == 0 {
                        r /= p;
                        k += 1;
                    }
                    (r == 1).then_some(k)
                })
            } else {
                lower.parse().ok()
            }
        }
    };
    match m {
        Some(k) if k <= 12 => Ok(k),
        _ => Err(Failure::Config(format!("Hecke class '{s}': expected e, Tp, Tp^m, T<p^m> or m <= 12"))),
    }
}

pub fn hecke_mul(cfg: &RunConfig, a: &str, b: &str) -> Result<Report, Failure> {
    let (ma, mb) = (parse_class(a, cfg.p)?, parse_class(b, cfg.p)?);
    let prod = hecke_product(&HeckeElement::basis(cfg.p, ma), &HeckeElement::basis(cfg.p, mb));
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!("hecke-mul"));
    m.insert("p".into(), exact(cfg.p));
    m.insert("a".into(), json!({ "m": ma }));
    m.insert("b".into(), json!({ "m": mb }));
    m.insert("terms".into(), hecke_json(&prod));
    m.insert("exact".into(), json!(true));
    done(m)
}

pub fn trace(cfg: &RunConfig) -> Result<Report, Failure> {
    let mut m = header("trace", cfg);
    let t = hecke_trace(cfg.n, &cfg.level, &cfg.sigma, cfg.height, &cfg.quad)?;
    m.insert("height".into(), exact(cfg.height));
    m.insert("value".into(), complex(t.normalized.value));
    m.insert("err".into(), json!(t.normalized.err));
    m.insert("raw".into(), traced(t.value));
    m.insert("kappa".into(), exact(CALIBRATION_KAPPA));
    m.insert("normalization".into(), exact(t.normalization));
    m.insert("terms_used".into(), exact(t.terms_used));
    m.insert("families".into(), exact(t.families));
    m.insert("excluded_negative_det".into(), exact(t.excluded_negative_det));
    m.insert("tail_bound".into(), exact(t.tail_bound));
    done(m)
}

fn cutoff(m_e: &BlockHeckeMatrix) -> f64 {
    (10.0 * m_e.err()).max(1e-6)
}

fn basis(cfg: &RunConfig) -> Result<GalerkinBasis, Failure> {
    Ok(build_basis(cfg.n, cfg.galerkin_dim, &cfg.quad)?)
}

fn blocks_json(mat: &BlockHeckeMatrix) -> Value {
    let r = mat.r();
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            let b = mat.block(i, j);
            out.push(json!({ "i": i, "j": j, "mat": cmatrix(&b.mat), "err": b.err }));
        }
    }
    Value::Array(out)
}

pub fn matrix(cfg: &RunConfig) -> Result<Report, Failure> {
    let mut m = header("matrix", cfg);
    let b = basis(cfg)?;
    let p = cfg.p;
    let me = hecke_block_matrix(&cfg.level, &PElement::identity(p), cfg.height, &b, &cfg.quad)?;
    let idem = me.idempotency_residual();
    m.insert("height".into(), exact(cfg.height));
    m.insert("galerkin_dim".into(), exact(b.dim));
    m.insert("gram_residual".into(), exact(b.gram_residual));
    m.insert("r".into(), exact(me.r()));
    m.insert("transversal".into(), Value::Array(me.reps.reps_imat().iter().map(imat).collect()));
    m.insert("idempotency_residual".into(), real(idem, 2.0 * me.err()));
    let co = cutoff(&me);
    let ms = if cfg.sigma.in_gamma() && cfg.level.k == 0 {
        me.clone()
    } else {
        hecke_block_matrix(&cfg.level, &cfg.sigma, cfg.height, &b, &cfg.quad)?
    };
    m.insert("normalization".into(), exact(ms.normalization));
    m.insert("class_m".into(), exact(ms.sigma_label));
    m.insert("trace".into(), traced(ms.trace()));
    m.insert("hermitian_residual".into(), real(ms.hermitian_residual(), ms.err()));
    let ev = eigenvalues_on_range(&ms, &me, co)?;
    let e = cfg.sigma.det_exponent();
    m.insert(
        "eigenvalues_on_range".into(),
        json!({
            "rank": exact(ev.rank),
            "cutoff": exact(co),
            "raw": ev.values.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
            "normalized": ev.values.iter().map(|z| complex(*z * (p as f64).powf(-CALIBRATION_KAPPA * e as f64))).collect::<Vec<_>>(),
            "err": ev.err,
        }),
    );
    m.insert("blocks".into(), blocks_json(&ms));
    m.insert("err".into(), json!(ms.err()));
    done(m)
}

pub fn character(cfg: &RunConfig, k_max: u32, level_height: u64) -> Result<Report, Failure> {
    if k_max == 0 || k_max > 6 {
        return Err(Failure::Config(format!("k-max {k_max} not in [1, 6]")));
    }
    let mut m = header("character", cfg);
    let opts = CharacterOpts { level_height, ball_height: cfg.height, stabilizer_height: 30 };
    let ce = character_estimate(&cfg.sigma, k_max, cfg.n, &cfg.quad, &opts)?;
    let levels: Vec<Value> = ce
        .levels
        .iter()
        .map(|l| {
            json!({
                "k": l.k,
                "index_in_gamma": exact(l.index_in_gamma),
                "prefactor": exact(l.prefactor),
                "sum": complex(l.sum.value),
                "err": l.sum.err,
                "normalized": traced(l.normalized),
                "terms_used": exact(l.terms_used),
            })
        })
        .collect();
    m.insert("level_height".into(), exact(level_height));
    m.insert("per_level".into(), Value::Array(levels));
    m.insert("prefactors_stable".into(), json!(ce.prefactors_stable));
    m.insert("extrapolated".into(), ce.extrapolated.map(traced).unwrap_or(Value::Null));
    let rel = (ce.ball_sum.value - ce.symbol_integral.value).norm() / ce.symbol_integral.value.norm();
    m.insert(
        "symbol_integral_check".into(),
        json!({
            "ball_height": exact(ce.ball_height),
            "ball_sum": traced(ce.ball_sum),
            "symbol_integral": traced(ce.symbol_integral),
            "rel_diff": real(rel, (ce.ball_sum.err + ce.symbol_integral.err) / ce.symbol_integral.value.norm()),
            "pass": rel <= 0.02,
        }),
    );
    m.insert("harish_chandra".into(), ce.harish_chandra.map(exact).unwrap_or(Value::Null));
    done(m)
}

// ---------------------------------------------------------------------------
// verify

struct Checks {
    list: Vec<Value>,
    ok: bool,
}

impl Checks {
    fn push(&mut self, name: &str, residual: f64, budget: f64) {
        let (v, pass) = check(name, residual, budget);
        self.list.push(v);
        self.ok &= pass;
    }
}

fn hecke_relation_residual(p: u64) -> f64 {
    let t = |m| HeckeElement::basis(p, m);
    let big = |v: u64| BigInt::from(v);
    let lhs1 = hecke_product(&t(1), &t(1));
    let rhs1 = t(2).add(&t(0).scale(&big(p + 1)));
    let lhs2 = hecke_product(&t(1), &t(2));
    let rhs2 = t(3).add(&t(1).scale(&big(p)));
    (lhs1 != rhs1) as u32 as f64 + (lhs2 != rhs2) as u32 as f64
}

/// Mismatched interior rows between products of truncated regular
/// representations and the representation of the product.
fn regular_rep_residual(p: u64, radius: u32) -> f64 {
    let t = |m| HeckeElement::basis(p, m);
    let mut bad = 0usize;
    for (a, b) in [(t(1), t(1)), (t(1), t(2))] {
        let ra = regular_rep_matrix(&a, radius);
        let rb = regular_rep_matrix(&b, radius);
        let rc = regular_rep_matrix(&hecke_product(&a, &b), radius);
        let span = a.span() + b.span();
        for i in 0..ra.dim() {
            if ra.exponent[i] + span <= radius && ra.mul_row(&rb, i) != rc.rows[i] {
                bad += 1;
            }
        }
    }
    bad as f64
}

fn commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a * b - b * a).norm()
}

pub fn verify(cfg: &RunConfig) -> Result<Report, Failure> {
    let p = cfg.p;
    let n = cfg.n;
    let h = cfg.height;
    let q = &cfg.quad;
    let mut c = Checks { list: Vec::new(), ok: true };

    // exact combinatorics
    c.push("hecke_relations", hecke_relation_residual(p), 0.0);
    c.push("regular_rep_interior_rows", regular_rep_residual(p, 3), 0.0);
    let sigma = PElement::diag(p, 1, p as i64)?;
    let gamma = CongruenceLevel::gamma(p);
    let g0 = CongruenceLevel::gamma0(p, 1);
    c.push("relative_index", (relative_index(&gamma, &sigma) as f64 - (p + 1) as f64).abs(), 0.0);
    c.push("coset_identity", (!coset_identity_check(&sigma, 6).ok) as u32 as f64, 0.0);

    // scalar traces
    let id = Term::element(&ID)?;
    let it = integrate_over_f(&|x, y| id.symbol(n, x, y), q)?;
    c.push("identity_trace", (it.value.re - n.identity_trace()).abs(), 1e-6);
    let dim = dim_cusp_forms(1, n.n()) as f64;
    let ds = sum_over_coset(n, &gamma, &PElement::identity(p), h, q)?;
    c.push("dimension", (ds.total().value.re - dim).abs(), 0.01 * dim.max(1.0));

    // Galerkin models
    let b = basis(cfg)?;
    let me = hecke_block_matrix(&gamma, &PElement::identity(p), h, &b, q)?;
    let co = cutoff(&me);
    c.push("idempotency_gamma", me.idempotency_residual(), 2e-2);
    let mp = hecke_block_matrix(&gamma, &sigma, h, &b, q)?;
    let sigma2 = PElement::diag(p, 1, (p * p) as i64)?;
    let mp2 = hecke_block_matrix(&gamma, &sigma2, h, &b, q)?;
    if n.n() == 12 {
        let ev = eigenvalues_on_range(&mp, &me, co)?;
        let target = ramanujan_tau(p as usize) as f64 * (p as f64).powf(-5.5);
        let res = match ev.values.as_slice() {
            [v] => {
                let nv = normalized_eigenvalue(TraceValue::new(*v, ev.err), p, 1, CALIBRATION_KAPPA);
                (nv.value.re - target).abs() / target.abs()
            }
            _ => f64::INFINITY,
        };
        c.push("hecke_eigenvalue_vs_tau", res, 1e-2);
    }
    let cp = range_operator(&mp, &me, co)?;
    let cp2 = range_operator(&mp2, &me, co)?;
    let rel = if cp.mat.nrows() == 0 {
        f64::INFINITY
    } else {
        let eye = DMatrix::<Complex64>::identity(cp.mat.nrows(), cp.mat.nrows());
        (&cp.mat * &cp.mat - &cp2.mat - eye * Complex64::new((p + 1) as f64, 0.0)).norm()
    };
    let rel_budget = 2.0 * op_norm(&cp.mat) * cp.err + cp2.err + 1e-9;
    c.push("hecke_relation_on_range", rel, rel_budget);
    let (deficit, lmin) = range_deficit(&me, co);
    let (ap, ap2) = (mp.assembled(), mp2.assembled());
    let comm_budget = 2.0 * op_norm(&ap) * op_norm(&ap2) * deficit / (lmin * lmin) + 2.0 * (op_norm(&ap) * mp2.err() + op_norm(&ap2) * mp.err());
    c.push("commutation_tp_tp2", commutator(&ap, &ap2), comm_budget);

    let me0 = hecke_block_matrix(&g0, &PElement::identity(p), h, &b, q)?;
    c.push("idempotency_gamma0", me0.idempotency_residual(), 2e-2);
    c.push("hermitian_gamma0", me0.hermitian_residual(), 1e-8 + me0.err() / me0.assembled().norm());
    let dim0 = dim_cusp_forms(p, n.n());
    let rank0 = eigenvalues_on_range(&me0, &me0, cutoff(&me0))?.rank;
    c.push("rank_gamma0_vs_dimension", (rank0 as f64 - dim0 as f64).abs(), 0.0);
    let ms0 = hecke_block_matrix(&g0, &sigma, h, &b, q)?;
    let st = hecke_trace(n, &g0, &sigma, h, q)?;
    let budget = st.value.err + ms0.trace().err + galerkin_trace_err(&ms0, &me0, cutoff(&me0));
    c.push("f8_consistency_gamma0", (st.value.value - ms0.trace().value).norm(), budget);

    let sigmas = [PElement::identity(p), PElement::t(p), PElement::s(p), sigma.clone()];
    let table = multiplicativity_table(&sigmas, h, &b, q)?;
    let worst = table.iter().map(|r| r.residual).fold(0.0, f64::max);
    c.push("multiplicativity", worst, 2e-2);

    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!("verify"));
    m.insert("p".into(), exact(p));
    m.insert("n".into(), exact(n.n()));
    m.insert("height".into(), exact(h));
    m.insert("galerkin_dim".into(), exact(cfg.galerkin_dim));
    m.insert("class_m".into(), exact(classify(&sigma)));
    m.insert("checks".into(), Value::Array(c.list));
    m.insert("pass".into(), json!(c.ok));
    Ok(Report { doc: Value::Object(m), ok: c.ok })
}
