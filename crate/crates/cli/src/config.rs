use std::path::PathBuf;

use clap::Args;
use hecke_core::arith_core::{CongruenceLevel, PElement};
use hecke_core::dseries_kernel::{QuadratureSpec, Weight};

use crate::Failure;

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// prime p
    #[arg(long, global = true, default_value_t = 2)]
    pub p: u64,
    /// even weight n >= 4
    #[arg(long, global = true, default_value_t = 12)]
    pub n: u32,
    /// height bound H for coset sums (0 keeps only the identity term)
    #[arg(long, global = true, default_value_t = 200)]
    pub height: u64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub quad_rel_tol: f64,
    /// split height between the bulk and cusp panels of F
    #[arg(long, global = true, default_value_t = 2.0)]
    pub y_max: f64,
    #[arg(long, global = true, default_value_t = 64)]
    pub galerkin_dim: usize,
    /// gamma | gamma0:p^k | principal:p^k
    #[arg(long, global = true, default_value = "gamma")]
    pub level: String,
    /// "a,b,c,d" or "identity"
    #[arg(long, global = true, default_value = "identity")]
    pub sigma: String,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "HECKE_VIRT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub p: u64,
    pub n: Weight,
    pub height: u64,
    pub quad: QuadratureSpec,
    pub galerkin_dim: usize,
    pub level: CongruenceLevel,
    pub sigma: PElement,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

fn parse_level(s: &str, p: u64) -> Result<CongruenceLevel, Failure> {
    let bad = || Failure::Config(format!("level '{s}': expected gamma, gamma0:p^k or principal:p^k"));
    if s == "gamma" {
        return Ok(CongruenceLevel::gamma(p));
    }
    let (kind, m) = s.split_once(':').ok_or_else(bad)?;
    let m: u64 = m.trim().parse().map_err(|_| bad())?;
    let mut k = 0u32;
    let mut r = m;
    while r > 1 && r % p == 0 {
        r /= p;
        k += 1;
    }
    if r != 1 {
        return Err(Failure::Config(format!("level modulus {m} is not a power of p = {p}")));
    }
    if k > 6 {
        return Err(Failure::Config(format!("level modulus {m} too large")));
    }
    match kind {
        "gamma0" => Ok(CongruenceLevel::gamma0(p, k)),
        "principal" => Ok(CongruenceLevel::principal(p, k)),
        _ => Err(bad()),
    }
}

pub fn parse_sigma(s: &str, p: u64) -> Result<PElement, Failure> {
    if s == "identity" || s == "e" {
        return Ok(PElement::identity(p));
    }
    let parts: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Config(format!("sigma '{s}': expected four integers a,b,c,d")))?;
    if parts.len() != 4 {
        return Err(Failure::Config(format!("sigma '{s}': expected four integers a,b,c,d")));
    }
    let g = PElement::from_ints(p, [parts[0], parts[1], parts[2], parts[3]])
        .map_err(|e| Failure::Config(format!("sigma '{s}': {e}")))?;
    if g.to_imat().is_none() {
        return Err(Failure::Config(format!("sigma '{s}': entries too large")));
    }
    Ok(g)
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self, Failure> {
        if !is_prime(a.p) || a.p > 97 {
            return Err(Failure::Config(format!("p = {} must be a prime <= 97", a.p)));
        }
        let n = Weight::new(a.n).map_err(|e| Failure::Config(e.to_string()))?;
        if a.height > 2000 {
            return Err(Failure::Config(format!("height {} > 2000", a.height)));
        }
        if !(a.quad_rel_tol > 0.0 && a.quad_rel_tol <= 1e-3) {
            return Err(Failure::Config(format!("quad-rel-tol {} not in (0, 1e-3]", a.quad_rel_tol)));
        }
        if !(2.0..=50.0).contains(&a.y_max) {
            return Err(Failure::Config(format!("y-max {} not in [2, 50]", a.y_max)));
        }
        if a.galerkin_dim == 0 || a.galerkin_dim > 256 {
            return Err(Failure::Config(format!("galerkin-dim {} not in [1, 256]", a.galerkin_dim)));
        }
        if let Some(t) = a.threads {
            if t == 0 || t > 1024 {
                return Err(Failure::Config(format!("threads {t} not in [1, 1024]")));
            }
        }
        let level = parse_level(&a.level, a.p)?;
        let sigma = parse_sigma(&a.sigma, a.p)?;
        let quad = QuadratureSpec { y_max: a.y_max, rel_tol: a.quad_rel_tol, ..QuadratureSpec::default() };
        quad.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(RunConfig {
            p: a.p,
            n,
            height: a.height,
            quad,
            galerkin_dim: a.galerkin_dim,
            level,
            sigma,
            out: a.out.clone(),
            threads: a.threads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_and_sigmas() {
        assert_eq!(parse_level("gamma0:4", 2).unwrap().k, 2);
        assert_eq!(parse_level("principal:9", 3).unwrap().k, 2);
        assert!(parse_level("gamma0:6", 2).is_err());
        assert!(parse_level("foo", 2).is_err());
        assert_eq!(parse_sigma("identity", 2).unwrap(), PElement::identity(2));
        assert_eq!(parse_sigma("1,0,0,2", 2).unwrap(), PElement::diag(2, 1, 2).unwrap());
        assert!(parse_sigma("1,0,0,3", 2).is_err());
        assert!(parse_sigma("1,0,0", 2).is_err());
    }

    #[test]
    fn primes() {
        let ps: Vec<u64> = (0..20).filter(|&p| is_prime(p)).collect();
        assert_eq!(ps, vec![2, 3, 5, 7, 11, 13, 17, 19]);
    }
}
