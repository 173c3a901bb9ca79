//! Single-cavity state specs for `elq wigner`.
//!
//! `fock:N`, `logical:L` and `error:L` with `L` one of `0 1 + - +i -i`.

use elq_core::code::{error_state, logical_state, BinomialCode};
use elq_core::hilbert::{DensityMatrix, Ket};
use elq_core::Complex64 as C64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::CliError;

fn cardinal(label: &str) -> Option<(C64, C64)> {
    let h = FRAC_1_SQRT_2;
    Some(match label {
        "0" => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        "1" => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        "+" => (C64::new(h, 0.0), C64::new(h, 0.0)),
        "-" => (C64::new(h, 0.0), C64::new(-h, 0.0)),
        "+i" => (C64::new(h, 0.0), C64::new(0.0, h)),
        "-i" => (C64::new(h, 0.0), C64::new(0.0, -h)),
        _ => return None,
    })
}

pub fn parse(spec: &str, cutoff: usize) -> Result<DensityMatrix, CliError> {
    let bad = |why: String| CliError::new("config", why).with("field", "state");
    let (kind, arg) = spec.split_once(':').ok_or_else(|| bad(format!("{spec:?} is not of the form kind:arg")))?;
    let ket: Ket = match kind {
        "fock" => {
            let n: usize = arg.parse().map_err(|_| bad(format!("fock level {arg:?} is not an integer")))?;
            Ket::fock(cutoff, n)?
        }
        "logical" | "error" => {
            let (a, b) = cardinal(arg).ok_or_else(|| bad(format!("unknown logical label {arg:?}")))?;
            let code = BinomialCode::new(cutoff)?;
            if kind == "logical" {
                logical_state(&code, a, b)?
            } else {
                error_state(&code, a, b)?
            }
        }
        other => return Err(bad(format!("unknown state kind {other:?}"))),
    };
    Ok(ket.projector())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cardinals_and_fock() {
        for s in ["logical:0", "logical:-i", "error:+", "fock:4"] {
            let rho = parse(s, 10).unwrap();
            assert!((rho.purity() - 1.0).abs() < 1e-12, "{s}");
        }
        assert!(parse("fock:x", 10).is_err());
        assert!(parse("logical:2", 10).is_err());
        assert!(parse("cat", 10).is_err());
        assert!(parse("fock:12", 10).is_err());
    }
}
