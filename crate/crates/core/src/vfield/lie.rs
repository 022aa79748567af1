use super::{lie_bracket_truncated, vf_norm, DomainParams, PolyVectorField, Truncation, C64};
use crate::error::KamError;

#[derive(Clone, Debug)]
pub struct LieSeries {
    pub field: PolyVectorField,
    /// norms of ad^n X / n! for n = 0..
    pub term_norms: Vec<f64>,
    pub remainder_bound: f64,
}

/// Geometric tail estimate from the last two term norms.
pub(crate) fn tail_bound(norms: &[f64]) -> f64 {
    match norms {
        [.., a, b] if *a > 0.0 && b < a => b * (b / a) / (1.0 - b / a),
        [.., b] => *b,
        [] => 0.0,
    }
}

/// (φ¹_F)^* X = Σ_n ad_F^n X / n! with ad_F X = [X, F], truncated at `order` brackets.
pub fn pushforward(
    f: &PolyVectorField,
    x: &PolyVectorField,
    order: usize,
    trunc: &Truncation,
    dom: &DomainParams,
) -> Result<LieSeries, KamError> {
    if order == 0 {
        return Err(KamError::Precondition("Lie series order must be at least 1".into()));
    }
    let mut sum = x.truncated(trunc);
    let mut term = sum.clone();
    let mut norms = vec![vf_norm(&term, dom)];
    let mut closed = f.is_empty() || term.is_empty();
    for n in 1..=order {
        if closed {
            break;
        }
        term = lie_bracket_truncated(&term, f, trunc).scaled(C64::new(1.0 / n as f64, 0.0));
        let nn = vf_norm(&term, dom);
        norms.push(nn);
        if n >= 2 && nn > norms[n - 1] && nn > 0.0 {
            return Err(KamError::NonConvergence { norms });
        }
        sum.add_scaled(&term, C64::new(1.0, 0.0));
        closed = term.is_empty();
    }
    let remainder_bound = if closed { 0.0 } else { tail_bound(&norms) };
    Ok(LieSeries { field: sum, term_norms: norms, remainder_bound })
}
