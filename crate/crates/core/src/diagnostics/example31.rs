use alloc::vec::Vec;

use crate::dist::Distribution;

/// Knots `x_n`, `n >= from` (1-based), of a knotted law; empty for other
/// laws.
pub fn example31_knot_grid(law: &Distribution, from: usize) -> Vec<f64> {
    law.example31_knots()
        .unwrap_or_default()
        .into_iter()
        .skip(from.saturating_sub(1))
        .filter(|x| x.is_finite())
        .collect()
}

/// Points `2 x_n`, `n >= from`, that are finite.
pub fn example31_doubled_knots(law: &Distribution, from: usize) -> Vec<f64> {
    example31_knot_grid(law, from)
        .into_iter()
        .map(|x| 2.0 * x)
        .filter(|x| x.is_finite())
        .collect()
}
