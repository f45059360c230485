use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Force a probability row into `[floor, ceiling]` while keeping its sum.
///
/// First, entries above the ceiling are clamped and the excess is spread over
/// the remaining entries in proportion to their values (equally if they are
/// all zero), repeating until nothing exceeds the ceiling. Then entries below
/// the floor are raised and the deficit is taken from the others in
/// proportion to their distance above the floor, which keeps them within
/// bounds. Entries already inside the bounds only move when some other entry
/// was clipped.
pub fn clip_probabilities<T: Scalar>(row: &[T], floor: T, ceiling: T) -> Result<Vec<T>> {
    let k = row.len();
    let kk = T::of_usize(k);
    let tol = T::row_sum_tolerance();
    if k == 0 {
        return Err(Error::arg("empty probability row"));
    }
    if !(floor >= T::zero() && ceiling <= T::one() && floor < ceiling) {
        return Err(Error::arg(format!("need 0 <= floor < ceiling <= 1, got {floor}, {ceiling}")));
    }
    if kk * floor > T::one() + tol || kk * ceiling < T::one() - tol {
        return Err(Error::arg(format!(
            "floor {floor} and ceiling {ceiling} are infeasible for {k} actions"
        )));
    }
    let sum: T = row.iter().copied().sum();
    if row.iter().any(|v| !(v.is_finite() && *v >= T::zero())) || (sum - T::one()).abs() > tol {
        return Err(Error::arg("row is not a probability vector"));
    }
    let mut v = row.to_vec();
    let mut capped = vec![false; k];
    loop {
        let mut excess = T::zero();
        for i in 0..k {
            if !capped[i] && v[i] > ceiling {
                excess = excess + (v[i] - ceiling);
                v[i] = ceiling;
                capped[i] = true;
            }
        }
        if excess <= T::zero() {
            break;
        }
        let free: Vec<usize> = (0..k).filter(|&i| !capped[i]).collect();
        if free.is_empty() {
            break;
        }
        let mass: T = free.iter().map(|&i| v[i]).sum();
        for &i in &free {
            v[i] = v[i]
                + if mass > T::zero() {
                    excess * v[i] / mass
                } else {
                    excess / T::of_usize(free.len())
                };
        }
    }
    let low: Vec<bool> = v.iter().map(|x| *x < floor).collect();
    let deficit: T = v.iter().zip(&low).filter(|(_, l)| **l).map(|(x, _)| floor - *x).sum();
    if deficit > T::zero() {
        let room: T = v.iter().zip(&low).filter(|(_, l)| !**l).map(|(x, _)| *x - floor).sum();
        let shrink = if room > T::zero() { T::one() - deficit / room } else { T::zero() };
        for i in 0..k {
            v[i] = if low[i] {
                floor
            } else {
                floor + (v[i] - floor) * shrink.max(T::zero())
            };
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unanimous_row() {
        let v = clip_probabilities(&[1.0_f64, 0.0, 0.0], 0.05, 0.9).unwrap();
        for (a, b) in v.iter().zip([0.9, 0.05, 0.05]) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn identity_cases_and_errors() {
        let r = [0.2, 0.3, 0.5];
        assert_eq!(clip_probabilities(&r, 0.1, 0.6).unwrap(), r.to_vec());
        assert_eq!(clip_probabilities(&[1.0, 0.0], 0.0, 1.0).unwrap(), vec![1.0, 0.0]);
        assert!(clip_probabilities(&r, 0.4, 0.9).is_err());
        assert!(clip_probabilities(&r, 0.0, 0.3).is_err());
    }

    proptest! {
        #[test]
        fn clipped_rows_are_valid(raw in prop::collection::vec(0.0f64..1.0, 2..6), floor in 0.0f64..0.1, span in 0.2f64..0.9) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let row: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let k = row.len() as f64;
            let ceiling = (floor + span).min(1.0);
            prop_assume!(k * floor <= 1.0 && k * ceiling >= 1.0);
            let v = clip_probabilities(&row, floor, ceiling).unwrap();
            let s: f64 = v.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            for x in &v {
                prop_assert!(*x >= floor - 1e-12 && *x <= ceiling + 1e-12);
            }
        }
    }
}
