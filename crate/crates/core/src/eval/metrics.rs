use num_rational::Ratio;

/// Exact rational used for first-failure metrics.
pub type Fraction = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("no dialogs to score")]
    EmptyInput,
    #[error("dialog {dialog} has {got} rounds, expected {expected}")]
    LengthMismatch {
        dialog: usize,
        got: usize,
        expected: usize,
    },
}

/// 1-based index of the first incorrect round, or `len + 1` if none.
pub fn first_failure(correct: &[bool]) -> usize {
    correct
        .iter()
        .position(|c| !c)
        .map_or(correct.len() + 1, |i| i + 1)
}

fn check(correct: &[Vec<bool>], l: usize) -> Result<(), MetricError> {
    if correct.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    match correct.iter().position(|row| row.len() != l) {
        Some(i) => Err(MetricError::LengthMismatch {
            dialog: i,
            got: correct[i].len(),
            expected: l,
        }),
        None => Ok(()),
    }
}

/// Mean first-failure round.
pub fn ffr(correct: &[Vec<bool>], l: usize) -> Result<Fraction, MetricError> {
    check(correct, l)?;
    let total: i128 = correct.iter().map(|row| first_failure(row) as i128).sum();
    Ok(Fraction::new(total, correct.len() as i128))
}

/// Mean over dialogs of `f / (L + 1)`, `f` the first-failure round.
pub fn nffr(correct: &[Vec<bool>], l: usize) -> Result<Fraction, MetricError> {
    check(correct, l)?;
    Ok(nffr_ragged(correct.iter().map(|r| r.as_slice())))
}

/// NFFR when dialogs may differ in length; each uses its own `L`.
pub fn nffr_ragged<'a>(rows: impl IntoIterator<Item = &'a [bool]>) -> Fraction {
    let mut sum = Fraction::from_integer(0);
    let mut n = 0i128;
    for row in rows {
        sum += Fraction::new(first_failure(row) as i128, row.len() as i128 + 1);
        n += 1;
    }
    if n == 0 {
        sum
    } else {
        sum / n
    }
}

pub fn to_f64(x: Fraction) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: i128, d: i128) -> Fraction {
        Fraction::new(n, d)
    }

    #[test]
    fn hand_examples() {
        assert_eq!(nffr(&[vec![true; 10]], 10).unwrap(), f(1, 1));
        let mut first_wrong = vec![true; 10];
        first_wrong[0] = false;
        assert_eq!(nffr(&[first_wrong], 10).unwrap(), f(1, 11));
        let mut a = vec![true; 10];
        a[4] = false;
        let b = vec![true; 10];
        assert_eq!(nffr(&[a.clone(), b.clone()], 10).unwrap(), f(8, 11));
        let mut c = vec![true; 10];
        c[2] = false;
        assert_eq!(ffr(&[c, b], 10).unwrap(), f(7, 1));
        assert_eq!(ffr(&[vec![true; 10]], 10).unwrap(), f(11, 1));
    }

    #[test]
    fn errors() {
        assert_eq!(nffr(&[], 10), Err(MetricError::EmptyInput));
        assert_eq!(ffr(&[], 3), Err(MetricError::EmptyInput));
        assert!(matches!(
            nffr(&[vec![true; 3], vec![true; 2]], 3),
            Err(MetricError::LengthMismatch { dialog: 1, .. })
        ));
    }
}
