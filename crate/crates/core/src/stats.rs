//! Small descriptive statistics shared by the estimators and fitters.

use crate::scalar::Scalar;

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let sum = xs.iter().fold(T::zero(), |acc, &x| acc + x);
    sum / T::of(xs.len() as f64)
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m));
    ss / T::of((xs.len() - 1) as f64)
}

pub fn std_dev<T: Scalar>(xs: &[T]) -> T {
    variance(xs).sqrt()
}

/// Standard error of the mean.
pub fn std_error<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    std_dev(xs) / T::of(xs.len() as f64).sqrt()
}

/// Pearson correlation. Returns zero when either column is constant.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom <= T::zero() || !denom.is_finite() {
        return T::zero();
    }
    sxy / denom
}

/// Median (average of the two central values for even lengths).
pub fn median<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    }
}
