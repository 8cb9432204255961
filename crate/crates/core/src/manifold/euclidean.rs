use crate::scalar::Scalar;

pub(super) fn dist<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt()
}

pub(super) fn exp<T: Scalar>(x: &[T], v: &[T]) -> Vec<T> {
    x.iter().zip(v).map(|(&a, &b)| a + b).collect()
}

pub(super) fn log<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    y.iter().zip(x).map(|(&a, &b)| a - b).collect()
}

pub(super) fn frame<T: Scalar>(dim: usize) -> Vec<Vec<T>> {
    (0..dim)
        .map(|k| {
            let mut e = vec![T::zero(); dim];
            e[k] = T::one();
            e
        })
        .collect()
}
