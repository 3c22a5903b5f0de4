//! Adaptive perception weight `W_p` regressed from pooled `f_s`.

use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn perception_weight<T: Scalar>(f_s: &Tensor<T>, head: &Mlp<T>) -> Result<T> {
    f_s.ensure_finite("stage-5 features")?;
    if head.in_dim() != f_s.channels() {
        return Err(Error::Shape(alloc::format!(
            "weight head expects {} channels, f_s has {}",
            head.in_dim(),
            f_s.channels()
        )));
    }
    Ok(head.forward(&f_s.global_average()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_head_is_half() {
        let f = Tensor::from_fn(8, 2, 2, |c, y, x| (c + y + x) as f64);
        assert_eq!(perception_weight(&f, &Mlp::zeros(8)).unwrap(), 0.5);
        assert!(perception_weight(&f, &Mlp::zeros(4)).is_err());
    }
}
