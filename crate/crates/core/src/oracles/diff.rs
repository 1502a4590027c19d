use crate::error::{require_positive, Result};

/// `(f(x + h) − f(x − h)) / 2h`
pub fn central_diff<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    require_positive("h", h)?;
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// `(f(x + h) − 2 f(x) + f(x − h)) / h²`
pub fn second_central_diff<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    require_positive("h", h)?;
    Ok((f(x + h)? - 2.0 * f(x)? + f(x - h)?) / (h * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn central_diff_examples() {
        assert!((central_diff(Ok, 3.0, 1e-5).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(central_diff(|_| Ok(7.0), 3.0, 1e-5).unwrap(), 0.0);
        assert!((central_diff(|x| Ok(x * x), 2.0, 1e-5).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn errors_propagate() {
        let f = |x: f64| {
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(Error::Domain {
                    context: "test",
                    argument: x,
                })
            }
        };
        assert!(central_diff(f, 1e-6, 1e-5).is_err());
        assert!(central_diff(f, 1.0, 0.0).is_err());
        assert!(central_diff(f, 1.0, -1.0).is_err());
    }

    #[test]
    fn second_difference_of_cubic() {
        let d2 = second_central_diff(|x| Ok(x * x * x), 1.5, 1e-3).unwrap();
        assert!((d2 - 9.0).abs() < 1e-6);
    }
}
