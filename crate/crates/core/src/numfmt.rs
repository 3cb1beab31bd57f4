/// 17 significant digits in scientific notation; parses back to the same `f64`.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0e0" style noise for negative zero
        return "0".to_string();
    }
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrips_exactly() {
        for &x in &[0.1, 1.0 / 3.0, 2.43e-3, 1e-300, 0.9999999999999999, -7.25] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(sig17(-0.0), "0");
    }
}
