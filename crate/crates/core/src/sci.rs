//! C-style scientific notation (`%.Ne`): two-digit signed exponent.

use core::fmt;

/// Formats `value` like C's `%.{decimals}e`, e.g. `9.7e-02`, `-8.00e+02`.
#[derive(Debug, Clone, Copy)]
pub struct Sci {
    pub value: f64,
    pub decimals: usize,
}

pub fn sci(value: f64, decimals: usize) -> Sci {
    Sci { value, decimals }
}

impl fmt::Display for Sci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.value;
        let body = if v.is_nan() {
            alloc::string::String::from("nan")
        } else if v.is_infinite() {
            alloc::string::String::from(if v > 0.0 { "inf" } else { "-inf" })
        } else {
            let raw = alloc::format!("{:.*e}", self.decimals, v);
            match raw.split_once('e') {
                Some((mantissa, exp)) => {
                    let (sign, digits) = match exp.strip_prefix('-') {
                        Some(d) => ('-', d),
                        None => ('+', exp),
                    };
                    if digits.len() < 2 {
                        alloc::format!("{mantissa}e{sign}0{digits}")
                    } else {
                        alloc::format!("{mantissa}e{sign}{digits}")
                    }
                }
                None => raw,
            }
        };
        f.pad(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_c_layout() {
        assert_eq!(sci(0.097, 1).to_string(), "9.7e-02");
        assert_eq!(sci(-800.0, 2).to_string(), "-8.00e+02");
        assert_eq!(sci(1e12, 1).to_string(), "1.0e+12");
        assert_eq!(sci(0.0, 1).to_string(), "0.0e+00");
        assert_eq!(sci(1.5e-100, 1).to_string(), "1.5e-100");
        assert_eq!(format!("{:>9}", sci(1.0, 1)), "  1.0e+00");
    }
}
