/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`.
pub(crate) fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::format_significant;

    #[test]
    fn matches_printf_g() {
        assert_eq!(format_significant(0.96, 9), "0.96");
        assert_eq!(format_significant(1.0, 9), "1");
        assert_eq!(format_significant(-0.123456789123, 9), "-0.123456789");
        assert_eq!(format_significant(0.99999999999, 9), "1");
        assert_eq!(format_significant(1.5e-7, 9), "1.5e-07");
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(format_significant(0.00012345, 3), "0.000123");
    }
}
