//! Number formatting shared by every CSV writer.

/// Scientific notation with 17 significant digits, enough to round-trip an
/// `f64` exactly. Always uses `.` as the decimal separator.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Joins fields with commas and terminates with a single LF.
pub fn csv_line<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut line = String::new();
    for (k, f) in fields.into_iter().enumerate() {
        if k > 0 {
            line.push(',');
        }
        line.push_str(f.as_ref());
    }
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }
}
