//! 8-bit binary PGM (`P5`) export.

use super::ScalarField;

/// Encodes `value * 255` rounded and clamped to `[0, 255]`.
pub fn encode(field: &ScalarField) -> Vec<u8> {
    let s = field.spec();
    let mut out = format!("P5\n{} {}\n255\n", s.cols, s.rows).into_bytes();
    out.extend(
        field
            .data()
            .iter()
            .map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

/// Like [`encode`] but rescales by the field maximum first, for display.
pub fn encode_stretched(field: &ScalarField) -> Vec<u8> {
    let max = field.max();
    if max > 0.0 {
        encode(&field.map(|x| x / max))
    } else {
        encode(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BBox, GridSpec};

    #[test]
    fn header_and_pixels() {
        let spec = GridSpec::new(2, 3, BBox::new(0.0, 0.0, 3.0, 2.0), 1.0).unwrap();
        let f = ScalarField::new(spec, vec![0.0, 0.5, 1.0, 0.2, 1.7, -0.1]).unwrap();
        let b = encode(&f);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&b[..header.len()], header);
        assert_eq!(&b[header.len()..], &[0, 128, 255, 51, 255, 0]);
    }
}
