use super::{GridError, ScalarField};

/// Min-max rescale to `[0, 1]`; a constant field maps to zeros.
pub fn normalize01(f: &ScalarField) -> ScalarField {
    let (lo, hi) = (f.min(), f.max());
    let range = hi - lo;
    if !(range > 0.0) {
        return ScalarField::zeros(*f.spec());
    }
    f.map(|x| ((x - lo) / range).clamp(0.0, 1.0))
}

/// `hypot(df/dx, df/dy)` in field units per cell; central differences in the
/// interior, one-sided at the borders.
pub fn gradient_magnitude(f: &ScalarField) -> ScalarField {
    let spec = *f.spec();
    let (rows, cols) = (spec.rows, spec.cols);
    let d = f.data();
    let at = |r: usize, c: usize| d[r * cols + c];
    let diff = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
    let mut out = Vec::with_capacity(d.len());
    for r in 0..rows {
        for c in 0..cols {
            let dx = if c == 0 {
                diff(at(r, 0), at(r, 1), 1.0)
            } else if c == cols - 1 {
                diff(at(r, c - 1), at(r, c), 1.0)
            } else {
                diff(at(r, c - 1), at(r, c + 1), 2.0)
            };
            let dy = if r == 0 {
                diff(at(0, c), at(1, c), 1.0)
            } else if r == rows - 1 {
                diff(at(r - 1, c), at(r, c), 1.0)
            } else {
                diff(at(r - 1, c), at(r + 1, c), 2.0)
            };
            out.push(dx.hypot(dy));
        }
    }
    ScalarField::new(spec, out).expect("gradient of a finite field is finite")
}

/// Sum over the Chebyshev window of `radius`, zero-padded.
pub fn box_convolve(f: &ScalarField, radius: usize) -> ScalarField {
    if radius == 0 {
        return f.clone();
    }
    let spec = *f.spec();
    let (rows, cols) = (spec.rows, spec.cols);
    let d = f.data();
    // summed-area table with a zero border row/column
    let w = cols + 1;
    let mut sat = vec![0.0; (rows + 1) * w];
    for r in 0..rows {
        let mut row_sum = 0.0;
        for c in 0..cols {
            row_sum += d[r * cols + c];
            sat[(r + 1) * w + c + 1] = sat[r * w + c + 1] + row_sum;
        }
    }
    let mut out = Vec::with_capacity(d.len());
    for r in 0..rows {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(rows - 1) + 1);
        for c in 0..cols {
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(cols - 1) + 1);
            out.push(sat[r1 * w + c1] - sat[r0 * w + c1] - sat[r1 * w + c0] + sat[r0 * w + c0]);
        }
    }
    ScalarField::new(spec, out).expect("sums of finite values are finite")
}

/// Elementwise `|a - b|`.
pub fn abs_diff(a: &ScalarField, b: &ScalarField) -> Result<ScalarField, GridError> {
    a.zip_with(b, |x, y| (x - y).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BBox, GridSpec};
    use proptest::prelude::*;

    fn spec(rows: usize, cols: usize) -> GridSpec {
        GridSpec::new(rows, cols, BBox::new(0.0, 0.0, cols as f64, rows as f64), 1.0).unwrap()
    }

    fn field(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> ScalarField {
        ScalarField::from_fn(spec(rows, cols), |(r, c)| f(r, c)).unwrap()
    }

    #[test]
    fn normalize_cases() {
        let f = ScalarField::new(spec(1 + 1, 3), vec![2.0, 4.0, 6.0, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(normalize01(&f).data(), &[0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
        let c = ScalarField::filled(spec(3, 3), 7.0);
        assert!(normalize01(&c).data().iter().all(|&x| x == 0.0));
        let unit = field(3, 3, |r, c| if (r, c) == (0, 0) { 0.0 } else if (r, c) == (2, 2) { 1.0 } else { 0.3 });
        assert_eq!(normalize01(&unit), unit);
    }

    #[test]
    fn gradient_cases() {
        let c = ScalarField::filled(spec(4, 5), 3.0);
        assert!(gradient_magnitude(&c).data().iter().all(|&x| x == 0.0));
        let ramp = field(4, 5, |_, c| c as f64);
        let g = gradient_magnitude(&ramp);
        assert!(g.data().iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let diag = field(5, 5, |r, c| r as f64 + c as f64);
        let g = gradient_magnitude(&diag);
        for r in 1..4 {
            for c in 1..4 {
                assert!((g.get((r, c)) - 2f64.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_cases() {
        let mut f = ScalarField::zeros(spec(5, 5));
        f.set((2, 2), 1.0);
        assert_eq!(box_convolve(&f, 0), f);
        let s = box_convolve(&f, 1);
        for (r, c) in f.spec().cells() {
            let inside = r.abs_diff(2) <= 1 && c.abs_diff(2) <= 1;
            assert_eq!(s.get((r, c)), if inside { 1.0 } else { 0.0 });
        }
        let ones = ScalarField::filled(spec(5, 5), 1.0);
        let s = box_convolve(&ones, 1);
        assert_eq!(s.get((2, 2)), 9.0);
        assert_eq!(s.get((0, 0)), 4.0);
        assert_eq!(s.get((0, 2)), 6.0);
    }

    #[test]
    fn abs_diff_cases() {
        let a = ScalarField::new(spec(2, 2), vec![1.0, 3.0, 0.0, 0.0]).unwrap();
        let b = ScalarField::new(spec(2, 2), vec![4.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(abs_diff(&a, &b).unwrap().data(), &[3.0, 2.0, 0.0, 0.0]);
        assert!(abs_diff(&a, &a).unwrap().data().iter().all(|&x| x == 0.0));
        let other = ScalarField::zeros(spec(2, 3));
        assert!(matches!(abs_diff(&a, &other), Err(GridError::SpecMismatch(_))));
    }

    fn arb_field() -> impl Strategy<Value = ScalarField> {
        proptest::collection::vec(-50.0f64..50.0, 6 * 7)
            .prop_map(|d| ScalarField::new(spec(6, 7), d).unwrap())
    }

    proptest! {
        #[test]
        fn normalize_range_and_affine_invariance(f in arb_field(), a in 0.1f64..20.0, b in -30.0f64..30.0) {
            let n = normalize01(&f);
            prop_assert!(n.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
            let g = f.map(|x| a * x + b);
            let m = normalize01(&g);
            for (x, y) in n.data().iter().zip(m.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn convolution_is_linear(f in arb_field(), g in arb_field(), k in 0usize..4) {
            let sum = f.zip_with(&g, |a, b| a + b).unwrap();
            let lhs = box_convolve(&sum, k);
            let rhs = box_convolve(&f, k).zip_with(&box_convolve(&g, k), |a, b| a + b).unwrap();
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn convolution_matches_window_sum(f in arb_field(), k in 0usize..4) {
            let s = box_convolve(&f, k);
            for (r, c) in f.spec().cells() {
                let mut want = 0.0;
                for rr in 0..6usize {
                    for cc in 0..7usize {
                        if rr.abs_diff(r) <= k && cc.abs_diff(c) <= k {
                            want += f.get((rr, cc));
                        }
                    }
                }
                prop_assert!((s.get((r, c)) - want).abs() < 1e-9);
            }
        }

        #[test]
        fn gradient_nonnegative(f in arb_field()) {
            prop_assert!(gradient_magnitude(&f).data().iter().all(|&x| x >= 0.0));
        }
    }
}
