use super::{GridSpec, Mask, Polygon};

/// Burns a polygon into a `{0,1}` mask by testing every cell center.
pub fn rasterize_polygon(poly: &Polygon, spec: &GridSpec) -> Mask {
    let mut mask = Mask::zeros(*spec);
    for cell in spec.cells() {
        let (lon, lat) = spec.cell_center(cell);
        if poly.contains(lon, lat) {
            mask.set(cell, 1.0);
        }
    }
    mask
}

/// Chebyshev dilation of a `{0,1}` mask by `cells` in both axes.
pub fn buffer_mask(m: &Mask, cells: usize) -> Mask {
    debug_assert!(m.is_binary(), "buffer_mask expects a hard mask");
    if cells == 0 {
        return m.clone();
    }
    let spec = *m.spec();
    let (rows, cols) = (spec.rows, spec.cols);
    let src = m.data();
    // separable: horizontal pass then vertical pass
    let mut horiz = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            let lo = c.saturating_sub(cells);
            let hi = (c + cells).min(cols - 1);
            if src[r * cols + lo..=r * cols + hi].iter().any(|&x| x > 0.0) {
                horiz[r * cols + c] = 1.0;
            }
        }
    }
    let mut out = Mask::zeros(spec);
    for r in 0..rows {
        let lo = r.saturating_sub(cells);
        let hi = (r + cells).min(rows - 1);
        for c in 0..cols {
            if (lo..=hi).any(|rr| horiz[rr * cols + c] > 0.0) {
                out.set((r, c), 1.0);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{chebyshev, wkt_parse, BBox, Cell};
    use proptest::prelude::*;

    fn spec(rows: usize, cols: usize, bbox: BBox) -> GridSpec {
        GridSpec::new(rows, cols, bbox, 1.0).unwrap()
    }

    #[test]
    fn unit_square_covers_left_half() {
        // 4x4 cells over lon [0,2], lat [0,1]; centers at lon .25,.75,1.25,1.75
        let s = spec(4, 4, BBox::new(0.0, 0.0, 2.0, 1.0));
        let p = wkt_parse("POLYGON((0 0,1 0,1 1,0 1,0 0))").unwrap();
        let m = rasterize_polygon(&p, &s);
        assert_eq!(m.count_nonzero(), 8);
        for (r, c) in s.cells() {
            assert_eq!(m.get((r, c)) == 1.0, c < 2);
        }
    }

    #[test]
    fn degenerate_and_full_polygons() {
        let s = spec(5, 5, BBox::new(0.0, 0.0, 5.0, 5.0));
        let flat = wkt_parse("POLYGON((0 0,2.5 2.5,5 5))").unwrap();
        assert_eq!(rasterize_polygon(&flat, &s).count_nonzero(), 0);
        let full = wkt_parse("POLYGON((0 0,5 0,5 5,0 5))").unwrap();
        assert_eq!(rasterize_polygon(&full, &s).count_nonzero(), 25);
        let outside = wkt_parse("POLYGON((10 10,11 10,11 11))").unwrap();
        assert_eq!(rasterize_polygon(&outside, &s).count_nonzero(), 0);
    }

    fn point_mask(s: &GridSpec, cells: &[Cell]) -> Mask {
        let mut m = Mask::zeros(*s);
        for &c in cells {
            m.set(c, 1.0);
        }
        m
    }

    #[test]
    fn buffer_cases() {
        let s = spec(5, 5, BBox::new(0.0, 0.0, 5.0, 5.0));
        let m = point_mask(&s, &[(2, 2)]);
        assert_eq!(buffer_mask(&m, 0), m);
        let b = buffer_mask(&m, 1);
        assert_eq!(b.count_nonzero(), 9);
        for cell in s.cells() {
            assert_eq!(b.get(cell) == 1.0, chebyshev(cell, (2, 2)) <= 1);
        }
    }

    #[test]
    fn buffer_two_points_three_apart() {
        // (3,1) and (3,4): dilated blocks are columns 0..=2 and 3..=5, adjacent
        // but disjoint, 9 + 9 ones. Enumerated by hand over rows 2..=4.
        let s = spec(7, 7, BBox::new(0.0, 0.0, 7.0, 7.0));
        let m = point_mask(&s, &[(3, 1), (3, 4)]);
        let b = buffer_mask(&m, 1);
        assert_eq!(b.count_nonzero(), 18);
        // 2 apart: blocks overlap in one column -> 15
        let m = point_mask(&s, &[(3, 1), (3, 3)]);
        assert_eq!(buffer_mask(&m, 1).count_nonzero(), 15);
    }

    proptest! {
        #[test]
        fn buffer_is_superset_and_matches_brute_force(
            pts in proptest::collection::vec((0usize..9, 0usize..11), 0..6),
            k in 0usize..4,
        ) {
            let s = spec(9, 11, BBox::new(0.0, 0.0, 11.0, 9.0));
            let m = point_mask(&s, &pts);
            let b = buffer_mask(&m, k);
            for cell in s.cells() {
                let want = pts.iter().any(|&p| chebyshev(p, cell) <= k);
                prop_assert_eq!(b.get(cell) == 1.0, want);
                prop_assert!(b.get(cell) >= m.get(cell));
            }
        }
    }
}
