//! The `POLYGON` and `POINT` subset of WKT.

use super::GridError;

/// A single exterior ring, closed (first vertex repeated last).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    ring: Vec<(f64, f64)>,
}

impl Polygon {
    /// Builds a polygon from at least three distinct vertices; closes the ring.
    pub fn new(mut ring: Vec<(f64, f64)>) -> Result<Self, GridError> {
        if ring.len() >= 2 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(GridError::Parse {
                offset: 0,
                reason: format!("polygon needs at least 3 vertices, got {}", ring.len()),
            });
        }
        let first = ring[0];
        ring.push(first);
        Ok(Polygon { ring })
    }

    /// Vertices including the closing repeat.
    pub fn ring(&self) -> &[(f64, f64)] {
        &self.ring
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for w in self.ring.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if (y0 > y) != (y1 > y) {
                let xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0);
                if x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn to_wkt(&self) -> String {
        let coords: Vec<String> = self
            .ring
            .iter()
            .map(|(x, y)| format!("{x} {y}"))
            .collect();
        format!("POLYGON(({}))", coords.join(","))
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> GridError {
        GridError::Parse {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), GridError> {
        self.skip_ws();
        if self.text[self.pos..]
            .get(..token.len())
            .is_some_and(|t| t.eq_ignore_ascii_case(token))
        {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.err(format!("expected `{token}`")))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.as_bytes().get(self.pos).copied()
    }

    fn number(&mut self) -> Result<f64, GridError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_digit() || b"+-.eE".contains(&bytes[self.pos]))
        {
            self.pos += 1;
        }
        let tok = &self.text[start..self.pos];
        tok.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| GridError::Parse {
                offset: start,
                reason: format!("expected number, found `{tok}`"),
            })
    }

    fn coord(&mut self) -> Result<(f64, f64), GridError> {
        let x = self.number()?;
        let y = self.number()?;
        Ok((x, y))
    }

    fn finish(&mut self) -> Result<(), GridError> {
        self.skip_ws();
        if self.pos == self.text.len() {
            Ok(())
        } else {
            Err(self.err("trailing characters"))
        }
    }
}

/// Parses `POLYGON((x y, x y, ...))`; only the exterior ring is accepted.
pub fn wkt_parse(text: &str) -> Result<Polygon, GridError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.expect("POLYGON")?;
    cur.expect("(")?;
    cur.expect("(")?;
    let mut ring = vec![cur.coord()?];
    while cur.peek() == Some(b',') {
        cur.pos += 1;
        ring.push(cur.coord()?);
    }
    cur.expect(")")?;
    if cur.peek() == Some(b',') {
        return Err(cur.err("interior rings are not supported"));
    }
    cur.expect(")")?;
    cur.finish()?;
    Polygon::new(ring).map_err(|e| match e {
        GridError::Parse { reason, .. } => GridError::Parse { offset: 0, reason },
        other => other,
    })
}

/// Parses `POINT(x y)`.
pub fn parse_point(text: &str) -> Result<(f64, f64), GridError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.expect("POINT")?;
    cur.expect("(")?;
    let p = cur.coord()?;
    cur.expect(")")?;
    cur.finish()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square() {
        let p = wkt_parse("POLYGON((0 0,1 0,1 1,0 1,0 0))").unwrap();
        assert_eq!(p.ring().len(), 5);
        assert!(p.contains(0.5, 0.5));
        assert!(!p.contains(1.5, 0.5));
    }

    #[test]
    fn open_ring_is_closed() {
        let p = wkt_parse("POLYGON((0 0,1 0,1 1))").unwrap();
        assert_eq!(p.ring(), &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)]);
    }

    #[test]
    fn rejects_other_geometries_with_offset() {
        let err = wkt_parse("LINESTRING(0 0,1 1)").unwrap_err();
        assert_eq!(
            err,
            GridError::Parse {
                offset: 0,
                reason: "expected `POLYGON`".into()
            }
        );
        match wkt_parse("POLYGON((0 0,1 x,1 1))").unwrap_err() {
            GridError::Parse { offset, .. } => assert_eq!(offset, 15),
            e => panic!("{e:?}"),
        }
        assert!(wkt_parse("POLYGON((0 0,1 0,1 1),(0 0,1 0,1 1))").is_err());
        assert!(wkt_parse("POLYGON((0 0,1 0))").is_err());
        assert!(wkt_parse("POLYGON((0 0,1 0,1 1)) junk").is_err());
    }

    #[test]
    fn whitespace_and_case_tolerant() {
        let p = wkt_parse("  polygon ( ( -90.5 26 , -89 26 , -89 27.25 ) )").unwrap();
        assert_eq!(p.ring()[2], (-89.0, 27.25));
    }

    #[test]
    fn wkt_round_trip() {
        let p = wkt_parse("POLYGON((0 0,2.5 0,2.5 1,0 1))").unwrap();
        assert_eq!(wkt_parse(&p.to_wkt()).unwrap(), p);
    }

    #[test]
    fn points() {
        assert_eq!(parse_point("POINT(-88.5 27)").unwrap(), (-88.5, 27.0));
        assert!(parse_point("POINT(1)").is_err());
    }

    #[test]
    fn even_odd_self_intersection() {
        // bow-tie: both lobes inside, the crossing point region toggles
        let p = Polygon::new(vec![(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)]).unwrap();
        assert!(p.contains(0.2, 1.0));
        assert!(p.contains(1.8, 1.0));
        assert!(!p.contains(1.0, 0.2));
    }
}
