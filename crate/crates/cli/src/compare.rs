//! Matching of computed resonances against reference values.

use anisopml::analytic::read_references_csv;
use anisopml::eig::read_spectrum_csv;
use anisopml::Complex64;
use std::path::Path;

/// A value read from either a spectrum CSV or a reference CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub omega: Complex64,
    pub residual: Option<f64>,
    pub spurious: bool,
    pub order: Option<usize>,
}

/// Reads a spectrum CSV (`re_omega,...`) or a reference CSV (`n,k,re,im,...`),
/// chosen by the header.
pub fn read_points(text: &str) -> anisopml::Result<Vec<Point>> {
    let header = text.lines().next().unwrap_or("");
    if header.trim_start().starts_with("re_omega") {
        Ok(read_spectrum_csv(text.as_bytes())?
            .into_iter()
            .map(|r| Point { omega: r.omega, residual: Some(r.residual), spurious: r.spurious, order: None })
            .collect())
    } else {
        Ok(read_references_csv(text.as_bytes())?
            .into_iter()
            .map(|r| Point { omega: r.root, residual: Some(r.residual), spurious: false, order: Some(r.order) })
            .collect())
    }
}

pub fn load_points(path: &Path) -> anisopml::Result<Vec<Point>> {
    read_points(&std::fs::read_to_string(path)?)
}

/// Distinct reference values ordered by distance from the real axis.
pub fn leading_references(refs: &[Point], rel_tol: f64) -> Vec<Point> {
    let mut sorted: Vec<Point> = refs.iter().filter(|p| !p.spurious).copied().collect();
    sorted.sort_by(|a, b| a.omega.im.abs().total_cmp(&b.omega.im.abs()).then(a.omega.re.total_cmp(&b.omega.re)));
    let mut out: Vec<Point> = Vec::new();
    for p in sorted {
        if out.iter().all(|q| (q.omega - p.omega).norm() > rel_tol * p.omega.norm()) {
            out.push(p);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchRow {
    pub reference: Point,
    pub computed: Option<Point>,
    pub rel_error: Option<f64>,
    pub matched: bool,
}

/// Matches the first `count` references (see [`leading_references`]) to the
/// nearest non-spurious computed value. A reference is matched when that
/// value lies within `tolerance` relative error.
pub fn match_references(computed: &[Point], refs: &[Point], count: usize, tolerance: f64) -> Vec<MatchRow> {
    leading_references(refs, 1e-12)
        .into_iter()
        .take(count)
        .map(|r| {
            let nearest = computed
                .iter()
                .filter(|c| !c.spurious)
                .min_by(|a, b| (a.omega - r.omega).norm().total_cmp(&(b.omega - r.omega).norm()))
                .copied();
            let rel_error = nearest.map(|c| (c.omega - r.omega).norm() / r.omega.norm());
            MatchRow { reference: r, computed: nearest, rel_error, matched: rel_error.is_some_and(|e| e <= tolerance) }
        })
        .collect()
}

/// True when all `count` references exist and are matched.
pub fn all_matched(rows: &[MatchRow], count: usize) -> bool {
    rows.len() == count && rows.iter().all(|r| r.matched)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(re: f64, im: f64, spurious: bool) -> Point {
        Point { omega: Complex64::new(re, im), residual: None, spurious, order: None }
    }

    #[test]
    fn ordering_and_matching() {
        let refs = [pt(2.0, -0.9, false), pt(0.5, -0.6, false), pt(0.5, -0.6, false), pt(0.4, -2.0, false)];
        let lead = leading_references(&refs, 1e-12);
        assert_eq!(lead.len(), 3);
        assert_eq!(lead[0].omega, Complex64::new(0.5, -0.6));
        let computed = [pt(0.5005, -0.6, false), pt(2.0, -0.9, true), pt(2.5, -0.9, false)];
        let rows = match_references(&computed, &refs, 2, 1e-2);
        assert!(rows[0].matched && !rows[1].matched);
        assert_eq!(rows[1].computed.unwrap().omega, Complex64::new(2.5, -0.9));
        assert!(!all_matched(&rows, 2));
        assert!(!all_matched(&rows[..1], 2));
    }
}
