//! Plain-text point files: optional `# dims F` header, then one
//! whitespace-separated `x y z f_1 ... f_F` line per point.

use lpcn_core::cloud::{Point3, PointCloud, PointRecord};
use lpcn_core::error::{LpcnError, Result};

pub fn parse(text: &str) -> Result<PointCloud> {
    let mut feat_dim: Option<usize> = None;
    let mut records = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: String| LpcnError::Parse {
            line: lineno + 1,
            msg,
        };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.first() == Some(&"dims") {
                let f = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err("expected `# dims <F>`".into()))?;
                feat_dim = Some(f);
            }
            continue;
        }
        let vals: Vec<f32> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if vals.len() < 3 {
            return Err(err(format!("expected at least 3 columns, got {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite coordinate or feature".into()));
        }
        let f = vals.len() - 3;
        match feat_dim {
            None => feat_dim = Some(f),
            Some(expected) if expected != f => {
                return Err(err(format!(
                    "row has {f} feature columns, expected {expected}"
                )))
            }
            _ => {}
        }
        records.push(PointRecord {
            id: records.len() as u32,
            pos: Point3::new(vals[0], vals[1], vals[2]),
            feat: vals[3..].to_vec(),
        });
    }
    PointCloud::new(records, feat_dim.unwrap_or(0))
}

#[cfg(test)]
pub fn format(cloud: &PointCloud) -> String {
    let mut out = format!("# dims {}\n", cloud.feat_dim);
    for r in &cloud.records {
        out.push_str(&format!("{} {} {}", r.pos.x, r.pos.y, r.pos.z));
        for f in &r.feat {
            out.push_str(&format!(" {f}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let text = "# dims 2\n0 0 0 1.5 2.5\n1 0.5 -1 0 3\n";
        let cloud = parse(text).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.feat_dim, 2);
        assert_eq!(parse(&format(&cloud)).unwrap(), cloud);
    }

    #[test]
    fn inconsistent_columns_report_line_number() {
        let err = parse("0 0 0 1\n1 1 1\n").unwrap_err();
        assert!(matches!(err, LpcnError::Parse { line: 2, .. }));
    }

    #[test]
    fn bad_number_reports_line() {
        let err = parse("0 0 zero\n").unwrap_err();
        assert!(matches!(err, LpcnError::Parse { line: 1, .. }));
    }
}
