//! CSV persistence of node fields. Numbers are written with 17 significant
//! digits so that a round trip is exact.

use std::path::Path;

use crate::base::{BaseManifold, ScalarField};
use crate::error::{Error, Result};

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `node_id,value`.
pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node_id", "value"])?;
    for (i, v) in field.values().iter().enumerate() {
        w.write_record([i.to_string(), fmt_num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `node_id,u,phi,el_residual`.
pub fn write_solution(path: &Path, u: &ScalarField, phi: &ScalarField, el: &ScalarField) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node_id", "u", "phi", "el_residual"])?;
    for i in 0..u.len() {
        w.write_record([
            i.to_string(),
            fmt_num(u.values()[i]),
            fmt_num(phi.values()[i]),
            fmt_num(el.values()[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads column `column` of a CSV keyed by `node_id`, requiring exactly one
/// row per node of `base`.
pub fn read_column(path: &Path, column: &str, base: &BaseManifold) -> Result<ScalarField> {
    if !path.exists() {
        return Err(Error::Config(format!("file not found: {}", path.display())));
    }
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column `{name}`", path.display())))
    };
    let (id_col, val_col) = (find("node_id")?, find(column)?);
    let n = base.node_count();
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let id: usize = get(id_col)
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad node_id on row {}", path.display(), line + 1)))?;
        let v: f64 = get(val_col)
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad `{column}` on row {}", path.display(), line + 1)))?;
        if id >= n {
            return Err(Error::Mismatch(format!("node_id {id} out of range for a base with {n} nodes")));
        }
        if seen[id] {
            return Err(Error::Parse(format!("{}: duplicate node_id {id}", path.display())));
        }
        seen[id] = true;
        values[id] = v;
    }
    let count = seen.iter().filter(|s| **s).count();
    if count != n {
        return Err(Error::Mismatch(format!(
            "{} has {count} nodes but the base has {n}",
            path.display()
        )));
    }
    ScalarField::new(base, values)
}

pub fn read_field(path: &Path, base: &BaseManifold) -> Result<ScalarField> {
    read_column(path, "value", base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseSpec;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = BaseManifold::build(&BaseSpec::flat_torus(&[1.0, 2.0])).unwrap();
        let f = ScalarField::from_fn(&base, |p| (p[0] * 7.3).sin() / 3.0 + p[1].exp() * 1e-7);
        let path = dir.path().join("f.csv");
        write_field(&path, &f).unwrap();
        let g = read_field(&path, &base).unwrap();
        assert_eq!(f.values(), g.values());

        let el = f.scale(0.5);
        let sol = dir.path().join("s.csv");
        write_solution(&sol, &f, &g, &el).unwrap();
        let back = read_column(&sol, "el_residual", &base).unwrap();
        assert_eq!(back.values(), el.values());
    }

    #[test]
    fn node_count_mismatch_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let small = BaseManifold::build(&BaseSpec::icosphere(1)).unwrap();
        let big = BaseManifold::build(&BaseSpec::icosphere(2)).unwrap();
        let path = dir.path().join("f.csv");
        write_field(&path, &ScalarField::constant(&small, 1.0)).unwrap();
        assert!(matches!(read_field(&path, &big), Err(Error::Mismatch(_))));
        assert!(matches!(read_field(&dir.path().join("nope.csv"), &big), Err(Error::Config(_))));
    }
}
