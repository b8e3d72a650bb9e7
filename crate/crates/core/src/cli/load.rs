use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnNames, Dataset, Var};
use crate::error::{Error, Result};
use crate::proximal::OutcomeLink;

/// Which CSV columns play which role, and the links their values must suit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRoles {
    pub y: String,
    pub a: String,
    pub w: String,
    pub z: Vec<String>,
    pub x: Vec<String>,
    pub y_link: Option<OutcomeLink>,
    pub w_link: Option<OutcomeLink>,
}

impl ColumnRoles {
    pub fn new(y: &str, a: &str, w: &str, z: &[&str], x: &[&str]) -> Self {
        ColumnRoles {
            y: y.into(),
            a: a.into(),
            w: w.into(),
            z: z.iter().map(|s| s.to_string()).collect(),
            x: x.iter().map(|s| s.to_string()).collect(),
            y_link: None,
            w_link: None,
        }
    }

    pub fn with_links(mut self, y_link: OutcomeLink, w_link: OutcomeLink) -> Self {
        self.y_link = Some(y_link);
        self.w_link = Some(w_link);
        self
    }

    fn all(&self) -> Vec<&str> {
        let mut v = vec![self.y.as_str(), self.a.as_str(), self.w.as_str()];
        v.extend(self.z.iter().map(String::as_str));
        v.extend(self.x.iter().map(String::as_str));
        v
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.all();
        if self.z.is_empty() {
            return Err(Error::InvalidConfig("at least one treatment proxy column (z) is required".into()));
        }
        for (i, c) in all.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::InvalidConfig("empty column name".into()));
            }
            if all[..i].contains(c) {
                return Err(Error::InvalidConfig(format!("column `{c}` is assigned more than one role")));
            }
        }
        Ok(())
    }
}

fn parse_error(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse { row, column: column.to_string(), message: message.into() }
}

/// Read a headed, comma-separated numeric file. Rows are counted from 1 after
/// the header; an empty file is a parse error at row 0.
pub fn load_csv(path: &Path, roles: &ColumnRoles) -> Result<Dataset> {
    roles.validate()?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text, roles)
}

pub fn parse_csv(text: &str, roles: &ColumnRoles) -> Result<Dataset> {
    roles.validate()?;
    if text.trim().is_empty() {
        return Err(parse_error(0, "", "empty input"));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> =
        rdr.headers().map_err(|e| parse_error(0, "", e.to_string()))?.iter().map(String::from).collect();
    let index = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let wanted = roles.all();
    let idx: Vec<usize> = wanted.iter().map(|c| index(c)).collect::<Result<_>>()?;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| parse_error(row, "", e.to_string()))?;
        for (k, &j) in idx.iter().enumerate() {
            let cell = rec.get(j).ok_or_else(|| parse_error(row, wanted[k], "missing cell"))?;
            let v: f64 = cell.parse().map_err(|_| parse_error(row, wanted[k], format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(row, wanted[k], format!("`{cell}` is not finite")));
            }
            cols[k].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(parse_error(0, "", "no data rows"));
    }
    let nz = roles.z.len();
    let mut it = cols.into_iter();
    let (y, a, w) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    let z: Vec<Vec<f64>> = it.by_ref().take(nz).collect();
    let x: Vec<Vec<f64>> = it.collect();
    let names = ColumnNames {
        y: roles.y.clone(),
        a: roles.a.clone(),
        w: roles.w.clone(),
        z: roles.z.clone(),
        x: roles.x.clone(),
    };
    let ds = Dataset::new(y, a, w, z, x)?.with_names(names)?;
    if let Some(l) = roles.y_link {
        check_link(&ds, Var::Y, l)?;
    }
    if let Some(l) = roles.w_link {
        check_link(&ds, Var::W, l)?;
    }
    Ok(ds)
}

fn check_link(ds: &Dataset, var: Var, link: OutcomeLink) -> Result<()> {
    let col = ds.column(var).expect("role column");
    let name = ds.var_name(var);
    let bad = |i: usize, what: &str| {
        Err(Error::InvalidData(format!("column `{name}` must be {what} for the {link} link; row {} has {}", i + 1, col[i])))
    };
    match link {
        OutcomeLink::Identity => Ok(()),
        OutcomeLink::Log => match col.iter().position(|&v| v < 0.0) {
            Some(i) => bad(i, "nonnegative"),
            None => Ok(()),
        },
        OutcomeLink::Logit => match col.iter().position(|&v| v != 0.0 && v != 1.0) {
            Some(i) => bad(i, "0/1"),
            None => Ok(()),
        },
        OutcomeLink::Multinomial => ds.category_levels(var).map(|_| ()),
    }
}
