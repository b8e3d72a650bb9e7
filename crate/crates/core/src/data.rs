//! Datasets, regression terms and design matrices.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names for every role in a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub y: String,
    pub a: String,
    pub w: String,
    pub z: Vec<String>,
    pub x: Vec<String>,
}

impl ColumnNames {
    /// `y, a, w`, then `z` (or `z1, z2, ...`) and `x1, x2, ...`.
    pub fn default_for(pz: usize, px: usize) -> Self {
        let z = if pz == 1 {
            vec!["z".to_string()]
        } else {
            (1..=pz).map(|j| format!("z{j}")).collect()
        };
        ColumnNames {
            y: "y".into(),
            a: "a".into(),
            w: "w".into(),
            z,
            x: (1..=px).map(|j| format!("x{j}")).collect(),
        }
    }
}

/// Observed data `(Y, A, W, Z, X)` plus an optional latent `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    a: Vec<f64>,
    w: Vec<f64>,
    z: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    u: Option<Vec<f64>>,
    names: ColumnNames,
}

fn check_column(name: &str, col: &[f64], n: usize) -> Result<()> {
    if col.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "column `{name}` has {} rows, expected {n}",
            col.len()
        )));
    }
    if let Some(i) = col.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "non-finite value in column `{name}` at row {}",
            i + 1
        )));
    }
    Ok(())
}

impl Dataset {
    pub fn new(y: Vec<f64>, a: Vec<f64>, w: Vec<f64>, z: Vec<Vec<f64>>, x: Vec<Vec<f64>>) -> Result<Self> {
        let names = ColumnNames::default_for(z.len(), x.len());
        let d = Dataset { y, a, w, z, x, u: None, names };
        d.validate()?;
        Ok(d)
    }

    pub fn with_names(mut self, names: ColumnNames) -> Result<Self> {
        if names.z.len() != self.z.len() || names.x.len() != self.x.len() {
            return Err(Error::DimensionMismatch("column name count does not match data".into()));
        }
        let mut seen = HashSet::new();
        for n in [&names.y, &names.a, &names.w].into_iter().chain(&names.z).chain(&names.x) {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidData(format!("column `{n}` assigned to more than one role")));
            }
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_latent(mut self, u: Vec<f64>) -> Result<Self> {
        check_column("u", &u, self.n())?;
        self.u = Some(u);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        check_column(&self.names.y, &self.y, n)?;
        check_column(&self.names.a, &self.a, n)?;
        check_column(&self.names.w, &self.w, n)?;
        for (c, name) in self.z.iter().zip(&self.names.z) {
            check_column(name, c, n)?;
        }
        for (c, name) in self.x.iter().zip(&self.names.x) {
            check_column(name, c, n)?;
        }
        if let Some(u) = &self.u {
            check_column("u", u, n)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn a(&self) -> &[f64] {
        &self.a
    }
    pub fn w(&self) -> &[f64] {
        &self.w
    }
    pub fn z(&self) -> &[Vec<f64>] {
        &self.z
    }
    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }
    pub fn u(&self) -> Option<&[f64]> {
        self.u.as_deref()
    }
    pub fn names(&self) -> &ColumnNames {
        &self.names
    }

    pub fn column(&self, var: Var) -> Option<&[f64]> {
        match var {
            Var::Y => Some(&self.y),
            Var::A => Some(&self.a),
            Var::W => Some(&self.w),
            Var::U => self.u.as_deref(),
            Var::Z(j) => self.z.get(j).map(|c| c.as_slice()),
            Var::X(j) => self.x.get(j).map(|c| c.as_slice()),
            Var::S | Var::YLevel(_) | Var::WLevel(_) => None,
        }
    }

    /// Rows selected by index (with repetition), e.g. for a bootstrap resample.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let pick = |c: &[f64]| idx.iter().map(|&i| c[i]).collect::<Vec<_>>();
        Dataset {
            y: pick(&self.y),
            a: pick(&self.a),
            w: pick(&self.w),
            z: self.z.iter().map(|c| pick(c)).collect(),
            x: self.x.iter().map(|c| pick(c)).collect(),
            u: self.u.as_ref().map(|c| pick(c)),
            names: self.names.clone(),
        }
    }

    /// Replace the proxy column (same length), keeping everything else.
    pub fn with_w(mut self, w: Vec<f64>) -> Result<Self> {
        check_column(&self.names.w, &w, self.n())?;
        self.w = w;
        Ok(self)
    }

    /// Replace the outcome column (same length), keeping everything else.
    pub fn with_y(mut self, y: Vec<f64>) -> Result<Self> {
        check_column(&self.names.y, &y, self.n())?;
        self.y = y;
        Ok(self)
    }

    /// Number of categories `K + 1` of a category-coded column; every value
    /// must be an integer in `0..=K` and every level must be observed.
    pub fn category_levels(&self, var: Var) -> Result<usize> {
        let (col, name) = match var {
            Var::Y => (&self.y, &self.names.y),
            Var::W => (&self.w, &self.names.w),
            _ => return Err(Error::InvalidSpec(format!("{var:?} cannot be category-coded"))),
        };
        category_levels(col, name)
    }

    /// Resolve a column or role name to a variable.
    pub fn resolve(&self, name: &str) -> Result<Var> {
        let n = &self.names;
        if name == n.y {
            return Ok(Var::Y);
        }
        if name == n.a {
            return Ok(Var::A);
        }
        if name == n.w {
            return Ok(Var::W);
        }
        if let Some(j) = n.z.iter().position(|c| c == name) {
            return Ok(Var::Z(j));
        }
        if let Some(j) = n.x.iter().position(|c| c == name) {
            return Ok(Var::X(j));
        }
        match name {
            "u" | "U" if self.u.is_some() => Ok(Var::U),
            "S" => Ok(Var::S),
            _ => Err(Error::UnknownColumn(name.to_string())),
        }
    }

    pub fn var_name(&self, var: Var) -> String {
        match var {
            Var::Y => self.names.y.clone(),
            Var::A => self.names.a.clone(),
            Var::W => self.names.w.clone(),
            Var::U => "u".into(),
            Var::S => "S".into(),
            Var::Z(j) => self.names.z.get(j).cloned().unwrap_or_else(|| format!("z{}", j + 1)),
            Var::X(j) => self.names.x.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1)),
            Var::YLevel(t) => format!("{}={t}", self.names.y),
            Var::WLevel(k) => format!("{}={k}", self.names.w),
        }
    }
}

pub(crate) fn category_levels(col: &[f64], name: &str) -> Result<usize> {
    let mut max = 0usize;
    for (i, &v) in col.iter().enumerate() {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::InvalidData(format!(
                "column `{name}` must hold category codes 0..K; found {v} at row {}",
                i + 1
            )));
        }
        max = max.max(v as usize);
    }
    let mut seen = vec![false; max + 1];
    for &v in col {
        seen[v as usize] = true;
    }
    if let Some(level) = seen.iter().position(|s| !s) {
        return Err(Error::UnobservedLevel { column: name.to_string(), level });
    }
    Ok(max + 1)
}

/// A variable that can appear as a factor in a regression term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    Y,
    A,
    W,
    U,
    /// The control variable, supplied when the design is built.
    S,
    Z(usize),
    X(usize),
    /// Indicator `Y == t`.
    YLevel(u32),
    /// Indicator `W == k`.
    WLevel(u32),
}

/// A product of one or more variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term(pub Vec<Var>);

impl Term {
    pub fn var(v: Var) -> Self {
        Term(vec![v])
    }

    pub fn product(vars: &[Var]) -> Self {
        Term(vars.to_vec())
    }

    pub fn factors(&self) -> &[Var] {
        &self.0
    }

    fn key(&self) -> Vec<Var> {
        let mut k = self.0.clone();
        k.sort_unstable();
        k
    }

    pub fn is(&self, v: Var) -> bool {
        self.0.len() == 1 && self.0[0] == v
    }

    pub fn contains(&self, v: Var) -> bool {
        self.0.contains(&v)
    }

    pub fn name(&self, ds: &Dataset) -> String {
        self.0.iter().map(|&v| ds.var_name(v)).collect::<Vec<_>>().join(":")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v:?}")).collect();
        f.write_str(&parts.join(":"))
    }
}

/// Ordered regression terms; the intercept is always included.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TermSpec {
    pub terms: Vec<Term>,
}

impl TermSpec {
    pub fn new(terms: Vec<Term>) -> Self {
        TermSpec { terms }
    }

    /// Parse names such as `["a", "z", "a:z"]` against the dataset's columns.
    pub fn parse(names: &[&str], ds: &Dataset) -> Result<Self> {
        let mut terms = Vec::with_capacity(names.len());
        for name in names {
            let vars = name
                .split(':')
                .map(|f| ds.resolve(f.trim()))
                .collect::<Result<Vec<_>>>()?;
            terms.push(Term(vars));
        }
        let spec = TermSpec { terms };
        spec.check_duplicates(ds)?;
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, t: &Term) -> bool {
        let k = t.key();
        self.terms.iter().any(|s| s.key() == k)
    }

    /// Append a term unless an equivalent one is present.
    pub fn push_unique(&mut self, t: Term) {
        if !self.contains(&t) {
            self.terms.push(t);
        }
    }

    pub fn position(&self, t: &Term) -> Option<usize> {
        let k = t.key();
        self.terms.iter().position(|s| s.key() == k)
    }

    fn check_duplicates(&self, ds: &Dataset) -> Result<()> {
        let mut seen = HashSet::new();
        for t in &self.terms {
            if !seen.insert(t.key()) {
                return Err(Error::DuplicateTerm(t.name(ds)));
            }
        }
        Ok(())
    }

    pub fn names(&self, ds: &Dataset) -> Vec<String> {
        std::iter::once("(Intercept)".to_string())
            .chain(self.terms.iter().map(|t| t.name(ds)))
            .collect()
    }
}

/// Values substituted for variables while a design is built, plus an optional
/// control-variable column.
#[derive(Debug, Clone, Copy, Default)]
pub struct DesignContext<'a> {
    pub overrides: &'a [(Var, f64)],
    pub s: Option<&'a [f64]>,
}

/// A design matrix with named columns; column 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub matrix: DMatrix<f64>,
    pub names: Vec<String>,
}

impl Design {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `X b (+ offset)`.
    pub fn linear_predictor(&self, coef: &[f64], offset: Option<&[f64]>) -> Result<Vec<f64>> {
        if coef.len() != self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} design columns",
                coef.len(),
                self.ncols()
            )));
        }
        let n = self.nrows();
        let mut eta = match offset {
            Some(o) if o.len() != n => {
                return Err(Error::DimensionMismatch(format!("offset has {} rows, expected {n}", o.len())))
            }
            Some(o) => o.to_vec(),
            None => vec![0.0; n],
        };
        for (j, &b) in coef.iter().enumerate() {
            let col = self.matrix.column(j);
            for (e, x) in eta.iter_mut().zip(col.iter()) {
                *e += b * x;
            }
        }
        Ok(eta)
    }
}

/// Build `[1, terms...]`; product terms are elementwise products.
pub fn build_design(ds: &Dataset, spec: &TermSpec) -> Result<Design> {
    build_design_with(ds, spec, DesignContext::default())
}

/// Like [`build_design`], with variable overrides applied before products are
/// formed. Overriding `Y` (or `W`) also fixes the corresponding level indicators.
pub fn build_design_with(ds: &Dataset, spec: &TermSpec, ctx: DesignContext<'_>) -> Result<Design> {
    spec.check_duplicates(ds)?;
    let n = ds.n();
    if let Some(s) = ctx.s {
        if s.len() != n {
            return Err(Error::DimensionMismatch(format!("control variable has {} rows, expected {n}", s.len())));
        }
    }
    let p = spec.len() + 1;
    let mut m = DMatrix::<f64>::zeros(n, p);
    m.column_mut(0).fill(1.0);
    let lookup = |v: Var| ctx.overrides.iter().find(|(o, _)| *o == v).map(|&(_, x)| x);
    for (j, term) in spec.terms.iter().enumerate() {
        let mut col = vec![1.0; n];
        for &v in term.factors() {
            if let Some(c) = lookup(v) {
                col.iter_mut().for_each(|x| *x *= c);
                continue;
            }
            match v {
                Var::S => {
                    let s = ctx.s.ok_or_else(|| Error::UnknownColumn("S (control variable not supplied)".into()))?;
                    col.iter_mut().zip(s).for_each(|(x, &s)| *x *= s);
                }
                Var::YLevel(t) | Var::WLevel(t) => {
                    let base = if matches!(v, Var::YLevel(_)) { Var::Y } else { Var::W };
                    match lookup(base) {
                        Some(c) => {
                            let ind = if c == t as f64 { 1.0 } else { 0.0 };
                            col.iter_mut().for_each(|x| *x *= ind);
                        }
                        None => {
                            let src = ds.column(base).expect("role columns always exist");
                            col.iter_mut()
                                .zip(src)
                                .for_each(|(x, &s)| *x *= if s == t as f64 { 1.0 } else { 0.0 });
                        }
                    }
                }
                _ => {
                    let src = ds.column(v).ok_or_else(|| Error::UnknownColumn(ds.var_name(v)))?;
                    col.iter_mut().zip(src).for_each(|(x, &s)| *x *= s);
                }
            }
        }
        m.column_mut(j + 1).copy_from_slice(&col);
    }
    Ok(Design { matrix: m, names: spec.names(ds) })
}

/// The 15-row worked example shipped with the crate (`y, a, z, w`).
pub fn demo_dataset() -> Dataset {
    let y = [1., 0., 1., 0., 1., 1., 0., 1., 1., 1., 1., 1., 1., 1., 0.];
    let a = [0., 0., 1., 0., 1., 1., 1., 0., 1., 0., 1., 1., 1., 1., 0.];
    let z = [3., 4., 5., 6., 1., 2., 4., 1., 1., 4., 3., 7., 1., 3., 3.];
    let w = [1., 0., 0., 0., 1., 1., 1., 0., 0., 1., 0., 1., 0., 1., 1.];
    Dataset::new(y.to_vec(), a.to_vec(), w.to_vec(), vec![z.to_vec()], vec![]).expect("fixture is valid")
}
