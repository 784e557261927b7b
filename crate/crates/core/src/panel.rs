//! In-memory data model for binary and multinomial panels, CSV ingestion and
//! validation.
//!
//! Outcome paths store the `p` initial conditions in the same array as the
//! modeled periods: index 0 corresponds to `t = 1 - p`, so lag look-ups during
//! group enumeration are plain index arithmetic. Covariates exist only for
//! `t = 1..T`.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serde adapters exposing nalgebra containers as plain (nested) JSON arrays.
pub(crate) mod serde_shims {
    pub(crate) mod dvec {
        use nalgebra::DVector;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
            Vec::<f64>::deserialize(d).map(DVector::from_vec)
        }
    }

    pub(crate) mod dvec_list {
        use nalgebra::DVector;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Vec<DVector<f64>>, D::Error> {
            Ok(Vec::<Vec<f64>>::deserialize(d)?
                .into_iter()
                .map(DVector::from_vec)
                .collect())
        }
    }

    pub(crate) mod dmat {
        use nalgebra::DMatrix;
        use serde::de::Error as _;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<Vec<f64>> = (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
                .collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
            let rows = Vec::<Vec<f64>>::deserialize(d)?;
            let nrows = rows.len();
            let ncols = rows.first().map(Vec::len).unwrap_or(0);
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(D::Error::custom("matrix rows must have equal length"));
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
        }
    }
}

/// Balanced binary panel with AR order `p`.
///
/// Each individual carries `T + p` outcomes covering `t = 1-p .. T` and `T`
/// covariate vectors of common length `K` for `t = 1 .. T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub n: usize,
    pub t_periods: usize,
    pub p: usize,
    pub k: usize,
    pub ids: Vec<i64>,
    /// `outcomes[i][j]` is `y_{i,t}` with `t = j + 1 - p`; values in {0, 1}.
    pub outcomes: Vec<Vec<u8>>,
    /// `covariates[i][t - 1]` is `x_{it}`, length `K`.
    pub covariates: Vec<Vec<Vec<f64>>>,
}

impl PanelDataset {
    /// Outcome `y_{it}` for `t` in `1-p ..= T`.
    pub fn outcome(&self, i: usize, t: i64) -> u8 {
        let off = (t + self.p as i64 - 1) as usize;
        self.outcomes[i][off]
    }

    /// Covariate vector `x_{it}` for `t` in `1 ..= T`.
    pub fn covariate(&self, i: usize, t: usize) -> &[f64] {
        &self.covariates[i][t - 1]
    }

    /// Structural validity diagnostics; empty iff all type invariants hold.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.n == 0 || self.n != self.outcomes.len() || self.n != self.covariates.len() {
            out.push(Diagnostic::CountMismatch);
            return out;
        }
        if self.t_periods < self.p + 2 {
            out.push(Diagnostic::IdentificationFailure {
                t: self.t_periods,
                p: self.p,
            });
        }
        for i in 0..self.n {
            if self.outcomes[i].len() != self.t_periods + self.p {
                out.push(Diagnostic::PathLengthMismatch { individual: i });
                continue;
            }
            for (j, &y) in self.outcomes[i].iter().enumerate() {
                if y > 1 {
                    out.push(Diagnostic::OutcomeOutOfRange {
                        individual: i,
                        t: j as i64 + 1 - self.p as i64,
                        value: y as i64,
                    });
                }
            }
            if self.covariates[i].len() != self.t_periods {
                out.push(Diagnostic::CovariatePathMismatch { individual: i });
                continue;
            }
            for (t0, x) in self.covariates[i].iter().enumerate() {
                if x.len() != self.k {
                    out.push(Diagnostic::CovariateLengthMismatch {
                        individual: i,
                        t: t0 + 1,
                    });
                }
            }
        }
        // All-equal initial conditions: gamma identification then rests on
        // within-panel lag variation alone; worth a warning, not an error.
        if self.n > 1 && out.is_empty() {
            let first = self.outcome(0, 0);
            if (0..self.n).all(|i| self.outcome(i, 0) == first) {
                out.push(Diagnostic::NoInitialVariation);
            }
        }
        out
    }
}

/// Balanced multinomial panel, AR(1), `M` alternatives labeled `1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnlPanelDataset {
    pub n: usize,
    pub t_periods: usize,
    pub m: usize,
    pub k: usize,
    pub ids: Vec<i64>,
    /// `outcomes[i][t]` is `y_{it}` for `t = 0 .. T`; values in {1, .., M}.
    pub outcomes: Vec<Vec<u8>>,
    /// `covariates[i][t - 1][l - 1]` is `x_{lit}`, length `K`.
    pub covariates: Vec<Vec<Vec<Vec<f64>>>>,
}

impl MnlPanelDataset {
    pub fn outcome(&self, i: usize, t: usize) -> u8 {
        self.outcomes[i][t]
    }

    pub fn covariate(&self, i: usize, t: usize, alt: usize) -> &[f64] {
        &self.covariates[i][t - 1][alt - 1]
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.n == 0 || self.n != self.outcomes.len() || self.n != self.covariates.len() {
            out.push(Diagnostic::CountMismatch);
            return out;
        }
        if self.t_periods < 3 {
            out.push(Diagnostic::IdentificationFailure {
                t: self.t_periods,
                p: 1,
            });
        }
        for i in 0..self.n {
            if self.outcomes[i].len() != self.t_periods + 1 {
                out.push(Diagnostic::PathLengthMismatch { individual: i });
                continue;
            }
            for (t, &y) in self.outcomes[i].iter().enumerate() {
                if y == 0 || y as usize > self.m {
                    out.push(Diagnostic::OutcomeOutOfRange {
                        individual: i,
                        t: t as i64,
                        value: y as i64,
                    });
                }
            }
            if self.covariates[i].len() != self.t_periods
                || self.covariates[i]
                    .iter()
                    .any(|per_t| per_t.len() != self.m || per_t.iter().any(|x| x.len() != self.k))
            {
                out.push(Diagnostic::CovariatePathMismatch { individual: i });
            }
        }
        out
    }
}

/// Structural validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    CountMismatch,
    PathLengthMismatch { individual: usize },
    OutcomeOutOfRange { individual: usize, t: i64, value: i64 },
    CovariatePathMismatch { individual: usize },
    CovariateLengthMismatch { individual: usize, t: usize },
    IdentificationFailure { t: usize, p: usize },
    /// All individuals share the same initial condition `y_0` (warning).
    NoInitialVariation,
}

impl Diagnostic {
    pub fn is_warning(&self) -> bool {
        matches!(self, Diagnostic::NoInitialVariation)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::CountMismatch => write!(f, "n disagrees with stored path counts"),
            Diagnostic::PathLengthMismatch { individual } => {
                write!(f, "individual {individual}: outcome path length mismatch")
            }
            Diagnostic::OutcomeOutOfRange {
                individual,
                t,
                value,
            } => write!(
                f,
                "individual {individual}: outcome {value} out of range at t = {t}"
            ),
            Diagnostic::CovariatePathMismatch { individual } => {
                write!(f, "individual {individual}: covariate path shape mismatch")
            }
            Diagnostic::CovariateLengthMismatch { individual, t } => write!(
                f,
                "individual {individual}: covariate length mismatch at t = {t}"
            ),
            Diagnostic::IdentificationFailure { t, p } => {
                write!(f, "T = {t} < p + 2 with p = {p}")
            }
            Diagnostic::NoInitialVariation => {
                write!(f, "warning: no variation in initial conditions y_0")
            }
        }
    }
}

/// Common parameters (beta, gamma) of the binary AR(p) model.
///
/// Packed order throughout the crate: `K` beta entries first, then `p` gamma
/// entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    #[serde(with = "serde_shims::dvec")]
    pub beta: DVector<f64>,
    #[serde(with = "serde_shims::dvec")]
    pub gamma: DVector<f64>,
}

impl ParameterVector {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self {
            beta: DVector::from_vec(beta),
            gamma: DVector::from_vec(gamma),
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len() + self.gamma.len()
    }

    pub fn pack(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.rows_mut(0, self.beta.len()).copy_from(&self.beta);
        v.rows_mut(self.beta.len(), self.gamma.len())
            .copy_from(&self.gamma);
        v
    }

    pub fn unpack(v: &DVector<f64>, k: usize, p: usize) -> Result<Self> {
        if v.len() != k + p {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                k + p,
                v.len()
            )));
        }
        Ok(Self {
            beta: v.rows(0, k).into_owned(),
            gamma: v.rows(k, p).into_owned(),
        })
    }
}

/// Free parameters of the multinomial AR(1) model under the identification
/// restrictions `gamma_{k1} = gamma_{1k} = 0` and `beta_1 = 0`.
///
/// `gamma[(k, l)]` is stored as a full `M x M` matrix whose first row and
/// column are structurally zero; only the `(M-1)^2` lower-right block is free.
/// Packed order: free gamma entries row-major (`k = 2..M`, `l = 2..M`), then
/// `beta_l` for `l = 2..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnlParameterVector {
    pub m: usize,
    pub k: usize,
    #[serde(with = "serde_shims::dmat")]
    pub gamma: DMatrix<f64>,
    #[serde(with = "serde_shims::dvec_list")]
    pub beta: Vec<DVector<f64>>,
}

impl MnlParameterVector {
    pub fn zeros(m: usize, k: usize) -> Self {
        Self {
            m,
            k,
            gamma: DMatrix::zeros(m, m),
            beta: (0..m).map(|_| DVector::zeros(k)).collect(),
        }
    }

    /// Count of free parameters: `(M-1)^2` feedback plus `(M-1) K` slope.
    pub fn free_dim(m: usize, k: usize) -> usize {
        (m - 1) * (m - 1) + (m - 1) * k
    }

    pub fn dim(&self) -> usize {
        Self::free_dim(self.m, self.k)
    }

    /// True iff the structural restrictions hold exactly.
    pub fn restrictions_hold(&self) -> bool {
        let m = self.m;
        if self.gamma.nrows() != m || self.gamma.ncols() != m || self.beta.len() != m {
            return false;
        }
        (0..m).all(|j| self.gamma[(0, j)] == 0.0 && self.gamma[(j, 0)] == 0.0)
            && self.beta[0].iter().all(|&b| b == 0.0)
            && self.beta.iter().all(|b| b.len() == self.k)
    }

    pub fn pack(&self) -> DVector<f64> {
        let m = self.m;
        let mut v = Vec::with_capacity(self.dim());
        for k in 1..m {
            for l in 1..m {
                v.push(self.gamma[(k, l)]);
            }
        }
        for l in 1..m {
            v.extend(self.beta[l].iter().copied());
        }
        DVector::from_vec(v)
    }

    pub fn unpack(v: &DVector<f64>, m: usize, k: usize) -> Result<Self> {
        if v.len() != Self::free_dim(m, k) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} free MNL parameters, got {}",
                Self::free_dim(m, k),
                v.len()
            )));
        }
        let mut out = Self::zeros(m, k);
        let mut idx = 0;
        for row in 1..m {
            for col in 1..m {
                out.gamma[(row, col)] = v[idx];
                idx += 1;
            }
        }
        for l in 1..m {
            for j in 0..k {
                out.beta[l][j] = v[idx];
                idx += 1;
            }
        }
        Ok(out)
    }
}

/// Which CSV schema to expect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Binary,
    Multinomial,
}

/// Either panel flavor, as produced by [`load_csv`].
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedPanel {
    Binary(PanelDataset),
    Multinomial(MnlPanelDataset),
}

#[derive(Debug, Clone)]
struct RawRow {
    id: i64,
    t: i64,
    y: i64,
    alt: Option<i64>,
    x: Vec<Option<f64>>,
    line: usize,
}

/// Load a long-format CSV panel; see the crate README for the exact layouts.
///
/// Binary: header `id,t,y,x1,..,xK` with `t` in `1-p ..= T`; rows with
/// `t <= 0` must leave the x columns empty. Multinomial: header
/// `id,t,y,alt,x1,..,xK` with one row per `(id, t, alt)` for `t >= 1` and a
/// single `alt = 0` row carrying the initial condition at `t = 0`.
pub fn load_csv(path: &Path, schema: Schema, p: usize) -> Result<LoadedPanel> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let (base_cols, has_alt) = match schema {
        Schema::Binary => {
            if cols.len() < 3 || cols[0] != "id" || cols[1] != "t" || cols[2] != "y" {
                return Err(Error::MalformedRow {
                    row: 0,
                    reason: "binary header must start with id,t,y".into(),
                });
            }
            (3, false)
        }
        Schema::Multinomial => {
            if cols.len() < 4
                || cols[0] != "id"
                || cols[1] != "t"
                || cols[2] != "y"
                || cols[3] != "alt"
            {
                return Err(Error::MalformedRow {
                    row: 0,
                    reason: "multinomial header must start with id,t,y,alt".into(),
                });
            }
            (4, true)
        }
    };
    let k = cols.len() - base_cols;
    for (j, name) in cols[base_cols..].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(Error::MalformedRow {
                row: 0,
                reason: format!("covariate column {} must be named x{}", j + 1, j + 1),
            });
        }
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let line = line + 1;
        if record.len() != cols.len() {
            return Err(Error::MalformedRow {
                row: line,
                reason: format!("expected {} columns, got {}", cols.len(), record.len()),
            });
        }
        let parse_int = |field: &str, name: &str| -> Result<i64> {
            field.trim().parse::<i64>().map_err(|_| Error::MalformedRow {
                row: line,
                reason: format!("non-integer {name} value {field:?}"),
            })
        };
        let id = parse_int(&record[0], "id")?;
        let t = parse_int(&record[1], "t")?;
        let y = parse_int(&record[2], "y")?;
        let alt = if has_alt {
            Some(parse_int(&record[3], "alt")?)
        } else {
            None
        };
        let mut x = Vec::with_capacity(k);
        for j in 0..k {
            let field = record[base_cols + j].trim();
            if field.is_empty() {
                x.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
                    row: line,
                    reason: format!("non-numeric covariate value {field:?}"),
                })?;
                x.push(Some(v));
            }
        }
        rows.push(RawRow {
            id,
            t,
            y,
            alt,
            x,
            line,
        });
    }

    match schema {
        Schema::Binary => assemble_binary(rows, p, k).map(LoadedPanel::Binary),
        Schema::Multinomial => {
            if p != 1 {
                return Err(Error::Config("multinomial panels require p = 1".into()));
            }
            assemble_mnl(rows, k).map(LoadedPanel::Multinomial)
        }
    }
}

fn assemble_binary(mut rows: Vec<RawRow>, p: usize, k: usize) -> Result<PanelDataset> {
    if rows.is_empty() {
        return Err(Error::InconsistentPanel("empty file".into()));
    }
    rows.sort_by_key(|r| (r.id, r.t));
    let t_max = rows.iter().map(|r| r.t).max().unwrap();
    if t_max < 1 {
        return Err(Error::InconsistentPanel("no modeled periods (t >= 1)".into()));
    }
    let t_periods = t_max as usize;
    if t_periods < p + 2 {
        return Err(Error::IdentificationError { t: t_periods, p });
    }
    let t_min = 1 - p as i64;

    let mut ids = Vec::new();
    let mut outcomes = Vec::new();
    let mut covariates = Vec::new();
    let mut idx = 0;
    while idx < rows.len() {
        let id = rows[idx].id;
        let end = rows[idx..]
            .iter()
            .position(|r| r.id != id)
            .map(|o| idx + o)
            .unwrap_or(rows.len());
        let chunk = &rows[idx..end];
        if chunk.len() != t_periods + p {
            return Err(Error::InconsistentPanel(format!(
                "id {id}: expected {} rows covering t = {t_min}..{t_max}, got {}",
                t_periods + p,
                chunk.len()
            )));
        }
        let mut path = Vec::with_capacity(t_periods + p);
        let mut xs = Vec::with_capacity(t_periods);
        for (j, r) in chunk.iter().enumerate() {
            let expected_t = t_min + j as i64;
            if r.t != expected_t {
                return Err(Error::InconsistentPanel(format!(
                    "id {id}: missing or duplicate row for t = {expected_t}"
                )));
            }
            if r.y < 0 || r.y > 1 {
                return Err(Error::MalformedRow {
                    row: r.line,
                    reason: format!("binary outcome must be 0 or 1, got {}", r.y),
                });
            }
            path.push(r.y as u8);
            if r.t <= 0 {
                if r.x.iter().any(|v| v.is_some()) {
                    return Err(Error::MalformedRow {
                        row: r.line,
                        reason: "rows with t <= 0 must have empty x columns".into(),
                    });
                }
            } else {
                let mut x = Vec::with_capacity(k);
                for (j, v) in r.x.iter().enumerate() {
                    match v {
                        Some(v) => x.push(*v),
                        None => {
                            return Err(Error::MalformedRow {
                                row: r.line,
                                reason: format!("missing covariate x{} at t = {}", j + 1, r.t),
                            })
                        }
                    }
                }
                xs.push(x);
            }
        }
        ids.push(id);
        outcomes.push(path);
        covariates.push(xs);
        idx = end;
    }

    Ok(PanelDataset {
        n: ids.len(),
        t_periods,
        p,
        k,
        ids,
        outcomes,
        covariates,
    })
}

fn assemble_mnl(mut rows: Vec<RawRow>, k: usize) -> Result<MnlPanelDataset> {
    if rows.is_empty() {
        return Err(Error::InconsistentPanel("empty file".into()));
    }
    rows.sort_by_key(|r| (r.id, r.t, r.alt));
    let t_max = rows.iter().map(|r| r.t).max().unwrap();
    if t_max < 3 {
        return Err(Error::IdentificationError {
            t: t_max.max(0) as usize,
            p: 1,
        });
    }
    let t_periods = t_max as usize;
    let m = rows
        .iter()
        .filter_map(|r| r.alt)
        .max()
        .unwrap_or(0);
    if m < 2 {
        return Err(Error::InconsistentPanel(
            "multinomial panel needs at least 2 alternatives".into(),
        ));
    }
    let m = m as usize;

    let mut ids = Vec::new();
    let mut outcomes = Vec::new();
    let mut covariates = Vec::new();
    let mut idx = 0;
    while idx < rows.len() {
        let id = rows[idx].id;
        let end = rows[idx..]
            .iter()
            .position(|r| r.id != id)
            .map(|o| idx + o)
            .unwrap_or(rows.len());
        let chunk = &rows[idx..end];
        let expected = 1 + t_periods * m;
        if chunk.len() != expected {
            return Err(Error::InconsistentPanel(format!(
                "id {id}: expected {expected} rows, got {}",
                chunk.len()
            )));
        }
        let check_y = |r: &RawRow| -> Result<u8> {
            if r.y < 1 || r.y > m as i64 {
                return Err(Error::MalformedRow {
                    row: r.line,
                    reason: format!("outcome must be in 1..={m}, got {}", r.y),
                });
            }
            Ok(r.y as u8)
        };
        let head = &chunk[0];
        if head.t != 0 || head.alt != Some(0) {
            return Err(Error::InconsistentPanel(format!(
                "id {id}: missing the single alt = 0 row at t = 0"
            )));
        }
        if head.x.iter().any(|v| v.is_some()) {
            return Err(Error::MalformedRow {
                row: head.line,
                reason: "the t = 0 row must have empty x columns".into(),
            });
        }
        let mut path = vec![check_y(head)?];
        let mut xs = Vec::with_capacity(t_periods);
        let mut pos = 1;
        for t in 1..=t_periods {
            let mut per_alt = Vec::with_capacity(m);
            let mut y_t = None;
            for alt in 1..=m {
                let r = &chunk[pos];
                pos += 1;
                if r.t != t as i64 || r.alt != Some(alt as i64) {
                    return Err(Error::InconsistentPanel(format!(
                        "id {id}: missing row for (t = {t}, alt = {alt})"
                    )));
                }
                let y = check_y(r)?;
                match y_t {
                    None => y_t = Some(y),
                    Some(prev) if prev != y => {
                        return Err(Error::MalformedRow {
                            row: r.line,
                            reason: format!("inconsistent y across alt rows at t = {t}"),
                        })
                    }
                    _ => {}
                }
                let mut x = Vec::with_capacity(k);
                for (j, v) in r.x.iter().enumerate() {
                    match v {
                        Some(v) => x.push(*v),
                        None => {
                            return Err(Error::MalformedRow {
                                row: r.line,
                                reason: format!("missing covariate x{} at t = {t}", j + 1),
                            })
                        }
                    }
                }
                per_alt.push(x);
            }
            path.push(y_t.unwrap());
            xs.push(per_alt);
        }
        ids.push(id);
        outcomes.push(path);
        covariates.push(xs);
        idx = end;
    }

    Ok(MnlPanelDataset {
        n: ids.len(),
        t_periods,
        m,
        k,
        ids,
        outcomes,
        covariates,
    })
}

/// Write a binary panel in the long CSV format accepted by [`load_csv`].
pub fn write_csv(ds: &PanelDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "t".to_string(), "y".to_string()];
    for j in 1..=ds.k {
        header.push(format!("x{j}"));
    }
    w.write_record(&header)?;
    for i in 0..ds.n {
        for t in (1 - ds.p as i64)..=(ds.t_periods as i64) {
            let mut rec = vec![
                ds.ids[i].to_string(),
                t.to_string(),
                ds.outcome(i, t).to_string(),
            ];
            if t >= 1 {
                for v in ds.covariate(i, t as usize) {
                    rec.push(format!("{v}"));
                }
            } else {
                rec.extend(std::iter::repeat(String::new()).take(ds.k));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a multinomial panel in the long CSV format accepted by [`load_csv`].
pub fn write_csv_mnl(ds: &MnlPanelDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "id".to_string(),
        "t".to_string(),
        "y".to_string(),
        "alt".to_string(),
    ];
    for j in 1..=ds.k {
        header.push(format!("x{j}"));
    }
    w.write_record(&header)?;
    for i in 0..ds.n {
        let mut rec = vec![
            ds.ids[i].to_string(),
            "0".to_string(),
            ds.outcome(i, 0).to_string(),
            "0".to_string(),
        ];
        rec.extend(std::iter::repeat(String::new()).take(ds.k));
        w.write_record(&rec)?;
        for t in 1..=ds.t_periods {
            for alt in 1..=ds.m {
                let mut rec = vec![
                    ds.ids[i].to_string(),
                    t.to_string(),
                    ds.outcome(i, t).to_string(),
                    alt.to_string(),
                ];
                for v in ds.covariate(i, t, alt) {
                    rec.push(format!("{v}"));
                }
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
