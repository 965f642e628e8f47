//! Regression samples and their CSV representation.
//!
//! Columns are `x1..xd, y` followed optionally by `m_true, eps_true`, with a
//! header row and no index column. Simulation truth, when present, must
//! satisfy `y = m_true + eps_true` exactly in floating point.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub m: Vec<f64>,
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    /// Row-major `n x d` covariates.
    x: Vec<f64>,
    y: Vec<f64>,
    truth: Option<Truth>,
}

impl Dataset {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::build(dim, x, y, None)
    }

    pub fn with_truth(dim: usize, x: Vec<f64>, m: Vec<f64>, eps: Vec<f64>) -> Result<Self> {
        if m.len() != eps.len() {
            return Err(Error::DimensionError {
                expected: m.len(),
                got: eps.len(),
            });
        }
        let y = m.iter().zip(&eps).map(|(a, b)| a + b).collect();
        Self::build(dim, x, y, Some(Truth { m, eps }))
    }

    fn build(dim: usize, x: Vec<f64>, y: Vec<f64>, truth: Option<Truth>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if x.len() != y.len() * dim {
            return Err(Error::DimensionError {
                expected: y.len() * dim,
                got: x.len(),
            });
        }
        if y.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "at least 2 observations are required, got {}",
                y.len()
            )));
        }
        let data = Self { dim, x, y, truth };
        data.check_values()?;
        Ok(data)
    }

    fn check_values(&self) -> Result<()> {
        for i in 0..self.len() {
            let line = i as u64 + 2;
            if self.x(i).iter().any(|v| !v.is_finite()) || !self.y[i].is_finite() {
                return Err(Error::InvalidData {
                    line,
                    message: format!("non-finite value in observation {}", i + 1),
                });
            }
            if let Some(t) = &self.truth {
                if !t.m[i].is_finite() || !t.eps[i].is_finite() {
                    return Err(Error::InvalidData {
                        line,
                        message: format!("non-finite truth in observation {}", i + 1),
                    });
                }
                if t.m[i] + t.eps[i] != self.y[i] {
                    return Err(Error::InvalidData {
                        line,
                        message: format!(
                            "y != m_true + eps_true in observation {}",
                            i + 1
                        ),
                    });
                }
            }
        }
        if let Some(t) = &self.truth {
            if t.m.len() != self.len() {
                return Err(Error::DimensionError {
                    expected: self.len(),
                    got: t.m.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_ref()
    }

    pub fn require_truth(&self) -> Result<&Truth> {
        self.truth.as_ref().ok_or(Error::MissingTruth)
    }

    /// Same covariates with new errors, `y = m + eps`.
    pub fn with_errors(&self, eps: Vec<f64>) -> Result<Self> {
        let m = self.require_truth()?.m.clone();
        Self::with_truth(self.dim, self.x.clone(), m, eps)
    }

    /// Same covariates with responses replaced; simulation truth is dropped.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        Self::build(self.dim, self.x.clone(), y, None)
    }

    /// Observation order permuted: row `k` of the result is row `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(self.x.len());
        for &p in perm {
            x.extend_from_slice(self.x(p));
        }
        let pick = |v: &[f64]| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        match &self.truth {
            Some(t) => Self::with_truth(self.dim, x, pick(&t.m), pick(&t.eps)),
            None => Self::new(self.dim, x, pick(&self.y)),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let layout = Layout::from_headers(&headers)?;

        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut m = Vec::new();
        let mut eps = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != headers.len() {
                return Err(Error::InvalidData {
                    line,
                    message: format!(
                        "expected {} fields, found {}",
                        headers.len(),
                        record.len()
                    ),
                });
            }
            let field = |k: usize| -> Result<f64> {
                let raw = &record[k];
                let v: f64 = raw.parse().map_err(|_| Error::InvalidData {
                    line,
                    message: format!("column '{}': cannot parse '{raw}'", &headers[k]),
                })?;
                if !v.is_finite() {
                    return Err(Error::InvalidData {
                        line,
                        message: format!("column '{}': non-finite value '{raw}'", &headers[k]),
                    });
                }
                Ok(v)
            };
            for &k in &layout.x {
                x.push(field(k)?);
            }
            y.push(field(layout.y)?);
            if let Some((km, ke)) = layout.truth {
                m.push(field(km)?);
                eps.push(field(ke)?);
            }
        }
        let dim = layout.x.len();
        let truth = layout.truth.map(|_| Truth { m, eps });
        Self::build(dim, x, y, truth)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        if self.truth.is_some() {
            header.push("m_true".into());
            header.push("eps_true".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.x(i).iter().map(|v| fmt_full(*v)).collect();
            row.push(fmt_full(self.y[i]));
            if let Some(t) = &self.truth {
                row.push(fmt_full(t.m[i]));
                row.push(fmt_full(t.eps[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits; round-trips every finite `f64`.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// 6 significant digits, positional for moderate magnitudes.
pub fn fmt_human(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        format!("{v:.*}", (5 - exp) as usize)
    } else {
        format!("{v:.5e}")
    }
}

struct Layout {
    x: Vec<usize>,
    y: usize,
    truth: Option<(usize, usize)>,
}

impl Layout {
    fn from_headers(headers: &csv::StringRecord) -> Result<Self> {
        let bad = |message: String| Error::InvalidData { line: 1, message };
        let pos = |name: &str| headers.iter().position(|h| h == name);
        let mut x = Vec::new();
        while let Some(k) = pos(&format!("x{}", x.len() + 1)) {
            x.push(k);
        }
        if x.is_empty() {
            return Err(bad("header must contain x1".into()));
        }
        let y = pos("y").ok_or_else(|| bad("header must contain y".into()))?;
        let truth = match (pos("m_true"), pos("eps_true")) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(bad("m_true and eps_true must appear together".into())),
        };
        let known = x.len() + 1 + if truth.is_some() { 2 } else { 0 };
        if known != headers.len() {
            let extra: Vec<&str> = headers
                .iter()
                .filter(|h| {
                    !(*h == "y"
                        || *h == "m_true"
                        || *h == "eps_true"
                        || (h.starts_with('x') && h[1..].parse::<usize>().is_ok_and(|j| j >= 1 && j <= x.len())))
                })
                .collect();
            return Err(bad(format!("unexpected columns: {}", extra.join(", "))));
        }
        Ok(Self { x, y, truth })
    }
}
