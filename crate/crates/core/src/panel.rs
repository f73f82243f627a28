//! Market-level panels of prices and firm outputs, and their CSV form.

use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Observed `(P_t, Q_1t, …, Q_It)` for `t = 1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub t: Vec<i64>,
    pub p: Vec<f64>,
    /// One row of firm outputs per market.
    pub q: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(p: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        let t = (1..=p.len() as i64).collect();
        Self::with_index(t, p, q)
    }

    pub fn with_index(t: Vec<i64>, p: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        if p.len() != q.len() || t.len() != p.len() {
            return Err(invalid(
                "price, quantity and index columns differ in length",
            ));
        }
        if let Some(first) = q.first() {
            let n = first.len();
            if n == 0 || q.iter().any(|r| r.len() != n) {
                return Err(invalid(
                    "every market needs the same positive number of firms",
                ));
            }
        }
        if p.iter().chain(q.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(invalid("panel contains non-finite values"));
        }
        Ok(Self { t, p, q })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn n_firms(&self) -> usize {
        self.q.first().map_or(0, |r| r.len())
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.q.iter().map(|r| r[i]).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.q.iter().map(|r| r.iter().sum()).collect()
    }

    /// `Q⁺_{-i}` in every market.
    pub fn rival_totals(&self, i: usize) -> Vec<f64> {
        self.q
            .iter()
            .map(|r| r.iter().sum::<f64>() - r[i])
            .collect()
    }

    /// Demand shock implied by a slope: `P + β Q⁺`.
    pub fn demand_shocks(&self, beta: f64) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(p, r)| p + beta * r.iter().sum::<f64>())
            .collect()
    }

    pub fn slice(&self, start: usize, len: usize) -> Panel {
        let end = start + len;
        Panel {
            t: self.t[start..end].to_vec(),
            p: self.p[start..end].to_vec(),
            q: self.q[start..end].to_vec(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string(), "p".to_string()];
        header.extend((1..=self.n_firms()).map(|i| format!("q{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![self.t[k].to_string(), fmt(self.p[k])];
            rec.extend(self.q[k].iter().map(|&x| fmt(x)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        check_header(&header, &["t", "p"], "q")?;
        let (mut t, mut p, mut q) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let vals = parse_record(&rec)?;
            t.push(vals[0] as i64);
            p.push(vals[1]);
            q.push(vals[2..].to_vec());
        }
        Self::with_index(t, p, q)
    }
}

/// Latent shocks behind a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraws {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

impl LatentDraws {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = self.v.first().map_or(0, |r| r.len());
        let mut header = vec!["t".to_string(), "u".to_string(), "w".to_string()];
        header.extend((1..=n).map(|i| format!("v{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![(k + 1).to_string(), fmt(self.u[k]), fmt(self.w[k])];
            rec.extend(self.v[k].iter().map(|&x| fmt(x)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        check_header(&header, &["t", "u", "w"], "v")?;
        let (mut u, mut w, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let vals = parse_record(&rec?)?;
            u.push(vals[1]);
            w.push(vals[2]);
            v.push(vals[3..].to_vec());
        }
        Ok(Self { u, w, v })
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn check_header(h: &csv::StringRecord, fixed: &[&str], prefix: &str) -> Result<()> {
    let ok = h.len() > fixed.len()
        && fixed.iter().enumerate().all(|(k, name)| &h[k] == *name)
        && (fixed.len()..h.len()).all(|k| h[k] == format!("{prefix}{}", k - fixed.len() + 1));
    if ok {
        Ok(())
    } else {
        Err(invalid(format!(
            "unexpected CSV header {:?}; expected {},{prefix}1,…",
            h.iter().collect::<Vec<_>>(),
            fixed.join(",")
        )))
    }
}

fn parse_record(rec: &csv::StringRecord) -> Result<Vec<f64>> {
    rec.iter()
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number {s:?}: {e}")))
        })
        .collect()
}
