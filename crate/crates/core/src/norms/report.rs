use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Process exit code for a verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Inconclusive => 2,
            Verdict::Fail => 3,
        }
    }

    /// Worst of two verdicts: fail beats inconclusive beats pass.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Least-squares line `y = slope x + intercept`; `residual` is the RMS
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n as f64).sqrt();
    Some(Fit { slope, intercept, residual })
}

/// One measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl ReportPoint {
    pub fn new(series: impl Into<String>, x: f64, y: f64) -> Self {
        ReportPoint { series: series.into(), x, y, extra: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.extra.insert(key.to_string(), v);
        self
    }
}

/// A named tolerance test behind a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Outcome of one verification experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub id: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub points: Vec<ReportPoint>,
    pub fit: Option<Fit>,
    #[serde(default)]
    pub fits: BTreeMap<String, Fit>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub seed: u64,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Wall time; kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub runtime: Duration,
}

impl EstimateReport {
    pub fn new(id: impl Into<String>, seed: u64) -> Self {
        EstimateReport {
            id: id.into(),
            params: BTreeMap::new(),
            points: Vec::new(),
            fit: None,
            fits: BTreeMap::new(),
            checks: Vec::new(),
            verdict: Verdict::Pass,
            seed,
            notes: Vec::new(),
            runtime: Duration::ZERO,
        }
    }

    pub fn param(&mut self, key: &str, v: impl Serialize) {
        self.params.insert(key.to_string(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
    }

    pub fn point(&mut self, p: ReportPoint) {
        self.points.push(p);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Record `measured <= threshold`.
    pub fn check_le(&mut self, name: &str, measured: f64, threshold: f64) -> bool {
        let pass = measured <= threshold;
        self.push_check(name, measured, threshold, pass)
    }

    /// Record `measured >= threshold`.
    pub fn check_ge(&mut self, name: &str, measured: f64, threshold: f64) -> bool {
        let pass = measured >= threshold;
        self.push_check(name, measured, threshold, pass)
    }

    /// Record `|measured - target| <= tol` as a check on the deviation.
    pub fn check_near(&mut self, name: &str, measured: f64, target: f64, tol: f64) -> bool {
        let d = (measured - target).abs();
        let pass = d <= tol;
        self.push_check(&format!("{name} (target {target})"), measured, tol, pass)
    }

    fn push_check(&mut self, name: &str, measured: f64, threshold: f64, pass: bool) -> bool {
        self.checks.push(Check { name: name.to_string(), measured, threshold, pass });
        if !pass {
            self.verdict = self.verdict.and(Verdict::Fail);
        }
        pass
    }

    pub fn inconclusive(&mut self, why: impl Into<String>) {
        self.notes.push(why.into());
        self.verdict = self.verdict.and(Verdict::Inconclusive);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Point table: `series,x,y` followed by sorted extra columns.
    pub fn to_csv(&self) -> String {
        let keys: std::collections::BTreeSet<&String> = self.points.iter().flat_map(|p| p.extra.keys()).collect();
        let mut out = String::from("series,x,y");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{:e},{:e}", p.series, p.x, p.y));
            for k in &keys {
                match p.extra.get(*k) {
                    Some(v) => out.push_str(&format!(",{v:e}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Two-column `x y` files, one per series.
    pub fn plot_series(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = BTreeMap::new();
        for p in &self.points {
            out.entry(p.series.clone()).or_default().push_str(&format!("{:e} {:e}\n", p.x, p.y));
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let fit = self.fit.map(|f| format!(" slope={:.4} residual={:.2e}", f.slope, f.residual)).unwrap_or_default();
        format!("{:<32} {:<12}{} ({:.2?})", self.id, self.verdict.to_string(), fit, self.runtime)
    }
}

/// One row of a norm table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub norm_id: String,
    pub params: String,
    pub value: f64,
    pub tail_bound: f64,
}

impl NormRow {
    pub const CSV_HEADER: &'static str = "norm_id,params,value,tail_bound";

    pub fn to_csv(&self) -> String {
        format!("{},\"{}\",{:e},{:e}", self.norm_id, self.params.replace('"', "'"), self.value, self.tail_bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14 && f.residual < 1e-14);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn verdicts_combine_and_serialize() {
        let mut r = EstimateReport::new("x", 3);
        assert!(r.check_le("a", 1.0, 2.0));
        r.inconclusive("few points");
        assert_eq!(r.verdict, Verdict::Inconclusive);
        r.check_ge("b", 1.0, 2.0);
        assert_eq!(r.verdict, Verdict::Fail);
        r.point(ReportPoint::new("s", 1.0, 2.0).with("k", 3.0));
        let back: EstimateReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.to_json(), r.to_json());
        assert!(r.to_csv().starts_with("series,x,y,k\ns,"));
    }
}
