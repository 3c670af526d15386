//! Metric reports and their CSV / JSON forms.
//!
//! CSV column orders are fixed:
//!
//! * per-case metrics: `case_id,tdsc,ece,crps,soft_volume,rater_volumes`
//!   (rater volumes joined with `;`)
//! * reliability curves: `bin,lo,hi,occupied,count,weight,mean_confidence,empirical_mhr`
//! * bench table: `target,metric,mean,ci_lo,ci_hi`

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use mhrcal_core::metrics::{CaseMetrics, ReliabilityCurve};
use mhrcal_core::{bootstrap_ci, Interval};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tdsc,
    Ece,
    Crps,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Tdsc, Metric::Ece, Metric::Crps];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Tdsc => "tdsc",
            Metric::Ece => "ece",
            Metric::Crps => "crps",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Tdsc)
    }

    pub fn value(self, m: &CaseMetrics) -> f64 {
        match self {
            Metric::Tdsc => m.tdsc,
            Metric::Ece => m.ece,
            Metric::Crps => m.crps,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tdsc" => Ok(Metric::Tdsc),
            "ece" => Ok(Metric::Ece),
            "crps" => Ok(Metric::Crps),
            other => Err(Error::Invalid(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_case: BTreeMap<String, CaseMetrics>,
    pub aggregate: BTreeMap<Metric, Interval>,
}

impl MetricsReport {
    /// Bootstrap every requested metric over cases. All metrics share the
    /// seed, so they see the same resampled case sets.
    pub fn from_cases(
        cases: Vec<(String, CaseMetrics)>,
        metrics: &[Metric],
        resamples: usize,
        seed: u64,
        level: f64,
    ) -> Result<Self> {
        let mut aggregate = BTreeMap::new();
        for &metric in metrics {
            let values: Vec<f64> = cases.iter().map(|(_, m)| metric.value(m)).collect();
            aggregate.insert(metric, bootstrap_ci(&values, resamples, seed, level)?);
        }
        Ok(Self {
            per_case: cases.into_iter().collect(),
            aggregate,
        })
    }

    pub fn write_cases_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "case_id",
            "tdsc",
            "ece",
            "crps",
            "soft_volume",
            "rater_volumes",
        ])?;
        for (id, m) in &self.per_case {
            let volumes = m
                .rater_volumes
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                id.clone(),
                m.tdsc.to_string(),
                m.ece.to_string(),
                m.crps.to_string(),
                m.soft_volume.to_string(),
                volumes,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn write_reliability_csv<W: Write>(curve: &ReliabilityCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bin",
        "lo",
        "hi",
        "occupied",
        "count",
        "weight",
        "mean_confidence",
        "empirical_mhr",
    ])?;
    for b in 0..curve.bin_count() {
        w.write_record([
            b.to_string(),
            curve.bin_edges[b].to_string(),
            curve.bin_edges[b + 1].to_string(),
            u8::from(curve.occupied[b]).to_string(),
            curve.count[b].to_string(),
            curve.weight[b].to_string(),
            curve.mean_confidence[b].to_string(),
            curve.empirical_mhr[b].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(tdsc: f64) -> CaseMetrics {
        CaseMetrics {
            tdsc,
            ece: 0.01,
            crps: 2.0,
            soft_volume: 10.5,
            rater_volumes: vec![10.0, 12.0],
        }
    }

    #[test]
    fn cases_csv_golden() {
        let r = MetricsReport::from_cases(
            vec![("b".into(), case(0.5)), ("a".into(), case(0.25))],
            &Metric::ALL,
            10,
            0,
            0.95,
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_cases_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "case_id,tdsc,ece,crps,soft_volume,rater_volumes\n\
             a,0.25,0.01,2,10.5,10;12\n\
             b,0.5,0.01,2,10.5,10;12\n"
        );
        assert_eq!(r.aggregate[&Metric::Ece].mean, 0.01);
    }

    #[test]
    fn reliability_csv_header() {
        let curve = ReliabilityCurve {
            bin_edges: vec![0.0, 0.5, 1.0],
            mean_confidence: vec![0.25, 0.7],
            empirical_mhr: vec![0.0, 0.6],
            weight: vec![0.0, 1.0],
            count: vec![0, 3],
            occupied: vec![false, true],
        };
        let mut buf = Vec::new();
        write_reliability_csv(&curve, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin,lo,hi,occupied,count,weight,mean_confidence,empirical_mhr\n\
             0,0,0.5,0,0,0,0.25,0\n\
             1,0.5,1,1,3,1,0.7,0.6\n"
        );
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("TDSC".parse::<Metric>().unwrap(), Metric::Tdsc);
        assert!("dice".parse::<Metric>().is_err());
    }
}
