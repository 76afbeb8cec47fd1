//! JSON and CSV artifacts: controller.json, report.json, certify.json,
//! ber_curves.csv and waveform.csv. Layouts are listed in docs/schemas.md.

use std::io::Write;

use fdrelay_control::{DMatrix, StateSpace, TimeDomain};
use serde::{Deserialize, Serialize};

use crate::ber::BerCurve;
use crate::config::{parse_json, ParseError};
use crate::sim::SimOutput;
use crate::synth::{DigitalController, SynthesisResult, TraceEntry};
use crate::{Error, Result};

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>], ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if r.iter().any(|row| row.len() != ncols) {
        return Err(Error::Config(format!("matrix '{name}' has ragged rows")));
    }
    Ok(DMatrix::from_fn(r.len(), ncols, |i, j| r[i][j]))
}

/// controller.json: row-major `a`, `b`, `c`, `d` plus step and gammas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub step_seconds: f64,
    pub gamma_achieved: f64,
    pub gamma_certified: f64,
}

impl ControllerFile {
    pub fn from_controller(k: &DigitalController) -> Result<Self> {
        let step = k
            .k
            .domain()
            .step()
            .ok_or_else(|| Error::Config("controller must be discrete-time".into()))?;
        Ok(Self {
            a: rows(k.k.a()),
            b: rows(k.k.b()),
            c: rows(k.k.c()),
            d: rows(k.k.d()),
            step_seconds: step,
            gamma_achieved: k.gamma_achieved,
            gamma_certified: k.gamma_certified,
        })
    }

    /// Rebuild the controller. With no states `b` and `c` carry no column
    /// or row count, so the port counts come from `d`.
    pub fn to_controller(&self) -> Result<DigitalController> {
        let n = self.a.len();
        let n_y = self.d.first().map_or(0, Vec::len);
        let n_u = self.d.len();
        let a = from_rows(&self.a, n, "a")?;
        let b = if n == 0 {
            DMatrix::zeros(0, n_y)
        } else {
            from_rows(&self.b, self.b.first().map_or(0, Vec::len), "b")?
        };
        let c = if n == 0 {
            DMatrix::zeros(n_u, 0)
        } else {
            from_rows(&self.c, n, "c")?
        };
        let d = from_rows(&self.d, n_y, "d")?;
        if !(self.step_seconds > 0.0 && self.step_seconds.is_finite()) {
            return Err(Error::Config(format!(
                "step_seconds must be positive, got {}",
                self.step_seconds
            )));
        }
        let k = StateSpace::new(
            a,
            b,
            c,
            d,
            TimeDomain::Discrete {
                step: self.step_seconds,
            },
        )?;
        Ok(DigitalController {
            k,
            gamma_achieved: self.gamma_achieved,
            gamma_certified: self.gamma_certified,
        })
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, ParseError> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("controller serializes")
    }
}

/// report.json written by `design`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub gamma_min: f64,
    pub gamma_lower: f64,
    pub gamma_achieved: f64,
    pub gamma_certified: f64,
    pub spectral_radius: f64,
    pub controller_states: usize,
    pub tol: f64,
    pub bisection_trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

impl DesignReport {
    pub fn new(r: &SynthesisResult, tol: f64) -> Self {
        Self {
            gamma_min: r.gamma_min,
            gamma_lower: r.gamma_lower,
            gamma_achieved: r.controller.gamma_achieved,
            gamma_certified: r.controller.gamma_certified,
            spectral_radius: r.spectral_radius,
            controller_states: r.controller.k.n_states(),
            tol,
            bisection_trace: r.bisection_trace.clone(),
            warnings: r.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// certify.json written by `certify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub hinf_norm: f64,
    pub spectral_radius: f64,
    pub gamma_achieved: f64,
    /// `hinf_norm <= gamma_achieved * 1.001`.
    pub within_claim: bool,
}

impl CertifyReport {
    pub fn new(hinf_norm: f64, spectral_radius: f64, gamma_achieved: f64) -> Self {
        Self {
            hinf_norm,
            spectral_radius,
            gamma_achieved,
            within_claim: hinf_norm <= gamma_achieved * 1.001,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv output failed: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub beta: f64,
    pub canceler: String,
    pub errors: u64,
    pub trials: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// ber_curves.csv, one row per (curve, beta) in curve order.
pub fn write_ber_csv<W: Write>(curves: &[BerCurve], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for curve in curves {
        for p in &curve.points {
            w.serialize(BerRow {
                beta: p.beta,
                canceler: curve.canceler.to_string(),
                errors: p.errors,
                trials: p.trials,
                ber: p.ber,
                ci_lo: p.ci95.0,
                ci_hi: p.ci95.1,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

pub fn ber_csv_string(curves: &[BerCurve]) -> Result<String> {
    let mut buf = Vec::new();
    write_ber_csv(curves, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRow {
    pub t: f64,
    pub v_i: f64,
    pub v_q: f64,
    pub u_i: f64,
    pub u_q: f64,
    pub z_i: f64,
    pub z_q: f64,
    #[serde(rename = "yT_i")]
    pub yt_i: f64,
    #[serde(rename = "yT_q")]
    pub yt_q: f64,
}

/// waveform.csv, one row per fast sample.
pub fn write_waveform_csv<W: Write>(sim: &SimOutput, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let rate = sim.v.rate;
    for k in 0..sim.v.len() {
        let (v, u, z, y) = (
            sim.v.samples[k],
            sim.u.samples[k],
            sim.z.samples[k],
            sim.y_t.samples[k],
        );
        w.serialize(WaveformRow {
            t: k as f64 / rate,
            v_i: v[0],
            v_q: v[1],
            u_i: u[0],
            u_q: u[1],
            z_i: z[0],
            z_q: z[1],
            yt_i: y[0],
            yt_q: y[1],
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ber::BerPoint;
    use crate::sim::{CancelerKind, Waveform};

    fn controller(n: usize) -> DigitalController {
        let k = StateSpace::new(
            DMatrix::from_fn(n, n, |i, j| 0.1 * (i + 2 * j) as f64),
            DMatrix::from_fn(n, 2, |i, j| (i + j) as f64),
            DMatrix::from_fn(2, n, |i, j| (i * j) as f64 - 0.5),
            DMatrix::from_fn(2, 2, |i, j| if i == j { 0.25 } else { 0.0 }),
            TimeDomain::Discrete { step: 1.0 },
        )
        .unwrap();
        DigitalController {
            k,
            gamma_achieved: 0.3,
            gamma_certified: 0.29,
        }
    }

    #[test]
    fn controller_round_trip() {
        for n in [0, 3] {
            let k = controller(n);
            let file = ControllerFile::from_controller(&k).unwrap();
            let back = ControllerFile::from_json(&file.to_json())
                .unwrap()
                .to_controller()
                .unwrap();
            assert_eq!(back, k);
        }
    }

    #[test]
    fn controller_rows_are_row_major() {
        let file = ControllerFile::from_controller(&controller(3)).unwrap();
        assert_eq!(file.a[0], vec![0.0, 0.2, 0.4]);
        assert_eq!(file.c.len(), 2);
        assert_eq!(file.b[2], vec![2.0, 3.0]);
    }

    #[test]
    fn ragged_controller_rejected() {
        let mut file = ControllerFile::from_controller(&controller(2)).unwrap();
        file.a[1].pop();
        assert!(file.to_controller().is_err());
    }

    #[test]
    fn ber_csv_layout() {
        let curves = vec![BerCurve {
            canceler: CancelerKind::Designed,
            points: vec![BerPoint::new(0.5, 3, 100)],
        }];
        let text = ber_csv_string(&curves).unwrap();
        let mut lines = text.split("\r\n");
        assert_eq!(lines.next(), Some("beta,canceler,errors,trials,ber,ci_lo,ci_hi"));
        assert!(lines.next().unwrap().starts_with("0.5,designed,3,100,0.03,"));
        assert_eq!(lines.next(), Some(""));
    }

    #[test]
    fn waveform_csv_header() {
        let w = Waveform::zeros(2, 16.0);
        let sim = SimOutput {
            v: w.clone(),
            u: w.clone(),
            z: w.clone(),
            y_t: w,
        };
        let mut buf = Vec::new();
        write_waveform_csv(&sim, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,v_i,v_q,u_i,u_q,z_i,z_q,yT_i,yT_q\r\n0.0,"));
        assert!(text.contains("\r\n0.0625,"));
    }
}
