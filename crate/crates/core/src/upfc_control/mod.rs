//! UPFC series/shunt reference generation, compensation signals, hysteresis
//! switching and the scalar power-balance relations.
//!
//! Phase convention everywhere: A at 0°, B at −120°, C at +120°.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum UpfcError {
    #[error("time grid is empty")]
    EmptyTimeGrid,
    #[error("time grid must be strictly increasing (index {0})")]
    NonIncreasingTimes(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample grids differ: {0}")]
    GridMismatch(String),
    #[error("need at least one full fundamental period, got {samples} samples at {per_period:.3} per period")]
    TooFewSamples { samples: usize, per_period: f64 },
    #[error("fundamental component is zero")]
    ZeroFundamental,
    #[error("scenario: {0}")]
    BadScenario(String),
}

const PHASE_SHIFT: [f64; 3] = [0.0, -2.0 * PI / 3.0, 2.0 * PI / 3.0];

/// Sampled three-phase signal on a shared time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform3 {
    pub times: Vec<f64>,
    pub samples: Vec<[f64; 3]>,
}

impl Waveform3 {
    pub fn phase(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    /// Pointwise sum on the same grid.
    pub fn plus(&self, other: &Waveform3) -> Result<Waveform3, UpfcError> {
        check_grid(&self.times, &other.times)?;
        Ok(Waveform3 {
            times: self.times.clone(),
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesReference {
    pub v_lm: f64,
    pub omega: f64,
    pub wave: Waveform3,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShuntReference {
    pub i_1: f64,
    pub omega: f64,
    pub wave: Waveform3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompensationKind {
    SeriesVoltage,
    ShuntCurrent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompensationSignal {
    pub kind: CompensationKind,
    pub wave: Waveform3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisBand {
    half_width: f64,
}

impl HysteresisBand {
    pub fn new(half_width: f64) -> Result<HysteresisBand, UpfcError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(UpfcError::InvalidParameter(format!(
                "hysteresis half width must be positive, got {half_width}"
            )));
        }
        Ok(HysteresisBand { half_width })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpfcParameters {
    pub c_sh: f64,
    pub c_l: f64,
    pub v_dc_ref: f64,
    pub v_dc: f64,
}

impl UpfcParameters {
    pub fn new(c_sh: f64, c_l: f64, v_dc_ref: f64, v_dc: f64) -> Result<UpfcParameters, UpfcError> {
        if !(c_sh > 0.0 && c_l > 0.0) {
            return Err(UpfcError::InvalidParameter(format!(
                "capacitances must be positive, got c_sh={c_sh}, c_l={c_l}"
            )));
        }
        Ok(UpfcParameters {
            c_sh,
            c_l,
            v_dc_ref,
            v_dc,
        })
    }

    /// DC-link voltage error the controller acts on.
    pub fn v_dc_error(&self) -> f64 {
        self.v_dc_ref - self.v_dc
    }
}

fn check_times(times: &[f64]) -> Result<(), UpfcError> {
    if times.is_empty() {
        return Err(UpfcError::EmptyTimeGrid);
    }
    for (k, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(UpfcError::NonIncreasingTimes(k + 1));
        }
    }
    Ok(())
}

fn check_grid(a: &[f64], b: &[f64]) -> Result<(), UpfcError> {
    if a.len() != b.len() {
        return Err(UpfcError::GridMismatch(format!(
            "{} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if (x - y).abs() > 1e-12 * x.abs().max(1.0) {
            return Err(UpfcError::GridMismatch(format!(
                "sample {k}: t={x} vs t={y}"
            )));
        }
    }
    Ok(())
}

fn balanced_set(amp: f64, omega: f64, times: &[f64]) -> Result<Waveform3, UpfcError> {
    if !(amp > 0.0 && amp.is_finite()) {
        return Err(UpfcError::InvalidParameter(format!(
            "amplitude must be positive, got {amp}"
        )));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(UpfcError::InvalidParameter(format!(
            "omega must be positive, got {omega}"
        )));
    }
    check_times(times)?;
    let samples = times
        .iter()
        .map(|t| {
            let wt = omega * t;
            PHASE_SHIFT.map(|s| amp * (wt + s).sin())
        })
        .collect();
    Ok(Waveform3 {
        times: times.to_vec(),
        samples,
    })
}

pub fn series_reference(
    v_lm: f64,
    omega: f64,
    times: &[f64],
) -> Result<SeriesReference, UpfcError> {
    Ok(SeriesReference {
        v_lm,
        omega,
        wave: balanced_set(v_lm, omega, times)?,
    })
}

pub fn shunt_reference(i_1: f64, omega: f64, times: &[f64]) -> Result<ShuntReference, UpfcError> {
    Ok(ShuntReference {
        i_1,
        omega,
        wave: balanced_set(i_1, omega, times)?,
    })
}

fn difference(
    kind: CompensationKind,
    reference: &Waveform3,
    actual: &Waveform3,
) -> Result<CompensationSignal, UpfcError> {
    check_grid(&reference.times, &actual.times)?;
    let samples = reference
        .samples
        .iter()
        .zip(&actual.samples)
        .map(|(r, a)| [r[0] - a[0], r[1] - a[1], r[2] - a[2]])
        .collect();
    Ok(CompensationSignal {
        kind,
        wave: Waveform3 {
            times: reference.times.clone(),
            samples,
        },
    })
}

/// Voltage the series inverter must inject: reference minus actual.
pub fn series_compensation(
    reference: &SeriesReference,
    actual: &Waveform3,
) -> Result<CompensationSignal, UpfcError> {
    difference(CompensationKind::SeriesVoltage, &reference.wave, actual)
}

/// Current the shunt inverter must inject: reference minus actual.
pub fn shunt_compensation(
    reference: &ShuntReference,
    actual: &Waveform3,
) -> Result<CompensationSignal, UpfcError> {
    difference(CompensationKind::ShuntCurrent, &reference.wave, actual)
}

/// Two-level switching states from an error trace.
pub fn hysteresis_pulses(error: &[f64], band: HysteresisBand) -> Vec<i8> {
    let h = band.half_width;
    let mut state: i8 = match error.first() {
        Some(e) if *e >= 0.0 => 1,
        Some(_) => -1,
        None => return Vec::new(),
    };
    error
        .iter()
        .map(|&e| {
            if e > h {
                state = 1;
            } else if e < -h {
                state = -1;
            }
            state
        })
        .collect()
}

/// Which printed shunt-power relation to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShuntPowerForm {
    /// `P_sh = V_L·I_s·cos φ_sr`, `Q_sh = V_s·I_s·sin φ_sr`.
    #[default]
    AsPrinted,
    /// `P_sh = V_L·I_sh·cos φ_sh`, `Q_sh = V_L·I_sh·sin φ_sh`.
    ShuntAngle,
}

/// Scalar quantities of the power balance. Magnitudes are RMS, angles in
/// degrees; the `p_*`/`q_*` fields are outputs of [`power_balance`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpfcPowerBalance {
    pub v_s: f64,
    pub i_s: f64,
    pub v_l: f64,
    pub i_l: f64,
    pub v_sr: f64,
    pub i_sh: f64,
    pub phi_sr: f64,
    pub phi_sh: f64,
    pub phi_l: f64,
    pub z_s: Complex64,
    pub z_sr: Complex64,
    pub p_s: f64,
    pub q_s: f64,
    pub p_sr: f64,
    pub q_sr: f64,
    pub p_sh: f64,
    pub q_sh: f64,
    pub p_l: f64,
    pub q_l: f64,
}

impl UpfcPowerBalance {
    /// Fills `v_sr = |(Z_sr + Z_s)·I_s|` and `i_sh = |I_L∠φ_L − I_s|`, taking
    /// the source current as the angle reference.
    pub fn with_helper_phasors(mut self) -> UpfcPowerBalance {
        let i_s = Complex64::new(self.i_s, 0.0);
        self.v_sr = ((self.z_sr + self.z_s) * i_s).norm();
        self.i_sh = (Complex64::from_polar(self.i_l, self.phi_l.to_radians()) - i_s).norm();
        self
    }
}

pub fn power_balance(inputs: &UpfcPowerBalance, form: ShuntPowerForm) -> UpfcPowerBalance {
    let mut o = inputs.clone();
    let (v_s, i_s, v_l, i_l) = (o.v_s, o.i_s, o.v_l, o.i_l);
    let (cs_sr, sn_sr) = (o.phi_sr.to_radians().cos(), o.phi_sr.to_radians().sin());
    let (cs_sh, sn_sh) = (o.phi_sh.to_radians().cos(), o.phi_sh.to_radians().sin());

    o.p_s = v_s * i_s;
    o.q_s = 0.0;
    o.p_sr = v_s * i_s * cs_sr;
    o.q_sr = v_s * i_s * sn_sr;
    match form {
        ShuntPowerForm::AsPrinted => {
            o.p_sh = v_l * i_s * cs_sr;
            o.q_sh = v_s * i_s * sn_sr;
        }
        ShuntPowerForm::ShuntAngle => {
            o.p_sh = v_l * o.i_sh * cs_sh;
            o.q_sh = v_l * o.i_sh * sn_sh;
        }
    }
    o.p_l = v_s * i_s * (1.0 - cs_sr) + v_l * i_s * (cs_sr - cs_sh) - v_s * i_s * cs_sh;
    o.q_l = v_l * i_s * (sn_sr - sn_sh) + v_l * i_l * sn_sh - v_s * i_s * sn_sr;
    o
}

/// Total harmonic distortion in percent, harmonics 2–50 below Nyquist,
/// from a direct DFT over the largest whole number of fundamental periods.
pub fn thd(samples: &[f64], fundamental_hz: f64, sample_rate: f64) -> Result<f64, UpfcError> {
    if !(fundamental_hz > 0.0 && sample_rate > 0.0) {
        return Err(UpfcError::InvalidParameter(format!(
            "frequencies must be positive (f={fundamental_hz}, fs={sample_rate})"
        )));
    }
    let per_period = sample_rate / fundamental_hz;
    let periods = (samples.len() as f64 / per_period + 1e-9).floor();
    if periods < 1.0 || per_period < 2.0 {
        return Err(UpfcError::TooFewSamples {
            samples: samples.len(),
            per_period,
        });
    }
    let n = ((periods * per_period) + 1e-9).floor() as usize;
    let x = &samples[..n];
    let amp = |h: f64| -> f64 {
        let w = 2.0 * PI * h * fundamental_hz / sample_rate;
        let s: Complex64 = x
            .iter()
            .enumerate()
            .map(|(k, v)| Complex64::from_polar(*v, -w * k as f64))
            .sum();
        2.0 * s.norm() / n as f64
    };
    let a1 = amp(1.0);
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a1 <= 1e-12 * scale.max(f64::MIN_POSITIVE) || a1 == 0.0 {
        return Err(UpfcError::ZeroFundamental);
    }
    let nyquist = sample_rate / 2.0;
    let harm: f64 = (2..=50)
        .map(f64::from)
        .filter(|h| h * fundamental_hz < nyquist)
        .map(|h| amp(h).powi(2))
        .sum();
    Ok(harm.sqrt() / a1 * 100.0)
}

/// Uniform grid of `cycles` fundamental periods.
pub fn uniform_times(fundamental_hz: f64, samples_per_cycle: usize, cycles: usize) -> Vec<f64> {
    let dt = 1.0 / (fundamental_hz * samples_per_cycle as f64);
    (0..samples_per_cycle * cycles)
        .map(|k| k as f64 * dt)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    /// Fraction of the fundamental amplitude.
    pub amplitude: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

/// Balanced reference plus positive-sequence-rotated harmonic pollution.
pub fn polluted(reference: &Waveform3, omega: f64, amp: f64, harmonics: &[Harmonic]) -> Waveform3 {
    let samples = reference
        .times
        .iter()
        .zip(&reference.samples)
        .map(|(t, r)| {
            let mut s = *r;
            for h in harmonics {
                let n = f64::from(h.order);
                for (k, shift) in PHASE_SHIFT.iter().enumerate() {
                    s[k] += amp
                        * h.amplitude
                        * (n * (omega * t + shift) + h.phase_deg.to_radians()).sin();
                }
            }
            s
        })
        .collect();
    Waveform3 {
        times: reference.times.clone(),
        samples,
    }
}

fn default_hz() -> f64 {
    60.0
}

fn default_spc() -> usize {
    64
}

/// Input of the `upfc-sim` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpfcScenario {
    #[serde(default = "default_hz")]
    pub fundamental_hz: f64,
    pub duration_s: f64,
    #[serde(default = "default_spc")]
    pub samples_per_cycle: usize,
    pub v_lm: f64,
    pub i_1: f64,
    #[serde(default)]
    pub voltage_harmonics: Vec<Harmonic>,
    #[serde(default)]
    pub current_harmonics: Vec<Harmonic>,
    pub band_half_width: f64,
    pub balance: UpfcPowerBalance,
    #[serde(default)]
    pub shunt_power_form: ShuntPowerForm,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseThd {
    pub actual: [f64; 3],
    pub corrected: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct UpfcSimulation {
    pub v_ref: SeriesReference,
    pub v_actual: Waveform3,
    pub v_comp: CompensationSignal,
    pub v_pulses: Vec<[i8; 3]>,
    pub i_ref: ShuntReference,
    pub i_actual: Waveform3,
    pub i_comp: CompensationSignal,
    pub i_pulses: Vec<[i8; 3]>,
    pub voltage_thd: PhaseThd,
    pub current_thd: PhaseThd,
    pub balance: UpfcPowerBalance,
}

fn pulses3(comp: &CompensationSignal, band: HysteresisBand) -> Vec<[i8; 3]> {
    let per: Vec<Vec<i8>> = (0..3)
        .map(|k| hysteresis_pulses(&comp.wave.phase(k), band))
        .collect();
    (0..comp.wave.times.len())
        .map(|i| [per[0][i], per[1][i], per[2][i]])
        .collect()
}

fn thd3(w: &Waveform3, f: f64, fs: f64) -> Result<[f64; 3], UpfcError> {
    Ok([
        thd(&w.phase(0), f, fs)?,
        thd(&w.phase(1), f, fs)?,
        thd(&w.phase(2), f, fs)?,
    ])
}

/// Upper bound on samples per phase in one simulation.
pub const MAX_SAMPLES: usize = 10_000_000;

pub fn parse_scenario_json(text: &str) -> Result<UpfcScenario, UpfcError> {
    serde_json::from_str(text).map_err(|e| UpfcError::BadScenario(e.to_string()))
}

pub fn simulate(s: &UpfcScenario) -> Result<UpfcSimulation, UpfcError> {
    if !(s.fundamental_hz > 0.0 && s.duration_s > 0.0 && s.samples_per_cycle >= 2) {
        return Err(UpfcError::InvalidParameter(
            "fundamental, duration and samples per cycle must be positive".into(),
        ));
    }
    let cycles = (s.duration_s * s.fundamental_hz).round().max(1.0);
    if cycles * s.samples_per_cycle as f64 > MAX_SAMPLES as f64 {
        return Err(UpfcError::InvalidParameter(format!(
            "scenario needs more than {MAX_SAMPLES} samples per phase"
        )));
    }
    let cycles = cycles as usize;
    let times = uniform_times(s.fundamental_hz, s.samples_per_cycle, cycles);
    let omega = 2.0 * PI * s.fundamental_hz;
    let fs = s.fundamental_hz * s.samples_per_cycle as f64;
    let band = HysteresisBand::new(s.band_half_width)?;

    let v_ref = series_reference(s.v_lm, omega, &times)?;
    let v_actual = polluted(&v_ref.wave, omega, s.v_lm, &s.voltage_harmonics);
    let v_comp = series_compensation(&v_ref, &v_actual)?;
    let i_ref = shunt_reference(s.i_1, omega, &times)?;
    let i_actual = polluted(&i_ref.wave, omega, s.i_1, &s.current_harmonics);
    let i_comp = shunt_compensation(&i_ref, &i_actual)?;

    let voltage_thd = PhaseThd {
        actual: thd3(&v_actual, s.fundamental_hz, fs)?,
        corrected: thd3(&v_actual.plus(&v_comp.wave)?, s.fundamental_hz, fs)?,
    };
    let current_thd = PhaseThd {
        actual: thd3(&i_actual, s.fundamental_hz, fs)?,
        corrected: thd3(&i_actual.plus(&i_comp.wave)?, s.fundamental_hz, fs)?,
    };
    Ok(UpfcSimulation {
        v_pulses: pulses3(&v_comp, band),
        i_pulses: pulses3(&i_comp, band),
        v_ref,
        v_actual,
        v_comp,
        i_ref,
        i_actual,
        i_comp,
        voltage_thd,
        current_thd,
        balance: power_balance(&s.balance.clone().with_helper_phasors(), s.shunt_power_form),
    })
}
