//! Piecewise speed signals with a declared admissible band.
//!
//! A profile is continuous, piecewise C¹, keeps a single sign and stays inside
//! `min ≤ |ω| ≤ max` with `|dω/dt| ≤ max_rate`. All of this is checked when the
//! profile is built, and `speed_at` re-checks the band on every evaluation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Hold {
        value: f64,
        duration: f64,
    },
    Ramp {
        start: f64,
        end: f64,
        duration: f64,
    },
    /// `offset + amplitude · sin(2π · frequency · (t - t_start))`.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        duration: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Hold { duration, .. }
            | Segment::Ramp { duration, .. }
            | Segment::Sinusoid { duration, .. } => duration,
        }
    }

    /// Value and right derivative at local time `s`.
    fn eval(&self, s: f64) -> (f64, f64) {
        match *self {
            Segment::Hold { value, .. } => (value, 0.0),
            Segment::Ramp {
                start,
                end,
                duration,
            } => {
                let slope = (end - start) / duration;
                (start + slope * s, slope)
            }
            Segment::Sinusoid {
                offset,
                amplitude,
                frequency,
                ..
            } => {
                let w = 2.0 * PI * frequency;
                let (sn, cs) = (w * s).sin_cos();
                (offset + amplitude * sn, amplitude * w * cs)
            }
        }
    }

    fn start_value(&self) -> f64 {
        self.eval(0.0).0
    }

    fn end_value(&self) -> f64 {
        self.eval(self.duration()).0
    }

    /// Exact value range over the segment.
    fn value_range(&self) -> (f64, f64) {
        match *self {
            Segment::Hold { value, .. } => (value, value),
            Segment::Ramp { start, end, .. } => (start.min(end), start.max(end)),
            Segment::Sinusoid {
                offset,
                amplitude,
                frequency,
                duration,
            } => {
                let (lo, hi) = sin_range(2.0 * PI * frequency * duration);
                let (a, b) = (offset + amplitude * lo, offset + amplitude * hi);
                (a.min(b), a.max(b))
            }
        }
    }

    fn max_rate(&self) -> f64 {
        match *self {
            Segment::Hold { .. } => 0.0,
            Segment::Ramp {
                start,
                end,
                duration,
            } => ((end - start) / duration).abs(),
            // the cosine starts at 1, so the peak slope is always reached
            Segment::Sinusoid {
                amplitude,
                frequency,
                ..
            } => (amplitude * 2.0 * PI * frequency).abs(),
        }
    }

    fn scaled(&self, k: f64) -> Segment {
        match *self {
            Segment::Hold { value, duration } => Segment::Hold {
                value: value * k,
                duration,
            },
            Segment::Ramp {
                start,
                end,
                duration,
            } => Segment::Ramp {
                start: start * k,
                end: end * k,
                duration,
            },
            Segment::Sinusoid {
                offset,
                amplitude,
                frequency,
                duration,
            } => Segment::Sinusoid {
                offset: offset * k,
                amplitude: amplitude * k,
                frequency,
                duration,
            },
        }
    }
}

/// Range of `sin(x)` for `x ∈ [0, end]`.
fn sin_range(end: f64) -> (f64, f64) {
    let hi = if end >= 0.5 * PI { 1.0 } else { end.sin().max(0.0) };
    let lo = if end >= 1.5 * PI { -1.0 } else { end.sin().min(0.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedBounds {
    pub min: f64,
    pub max: f64,
    pub max_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileDefinition", into = "ProfileDefinition")]
pub struct SpeedProfile {
    segments: Vec<Segment>,
    bounds: SpeedBounds,
    starts: Vec<f64>,
    duration: f64,
    sign: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileDefinition {
    pub segments: Vec<Segment>,
    pub bounds: SpeedBounds,
}

impl TryFrom<ProfileDefinition> for SpeedProfile {
    type Error = Error;

    fn try_from(def: ProfileDefinition) -> Result<Self> {
        SpeedProfile::new(def.segments, def.bounds)
    }
}

impl From<SpeedProfile> for ProfileDefinition {
    fn from(p: SpeedProfile) -> Self {
        ProfileDefinition {
            segments: p.segments,
            bounds: p.bounds,
        }
    }
}

impl SpeedProfile {
    pub fn new(segments: Vec<Segment>, bounds: SpeedBounds) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("speed profile has no segments".into()));
        }
        if !(bounds.min > 0.0 && bounds.max >= bounds.min && bounds.max_rate >= 0.0) {
            return Err(Error::Config(format!(
                "speed bounds must satisfy 0 < min <= max and max_rate >= 0, got {bounds:?}"
            )));
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        let mut sign = 0.0;
        for (k, seg) in segments.iter().enumerate() {
            let d = seg.duration();
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("segment {k} has non-positive duration")));
            }
            if let Segment::Sinusoid { frequency, .. } = seg {
                if !(*frequency >= 0.0 && frequency.is_finite()) {
                    return Err(Error::Config(format!("segment {k} has invalid frequency")));
                }
            }
            if k > 0 {
                let prev = segments[k - 1].end_value();
                let next = seg.start_value();
                if (prev - next).abs() > 1e-9 * bounds.max {
                    return Err(Error::Config(format!(
                        "profile is discontinuous between segments {} and {k} ({prev} -> {next})",
                        k - 1
                    )));
                }
            }
            let (lo, hi) = seg.value_range();
            if lo <= 0.0 && hi >= 0.0 {
                return Err(Error::SpeedBounds(format!("segment {k} reaches zero speed")));
            }
            let s = lo.signum();
            if sign == 0.0 {
                sign = s;
            } else if s != sign {
                return Err(Error::SpeedBounds(format!("segment {k} changes speed sign")));
            }
            let (alo, ahi) = (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()));
            let tol = 1e-12 * bounds.max;
            if alo < bounds.min - tol || ahi > bounds.max + tol {
                return Err(Error::SpeedBounds(format!(
                    "segment {k} spans |ω| in [{alo}, {ahi}], outside [{}, {}]",
                    bounds.min, bounds.max
                )));
            }
            if seg.max_rate() > bounds.max_rate * (1.0 + 1e-12) {
                return Err(Error::SpeedBounds(format!(
                    "segment {k} slope {} exceeds {}",
                    seg.max_rate(),
                    bounds.max_rate
                )));
            }
            starts.push(t);
            t += d;
        }
        Ok(Self {
            segments,
            bounds,
            starts,
            duration: t,
            sign,
        })
    }

    pub fn constant(value: f64, duration: f64) -> Result<Self> {
        let m = value.abs();
        Self::new(
            vec![Segment::Hold { value, duration }],
            SpeedBounds {
                min: m,
                max: m,
                max_rate: 0.0,
            },
        )
    }

    /// Ramp/hold/sinusoid reference in mechanical rpm, built around a
    /// 7000 rpm nominal speed.
    pub fn benchmark_rpm() -> Self {
        Self::new(
            vec![
                Segment::Hold {
                    value: 3500.0,
                    duration: 0.3,
                },
                Segment::Ramp {
                    start: 3500.0,
                    end: 6000.0,
                    duration: 0.5,
                },
                Segment::Sinusoid {
                    offset: 6000.0,
                    amplitude: 500.0,
                    frequency: 2.0,
                    duration: 0.5,
                },
                Segment::Ramp {
                    start: 6000.0,
                    end: 4500.0,
                    duration: 0.7,
                },
            ],
            SpeedBounds {
                min: 3000.0,
                max: 7000.0,
                max_rate: 6500.0,
            },
        )
        .expect("benchmark profile is admissible")
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn bounds(&self) -> SpeedBounds {
        self.bounds
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Sign shared by every sample of the profile.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// Multiplies every value (and the bounds) by `k`, e.g. for unit conversion.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let a = k.abs();
        Self::new(
            self.segments.iter().map(|s| s.scaled(k)).collect(),
            SpeedBounds {
                min: self.bounds.min * a,
                max: self.bounds.max * a,
                max_rate: self.bounds.max_rate * a,
            },
        )
    }

    /// Value and right derivative at `t ∈ [0, duration]`.
    pub fn speed_at(&self, t: f64) -> Result<(f64, f64)> {
        let slack = 1e-9 * self.duration.max(1.0);
        if !t.is_finite() || t < -slack || t > self.duration + slack {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside profile horizon [0, {}]",
                self.duration
            )));
        }
        let t = t.clamp(0.0, self.duration);
        let k = match self.starts.partition_point(|&s| s <= t) {
            0 => 0,
            n => n - 1,
        };
        let seg = &self.segments[k];
        let local = (t - self.starts[k]).min(seg.duration());
        let (w, dw) = seg.eval(local);
        let tol = 1e-9 * self.bounds.max;
        if w.signum() != self.sign
            || w.abs() < self.bounds.min - tol
            || w.abs() > self.bounds.max + tol
            || dw.abs() > self.bounds.max_rate * (1.0 + 1e-9) + tol
        {
            return Err(Error::SpeedBounds(format!(
                "ω({t}) = {w}, dω/dt = {dw} outside declared bounds"
            )));
        }
        Ok((w, dw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(min: f64, max: f64, rate: f64) -> SpeedBounds {
        SpeedBounds {
            min,
            max,
            max_rate: rate,
        }
    }

    #[test]
    fn hold_and_ramp_values() {
        let hold = SpeedProfile::constant(250.0, 1.0).unwrap();
        assert_eq!(hold.speed_at(0.3).unwrap(), (250.0, 0.0));
        let ramp = SpeedProfile::new(
            vec![Segment::Ramp {
                start: 100.0,
                end: 200.0,
                duration: 1.0,
            }],
            bounds(100.0, 200.0, 100.0),
        )
        .unwrap();
        let (w, dw) = ramp.speed_at(0.5).unwrap();
        assert!((w - 150.0).abs() < 1e-12);
        assert!((dw - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_crossing_rejected() {
        let r = SpeedProfile::new(
            vec![Segment::Ramp {
                start: 100.0,
                end: -100.0,
                duration: 1.0,
            }],
            bounds(1.0, 100.0, 1000.0),
        );
        assert!(matches!(r, Err(Error::SpeedBounds(_))));
        let s = SpeedProfile::new(
            vec![Segment::Sinusoid {
                offset: 50.0,
                amplitude: 60.0,
                frequency: 1.0,
                duration: 1.0,
            }],
            bounds(1.0, 200.0, 1000.0),
        );
        assert!(matches!(s, Err(Error::SpeedBounds(_))));
    }

    #[test]
    fn declared_band_and_slope_enforced() {
        let too_fast = SpeedProfile::new(
            vec![Segment::Ramp {
                start: 100.0,
                end: 200.0,
                duration: 0.1,
            }],
            bounds(50.0, 300.0, 500.0),
        );
        assert!(matches!(too_fast, Err(Error::SpeedBounds(_))));
        let out_of_band = SpeedProfile::constant(10.0, 1.0)
            .unwrap()
            .segments()
            .to_vec();
        let r = SpeedProfile::new(out_of_band, bounds(20.0, 30.0, 0.0));
        assert!(matches!(r, Err(Error::SpeedBounds(_))));
    }

    #[test]
    fn discontinuity_rejected() {
        let r = SpeedProfile::new(
            vec![
                Segment::Hold {
                    value: 100.0,
                    duration: 1.0,
                },
                Segment::Hold {
                    value: 110.0,
                    duration: 1.0,
                },
            ],
            bounds(50.0, 200.0, 0.0),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn partial_sinusoid_range_is_exact() {
        // a quarter period only reaches the positive peak
        let p = SpeedProfile::new(
            vec![Segment::Sinusoid {
                offset: 100.0,
                amplitude: 10.0,
                frequency: 1.0,
                duration: 0.25,
            }],
            bounds(100.0, 110.0, 20.0 * PI),
        )
        .unwrap();
        assert!((p.speed_at(0.25).unwrap().0 - 110.0).abs() < 1e-9);
    }

    #[test]
    fn negative_profiles_keep_sign() {
        let p = SpeedProfile::benchmark_rpm().scaled(-1.0).unwrap();
        assert_eq!(p.sign(), -1.0);
        let (w, _) = p.speed_at(1.0).unwrap();
        assert!(w < 0.0);
    }

    #[test]
    fn outside_horizon_is_an_error() {
        let p = SpeedProfile::constant(1.0, 1.0).unwrap();
        assert!(p.speed_at(1.5).is_err());
        assert!(p.speed_at(-0.1).is_err());
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let p = SpeedProfile::benchmark_rpm();
        let text = serde_json::to_string(&p).unwrap();
        let back: SpeedProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let bad = text.replace("3000.0", "4000.0");
        assert!(serde_json::from_str::<SpeedProfile>(&bad).is_err());
    }
}
