//! Two-phase PMSM electrical dynamics in the static frame, the torque map,
//! rotating-frame transforms and the mechanical load.

mod profile;

pub use profile::{ProfileDefinition, Segment, SpeedBounds, SpeedProfile};

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::so2::{j_times, UnitVec};

pub const RPM_TO_RAD_S: f64 = 2.0 * PI / 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadModel {
    None,
    ConstantTorque { torque: f64 },
    /// `T_load = coefficient · ω_m |ω_m|`.
    QuadraticDrag { coefficient: f64 },
}

impl LoadModel {
    /// Drag sized so that the load at `nominal_speed` [rad/s, mechanical]
    /// equals `fraction · rated_torque`.
    pub fn drag_from_rating(rated_torque: f64, fraction: f64, nominal_speed: f64) -> Self {
        LoadModel::QuadraticDrag {
            coefficient: fraction * rated_torque / (nominal_speed * nominal_speed),
        }
    }

    pub fn torque(&self, mech_speed: f64) -> f64 {
        match *self {
            LoadModel::None => 0.0,
            LoadModel::ConstantTorque { torque } => torque,
            LoadModel::QuadraticDrag { coefficient } => coefficient * mech_speed * mech_speed.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Stator resistance [Ω].
    pub resistance: f64,
    /// Stator inductance [H].
    pub inductance: f64,
    /// Rotor flux amplitude [Wb].
    pub flux: f64,
    pub pole_pairs: u32,
    /// Load inertia [kg·m²].
    pub inertia: f64,
    /// Nominal mechanical speed [rpm].
    pub nominal_speed_rpm: f64,
    pub load: LoadModel,
}

impl PlantParams {
    /// UAV propulsion motor (Tmotor 4006 KV380 class). The drag load absorbs
    /// half of a 0.3 N·m rating at nominal speed.
    pub fn uav_benchmark() -> Self {
        let nominal_speed_rpm = 7000.0;
        Self {
            resistance: 0.108,
            inductance: 30.62e-6,
            flux: 1.309e-3,
            pole_pairs: 12,
            inertia: 1.4e-4,
            nominal_speed_rpm,
            load: LoadModel::drag_from_rating(0.3, 0.5, nominal_speed_rpm * RPM_TO_RAD_S),
        }
    }

    pub fn p(&self) -> f64 {
        self.pole_pairs as f64
    }

    pub fn nominal_mech_speed(&self) -> f64 {
        self.nominal_speed_rpm * RPM_TO_RAD_S
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            &[
                self.resistance,
                self.inductance,
                self.flux,
                self.inertia,
                self.nominal_speed_rpm,
            ],
            "plant parameters",
        )?;
        if !(self.resistance > 0.0 && self.inductance > 0.0 && self.flux > 0.0 && self.inertia > 0.0)
        {
            return Err(Error::Config(
                "R, L, flux and inertia must be strictly positive".into(),
            ));
        }
        if self.pole_pairs < 1 {
            return Err(Error::Config("pole_pairs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Stator current in the static frame [A].
    pub current: Vector2<f64>,
    /// Electrical rotor orientation.
    pub rotor: UnitVec,
    /// Mechanical speed [rad/s].
    pub mech_speed: f64,
}

impl PlantState {
    pub fn electrical_speed(&self, params: &PlantParams) -> f64 {
        params.p() * self.mech_speed
    }
}

/// Where the electrical speed comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedSource {
    /// Imposed electrical speed [rad/s]; the mechanical state is ignored.
    Exogenous { omega: f64 },
    /// `J dω_m/dt = T_el - T_load`.
    Mechanical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantRates {
    pub current: Vector2<f64>,
    /// Angular rate of the rotor orientation (electrical speed) [rad/s].
    pub rotor_rate: f64,
    /// Mechanical acceleration [rad/s²]; zero in exogenous mode.
    pub mech_accel: f64,
}

/// `di/dt = -(R/L) i + u/L - ω φ J ζ / L`, `ζ̇ = ω J ζ`.
pub fn plant_derivative(
    x: &PlantState,
    voltage: &Vector2<f64>,
    params: &PlantParams,
    source: SpeedSource,
) -> Result<PlantRates> {
    ensure_finite(
        &[
            x.current.x,
            x.current.y,
            x.rotor.c,
            x.rotor.s,
            x.mech_speed,
            voltage.x,
            voltage.y,
        ],
        "plant state or voltage",
    )?;
    let (omega, mech_accel) = match source {
        SpeedSource::Exogenous { omega } => {
            ensure_finite(&[omega], "exogenous speed")?;
            (omega, 0.0)
        }
        SpeedSource::Mechanical => {
            let net = torque(x, params) - params.load.torque(x.mech_speed);
            (x.electrical_speed(params), net / params.inertia)
        }
    };
    let (r, l) = (params.resistance, params.inductance);
    let emf = j_times(&x.rotor.as_vector()) * (omega * params.flux);
    let di = (-x.current * r + voltage - emf) / l;
    Ok(PlantRates {
        current: di,
        rotor_rate: omega,
        mech_accel,
    })
}

/// `T_el = -(3/2) p φ ζᵀ J i_s`.
pub fn torque(x: &PlantState, params: &PlantParams) -> f64 {
    let ji = j_times(&x.current);
    -1.5 * params.p() * params.flux * x.rotor.as_vector().dot(&ji)
}

/// `Cᵀ[ζ_r] v`.
pub fn to_frame(frame: &UnitVec, v: &Vector2<f64>) -> Vector2<f64> {
    frame.rotate_back(v)
}

/// `C[ζ_r] v`.
pub fn from_frame(frame: &UnitVec, v: &Vector2<f64>) -> Vector2<f64> {
    frame.rotate(v)
}

/// Current dynamics expressed in a frame `ζ_r` rotating at `frame_rate`:
/// `di_r/dt = -(R/L) i_r + u_r/L - ω φ J Cᵀ[ζ_r] ζ / L - ω_r J i_r`.
pub fn rotating_frame_current_derivative(
    current_r: &Vector2<f64>,
    voltage_r: &Vector2<f64>,
    rotor: &UnitVec,
    frame: &UnitVec,
    omega: f64,
    frame_rate: f64,
    params: &PlantParams,
) -> Vector2<f64> {
    let (r, l) = (params.resistance, params.inductance);
    let rotor_r = frame.rotate_back(&rotor.as_vector());
    (-current_r * r + voltage_r - j_times(&rotor_r) * (omega * params.flux)) / l
        - j_times(current_r) * frame_rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::integrator::{rk4_step, Bundle, Rates};
    use proptest::prelude::*;

    fn table1() -> PlantParams {
        PlantParams::uav_benchmark()
    }

    #[test]
    fn table_values() {
        let p = table1();
        assert_eq!(p.resistance, 0.108);
        assert_eq!(p.inductance, 30.62e-6);
        assert_eq!(p.flux, 1.309e-3);
        assert_eq!(p.pole_pairs, 12);
        assert_eq!(p.inertia, 1.4e-4);
        assert_eq!(p.nominal_speed_rpm, 7000.0);
        p.validate().unwrap();
    }

    #[test]
    fn back_emf_cancellation_is_an_equilibrium() {
        let p = table1();
        let omega = 4000.0;
        let x = PlantState {
            current: Vector2::zeros(),
            rotor: UnitVec::from_angle(0.4),
            mech_speed: 0.0,
        };
        let u = j_times(&x.rotor.as_vector()) * (omega * p.flux);
        let d = plant_derivative(&x, &u, &p, SpeedSource::Exogenous { omega }).unwrap();
        assert!(d.current.norm() < 1e-9);
        assert_eq!(d.rotor_rate, omega);
    }

    #[test]
    fn torque_examples() {
        let p = table1();
        let mut x = PlantState {
            current: Vector2::new(0.0, 10.0),
            rotor: UnitVec::IDENTITY,
            mech_speed: 0.0,
        };
        assert!((torque(&x, &p) - 0.235_62).abs() < 1e-5);
        // 1.5 · 12 · 1.309e-3 · 10
        assert!((torque(&x, &p) - 0.23562).abs() < 1e-12);
        x.current = Vector2::new(3.0, 0.0);
        assert_eq!(torque(&x, &p), 0.0);
        x.current = Vector2::zeros();
        assert_eq!(torque(&x, &p), 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let p = table1();
        let x = PlantState {
            current: Vector2::new(f64::NAN, 0.0),
            rotor: UnitVec::IDENTITY,
            mech_speed: 0.0,
        };
        assert!(plant_derivative(&x, &Vector2::zeros(), &p, SpeedSource::Mechanical).is_err());
    }

    #[test]
    fn rl_decay_at_standstill() {
        let p = table1();
        let mut x = PlantState {
            current: Vector2::new(4.0, -2.0),
            rotor: UnitVec::IDENTITY,
            mech_speed: 0.0,
        };
        let mut prev = x.current.norm();
        let dt = 1e-6;
        for _ in 0..2000 {
            let d = plant_derivative(&x, &Vector2::zeros(), &p, SpeedSource::Exogenous { omega: 0.0 })
                .unwrap();
            x.current += d.current * dt;
            let n = x.current.norm();
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn mechanical_mode_accelerates_with_torque() {
        let mut p = table1();
        p.load = LoadModel::ConstantTorque { torque: 0.1 };
        let x = PlantState {
            current: Vector2::new(0.0, 10.0),
            rotor: UnitVec::IDENTITY,
            mech_speed: 100.0,
        };
        let d = plant_derivative(&x, &Vector2::zeros(), &p, SpeedSource::Mechanical).unwrap();
        assert!((d.mech_accel - (0.23562 - 0.1) / 1.4e-4).abs() < 1e-6);
        assert_eq!(d.rotor_rate, 1200.0);
    }

    #[test]
    fn drag_rating() {
        let load = LoadModel::drag_from_rating(0.3, 0.5, 700.0);
        assert!((load.torque(700.0) - 0.15).abs() < 1e-15);
        assert!((load.torque(-700.0) + 0.15).abs() < 1e-15);
    }

    #[test]
    fn identity_frame_is_transparent() {
        let v = Vector2::new(1.5, -0.25);
        assert_eq!(to_frame(&UnitVec::IDENTITY, &v), v);
    }

    /// Static-frame integration mapped into a rotating frame agrees with
    /// integrating the rotating-frame equations directly.
    #[test]
    fn frame_equivalence() {
        let p = table1();
        let omega = |t: f64| 3000.0 + 2.0e4 * t;
        let frame_rate = |t: f64| 2500.0 + 800.0 * (300.0 * t).sin();
        let u_s = |t: f64| Vector2::new(2.0 * (900.0 * t).cos(), 1.0 + (1300.0 * t).sin());

        // flat: static current (2), rotating current (2); rot: rotor, frame
        let mut x = Bundle::<4, 2> {
            flat: [0.5, -0.5, 0.0, 0.0],
            rot: [UnitVec::from_angle(0.3), UnitVec::from_angle(-1.0)],
        };
        let r0 = x.rot[1].rotate_back(&Vector2::new(0.5, -0.5));
        x.flat[2] = r0.x;
        x.flat[3] = r0.y;
        let dt = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..10_000 {
            let t0 = k as f64 * dt;
            x = rk4_step(&x, t0, dt, |t, s| {
                let plant = PlantState {
                    current: Vector2::new(s.flat[0], s.flat[1]),
                    rotor: s.rot[0],
                    mech_speed: 0.0,
                };
                let w = omega(t);
                let d = plant_derivative(&plant, &u_s(t), &p, SpeedSource::Exogenous { omega: w })?;
                let ir = Vector2::new(s.flat[2], s.flat[3]);
                let ur = to_frame(&s.rot[1], &u_s(t));
                let dr = rotating_frame_current_derivative(
                    &ir,
                    &ur,
                    &s.rot[0],
                    &s.rot[1],
                    w,
                    frame_rate(t),
                    &p,
                );
                Ok(Rates {
                    flat: [d.current.x, d.current.y, dr.x, dr.y],
                    rot: [w, frame_rate(t)],
                })
            })
            .unwrap();
            let mapped = to_frame(&x.rot[1], &Vector2::new(x.flat[0], x.flat[1]));
            worst = worst.max((mapped - Vector2::new(x.flat[2], x.flat[3])).norm());
        }
        assert!(worst < 1e-6, "frame mismatch {worst}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn frame_transform_is_an_isometry(a in -7.0f64..7.0, x in -100.0f64..100.0, y in -100.0f64..100.0) {
            let f = UnitVec::from_angle(a);
            let v = Vector2::new(x, y);
            let r = to_frame(&f, &v);
            prop_assert!((r.norm() - v.norm()).abs() <= 1e-12 * (1.0 + v.norm()));
            prop_assert!((from_frame(&f, &r) - v).norm() <= 1e-12 * (1.0 + v.norm()));
        }

        #[test]
        fn torque_is_bilinear(a in -4.0f64..4.0, i1 in -50.0f64..50.0, i2 in -50.0f64..50.0,
                              j1 in -50.0f64..50.0, j2 in -50.0f64..50.0, k in -3.0f64..3.0) {
            let p = table1();
            let mk = |c: Vector2<f64>| PlantState { current: c, rotor: UnitVec::from_angle(a), mech_speed: 0.0 };
            let (ia, ib) = (Vector2::new(i1, i2), Vector2::new(j1, j2));
            let lhs = torque(&mk(ia * k + ib), &p);
            let rhs = k * torque(&mk(ia), &p) + torque(&mk(ib), &p);
            prop_assert!((lhs - rhs).abs() < 1e-10);
            let mut p2 = p;
            p2.flux *= 2.0;
            prop_assert!((torque(&mk(ia), &p2) - 2.0 * torque(&mk(ia), &p)).abs() < 1e-12);
        }
    }
}
