//! Classical fixed-step RK4 over `ℝᴺ × (S¹)ᴹ`.
//!
//! Euclidean components follow the textbook scheme. Each circle component is
//! carried as a [`UnitVec`]; stage states are obtained by rotating the step's
//! initial point by the previous stage rate, and the final update is a single
//! exact rotation by the RK4-weighted average rate. On the (abelian) circle
//! this is RK4 on the angle without ever leaving the manifold.

use crate::error::{Error, Result};
use crate::so2::UnitVec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bundle<const N: usize, const M: usize> {
    pub flat: [f64; N],
    pub rot: [UnitVec; M],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<const N: usize, const M: usize> {
    pub flat: [f64; N],
    /// Angular rates of the circle components [rad/s].
    pub rot: [f64; M],
}

impl<const N: usize, const M: usize> Rates<N, M> {
    fn is_finite(&self) -> bool {
        self.flat.iter().chain(self.rot.iter()).all(|v| v.is_finite())
    }
}

fn advance<const N: usize, const M: usize>(
    x: &Bundle<N, M>,
    k: &Rates<N, M>,
    h: f64,
) -> Bundle<N, M> {
    let mut out = *x;
    for (o, d) in out.flat.iter_mut().zip(k.flat.iter()) {
        *o += h * d;
    }
    for (o, r) in out.rot.iter_mut().zip(k.rot.iter()) {
        *o = o.step(*r, h);
    }
    out
}

/// One RK4 step from `(t, x)`. A non-finite stage derivative aborts the step.
pub fn rk4_step<const N: usize, const M: usize, F>(
    x: &Bundle<N, M>,
    t: f64,
    dt: f64,
    mut f: F,
) -> Result<Bundle<N, M>>
where
    F: FnMut(f64, &Bundle<N, M>) -> Result<Rates<N, M>>,
{
    let mut eval = |tt: f64, s: &Bundle<N, M>| -> Result<Rates<N, M>> {
        let k = f(tt, s)?;
        if k.is_finite() {
            Ok(k)
        } else {
            Err(Error::Divergence {
                t: tt,
                detail: "non-finite derivative".into(),
            })
        }
    };
    let h = 0.5 * dt;
    let k1 = eval(t, x)?;
    let k2 = eval(t + h, &advance(x, &k1, h))?;
    let k3 = eval(t + h, &advance(x, &k2, h))?;
    let k4 = eval(t + dt, &advance(x, &k3, dt))?;
    let mut avg = k1;
    for i in 0..N {
        avg.flat[i] = (k1.flat[i] + 2.0 * k2.flat[i] + 2.0 * k3.flat[i] + k4.flat[i]) / 6.0;
    }
    for i in 0..M {
        avg.rot[i] = (k1.rot[i] + 2.0 * k2.rot[i] + 2.0 * k3.rot[i] + k4.rot[i]) / 6.0;
    }
    Ok(advance(x, &avg, dt))
}
