//! Unit-voltage basis fields of rectangular electrodes in a grounded plane.
//!
//! An electrode held at 1 V with everything else grounded produces the
//! potential `Ω / 2π` at a point above the plane, where `Ω` is the solid
//! angle the electrode subtends. For a rectangle the solid angle is a signed
//! sum over its four corners of `atan2(u v, z R)` with `u`, `v` the in-plane
//! offsets from the point to the corner and `R = sqrt(u² + v² + z²)`.
//! Derivatives up to third order are closed-form.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::ops::{Add, AddAssign, Mul, Neg};

use nalgebra::{Matrix3, Scalar, Vector3};
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::geometry::{ElectrodeLayout, Rect};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("field point must lie above the electrode plane (z = {z:e} m)")]
    Domain { z: f64 },
    #[error("unknown electrode `{0}`")]
    UnknownElectrode(alloc::string::String),
    #[error("expected {expected} electrode amplitudes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Highest derivative order to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Potential,
    Gradient,
    Hessian,
    Third,
}

/// Scalar type usable as an electrode amplitude: real volts or a complex
/// rf phasor.
pub trait Amplitude:
    Scalar + Copy + Zero + Add<Output = Self> + AddAssign + Mul<f64, Output = Self> + Neg<Output = Self>
{
}

impl Amplitude for f64 {}
impl Amplitude for Complex64 {}

/// Fully symmetric third-derivative tensor, stored by its ten independent
/// components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor3<T> {
    c: [T; 10],
}

// component order: xxx xxy xxz xyy xyz xzz yyy yyz yzz zzz
const fn tensor_slot(i: usize, j: usize, k: usize) -> usize {
    // sort the indices
    let (mut a, mut b, mut c) = (i, j, k);
    if a > b {
        let t = a;
        a = b;
        b = t;
    }
    if b > c {
        let t = b;
        b = c;
        c = t;
    }
    if a > b {
        let t = a;
        a = b;
        b = t;
    }
    match (a, b, c) {
        (0, 0, 0) => 0,
        (0, 0, 1) => 1,
        (0, 0, 2) => 2,
        (0, 1, 1) => 3,
        (0, 1, 2) => 4,
        (0, 2, 2) => 5,
        (1, 1, 1) => 6,
        (1, 1, 2) => 7,
        (1, 2, 2) => 8,
        _ => 9,
    }
}

impl<T: Amplitude> Tensor3<T> {
    pub fn zeros() -> Self {
        Self { c: [T::zero(); 10] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.c[tensor_slot(i, j, k)]
    }

    fn add_scaled(&mut self, other: &Tensor3<f64>, s: T) {
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += s * *b;
        }
    }

    /// Contraction `Σ_k T_ijk w_k`, a symmetric matrix.
    pub fn contract(&self, w: &Vector3<T>) -> Matrix3<T>
    where
        T: Mul<Output = T>,
    {
        let mut m = Matrix3::from_element(T::zero());
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = T::zero();
                for k in 0..3 {
                    acc += self.get(i, j, k) * w[k];
                }
                m[(i, j)] = acc;
            }
        }
        m
    }
}

/// Potential and derivatives at one point, linear in the electrode
/// amplitudes. The electric field is `-gradient`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample<T: Amplitude> {
    pub potential: T,
    pub gradient: Vector3<T>,
    pub hessian: Matrix3<T>,
    pub third: Option<Tensor3<T>>,
}

impl<T: Amplitude> FieldSample<T> {
    pub fn zeros(order: Order) -> Self {
        Self {
            potential: T::zero(),
            gradient: Vector3::from_element(T::zero()),
            hessian: Matrix3::from_element(T::zero()),
            third: (order >= Order::Third).then(Tensor3::zeros),
        }
    }

    pub fn field(&self) -> Vector3<T> {
        self.gradient.map(|g| -g)
    }

    fn add_scaled(&mut self, basis: &FieldSample<f64>, s: T) {
        self.potential += s * basis.potential;
        for k in 0..3 {
            self.gradient[k] += s * basis.gradient[k];
        }
        for k in 0..9 {
            self.hessian[k] += s * basis.hessian[k];
        }
        if let (Some(t), Some(b)) = (self.third.as_mut(), basis.third.as_ref()) {
            t.add_scaled(b, s);
        }
    }
}

/// Derivatives of `f(u, v, z) = atan2(u v, z R)` in the corner coordinates.
struct CornerJet {
    f: f64,
    d: [f64; 3],
    // uu vv zz uv uz vz
    d2: [f64; 6],
    // uuu uuv uuz uvv uvz uzz vvv vvz vzz zzz
    d3: [f64; 10],
}

fn d_uuu(u: f64, v: f64, z: f64, a: f64, r5: f64) -> f64 {
    let (u2, v2, z2) = (u * u, v * v, z * z);
    let (u4, v4, z4) = (u2 * u2, v2 * v2, z2 * z2);
    let q = -12.0 * u4 * u2
        - 15.0 * u4 * v2
        - 21.0 * u4 * z2
        - 6.0 * u2 * v4
        - 10.0 * u2 * v2 * z2
        - 6.0 * u2 * z4
        + 2.0 * v4 * z2
        + 5.0 * v2 * z4
        + 3.0 * z4 * z2;
    -v * z * q / (a * a * a * r5)
}

fn d_uuz(u: f64, v: f64, z: f64, a: f64, r5: f64) -> f64 {
    let (u2, v2, z2) = (u * u, v * v, z * z);
    let (u4, v4, z4) = (u2 * u2, v2 * v2, z2 * z2);
    let s = -3.0 * u4 * u2 - 5.0 * u4 * v2 + 6.0 * u4 * z2 - 2.0 * u2 * v4
        + 10.0 * u2 * v2 * z2
        + 21.0 * u2 * z4
        + 6.0 * v4 * z2
        + 15.0 * v2 * z4
        + 12.0 * z4 * z2;
    u * v * s / (a * a * a * r5)
}

fn corner_jet(u: f64, v: f64, z: f64, order: Order) -> CornerJet {
    let (u2, v2, z2) = (u * u, v * v, z * z);
    let r2 = u2 + v2 + z2;
    let r = r2.sqrt();
    let a = u2 + z2;
    let b = v2 + z2;
    let mut jet = CornerJet {
        f: (u * v).atan2(z * r),
        d: [0.0; 3],
        d2: [0.0; 6],
        d3: [0.0; 10],
    };
    if order == Order::Potential {
        return jet;
    }
    jet.d = [
        v * z / (a * r),
        u * z / (b * r),
        -u * v * (r2 + z2) / (a * b * r),
    ];
    if order == Order::Gradient {
        return jet;
    }
    let r3 = r2 * r;
    let uu = -u * v * z * (2.0 * r2 + a) / (a * a * r3);
    let vv = -u * v * z * (2.0 * r2 + b) / (b * b * r3);
    let p = u2 + v2;
    let (u4, v4, z4) = (u2 * u2, v2 * v2, z2 * z2);
    let zz_poly = 2.0 * u4 * u2
        + 3.0 * u4 * v2
        + 7.0 * u4 * z2
        + 3.0 * u2 * v4
        + 12.0 * u2 * v2 * z2
        + 11.0 * u2 * z4
        + 2.0 * v4 * v2
        + 7.0 * v4 * z2
        + 11.0 * v2 * z4
        + 6.0 * z4 * z2;
    let zz = u * v * z * zz_poly / (a * a * b * b * r3);
    let uv = z / r3;
    let uz = -v * ((z2 - u2) * p + 2.0 * z4) / (a * a * r3);
    let vz = -u * ((z2 - v2) * p + 2.0 * z4) / (b * b * r3);
    jet.d2 = [uu, vv, zz, uv, uz, vz];
    if order == Order::Hessian {
        return jet;
    }
    let r5 = r3 * r2;
    let uuu = d_uuu(u, v, z, a, r5);
    let vvv = d_uuu(v, u, z, b, r5);
    let uuz = d_uuz(u, v, z, a, r5);
    let vvz = d_uuz(v, u, z, b, r5);
    let uuv = -3.0 * u * z / r5;
    let uvv = -3.0 * v * z / r5;
    let uvz = (p - 2.0 * z2) / r5;
    let uzz = -(uuu + uvv);
    let vzz = -(uuv + vvv);
    let zzz = -(uuz + vvz);
    jet.d3 = [uuu, uuv, uuz, uvv, uvz, uzz, vvv, vvz, vzz, zzz];
    jet
}

/// Accumulates one rectangle's unit-voltage potential and derivatives into
/// `out`, with derivatives taken with respect to the field point.
fn accumulate_rect(rect: &Rect, p: &Vector3<f64>, order: Order, out: &mut FieldSample<f64>) {
    let corners = [
        (rect.x_max, rect.y_max, 1.0),
        (rect.x_min, rect.y_max, -1.0),
        (rect.x_max, rect.y_min, -1.0),
        (rect.x_min, rect.y_min, 1.0),
    ];
    let s = 1.0 / TAU;
    for (cx, cy, sign) in corners {
        let jet = corner_jet(cx - p.x, cy - p.y, p.z, order);
        let w = sign * s;
        out.potential += w * jet.f;
        if order == Order::Potential {
            continue;
        }
        // d/dx = -d/du, d/dy = -d/dv
        out.gradient.x -= w * jet.d[0];
        out.gradient.y -= w * jet.d[1];
        out.gradient.z += w * jet.d[2];
        if order == Order::Gradient {
            continue;
        }
        let [uu, vv, zz, uv, uz, vz] = jet.d2;
        let h = &mut out.hessian;
        h[(0, 0)] += w * uu;
        h[(1, 1)] += w * vv;
        h[(2, 2)] += w * zz;
        h[(0, 1)] += w * uv;
        h[(1, 0)] += w * uv;
        h[(0, 2)] -= w * uz;
        h[(2, 0)] -= w * uz;
        h[(1, 2)] -= w * vz;
        h[(2, 1)] -= w * vz;
        if let Some(t) = out.third.as_mut() {
            let [uuu, uuv, uuz, uvv, uvz, uzz, vvv, vvz, vzz, zzz] = jet.d3;
            // sign (-1)^(number of x and y derivatives)
            let terms = [-uuu, -uuv, uuz, -uvv, uvz, -uzz, -vvv, vvz, -vzz, zzz];
            for (slot, val) in t.c.iter_mut().zip(terms) {
                *slot += w * val;
            }
        }
    }
}

/// Unit-voltage basis evaluator over a layout.
#[derive(Clone, Debug)]
pub struct FieldBasis {
    layout: ElectrodeLayout,
}

impl FieldBasis {
    pub fn new(layout: ElectrodeLayout) -> Self {
        Self { layout }
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, FieldError> {
        self.layout
            .index_of(name)
            .ok_or_else(|| FieldError::UnknownElectrode(name.into()))
    }

    /// Basis sample of electrode `index` at `point`.
    pub fn evaluate(
        &self,
        index: usize,
        point: &Vector3<f64>,
        order: Order,
    ) -> Result<FieldSample<f64>, FieldError> {
        check_domain(point)?;
        let mut out = FieldSample::zeros(order);
        for rect in &self.layout.electrodes[index].rects {
            accumulate_rect(rect, point, order, &mut out);
        }
        Ok(out)
    }

    /// Potential of `electrode` at 1 V, all others grounded.
    pub fn basis_potential(
        &self,
        electrode: &str,
        point: &Vector3<f64>,
    ) -> Result<f64, FieldError> {
        let i = self.index_of(electrode)?;
        Ok(self.evaluate(i, point, Order::Potential)?.potential)
    }

    pub fn basis_gradient(
        &self,
        electrode: &str,
        point: &Vector3<f64>,
    ) -> Result<Vector3<f64>, FieldError> {
        let i = self.index_of(electrode)?;
        Ok(self.evaluate(i, point, Order::Gradient)?.gradient)
    }

    pub fn basis_hessian(
        &self,
        electrode: &str,
        point: &Vector3<f64>,
    ) -> Result<Matrix3<f64>, FieldError> {
        let i = self.index_of(electrode)?;
        Ok(self.evaluate(i, point, Order::Hessian)?.hessian)
    }

    /// Linear superposition of named electrode amplitudes. Electrodes not
    /// listed are grounded.
    pub fn superpose<T: Amplitude>(
        &self,
        voltages: &[(&str, T)],
        point: &Vector3<f64>,
    ) -> Result<FieldSample<T>, FieldError> {
        let mut amps = alloc::vec![T::zero(); self.len()];
        for (name, v) in voltages {
            amps[self.index_of(name)?] += *v;
        }
        self.superpose_vector(&amps, point, Order::Hessian)
    }

    /// Superposition with one amplitude per electrode in layout order.
    pub fn superpose_vector<T: Amplitude>(
        &self,
        amplitudes: &[T],
        point: &Vector3<f64>,
        order: Order,
    ) -> Result<FieldSample<T>, FieldError> {
        if amplitudes.len() != self.len() {
            return Err(FieldError::LengthMismatch {
                expected: self.len(),
                got: amplitudes.len(),
            });
        }
        check_domain(point)?;
        let mut out = FieldSample::zeros(order);
        for (i, amp) in amplitudes.iter().enumerate() {
            if amp.is_zero() {
                continue;
            }
            let b = self.evaluate(i, point, order)?;
            out.add_scaled(&b, *amp);
        }
        Ok(out)
    }

    /// Unit-voltage samples of every electrode at `point`.
    pub fn evaluate_all(
        &self,
        point: &Vector3<f64>,
        order: Order,
    ) -> Result<Vec<FieldSample<f64>>, FieldError> {
        (0..self.len())
            .map(|i| self.evaluate(i, point, order))
            .collect()
    }
}

fn check_domain(point: &Vector3<f64>) -> Result<(), FieldError> {
    if point.z > 0.0 && point.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(FieldError::Domain { z: point.z })
    }
}

/// Potential of an infinite strip `x_min < x < x_max` (unbounded in y) held
/// at 1 V, the genuinely two-dimensional counterpart of a long rectangle.
pub fn strip_potential(x_min: f64, x_max: f64, x: f64, z: f64) -> Result<f64, FieldError> {
    if !(z > 0.0) {
        return Err(FieldError::Domain { z });
    }
    Ok(((x_max - x).atan2(z) - (x_min - x).atan2(z)) / PI)
}

/// Gradient `(∂x, ∂z)` of [`strip_potential`].
pub fn strip_gradient(x_min: f64, x_max: f64, x: f64, z: f64) -> Result<(f64, f64), FieldError> {
    if !(z > 0.0) {
        return Err(FieldError::Domain { z });
    }
    let (u1, u2) = (x_min - x, x_max - x);
    let r1 = u1 * u1 + z * z;
    let r2 = u2 * u2 + z * z;
    let dx = (-z / r2 + z / r1) / PI;
    let dz = (-u2 / r2 + u1 / r1) / PI;
    Ok((dx, dz))
}
