//! Boolean functions on `{-1,1}^k` and their Fourier expansion.
//!
//! Points and subsets are both bitmasks over `k` bits. For a point `x`, bit
//! `b` set means coordinate `b` is `-1`; for a subset `S`, bit `b` set means
//! `b ∈ S`. The character `χ_S(x)` is then the parity of `popcount(S & x)`.

use std::fmt;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// `χ_S(x)` as `±1`.
#[inline]
pub fn character(subset: usize, point: usize) -> i8 {
    if (subset & point).count_ones() & 1 == 0 {
        1
    } else {
        -1
    }
}

fn dimension_of(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return invalid(format!("table length {len} is not a power of two"));
    }
    Ok(len.trailing_zeros())
}

/// A `±1`-valued function on `{-1,1}^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    k: u32,
    table: Vec<i8>,
}

impl BooleanFunction {
    pub fn from_table(table: Vec<i8>) -> Result<Self> {
        let k = dimension_of(table.len())?;
        if let Some(pos) = table.iter().position(|&v| v != 1 && v != -1) {
            return invalid(format!("entry {pos} is {} (expected ±1)", table[pos]));
        }
        Ok(BooleanFunction { k, table })
    }

    pub fn from_fn(k: u32, mut f: impl FnMut(usize) -> i8) -> Result<Self> {
        Self::from_table((0..1usize << k).map(&mut f).collect())
    }

    /// Truth table from a bitmask: bit `x` set means `f(x) = -1`.
    pub fn from_mask(k: u32, mask: u64) -> Self {
        assert!(k <= 6, "mask encoding needs 2^k <= 64");
        let table = (0..1usize << k)
            .map(|x| if (mask >> x) & 1 == 1 { -1 } else { 1 })
            .collect();
        BooleanFunction { k, table }
    }

    pub fn constant(k: u32, value: i8) -> Self {
        assert!(value == 1 || value == -1);
        BooleanFunction {
            k,
            table: vec![value; 1 << k],
        }
    }

    /// The Long Code of `j`: `x ↦ x_j`.
    pub fn dictator(k: u32, j: u32) -> Self {
        assert!(j < k, "dictator coordinate {j} out of range for k={k}");
        Self::from_fn(k, |x| if (x >> j) & 1 == 1 { -1 } else { 1 }).unwrap()
    }

    pub fn anti_dictator(k: u32, j: u32) -> Self {
        Self::dictator(k, j).negate()
    }

    pub fn parity(k: u32, subset: usize) -> Self {
        Self::from_fn(k, |x| character(subset, x)).unwrap()
    }

    /// Majority of the coordinates; ties go to `x_0`.
    pub fn majority(k: u32) -> Self {
        assert!(k >= 1);
        Self::from_fn(k, |x| {
            let minus = x.count_ones() as i32;
            let plus = k as i32 - minus;
            match plus.cmp(&minus) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => {
                    if x & 1 == 1 {
                        -1
                    } else {
                        1
                    }
                }
            }
        })
        .unwrap()
    }

    pub fn random<R: Rng + ?Sized>(k: u32, rng: &mut R) -> Self {
        let table = (0..1usize << k)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        BooleanFunction { k, table }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn table(&self) -> &[i8] {
        &self.table
    }

    #[inline]
    pub fn eval(&self, x: usize) -> i8 {
        self.table[x]
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.k <= 6, "mask encoding needs 2^k <= 64");
        self.table
            .iter()
            .enumerate()
            .fold(0u64, |m, (x, &v)| if v < 0 { m | (1 << x) } else { m })
    }

    pub fn negate(&self) -> Self {
        BooleanFunction {
            k: self.k,
            table: self.table.iter().map(|v| -v).collect(),
        }
    }

    /// Pointwise product `(fg)(x) = f(x)g(x)`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::ShapeMismatch(format!("k={} vs k={}", self.k, other.k)));
        }
        Ok(BooleanFunction {
            k: self.k,
            table: self.table.iter().zip(&other.table).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn count_plus(&self) -> usize {
        self.table.iter().filter(|&&v| v > 0).count()
    }

    pub fn is_balanced(&self) -> bool {
        2 * self.count_plus() == self.table.len()
    }

    /// `E_x f(x)`, the empty-set coefficient.
    pub fn mean(&self) -> f64 {
        self.table.iter().map(|&v| f64::from(v)).sum::<f64>() / self.table.len() as f64
    }

    pub fn to_real<T: Scalar>(&self) -> RealFunction<T> {
        RealFunction {
            k: self.k,
            values: self.table.iter().map(|&v| T::of(f64::from(v))).collect(),
        }
    }

    pub fn spectrum<T: Scalar>(&self) -> FourierSpectrum<T> {
        wht(&self.to_real())
    }
}

/// A real-valued function on `{-1,1}^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealFunction<T> {
    k: u32,
    values: Vec<T>,
}

impl<T: Scalar> RealFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let k = dimension_of(values.len())?;
        Ok(RealFunction { k, values })
    }

    pub fn from_fn(k: u32, f: impl FnMut(usize) -> T) -> Self {
        RealFunction {
            k,
            values: (0..1usize << k).map(f).collect(),
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scale(&self, factor: T) -> Self {
        RealFunction {
            k: self.k,
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::ShapeMismatch(format!("k={} vs k={}", self.k, other.k)));
        }
        Ok(RealFunction {
            k: self.k,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Fourier coefficients indexed by subset bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum<T> {
    k: u32,
    coeffs: Vec<T>,
}

impl<T: Scalar> FourierSpectrum<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        let k = dimension_of(coeffs.len())?;
        Ok(FourierSpectrum { k, coeffs })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, subset: usize) -> T {
        self.coeffs[subset]
    }

    /// `Σ_S f̂_S²`.
    pub fn parseval_mass(&self) -> T {
        self.coeffs.iter().map(|&c| c * c).sum()
    }

    /// Mass on subsets of size greater than `level`.
    pub fn tail_mass(&self, level: u32) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| s.count_ones() > level)
            .map(|(_, &c)| c * c)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn inverse(&self) -> RealFunction<T> {
        inverse_wht(self)
    }
}

impl<T: Scalar> fmt::Display for FourierSpectrum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.k.max(1) as usize;
        for (s, c) in self.coeffs.iter().enumerate() {
            writeln!(f, "S_{s:0width$b} {:.16e}", c.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// Unnormalized in-place Walsh–Hadamard butterfly.
pub fn fwht_in_place<T: Scalar>(data: &mut [T]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in (0..n).step_by(2 * half) {
            for i in block..block + half {
                let a = data[i];
                let b = data[i + half];
                data[i] = a + b;
                data[i + half] = a - b;
            }
        }
        half *= 2;
    }
}

/// `f̂_S = 2^{-k} Σ_x f(x) χ_S(x)` in `O(N log N)`.
pub fn wht<T: Scalar>(f: &RealFunction<T>) -> FourierSpectrum<T> {
    let mut coeffs = f.values.clone();
    fwht_in_place(&mut coeffs);
    let scale = T::one() / T::from_count(coeffs.len());
    for c in &mut coeffs {
        *c *= scale;
    }
    FourierSpectrum { k: f.k, coeffs }
}

/// Transform of a raw table; rejects lengths that are not powers of two.
pub fn wht_values<T: Scalar>(values: &[T]) -> Result<FourierSpectrum<T>> {
    Ok(wht(&RealFunction::new(values.to_vec())?))
}

/// Direct `O(N²)` evaluation of the transform.
pub fn wht_naive<T: Scalar>(f: &RealFunction<T>) -> FourierSpectrum<T> {
    let n = f.values.len();
    let scale = T::one() / T::from_count(n);
    let coeffs = (0..n)
        .map(|s| {
            let mut acc = T::zero();
            for (x, &v) in f.values.iter().enumerate() {
                if character(s, x) > 0 {
                    acc += v;
                } else {
                    acc -= v;
                }
            }
            acc * scale
        })
        .collect();
    FourierSpectrum { k: f.k, coeffs }
}

pub fn inverse_wht<T: Scalar>(spectrum: &FourierSpectrum<T>) -> RealFunction<T> {
    let mut values = spectrum.coeffs.clone();
    fwht_in_place(&mut values);
    RealFunction { k: spectrum.k, values }
}

/// `T_ρ f = Σ_S ρ^{|S|} f̂_S χ_S`.
pub fn apply_noise_operator<T: Scalar>(f: &RealFunction<T>, rho: T) -> RealFunction<T> {
    let mut spectrum = wht(f);
    let powers: Vec<T> = (0..=f.k).map(|d| rho.powi(d as i32)).collect();
    for (s, c) in spectrum.coeffs.iter_mut().enumerate() {
        *c *= powers[s.count_ones() as usize];
    }
    inverse_wht(&spectrum)
}

/// `‖f‖_p = (2^{-k} Σ_x |f(x)|^p)^{1/p}`.
pub fn lp_norm<T: Scalar>(f: &RealFunction<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::OutOfRange(format!("p = {p} < 1")));
    }
    let mean = f.values.iter().map(|v| v.abs().powf(p)).sum::<T>() / T::from_count(f.values.len());
    Ok(mean.powf(T::one() / p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypercontractivityCheck<T> {
    /// `‖T_ρ f‖_q`
    pub lhs: T,
    /// `‖f‖_p`
    pub rhs: T,
    pub holds: bool,
}

/// Evaluates both sides of `‖T_ρ f‖_q ≤ ‖f‖_p` on the admissible range
/// `1 < p < q`, `0 ≤ ρ ≤ √((p-1)/(q-1))`.
pub fn bonami_beckner_check<T: Scalar>(
    f: &RealFunction<T>,
    p: T,
    q: T,
    rho: T,
) -> Result<HypercontractivityCheck<T>> {
    if !(p > T::one() && q > p) {
        return Err(Error::OutOfRange(format!("need 1 < p < q, got p={p}, q={q}")));
    }
    let rho_max = ((p - T::one()) / (q - T::one())).sqrt();
    // the bound is computed in floating point; admit rounding in the last ulp
    if !(rho >= T::zero() && rho <= rho_max * (T::one() + T::epsilon())) {
        return Err(Error::OutOfRange(format!("rho={rho} outside [0, {rho_max}]")));
    }
    let lhs = lp_norm(&apply_noise_operator(f, rho), q)?;
    let rhs = lp_norm(f, p)?;
    Ok(HypercontractivityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + T::of(1e-9),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuntaDiagnostics {
    /// `Σ_{|S| > k_cut} f̂_S²`
    pub tail_mass: f64,
    /// `Σ_{|f̂_S| ≤ γ·4^{-k_cut²}} f̂_S²`
    pub small_coeff_mass: f64,
}

pub fn junta_diagnostics(f: &BooleanFunction, k_cut: u32, gamma: f64) -> JuntaDiagnostics {
    let spectrum: FourierSpectrum<f64> = f.spectrum();
    let threshold = gamma * 4f64.powf(-f64::from(k_cut).powi(2));
    let small_coeff_mass = spectrum
        .coeffs
        .iter()
        .filter(|c| c.abs() <= threshold)
        .map(|c| c * c)
        .sum();
    JuntaDiagnostics {
        tail_mass: spectrum.tail_mass(k_cut),
        small_coeff_mass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dictator_spectrum_is_a_point_mass() {
        let s: FourierSpectrum<f64> = BooleanFunction::dictator(2, 0).spectrum();
        assert_eq!(s.coeffs(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_spectrum() {
        let s: FourierSpectrum<f64> = BooleanFunction::constant(3, 1).spectrum();
        assert_eq!(s.coeff(0), 1.0);
        assert!(s.coeffs()[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn random_function_matches_naive_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = BooleanFunction::random(4, &mut rng).to_real::<f64>();
        assert!(wht(&f).max_abs_diff(&wht_naive(&f)) < 1e-12);
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(wht_values(&[1.0f64, 2.0, 3.0]).is_err());
        assert!(BooleanFunction::from_table(vec![1, -1, 1]).is_err());
        assert!(BooleanFunction::from_table(vec![1, 0]).is_err());
    }

    #[test]
    fn noise_on_parity_scales_single_coefficient() {
        let f = BooleanFunction::parity(3, 0b111).to_real::<f64>();
        let g = apply_noise_operator(&f, 0.5);
        assert!(g.max_abs_diff(&f.scale(0.125)) < 1e-15);
        assert!(apply_noise_operator(&f, 1.0).max_abs_diff(&f) < 1e-15);
    }

    #[test]
    fn noise_on_majority_scales_its_spectrum() {
        let maj = BooleanFunction::majority(3);
        let spectrum: FourierSpectrum<f64> = maj.spectrum();
        // majority of three: 1/2 on singletons, -1/2 on the full set
        assert_eq!(spectrum.coeffs(), &[0.0, 0.5, 0.5, 0.0, 0.5, 0.0, 0.0, -0.5]);
        let out = wht(&apply_noise_operator(&maj.to_real::<f64>(), 0.5));
        for s in 0..8 {
            let expected = spectrum.coeff(s) * 0.5f64.powi(s.count_ones() as i32);
            assert!((out.coeff(s) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = BooleanFunction::random(5, &mut rng).to_real::<f64>();
        for p in [1.0, 1.5, 2.0, 7.0] {
            assert!((lp_norm(&f, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let d2 = BooleanFunction::dictator(3, 1).to_real::<f64>().scale(2.0);
        assert!((lp_norm(&d2, 2.0).unwrap() - 2.0).abs() < 1e-15);
        let sum = BooleanFunction::dictator(2, 0)
            .to_real::<f64>()
            .add(&BooleanFunction::dictator(2, 1).to_real())
            .unwrap();
        assert_eq!(sum.values(), &[2.0, 0.0, 0.0, -2.0]);
        assert_eq!(lp_norm(&sum, 1.0).unwrap(), 1.0);
        assert!(lp_norm(&sum, 0.5).is_err());
    }

    #[test]
    fn bonami_beckner_constant_and_range() {
        let one = BooleanFunction::constant(3, 1).to_real::<f64>();
        let c = bonami_beckner_check(&one, 1.5, 3.0, 0.5).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-15 && (c.rhs - 1.0).abs() < 1e-15 && c.holds);
        assert!(bonami_beckner_check(&one, 1.5, 3.0, 0.9).is_err());
        assert!(bonami_beckner_check(&one, 2.0, 1.5, 0.1).is_err());
    }

    #[test]
    fn junta_examples() {
        let d = junta_diagnostics(&BooleanFunction::dictator(4, 2), 1, 3.9);
        assert_eq!(d, JuntaDiagnostics { tail_mass: 0.0, small_coeff_mass: 0.0 });
        let p = junta_diagnostics(&BooleanFunction::parity(4, 0b1111), 2, 1.0);
        assert_eq!(p.tail_mass, 1.0);
        // majority on 5 bits: level one carries 5·(3/8)² = 45/64
        let m = junta_diagnostics(&BooleanFunction::majority(5), 1, 1.0);
        assert!((m.tail_mass - 19.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn spectrum_display_lines() {
        let s: FourierSpectrum<f64> = BooleanFunction::dictator(2, 1).spectrum();
        let text = s.to_string();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("S_10 1.0000000000000000e0"));
    }

    #[test]
    fn f32_kernel() {
        let f = BooleanFunction::majority(3).to_real::<f32>();
        let back = inverse_wht(&wht(&f));
        assert_eq!(back, f);
    }
}
