use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::sq_dist;
use crate::scalar::Scalar;

/// Stationary isotropic covariance families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Rbf,
    Matern52,
}

/// Amplitude `c`, length scale `λ` and noise variance `s²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<T> {
    pub amplitude: T,
    pub length_scale: T,
    pub noise_var: T,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(amplitude: T, length_scale: T, noise_var: T) -> Self {
        Self {
            amplitude,
            length_scale,
            noise_var,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.amplitude > T::zero()
            && self.length_scale > T::zero()
            && self.noise_var >= T::zero()
            && self.amplitude.is_finite()
            && self.length_scale.is_finite()
            && self.noise_var.is_finite()
    }
}

impl Kernel {
    /// Unit-amplitude correlation as a function of the squared distance.
    #[inline]
    pub fn correlation<T: Scalar>(self, sq: T, length_scale: T) -> T {
        match self {
            Kernel::Rbf => (-sq / (T::lit(2.0) * length_scale * length_scale)).exp(),
            Kernel::Matern52 => {
                let r = T::lit(5.0).sqrt() * sq.sqrt() / length_scale;
                (T::one() + r + r * r / T::lit(3.0)) * (-r).exp()
            }
        }
    }

    /// `c·corr(u, v)`, the noise-free part of the kernel.
    #[inline]
    pub fn signal<T: Scalar>(self, u: &[T], v: &[T], p: &KernelParams<T>) -> T {
        p.amplitude * self.correlation(sq_dist(u, v), p.length_scale)
    }

    /// Full kernel value, including `s²` when `u` and `v` coincide exactly.
    pub fn eval<T: Scalar>(self, u: &[T], v: &[T], p: &KernelParams<T>) -> T {
        let k = self.signal(u, v, p);
        if u == v {
            k + p.noise_var
        } else {
            k
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Rbf => "rbf",
            Kernel::Matern52 => "matern52",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" | "se" | "squared-exponential" => Ok(Kernel::Rbf),
            "matern52" | "matern" | "matern-5/2" => Ok(Kernel::Matern52),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

/// `c·exp(−‖u−v‖²/(2λ²)) + s²·[u = v]`.
pub fn kernel_rbf<T: Scalar>(u: &[T], v: &[T], p: &KernelParams<T>) -> T {
    Kernel::Rbf.eval(u, v, p)
}

/// Matérn ν = 5/2 with amplitude `c`, length scale `λ`, plus `s²·[u = v]`.
pub fn kernel_matern52<T: Scalar>(u: &[T], v: &[T], p: &KernelParams<T>) -> T {
    Kernel::Matern52.eval(u, v, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_values() {
        let p = KernelParams::<f64>::new(1.0, 1.0, 0.1);
        assert!((kernel_rbf(&[0.3, 0.2], &[0.3, 0.2], &p) - 1.1).abs() < 1e-15);
        let p = KernelParams::<f64>::new(1.0, 1.0, 0.0);
        let v = kernel_rbf(&[0.0, 0.0], &[1.0, 1.0], &p);
        assert!((v - 0.367879441171442).abs() < 1e-12);
        let far = kernel_rbf(&[0.0], &[40.0], &p);
        assert!(far >= 0.0 && far < 1e-300);
    }

    #[test]
    fn matern_values() {
        let p = KernelParams::<f64>::new(2.0, 0.7, 0.05);
        assert!((kernel_matern52(&[0.1], &[0.1], &p) - 2.05).abs() < 1e-15);
        let p = KernelParams::<f64>::new(1.0, 0.5, 0.0);
        let v = kernel_matern52(&[0.0, 0.0], &[0.3, 0.4], &p);
        assert!((v - 0.5239941088318203).abs() < 1e-12);
        let a = [0.1, 0.9, 0.3];
        let b = [0.4, 0.2, 0.8];
        assert_eq!(kernel_matern52(&a, &b, &p), kernel_matern52(&b, &a, &p));
    }

    #[test]
    fn kernel_names_parse() {
        assert_eq!("RBF".parse::<Kernel>().unwrap(), Kernel::Rbf);
        assert_eq!("matern52".parse::<Kernel>().unwrap(), Kernel::Matern52);
        assert!("linear".parse::<Kernel>().is_err());
    }
}
