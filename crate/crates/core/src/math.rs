//! Float math that works with and without `std`.
//!
//! Under `std` these forward to the intrinsic `f64` methods; under
//! `no_std` they route through `libm`. Call sites use these shims instead
//! of the inherent methods so the crate compiles in both configurations.

macro_rules! shim {
    ($($name:ident),* $(,)?) => {
        $(
            #[cfg(feature = "std")]
            #[inline(always)]
            pub fn $name(x: f64) -> f64 {
                f64::$name(x)
            }
            #[cfg(not(feature = "std"))]
            #[inline(always)]
            pub fn $name(x: f64) -> f64 {
                libm::$name(x)
            }
        )*
    };
}

shim!(exp, sqrt, tanh, sin, cos, log2);

#[cfg(feature = "std")]
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    f64::ln(x)
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn ln_1p(x: f64) -> f64 {
    f64::ln_1p(x)
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// Logistic function, numerically stable for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}
