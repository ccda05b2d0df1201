//! Exact scalars and lattice bookkeeping.

mod cyclo;
mod eisenstein;
mod lattice;
mod parse;
mod pigraded;

use num_complex::Complex64;

pub use cyclo::CycloRational;
pub use eisenstein::EisensteinInt;
pub use lattice::*;
pub use parse::{parse_cyclo, parse_pigraded};
pub use pigraded::PiGraded;

/// `ω = e^{2πi/3}`.
pub const OMEGA: Complex64 = Complex64::new(-0.5, 0.866_025_403_784_438_6);

/// Numeric value of an exact scalar.
pub trait Embed {
    fn embed(&self) -> Complex64;
}

impl Embed for CycloRational {
    fn embed(&self) -> Complex64 {
        CycloRational::embed(self)
    }
}

impl Embed for PiGraded {
    fn embed(&self) -> Complex64 {
        PiGraded::embed(self)
    }
}

pub fn embed<T: Embed>(x: &T) -> Complex64 {
    x.embed()
}
