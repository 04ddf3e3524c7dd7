//! Age-of-information scheduling over a simultaneously transmitting and
//! reflecting surface with wireless power transfer.
//!
//! Per slot, an alternating optimizer picks which information stream to
//! serve, the surface coefficients, and the BS beams, subject to SNR and
//! harvested-energy targets. [`sim`] drives episodes and sweeps on top.

pub mod aoi;
pub mod channel;
pub mod cli;
pub mod optimizer;
pub mod sim;
pub mod star_ris;

/// Half-space of the surface a user is served from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Transmit,
    Reflect,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Transmit, Side::Reflect];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn other(self) -> Side {
        match self {
            Side::Transmit => Side::Reflect,
            Side::Reflect => Side::Transmit,
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            Side::Transmit => "t",
            Side::Reflect => "r",
        }
    }
}
