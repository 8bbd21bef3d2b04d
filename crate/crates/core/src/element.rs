//! Chemical elements with the per-element data the pipeline needs:
//! standard atomic weight, single-bond covalent radius and a metal flag.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An element identified by atomic number. `0` is reserved for symbols
/// that did not resolve to a known element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(u8);

struct ElementData {
    symbol: &'static str,
    mass: f64,
    covalent_radius: f64,
    metal: bool,
}

macro_rules! elements {
    ($(($sym:literal, $mass:literal, $rad:literal, $metal:literal)),* $(,)?) => {
        &[$(ElementData { symbol: $sym, mass: $mass, covalent_radius: $rad, metal: $metal }),*]
    };
}

// Masses: IUPAC conventional standard atomic weights (Da).
// Radii: Cordero et al. single-bond covalent radii (Å), low-spin where split.
static TABLE: &[ElementData] = elements![
    ("H", 1.008, 0.31, false),
    ("He", 4.0026, 0.28, false),
    ("Li", 6.94, 1.28, true),
    ("Be", 9.0122, 0.96, true),
    ("B", 10.81, 0.84, false),
    ("C", 12.011, 0.76, false),
    ("N", 14.007, 0.71, false),
    ("O", 15.999, 0.66, false),
    ("F", 18.998, 0.57, false),
    ("Ne", 20.180, 0.58, false),
    ("Na", 22.990, 1.66, true),
    ("Mg", 24.305, 1.41, true),
    ("Al", 26.982, 1.21, true),
    ("Si", 28.085, 1.11, false),
    ("P", 30.974, 1.07, false),
    ("S", 32.06, 1.05, false),
    ("Cl", 35.45, 1.02, false),
    ("Ar", 39.948, 1.06, false),
    ("K", 39.098, 2.03, true),
    ("Ca", 40.078, 1.76, true),
    ("Sc", 44.956, 1.70, true),
    ("Ti", 47.867, 1.60, true),
    ("V", 50.942, 1.53, true),
    ("Cr", 51.996, 1.39, true),
    ("Mn", 54.938, 1.39, true),
    ("Fe", 55.845, 1.32, true),
    ("Co", 58.933, 1.26, true),
    ("Ni", 58.693, 1.24, true),
    ("Cu", 63.546, 1.32, true),
    ("Zn", 65.38, 1.22, true),
    ("Ga", 69.723, 1.22, true),
    ("Ge", 72.630, 1.20, false),
    ("As", 74.922, 1.19, false),
    ("Se", 78.971, 1.20, false),
    ("Br", 79.904, 1.20, false),
    ("Kr", 83.798, 1.16, false),
    ("Rb", 85.468, 2.20, true),
    ("Sr", 87.62, 1.95, true),
    ("Y", 88.906, 1.90, true),
    ("Zr", 91.224, 1.75, true),
    ("Nb", 92.906, 1.64, true),
    ("Mo", 95.95, 1.54, true),
    ("Tc", 98.0, 1.47, true),
    ("Ru", 101.07, 1.46, true),
    ("Rh", 102.91, 1.42, true),
    ("Pd", 106.42, 1.39, true),
    ("Ag", 107.87, 1.45, true),
    ("Cd", 112.41, 1.44, true),
    ("In", 114.82, 1.42, true),
    ("Sn", 118.71, 1.39, true),
    ("Sb", 121.76, 1.39, false),
    ("Te", 127.60, 1.38, false),
    ("I", 126.90, 1.39, false),
    ("Xe", 131.29, 1.40, false),
    ("Cs", 132.91, 2.44, true),
    ("Ba", 137.33, 2.15, true),
    ("La", 138.91, 2.07, true),
    ("Ce", 140.12, 2.04, true),
    ("Pr", 140.91, 2.03, true),
    ("Nd", 144.24, 2.01, true),
    ("Pm", 145.0, 1.99, true),
    ("Sm", 150.36, 1.98, true),
    ("Eu", 151.96, 1.98, true),
    ("Gd", 157.25, 1.96, true),
    ("Tb", 158.93, 1.94, true),
    ("Dy", 162.50, 1.92, true),
    ("Ho", 164.93, 1.92, true),
    ("Er", 167.26, 1.89, true),
    ("Tm", 168.93, 1.90, true),
    ("Yb", 173.05, 1.87, true),
    ("Lu", 174.97, 1.87, true),
    ("Hf", 178.49, 1.75, true),
    ("Ta", 180.95, 1.70, true),
    ("W", 183.84, 1.62, true),
    ("Re", 186.21, 1.51, true),
    ("Os", 190.23, 1.44, true),
    ("Ir", 192.22, 1.41, true),
    ("Pt", 195.08, 1.36, true),
    ("Au", 196.97, 1.36, true),
    ("Hg", 200.59, 1.32, true),
    ("Tl", 204.38, 1.45, true),
    ("Pb", 207.2, 1.46, true),
    ("Bi", 208.98, 1.48, true),
    ("Po", 209.0, 1.40, true),
    ("At", 210.0, 1.50, false),
    ("Rn", 222.0, 1.50, false),
];

impl Element {
    pub const UNKNOWN: Element = Element(0);
    pub const H: Element = Element(1);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const FE: Element = Element(26);
    pub const ZN: Element = Element(30);
    pub const SE: Element = Element(34);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    /// Largest atomic number in the table.
    pub const MAX_Z: u8 = 86;

    /// Builds an element from its atomic number; out-of-table numbers map
    /// to [`Element::UNKNOWN`].
    pub fn from_atomic_number(z: u8) -> Element {
        if z <= Self::MAX_Z {
            Element(z)
        } else {
            Element::UNKNOWN
        }
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn is_unknown(self) -> bool {
        self.0 == 0
    }

    fn data(self) -> Option<&'static ElementData> {
        if self.0 == 0 {
            None
        } else {
            TABLE.get(self.0 as usize - 1)
        }
    }

    pub fn symbol(self) -> &'static str {
        self.data().map_or("X", |d| d.symbol)
    }

    /// Standard atomic weight in Daltons.
    pub fn mass(self) -> Option<f64> {
        self.data().map(|d| d.mass)
    }

    /// Single-bond covalent radius in Å.
    pub fn covalent_radius(self) -> Option<f64> {
        self.data().map(|d| d.covalent_radius)
    }

    pub fn is_metal(self) -> bool {
        self.data().is_some_and(|d| d.metal)
    }

    pub fn is_hydrogen(self) -> bool {
        self == Element::H
    }

    /// Resolves a symbol case-insensitively ("FE", "Fe", "fe"). Deuterium
    /// is folded onto hydrogen. Unrecognised symbols give `UNKNOWN`.
    pub fn from_symbol(symbol: &str) -> Element {
        let s = symbol.trim();
        if s.eq_ignore_ascii_case("D") {
            return Element::H;
        }
        TABLE
            .iter()
            .position(|d| d.symbol.eq_ignore_ascii_case(s))
            .map_or(Element::UNKNOWN, |i| Element(i as u8 + 1))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Element::from_symbol(s))
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let e = Element::from_symbol(&s);
        if e.is_unknown() {
            return Err(serde::de::Error::custom(format!("unknown element symbol {s:?}")));
        }
        Ok(e)
    }
}
