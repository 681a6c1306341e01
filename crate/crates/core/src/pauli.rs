//! Pauli strings in the symplectic (x-mask, z-mask) representation.
//!
//! Qubit `m` of an `n`-qubit string is bit `m` of each mask and the `m`-th
//! letter of its label. In dense matrices qubit 0 is the most significant
//! bit of the basis index, so the label `XZ` is the Kronecker product X⊗Z.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Maximum register width a mask can hold.
pub const MAX_QUBITS: usize = 64;

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    /// Digit used by word indices: I=0, X=1, Y=2, Z=3.
    pub fn digit(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    pub fn from_digit(d: usize) -> Self {
        Pauli::ALL[d & 3]
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// A Pauli word with a global phase `i^phase`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

/// Phase exponent picked up when multiplying single-qubit letters
/// `(x1,z1)·(x2,z2)`, in units of `i`.
fn letter_product_phase(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x1, z1, x2, z2) = (x1 as i32, z1 as i32, x2 as i32, z2 as i32);
    match (x1, z1) {
        (0, 0) => 0,
        (1, 1) => z2 - x2,
        (1, 0) => z2 * (2 * x2 - 1),
        _ => x2 * (1 - 2 * z2),
    }
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Self {
            n,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    /// Build from raw masks; bits above `n` are rejected.
    pub fn from_masks(n: usize, x: u64, z: u64) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooLarge {
                n,
                limit: MAX_QUBITS,
            });
        }
        if (x | z) & !mask(n) != 0 {
            return Err(Error::InvalidLabel(format!("masks exceed {n} qubits")));
        }
        Ok(Self { n, x, z, phase: 0 })
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut p = Self::identity(letters.len());
        for (m, l) in letters.iter().enumerate() {
            p.set(m, *l);
        }
        p
    }

    /// Single letter on qubit `m` of an `n`-qubit register.
    pub fn single(n: usize, m: usize, letter: Pauli) -> Self {
        let mut p = Self::identity(n);
        p.set(m, letter);
        p
    }

    /// Two letters on qubits `a` and `b`.
    pub fn pair(n: usize, a: usize, la: Pauli, b: usize, lb: Pauli) -> Self {
        let mut p = Self::identity(n);
        p.set(a, la);
        p.set(b, lb);
        p
    }

    /// The `k`-th word of width `width` (qubit 0 is the most significant digit).
    pub fn from_index(width: usize, k: usize) -> Self {
        let mut p = Self::identity(width);
        for m in 0..width {
            let d = (k >> (2 * (width - 1 - m))) & 3;
            p.set(m, Pauli::from_digit(d));
        }
        p
    }

    /// Index of this word among the `4^n` words; the phase is ignored.
    pub fn index(&self) -> usize {
        (0..self.n).fold(0, |acc, m| (acc << 2) | self.letter(m).digit())
    }

    /// All `4^width` words in index order, identity first.
    pub fn all(width: usize) -> impl Iterator<Item = PauliString> {
        (0..1usize << (2 * width)).map(move |k| Self::from_index(width, k))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Exponent `e` of the phase `i^e`.
    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    pub fn phase(&self) -> Complex64 {
        match self.phase & 3 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn with_phase(mut self, exponent: u8) -> Self {
        self.phase = exponent & 3;
        self
    }

    /// The same word with phase `+1`.
    pub fn unsigned(self) -> Self {
        self.with_phase(0)
    }

    pub fn negated(self) -> Self {
        self.with_phase(self.phase + 2)
    }

    pub fn letter(&self, m: usize) -> Pauli {
        Pauli::from_bits(self.x >> m & 1 == 1, self.z >> m & 1 == 1)
    }

    pub fn set(&mut self, m: usize, letter: Pauli) {
        assert!(m < self.n, "qubit {m} out of range for {} qubits", self.n);
        let (xb, zb) = letter.bits();
        self.x = (self.x & !(1 << m)) | ((xb as u64) << m);
        self.z = (self.z & !(1 << m)) | ((zb as u64) << m);
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n).map(|m| self.letter(m)).collect()
    }

    /// True when every letter is `I` (any phase).
    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&m| self.letter(m) != Pauli::I).collect()
    }

    /// True when the string is Hermitian (phase ±1).
    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    /// Product `self · other` with the exact four-unit phase.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        let mut e = self.phase as i32 + other.phase as i32;
        let both = (self.x | self.z) & (other.x | other.z);
        let mut bits = both;
        while bits != 0 {
            let m = bits.trailing_zeros();
            bits &= bits - 1;
            e += letter_product_phase(
                self.x >> m & 1 == 1,
                self.z >> m & 1 == 1,
                other.x >> m & 1 == 1,
                other.z >> m & 1 == 1,
            );
        }
        Ok(PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: e.rem_euclid(4) as u8,
        })
    }

    /// `+1` if the strings commute and `-1` if they anticommute.
    pub fn commutation_sign(&self, other: &PauliString) -> Result<i32> {
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        Ok(self.sign_unchecked(other))
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        Ok(self.commutation_sign(other)? == 1)
    }

    /// Commutation sign without the length check, for hot loops.
    #[inline]
    pub(crate) fn sign_unchecked(&self, other: &PauliString) -> i32 {
        let parity = ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) & 1;
        1 - 2 * parity as i32
    }

    /// Place this `K`-letter word onto `subgroup` qubits of an `n`-qubit register.
    pub fn embed(&self, subgroup: &[usize], n: usize) -> Result<PauliString> {
        if subgroup.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: subgroup.len(),
            });
        }
        let mut out = PauliString::identity(n).with_phase(self.phase);
        for (j, &q) in subgroup.iter().enumerate() {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n });
            }
            out.set(q, self.letter(j));
        }
        Ok(out)
    }

    /// Letters of `self` on `subgroup`, as a `K`-letter word (phase dropped).
    pub fn restrict(&self, subgroup: &[usize]) -> PauliString {
        let mut out = PauliString::identity(subgroup.len());
        for (j, &q) in subgroup.iter().enumerate() {
            out.set(j, self.letter(q));
        }
        out
    }

    /// Action on a computational basis state: `P|j> = amp · |j'>`.
    #[inline]
    pub(crate) fn apply_to_basis(&self, j: usize) -> (usize, Complex64) {
        let n = self.n;
        let xb = to_basis_mask(self.x, n);
        let zb = to_basis_mask(self.z, n);
        let ys = (self.x & self.z).count_ones() as u8;
        let sign = (j & zb).count_ones() & 1;
        let e = (self.phase + ys + 2 * sign as u8) & 3;
        let amp = match e {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        (j ^ xb, amp)
    }

    /// Dense `2^n × 2^n` matrix, including the phase.
    pub fn matrix(&self) -> CMatrix {
        let dim = 1usize << self.n;
        let mut m = CMatrix::zeros(dim);
        for j in 0..dim {
            let (i, amp) = self.apply_to_basis(j);
            m[(i, j)] = amp;
        }
        m
    }
}

/// Reverse the bit order of a qubit mask into a basis-index mask.
#[inline]
pub(crate) fn to_basis_mask(qmask: u64, n: usize) -> usize {
    let mut out = 0usize;
    let mut bits = qmask;
    while bits != 0 {
        let m = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        out |= 1 << (n - 1 - m);
    }
    out
}

/// Free-function form of [`PauliString::mul`].
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.mul(b)
}

/// Free-function form of [`PauliString::commutation_sign`].
pub fn commutes(a: &PauliString, b: &PauliString) -> Result<i32> {
    a.commutation_sign(b)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        for m in 0..self.n {
            write!(f, "{}", self.letter(m).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (phase, body) = if let Some(rest) = t.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = t.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = t.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = t.strip_prefix('+') {
            (0, rest)
        } else {
            (0, t)
        };
        if body.is_empty() || body.len() > MAX_QUBITS {
            return Err(Error::InvalidLabel(s.to_string()));
        }
        let letters = body
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(Error::InvalidLabel(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_letters(&letters).with_phase(phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn identity_product() {
        let r = p("II").mul(&p("XY")).unwrap();
        assert_eq!(r, p("XY"));
        assert_eq!(r.phase_exponent(), 0);
    }

    #[test]
    fn x_times_y_is_i_z() {
        // Matrix oracle: X·Y = iZ.
        let dense = p("X").matrix().mul(&p("Y").matrix());
        let expected = p("+iZ").matrix();
        assert!(dense.max_abs_diff(&expected) < 1e-15);
        assert_eq!(p("X").mul(&p("Y")).unwrap(), p("+iZ"));
    }

    #[test]
    fn xz_times_zx_is_yy() {
        let dense = p("XZ").matrix().mul(&p("ZX").matrix());
        assert!(dense.max_abs_diff(&p("YY").matrix()) < 1e-15);
        assert_eq!(p("XZ").mul(&p("ZX")).unwrap(), p("YY"));
    }

    #[test]
    fn commutation_examples() {
        assert_eq!(commutes(&p("X"), &p("X")).unwrap(), 1);
        assert_eq!(commutes(&p("X"), &p("Z")).unwrap(), -1);
        assert_eq!(commutes(&p("XX"), &p("ZZ")).unwrap(), 1);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            p("X").mul(&p("XX")),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(commutes(&p("XI"), &p("X")).is_err());
    }

    #[test]
    fn group_law_exhaustive() {
        for n in 1..=2 {
            let words: Vec<_> = PauliString::all(n).collect();
            for a in &words {
                for b in &words {
                    let ab = a.mul(b).unwrap();
                    let dense = a.matrix().mul(&b.matrix());
                    assert!(ab.matrix().max_abs_diff(&dense) < 1e-14, "{a}·{b}");
                    let ba = b.mul(a).unwrap();
                    // ab = ±ba; the sign is the commutation sign.
                    let sign = if ab == ba { 1 } else { -1 };
                    assert_eq!(ab.unsigned(), ba.unsigned());
                    assert_eq!(sign, commutes(a, b).unwrap(), "{a} vs {b}");
                    for c in &words {
                        let left = ab.mul(c).unwrap();
                        let right = a.mul(&b.mul(c).unwrap()).unwrap();
                        assert_eq!(left, right);
                    }
                }
            }
        }
    }

    #[test]
    fn commutation_matches_parity_rule() {
        for a in PauliString::all(2) {
            for b in PauliString::all(2) {
                let differing = (0..2)
                    .filter(|&m| {
                        let (la, lb) = (a.letter(m), b.letter(m));
                        la != Pauli::I && lb != Pauli::I && la != lb
                    })
                    .count();
                let expected = if differing % 2 == 0 { 1 } else { -1 };
                assert_eq!(commutes(&a, &b).unwrap(), expected);
            }
        }
    }

    #[test]
    fn index_round_trip_and_order() {
        let labels: Vec<String> = PauliString::all(1).map(|p| p.to_string()).collect();
        assert_eq!(labels, ["I", "X", "Y", "Z"]);
        for k in 0..16 {
            assert_eq!(PauliString::from_index(2, k).index(), k);
        }
        assert_eq!(PauliString::from_index(2, 4).to_string(), "XI");
    }

    #[test]
    fn parse_and_display() {
        for s in ["XYZ", "-XX", "+iZ", "-iYI"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn embed_and_restrict() {
        let w = p("XZ");
        let e = w.embed(&[1, 3], 4).unwrap();
        assert_eq!(e.to_string(), "IXIZ");
        assert_eq!(e.restrict(&[1, 3]), w);
        assert!(w.embed(&[1, 4], 4).is_err());
        assert_eq!(e.support(), vec![1, 3]);
        assert_eq!(e.weight(), 2);
    }
}
