//! A bank of two-entry sequences whose limits under each convergence are
//! known in closed form.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use serde::Serialize;

use crate::lattice::LatticeElement;

use super::SequenceTable;

/// Which closed-form column of the bank a structure is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    Ordinary,
    Cesaro,
    Almost,
    Density,
}

/// Closed-form limits; `None` means the sequence does not converge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BankLimits {
    pub ordinary: Option<LatticeElement>,
    pub cesaro: Option<LatticeElement>,
    pub almost: Option<LatticeElement>,
    pub density: Option<LatticeElement>,
}

impl BankLimits {
    pub fn get(&self, kind: BankKind) -> Option<&LatticeElement> {
        match kind {
            BankKind::Ordinary => self.ordinary.as_ref(),
            BankKind::Cesaro => self.cesaro.as_ref(),
            BankKind::Almost => self.almost.as_ref(),
            BankKind::Density => self.density.as_ref(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BankEntry {
    pub name: &'static str,
    pub limits: BankLimits,
    pub table: Arc<SequenceTable>,
}

impl BankEntry {
    pub fn is_positive(&self) -> bool {
        self.table.is_positive()
    }
}

const U: [f64; 2] = [1.0, 0.5];
const V: [f64; 2] = [0.25, -0.75];
const X0: [f64; 2] = [2.0, -1.0];
const Z: [f64; 2] = [0.0, 0.0];

fn is_square(n: usize) -> bool {
    let r = (n as f64).sqrt().round() as usize;
    r * r == n
}

fn sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn lin(a: f64, x: [f64; 2], b: f64, y: [f64; 2]) -> [f64; 2] {
    [a * x[0] + b * y[0], a * x[1] + b * y[1]]
}

type Gen = Box<dyn Fn(usize) -> [f64; 2]>;

enum L {
    All([f64; 2]),
    /// Ordinary, Cesàro, almost, density.
    Each(Option<[f64; 2]>, Option<[f64; 2]>, Option<[f64; 2]>, Option<[f64; 2]>),
}

fn spec() -> Vec<(&'static str, Gen, L)> {
    let half_u = lin(0.5, U, 0.0, Z);
    vec![
        ("constant x0", Box::new(|_| X0), L::All(X0)),
        ("zero", Box::new(|_| [0.0, 0.0]), L::All(Z)),
        ("x0 + u/n", Box::new(|n| lin(1.0, X0, 1.0 / n as f64, U)), L::All(X0)),
        ("u/n", Box::new(|n| lin(1.0 / n as f64, U, 0.0, Z)), L::All(Z)),
        (
            "x0 - v/n^2",
            Box::new(|n| lin(1.0, X0, -1.0 / (n as f64).powi(2), V)),
            L::All(X0),
        ),
        (
            "(-1)^n u/n",
            Box::new(|n| lin(sign(n) / n as f64, U, 0.0, Z)),
            L::All(Z),
        ),
        (
            "x0 + 2^-n u",
            Box::new(|n| lin(1.0, X0, 0.5f64.powi(n.min(2000) as i32), U)),
            L::All(X0),
        ),
        (
            "(-1)^n u",
            Box::new(|n| lin(sign(n), U, 0.0, Z)),
            L::Each(None, Some(Z), Some(Z), None),
        ),
        (
            "u + (-1)^n v",
            Box::new(|n| lin(1.0, U, sign(n), V)),
            L::Each(None, Some(U), Some(U), None),
        ),
        (
            "even indicator u",
            Box::new(|n| lin(((n + 1) % 2) as f64, U, 0.0, Z)),
            L::Each(None, Some(half_u), Some(half_u), None),
        ),
        (
            "period-3 indicator u",
            Box::new(|n| lin(((n % 3) == 0) as u8 as f64, U, 0.0, Z)),
            L::Each(
                None,
                Some(lin(1.0 / 3.0, U, 0.0, Z)),
                Some(lin(1.0 / 3.0, U, 0.0, Z)),
                None,
            ),
        ),
        (
            "cos(2 pi n/5) v",
            Box::new(|n| lin((2.0 * PI * n as f64 / 5.0).cos(), V, 0.0, Z)),
            L::Each(None, Some(Z), Some(Z), None),
        ),
        (
            "square indicator u",
            Box::new(|n| lin(is_square(n) as u8 as f64, U, 0.0, Z)),
            L::Each(None, Some(Z), Some(Z), Some(Z)),
        ),
        (
            "x0 + n [square] u",
            Box::new(|n| lin(1.0, X0, if is_square(n) { n as f64 } else { 0.0 }, U)),
            L::Each(None, None, None, Some(X0)),
        ),
        ("n u", Box::new(|n| lin(n as f64, U, 0.0, Z)), L::Each(None, None, None, None)),
        (
            "(-1)^n n u",
            Box::new(|n| lin(sign(n) * n as f64, U, 0.0, Z)),
            L::Each(None, None, None, None),
        ),
        (
            "ln(n) u",
            Box::new(|n| lin((n as f64).ln(), U, 0.0, Z)),
            L::Each(None, None, None, None),
        ),
        (
            "x0 + (n mod 2) v/n",
            Box::new(|n| lin(1.0, X0, (n % 2) as f64 / n as f64, V)),
            L::All(X0),
        ),
        (
            "sin(n) u",
            Box::new(|n| lin((n as f64).sin(), U, 0.0, Z)),
            L::Each(None, Some(Z), Some(Z), None),
        ),
        (
            "x0 + u/n^2",
            Box::new(|n| lin(1.0, X0, 1.0 / (n as f64).powi(2), U)),
            L::All(X0),
        ),
        (
            "min(n, 10) u",
            Box::new(|n| lin(n.min(10) as f64, U, 0.0, Z)),
            L::All(lin(10.0, U, 0.0, Z)),
        ),
        (
            "u until 50, then v",
            Box::new(|n| if n <= 50 { U } else { V }),
            L::All(V),
        ),
        (
            "n/(n+1) u",
            Box::new(|n| lin(n as f64 / (n + 1) as f64, U, 0.0, Z)),
            L::All(U),
        ),
        (
            "(cos(pi n/2), sin(pi n/2))",
            Box::new(|n| {
                let a = PI * n as f64 / 2.0;
                [a.cos(), a.sin()]
            }),
            L::Each(None, Some(Z), Some(Z), None),
        ),
        (
            "x0 + [power of 2] u",
            Box::new(|n| lin(1.0, X0, n.is_power_of_two() as u8 as f64, U)),
            L::Each(None, Some(X0), Some(X0), Some(X0)),
        ),
        (
            "(-1)^n x0",
            Box::new(|n| lin(sign(n), X0, 0.0, Z)),
            L::Each(None, Some(Z), Some(Z), None),
        ),
        (
            "e^-n v",
            Box::new(|n| lin((-(n as f64)).exp(), V, 0.0, Z)),
            L::All(Z),
        ),
        (
            "x0 + 7 [7 | n] v",
            Box::new(|n| lin(1.0, X0, if n % 7 == 0 { 7.0 } else { 0.0 }, V)),
            L::Each(None, Some(lin(1.0, X0, 1.0, V)), Some(lin(1.0, X0, 1.0, V)), None),
        ),
        (
            "(1 + 1/n)^n x0",
            Box::new(|n| lin((1.0 + 1.0 / n as f64).powf(n as f64), X0, 0.0, Z)),
            L::All(lin(E, X0, 0.0, Z)),
        ),
        ("u + u/n", Box::new(|n| lin(1.0 + 1.0 / n as f64, U, 0.0, Z)), L::All(U)),
        (
            "x0 + 3 [n = 1 mod 4] u",
            Box::new(|n| lin(1.0, X0, if n % 4 == 1 { 3.0 } else { 0.0 }, U)),
            L::Each(
                None,
                Some(lin(1.0, X0, 0.75, U)),
                Some(lin(1.0, X0, 0.75, U)),
                None,
            ),
        ),
        (
            "[5 does not divide n] u",
            Box::new(|n| lin((n % 5 != 0) as u8 as f64, U, 0.0, Z)),
            L::Each(
                None,
                Some(lin(0.8, U, 0.0, Z)),
                Some(lin(0.8, U, 0.0, Z)),
                None,
            ),
        ),
        (
            "x0 + (-2)^-n u",
            Box::new(|n| lin(1.0, X0, sign(n) * 0.5f64.powi(n.min(2000) as i32), U)),
            L::All(X0),
        ),
        (
            "(cos n, sin n)/n",
            Box::new(|n| {
                let x = n as f64;
                [x.cos() / x, x.sin() / x]
            }),
            L::All(Z),
        ),
        (
            "x0 + max(0, 5 - n) u",
            Box::new(|n| lin(1.0, X0, 5usize.saturating_sub(n) as f64, U)),
            L::All(X0),
        ),
        ("[n > 100] u", Box::new(|n| lin((n > 100) as u8 as f64, U, 0.0, Z)), L::All(U)),
    ]
}

/// Materializes the standard bank at the given horizon.
pub fn standard_bank(horizon: usize) -> Vec<BankEntry> {
    let el = |v: [f64; 2]| LatticeElement::from_slice(&v);
    spec()
        .into_iter()
        .map(|(name, gen, lim)| {
            let mut data = Vec::with_capacity(2 * horizon);
            for n in 1..=horizon {
                data.extend_from_slice(&gen(n));
            }
            let limits = match lim {
                L::All(x) => BankLimits {
                    ordinary: Some(el(x)),
                    cesaro: Some(el(x)),
                    almost: Some(el(x)),
                    density: Some(el(x)),
                },
                L::Each(o, c, a, d) => BankLimits {
                    ordinary: o.map(el),
                    cesaro: c.map(el),
                    almost: a.map(el),
                    density: d.map(el),
                },
            };
            BankEntry {
                name,
                limits,
                table: Arc::new(SequenceTable::from_rows(2, data).expect("finite bank terms")),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_is_large_enough() {
        let bank = standard_bank(100);
        assert!(bank.len() >= 30);
        assert!(bank.iter().all(|b| b.table.len() == 100 && b.table.dim() == 2));
    }

    #[test]
    fn ordinary_limits_are_also_summability_limits() {
        // Regular summability methods extend ordinary limits.
        for b in standard_bank(10) {
            if let Some(l) = &b.limits.ordinary {
                assert_eq!(b.limits.cesaro.as_ref(), Some(l), "{}", b.name);
                assert_eq!(b.limits.almost.as_ref(), Some(l), "{}", b.name);
                assert_eq!(b.limits.density.as_ref(), Some(l), "{}", b.name);
            }
        }
    }
}
