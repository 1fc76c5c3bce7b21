//! Arithmetic in the small Galois fields GF(2), GF(3), GF(4) and GF(5).
//!
//! GF(4) elements are polynomials over GF(2) modulo x² + x + 1, encoded as
//! two-bit integers (bit 1 is the x coefficient).

#[derive(Debug, Clone)]
pub(crate) struct GaloisField {
    add: Vec<Vec<usize>>,
    mul: Vec<Vec<usize>>,
}

impl GaloisField {
    pub fn new(order: usize) -> Option<Self> {
        if ![2, 3, 4, 5].contains(&order) {
            return None;
        }
        let table = |f: &dyn Fn(usize, usize) -> usize| -> Vec<Vec<usize>> {
            (0..order).map(|a| (0..order).map(|b| f(a, b)).collect()).collect()
        };
        let (add, mul) = if order == 4 {
            (table(&|a, b| a ^ b), table(&gf4_mul))
        } else {
            (table(&|a, b| (a + b) % order), table(&|a, b| (a * b) % order))
        };
        Some(GaloisField { add, mul })
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        self.add[a][b]
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a][b]
    }

    pub fn dot(&self, u: &[usize], v: &[usize]) -> usize {
        u.iter().zip(v).fold(0, |acc, (&a, &b)| self.add(acc, self.mul(a, b)))
    }
}

fn gf4_mul(a: usize, b: usize) -> usize {
    // carry-less product, then reduce x² = x + 1
    let mut p = 0;
    for i in 0..2 {
        if b >> i & 1 == 1 {
            p ^= a << i;
        }
    }
    if p & 0b100 != 0 {
        p ^= 0b111;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_axioms_hold() {
        for q in [2, 3, 4, 5] {
            let f = GaloisField::new(q).unwrap();
            for a in 0..q {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                assert_eq!((0..q).filter(|&b| f.add(a, b) == 0).count(), 1);
                if a != 0 {
                    assert_eq!((0..q).filter(|&b| f.mul(a, b) == 1).count(), 1, "inverse of {a} in GF({q})");
                }
                for b in 0..q {
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..q {
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
        assert!(GaloisField::new(6).is_none());
    }
}
