//! Walsh codes from the Sylvester construction of Hadamard matrices.

use crate::error::{CaosError, Result};

/// Square ±1 Hadamard matrix of power-of-two order; each row is a Walsh
/// code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebook {
    order: usize,
    entries: Vec<i8>,
}

impl Codebook {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.order + col]
    }

    /// Unipolar `{0, 1}` version of a row: `(h + 1) / 2`.
    pub fn unipolar_row(&self, i: usize) -> Vec<u8> {
        self.row(i).iter().map(|&h| ((h + 1) / 2) as u8).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.entries.chunks_exact(self.order)
    }

    /// `H·Hᵀ == order·I`, in integer arithmetic.
    pub fn is_orthogonal(&self) -> bool {
        let w = self.order as i64;
        self.rows().enumerate().all(|(i, a)| {
            self.rows().enumerate().all(|(j, b)| {
                let dot: i64 = a.iter().zip(b).map(|(&x, &y)| (x as i64) * (y as i64)).sum();
                dot == if i == j { w } else { 0 }
            })
        })
    }

    /// CSV rows of `1` / `-1`, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.order * self.order * 3);
        for row in self.rows() {
            let line: Vec<&str> = row.iter().map(|&h| if h > 0 { "1" } else { "-1" }).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Build the order-`order` Sylvester Hadamard matrix by repeated doubling
/// `H_2k = [[H_k, H_k], [H_k, -H_k]]`.
pub fn sylvester_codebook(order: usize) -> Result<Codebook> {
    if order < 2 || !order.is_power_of_two() {
        return Err(CaosError::Domain(format!(
            "codebook order must be a power of two >= 2, got {order}"
        )));
    }
    let mut k = 1;
    let mut h = vec![1i8];
    while k < order {
        let n = 2 * k;
        let mut next = vec![0i8; n * n];
        for r in 0..k {
            for c in 0..k {
                let v = h[r * k + c];
                next[r * n + c] = v;
                next[r * n + c + k] = v;
                next[(r + k) * n + c] = v;
                next[(r + k) * n + c + k] = -v;
            }
        }
        h = next;
        k = n;
    }
    Ok(Codebook { order, entries: h })
}
