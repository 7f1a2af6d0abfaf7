//! Fixed-margin binary matrices and the weighted rectangular loop sampler.
//!
//! The sampler targets `P(H) ∝ ∏ ω_ij^{h_ij}` over all 0/1 matrices with the
//! given row and column sums. One step picks a cell uniformly, completes a
//! 2×2 rectangle through a uniformly chosen 0 in a row and 1 in a column, and
//! flips it with Barker probability when it is a checkerboard. Every
//! checkerboard `{(r1,c1),(r2,c2)}` is reached with probability
//! `(1/uv)(1/z_r1 + 1/z_r2)(1/o_c1 + 1/o_c2)` (`z` zeros per row, `o` ones per
//! column), which is the same from either side because margins are fixed, so
//! the Barker rule alone gives detailed balance.

use rand::Rng;

use crate::error::{invalid, HfdpError, Result};

/// Largest `u·v` accepted by [`enumerate_fixed_margin`].
pub const ENUMERATION_CELL_LIMIT: usize = 30;

/// A `u×v` 0/1 matrix with fixed row and column sums.
#[derive(Clone, Debug)]
pub struct MarginBinaryMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    // rows holding a 1, per column, plus each 1-cell's position in that list
    col_ones: Vec<Vec<usize>>,
    slot: Vec<usize>,
}

impl PartialEq for MarginBinaryMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.entries == other.entries
    }
}

impl Eq for MarginBinaryMatrix {}

impl MarginBinaryMatrix {
    /// Builds from row-major entries; the margins are read off the entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("binary matrix needs at least one row and one column");
        }
        if entries.len() != rows * cols {
            return invalid(format!("expected {} entries, got {}", rows * cols, entries.len()));
        }
        if entries.iter().any(|&e| e > 1) {
            return invalid("binary matrix entries must be 0 or 1");
        }
        let mut row_sums = vec![0; rows];
        let mut col_sums = vec![0; cols];
        let mut col_ones = vec![Vec::new(); cols];
        let mut slot = vec![usize::MAX; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                if entries[r * cols + c] == 1 {
                    row_sums[r] += 1;
                    col_sums[c] += 1;
                    slot[r * cols + c] = col_ones[c].len();
                    col_ones[c].push(r);
                }
            }
        }
        Ok(Self { rows, cols, entries, row_sums, col_sums, col_ones, slot })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return invalid("rows differ in length");
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// One-hot `N×K` matrix of a label vector.
    pub fn from_assignment(labels: &[usize], k: usize) -> Result<Self> {
        let mut entries = vec![0u8; labels.len() * k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return invalid(format!("label {l} outside 0..{k}"));
            }
            entries[i * k + l] = 1;
        }
        Self::new(labels.len(), k, entries)
    }

    /// Column index of the single 1 in each row.
    pub fn to_assignment(&self) -> Result<Vec<usize>> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                match (row.iter().filter(|&&e| e == 1).count(), row.iter().position(|&e| e == 1)) {
                    (1, Some(c)) => Ok(c),
                    _ => Err(HfdpError::InvalidInput(format!("row {r} does not hold exactly one 1"))),
                }
            })
            .collect()
    }

    /// Checks the entries against declared margins.
    pub fn with_margins(self, row_sums: &[usize], col_sums: &[usize]) -> Result<Self> {
        if self.row_sums != row_sums || self.col_sums != col_sums {
            return invalid("entries do not match the declared margins");
        }
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.entries[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    /// Recomputes the margins from the entries and compares.
    pub fn margins_hold(&self) -> bool {
        (0..self.rows).all(|r| self.row(r).iter().map(|&e| e as usize).sum::<usize>() == self.row_sums[r])
            && (0..self.cols).all(|c| (0..self.rows).map(|r| self.get(r, c) as usize).sum::<usize>() == self.col_sums[c])
    }

    fn set_one(&mut self, r: usize, c: usize) {
        let i = r * self.cols + c;
        self.entries[i] = 1;
        self.slot[i] = self.col_ones[c].len();
        self.col_ones[c].push(r);
    }

    fn set_zero(&mut self, r: usize, c: usize) {
        let i = r * self.cols + c;
        self.entries[i] = 0;
        let s = self.slot[i];
        let last = self.col_ones[c].pop().expect("column list holds this cell");
        if last != r {
            self.col_ones[c][s] = last;
            self.slot[last * self.cols + c] = s;
        }
        self.slot[i] = usize::MAX;
    }

    /// `j`-th zero of row `r`, scanning left to right.
    fn nth_zero_in_row(&self, r: usize, j: usize) -> usize {
        self.row(r).iter().enumerate().filter(|(_, &e)| e == 0).nth(j).map(|(c, _)| c).expect("row has that many zeros")
    }
}

/// Log weights `ln ω_ij` of a `u×v` weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    log_weights: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_log_weights(rows: usize, cols: usize, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != rows * cols {
            return invalid("weight matrix has the wrong number of entries");
        }
        if log_weights.iter().any(|w| !w.is_finite()) {
            return invalid("weights must be strictly positive and finite");
        }
        Ok(Self { rows, cols, log_weights })
    }

    pub fn from_weights(rows: usize, cols: usize, weights: &[f64]) -> Result<Self> {
        Self::from_log_weights(rows, cols, weights.iter().map(|w| w.ln()).collect())
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self { rows, cols, log_weights: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn log_weight(&self, r: usize, c: usize) -> f64 {
        self.log_weights[r * self.cols + c]
    }

    /// `ln P(H)` up to the normalizing constant.
    pub fn log_score(&self, h: &MarginBinaryMatrix) -> f64 {
        h.entries.iter().zip(&self.log_weights).filter(|(&e, _)| e == 1).map(|(_, &w)| w).sum()
    }
}

pub fn is_checkerboard(sub: [[u8; 2]; 2]) -> bool {
    sub == [[1, 0], [0, 1]] || sub == [[0, 1], [1, 0]]
}

/// `ln P(H1) − ln P(H2)`, summed over the cells where the two differ.
pub fn log_relative_probability(h1: &MarginBinaryMatrix, h2: &MarginBinaryMatrix, w: &WeightMatrix) -> Result<f64> {
    if h1.rows != h2.rows || h1.cols != h2.cols || h1.row_sums != h2.row_sums || h1.col_sums != h2.col_sums {
        return invalid("matrices do not share margins");
    }
    if w.rows != h1.rows || w.cols != h1.cols {
        return invalid("weight matrix shape differs from the binary matrices");
    }
    let mut acc = 0.0;
    for (i, (&a, &b)) in h1.entries.iter().zip(&h2.entries).enumerate() {
        match (a, b) {
            (1, 0) => acc += w.log_weights[i],
            (0, 1) => acc -= w.log_weights[i],
            _ => {}
        }
    }
    Ok(acc)
}

/// Probability `1/(1+e^{−Δ})` without overflow.
#[inline]
pub fn barker(delta: f64) -> f64 {
    let d = delta.clamp(-700.0, 700.0);
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// One weighted rectangular loop step in place. Returns whether a swap happened.
pub fn wrla_step<R: Rng + ?Sized>(a: &mut MarginBinaryMatrix, w: &WeightMatrix, rng: &mut R) -> bool {
    let (u, v) = (a.rows, a.cols);
    let r1 = rng.random_range(0..u);
    let c1 = rng.random_range(0..v);
    let (r2, c2) = if a.get(r1, c1) == 1 {
        let zeros = v - a.row_sums[r1];
        if zeros == 0 {
            return false;
        }
        let c2 = a.nth_zero_in_row(r1, rng.random_range(0..zeros));
        let ones = &a.col_ones[c2];
        if ones.is_empty() {
            return false;
        }
        (ones[rng.random_range(0..ones.len())], c2)
    } else {
        let ones = &a.col_ones[c1];
        if ones.is_empty() {
            return false;
        }
        let r2 = ones[rng.random_range(0..ones.len())];
        let zeros = v - a.row_sums[r2];
        if zeros == 0 {
            return false;
        }
        (r2, a.nth_zero_in_row(r2, rng.random_range(0..zeros)))
    };
    let sub = [[a.get(r1, c1), a.get(r1, c2)], [a.get(r2, c1), a.get(r2, c2)]];
    if !is_checkerboard(sub) {
        return false;
    }
    // cells currently 1 become 0 and vice versa
    let (on, off) = if sub[0][0] == 1 { ([(r1, c2), (r2, c1)], [(r1, c1), (r2, c2)]) } else { ([(r1, c1), (r2, c2)], [(r1, c2), (r2, c1)]) };
    let delta = on.iter().map(|&(r, c)| w.log_weight(r, c)).sum::<f64>() - off.iter().map(|&(r, c)| w.log_weight(r, c)).sum::<f64>();
    if rng.random::<f64>() >= barker(delta) {
        return false;
    }
    for (r, c) in off {
        a.set_zero(r, c);
    }
    for (r, c) in on {
        a.set_one(r, c);
    }
    true
}

/// `t` composed [`wrla_step`] calls.
pub fn wrla_run<R: Rng + ?Sized>(mut a: MarginBinaryMatrix, w: &WeightMatrix, t: usize, rng: &mut R) -> MarginBinaryMatrix {
    for _ in 0..t {
        wrla_step(&mut a, w, rng);
    }
    a
}

/// Every 0/1 matrix with the given margins, in lexicographic row-major order.
pub fn enumerate_fixed_margin(row_sums: &[usize], col_sums: &[usize]) -> Result<Vec<MarginBinaryMatrix>> {
    let (u, v) = (row_sums.len(), col_sums.len());
    if u == 0 || v == 0 {
        return invalid("margins must be nonempty");
    }
    if u * v > ENUMERATION_CELL_LIMIT {
        return Err(HfdpError::Capacity(format!("{u}×{v} exceeds the {ENUMERATION_CELL_LIMIT}-cell enumeration guard")));
    }
    if row_sums.iter().sum::<usize>() != col_sums.iter().sum::<usize>() {
        return invalid("row and column margins have different totals");
    }
    let mut out = Vec::new();
    let mut entries = vec![0u8; u * v];
    let mut remaining = col_sums.to_vec();
    fill_row(0, row_sums, &mut remaining, &mut entries, v, &mut out)?;
    Ok(out)
}

fn fill_row(
    r: usize,
    row_sums: &[usize],
    remaining: &mut [usize],
    entries: &mut [u8],
    v: usize,
    out: &mut Vec<MarginBinaryMatrix>,
) -> Result<()> {
    if r == row_sums.len() {
        if remaining.iter().all(|&c| c == 0) {
            out.push(MarginBinaryMatrix::new(row_sums.len(), v, entries.to_vec())?);
        }
        return Ok(());
    }
    let rows_left = row_sums.len() - r;
    // no column may need more ones than rows remain
    if remaining.iter().any(|&c| c > rows_left) {
        return Ok(());
    }
    choose_cols(r, 0, row_sums[r], row_sums, remaining, entries, v, out)
}

#[allow(clippy::too_many_arguments)]
fn choose_cols(
    r: usize,
    c: usize,
    need: usize,
    row_sums: &[usize],
    remaining: &mut [usize],
    entries: &mut [u8],
    v: usize,
    out: &mut Vec<MarginBinaryMatrix>,
) -> Result<()> {
    if need == 0 {
        return fill_row(r + 1, row_sums, remaining, entries, v, out);
    }
    if v - c < need {
        return Ok(());
    }
    if remaining[c] > 0 {
        remaining[c] -= 1;
        entries[r * v + c] = 1;
        choose_cols(r, c + 1, need - 1, row_sums, remaining, entries, v, out)?;
        entries[r * v + c] = 0;
        remaining[c] += 1;
    }
    choose_cols(r, c + 1, need, row_sums, remaining, entries, v, out)
}
