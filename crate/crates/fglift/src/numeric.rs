//! Floating-point tables for inference, with overflow-safe scaling.
//!
//! Inference multiplies long chains of potentials, which over- or
//! underflows `f64` well before any interesting model size. Every table
//! here therefore carries a `log_scale`: the represented values are
//! `values[i] · exp(log_scale)`, and [`NumTable::renormalize`] folds the
//! current maximum into the scale after each product. Marginals are ratios,
//! so scales cancel and never need to be materialised.
//!
//! Variables are plain `usize` ids owned by the caller; a table knows only
//! their cardinalities. Row-major layout throughout, last variable fastest.

/// A nonnegative real-valued table over a set of variables, scaled by
/// `exp(log_scale)`.
#[derive(Debug, Clone)]
pub struct NumTable {
    vars: Vec<usize>,
    card: Vec<usize>,
    values: Vec<f64>,
    log_scale: f64,
}

impl NumTable {
    pub fn new(vars: Vec<usize>, card: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(vars.len(), card.len());
        debug_assert_eq!(values.len(), card.iter().product::<usize>().max(1));
        NumTable {
            vars,
            card,
            values,
            log_scale: 0.0,
        }
    }

    pub fn scalar(value: f64) -> Self {
        NumTable::new(Vec::new(), Vec::new(), vec![value])
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn card(&self) -> &[usize] {
        &self.card
    }

    /// The same table over renamed variables (`map` must be injective on
    /// this table's variables).
    pub fn renamed<F: Fn(usize) -> usize>(&self, map: F) -> NumTable {
        NumTable {
            vars: self.vars.iter().map(|&v| map(v)).collect(),
            card: self.card.clone(),
            values: self.values.clone(),
            log_scale: self.log_scale,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cardinality_of(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var).map(|i| self.card[i])
    }

    /// The factor `exp(log_scale)` the stored values are scaled by. Only
    /// meaningful while it fits in `f64` — ratios of values never need it.
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Folds the current maximum into the scale so values stay near 1.
    pub fn renormalize(&mut self) {
        let m = self.values.iter().cloned().fold(0.0f64, f64::max);
        if m > 0.0 && m.is_finite() {
            for v in &mut self.values {
                *v /= m;
            }
            self.log_scale += m.ln();
        }
    }

    fn index_of(&self, digits: &[usize]) -> usize {
        let mut idx = 0;
        for (d, &c) in digits.iter().zip(&self.card) {
            idx = idx * c + d;
        }
        idx
    }

    /// Pointwise product; the result ranges over the union of variables
    /// (this table's order first, new ones appended).
    pub fn multiply(&self, other: &NumTable) -> NumTable {
        let mut vars = self.vars.clone();
        let mut card = self.card.clone();
        for (i, &v) in other.vars.iter().enumerate() {
            if !vars.contains(&v) {
                vars.push(v);
                card.push(other.card[i]);
            }
        }
        let total: usize = card.iter().product::<usize>().max(1);
        // Positions of each operand's variables within the result.
        let self_pos: Vec<usize> = self
            .vars
            .iter()
            .map(|v| vars.iter().position(|w| w == v).unwrap())
            .collect();
        let other_pos: Vec<usize> = other
            .vars
            .iter()
            .map(|v| vars.iter().position(|w| w == v).unwrap())
            .collect();

        let mut values = Vec::with_capacity(total);
        let mut digits = vec![0usize; vars.len()];
        let mut self_digits = vec![0usize; self.vars.len()];
        let mut other_digits = vec![0usize; other.vars.len()];
        for _ in 0..total {
            for (k, &p) in self_pos.iter().enumerate() {
                self_digits[k] = digits[p];
            }
            for (k, &p) in other_pos.iter().enumerate() {
                other_digits[k] = digits[p];
            }
            values.push(self.values[self.index_of_in(&self_digits)] *
                other.values[other.index_of_in(&other_digits)]);
            for slot in (0..digits.len()).rev() {
                digits[slot] += 1;
                if digits[slot] < card[slot] {
                    break;
                }
                digits[slot] = 0;
            }
        }
        let mut out = NumTable {
            vars,
            card,
            values,
            log_scale: self.log_scale + other.log_scale,
        };
        out.renormalize();
        out
    }

    fn index_of_in(&self, digits: &[usize]) -> usize {
        self.index_of(digits)
    }

    /// Sums a variable out, each of its values weighted (uniform weights =
    /// ordinary marginalisation; histogram counts use their multiplicity).
    pub fn sum_out_weighted(&self, var: usize, weights: Option<&[f64]>) -> NumTable {
        let axis = self
            .vars
            .iter()
            .position(|&v| v == var)
            .expect("variable present");
        let n = self.card[axis];
        if let Some(w) = weights {
            debug_assert_eq!(w.len(), n);
        }
        let vars: Vec<usize> = self
            .vars
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &v)| v)
            .collect();
        let card: Vec<usize> = self
            .card
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &c)| c)
            .collect();
        // Strides of the original layout.
        let mut strides = vec![1usize; self.card.len()];
        for i in (0..self.card.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.card[i + 1];
        }
        let total: usize = card.iter().product::<usize>().max(1);
        let mut values = vec![0.0f64; total];
        let mut digits = vec![0usize; card.len()];
        for out_value in values.iter_mut() {
            let mut base = 0usize;
            let mut k = 0;
            for (i, &s) in strides.iter().enumerate() {
                if i == axis {
                    continue;
                }
                base += digits[k] * s;
                k += 1;
            }
            let mut acc = 0.0;
            for j in 0..n {
                let w = weights.map_or(1.0, |w| w[j]);
                acc += w * self.values[base + j * strides[axis]];
            }
            *out_value = acc;
            for slot in (0..digits.len()).rev() {
                digits[slot] += 1;
                if digits[slot] < card[slot] {
                    break;
                }
                digits[slot] = 0;
            }
        }
        let mut out = NumTable {
            vars,
            card,
            values,
            log_scale: self.log_scale,
        };
        out.renormalize();
        out
    }

    pub fn sum_out(&self, var: usize) -> NumTable {
        self.sum_out_weighted(var, None)
    }

    /// Fixes a variable to one value, dropping its axis.
    pub fn condition(&self, var: usize, value: usize) -> NumTable {
        let axis = self
            .vars
            .iter()
            .position(|&v| v == var)
            .expect("variable present");
        debug_assert!(value < self.card[axis]);
        let vars: Vec<usize> = self
            .vars
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &v)| v)
            .collect();
        let card: Vec<usize> = self
            .card
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &c)| c)
            .collect();
        let mut strides = vec![1usize; self.card.len()];
        for i in (0..self.card.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.card[i + 1];
        }
        let total: usize = card.iter().product::<usize>().max(1);
        let mut values = Vec::with_capacity(total);
        let mut digits = vec![0usize; card.len()];
        for _ in 0..total {
            let mut idx = value * strides[axis];
            let mut k = 0;
            for (i, &s) in strides.iter().enumerate() {
                if i == axis {
                    continue;
                }
                idx += digits[k] * s;
                k += 1;
            }
            values.push(self.values[idx]);
            for slot in (0..digits.len()).rev() {
                digits[slot] += 1;
                if digits[slot] < card[slot] {
                    break;
                }
                digits[slot] = 0;
            }
        }
        NumTable {
            vars,
            card,
            values,
            log_scale: self.log_scale,
        }
    }

    /// Raises every value to an integer power — the effect of `count`
    /// interchangeable groundings contributing the same factor.
    pub fn powered(&self, count: u32) -> NumTable {
        NumTable {
            vars: self.vars.clone(),
            card: self.card.clone(),
            values: self.values.iter().map(|v| v.powi(count as i32)).collect(),
            log_scale: self.log_scale * f64::from(count),
        }
    }
}

/// A working set of tables supporting variable elimination with optional
/// per-value weights (histogram multiplicities).
#[derive(Debug, Default)]
pub struct VePool {
    tables: Vec<NumTable>,
}

impl VePool {
    pub fn new(tables: Vec<NumTable>) -> Self {
        VePool { tables }
    }

    pub fn push(&mut self, t: NumTable) {
        self.tables.push(t);
    }

    pub fn tables(&self) -> &[NumTable] {
        &self.tables
    }

    /// All variables mentioned by any table, ascending.
    pub fn variables(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .tables
            .iter()
            .flat_map(|t| t.vars().iter().copied())
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Cost estimate for eliminating `var` now: the size of the table the
    /// product of all touching tables would have.
    fn elimination_cost(&self, var: usize) -> usize {
        let mut vars: Vec<usize> = Vec::new();
        let mut size = 1usize;
        for t in self.tables.iter().filter(|t| t.vars().contains(&var)) {
            for &v in t.vars() {
                if !vars.contains(&v) {
                    vars.push(v);
                    size = size.saturating_mul(t.cardinality_of(v).unwrap_or(1).max(1));
                }
            }
        }
        size
    }

    /// Multiplies every table containing `var` and sums it out, with
    /// optional weights over its values.
    pub fn eliminate(&mut self, var: usize, weights: Option<&[f64]>) {
        let (touching, rest): (Vec<NumTable>, Vec<NumTable>) = std::mem::take(&mut self.tables)
            .into_iter()
            .partition(|t| t.vars().contains(&var));
        self.tables = rest;
        if touching.is_empty() {
            return;
        }
        let mut product = touching[0].clone();
        for t in &touching[1..] {
            product = product.multiply(t);
        }
        self.tables.push(product.sum_out_weighted(var, weights));
    }

    /// Eliminates all of `vars` greedily by cheapest-first, querying
    /// `weights_of` for each variable's value weights.
    pub fn eliminate_all<F>(&mut self, vars: &[usize], mut weights_of: F)
    where
        F: FnMut(usize) -> Option<Vec<f64>>,
    {
        let mut remaining: Vec<usize> = vars.to_vec();
        while !remaining.is_empty() {
            let (k, _) = remaining
                .iter()
                .enumerate()
                .map(|(k, &v)| (k, self.elimination_cost(v)))
                .min_by_key(|&(k, cost)| (cost, remaining[k]))
                .expect("nonempty");
            let var = remaining.swap_remove(k);
            let weights = weights_of(var);
            self.eliminate(var, weights.as_deref());
        }
    }

    /// Multiplies what is left into a single table.
    pub fn fold(self) -> NumTable {
        let mut iter = self.tables.into_iter();
        let mut acc = iter.next().unwrap_or_else(|| NumTable::scalar(1.0));
        for t in iter {
            acc = acc.multiply(&t);
        }
        acc
    }
}
