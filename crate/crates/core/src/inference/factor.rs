use serde::Serialize;

use crate::error::{CidError, Result};
use crate::limits::Limits;
use crate::model::NodeId;

/// Dense table over an ordered scope of network variables, last variable fastest.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Table {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for k in (0..cards.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * cards[k + 1];
    }
    s
}

impl Table {
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Table { vars, cards, values }
    }

    pub fn scalar(v: f64) -> Self {
        Table { vars: Vec::new(), cards: Vec::new(), values: vec![v] }
    }

    pub fn ones(vars: Vec<usize>, cards: Vec<usize>) -> Self {
        let n = cards.iter().product();
        Table { vars, cards, values: vec![1.0; n] }
    }

    fn position(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    pub fn product(&self, other: &Table) -> Table {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(c);
            }
        }
        let n = vars.len();
        let (sa, sb) = (strides(&self.cards), strides(&other.cards));
        let mut stride_a = vec![0; n];
        let mut stride_b = vec![0; n];
        for (k, v) in vars.iter().enumerate() {
            if let Some(p) = self.position(*v) {
                stride_a[k] = sa[p];
            }
            if let Some(p) = other.position(*v) {
                stride_b[k] = sb[p];
            }
        }
        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut assign = vec![0usize; n];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..total {
            values.push(self.values[ia] * other.values[ib]);
            let mut k = n;
            while k > 0 {
                k -= 1;
                assign[k] += 1;
                ia += stride_a[k];
                ib += stride_b[k];
                if assign[k] < cards[k] {
                    break;
                }
                ia -= stride_a[k] * cards[k];
                ib -= stride_b[k] * cards[k];
                assign[k] = 0;
            }
        }
        Table { vars, cards, values }
    }

    pub fn sum_out(&self, var: usize) -> Table {
        let Some(pos) = self.position(var) else { return self.clone() };
        let outer: usize = self.cards[..pos].iter().product();
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for v in 0..card {
                let base = (o * card + v) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Table { vars, cards, values }
    }

    /// Fix `var` to `value` and drop it from the scope.
    pub fn reduce(&self, var: usize, value: usize) -> Table {
        let Some(pos) = self.position(var) else { return self.clone() };
        let outer: usize = self.cards[..pos].iter().product();
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + value) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Table { vars, cards, values }
    }

    /// Same table with its scope reordered to `order` (a permutation of `vars`).
    pub fn permuted(&self, order: &[usize]) -> Table {
        if order == self.vars.as_slice() {
            return self.clone();
        }
        let old = strides(&self.cards);
        let cards: Vec<usize> = order.iter().map(|v| self.cards[self.position(*v).unwrap()]).collect();
        let stride: Vec<usize> = order.iter().map(|v| old[self.position(*v).unwrap()]).collect();
        let n = order.len();
        let total = self.values.len();
        let mut values = Vec::with_capacity(total);
        let mut assign = vec![0usize; n];
        let mut idx = 0usize;
        for _ in 0..total {
            values.push(self.values[idx]);
            let mut k = n;
            while k > 0 {
                k -= 1;
                assign[k] += 1;
                idx += stride[k];
                if assign[k] < cards[k] {
                    break;
                }
                idx -= stride[k] * cards[k];
                assign[k] = 0;
            }
        }
        Table { vars: order.to_vec(), cards, values }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn union_size(tables: &[&Table]) -> (Vec<usize>, u128) {
    let mut vars: Vec<usize> = Vec::new();
    let mut size: u128 = 1;
    for t in tables {
        for (&v, &c) in t.vars.iter().zip(&t.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                size = size.saturating_mul(c as u128);
            }
        }
    }
    (vars, size)
}

/// Multiply all `tables` and sum out every variable not in `keep`, using a
/// min-degree elimination order (ties to the lowest variable index). The
/// result's scope is exactly `keep`, in that order.
pub(crate) fn eliminate(mut tables: Vec<Table>, keep: &[usize], cards: &[usize], limits: &Limits) -> Result<Table> {
    let mut pending: Vec<usize> = Vec::new();
    for t in &tables {
        for &v in &t.vars {
            if !keep.contains(&v) && !pending.contains(&v) {
                pending.push(v);
            }
        }
    }
    pending.sort_unstable();

    while !pending.is_empty() {
        let mut best: Option<(usize, usize, u128)> = None;
        for (slot, &v) in pending.iter().enumerate() {
            let touching: Vec<&Table> = tables.iter().filter(|t| t.vars.contains(&v)).collect();
            let (scope, size) = union_size(&touching);
            let degree = scope.len() - 1;
            if best.is_none_or(|(_, d, _)| degree < d) {
                best = Some((slot, degree, size));
            }
        }
        let (slot, _, size) = best.unwrap();
        if size > limits.max_factor {
            return Err(CidError::ResourceCap { what: "intermediate factor", needed: size, cap: limits.max_factor });
        }
        let v = pending.remove(slot);
        let (touching, rest): (Vec<Table>, Vec<Table>) = tables.into_iter().partition(|t| t.vars.contains(&v));
        tables = rest;
        let merged = touching.iter().skip(1).fold(touching[0].clone(), |acc, t| acc.product(t));
        tables.push(merged.sum_out(v));
    }

    let refs: Vec<&Table> = tables.iter().collect();
    let (_, size) = union_size(&refs);
    let missing: u128 =
        keep.iter().filter(|v| !tables.iter().any(|t| t.vars.contains(v))).map(|&v| cards[v] as u128).product();
    if size.saturating_mul(missing) > limits.max_factor {
        return Err(CidError::ResourceCap { what: "result factor", needed: size * missing, cap: limits.max_factor });
    }
    let mut result = tables.iter().fold(Table::scalar(1.0), |acc, t| acc.product(t));
    for &v in keep {
        if !result.vars.contains(&v) {
            result = result.product(&Table::ones(vec![v], vec![cards[v]]));
        }
    }
    Ok(result.permuted(keep))
}

/// Distribution (or unnormalized table) over named variables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Factor {
    scope: Vec<NodeId>,
    outcomes: Vec<Vec<String>>,
    values: Vec<f64>,
}

impl Factor {
    pub(crate) fn new(scope: Vec<NodeId>, outcomes: Vec<Vec<String>>, values: Vec<f64>) -> Self {
        Factor { scope, outcomes, values }
    }

    pub fn scope(&self) -> &[NodeId] {
        &self.scope
    }

    pub fn outcomes(&self) -> &[Vec<String>] {
        &self.outcomes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, assignment: &[usize]) -> f64 {
        let cards: Vec<usize> = self.outcomes.iter().map(Vec::len).collect();
        self.values[crate::model::Configurations::index_of(&cards, assignment)]
    }

    /// Value for an assignment given as outcome labels in scope order.
    pub fn prob(&self, labels: &[&str]) -> Option<f64> {
        if labels.len() != self.scope.len() {
            return None;
        }
        let idx: Option<Vec<usize>> =
            labels.iter().zip(&self.outcomes).map(|(l, o)| o.iter().position(|x| x == l)).collect();
        idx.map(|i| self.value_at(&i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_sum_out() {
        // f(a) = [0.4, 0.6], g(a, b) = [[0.1, 0.9], [0.7, 0.3]]
        let f = Table::new(vec![0], vec![2], vec![0.4, 0.6]);
        let g = Table::new(vec![0, 1], vec![2, 2], vec![0.1, 0.9, 0.7, 0.3]);
        let fg = f.product(&g);
        assert_eq!(fg.vars, vec![0, 1]);
        let pb = fg.sum_out(0);
        assert!((pb.values[0] - (0.04 + 0.42)).abs() < 1e-15);
        assert!((pb.values[1] - (0.36 + 0.18)).abs() < 1e-15);
    }

    #[test]
    fn product_with_disjoint_scopes_broadcasts() {
        let f = Table::new(vec![3], vec![2], vec![1.0, 2.0]);
        let g = Table::new(vec![1], vec![3], vec![1.0, 10.0, 100.0]);
        let h = f.product(&g);
        assert_eq!(h.values, vec![1.0, 10.0, 100.0, 2.0, 20.0, 200.0]);
        let h2 = h.permuted(&[1, 3]);
        assert_eq!(h2.values, vec![1.0, 2.0, 10.0, 20.0, 100.0, 200.0]);
    }

    #[test]
    fn reduce_selects_slice() {
        let g = Table::new(vec![0, 1], vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(g.reduce(1, 2).values, vec![3.0, 6.0]);
        assert_eq!(g.reduce(0, 1).values, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn elimination_respects_cap() {
        let tables = vec![Table::ones(vec![0, 1, 2], vec![4, 4, 4])];
        let limits = Limits { max_factor: 16, ..Limits::default() };
        let err = eliminate(tables, &[], &[4, 4, 4], &limits).unwrap_err();
        assert!(err.is_resource_cap());
    }
}
