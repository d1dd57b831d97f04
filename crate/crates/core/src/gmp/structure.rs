use std::fmt;

use crate::error::{Error, Result};

/// The three kernel families of a generalized memory polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    /// `s(n-l) |s(n-l)|^k`
    Aligned,
    /// `s(n-l) |s(n-l-m)|^k`
    Lagging,
    /// `s(n-l) |s(n-l+m)|^k`
    Leading,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Aligned => "aligned",
            Branch::Lagging => "lagging",
            Branch::Leading => "leading",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(Branch::Aligned),
            "lagging" => Ok(Branch::Lagging),
            "leading" => Ok(Branch::Leading),
            other => Err(Error::config(format!("unknown branch '{other}'"))),
        }
    }
}

/// One GMP basis function. `k` is the envelope power (polynomial order
/// `k + 1`), `l` the memory lag and `m` the cross lag of the cross-term
/// branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KernelDescriptor {
    pub branch: Branch,
    pub k: u32,
    pub l: usize,
    pub m: Option<usize>,
}

impl KernelDescriptor {
    pub fn aligned(k: u32, l: usize) -> Self {
        KernelDescriptor {
            branch: Branch::Aligned,
            k,
            l,
            m: None,
        }
    }

    pub fn lagging(k: u32, l: usize, m: usize) -> Self {
        KernelDescriptor {
            branch: Branch::Lagging,
            k,
            l,
            m: Some(m),
        }
    }

    pub fn leading(k: u32, l: usize, m: usize) -> Self {
        KernelDescriptor {
            branch: Branch::Leading,
            k,
            l,
            m: Some(m),
        }
    }

    /// Offset of the envelope sample relative to `n`: the envelope is read
    /// at `n - envelope_delay()`. Negative for leading kernels.
    pub fn envelope_delay(&self) -> isize {
        let m = self.m.unwrap_or(0) as isize;
        match self.branch {
            Branch::Aligned => self.l as isize,
            Branch::Lagging => self.l as isize + m,
            Branch::Leading => self.l as isize - m,
        }
    }

    /// Deepest past sample index the kernel touches.
    pub fn depth(&self) -> usize {
        match self.branch {
            Branch::Lagging => self.l + self.m.unwrap_or(0),
            Branch::Aligned | Branch::Leading => self.l,
        }
    }
}

impl fmt::Display for KernelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.m {
            Some(m) => write!(f, "{}(k={}, l={}, m={})", self.branch.name(), self.k, self.l, m),
            None => write!(f, "{}(k={}, l={})", self.branch.name(), self.k, self.l),
        }
    }
}

/// Index sets of a GMP model. A cross branch with an empty cross-lag set
/// is absent regardless of its order and lag sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GmpStructure {
    pub aligned_orders: Vec<u32>,
    pub aligned_lags: Vec<usize>,
    pub lagging_orders: Vec<u32>,
    pub lagging_lags: Vec<usize>,
    pub lagging_cross: Vec<usize>,
    pub leading_orders: Vec<u32>,
    pub leading_lags: Vec<usize>,
    pub leading_cross: Vec<usize>,
}

fn normalized<T: Ord + Copy>(mut v: Vec<T>) -> Vec<T> {
    v.sort_unstable();
    v.dedup();
    v
}

fn check_orders(name: &str, orders: &[u32]) -> Result<()> {
    match orders.iter().find(|k| *k % 2 != 0) {
        Some(k) => Err(Error::config(format!(
            "{name} contains odd envelope power {k}; only even powers (odd polynomial orders) are supported"
        ))),
        None => Ok(()),
    }
}

impl GmpStructure {
    /// Sorts and deduplicates every index set, then validates.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        aligned_orders: Vec<u32>,
        aligned_lags: Vec<usize>,
        lagging_orders: Vec<u32>,
        lagging_lags: Vec<usize>,
        lagging_cross: Vec<usize>,
        leading_orders: Vec<u32>,
        leading_lags: Vec<usize>,
        leading_cross: Vec<usize>,
    ) -> Result<Self> {
        let s = GmpStructure {
            aligned_orders: normalized(aligned_orders),
            aligned_lags: normalized(aligned_lags),
            lagging_orders: normalized(lagging_orders),
            lagging_lags: normalized(lagging_lags),
            lagging_cross: normalized(lagging_cross),
            leading_orders: normalized(leading_orders),
            leading_lags: normalized(leading_lags),
            leading_cross: normalized(leading_cross),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_orders("aligned orders", &self.aligned_orders)?;
        check_orders("lagging orders", &self.lagging_orders)?;
        check_orders("leading orders", &self.leading_orders)?;
        if self.lagging_cross.contains(&0) || self.leading_cross.contains(&0) {
            return Err(Error::config("cross lags must be positive"));
        }
        let sorted = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        let sorted_k = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
        if !(sorted_k(&self.aligned_orders)
            && sorted_k(&self.lagging_orders)
            && sorted_k(&self.leading_orders)
            && sorted(&self.aligned_lags)
            && sorted(&self.lagging_lags)
            && sorted(&self.lagging_cross)
            && sorted(&self.leading_lags)
            && sorted(&self.leading_cross))
        {
            return Err(Error::config("index sets must be strictly increasing"));
        }
        if self.kernel_count() == 0 {
            return Err(Error::config("structure defines no kernels"));
        }
        Ok(())
    }

    pub fn kernel_count(&self) -> usize {
        self.aligned_orders.len() * self.aligned_lags.len()
            + self.lagging_orders.len() * self.lagging_lags.len() * self.lagging_cross.len()
            + self.leading_orders.len() * self.leading_lags.len() * self.leading_cross.len()
    }

    /// Kernel descriptors in canonical column order: aligned by `(k, l)`,
    /// then lagging by `(k, l, m)`, then leading by `(k, l, m)`.
    pub fn descriptors(&self) -> Vec<KernelDescriptor> {
        let mut out = Vec::with_capacity(self.kernel_count());
        for &k in &self.aligned_orders {
            for &l in &self.aligned_lags {
                out.push(KernelDescriptor::aligned(k, l));
            }
        }
        for &k in &self.lagging_orders {
            for &l in &self.lagging_lags {
                for &m in &self.lagging_cross {
                    out.push(KernelDescriptor::lagging(k, l, m));
                }
            }
        }
        for &k in &self.leading_orders {
            for &l in &self.leading_lags {
                for &m in &self.leading_cross {
                    out.push(KernelDescriptor::leading(k, l, m));
                }
            }
        }
        out
    }

    /// Envelope powers present in at least one kernel, ascending.
    pub fn orders(&self) -> Vec<u32> {
        normalized(self.descriptors().iter().map(|d| d.k).collect())
    }

    /// Deepest past sample touched by any kernel.
    pub fn max_depth(&self) -> usize {
        self.descriptors().iter().map(|d| d.depth()).max().unwrap_or(0)
    }

    /// Largest look-ahead of any leading kernel (0 without a leading branch).
    pub fn max_lookahead(&self) -> usize {
        self.descriptors()
            .iter()
            .map(|d| (-d.envelope_delay()).max(0) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn summary(&self) -> String {
        format!(
            "GMP[Ka={:?} La={} | Kb={:?} Lb={} Mb={:?} | Kc={:?} Lc={} Mc={:?}; P={}]",
            self.aligned_orders,
            range_text(&self.aligned_lags),
            self.lagging_orders,
            range_text(&self.lagging_lags),
            self.lagging_cross,
            self.leading_orders,
            range_text(&self.leading_lags),
            self.leading_cross,
            self.kernel_count()
        )
    }
}

fn range_text(v: &[usize]) -> String {
    match (v.first(), v.last()) {
        (Some(a), Some(b)) if b - a + 1 == v.len() => format!("{a}..={b}"),
        _ => format!("{v:?}"),
    }
}

/// The full GMP up to memory depth `max_lag`, polynomial order `max_order`
/// (odd) and lagging depth `lagging_depth`.
///
/// Cross branches start at envelope power 2: with `k = 0` a cross kernel is
/// identical to the aligned linear kernel of the same lag.
pub fn full_structure(
    max_lag: usize,
    max_order: u32,
    lagging_depth: usize,
    include_leading: bool,
    leading_depth: usize,
) -> Result<GmpStructure> {
    if max_order == 0 || max_order % 2 == 0 {
        return Err(Error::config(format!(
            "polynomial order K must be odd and >= 1, got {max_order}"
        )));
    }
    let lags: Vec<usize> = (0..=max_lag).collect();
    let aligned: Vec<u32> = (0..max_order).step_by(2).collect();
    let cross: Vec<u32> = (2..max_order).step_by(2).collect();
    let leading_cross = if include_leading {
        (1..=leading_depth).collect()
    } else {
        Vec::new()
    };
    GmpStructure::new(
        aligned,
        lags.clone(),
        cross.clone(),
        lags.clone(),
        (1..=lagging_depth).collect(),
        cross,
        lags,
        leading_cross,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_structure_counts() {
        assert_eq!(full_structure(19, 15, 1, false, 0).unwrap().kernel_count(), 300);
        assert_eq!(full_structure(0, 1, 0, false, 0).unwrap().kernel_count(), 1);
        assert_eq!(full_structure(1, 3, 1, false, 0).unwrap().kernel_count(), 6);
        assert_eq!(full_structure(9, 7, 1, false, 0).unwrap().kernel_count(), 70);
        // leading branch adds |Kc| |Lc| |Mc|
        assert_eq!(full_structure(1, 3, 1, true, 2).unwrap().kernel_count(), 6 + 4);
    }

    #[test]
    fn single_linear_kernel() {
        let s = full_structure(0, 1, 0, false, 0).unwrap();
        assert_eq!(s.descriptors(), vec![KernelDescriptor::aligned(0, 0)]);
        assert_eq!(s.orders(), vec![0]);
    }

    #[test]
    fn even_order_rejected() {
        assert!(matches!(full_structure(3, 4, 1, false, 0), Err(Error::Config(_))));
        assert!(matches!(full_structure(3, 0, 1, false, 0), Err(Error::Config(_))));
    }

    #[test]
    fn odd_power_rejected() {
        let r = GmpStructure::new(vec![0, 1], vec![0], vec![], vec![], vec![], vec![], vec![], vec![]);
        assert!(r.is_err());
    }

    #[test]
    fn canonical_order() {
        let s = full_structure(1, 3, 1, true, 1).unwrap();
        let d = s.descriptors();
        assert_eq!(
            d,
            vec![
                KernelDescriptor::aligned(0, 0),
                KernelDescriptor::aligned(0, 1),
                KernelDescriptor::aligned(2, 0),
                KernelDescriptor::aligned(2, 1),
                KernelDescriptor::lagging(2, 0, 1),
                KernelDescriptor::lagging(2, 1, 1),
                KernelDescriptor::leading(2, 0, 1),
                KernelDescriptor::leading(2, 1, 1),
            ]
        );
        assert_eq!(s.max_depth(), 2);
        assert_eq!(s.max_lookahead(), 1);
    }

    #[test]
    fn empty_cross_set_disables_branch() {
        let s = GmpStructure::new(vec![0], vec![0, 1], vec![2, 4], vec![0, 1], vec![], vec![], vec![], vec![])
            .unwrap();
        assert_eq!(s.kernel_count(), 2);
        assert_eq!(s.orders(), vec![0]);
    }
}
