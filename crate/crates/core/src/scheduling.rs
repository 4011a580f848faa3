//! Residual-driven message schedules.
//!
//! Device indices are zero-based throughout. After each iteration the engine
//! refreshes the residual of every device it updated and asks the
//! [`Scheduler`] for the set of devices to update next:
//!
//! * `Rbp` updates only the device with the largest residual.
//! * `Grbp` forms a group of the `k` largest-residual devices (`k` = number of
//!   devices currently detected active, at least one) and drops one device
//!   from the front of the group per iteration until it is exhausted.
//! * `Grbpp` behaves like `Grbp` but performs a full refresh of all devices
//!   every time the group is exhausted, and regroups right after it.
//! * `Full` updates every device every iteration (flooding).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::scalar::{Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Rbp,
    Grbp,
    Grbpp,
    Full,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Rbp, Policy::Grbp, Policy::Grbpp, Policy::Full];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Rbp => "rbp",
            Policy::Grbp => "grbp",
            Policy::Grbpp => "grbpp",
            Policy::Full => "full",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected one of rbp, grbp, grbpp, full)"))
    }
}

/// Ordered set of devices to update in the next sweep. A set produced by a
/// full refresh carries `Policy::Full` regardless of the running policy; the
/// group policies use that tag to know a fresh group is due.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleSet {
    pub indices: Vec<usize>,
    pub policy: Policy,
}

impl ScheduleSet {
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            policy: Policy::Full,
        }
    }

    pub fn empty(policy: Policy) -> Self {
        Self {
            indices: Vec::new(),
            policy,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full_refresh(&self) -> bool {
        self.policy == Policy::Full
    }

    /// True when the set has no duplicates and every index is below `n`.
    pub fn is_valid(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        self.indices.iter().all(|&i| {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
            true
        })
    }
}

/// Per-device residuals, one nonnegative value per device node.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector<T: Real> {
    pub res: Vec<T>,
}

/// How the change of a device's beliefs is turned into a residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMetric {
    /// `‖ĥₙ⁽ⁱ⁾ − ĥₙ⁽ⁱ⁻¹⁾‖₂` over the antennas.
    #[default]
    Mean,
    /// Adds the squared change of the per-antenna activity estimates under
    /// the square root.
    MeanAndActivity,
}

impl<T: Real> ResidualVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            res: vec![T::zero(); n],
        }
    }

    /// Recomputes the residual of the devices in `updated`; every other
    /// device keeps its previous residual.
    pub fn refresh(
        &mut self,
        metric: ResidualMetric,
        h_new: ArrayView2<C<T>>,
        h_old: ArrayView2<C<T>>,
        rho_new: ArrayView2<T>,
        rho_old: ArrayView2<T>,
        updated: &[usize],
    ) {
        for &n in updated {
            let mut acc: T = h_new
                .row(n)
                .iter()
                .zip(h_old.row(n))
                .map(|(a, b)| (*a - *b).norm_sqr())
                .sum();
            if metric == ResidualMetric::MeanAndActivity {
                acc = acc
                    + rho_new
                        .row(n)
                        .iter()
                        .zip(rho_old.row(n))
                        .map(|(a, b)| (*a - *b).powi(2))
                        .sum::<T>();
            }
            self.res[n] = acc.sqrt();
        }
    }

    pub fn len(&self) -> usize {
        self.res.len()
    }

    pub fn is_empty(&self) -> bool {
        self.res.is_empty()
    }
}

/// Residuals of all devices from two belief snapshots.
pub fn compute_residuals<T: Real>(
    metric: ResidualMetric,
    h_new: ArrayView2<C<T>>,
    h_old: ArrayView2<C<T>>,
    rho_new: ArrayView2<T>,
    rho_old: ArrayView2<T>,
) -> ResidualVector<T> {
    let n = h_new.nrows();
    let mut out = ResidualVector::zeros(n);
    let all: Vec<usize> = (0..n).collect();
    out.refresh(metric, h_new, h_old, rho_new, rho_old, &all);
    out
}

// descending residual, ties to the lower index
fn by_residual<T: Real>(res: &[T]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        res[b]
            .partial_cmp(&res[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// Indices of the `k` largest residuals, largest first.
pub fn top_k<T: Real>(residuals: &ResidualVector<T>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(by_residual(&residuals.res));
    order.truncate(k.min(residuals.len()));
    order
}

pub fn update_rbp<T: Real>(residuals: &ResidualVector<T>) -> ScheduleSet {
    ScheduleSet {
        indices: top_k(residuals, 1),
        policy: Policy::Rbp,
    }
}

/// Number of devices a fresh group holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupSize {
    /// `max(detected_count, 1)`.
    #[default]
    Detected,
    /// A fixed group size, clamped to `[1, N]`.
    Fixed(usize),
}

impl GroupSize {
    pub fn resolve(self, detected: usize, n: usize) -> usize {
        let k = match self {
            GroupSize::Detected => detected,
            GroupSize::Fixed(k) => k,
        };
        k.max(1).min(n.max(1))
    }
}

pub fn update_grbp<T: Real>(
    prev: &ScheduleSet,
    residuals: &ResidualVector<T>,
    detected_count: usize,
    group: GroupSize,
) -> ScheduleSet {
    let indices = if prev.is_empty() || prev.is_full_refresh() {
        top_k(residuals, group.resolve(detected_count, residuals.len()))
    } else {
        prev.indices[1..].to_vec()
    };
    ScheduleSet {
        indices,
        policy: Policy::Grbp,
    }
}

pub fn update_grbpp<T: Real>(
    prev: &ScheduleSet,
    residuals: &ResidualVector<T>,
    detected_count: usize,
    n: usize,
    group: GroupSize,
) -> ScheduleSet {
    if prev.is_empty() {
        return ScheduleSet::full(n);
    }
    ScheduleSet {
        policy: Policy::Grbpp,
        ..update_grbp(prev, residuals, detected_count, group)
    }
}

/// Message updates performed by one sweep over `set` with `m` antennas.
pub fn update_count(set: &ScheduleSet, m: usize) -> u64 {
    (set.len() * m) as u64
}

/// Stateless schedule selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheduler {
    pub policy: Policy,
    pub group: GroupSize,
    pub n: usize,
}

impl Scheduler {
    pub fn new(policy: Policy, n: usize) -> Self {
        Self {
            policy,
            group: GroupSize::Detected,
            n,
        }
    }

    pub fn with_group(mut self, group: GroupSize) -> Self {
        self.group = group;
        self
    }

    /// One application of the policy's update rule. May return an empty set
    /// (a group policy whose group just ran out).
    pub fn update<T: Real>(
        &self,
        prev: &ScheduleSet,
        residuals: &ResidualVector<T>,
        detected_count: usize,
    ) -> ScheduleSet {
        match self.policy {
            Policy::Full => ScheduleSet::full(self.n),
            Policy::Rbp => update_rbp(residuals),
            Policy::Grbp => update_grbp(prev, residuals, detected_count, self.group),
            Policy::Grbpp => update_grbpp(prev, residuals, detected_count, self.n, self.group),
        }
    }

    /// The set the next sweep runs over. An exhausted group is resolved
    /// immediately (a new group for `Grbp`, a full refresh for `Grbpp`) so
    /// that no iteration sweeps an empty set.
    pub fn next<T: Real>(
        &self,
        prev: &ScheduleSet,
        residuals: &ResidualVector<T>,
        detected_count: usize,
    ) -> ScheduleSet {
        let set = self.update(prev, residuals, detected_count);
        if set.is_empty() {
            self.update(&set, residuals, detected_count)
        } else {
            set
        }
    }
}

/// Residual snapshot helper for tests and tooling: residuals from two
/// channel snapshots only.
pub fn mean_residuals<T: Real>(h_new: &Array2<C<T>>, h_old: &Array2<C<T>>) -> ResidualVector<T> {
    let rho = Array2::<T>::zeros((h_new.nrows(), 0));
    compute_residuals(ResidualMetric::Mean, h_new.view(), h_old.view(), rho.view(), rho.view())
}
