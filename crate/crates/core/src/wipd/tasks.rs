use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest task count a [`TaskSet`] can hold.
pub const MAX_TASKS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u8);

/// Subset of `0..m` as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<u8>", try_from = "Vec<u8>")]
pub struct TaskSet(u32);

impl TaskSet {
    pub const EMPTY: TaskSet = TaskSet(0);

    pub fn from_bits(bits: u32) -> Self {
        TaskSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// All of `0..m`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_TASKS);
        TaskSet(if m == MAX_TASKS { u32::MAX } else { (1u32 << m) - 1 })
    }

    pub fn of(tasks: &[u8]) -> Self {
        tasks.iter().fold(TaskSet::EMPTY, |s, &t| s.with(TaskId(t)))
    }

    pub fn with(self, t: TaskId) -> Self {
        TaskSet(self.0 | (1 << t.0))
    }

    pub fn contains(self, t: TaskId) -> bool {
        self.0 & (1 << t.0) != 0
    }

    pub fn union(self, o: TaskSet) -> Self {
        TaskSet(self.0 | o.0)
    }

    pub fn intersection(self, o: TaskSet) -> Self {
        TaskSet(self.0 & o.0)
    }

    pub fn difference(self, o: TaskSet) -> Self {
        TaskSet(self.0 & !o.0)
    }

    pub fn is_subset(self, o: TaskSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn is_disjoint(self, o: TaskSet) -> bool {
        self.0 & o.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = TaskId> {
        (0..MAX_TASKS as u8)
            .filter(move |&t| self.0 & (1 << t) != 0)
            .map(TaskId)
    }

    /// Every subset of `self`, starting from the empty set.
    pub fn subsets(self) -> impl Iterator<Item = TaskSet> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(TaskSet(cur))
        })
    }

    /// Tie-break order: fewer tasks first, then lexicographically smaller
    /// ascending task lists.
    pub fn tie_order(self, o: TaskSet) -> std::cmp::Ordering {
        self.len().cmp(&o.len()).then_with(|| self.iter().cmp(o.iter()))
    }

    pub(crate) fn check_within(self, m: usize) -> Result<()> {
        if self.is_subset(TaskSet::full(m)) {
            Ok(())
        } else {
            Err(Error::domain(format!("task set {self} names tasks outside 0..{m}")))
        }
    }
}

impl fmt::Display for TaskSet {
    /// Task ids joined by `;`, e.g. `0;2;5`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.iter().map(|t| t.0.to_string()).collect();
        f.write_str(&ids.join(";"))
    }
}

impl fmt::Debug for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl From<TaskSet> for Vec<u8> {
    fn from(s: TaskSet) -> Self {
        s.iter().map(|t| t.0).collect()
    }
}

impl TryFrom<Vec<u8>> for TaskSet {
    type Error = String;

    fn try_from(v: Vec<u8>) -> std::result::Result<Self, String> {
        if let Some(t) = v.iter().find(|&&t| t as usize >= MAX_TASKS) {
            return Err(format!("task id {t} exceeds {}", MAX_TASKS - 1));
        }
        Ok(TaskSet::of(&v))
    }
}

impl FromIterator<TaskId> for TaskSet {
    fn from_iter<I: IntoIterator<Item = TaskId>>(iter: I) -> Self {
        iter.into_iter().fold(TaskSet::EMPTY, TaskSet::with)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerates_power_set() {
        let s = TaskSet::of(&[1, 3, 4]);
        let all: Vec<TaskSet> = s.subsets().collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0], TaskSet::EMPTY);
        assert!(all.iter().all(|x| x.is_subset(s)));
        assert_eq!(TaskSet::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn tie_order_prefers_small_then_lexicographic() {
        use std::cmp::Ordering::*;
        assert_eq!(TaskSet::EMPTY.tie_order(TaskSet::of(&[0])), Less);
        assert_eq!(TaskSet::of(&[0, 5]).tie_order(TaskSet::of(&[1, 2])), Less);
        assert_eq!(TaskSet::of(&[3]).tie_order(TaskSet::of(&[0, 1])), Less);
    }

    #[test]
    fn serde_as_id_list() {
        let s = TaskSet::of(&[0, 2]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[0,2]");
        let back: TaskSet = serde_json::from_str("[2,0]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<TaskSet>("[40]").is_err());
        assert_eq!(s.to_string(), "0;2");
    }
}
