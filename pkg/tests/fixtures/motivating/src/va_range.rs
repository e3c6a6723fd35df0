use vstd::prelude::*;
use core::ops::Range;

verus! {

pub type Vaddr = usize;

pub struct NodeHelper {
}

impl NodeHelper {
    /// Whether nid indexes a node inside the page-table arena.
    pub open spec fn valid_nid(nid: u64) -> bool {
        nid < 512
    }

    pub open spec fn total_size() -> u64 {
        512
    }
}

pub open spec fn va_range_wf(va: Range<Vaddr>) -> bool {
    va.start <= va.end
}

pub open spec fn va_range_get_guard_level(va: Range<Vaddr>) -> u64 {
    4
}

pub open spec fn va_range_get_tree_path(va: Range<Vaddr>) -> Seq<u64> {
    Seq::empty()
}

/// Multiplying then dividing by a larger constant keeps the value
/// strictly below the original bound; used for index arithmetic.
pub proof fn lemma_multiply_divide_lt(a: u64, b: u64, c: u64)
    requires
        b > 0,
        a < b * c,
    ensures
        a / b < c,
{
    admit();
}

pub proof fn lemma_va_range_get_guard_level(va: Range<Vaddr>)
    requires
        va_range_wf(va),
    ensures
        va_range_get_guard_level(va) <= 4,
{
}

pub proof fn lemma_va_range_get_tree_path(va: Range<Vaddr>)
    requires
        va_range_wf(va),
    ensures
        va_range_get_tree_path(va).len() == va_range_get_guard_level(va),
        forall|i: int| 0 <= i < va_range_get_tree_path(va).len()
            ==> NodeHelper::valid_nid(va_range_get_tree_path(va)[i]),
{
}

} // verus!
