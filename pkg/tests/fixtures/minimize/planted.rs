use vstd::prelude::*;

verus! {

pub open spec fn cap_ok(n: u64) -> bool {
    n <= 4096
}

/// Sum of two in-cap counters stays within the arena capacity.
/// Three of the six asserts below are redundant leftovers from
/// earlier repair rounds; minimization should strip exactly those.
pub proof fn lemma_cap_growth(a: u64, b: u64)
    requires
        cap_ok(a),
        cap_ok(b),
        a + b <= 4096,
    ensures
        cap_ok((a + b) as u64),
{
    assert(a <= 4096);
    assert(b <= 4096);
    assert(a as int + b as int <= 4096);
    assert(a + b <= 4096);
    assert(cap_ok(a));
    assert(cap_ok((a + b) as u64));
}

} // verus!
