use vstd::prelude::*;

verus! {

pub struct Inner {
    pub value: u64,
}

pub struct Outer {
    pub part: Inner,
}

pub trait Renderable {
}

impl Renderable for Outer {
}

pub type InnerAlias = Inner;

impl Outer {
    pub fn refresh(&self) {
    }
}

pub open spec fn size_ok(n: u64) -> bool {
    n < 1024
}

pub proof fn lemma_size_bounded(n: u64)
    requires
        size_ok(n),
    ensures
        n < 2048,
{
}

pub fn rebuild(source: InnerAlias) {
    install();
}

pub fn install() {
}

} // verus!
