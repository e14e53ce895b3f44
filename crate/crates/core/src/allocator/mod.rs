//! Per-epoch channel allocation: draw `m` slot users from the target rates,
//! then match slots to channels that are ON for the slot's user.

mod matching;
mod select;

use rand::Rng;

pub use matching::{
    build_bipartite, max_matching, BipartiteGraph, ChannelMatrix, Matching, SlotGraph,
};
pub use select::{select_users, SlotList, SlotPlan};

use crate::error::Result;
use crate::model::RateVector;

/// Outcome of one epoch of allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub slots: SlotList,
    /// Matched `(slot, channel)` pairs.
    pub matching: Matching,
    /// Channels (= frames, with unit frame size) delivered to each user.
    pub served: Vec<u32>,
}

impl Allocation {
    /// All filled slots were matched.
    pub fn is_perfect(&self) -> bool {
        self.matching.len() == self.slots.slots.iter().flatten().count()
    }
}

/// Reusable allocator for a fixed rate vector. Unmatched channels stay idle.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAllocator {
    plan: SlotPlan,
    users: usize,
}

impl ChannelAllocator {
    pub fn new(alpha: &RateVector, m: usize) -> Result<Self> {
        Ok(ChannelAllocator { plan: SlotPlan::new(alpha, m)?, users: alpha.len() })
    }

    pub fn plan(&self) -> &SlotPlan {
        &self.plan
    }

    pub fn allocate<R: Rng + ?Sized>(&self, h: &ChannelMatrix, rng: &mut R) -> Allocation {
        let slots = self.plan.draw(rng);
        let SlotGraph { graph, slot_of } = build_bipartite(&slots, h);
        let m = max_matching(&graph);
        let mut served = vec![0u32; self.users];
        let pairs = m
            .pairs
            .iter()
            .map(|&(l, ch)| {
                let slot = slot_of[l];
                if let Some(u) = slots.slots[slot] {
                    served[u] += 1;
                }
                (slot, ch)
            })
            .collect();
        Allocation { slots, matching: Matching { pairs }, served }
    }
}

/// One-shot allocation for rates `alpha` on realised channel states `h`.
pub fn allocate_channels<R: Rng + ?Sized>(
    alpha: &RateVector,
    h: &ChannelMatrix,
    rng: &mut R,
) -> Result<Allocation> {
    Ok(ChannelAllocator::new(alpha, h.channels())?.allocate(h, rng))
}
