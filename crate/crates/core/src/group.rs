//! User groups as bitmasks over a cluster's users.
//!
//! Group `g` of a cluster with `K` users is the nonempty subset whose mask
//! equals `g`, so the catalog is `1..=2^K - 1` and group indices are stable
//! across clusters of the same size.

/// Number of nonempty groups for `users` users.
pub fn catalog_size(users: usize) -> usize {
    (1usize << users) - 1
}

pub fn size(mask: u32) -> usize {
    mask.count_ones() as usize
}

pub fn contains(mask: u32, user: usize) -> bool {
    mask & (1 << user) != 0
}

/// Users of a group in increasing order.
pub fn members(mask: u32) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let k = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(k)
        }
    })
}

/// Position of `user` within the group, if it is a member.
pub fn position(mask: u32, user: usize) -> Option<usize> {
    contains(mask, user).then(|| (mask & ((1 << user) - 1)).count_ones() as usize)
}

/// All group masks of a cluster, in index order.
pub fn all(users: usize) -> impl Iterator<Item = u32> {
    1..=(catalog_size(users) as u32)
}
