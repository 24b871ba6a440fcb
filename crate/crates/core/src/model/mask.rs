//! Role-dependent attention mask.
//!
//! Rules, with `mask[q*n + k]` meaning query position q may read key k:
//!
//! 1. Prefix positions attend to all prefix positions (bidirectional) and
//!    nothing else — the prefix never sees any suffix.
//! 2. Discrete-target positions (action-token or text targets) attend to the
//!    whole prefix and causally to target positions at or before themselves,
//!    but never to noisy continuous rows.
//! 3. Noisy continuous rows attend to the whole prefix and to all noisy rows
//!    (bidirectional within the chunk), but never to discrete targets.

use crate::model::sequence::Role;

pub fn build_attention_mask(roles: &[Role]) -> Vec<bool> {
    let n = roles.len();
    let mut mask = vec![false; n * n];
    for q in 0..n {
        for k in 0..n {
            mask[q * n + k] = allowed(roles, q, k);
        }
    }
    mask
}

fn allowed(roles: &[Role], q: usize, k: usize) -> bool {
    let is_target = |r: Role| matches!(r, Role::FastTarget | Role::TextTarget);
    match roles[q] {
        Role::Prefix => roles[k] == Role::Prefix,
        Role::FastTarget | Role::TextTarget => match roles[k] {
            Role::Prefix => true,
            Role::NoisyAction => false,
            _ if is_target(roles[k]) => k <= q,
            _ => unreachable!(),
        },
        Role::NoisyAction => matches!(roles[k], Role::Prefix | Role::NoisyAction),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent interpreter of the written rules, structured differently
    /// (per-rule predicates) from the production match.
    fn oracle(roles: &[Role], q: usize, k: usize) -> bool {
        let prefix = |i: usize| roles[i] == Role::Prefix;
        let target = |i: usize| roles[i] == Role::FastTarget || roles[i] == Role::TextTarget;
        let noisy = |i: usize| roles[i] == Role::NoisyAction;
        // Rule 1: prefix <-> prefix only.
        if prefix(q) {
            return prefix(k);
        }
        // Rule 2: targets see prefix and earlier-or-self targets.
        if target(q) {
            if prefix(k) {
                return true;
            }
            if target(k) {
                return k <= q;
            }
            return false;
        }
        // Rule 3: noisy rows see prefix and every noisy row.
        if noisy(q) {
            return prefix(k) || noisy(k);
        }
        false
    }

    /// Six surface token kinds map onto the four roles; enumerating over the
    /// surface alphabet exercises mixed prefixes the way real sequences do.
    const ALPHABET: [Role; 6] = [
        Role::Prefix, // image patch
        Role::Prefix, // prompt word
        Role::Prefix, // proprio bin
        Role::FastTarget,
        Role::TextTarget,
        Role::NoisyAction,
    ];

    #[test]
    fn exhaustive_sequences_match_rule_oracle() {
        // All sequences up to length 6 over the 6-kind alphabet.
        for len in 1..=6usize {
            let mut idx = vec![0usize; len];
            loop {
                let roles: Vec<Role> = idx.iter().map(|&i| ALPHABET[i]).collect();
                let mask = build_attention_mask(&roles);
                for q in 0..len {
                    for k in 0..len {
                        assert_eq!(
                            mask[q * len + k],
                            oracle(&roles, q, k),
                            "roles {roles:?} q={q} k={k}"
                        );
                    }
                }
                // Odometer increment.
                let mut pos = 0;
                loop {
                    if pos == len {
                        break;
                    }
                    idx[pos] += 1;
                    if idx[pos] < ALPHABET.len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == len {
                    break;
                }
            }
        }
    }

    #[test]
    fn canonical_layout_blocks() {
        // [P P P | F F | N N] spot checks of every rule.
        let roles = [
            Role::Prefix,
            Role::Prefix,
            Role::Prefix,
            Role::FastTarget,
            Role::FastTarget,
            Role::NoisyAction,
            Role::NoisyAction,
        ];
        let n = roles.len();
        let m = build_attention_mask(&roles);
        let at = |q: usize, k: usize| m[q * n + k];
        // Prefix is bidirectional within itself.
        assert!(at(0, 2) && at(2, 0));
        // Prefix never attends to any suffix.
        assert!(!at(0, 3) && !at(2, 4) && !at(1, 5));
        // Targets: prefix yes, later target no, earlier/self yes, noisy no.
        assert!(at(3, 0) && at(3, 3) && !at(3, 4) && at(4, 3) && !at(4, 5));
        // Noisy: prefix yes, targets no, all noisy rows yes (both ways).
        assert!(at(5, 0) && !at(5, 3) && at(5, 6) && at(6, 5) && at(5, 5));
    }

    #[test]
    fn text_and_action_targets_share_one_causal_block() {
        // A text target after action-token targets still sees them causally.
        let roles = [
            Role::Prefix,
            Role::FastTarget,
            Role::TextTarget,
            Role::FastTarget,
        ];
        let m = build_attention_mask(&roles);
        let n = roles.len();
        assert!(m[2 * n + 1]); // text sees earlier action token
        assert!(m[3 * n + 2]); // action token sees earlier text
        assert!(!m[1 * n + 2]); // but not the other direction
    }
}
