//! Category groups, the category-to-color bijection, and per-environment
//! object palettes.
//!
//! Category `i` always renders in color `i`, so naming an object in text
//! pins a specific pixel color. A small core palette is available in every
//! environment; each environment id additionally introduces exactly one
//! category from a fixed pool, and those env-specific categories are
//! disjoint across the whole environment universe. The trailing block of
//! categories never appears in robot demonstrations at all — only in
//! captioned web-style examples — so any grounding of those names must come
//! from that data.

use crate::text::{CATEGORY_WORDS, COLOR_WORDS, OOD_CATEGORY_START};

/// Environments are indexed 0..ENV_UNIVERSE; layouts and palettes are a pure
/// function of the id.
pub const ENV_UNIVERSE: u64 = 20;

/// Synthetic env id used for single-receptacle lab scenes.
pub const LAB_ENV_ID: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Dish,
    Item,
    Clothing,
    Bedding,
    Ood,
}

/// Core categories present in every environment.
pub const CORE_DISHES: [usize; 3] = [0, 1, 2]; // plate, bowl, cup
pub const CORE_ITEMS: [usize; 2] = [10, 11]; // can, bottle
pub const CORE_CLOTHING: [usize; 1] = [20]; // sock
pub const PILLOW: usize = 26;
pub const BLANKET: usize = 27;

/// Env-specific pool, one category per environment id.
pub const ENV_POOL: [usize; ENV_UNIVERSE as usize] = [
    3, 4, 5, 6, 7, 8, 9, // mug, pan, pot, fork, spoon, knife, jar
    12, 13, 14, 15, 16, 17, 18, 19, // book, toy, ball, brush, sponge, soap, clock, tape
    21, 22, 23, 24, 25, // shirt, towel, scarf, hat, glove
];

pub fn group_of(category: usize) -> Group {
    match category {
        0..=9 => Group::Dish,
        10..=19 => Group::Item,
        20..=25 => Group::Clothing,
        26..=27 => Group::Bedding,
        _ => Group::Ood,
    }
}

pub fn category_name(category: usize) -> &'static str {
    CATEGORY_WORDS[category]
}

pub fn color_name(category: usize) -> &'static str {
    COLOR_WORDS[category]
}

pub fn category_by_name(name: &str) -> Option<usize> {
    CATEGORY_WORDS.iter().position(|&w| w == name)
}

/// RGB in [0, 1] per color id; aligned with `COLOR_WORDS`.
pub const COLOR_RGB: [[f32; 3]; 34] = [
    [0.90, 0.10, 0.10], // red
    [0.10, 0.75, 0.10], // green
    [0.15, 0.25, 0.95], // blue
    [0.95, 0.90, 0.10], // yellow
    [0.55, 0.15, 0.75], // purple
    [0.95, 0.55, 0.10], // orange
    [0.10, 0.85, 0.85], // cyan
    [0.90, 0.10, 0.80], // magenta
    [0.98, 0.60, 0.75], // pink
    [0.55, 0.35, 0.15], // brown
    [0.10, 0.55, 0.55], // teal
    [0.50, 0.55, 0.10], // olive
    [0.10, 0.10, 0.55], // navy
    [0.55, 0.10, 0.20], // maroon
    [0.60, 0.95, 0.15], // lime
    [0.85, 0.70, 0.10], // gold
    [0.75, 0.78, 0.80], // silver
    [0.95, 0.45, 0.35], // coral
    [0.70, 0.40, 0.95], // violet
    [0.30, 0.10, 0.80], // indigo
    [0.95, 0.55, 0.50], // salmon
    [0.75, 0.70, 0.45], // khaki
    [0.65, 0.30, 0.55], // plum
    [0.85, 0.45, 0.85], // orchid
    [0.80, 0.65, 0.45], // tan
    [0.93, 0.83, 0.55], // beige
    [0.60, 0.95, 0.75], // mint
    [0.70, 0.25, 0.05], // rust
    [0.30, 0.65, 0.95], // azure
    [0.95, 0.30, 0.50], // rose
    [0.90, 0.65, 0.25], // amber
    [0.15, 0.65, 0.45], // jade
    [0.90, 0.88, 0.99], // pearl
    [0.45, 0.50, 0.58], // slate
];

/// The single category introduced by environment `env_id`.
pub fn env_specific_category(env_id: u64) -> usize {
    assert!(env_id < ENV_UNIVERSE, "env_id {env_id} outside universe");
    ENV_POOL[env_id as usize]
}

/// All categories whose instances may appear in environment `env_id`.
pub fn env_categories(env_id: u64) -> Vec<usize> {
    let mut cats: Vec<usize> = CORE_DISHES
        .iter()
        .chain(&CORE_ITEMS)
        .chain(&CORE_CLOTHING)
        .copied()
        .collect();
    cats.push(PILLOW);
    cats.push(BLANKET);
    cats.push(env_specific_category(env_id));
    cats.sort_unstable();
    cats
}

/// Categories usable for task-group sampling in environment `env_id`.
pub fn env_group_categories(env_id: u64, group: Group) -> Vec<usize> {
    env_categories(env_id)
        .into_iter()
        .filter(|&c| group_of(c) == group)
        .collect()
}

/// All in-distribution categories (may appear in robot action data).
pub fn in_distribution_categories() -> Vec<usize> {
    (0..OOD_CATEGORY_START).collect()
}

/// Categories reserved for web-style data only.
pub fn ood_categories() -> Vec<usize> {
    (OOD_CATEGORY_START..CATEGORY_WORDS.len()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_specific_categories_are_disjoint_across_universe() {
        for a in 0..ENV_UNIVERSE {
            for b in 0..ENV_UNIVERSE {
                if a != b {
                    assert_ne!(env_specific_category(a), env_specific_category(b));
                }
            }
        }
    }

    #[test]
    fn env_specific_categories_never_include_core_or_ood() {
        let core: Vec<usize> = env_categories(0)
            .into_iter()
            .filter(|&c| c != env_specific_category(0))
            .collect();
        for e in 0..ENV_UNIVERSE {
            let s = env_specific_category(e);
            assert!(!core.contains(&s));
            assert!(group_of(s) != Group::Ood);
        }
    }

    #[test]
    fn groups_partition_the_category_table() {
        let mut counts = [0usize; 5];
        for c in 0..CATEGORY_WORDS.len() {
            let g = group_of(c);
            counts[match g {
                Group::Dish => 0,
                Group::Item => 1,
                Group::Clothing => 2,
                Group::Bedding => 3,
                Group::Ood => 4,
            }] += 1;
        }
        assert_eq!(counts, [10, 10, 6, 2, 6]);
        assert_eq!(COLOR_RGB.len(), CATEGORY_WORDS.len());
    }
}
