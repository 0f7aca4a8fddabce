//! Part categories. Label value of a part is its index plus one; 0 is
//! background.

pub const NUM_PARTS: usize = 11;

pub const PART_NAMES: [&str; NUM_PARTS] = [
    "hair",
    "face",
    "full_body_clothes",
    "upper_clothes",
    "left_arm",
    "right_arm",
    "lower_clothes",
    "left_leg_skin",
    "right_leg_skin",
    "left_shoe",
    "right_shoe",
];

pub const HAIR: usize = 0;
pub const FACE: usize = 1;
pub const FULL_BODY: usize = 2;
pub const UPPER_CLOTHES: usize = 3;
pub const LEFT_ARM: usize = 4;
pub const RIGHT_ARM: usize = 5;
pub const LOWER_CLOTHES: usize = 6;
pub const LEFT_LEG: usize = 7;
pub const RIGHT_LEG: usize = 8;
pub const LEFT_SHOE: usize = 9;
pub const RIGHT_SHOE: usize = 10;

/// Parts whose pixels are bare skin.
pub const SKIN_PARTS: [usize; 5] = [FACE, LEFT_ARM, RIGHT_ARM, LEFT_LEG, RIGHT_LEG];

#[inline]
pub fn label_of(part: usize) -> u8 {
    (part + 1) as u8
}

pub fn part_index(name: &str) -> Option<usize> {
    PART_NAMES.iter().position(|n| *n == name)
}

/// Paint order for rasterizing a parse: earlier entries are overwritten by
/// later ones where segments overlap, so small parts end up on top.
pub const PAINT_ORDER: [usize; NUM_PARTS] = [
    FULL_BODY,
    UPPER_CLOTHES,
    LOWER_CLOTHES,
    LEFT_LEG,
    RIGHT_LEG,
    LEFT_ARM,
    RIGHT_ARM,
    HAIR,
    FACE,
    LEFT_SHOE,
    RIGHT_SHOE,
];
