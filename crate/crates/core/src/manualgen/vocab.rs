//! Word lists for both games.

pub const RTFM_MONSTERS: [&str; 9] = [
    "wolf", "jaguar", "panther", "goblin", "bat", "imp", "shaman", "ghost", "zombie",
];
pub const RTFM_WEAPONS: [&str; 8] = [
    "sword",
    "axe",
    "morningstar",
    "polearm",
    "knife",
    "katana",
    "cutlass",
    "spear",
];
pub const RTFM_ELEMENTS: [&str; 4] = ["cold", "fire", "lightning", "poison"];
pub const RTFM_MODIFIERS: [&str; 8] = [
    "grandmaster",
    "blessed",
    "shimmering",
    "gleaming",
    "fanatical",
    "mysterious",
    "soldier",
    "arcane",
];
pub const RTFM_TEAMS: [&str; 3] = ["star alliance", "order of the forest", "rebel enclave"];

pub const RTFM_NEW_MONSTERS: [&str; 9] = [
    "tiger", "bear", "puma", "elf", "vampire", "gremlin", "witch", "specter", "robot",
];
pub const RTFM_NEW_WEAPONS: [&str; 3] = ["sabre", "tomahawk", "sunglow"];
pub const RTFM_NEW_MODIFIERS: [&str; 8] = [
    "superstars",
    "sacred",
    "glittering",
    "shiny",
    "obsessive",
    "bizarre",
    "secret",
    "esoteric",
];

/// Monsters per team and modifiers per element in a group assignment.
pub const MONSTERS_PER_TEAM: usize = 3;
pub const MODIFIERS_PER_ELEMENT: usize = 2;

/// Entity words for one RTFM split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RtfmWords {
    pub monsters: &'static [&'static str],
    pub weapons: &'static [&'static str],
    pub modifiers: &'static [&'static str],
    pub elements: &'static [&'static str],
    pub teams: &'static [&'static str],
}

pub const RTFM_TRAIN_WORDS: RtfmWords = RtfmWords {
    monsters: &RTFM_MONSTERS,
    weapons: &RTFM_WEAPONS,
    modifiers: &RTFM_MODIFIERS,
    elements: &RTFM_ELEMENTS,
    teams: &RTFM_TEAMS,
};

pub const RTFM_NEW_WORDS: RtfmWords = RtfmWords {
    monsters: &RTFM_NEW_MONSTERS,
    weapons: &RTFM_NEW_WEAPONS,
    modifiers: &RTFM_NEW_MODIFIERS,
    elements: &RTFM_ELEMENTS,
    teams: &RTFM_TEAMS,
};

/// The twelve MESSENGER entities, each with three synonymous surface forms.
pub const MESSENGER_ENTITIES: [(&str, [&str; 3]); 12] = [
    ("airplane", ["airplane", "plane", "jet"]),
    ("mage", ["mage", "wizard", "sorcerer"]),
    ("dog", ["dog", "hound", "puppy"]),
    ("bird", ["bird", "sparrow", "songbird"]),
    ("fish", ["fish", "minnow", "goldfish"]),
    ("scientist", ["scientist", "researcher", "chemist"]),
    ("thief", ["thief", "robber", "burglar"]),
    ("ship", ["ship", "boat", "vessel"]),
    ("ball", ["ball", "sphere", "orb"]),
    ("robot", ["robot", "android", "automaton"]),
    ("queen", ["queen", "monarch", "empress"]),
    ("sword", ["sword", "blade", "saber"]),
];

pub const ENEMY_WORDS: [&str; 3] = ["enemy", "opponent", "adversary"];
pub const ENEMY_ADJECTIVES: [&str; 3] = ["dangerous", "deadly", "lethal"];
pub const MESSAGE_WORDS: [&str; 3] = ["message", "memo", "report"];
pub const MESSAGE_ADJECTIVES: [&str; 3] = ["restricted", "classified", "secret"];
pub const GOAL_WORDS: [&str; 3] = ["goal", "target", "aim"];
pub const GOAL_ADJECTIVES: [&str; 3] = ["crucial", "vital", "essential"];

pub const MESSENGER_GOAL_SENTENCE: &str =
    "bring every message to a goal and stay away from the enemy";

/// Tokens used for agents in rendered observations.
pub const SELF_TOKEN: &str = "you";
pub const ALLY_TOKEN: &str = "ally";
pub const EMPTY_INVENTORY: &str = "empty";

/// Lowercase word tokens; punctuation separates words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}
