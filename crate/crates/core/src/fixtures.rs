//! Small worked-example fixtures: a toy knowledge graph, a ten-passage text
//! corpus, and scripted dialogues that replay the prompt-template examples.
//! Used by tests, benchmarks and the CLI demo data.

use crate::env::{Corpus, KgStore, Passage, QAInstance};
use crate::gateway::{Matcher, ScriptedRule};

/// The triples shown to the worker for "Who is the mother of Xawery
/// Żuławski?", in display order.
pub const XAWERY_TRIPLES: [(&str, &str, &str); 10] = [
    ("Xawery Żuławski", "mother", "Małgorzata Braunek"),
    ("Xawery Żuławski", "father", "Andrzej Żuławski"),
    ("Xawery Żuławski", "family", "Q63532193"),
    ("Xawery Żuławski", "family name", "Q56541485"),
    ("Xawery Żuławski", "spouse", "Maria Strzelecka"),
    ("Xawery Żuławski", "date of birth", "1971-12-22T00:00:00Z"),
    ("Xawery Żuławski", "sibling", "Vincent Zulawski"),
    ("Xawery Żuławski", "place of birth", "Warsaw"),
    ("Andrzej Żuławski", "child", "Xawery Żuławski"),
    ("Małgorzata Braunek", "child", "Xawery Żuławski"),
];

pub const POLISH_RUSSIAN_WAR: &str = "Polish-Russian War (film)";
pub const POLISH_RUSSIAN_QUESTION: &str = "Who is the mother of the director of film Polish-Russian War (Film)?";
pub const FILMS_QUESTION: &str = "Which film came out first, Blind Shaft or The Mask Of Fu Manchu?";
pub const NAMIBIA_QUESTION: &str = "Who succeeded the first President of Namibia?";
pub const KYEON_QUESTION: &str = "What college did Kyeon Mi-ri attend?";

/// Toy knowledge graph. Handles double as labels.
pub fn toy_kg() -> KgStore {
    let mut kg = KgStore::new();
    for (h, r, t) in XAWERY_TRIPLES {
        kg.insert(h, r, t);
    }
    kg.insert(POLISH_RUSSIAN_WAR, "director", "Xawery Żuławski");
    kg.insert(POLISH_RUSSIAN_WAR, "instance of", "film");
    kg.insert(POLISH_RUSSIAN_WAR, "publication date", "2009");
    kg.insert("Blind Shaft", "instance of", "film");
    kg.insert("Blind Shaft", "publication date", "2003");
    kg.insert("Blind Shaft", "director", "Li Yang");
    kg.insert("The Mask Of Fu Manchu", "instance of", "film");
    kg.insert("The Mask Of Fu Manchu", "publication date", "1932");
    kg.insert("The Mask Of Fu Manchu", "director", "Charles Brabin");
    kg.insert("Małgorzata Braunek", "date of birth", "1947-01-30T00:00:00Z");
    kg
}

/// Ten passages; exactly one mentions Kyeon Mi-ri.
pub fn ten_passages() -> Corpus {
    let p = |id: &str, title: &str, text: &str| Passage::new(id, title, text);
    Corpus::new(vec![
        p("d00", "Kyeon Mi-ri", "Kyeon Mi-ri graduated from Seoul Traditional Arts High School in 1983, then studied Dance at Sejong University. She made her acting debut in 1984, and has since become active in television dramas, most notably as the arrogant and ambitious Lady Choi in the 2003 period drama \"Dae Jang Geum\" (or \"Jewel in the Palace\"), which was a hit not only in Korea but throughout Asia."),
        p("d01", "Shin Kyeong-nim", "Shin Kyeong-nim was born on April 6, 1936 in North Chungcheong Province, South Korea. Shin Kyeong-nim graduated in English Literature from Dongguk University, from which time he strove to become a creative writer."),
        p("d02", "Paige Ackerson-Kiely", "Paige Ackerson-Kiely received a BA in Asian Studies from the University of New Mexico in Albuquerque. Prior to this achievement, she attended Beloit College in Beloit, Wisconsin, Marmara University in Istanbul, and Birzeit University in Birzeit, Palestine."),
        p("d03", "Han Seung-yeon", "Han Seung-yeon was born on July 24, 1988, in Seoul, South Korea. She was accepted by Kyung Hee University, majoring in theater and film."),
        p("d04", "Myo Min Zaw", "Myo Min Zaw studied English at the University of Yangon, where he became active in the pro-democracy group All Burma Federation of Student Unions (ABFSU)."),
        p("d05", "Sam Nujoma", "Sam Nujoma was the first President of Namibia, serving three terms from 1990 to 2005."),
        p("d06", "Hifikepunye Pohamba", "Hifikepunye Pohamba succeeded Sam Nujoma as the President of Namibia in 2005."),
        p("d07", "Blind Shaft", "Blind Shaft is a 2003 Chinese drama film directed by Li Yang."),
        p("d08", "The Mask of Fu Manchu", "The Mask of Fu Manchu is a 1932 pre-Code adventure film directed by Charles Brabin."),
        p("d09", "Brookhaven, New York", "Brookhaven is a town in Suffolk County, New York, home to John T. Mather Memorial Hospital's village neighbours."),
    ])
    .expect("fixture corpus is valid")
}

pub fn polish_russian_instance() -> QAInstance {
    QAInstance::new("prw", POLISH_RUSSIAN_QUESTION, "Małgorzata Braunek").with_topics([POLISH_RUSSIAN_WAR])
}

pub fn films_instance() -> QAInstance {
    QAInstance::new("films", FILMS_QUESTION, "The Mask Of Fu Manchu").with_topics(["Blind Shaft", "The Mask Of Fu Manchu"])
}

pub fn namibia_instance() -> QAInstance {
    QAInstance::new("namibia", NAMIBIA_QUESTION, "Hifikepunye Pohamba")
}

fn planner(pos: usize, question: &str, reply: &str) -> ScriptedRule {
    ScriptedRule::position(pos, reply).requiring(format!("Question: {question}"))
}

fn worker(subquestion: &str, reply: &str) -> ScriptedRule {
    ScriptedRule::substring(format!("Question: {subquestion}\n"), reply)
}

/// Two-hop knowledge-graph dialogue: director, then mother.
pub fn polish_russian_script() -> Vec<ScriptedRule> {
    vec![
        worker(
            "Who is the director of Polish-Russian War (film)?",
            "<think>[0] gives the director.</think>\n<select>[0]</select>\n<sentence>The director of Polish-Russian War (film) is Xawery Żuławski.</sentence>",
        ),
        worker(
            "Who is the mother of Xawery Żuławski?",
            "<think>The question asks me to find the mother of Xawery Żuławski. [0] says Xawery Żuławski's mother Małgorzata Braunek, which excatly meets our need. </think>\n<select>[0] </select>\n<sentence>The mother of Xawery Żuławski is Małgorzata Braunek. </sentence>",
        ),
        planner(
            0,
            POLISH_RUSSIAN_QUESTION,
            "<think>\nI need the director of the film first, then the director's mother.\n</think>\n<action>\nSearch([0], \"Who is the director of Polish-Russian War (film)?\")\n</action>",
        ),
        planner(
            1,
            POLISH_RUSSIAN_QUESTION,
            "<think>\nThe director is Xawery Żuławski. Now I need his mother.\n</think>\n<action>\nSearch([1], \"Who is the mother of Xawery Żuławski?\")\n</action>",
        ),
        planner(
            2,
            POLISH_RUSSIAN_QUESTION,
            "<think>The director is Xawery Żuławski and his mother is Małgorzata Braunek.</think>\n<answer>Małgorzata Braunek</answer>",
        ),
    ]
}

/// One iteration with two parallel subquestions, then the comparison.
pub fn films_script() -> Vec<ScriptedRule> {
    vec![
        worker(
            "When did Blind Shaft come out?",
            "<think>[1] is the publication date.</think>\n<select>[1]</select>\n<sentence>Blind Shaft came out on 2003</sentence>",
        ),
        worker(
            "When did The Mask Of Fu Manchu come out?",
            "<think>[1] is the publication date.</think>\n<select>[1]</select>\n<sentence>and The Mask Of Fu Manchu came out on 1932.</sentence>",
        ),
        planner(
            0,
            FILMS_QUESTION,
            "<think>\nTo solve this problem, I need to:\n1. Figure out when Blind Shaft came out.\n2. Figure out when The Mask Of Fu Manchu came out.\n3. Compare their dates.\nI need to search information for both of Blind Shaft and The Mask Of Fu Manchu.\n</think>\n<action>\nSearch([0], \"When did Blind Shaft come out?\")\nSearch([1], \"When did The Mask Of Fu Manchu come out?\")\n</action>",
        ),
        planner(
            1,
            FILMS_QUESTION,
            "<think>Ok. Right now I need compare their released date. 1932 is much earlier than 2003. Therefore, The Mask Of Fu Manchu came out first. </think>\n<answer>The Mask Of Fu Manchu </answer>",
        ),
    ]
}

/// Planner turns of the text-environment worked example, in order.
pub const NAMIBIA_PLANNER_TURNS: [&str; 3] = [
    "<think>\nThe question asks about the person who succeeded the first President of Namibia.\n1. I need to find who was the first President of Namibia.\n2. I need to find who succeeded the first President of Namibia.\n</think>\n<search>Who was the first President of Namibia? </search>",
    "<think>\nNow I know that Sam Nujoma was the first President of Namibia.\nI need to find who succeeded Sam Nujoma.\n</think>\n<search>Who succeeded Sam Nujoma? </search>",
    "<think>\nThe question asks about the person who succeeded the first President of Namibia.\nSam Nujoma was the first President of Namibia.\nHifikepunye Pohamba succeeded Sam Nujoma as the President of Namibia.\nI have all the information to answer the question.\n</think>\n<answer>\nHifikepunye Pohamba\n</answer>",
];

/// Text-environment dialogue replaying the planner worked example.
pub fn namibia_script() -> Vec<ScriptedRule> {
    let mut rules = vec![
        worker(
            "Who was the first President of Namibia?",
            "<think>[0] names the first president.</think>\n<select>[0]</select>\n<sentence>Sam Nujoma was the first President of Namibia.</sentence>",
        ),
        worker(
            "Who succeeded Sam Nujoma?",
            "<think>[0] answers it.</think>\n<select>[0]</select>\n<sentence>Hifikepunye Pohamba succeeded Sam Nujoma as the President of Namibia.</sentence>",
        ),
        worker(
            KYEON_QUESTION,
            "<think>\nThe question asks about what college Kyeon Mi-ri attended.\nPassage [0] clearly states that \"Kyeon Mi-ri graduated from Seoul Traditional Arts High School in 1983, then studied Dance at Sejong University.\"\nSo I select passage [0].\n</think>\n<select>\n[0]\n</select>\n<sentence>\nKyeon Mi-ri attended Sejong University.\n</sentence>",
        ),
    ];
    for (i, turn) in NAMIBIA_PLANNER_TURNS.iter().enumerate() {
        rules.push(planner(i, NAMIBIA_QUESTION, turn));
    }
    rules
}

/// A planner that answers `correct` or `wrong` immediately with the given
/// probability of `correct`.
pub fn coin_flip_script(p_correct: f64, correct: &str, wrong: &str) -> Vec<ScriptedRule> {
    vec![ScriptedRule::weighted(
        Matcher::Position,
        "0",
        vec![
            (p_correct, format!("<think>guess</think>\n<answer>{correct}</answer>")),
            (1.0 - p_correct, format!("<think>guess</think>\n<answer>{wrong}</answer>")),
        ],
    )]
}
