//! Generated input files: a 49-site pattern list, a species list expanding
//! to 1,017 keywords, and random induction training sets.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const TEMPLATES: &[&str] = &[
    "https://{host}/sch/i.html?_from=R40&_nkw=KEYWORD&_sacat=0",
    "https://{host}/search?q=KEYWORD",
    "https://{host}/s?k=KEYWORD&ref=nb",
    "https://{host}/catalog/search?query=KEYWORD&page=1",
    "https://{host}/listings?keywords=KEYWORD",
    "http://{host}/find.php?term=KEYWORD",
    "https://{host}/search/?text=KEYWORD&sort=new",
];

/// 49 search-form patterns, one per site.
pub fn pattern_file_49() -> String {
    let mut out = String::from("# domain\ttemplate\n");
    for i in 0..49 {
        let host = format!("www.market{:02}.example", i + 1);
        let t = TEMPLATES[i % TEMPLATES.len()].replace("{host}", &host);
        out.push_str(&format!("{host}\t{t}\n"));
    }
    out
}

const GENERA: &[&str] = &[
    "Ara", "Panthera", "Loxodonta", "Eretmochelys", "Manis", "Diceros", "Pongo", "Cacatua",
    "Crocodylus", "Chelonia", "Falco", "Gorilla", "Ailuropoda", "Balaena", "Python", "Ursus",
    "Acinonyx", "Psittacus", "Tapirus", "Rhinoceros", "Lemur", "Varanus", "Aquila", "Pan",
    "Elephas",
];

const EPITHETS: &[&str] = &[
    "macao", "tigris", "africana", "imbricata", "javanica", "bicornis", "abelii", "moluccensis",
    "niloticus", "mydas", "peregrinus", "gorilla", "melanoleuca", "mysticetus", "regius",
    "arctos",
];

const ADJECTIVES: &[&str] = &[
    "Great", "Lesser", "Northern", "Southern", "Eastern", "Western", "Golden", "Black", "White",
    "Red", "Blue", "Green", "Spotted", "Striped", "Crested", "Giant", "Pygmy", "Royal", "Common",
    "Dwarf", "Long-tailed", "Short-eared", "Grey", "Brown", "Yellow-crested", "Mountain",
    "Forest", "Desert", "Island", "Coastal", "Highland",
];

const NOUNS: &[&str] = &[
    "macaw", "tiger", "elephant", "turtle", "pangolin", "rhinoceros", "orangutan", "cockatoo",
    "crocodile", "falcon", "gorilla", "panda", "whale", "python", "bear", "cheetah", "parrot",
    "tapir", "lemur", "monitor",
];

/// Species CSV whose keyword expansion has exactly 1,017 entries: 250 rows
/// with two English names, 120 with one and 27 with none, plus case
/// variants and repeats that deduplicate away.
pub fn species_file_1017() -> String {
    let mut english = ADJECTIVES
        .iter()
        .flat_map(|a| NOUNS.iter().map(move |n| format!("{a} {n}")));
    let mut out = String::from("scientific_name,english_names\n");
    for i in 0..397 {
        let sci = format!("{} {}", GENERA[i % GENERA.len()], EPITHETS[i / GENERA.len()]);
        let names: Vec<String> = match i {
            0..250 => {
                let a = english.next().unwrap();
                let b = english.next().unwrap();
                // every tenth row repeats a name in another casing
                if i % 10 == 0 {
                    let shout = a.to_uppercase();
                    vec![a, b, shout]
                } else {
                    vec![a, b]
                }
            }
            250..370 => vec![english.next().unwrap()],
            _ => Vec::new(),
        };
        out.push_str(&format!("{sci},\"{}\"\n", names.join("; ")));
    }
    // a repeated row adds nothing
    out.push_str("Ara macao,\"Great macaw\"\n");
    out
}

/// Three patterns and five keywords: 15 seeds.
pub fn desk_patterns() -> String {
    "www.alpha.example\thttps://www.alpha.example/search?q=KEYWORD\n\
     www.beta.example\thttps://www.beta.example/s?k=KEYWORD\n\
     www.gamma.example\thttps://www.gamma.example/find?term=KEYWORD&x=1\n"
        .to_string()
}

pub fn desk_species() -> String {
    "scientific_name,english_names\nAra glaucogularis,\"Blue-throated macaw; blue-throated MACAW\"\nPanthera tigris,Tiger\nManis javanica,\n"
        .to_string()
}

// ------------------------------------------------------ training sets

const TAGS: &[&str] = &["div", "span", "p", "ul", "li", "b", "section"];
const CLASSES: &[&str] = &["a", "b", "c", "row", "cell", "val"];

#[derive(Clone)]
struct TNode {
    tag: &'static str,
    classes: Vec<&'static str>,
    id: Option<String>,
    children: Vec<TNode>,
    /// Holds the field value when set.
    target: bool,
    filler: String,
}

fn random_tree(rng: &mut StdRng, depth: usize, budget: &mut usize) -> TNode {
    let mut classes: Vec<&'static str> = Vec::new();
    if rng.random_bool(0.5) {
        classes.push(CLASSES[rng.random_range(0..CLASSES.len())]);
    }
    let id = rng.random_bool(0.1).then(|| format!("n{}", rng.random_range(0..6)));
    let mut children = Vec::new();
    if depth > 0 {
        let n = rng.random_range(0..=3usize);
        for _ in 0..n {
            if *budget == 0 {
                break;
            }
            *budget -= 1;
            children.push(random_tree(rng, depth - 1, budget));
        }
    }
    TNode {
        tag: TAGS[rng.random_range(0..TAGS.len())],
        classes,
        id,
        children,
        target: false,
        filler: format!("w{}", rng.random_range(0..8)),
    }
}

/// Child-index paths of the leaves under `node`.
fn leaves(node: &TNode, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if node.children.is_empty() {
        out.push(prefix.clone());
    }
    for (i, c) in node.children.iter().enumerate() {
        prefix.push(i);
        leaves(c, prefix, out);
        prefix.pop();
    }
}

fn render(node: &TNode, value: &str, decoy: Option<&str>, out: &mut String) {
    out.push('<');
    out.push_str(node.tag);
    if !node.classes.is_empty() {
        out.push_str(&format!(" class=\"{}\"", node.classes.join(" ")));
    }
    if let Some(id) = &node.id {
        out.push_str(&format!(" id=\"{id}\""));
    }
    if let Some(d) = decoy.filter(|_| node.target) {
        out.push_str(&format!(" title=\"{d}\""));
    }
    out.push('>');
    if node.target {
        out.push_str(value);
    } else if node.children.is_empty() {
        out.push_str(&node.filler);
    }
    for c in &node.children {
        render(c, value, decoy, out);
    }
    out.push_str(&format!("</{}>", node.tag));
}

/// Perturbs a copy of the template: random siblings inserted, classes
/// occasionally dropped; the target keeps its place in the tree.
fn perturb(rng: &mut StdRng, node: &TNode) -> TNode {
    let mut n = node.clone();
    if !n.target && rng.random_bool(0.15) {
        n.classes.clear();
    }
    n.children = node.children.iter().map(|c| perturb(rng, c)).collect();
    if !n.children.is_empty() && rng.random_bool(0.2) {
        let at = rng.random_range(0..=n.children.len());
        let mut budget = 2;
        let mut extra = random_tree(rng, 1, &mut budget);
        extra.target = false;
        n.children.insert(at, extra);
    }
    n
}

/// Training pages (HTML, expected fields) sharing a random template, at
/// most about 60 elements and 7 levels deep.
pub fn random_training_set(seed: u64) -> Vec<(String, BTreeMap<String, String>)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut budget = 40;
    let mut template = random_tree(&mut rng, 4, &mut budget);
    template.tag = "div";
    let mut ls = Vec::new();
    leaves(&template, &mut Vec::new(), &mut ls);
    let mut target = &mut template;
    for &i in &ls[rng.random_range(0..ls.len())] {
        target = &mut target.children[i];
    }
    target.target = true;
    let pages = rng.random_range(2..=3);
    let attr_value = rng.random_bool(0.3);
    (0..pages)
        .map(|p| {
            let tree = if p == 0 { template.clone() } else { perturb(&mut rng, &template) };
            let value = format!("value {seed} {p}");
            let mut body = String::new();
            if attr_value {
                render(&tree, "", Some(&value), &mut body);
            } else {
                render(&tree, &value, None, &mut body);
            }
            let html = format!("<html><head><title>t</title></head><body>{body}</body></html>");
            (html, BTreeMap::from([("field".to_string(), value)]))
        })
        .collect()
}
