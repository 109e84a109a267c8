//! Task-family generators.
//!
//! Each generator is a pure function of the mixed seed: it lays out widgets
//! on the 160x210 screen, picks labels from fixed word pools, and returns the
//! task utterance together with the goal predicate data. Layout jitter is
//! small and bounded so every bbox stays inside the screen.

use crate::rng::SplitMix64;
use crate::ui::{BBox, IconKind, ShapeKind, Subtype};

use super::{Goal, Widget, SCREEN_WIDTH};

pub(super) const FAMILIES: [&str; 10] = [
    "choose-list",
    "click-button",
    "click-checkboxes",
    "click-dialog",
    "click-link",
    "click-test",
    "drag-box",
    "enter-text",
    "highlight-text",
    "login-user",
];

const NAMES: [&str; 24] = [
    "Janella", "Storm", "Selie", "Gena", "Betti", "Chrissie", "Theodora", "Helli", "Agatha",
    "Bess", "Cora", "Dagmar", "Elsa", "Freya", "Greta", "Ingrid", "Jolene", "Kari", "Lena",
    "Mona", "Nora", "Petra", "Runa", "Sigrid",
];

const WORDS: [&str; 36] = [
    "apple", "breeze", "cactus", "dawn", "ember", "frost", "grove", "harbor", "iris", "jade",
    "kelp", "lumen", "maple", "north", "onyx", "pearl", "quartz", "ridge", "stone", "tide",
    "umber", "vale", "wren", "yarn", "zephyr", "amber", "birch", "cedar", "delta", "echo",
    "fable", "gleam", "haze", "inlet", "knoll", "larch",
];

const BUTTON_WORDS: [&str; 14] = [
    "Ok", "Cancel", "Next", "Prev", "Yes", "No", "Go", "Stop", "Apply", "Close", "Open", "Save",
    "Load", "Reset",
];

const SHAPES: [ShapeKind; 3] = [ShapeKind::Circle, ShapeKind::Triangle, ShapeKind::Rectangle];
const ICONS: [IconKind; 7] = [
    IconKind::Back,
    IconKind::Delete,
    IconKind::Important,
    IconKind::Forward,
    IconKind::Reply,
    IconKind::Search,
    IconKind::Send,
];

/// Distinct samples from a pool, in shuffled order.
fn sample<'a>(rng: &mut SplitMix64, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let mut items: Vec<&str> = pool.to_vec();
    rng.shuffle(&mut items);
    items.truncate(n);
    items
}

/// Width of a rendered label box: a few pixels per character plus padding.
fn label_width(text: &str) -> i32 {
    (6 * text.chars().count() as i32 + 10).min(SCREEN_WIDTH as i32 - 8)
}

pub(super) fn generate(family: &str, mix: u64) -> Option<(String, Vec<Widget>, Goal)> {
    let mut rng = SplitMix64::new(mix);
    Some(match family {
        "click-test" => click_test(&mut rng),
        "click-button" => click_button(&mut rng),
        "click-link" => click_link(&mut rng),
        "click-checkboxes" => click_checkboxes(&mut rng),
        "click-dialog" => click_dialog(&mut rng),
        "choose-list" => choose_list(&mut rng),
        "enter-text" => enter_text(&mut rng),
        "login-user" => login_user(&mut rng),
        "drag-box" => drag_box(&mut rng),
        "highlight-text" => highlight_text(&mut rng),
        _ => return None,
    })
}

fn click_test(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let mut widgets = Vec::new();
    // Decorative shapes/icons in the top strip.
    let decorations = rng.next_below(3);
    for slot in 0..decorations {
        let x = 12 + slot as i32 * 48 + rng.range_inclusive(0, 8) as i32;
        let y = 6 + rng.range_inclusive(0, 8) as i32;
        let bbox = BBox::new(x, x + 16, y, y + 16);
        widgets.push(if rng.next_below(2) == 0 {
            Widget::shape(Subtype::Shape(*rng.choose(&SHAPES)), bbox)
        } else {
            Widget::new(crate::ui::ElementKind::Icon, bbox)
                .into_icon(*rng.choose(&ICONS))
        });
    }
    let x = rng.range_inclusive(4, 96) as i32;
    let y = rng.range_inclusive(40, 170) as i32;
    widgets.push(Widget::button("Click Me!", BBox::new(x, x + 60, y, y + 26)));
    let button = widgets.len() - 1;
    ("Click the button.".to_string(), widgets, Goal::ClickTest { button })
}

fn click_button(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let n = 2 + rng.next_below(3) as usize;
    let labels = sample(rng, &BUTTON_WORDS, n);
    let mut widgets = Vec::new();
    let x0 = rng.range_inclusive(6, 20) as i32;
    for (i, label) in labels.iter().enumerate() {
        let y = 36 + i as i32 * 34;
        widgets.push(Widget::button(*label, BBox::new(x0, x0 + label_width(label), y, y + 24)));
    }
    let buttons: Vec<usize> = (0..n).collect();
    let target = rng.next_below(n as u64) as usize;
    (
        format!("Click on the \"{}\" button.", labels[target]),
        widgets,
        Goal::ClickButton { target, buttons },
    )
}

fn click_link(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let n_links = 2 + rng.next_below(3) as usize;
    let n_plain = 2 + rng.next_below(3) as usize;
    let words = sample(rng, &WORDS, n_links + n_plain);
    let mut link_of_word: Vec<bool> = vec![true; n_links];
    link_of_word.extend(std::iter::repeat_n(false, n_plain));
    rng.shuffle(&mut link_of_word);

    let mut widgets = Vec::new();
    let mut links = Vec::new();
    let (mut x, mut y) = (8, 46);
    for (word, is_link) in words.iter().zip(&link_of_word) {
        let w = label_width(word);
        if x + w > SCREEN_WIDTH as i32 - 4 {
            x = 8;
            y += 22;
        }
        let bbox = BBox::new(x, x + w, y, y + 14);
        if *is_link {
            links.push(widgets.len());
            widgets.push(Widget::hyperlink(*word, bbox));
        } else {
            widgets.push(Widget::label(*word, bbox));
        }
        x += w + 6;
    }
    let target = *rng.choose(&links);
    let target_word = widgets[target].text.clone().unwrap();
    (
        format!("Click on the link \"{target_word}\"."),
        widgets,
        Goal::ClickLink { target, links },
    )
}

fn click_checkboxes(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let n = 3 + rng.next_below(3) as usize;
    let labels = sample(rng, &WORDS, n);
    let mut widgets = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let y = 30 + i as i32 * 24;
        widgets.push(Widget::checkbox(*label, BBox::new(10, 10 + 14 + label_width(label), y, y + 16), false));
    }
    let boxes: Vec<usize> = (0..n).collect();
    let k = rng.next_below(4).min(n as u64) as usize;
    let mut required = boxes.clone();
    rng.shuffle(&mut required);
    required.truncate(k);
    required.sort_unstable();

    let y = 30 + n as i32 * 24 + 10;
    widgets.push(Widget::button("Submit", BBox::new(40, 108, y, y + 24)));
    let submit = widgets.len() - 1;

    let utterance = if required.is_empty() {
        "Select nothing and click Submit.".to_string()
    } else {
        let list: Vec<&str> = required.iter().map(|&i| labels[i]).collect();
        format!("Select {} and click Submit.", list.join(", "))
    };
    (utterance, widgets, Goal::ClickCheckboxes { required, boxes, submit })
}

fn click_dialog(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let dx = rng.range_inclusive(6, 18) as i32;
    let dy = rng.range_inclusive(30, 60) as i32;
    let frame = BBox::new(dx, dx + 132, dy, dy + 100);
    let widgets = vec![
        Widget::image(frame),
        Widget::label(*rng.choose(&WORDS), BBox::new(dx + 8, dx + 80, dy + 6, dy + 20)),
        Widget::button("x", BBox::new(frame.right - 18, frame.right - 4, dy + 4, dy + 18)),
    ];
    (
        "Close the dialog box by clicking the \"x\".".to_string(),
        widgets,
        Goal::ClickDialog { close: 2 },
    )
}

fn choose_list(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let n = 5 + rng.next_below(4) as usize;
    let options = sample(rng, &NAMES, n);
    let initial = rng.next_below(n as u64) as usize;
    let mut target = rng.next_below(n as u64) as usize;
    if target == initial {
        target = (target + 1) % n;
    }

    let left = rng.range_inclusive(2, 8) as i32;
    let top = rng.range_inclusive(48, 56) as i32;
    let dd = BBox::new(left, left + 132, top, top + 21);
    let mut widgets = vec![
        Widget::dropdown(options[initial], dd),
        Widget::button("Submit", BBox::new(30, 96, dd.bottom + 8, dd.bottom + 40)),
    ];
    for (i, option) in options.iter().enumerate() {
        let y = dd.bottom + 1 + i as i32 * 16;
        widgets.push(Widget::option_row(0, *option, BBox::new(left, left + 132, y, y + 16), i == initial));
    }
    (
        format!("Select {} from the list and click Submit.", options[target]),
        widgets,
        Goal::ChooseList { dropdown: 0, target_text: options[target].to_string(), submit: 1 },
    )
}

fn enter_text(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let target = *rng.choose(&WORDS);
    let top = rng.range_inclusive(50, 70) as i32;
    let widgets = vec![
        Widget::input_field(BBox::new(10, 150, top, top + 22)),
        Widget::button("Submit", BBox::new(40, 104, top + 36, top + 60)),
    ];
    (
        format!("Enter \"{target}\" into the text field and press Submit."),
        widgets,
        Goal::EnterText { field: 0, target: target.to_string(), submit: 1 },
    )
}

fn login_user(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let username = rng.choose(&NAMES).to_lowercase();
    let password = format!("{}{}", rng.choose(&WORDS), rng.next_below(90) + 10);
    let widgets = vec![
        Widget::label("Username", BBox::new(10, 76, 38, 50)),
        Widget::input_field(BBox::new(10, 150, 54, 74)),
        Widget::label("Password", BBox::new(10, 76, 84, 96)),
        Widget::input_field(BBox::new(10, 150, 100, 120)),
        Widget::button("Login", BBox::new(10, 68, 132, 156)),
    ];
    (
        format!(
            "Enter the username \"{username}\" and the password \"{password}\" into the text fields and press login."
        ),
        widgets,
        Goal::LoginUser { user_field: 1, pass_field: 3, username, password, submit: 4 },
    )
}

fn drag_box(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    // Large target box in the lower half, small draggable box above it.
    let tx = rng.range_inclusive(20, 70) as i32;
    let ty = rng.range_inclusive(110, 130) as i32;
    let target_bbox = BBox::new(tx, tx + 64, ty, ty + 64);
    let ix = rng.range_inclusive(8, 120) as i32;
    let iy = rng.range_inclusive(10, 36) as i32;
    let widgets = vec![
        Widget::image(target_bbox),
        Widget::image(BBox::new(ix, ix + 24, iy, iy + 24)).draggable(),
    ];
    (
        "Drag the smaller box so that it is completely inside the larger box.".to_string(),
        widgets,
        Goal::DragBox { item: 1, target: 0 },
    )
}

fn highlight_text(rng: &mut SplitMix64) -> (String, Vec<Widget>, Goal) {
    let n = 3 + rng.next_below(3) as usize;
    let words = sample(rng, &WORDS, n);
    let sentence = words.join(" ");
    let target_idx = rng.next_below(n as u64) as usize;
    let target = words[target_idx].to_string();

    let len = sentence.chars().count() as i32;
    let top = rng.range_inclusive(60, 80) as i32;
    let widgets = vec![
        Widget::draggable_text(sentence, BBox::new(4, 4 + 4 * len, top, top + 14)),
        Widget::button("Submit", BBox::new(40, 104, top + 30, top + 54)),
    ];
    (
        format!("Highlight the text \"{target}\" and click Submit."),
        widgets,
        Goal::HighlightText { text_widget: 0, target, submit: 1 },
    )
}

impl Widget {
    fn into_icon(mut self, icon: IconKind) -> Self {
        self.subtype = Some(Subtype::Icon(icon));
        self
    }
}
