//! Benchmarks for the hot paths of an evaluation run: observation
//! rendering/digesting, prompt assembly, response parsing, full scripted
//! episodes, and masking.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use gui_agent_core::action::{parse_action_text, ActionRecord};
use gui_agent_core::dataset::{render_screen, semi_mask, MaskOptions};
use gui_agent_core::demo::{script_demo, DemoStore};
use gui_agent_core::env::SimEnv;
use gui_agent_core::executor::{oracle_script, run_episode, EpisodeConfig, GroundTruthObserver};
use gui_agent_core::gateway::ScriptedGateway;
use gui_agent_core::prompt::{build_action_prompt, GuidelineSet, PromptOptions};
use gui_agent_core::ui::{render_observation, BBox, RenderStyle};

fn bench_observation(c: &mut Criterion) {
    let env = SimEnv::reset("choose-list", 0).unwrap();
    c.bench_function("snapshot_and_digest", |b| {
        b.iter(|| black_box(env.snapshot().digest().to_string()))
    });
    let obs = env.snapshot();
    c.bench_function("render_observation", |b| {
        b.iter(|| black_box(render_observation(&obs, RenderStyle::CurrentScreen)))
    });
}

fn bench_prompt(c: &mut Criterion) {
    let demo = script_demo("choose-list", 3000, true).unwrap();
    let env = SimEnv::reset("choose-list", 7).unwrap();
    let obs = env.snapshot();
    let history = vec![ActionRecord::start(None)];
    let guidelines = GuidelineSet::default();
    let options = PromptOptions::default();
    c.bench_function("build_action_prompt", |b| {
        b.iter(|| {
            black_box(build_action_prompt(
                env.utterance(),
                &[&demo],
                &history,
                &obs,
                &guidelines,
                &options,
            ))
        })
    });
}

fn bench_parse(c: &mut Criterion) {
    let response = "Looking at the screen, the dropdown must be opened first.\n\
                    Action_2=(Action: functions.click_element, Argument: {element_id: 1})\n\
                    Action_3=(Action: functions.type_text, Argument: {string_to_type: \"hello world\"})\n\
                    Action_4=(Action: functions.press_control_A, Argument: {})";
    c.bench_function("parse_action_text", |b| {
        b.iter(|| black_box(parse_action_text(black_box(response)).unwrap()))
    });
}

fn bench_episode(c: &mut Criterion) {
    for family in ["click-test", "login-user"] {
        c.bench_function(&format!("episode_{family}"), |b| {
            b.iter(|| {
                let gateway = ScriptedGateway::from_texts(oracle_script(family, 0).unwrap());
                let mut env = SimEnv::reset(family, 0).unwrap();
                black_box(run_episode(
                    &mut env,
                    &mut GroundTruthObserver,
                    &gateway,
                    &DemoStore::empty(),
                    &EpisodeConfig::default(),
                ))
            })
        });
    }
}

fn bench_masking(c: &mut Criterion) {
    let env = SimEnv::reset("login-user", 1000).unwrap();
    let img = render_screen(&env);
    let bbox = BBox::new(10, 150, 54, 74);
    let opts = MaskOptions::default();
    c.bench_function("semi_mask_160x210", |b| {
        b.iter(|| black_box(semi_mask(&img, &bbox, &opts).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_observation,
    bench_prompt,
    bench_parse,
    bench_episode,
    bench_masking
);
criterion_main!(benches);
