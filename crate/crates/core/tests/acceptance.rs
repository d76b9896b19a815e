//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use valuevac_core::controller::{
    run_observation_sweep, CadenceConfig, Controller, ControllerEvent, Decision, DecisionSource, DecisionToken,
    DrivableRobot, Mode, RobotIo, SpeedConfig, ESCAPE_TURN_MAX, ESCAPE_TURN_MIN,
};
use valuevac_core::harness::{
    agreement_rate, replay, replay_records, run_scenario, run_trials, timeline_of, EventRecord, LogBody, LogDraft,
    LogRecord, MemorySink, OverrideCommand, RecordSink, RunOptions, RunUntil, Scenario, SimRobot, SimulationConfig,
    Simulation, SinkError, LIVING_ROOM,
};
use valuevac_core::pipeline::backend::{
    BackendDescriptor, FnBackend, MockBackend, ModelBackend, Stage, StubReply, StubRule, StubScript, StubServer,
};
use valuevac_core::pipeline::{
    parse_decision, EvaluationJob, ModeDescriptions, Pipeline, Stopwatch, SystemPrompt, OBJECTIVE, ROLE,
};
use valuevac_core::world::{
    heading_difference, Camera, Entity, EntityKind, FloorPlan, Pose, SimClock, World, TICKS_PER_SECOND,
};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const SCENARIOS: [&str; 5] = ["movie_night", "phone_user", "pet_dog", "empty_room", "transient_visitor"];
const CHORES: &str = r#"{"name": "chores", "floorplan": "living_room", "wall_clock_start": "10:00", "seed": 11, "start_mode": "cleaning"}"#;

fn inline(json: &str) -> Scenario {
    Scenario::from_json(json, "acceptance", Path::new(".")).expect("inline scenario")
}

fn with_mode(json: &str, mode: &str) -> Scenario {
    inline(&json.replace("\"cleaning\"", &format!("\"{mode}\"")))
}

struct SharedSink(Arc<Mutex<MemorySink>>);

impl RecordSink for SharedSink {
    fn append(&mut self, draft: LogDraft) -> Result<LogRecord, SinkError> {
        self.0.lock().unwrap().append(draft)
    }
}

fn sweep_job(name: &str, mode: Mode) -> EvaluationJob {
    let scenario = Scenario::bundled(name).unwrap();
    let mut robot = SimRobot::from_scenario(&scenario).unwrap();
    let mut frames = run_observation_sweep(&mut robot, &CadenceConfig::default()).unwrap();
    if mode == Mode::Cleaning {
        frames.truncate(3);
    }
    EvaluationJob {
        eval_id: 1,
        mode,
        wall_clock: scenario.wall_clock_start,
        blocked_cycles: 0,
        frames,
    }
}

fn default_prompt() -> SystemPrompt {
    SystemPrompt::new(&ModeDescriptions::default()).unwrap()
}

fn scenario_replication() -> Outcome {
    let started = Instant::now();
    let options = RunOptions::default();
    let mut notes = Vec::new();
    for name in SCENARIOS {
        let scenario = Scenario::bundled(name).unwrap();
        let report = run_trials(&scenario, 20, &Pipeline::mock(), &options).map_err(|e| e.to_string())?;
        check!(report.trials == 20, "{name}: {} trials", report.trials);
        check!(report.agreement_rate == 1.0, "{name}: agreement {}", report.agreement_rate);
        check!(report.passed == Some(true), "{name}: histogram {:?}", report.histogram);
        let modal = *report.histogram.keys().next().unwrap();
        notes.push(format!("{name}={modal}"));
    }
    let elapsed = started.elapsed();
    check!(elapsed < Duration::from_secs(30), "100 trials took {elapsed:?}");

    let first = |name: &str| {
        let log = run_scenario(&Scenario::bundled(name).unwrap(), &Pipeline::mock(), &RunOptions::unpaced(RunUntil::FirstDecision))
            .unwrap();
        log.first_decision().cloned().unwrap()
    };
    let movie = first("movie_night");
    let rationale = &movie.trace.as_ref().unwrap().rationale;
    check!(rationale.to_lowercase().contains("noise"), "movie_night rationale: {rationale}");
    let pet = first("pet_dog");
    check!(pet.mode == Mode::Cleaning, "pet_dog decided in {}", pet.mode);
    let rationale = &pet.trace.as_ref().unwrap().rationale;
    check!(rationale.to_lowercase().contains("safety"), "pet_dog rationale: {rationale}");
    let visitor = first("transient_visitor");
    check!(visitor.features.as_ref().unwrap().any_transient(), "visitor not flagged transient");
    Ok(format!("{}; 5x20 trials in {:.2} s at 20x", notes.join(" "), elapsed.as_secs_f64()))
}

fn sweep_cadence() -> Outcome {
    let cadence = CadenceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let plan = FloorPlan::from_json(LIVING_ROOM).unwrap();
    let mut sweeps = 0;
    for _ in 0..12 {
        let start = Pose::new(3.0, 0.4, rng.random_range(0.0..360.0));
        let world = World::new(plan.clone(), start).unwrap();
        let mut robot = SimRobot::new(world, Camera::default(), SimClock::new("12:00".parse().unwrap()));
        let mut controller = Controller::new(Mode::Observation, 1, cadence.clone(), SpeedConfig::default());
        let mut batches = 0;
        for _ in 0..6000 {
            let out = controller.tick(&mut robot);
            robot.drive(out.command);
            let Some(frames) = out.batch else { continue };
            check!(frames.len() == 10, "sweep of {} frames", frames.len());
            for w in frames.windows(2) {
                let turn = heading_difference(w[0].pose.heading(), w[1].pose.heading());
                check!((turn - 20.0).abs() <= 1e-9, "heading step {turn}");
                let ticks = ((w[1].sim_time - w[0].sim_time) * TICKS_PER_SECOND as f64).round();
                check!(ticks == TICKS_PER_SECOND as f64, "frame spacing {} s", w[1].sim_time - w[0].sim_time);
                check!(w[1].sim_time - w[0].sim_time == 1.0, "frame spacing {} s", w[1].sim_time - w[0].sim_time);
            }
            let span = (frames[9].pose.heading() - frames[0].pose.heading()).rem_euclid(360.0);
            check!((span - 180.0).abs() <= 1e-9, "span {span}");
            batches += 1;
            controller.apply(&Decision::model(DecisionToken::Wait), None).unwrap();
        }
        check!(batches >= 4, "only {batches} sweeps");
        sweeps += batches;
    }
    Ok(format!("{sweeps} sweeps from 12 random headings"))
}

fn burst_cadence() -> Outcome {
    let mut robot = SimRobot::from_scenario(&inline(CHORES)).unwrap();
    let mut controller = Controller::new(Mode::Cleaning, 4, CadenceConfig::default(), SpeedConfig::default());
    let mut bursts = 0;
    for _ in 0..4000 {
        let out = controller.tick(&mut robot);
        robot.drive(out.command);
        if let Some(frames) = out.batch {
            check!(frames.len() == 3, "burst of {}", frames.len());
            for w in frames.windows(2) {
                check!(w[1].sim_time - w[0].sim_time == 0.5, "burst spacing {}", w[1].sim_time - w[0].sim_time);
            }
            bursts += 1;
        }
    }
    check!(bursts > 100, "only {bursts} bursts");

    // A slow backend keeps evaluations in flight across several bursts.
    let slow = FnBackend::new("slow-mock", |req| {
        std::thread::sleep(Duration::from_millis(40));
        MockBackend::new().complete(req)
    });
    let pipeline = Pipeline::new(Arc::new(slow), default_prompt(), "slow-mock", 2);
    let log = run_scenario(&inline(CHORES), &pipeline, &RunOptions {
        until: RunUntil::SimSeconds(60.0),
        ..RunOptions::default()
    })
    .map_err(|e| e.to_string())?;
    let (mut in_flight, mut peak, mut submitted) = (0i32, 0i32, 0);
    for r in &log.records {
        match &r.body {
            LogBody::Event(EventRecord::EvalSubmitted { frame_seqs, mode, .. }) => {
                if *mode == Mode::Cleaning {
                    check!(frame_seqs.len() == 3, "submitted burst of {}", frame_seqs.len());
                }
                in_flight += 1;
                submitted += 1;
            }
            LogBody::Decision(_) | LogBody::Event(EventRecord::EvalDiscarded { .. }) => in_flight -= 1,
            _ => {}
        }
        check!((0..=1).contains(&in_flight), "{in_flight} evaluations in flight at record {}", r.id);
        peak = peak.max(in_flight);
    }
    check!(submitted > 3, "only {submitted} evaluations");
    Ok(format!("{bursts} bursts; log audit of {submitted} evaluations, peak in flight {peak}"))
}

fn walk(seed: u64, ticks: usize) -> Result<(Vec<[u64; 3]>, usize), String> {
    let plan = FloorPlan::from_json(LIVING_ROOM).unwrap();
    let mut world = World::new(plan, Pose::new(3.0, 0.4, 90.0)).unwrap();
    world.spawn(Entity::new("sofa_sitter", EntityKind::Person, Pose::new(4.8, 3.8, 0.0), "reading")).unwrap();
    world.spawn(Entity::new("cat", EntityKind::Pet, Pose::new(1.8, 4.0, 0.0), "sleeping")).unwrap();
    let mut robot = SimRobot::new(world, Camera::default(), SimClock::new("12:00".parse().unwrap()));
    let speeds = SpeedConfig::default();
    let mut controller = Controller::new(Mode::Cleaning, seed, CadenceConfig::default(), speeds.clone());
    let mut trajectory = Vec::with_capacity(ticks);
    let mut turns = 0;
    for tick in 0..ticks {
        let proximity = robot.proximity();
        let out = controller.tick(&mut robot);
        if proximity.distance < speeds.slow_threshold {
            check!(out.command.linear <= speeds.slow, "tick {tick}: {} m/s at {} m", out.command.linear, proximity.distance);
        }
        for e in &out.events {
            if let ControllerEvent::EscapeTurn { start_heading, end_heading, delta } = e {
                check!((ESCAPE_TURN_MIN..=ESCAPE_TURN_MAX).contains(delta), "escape turn {delta}");
                let actual = (end_heading - start_heading).rem_euclid(360.0);
                check!(heading_difference(actual, *delta).abs() < 1e-6, "turned {actual}, asked {delta}");
                turns += 1;
            }
        }
        robot.drive(out.command);
        let penetration = robot.world.wall_penetration();
        check!(penetration == 0.0, "tick {tick}: wall penetration {penetration}");
        let p = robot.pose();
        trajectory.push([p.x.to_bits(), p.y.to_bits(), p.heading().to_bits()]);
    }
    Ok((trajectory, turns))
}

fn motion_safety() -> Outcome {
    let (a, turns) = walk(21, 10_000)?;
    let (b, _) = walk(21, 10_000)?;
    check!(a == b, "same seed diverged");
    let (c, _) = walk(22, 10_000)?;
    check!(a != c, "different seeds gave the same walk");
    check!(turns > 10, "only {turns} escape turns");
    Ok(format!("10000 ticks, {turns} escape turns, bit-exact rerun"))
}

const SAMPLE_OUTPUT: &str = "Looking at the frames again.\n**Rationale:** someone is watching TV, so noise matters.\nDECISION: WAIT\nThanks.";

fn garble(rng: &mut ChaCha8Rng, base: &str) -> String {
    let mut chars: Vec<char> = base.chars().collect();
    match rng.random_range(0..7) {
        0 => chars.truncate(rng.random_range(0..=chars.len())),
        1 => {
            for _ in 0..rng.random_range(1..12) {
                let i = rng.random_range(0..chars.len().max(1));
                if i < chars.len() {
                    chars[i] = *[':', '*', ' ', '\n', 'x', 'é', '\u{0}', '🙂'].choose(rng).unwrap();
                }
            }
        }
        2 => {
            let mut lines: Vec<String> = base.lines().map(str::to_string).collect();
            lines.shuffle(rng);
            return lines.join("\n");
        }
        3 => return base.to_lowercase().replace(':', ""),
        4 => return (0..rng.random_range(0..200)).map(|_| rng.random_range(' '..='~')).collect(),
        5 => return base.replace("DECISION", "DECIS ION"),
        _ => {
            let junk: String = (0..rng.random_range(0..40)).map(|_| rng.random::<char>()).collect();
            let at = rng.random_range(0..=chars.len());
            chars.splice(at..at, junk.chars());
        }
    }
    chars.into_iter().collect()
}

fn parser_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let jobs = [sweep_job("movie_night", Mode::Observation), sweep_job("movie_night", Mode::Cleaning)];
    let (mut well_formed, mut recovered, mut defaulted) = (0, 0, 0);
    for i in 0..1000 {
        let job = &jobs[i % 2];
        let mode = job.mode;
        let mut text = garble(&mut rng, SAMPLE_OUTPUT);
        let planted = rng.random_bool(0.4).then(|| {
            let token = *mode.vocabulary().choose(&mut rng).unwrap();
            text.push_str(&format!("\n**DECISION:** {token}\n"));
            token
        });
        let reply = text.clone();
        let backend = FnBackend::new("fuzz", move |req| match req.stage {
            Some(Stage::Finalize) => Ok(reply.clone()),
            _ => MockBackend::new().complete(req),
        })
        .deterministic();
        let pipeline = Pipeline::new(Arc::new(backend), default_prompt(), "fuzz", 2);
        let record = catch_unwind(AssertUnwindSafe(|| pipeline.evaluate(job)))
            .map_err(|_| format!("input {i} panicked: {text:?}"))?
            .map_err(|e| e.to_string())?;
        let got = record.decision;
        match (planted, parse_decision(&text, mode)) {
            (Some(token), _) => {
                check!(got == Decision::model(token), "input {i}: planted {token}, got {got:?} from {text:?}");
                well_formed += 1;
            }
            (None, Ok(d)) => {
                check!(got == d, "input {i}: parsed {d:?}, pipeline {got:?}");
                recovered += 1;
            }
            (None, Err(_)) => {
                let safe = Decision::safe_default(mode).unwrap();
                check!(got == safe && got.source == DecisionSource::SafeDefault, "input {i}: {got:?} for {text:?}");
                defaulted += 1;
            }
        }
    }
    Ok(format!("1000 inputs: {well_formed} well-formed exact, {recovered} loose tokens, {defaulted} safe defaults"))
}

fn trace_feedback_wire() -> Outcome {
    let stub = StubServer::start(StubScript::default()).map_err(|e| e.to_string())?;
    let descriptor = BackendDescriptor::stub(stub.endpoint(), 5.0, 2);
    let pipeline = Pipeline::new(descriptor.build().unwrap(), default_prompt(), "stub", 2);
    let job = sweep_job("movie_night", Mode::Observation);
    let record = pipeline.evaluate(&job).map_err(|e| e.to_string())?;
    let raw = &record.trace.as_ref().ok_or("no trace")?.raw_text;
    let finalize = stub.requests_for(Stage::Finalize);
    check!(finalize.len() == 1, "{} finalize requests", finalize.len());
    let body: serde_json::Value = serde_json::from_str(&finalize[0].body).map_err(|e| e.to_string())?;
    let user = body["messages"][1].to_string();
    let user: String = serde_json::from_str::<serde_json::Value>(&body["messages"][1]["content"].to_string())
        .ok()
        .map(|c| flatten_content(&c))
        .unwrap_or(user);
    check!(user.contains(raw.as_str()), "finalize body lacks the reasoning output");
    let clock = job.wall_clock.to_string();
    let descriptions = ModeDescriptions::default();
    let requests = stub.requests();
    for r in &requests {
        let body: serde_json::Value = serde_json::from_str(&r.body).map_err(|e| e.to_string())?;
        let system = flatten_content(&body["messages"][0]["content"]);
        check!(system.contains(ROLE) && system.contains(OBJECTIVE), "{:?}: role/objective missing", r.stage);
        for mode in Mode::ALL {
            check!(system.contains(descriptions.get(mode).unwrap()), "{:?}: {mode} description missing", r.stage);
        }
        check!(system.contains(&clock), "{:?}: {clock} missing", r.stage);
    }
    Ok(format!("{} recorded requests checked", requests.len()))
}

fn flatten_content(content: &serde_json::Value) -> String {
    match content {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(parts) => parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join("\n"),
        other => other.to_string(),
    }
}

fn agreement_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let n = rng.random_range(1..=60);
        let tokens: Vec<DecisionToken> = (0..n).map(|_| *DecisionToken::ALL.choose(&mut rng).unwrap()).collect();
        let mut best = 0;
        for a in &tokens {
            best = best.max(tokens.iter().filter(|b| *b == a).count());
        }
        let want = best as f64 / n as f64;
        let got = agreement_rate(&tokens);
        check!(got == want, "multiset {trial}: {got} vs {want}");
    }
    Ok("100 multisets match max-count/n".into())
}

fn log_integrity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut scenarios: Vec<Scenario> = SCENARIOS.iter().map(|n| Scenario::bundled(n).unwrap()).collect();
    scenarios.push(inline(CHORES));
    let (mut changes, mut decisions) = (0, 0);
    for scenario in &scenarios {
        let pipeline = Pipeline::mock().with_stopwatch(Stopwatch::Wall);
        let sink = Arc::new(Mutex::new(MemorySink::new()));
        let config = SimulationConfig::for_pipeline(&pipeline);
        let mut sim = Simulation::new(scenario, pipeline, config, Box::new(SharedSink(sink.clone()))).map_err(|e| e.to_string())?;
        for tick in 0..6000 {
            if tick % 900 == 450 {
                let vocab = sim.controller().mode().override_vocabulary();
                let token = *vocab.choose(&mut rng).unwrap();
                let _ = sim.apply_override(OverrideCommand {
                    operator_id: "auditor".into(),
                    token,
                    issued_wall_clock: None,
                });
            }
            sim.tick();
        }
        let records = sink.lock().unwrap().records().to_vec();
        let timeline = replay_records(&records).map_err(|e| format!("{}: {e}", scenario.name))?;
        check!(timeline == timeline_of(&records), "{}: replayed timeline differs", scenario.name);
        for change in &timeline {
            let cause = records.iter().find(|r| r.id == change.cause);
            let ok = cause.is_some_and(|r| r.id < change.record_id && matches!(r.body, LogBody::Decision(_) | LogBody::Override(_)));
            check!(ok, "{}: change {} has no causing record", scenario.name, change.record_id);
        }
        for d in records.iter().filter_map(LogRecord::decision) {
            let l = &d.latencies;
            check!((l.stage_sum() - l.total).abs() <= 1.0, "eval {}: stages {} ms vs total {} ms", d.eval_id, l.stage_sum(), l.total);
            decisions += 1;
        }
        changes += timeline.len();

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("run.jsonl");
        std::fs::write(&path, valuevac_core::harness::to_jsonl(&records)).map_err(|e| e.to_string())?;
        check!(replay(&path).map_err(|e| e.to_string())? == timeline, "{}: on-disk replay differs", scenario.name);
    }
    Ok(format!("{} runs, {changes} mode changes, {decisions} decisions", scenarios.len()))
}

fn liveness() -> Outcome {
    let (timeout, retries) = (0.2, 1u32);
    let bound = Duration::from_secs_f64(timeout * f64::from(retries + 1) * 4.0);
    let script = StubScript {
        rules: vec![StubRule {
            stage: None,
            contains: None,
            replies: vec![StubReply::text("too late")],
            delay_ms: 5_000,
        }],
        ..StubScript::default()
    };
    let stub = StubServer::start(script).map_err(|e| e.to_string())?;
    let descriptor = BackendDescriptor::stub(stub.endpoint(), timeout, retries);
    let pipeline = Pipeline::new(descriptor.build().unwrap(), default_prompt(), "stub", retries);

    let mut worst = Duration::ZERO;
    for mode in [Mode::Observation, Mode::Cleaning] {
        let started = Instant::now();
        let record = pipeline.evaluate(&sweep_job("phone_user", mode)).map_err(|e| e.to_string())?;
        let took = started.elapsed();
        worst = worst.max(took);
        check!(took < bound, "{mode}: decision after {took:?}, bound {bound:?}");
        check!(record.decision == Decision::safe_default(mode).unwrap(), "{mode}: got {:?}", record.decision);
    }

    for mode in ["observation", "cleaning", "docking"] {
        let scenario = with_mode(CHORES, mode);
        let p = pipeline.clone();
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let options = RunOptions {
                until: RunUntil::SimSeconds(30.0),
                ..RunOptions::default()
            };
            let _ = tx.send(run_scenario(&scenario, &p, &options).map_err(|e| e.to_string()));
        });
        let log = rx
            .recv_timeout(Duration::from_secs(20))
            .map_err(|_| format!("{mode}: closed loop stalled"))??;
        let last = log.records.last().map_or(0.0, |r| r.sim_time);
        let decisions: Vec<_> = log.decisions().collect();
        if mode != "docking" {
            check!(!decisions.is_empty(), "{mode}: no decision in 30 s");
            check!(decisions.iter().all(|d| d.decision.source == DecisionSource::SafeDefault), "{mode}: non-default decision");
        } else {
            check!(
                log.records.iter().any(|r| matches!(r.body, LogBody::Event(EventRecord::Controller { detail: ControllerEvent::Docked }))),
                "docking never finished (last record at {last} s)"
            );
        }
    }
    Ok(format!("worst decision {:.0} ms (bound {:.0} ms); closed loop live in all modes", worst.as_secs_f64() * 1e3, bound.as_secs_f64() * 1e3))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("scenario replication", scenario_replication),
        ("sweep cadence", sweep_cadence),
        ("burst cadence", burst_cadence),
        ("motion safety", motion_safety),
        ("decision parser fuzz", parser_fuzz),
        ("trace feedback on the wire", trace_feedback_wire),
        ("agreement oracle", agreement_oracle),
        ("log integrity", log_integrity),
        ("liveness bound", liveness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}) [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
