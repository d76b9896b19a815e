use std::path::Path;

use valuevac_core::controller::{DecisionToken, Mode};
use valuevac_core::harness::{
    agreement_rate, apply_event, read_log, replay, run_scenario, run_trials, EventAction, EventRecord, LogBody,
    ReplayError, RunOptions, RunUntil, Scenario, SimRobot, TimedEvent,
};
use valuevac_core::pipeline::Pipeline;
use valuevac_core::world::{Entity, EntityKind, FramePayload, Pose, TICK_SECONDS};

use valuevac_core::controller::RobotIo;

fn scenario(json: &str) -> Scenario {
    Scenario::from_json(json, "test", Path::new(".")).unwrap()
}

#[test]
fn events_fire_once_on_first_tick_at_or_after_their_time() {
    let s = scenario(
        r#"{
        "name": "timing",
        "floorplan": "living_room",
        "wall_clock_start": "11:00",
        "events": [
            {"at": 1.03, "action": {"type": "spawn", "entity": {"id": "a", "kind": "person", "pose": [2.0, 2.0, 0.0], "activity": "reading"}}},
            {"at": 2.0, "action": {"type": "set_activity", "id": "a", "activity": "sleeping"}}
        ]
    }"#,
    );
    let log = run_scenario(&s, &Pipeline::mock(), &RunOptions::unpaced(RunUntil::SimSeconds(5.0))).unwrap();
    let fired: Vec<(f64, &EventAction)> = log
        .records
        .iter()
        .filter_map(|r| match &r.body {
            LogBody::Event(EventRecord::Scenario { action }) => Some((r.sim_time, action)),
            _ => None,
        })
        .collect();
    assert_eq!(fired.len(), 2);
    for (t, at) in fired.iter().map(|(t, _)| *t).zip([1.03, 2.0]) {
        assert!(t >= at - 1e-9 && t < at + TICK_SECONDS, "fired at {t} for {at}");
    }
    assert!(!log.records.iter().any(|r| matches!(r.body, LogBody::Error(_))));
}

#[test]
fn event_on_unknown_entity_is_rejected_at_load() {
    let err = Scenario::from_json(
        r#"{"name": "bad", "floorplan": "living_room", "wall_clock_start": "11:00",
            "events": [{"at": 2.0, "action": {"type": "despawn", "id": "nobody"}}]}"#,
        "test",
        Path::new("."),
    )
    .unwrap_err();
    assert!(err.to_string().contains("nobody"));
}

#[test]
fn event_actions_change_only_their_target() {
    let s = Scenario::bundled("movie_night").unwrap();
    let mut robot = SimRobot::from_scenario(&s).unwrap();
    let before: Vec<_> = robot.world.entities().to_vec();
    let target = before[0].id.clone();
    robot
        .apply_event(&EventAction::SetActivity {
            id: target.clone(),
            activity: "sleeping".into(),
        })
        .unwrap();
    for (old, new) in before.iter().zip(robot.world.entities()) {
        if old.id == target {
            assert_eq!(new.activity, "sleeping");
        } else {
            assert_eq!(old, new);
        }
    }

    let cat = Entity::new("cat", EntityKind::Pet, Pose::new(3.0, 3.0, 0.0), "sleeping");
    apply_event(&mut robot.world, &mut robot.clock, &EventAction::Spawn { entity: cat }).unwrap();
    assert!(apply_event(
        &mut robot.world,
        &mut robot.clock,
        &EventAction::Spawn {
            entity: Entity::new("cat", EntityKind::Pet, Pose::new(3.5, 3.0, 0.0), "x"),
        }
    )
    .is_err());
    apply_event(
        &mut robot.world,
        &mut robot.clock,
        &EventAction::SetWallClock {
            clock: "23:15".parse().unwrap(),
        },
    )
    .unwrap();
    assert_eq!(robot.clock.wall_clock().to_string(), "23:15");
}

#[test]
fn despawned_entity_is_absent_from_next_capture() {
    let s = Scenario::bundled("phone_user").unwrap();
    let mut robot = SimRobot::from_scenario(&s).unwrap();
    let ids: Vec<_> = robot.world.entities().iter().map(|e| e.id.clone()).collect();
    for id in &ids {
        robot.apply_event(&EventAction::Despawn { id: id.clone() }).unwrap();
    }
    for i in 0..4 {
        let frame = robot.capture(i).unwrap();
        let FramePayload::Synthetic(view) = frame.payload else {
            panic!("expected a synthetic frame");
        };
        assert!(view.entities.iter().all(|e| !ids.contains(&e.id)));
    }
}

#[test]
fn hand_edited_decision_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let log = run_scenario(
        &Scenario::bundled("pet_dog").unwrap(),
        &Pipeline::mock(),
        &RunOptions::unpaced(RunUntil::SimSeconds(30.0)),
    )
    .unwrap();
    std::fs::write(&path, log.to_jsonl()).unwrap();
    assert_eq!(replay(&path).unwrap(), log.timeline);

    let records = read_log(&path).unwrap();
    let decision_id = records.iter().find(|r| r.decision().is_some()).unwrap().id;
    let tampered: String = log
        .to_jsonl()
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            if v["id"] == decision_id {
                v["payload"]["decision"]["token"] = "CONTINUE".into();
            }
            format!("{}\n", v)
        })
        .collect();
    std::fs::write(&path, tampered).unwrap();
    match replay(&path) {
        // Either the edited decision or the change it no longer explains.
        Err(ReplayError::Integrity(e)) => assert!([decision_id, decision_id + 1].contains(&e.record_id), "{e:?}"),
        other => panic!("expected an integrity error, got {other:?}"),
    }
}

#[test]
fn single_trial_agrees_with_itself() {
    let report = run_trials(
        &Scenario::bundled("empty_room").unwrap(),
        1,
        &Pipeline::mock(),
        &RunOptions::unpaced(RunUntil::FirstDecision),
    )
    .unwrap();
    assert_eq!(report.trials, 1);
    assert_eq!(report.agreement_rate, 1.0);
    assert_eq!(agreement_rate(&[DecisionToken::Clean]), 1.0);
    assert_eq!(agreement_rate(&[]), 0.0);
}

#[test]
fn verdict_compares_modal_decision_with_expected() {
    let options = RunOptions::unpaced(RunUntil::FirstDecision);
    let mut s = Scenario::bundled("transient_visitor").unwrap();
    let report = run_trials(&s, 3, &Pipeline::mock(), &options).unwrap();
    assert_eq!(report.expected, Some(DecisionToken::Clean));
    assert_eq!(report.passed, Some(true));

    s.expected = Some(DecisionToken::Wait);
    let report = run_trials(&s, 3, &Pipeline::mock(), &options).unwrap();
    assert_eq!(report.passed, Some(false));
    assert_eq!(report.histogram.get(&DecisionToken::Clean), Some(&3));

    s.expected = None;
    assert_eq!(run_trials(&s, 2, &Pipeline::mock(), &options).unwrap().passed, None);
}

#[test]
fn injected_event_lands_in_order() {
    let s = Scenario::bundled("empty_room").unwrap();
    let mut with_event = s.clone();
    with_event.events.push(TimedEvent {
        at: 0.0,
        action: EventAction::Spawn {
            entity: Entity::new("sleeper", EntityKind::Person, Pose::new(1.1, 1.2, 0.0), "sleeping"),
        },
    });
    let log = run_scenario(&with_event, &Pipeline::mock(), &RunOptions::unpaced(RunUntil::FirstDecision)).unwrap();
    let first = log.first_decision().unwrap();
    assert_eq!(first.mode, Mode::Observation);
    assert_ne!(
        Some(first.decision.token),
        run_scenario(&s, &Pipeline::mock(), &RunOptions::unpaced(RunUntil::FirstDecision))
            .unwrap()
            .first_decision()
            .map(|d| d.decision.token)
    );
}
