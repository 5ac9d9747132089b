use endi_web::{gumbel_frequency_json, Game};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn oracle_finishes_an_s1_game() {
    let mut g = Game::create("rtfm", "S1", 3, 2).unwrap();
    let mut last = Value::Null;
    while !g.done() {
        last = parse(&g.step_json("oracle").unwrap());
    }
    assert_eq!(last["win"], true);
    assert!(g.step_json("oracle").is_err());
    assert!(g.transcript().lines().count() > 1);
}

#[test]
fn manual_actions_and_errors() {
    let mut g = Game::create("messenger", "S2", 1, 2).unwrap();
    let v = parse(&g.step_json("up,left").unwrap());
    assert_eq!(v["actions"], serde_json::json!(["up", "left"]));
    assert!(g.step_json("up").is_err());
    assert!(g.step_json("jump,up").is_err());
    assert!(Game::create("messenger", "S5", 1, 2).is_err());
    assert!(Game::create("chess", "S1", 1, 2).is_err());
}

#[test]
fn render_and_manual_are_text() {
    let g = Game::create("rtfm", "S4", 8, 3).unwrap();
    assert_eq!(g.render().lines().count(), 8);
    assert!(g.manual().lines().count() >= 2);
}

#[test]
fn subgoal_lists_every_live_entity() {
    let g = Game::create("rtfm", "S3", 4, 2).unwrap();
    let v = parse(&g.subgoal_json(0, 1, 1.0).unwrap());
    let rows = v["entities"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        let rho = r["rho"].as_f64().unwrap();
        assert!(rho > 0.0 && rho < 1.0);
        assert!(!r["name"].as_str().unwrap().is_empty());
    }
    assert!(g.subgoal_json(0, 1, 0.0).is_err());
    assert!(g.subgoal_json(5, 1, 1.0).is_err());
}

#[test]
fn gumbel_frequency_tracks_the_sigmoid() {
    let v = parse(&gumbel_frequency_json(1.0, 0.5, 20_000, 2).unwrap());
    let f = v["selected"].as_f64().unwrap();
    assert!((f - v["sigmoid"].as_f64().unwrap()).abs() < 0.02);
    assert!(gumbel_frequency_json(1.0, -1.0, 10, 2).is_err());
}
