use std::path::Path;

use eqsynth::formats::{read_csg, read_nfg, read_strategy, write_csg, write_nfg, write_strategy};
use eqsynth_core::checker::{check_property, CheckerConfig, Memory, StepRule};
use eqsynth_core::csg::Csg;
use eqsynth_core::property::parse_property;
use eqsynth_core::synth::{Decision, SynthesizedStrategy};
use eqsynth_core::Error;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

fn synthesize(csg: &Csg, prop: &str) -> SynthesizedStrategy {
    let p = parse_property(prop, Some(csg.num_players())).unwrap();
    check_property(csg, &p, &CheckerConfig::default()).unwrap().strategy.unwrap()
}

const FAIR: &str = "<<1:2:3>>(CE,SF)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])";

fn parse_err(e: Error) -> (usize, usize, String) {
    match e {
        Error::Parse { line, column, message } => (line, column, message),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn fixtures_round_trip() {
    for name in ["intersection.nfg", "intersection_reckless.nfg"] {
        let g = read_nfg(&fixture(name)).unwrap();
        assert_eq!(read_nfg(&write_nfg(&g)).unwrap(), g);
    }
    for name in ["intersection_once.csg", "send_wait.csg"] {
        let g = read_csg(&fixture(name)).unwrap();
        assert_eq!(read_csg(&write_csg(&g)).unwrap(), g);
    }
}

#[test]
fn intersection_strategy_round_trips() {
    let csg = read_csg(&fixture("intersection_once.csg")).unwrap();
    let s = synthesize(&csg, FAIR);
    let text = write_strategy(&csg, &s).unwrap();
    assert_eq!(
        text,
        "strategy 1\n\
         property <<1:2:3>>(CE,SF)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])\n\
         rule frozen\n\
         at 0 step 0 done - failed -\n\
         joint 0.5:(pro,yld,pro) + 0.5:(yld,pro,yld)\n"
    );
    assert_eq!(read_strategy(&text, &csg).unwrap(), s);
}

fn all_probs(s: &SynthesizedStrategy) -> Vec<f64> {
    s.entries
        .values()
        .flat_map(|d| match d {
            Decision::Joint(e) => e.iter().map(|x| x.1).collect::<Vec<_>>(),
            Decision::Profile(ds) => ds.iter().flatten().map(|x| x.1).collect(),
        })
        .collect()
}

#[test]
fn mixed_probabilities_and_coalitions_survive() {
    let csg = read_csg(&fixture("send_wait.csg")).unwrap();
    for prop in [
        "<<1:2>>(NE,SW)max=? (P[pending U goal1] + P[pending U goal2])",
        "<<1:2>>(CE,SF)min=? (R{energy1}[C<=3] + R{time}[I=2])",
        "<<1:2>>(CE,SW)min=? (R{energy1}[F done] + R{energy2}[F done])",
        "<<1,2>>(CE,SW)max=? P[true U<=2 goal1]",
        "<<2:1>>(NE,SF)max=? (P[X goal1] + P[true U<=3 goal2])",
    ] {
        let s = synthesize(&csg, prop);
        let back = read_strategy(&write_strategy(&csg, &s).unwrap(), &csg).unwrap();
        assert_eq!(back, s, "{prop}");
        for (a, b) in all_probs(&s).iter().zip(all_probs(&back)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn odd_probabilities_read_back_exactly() {
    let csg = read_csg(&fixture("intersection_once.csg")).unwrap();
    let mut s = synthesize(&csg, FAIR);
    let third = 1.0 / 3.0;
    if let Some(Decision::Joint(e)) = s.entries.get_mut(&(0, Memory::default())) {
        e[0].1 = third;
        e[1].1 = 1.0 - third;
    }
    let back = read_strategy(&write_strategy(&csg, &s).unwrap(), &csg).unwrap();
    assert_eq!(back, s);
}

#[test]
fn strategy_errors_have_locations() {
    let csg = read_csg(&fixture("intersection_once.csg")).unwrap();
    let good = write_strategy(&csg, &synthesize(&csg, FAIR)).unwrap();

    let (line, column, msg) = parse_err(read_strategy(&good.replace("(yld,pro,yld)", "(yld,stop,yld)"), &csg).unwrap_err());
    assert_eq!((line, column), (5, 31));
    assert!(msg.contains("unknown action 'stop'"), "{msg}");

    let (line, _, msg) = parse_err(read_strategy(&good.replace("0.5:(yld", "0.4:(yld"), &csg).unwrap_err());
    assert_eq!(line, 5);
    assert!(msg.contains("sum to"));

    let (line, column, _) = parse_err(read_strategy(&good.replace("R{u2}", "R{u2"), &csg).unwrap_err());
    assert_eq!(line, 2);
    assert!(column > 9);

    let (line, column, _) = parse_err(read_strategy(&good.replace("rule frozen", "rule sometimes"), &csg).unwrap_err());
    assert_eq!((line, column), (3, 6));

    let (line, column, _) = parse_err(read_strategy(&good.replace("done -", "done 4"), &csg).unwrap_err());
    assert_eq!((line, column), (4, 18));

    let (line, _, msg) = parse_err(read_strategy(good.trim_end_matches("joint 0.5:(pro,yld,pro) + 0.5:(yld,pro,yld)\n"), &csg).unwrap_err());
    assert_eq!(line, 5);
    assert!(msg.contains("missing decision"));

    let dup = format!("{good}at 0 step 0 done - failed -\njoint 1:(pro,pro,pro)\n");
    assert_eq!(parse_err(read_strategy(&dup, &csg).unwrap_err()).0, 6);

    // state 1 only allows the idle action
    let idle = format!("{good}at 1 step 0 done - failed -\njoint 1:(pro,pro,pro)\n");
    assert!(parse_err(read_strategy(&idle, &csg).unwrap_err()).2.contains("not enabled"));
}

#[test]
fn step_rules_round_trip() {
    let csg = read_csg(&fixture("send_wait.csg")).unwrap();
    let s = synthesize(&csg, "<<1:2>>(CE,SW)max=? (R{time}[F done] + R{energy2}[C<=2])");
    assert_eq!(s.rule, StepRule::Saturating(3));
    let text = write_strategy(&csg, &s).unwrap();
    assert!(text.contains("rule saturating 3\n"));
    assert_eq!(read_strategy(&text, &csg).unwrap(), s);
}

#[test]
fn nfg_and_csg_errors_have_locations() {
    let text = fixture("intersection.nfg").replace("u (yld,yld,yld) -10 -10 -10", "u (yld,yld,yld) -10 -10");
    let (line, column, msg) = parse_err(read_nfg(&text).unwrap_err());
    assert_eq!((line, column), (14, 24));
    assert!(msg.contains("missing utility"));

    let text = fixture("send_wait.csg").replace("0.5:2 + 0.5:3", "0.5:2 + 0.25:3");
    let (line, column, _) = parse_err(read_csg(&text).unwrap_err());
    assert_eq!((line, column), (20, 15));
}
