mod common;

use innkeeper::calibration::calibrate_with_k;
use innkeeper::engine::{self, RunConfig, TRACE_COLUMNS};
use innkeeper::mediator::{ExploitRoute, Mediator, Phase};
use innkeeper::model::{Arm, Message, PhaseSignal, Reward};

use common::CANONICAL;

fn hand_trace_config() -> RunConfig {
    let params = calibrate_with_k(&CANONICAL, 1, 0.1, 1.0).unwrap().params;
    let mut cfg = RunConfig::new(CANONICAL, params, 6, 99);
    cfg.forced_coin = Some(true);
    cfg.forced_rewards = Some(vec![true, false]);
    cfg
}

#[test]
fn k1_n6_trace() {
    let trace = engine::run(&hand_trace_config()).unwrap();
    let expected = [
        (Arm::R, PhaseSignal::S1, 0.0),
        (Arm::R, PhaseSignal::S2, 0.0),
        (Arm::S, PhaseSignal::S2, 0.5),
        (Arm::R, PhaseSignal::S2, 0.5),
        (Arm::S, PhaseSignal::S3, 0.0),
        (Arm::S, PhaseSignal::S3, 0.0),
    ];
    for (rec, (arm, signal, subsidy)) in trace.records.iter().zip(expected) {
        assert_eq!(
            rec.message,
            Message::new(arm, signal, subsidy),
            "stage {}",
            rec.stage
        );
        assert_eq!(rec.action, arm);
        assert_eq!(rec.subsidy_paid, subsidy);
    }
    assert_eq!(trace.records[0].reward, Reward::One);
    assert_eq!(trace.records[1].reward, Reward::Zero);
    assert_eq!(trace.records[2].reward, Reward::Safe);
    let s = &trace.summary;
    assert_eq!(s.total_subsidy_promised, 1.0);
    assert_eq!(s.total_subsidy_paid, 1.0);
    assert_eq!(s.x, 1);
    assert_eq!((s.switch_to_s_count, s.switch_to_r_count), (1, 1));
    assert_eq!(s.r_sum, 0);
    assert_eq!(s.exploit_value, Some(Arm::S));
    assert_eq!(s.exploit_route, Some(ExploitRoute::Switching));
    assert_eq!(s.exploit_stage, Some(5));
    assert_eq!(trace.coin, Some(true));
}

#[test]
fn k1_trace_step_by_step() {
    let params = calibrate_with_k(&CANONICAL, 1, 0.1, 1.0).unwrap().params;
    let mut m = Mediator::new(CANONICAL, params, 6).unwrap();
    m.force_coin(true);
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let steps = [
        (Arm::R, Reward::One),
        (Arm::R, Reward::Zero),
        (Arm::S, Reward::Safe),
        (Arm::R, Reward::One),
    ];
    for (arm, reward) in steps {
        m.next_message(&mut rng).unwrap();
        m.record(arm, reward).unwrap();
    }
    assert_eq!(m.switching_count(), 2);
    assert_eq!((m.r_count(), m.r_sum()), (1, 0));
    let msg = m.next_message(&mut rng).unwrap();
    assert_eq!(msg, Message::new(Arm::S, PhaseSignal::S3, 0.0));
    assert_eq!(m.phase(), Phase::Exploit);
}

#[test]
fn csv_columns_and_determinism() {
    let cfg = hand_trace_config();
    let mut a = Vec::new();
    engine::run(&cfg).unwrap().write_csv(0, &mut a).unwrap();
    let mut b = Vec::new();
    engine::run(&cfg).unwrap().write_csv(0, &mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
    let third: Vec<&str> = lines.nth(2).unwrap().split(',').collect();
    assert_eq!(
        &third[2..],
        ["3", "s2", "S", "0.5", "S", "0.5", third[8], "0.5"]
    );
}
