use bsmg_core::env::{
    ids_instance, make_env, make_ids_env, make_webapp_env, spec_of, switch_success_probability, webapp_instance,
    EnvHandle, Environment, Exposure, IdsParams, Variant, WebAppParams, CONFIGURATIONS,
};
use bsmg_core::game::{save_spec_with_extensions, GameSpec};
use bsmg_core::Error;

fn write_webapp(dir: &std::path::Path) -> (std::path::PathBuf, bsmg_core::env::WebAppInstance) {
    let inst = webapp_instance(&WebAppParams::desk(1)).unwrap();
    let path = dir.join("webapp.json");
    save_spec_with_extensions(&inst.spec, Some(&inst.extensions.to_value()), &path).unwrap();
    (path, inst)
}

#[test]
fn webapp_round_trip_and_api() {
    let dir = tempfile::tempdir().unwrap();
    let (path, inst) = write_webapp(dir.path());
    let env = make_webapp_env(&path, None, Exposure::Privileged).unwrap();
    assert_eq!(spec_of(&env).unwrap(), &inst.spec);
    assert_eq!(env.get_states(), CONFIGURATIONS.map(String::from).to_vec());
    for s in 0..4 {
        assert!(!env.is_end(s).unwrap());
        assert_eq!(env.get_actions(s).unwrap().defender.len(), 4);
    }
    assert!(matches!(env.is_end(4), Err(Error::UnknownState(_))));
    // make_env dispatches on the file's domain.
    let generic = make_env(&path, None, Exposure::Privileged).unwrap();
    assert_eq!(spec_of(&generic).unwrap(), &inst.spec);
}

#[test]
fn successful_attacks_pay_the_impact_score() {
    let dir = tempfile::tempdir().unwrap();
    let (path, inst) = write_webapp(dir.path());
    let mut env = make_webapp_env(&path, Some(Variant::Plain), Exposure::Public).unwrap();
    let mut checked = 0;
    for s in 0..4 {
        for c in 0..4 {
            for i in 0..3 {
                for a in 0..inst.impact[i].len() {
                    let out = env.act(s, c, a, i).unwrap();
                    assert_eq!(out.next_state, c);
                    if inst.hits(c, i, a) {
                        assert_eq!(out.r_attacker, inst.impact[i][a]);
                        assert_eq!(out.r_defender, -inst.impact[i][a] - inst.switching_costs[s][c]);
                        checked += 1;
                    } else {
                        assert_eq!(out.r_attacker, 0.0);
                    }
                    assert!(out.r_defender <= 0.0);
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn threshold_switches_fail_at_the_stated_rate() {
    let dir = tempfile::tempdir().unwrap();
    let (path, inst) = write_webapp(dir.path());
    let mut env = make_webapp_env(&path, Some(Variant::Threshold), Exposure::Public).unwrap();
    env.reseed(4);
    let cost_max = inst.extensions.cost_max.unwrap();
    let n = 20_000;
    for s in 0..4 {
        for c in 0..4 {
            let stay = (0..n).filter(|_| env.act(s, c, 0, 0).unwrap().next_state == s).count() as f64 / n as f64;
            let p = switch_success_probability(inst.switching_costs[s][c], cost_max);
            let expected = if s == c { 1.0 } else { 1.0 - p };
            let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
            assert!((stay - expected).abs() <= 3.0 * sigma.max(1e-12), "{s}->{c}: {stay} vs {expected}");
        }
    }
}

#[test]
fn start_states_are_uniform_and_overridable() {
    let inst = webapp_instance(&WebAppParams::desk(1)).unwrap();
    let mut env = EnvHandle::new(inst.spec, Exposure::Public).unwrap();
    let n = 10_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[env.get_start_state()] += 1;
    }
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    assert!(counts.iter().all(|&k| (k as f64 / n as f64 - 0.25).abs() < 3.0 * sigma), "{counts:?}");
    env.override_start_states(&["(Php, MySQL)", "(Php, PostgreSQL)"]).unwrap();
    assert!((0..1000).all(|_| env.get_start_state() >= 2));
    assert!(env.override_start_states(&["(Go, Mongo)"]).is_err());
    assert!(env.override_start_states::<&str>(&[]).is_err());
}

#[test]
fn ids_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, ext) = ids_instance(&IdsParams::default()).unwrap();
    let path = dir.path().join("ids.json");
    save_spec_with_extensions(&spec, Some(&ext.to_value()), &path).unwrap();
    let mut env = make_ids_env(&path, Exposure::Public).unwrap();
    assert!(matches!(spec_of(&env), Err(Error::Exposure)));
    assert!(env.is_end(3).unwrap());
    assert!(matches!(env.act(3, 0, 0, 0), Err(Error::TerminalState(_))));
    assert!(env.get_actions(0).unwrap().defender.iter().any(|a| a == "no-op"));
    // A web-app file is not an IDS instance.
    let (wpath, _) = write_webapp(dir.path());
    assert!(matches!(make_ids_env(&wpath, Exposure::Public), Err(Error::Structure(_))));
}

#[test]
fn generic_envs_are_single_state_capable() {
    let env = EnvHandle::new(GameSpec::single_state(1.0, 0.0, 0.8), Exposure::Public).unwrap();
    assert_eq!(env.get_states().len(), 1);
    assert_eq!(env.type_distribution(0).unwrap(), vec![1.0]);
}
