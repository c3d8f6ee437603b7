use ewave_core::monitor::{Monitor, MonitorConfig, Verdict};
use ewave_core::protocol::{
    generate_table, run_session, Attacker, NodeParams, NodeState, SessionConfig, ENERGY_TOLERANCE_J,
};
use ewave_core::LinkScenarioF64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tables_have_distinct_keys(n in 1usize..300, len in 1usize..4, seed in any::<u64>()) {
        prop_assume!(len > 1 || n <= 256);
        let t = generate_table(n, len, seed).unwrap();
        let mut keys: Vec<&[u8]> = t.entries().collect();
        prop_assert!(keys.iter().all(|k| k.len() == len));
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), n);
    }

    #[test]
    fn sessions_conserve_energy(p_tx in 5.0f64..24.0, seed in any::<u64>(), replay in any::<bool>()) {
        let mut scenario = LinkScenarioF64::anechoic();
        scenario.p_tx_dbm = p_tx;
        let table = generate_table(4, 2, seed).unwrap();
        let mut cn = table.clone();
        let mut node = NodeState::new(NodeParams::default(), table, seed).unwrap();
        let mut attacker = if replay { Attacker::replay() } else { Attacker::none() };
        let monitor = Monitor::new(MonitorConfig::new(NodeParams::default().bit_rate_hz));
        let cfg = SessionConfig { seed, ..SessionConfig::default() };
        for _ in 0..3 {
            let log = run_session(&scenario, &mut node, &mut cn, &mut attacker, &monitor, &cfg).unwrap();
            prop_assert!(log.energy_residual_j().abs() < ENERGY_TOLERANCE_J);
            prop_assert_eq!(log.legitimate_decision().verdict, Verdict::Accepted);
            if replay {
                prop_assert_eq!(log.final_decision.verdict, Verdict::RejectedReplay);
            }
            prop_assert!(node.stored_energy_j <= node.storage_capacity_j);
        }
    }
}
