use ewave_core::channel::{
    backscatter_received_power, combine_noncoherent, dbm_to_watts, friis_received_power, harvested_dc,
    watts_to_dbm, AntennaSpec, LinkGeometry, RectifierModel,
};
use ewave_core::LinkScenarioF64;
use proptest::prelude::*;

const C: f64 = 299_792_458.0;

fn gain() -> impl Strategy<Value = f64> {
    -10.0f64..30.0
}

proptest! {
    #[test]
    fn friis_is_linear_in_tx_power(p in -30.0f64..40.0, dp in -20.0f64..20.0, gt in gain(), gr in gain(),
                                   d in 1.0f64..200.0, f in 300e6f64..6e9) {
        let (tx, rx) = (AntennaSpec::new(gt).unwrap(), AntennaSpec::new(gr).unwrap());
        let g = LinkGeometry::new(d, f).unwrap();
        let a = friis_received_power(p, &tx, &rx, &g).unwrap();
        let b = friis_received_power(p + dp, &tx, &rx, &g).unwrap();
        prop_assert!((b - a - dp).abs() < 1e-9);
    }

    #[test]
    fn doubling_distance_costs_six_db(d in 1.0f64..100.0, f in 300e6f64..6e9) {
        let iso = AntennaSpec::new(0.0).unwrap();
        let near = friis_received_power(0.0, &iso, &iso, &LinkGeometry::new(d, f).unwrap()).unwrap();
        let far = friis_received_power(0.0, &iso, &iso, &LinkGeometry::new(2.0 * d, f).unwrap()).unwrap();
        prop_assert!((near - far - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn near_field_is_rejected(f in 300e6f64..6e9, frac in 0.01f64..0.99) {
        let iso = AntennaSpec::new(0.0).unwrap();
        let g = LinkGeometry::new(frac * C / f, f).unwrap();
        prop_assert!(friis_received_power(0.0, &iso, &iso, &g).is_err());
    }

    #[test]
    fn backscatter_contrast_is_gamma_contrast(p in -15.0f64..30.0, g in prop::array::uniform3(gain()),
                                              dl in 1.0f64..50.0, ul in 1.0f64..50.0,
                                              lo in -40.0f64..-5.0, frac in 0.0f64..1.0) {
        let extra = -lo * frac;
        let [gs, gn, gm] = g.map(|x| AntennaSpec::new(x).unwrap());
        let (dl, ul) = (LinkGeometry::new(dl, 868e6).unwrap(), LinkGeometry::new(ul, 868e6).unwrap());
        let rect = RectifierModel::new(lo, lo + extra, RectifierModel::<f64>::default().efficiency_curve, 1e4).unwrap();
        let hi = backscatter_received_power(p, &gs, &gn, &gm, &dl, &ul, &rect, true).unwrap();
        let low = backscatter_received_power(p, &gs, &gn, &gm, &dl, &ul, &rect, false).unwrap();
        prop_assert!((hi - low - extra).abs() < 1e-9);
    }

    #[test]
    fn noncoherent_sum_dominates_and_is_order_free(mut v in prop::collection::vec(-120.0f64..20.0, 1..12)) {
        let total = combine_noncoherent(&v).unwrap();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(total >= max - 1e-12);
        prop_assert!(total <= max + 10.0 * (v.len() as f64).log10() + 1e-9);
        v.reverse();
        prop_assert_eq!(combine_noncoherent(&v).unwrap(), total);
    }

    #[test]
    fn dbm_watts_round_trip(p in -150.0f64..60.0) {
        prop_assert!((watts_to_dbm(dbm_to_watts(p)) - p).abs() < 1e-9);
    }

    #[test]
    fn harvested_power_is_monotone(p in -40.0f64..30.0, dp in 0.0f64..10.0) {
        let rect = RectifierModel::<f64>::default();
        let a = harvested_dc(p, &rect).unwrap();
        let b = harvested_dc(p + dp, &rect).unwrap();
        prop_assert!(b.p_dc_watts >= a.p_dc_watts);
        prop_assert!((a.v_out_volts.powi(2) / rect.load_ohms - a.p_dc_watts).abs() <= 1e-12 * a.p_dc_watts.max(1e-30));
    }

    #[test]
    fn dynamic_range_shrinks_as_leakage_rises(floor in -90.0f64..-20.0, step in 0.0f64..10.0) {
        let mut s = LinkScenarioF64::anechoic();
        s.leakage = ewave_core::channel::LeakageModel::coupling(floor, 15.0).unwrap();
        let a = s.expected_dynamic_range_db().unwrap();
        s.leakage = ewave_core::channel::LeakageModel::coupling(floor + step, 15.0).unwrap();
        let b = s.expected_dynamic_range_db().unwrap();
        prop_assert!(b <= a + 1e-12);
    }
}
