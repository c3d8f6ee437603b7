use ewave_core::channel::NoiseSpec;
use ewave_core::monitor::{DecodeStatus, Monitor, MonitorConfig};
use ewave_core::waveform::{build_frame, synthesize_envelope, EnvelopeTrace};
use proptest::prelude::*;

fn loopback(payload: &[u8], bit_rate: f64, oversampling: u32, dr_db: f64, seed: u64) -> Option<Vec<u8>> {
    let frame = build_frame(payload, bit_rate).unwrap();
    let low = -60.0;
    let noise = NoiseSpec { noise_power_dbm: Some(low - 25.0), rng_seed: seed };
    let trace =
        synthesize_envelope(&frame.bits(), low + dr_db, low, bit_rate, bit_rate * f64::from(oversampling), &noise).unwrap();
    let decode = Monitor::new(MonitorConfig::new(bit_rate)).demodulate(&trace).unwrap();
    (decode.status == DecodeStatus::Decoded).then(|| decode.payload.unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_survive_the_channel(
        payload in prop::collection::vec(any::<u8>(), 1..=64),
        bit_rate in prop::sample::select(vec![1e3, 5e3, 10e3, 20e3, 50e3, 100e3]),
        oversampling in 8u32..=32,
        dr_db in 10.0f64..30.0,
        seed in any::<u64>(),
    ) {
        prop_assert_eq!(loopback(&payload, bit_rate, oversampling, dr_db, seed), Some(payload));
    }

    #[test]
    fn leading_idle_samples_do_not_break_sync(
        payload in prop::collection::vec(any::<u8>(), 1..=8),
        pad in 0usize..200,
        seed in any::<u64>(),
    ) {
        let bit_rate = 20e3;
        let frame = build_frame(&payload, bit_rate).unwrap();
        let noise = NoiseSpec { noise_power_dbm: Some(-90.0), rng_seed: seed };
        let trace = synthesize_envelope(&frame.bits(), -45.0, -60.0, bit_rate, bit_rate * 16.0, &noise)
            .unwrap()
            .padded_front(pad, -60.0);
        let decode = Monitor::new(MonitorConfig::new(bit_rate)).demodulate(&trace).unwrap();
        prop_assert_eq!(decode.payload, Some(payload));
    }

    #[test]
    fn trace_text_round_trip_preserves_decode(
        payload in prop::collection::vec(any::<u8>(), 1..=16),
        seed in any::<u64>(),
    ) {
        let frame = build_frame(&payload, 10e3).unwrap();
        let noise = NoiseSpec { noise_power_dbm: Some(-85.0), rng_seed: seed };
        let trace = synthesize_envelope(&frame.bits(), -48.0, -60.0, 10e3, 160e3, &noise).unwrap();
        let reread = EnvelopeTrace::<f64>::from_text(&trace.to_text().unwrap()).unwrap();
        prop_assert_eq!(&reread.samples, &trace.samples);
        let monitor = Monitor::new(MonitorConfig::new(10e3));
        prop_assert_eq!(monitor.demodulate(&reread).unwrap(), monitor.demodulate(&trace).unwrap());
    }
}

#[test]
fn single_precision_pipeline_decodes() {
    let payload = [0xA5u8, 0x3C, 0x00, 0xFF];
    let frame = build_frame(&payload, 20e3f32).unwrap();
    let noise = NoiseSpec { noise_power_dbm: Some(-85.0f32), rng_seed: 3 };
    let trace = synthesize_envelope(&frame.bits(), -45.0f32, -58.0, 20e3, 320e3, &noise).unwrap();
    let decode = Monitor::new(MonitorConfig::new(20e3f32)).demodulate(&trace).unwrap();
    assert_eq!(decode.payload.as_deref(), Some(&payload[..]));
}
