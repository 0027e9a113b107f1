use depthnav::correction::{joint_bilateral_fill, FillParams};
use depthnav::frameio::{decode_stream, encode_stream, FrameStream};
use depthnav::scene::Material;
use depthnav::simsensor::{inject_artifacts, ArtifactModel};
use depthnav::{DepthFrame, SensorModel};
use proptest::prelude::*;

/// Small frames of in-range depths with roughly a third of the pixels missing.
fn frame() -> impl Strategy<Value = DepthFrame> {
    (2usize..24, 2usize..18).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop_oneof![1 => Just(0u16), 2 => 800u16..=7500], w * h)
            .prop_map(move |d| DepthFrame::from_depths(w, h, d, 0.0).unwrap())
    })
}

fn material() -> impl Strategy<Value = Material> {
    prop_oneof![Just(Material::Diffuse), Just(Material::Reflective), Just(Material::Transparent), Just(Material::Absorbing)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn depth_streams_round_trip(frames in prop::collection::vec(frame(), 1..4)) {
        // Frames of one stream share a size; the format numbers them by index.
        let frames: Vec<DepthFrame> =
            (0..frames.len()).map(|i| frames[0].clone().with_timestamp(i as f64)).collect();
        let stream = FrameStream::Depth(frames);
        let bytes = encode_stream(&stream).unwrap();
        prop_assert_eq!(decode_stream(&bytes).unwrap(), stream);
    }

    #[test]
    fn fill_keeps_valid_pixels_and_only_adds(input in frame(), radius in 1usize..5) {
        let params = FillParams { window_radius: radius, ..FillParams::default() };
        let out = joint_bilateral_fill(&input, None, None, &params).unwrap();
        for i in 0..input.len() {
            if input.is_valid(i) {
                prop_assert_eq!(out.get(i), input.get(i));
            }
        }
        prop_assert!(out.valid_count() >= input.valid_count());
    }

    #[test]
    fn artifacts_only_remove_and_stay_in_range(
        input in frame(),
        seed in any::<u64>(),
        mats in prop::collection::vec(material(), 1..5),
    ) {
        let sensor = SensorModel::default();
        let materials: Vec<Material> = (0..input.len()).map(|i| mats[i % mats.len()]).collect();
        let model = ArtifactModel::default().with_seed(seed);
        let out = inject_artifacts(&input, &materials, &model, &sensor).unwrap();
        for i in 0..input.len() {
            if let Some(d) = out.get(i) {
                prop_assert!(input.is_valid(i));
                prop_assert!((sensor.z_min..=sensor.z_max).contains(&d));
            }
        }
        prop_assert_eq!(inject_artifacts(&input, &materials, &model, &sensor).unwrap(), out);
    }
}
