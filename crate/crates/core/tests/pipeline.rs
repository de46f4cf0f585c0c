use tors3_core::correspondence::{count_c_valid, verify_field, CensusSet};
use tors3_core::cubicenum::{classify, form_discriminant, Census, CubicSignature};

#[test]
fn cache_round_trip_preserves_classification() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
        let census = Census::load_or_enumerate(&dir, sig, 30_000, None).unwrap();
        let again = Census::load_or_enumerate(&dir, sig, 20_000, None).unwrap();
        assert_eq!(again.records, census.truncate(20_000).records);
        for r in &census.records {
            let disc = form_discriminant(&r.form) as i64;
            assert_eq!(&classify(&r.form, disc).unwrap(), r);
        }
    }
}

#[test]
fn loaded_censuses_drive_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    let set = CensusSet::new(vec![
        Census::load_or_enumerate(&dir, CubicSignature::Real, 50_000, None).unwrap(),
        Census::load_or_enumerate(&dir, CubicSignature::Imaginary, 50_000, None).unwrap(),
    ]);
    // Q(sqrt(-31)) has class number 3, so the disc -31 cubic field is its one partner
    let v = count_c_valid(-31, 1, &set).unwrap();
    assert_eq!((v.a, v.b), (0, 1));
    for (d, c) in [(-31, 1), (229, 1), (-4, 7), (-107, 5), (61, 2)] {
        assert!(verify_field(d, c, &set).unwrap().pass, "d = {d}, c = {c}");
    }
}
