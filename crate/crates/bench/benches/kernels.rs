use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tors3_core::cubicenum::{
    enumerate_cubic_fields, enumerate_cubic_fields_filtered, CubicSignature, RamifiedFilter,
};
use tors3_core::densities::{second_term_constants, second_term_euler_product};
use tors3_core::quadfield::QuadraticField;
use tors3_core::rayclass::ray_class_group;
use tors3_core::real::bits_for_digits;

fn census(c: &mut Criterion) {
    let mut g = c.benchmark_group("census");
    g.sample_size(10);
    for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
        g.bench_function(format!("{}-1e5", sig.name()), |b| {
            b.iter(|| enumerate_cubic_fields(black_box(100_000), sig).unwrap())
        });
    }
    g.bench_function("imaginary-ram7-4.9e6", |b| {
        b.iter(|| {
            enumerate_cubic_fields_filtered(
                black_box(4_900_000),
                CubicSignature::Imaginary,
                Some(RamifiedFilter { p: 7 }),
            )
            .unwrap()
        })
    });
    g.finish();
}

fn ray_class(c: &mut Criterion) {
    let mut g = c.benchmark_group("ray_class");
    for (d, cond) in [(-3063i64, 14u64), (4001, 9), (-23, 63)] {
        g.bench_function(format!("d{d}-c{cond}"), |b| {
            b.iter(|| {
                // a fresh field each time so the cached class group is rebuilt
                let k = QuadraticField::new(black_box(d)).unwrap();
                ray_class_group(&k, cond).unwrap()
            })
        });
    }
    g.finish();
}

fn constants(c: &mut Criterion) {
    let mut g = c.benchmark_group("constants");
    g.sample_size(10);
    g.bench_function("second-term-30-digits", |b| {
        b.iter(|| second_term_constants(black_box(30)).unwrap())
    });
    g.bench_function("euler-product-1e4", |b| {
        b.iter(|| second_term_euler_product(black_box(10_000), bits_for_digits(20)))
    });
    g.finish();
}

criterion_group!(benches, census, ray_class, constants);
criterion_main!(benches);
