use criterion::{criterion_group, criterion_main, Criterion};

use pdl_core::config::Caps;
use pdl_core::decide::enumerate_exact_quotients;
use pdl_core::poset::{boolean_poset, build_poset, p_extension};
use pdl_core::skeleton::{brute_force_skeleton, check_free_skeleton};

fn quotient_enumeration(c: &mut Criterion) {
    let caps = Caps::default();
    c.bench_function("enumerate_exact_quotients k=2", |b| {
        b.iter(|| {
            let qs = enumerate_exact_quotients(2, &caps).unwrap();
            assert_eq!(qs.len(), 409);
        })
    });
}

fn skeleton_checks(c: &mut Criterion) {
    let caps = Caps::default();
    let p22 = p_extension(&boolean_poset(2).unwrap(), &caps).unwrap().poset;
    c.bench_function("check_free_skeleton on the 22-point dual", |b| {
        b.iter(|| assert!(check_free_skeleton(&p22).is_some()))
    });
    let fork = build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap();
    c.bench_function("brute_force_skeleton on the fork", |b| {
        b.iter(|| assert!(brute_force_skeleton(&fork, &caps).unwrap().is_some()))
    });
}

criterion_group!(benches, quotient_enumeration, skeleton_checks);
criterion_main!(benches);
