use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use spectree::charval::{contour_index, resonance_indicator, IPlusT, IndexOptions};
use spectree::decomposition::SphericalBasis;
use spectree::operators::minimal_delta;
use spectree::resolvent::{free_kernel, SpectralPoint};
use spectree::{BirmanSchwinger, ContourSpec, PotentialSpec, Threshold, TreeGraph, C64};

fn basis(c: &mut Criterion) {
    let t = TreeGraph::new(2, 9).unwrap();
    c.bench_function("spherical_basis_k2_d9", |b| {
        b.iter(|| SphericalBasis::build(black_box(&t)).unwrap())
    });
}

fn kernel(c: &mut Criterion) {
    let t = TreeGraph::new(2, 7).unwrap();
    let basis = SphericalBasis::build(&t).unwrap();
    let v: Vec<usize> = (0..t.vertex_count()).collect();
    let sp = SpectralPoint::from_lambda(2, C64::new(0.05, 0.12), Threshold::Minus, 0.3).unwrap();
    c.bench_function("free_kernel_k2_d7", |b| {
        b.iter(|| free_kernel(&basis, black_box(&v), &sp, true).unwrap())
    });
}

fn birman_schwinger(c: &mut Criterion) {
    let spec = PotentialSpec::radial_exp(C64::new(0.3, 0.15), minimal_delta(2));
    let bs = BirmanSchwinger::new(2, &spec, Threshold::Minus).unwrap();
    let l = C64::new(0.05, 0.08);
    c.bench_function("bs_blocks_radial_k2", |b| {
        b.iter(|| bs.blocks(black_box(l), true).unwrap())
    });
    c.bench_function("resonance_indicator_radial_k2", |b| {
        b.iter(|| resonance_indicator(&bs, black_box(l)).unwrap())
    });

    let table = PotentialSpec::table(
        [
            (0, C64::new(0.2, 0.3)),
            (1, C64::new(0.1, 0.0)),
            (4, C64::new(0.0, -0.05)),
        ],
        minimal_delta(2),
    );
    let bt = BirmanSchwinger::new(2, &table, Threshold::Plus).unwrap();
    c.bench_function("bs_dense_table_k2", |b| {
        b.iter(|| bt.dense(black_box(l), true).unwrap())
    });
}

fn index(c: &mut Criterion) {
    let spec = PotentialSpec::radial_exp(C64::new(0.3, 0.15), minimal_delta(2));
    let bs = BirmanSchwinger::new(2, &spec, Threshold::Minus).unwrap();
    let contour = ContourSpec::new(C64::default(), 0.1, 64).unwrap();
    let opts = IndexOptions::default();
    let mut g = c.benchmark_group("contour");
    g.sample_size(10);
    g.bench_function("index_radial_k2_64_nodes", |b| {
        b.iter(|| contour_index(&IPlusT(&bs), black_box(&contour), &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, basis, kernel, birman_schwinger, index);
criterion_main!(benches);
