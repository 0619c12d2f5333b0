use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use idiomizer_bench::synthetic_module;
use idiomizer_core::idiomatize::chain_two_compares;
use idiomizer_core::{find_sites, refactor_source, DeterministicEngine, IdiomKind, Options, ParsedFile, SourceFile};

fn extraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("find_sites");
    for lines in [200, 2000] {
        let text = synthetic_module(lines);
        group.bench_with_input(BenchmarkId::from_parameter(lines), &text, |b, text| {
            b.iter(|| {
                let file = ParsedFile::parse(SourceFile::new("bench.py", text.as_str())).unwrap();
                black_box(find_sites(&file, &IdiomKind::ALL).len())
            })
        });
    }
    group.finish();
}

fn refactor(c: &mut Criterion) {
    let text = synthetic_module(500);
    c.bench_function("refactor_500_lines", |b| {
        b.iter(|| {
            let r = refactor_source(SourceFile::new("bench.py", text.as_str()), &DeterministicEngine, &Options::default())
                .unwrap();
            black_box(r.candidates.len())
        })
    });
}

fn chain(c: &mut Criterion) {
    c.bench_function("chain_two_compares", |b| {
        b.iter(|| black_box(chain_two_compares(black_box("v1 > v2"), black_box("v3 == v2"))))
    });
}

criterion_group!(benches, extraction, refactor, chain);
criterion_main!(benches);
