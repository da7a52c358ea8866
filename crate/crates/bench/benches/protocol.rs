use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rcshare_core::crypto::{keygen, md5};
use rcshare_core::sim::{table1_scenario, Simulator};

fn bench_md5(c: &mut Criterion) {
    let mut group = c.benchmark_group("md5");
    for len in [64usize, 1024, 16 * 1024] {
        let data = vec![0x5au8; len];
        group.throughput(Throughput::Bytes(len as u64));
        group.bench_with_input(BenchmarkId::from_parameter(len), &data, |b, d| b.iter(|| md5(d)));
    }
    group.finish();
}

fn bench_rsa(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut msg = vec![0u8; 256];
    rng.fill(&mut msg[..]);
    let mut group = c.benchmark_group("rsa");
    for bits in [256u32, 512, 1024] {
        let pair = keygen(bits, 7).unwrap();
        let sealed = pair.public().encrypt(&msg);
        let signed = pair.encrypt_private(&msg);
        group.bench_with_input(BenchmarkId::new("encrypt_public", bits), &msg, |b, m| b.iter(|| pair.public().encrypt(m)));
        group.bench_with_input(BenchmarkId::new("decrypt_private", bits), &sealed, |b, ct| {
            b.iter(|| pair.decrypt_private(ct).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("verify_public", bits), &signed, |b, ct| {
            b.iter(|| pair.public().decrypt(ct).unwrap())
        });
    }
    group.finish();
}

fn bench_exchange(c: &mut Criterion) {
    let mut group = c.benchmark_group("exchange");
    group.sample_size(20);
    for bits in [256u32, 512] {
        let sc = table1_scenario(3, bits);
        let sim = Simulator::new(&sc).unwrap();
        group.bench_function(BenchmarkId::new("table1_scenario", bits), |b| b.iter(|| sim.run().unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_md5, bench_rsa, bench_exchange);
criterion_main!(benches);
