use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tandem::features::SparseVector;
use tandem::gbdt::{train, LabeledVector, TreeModel, TreeParams};
use tandem::server::{start, EvalClient, EvalResponse, ServerConfig, ServerHandle, BAD_REQUEST};

const DIM: usize = 64;

fn random_vector(rng: &mut ChaCha8Rng) -> SparseVector {
    let mut pairs = Vec::new();
    for i in 0..DIM {
        if rng.gen_bool(0.25) {
            pairs.push((i, rng.gen_range(1..6) as f64));
        }
    }
    SparseVector::from_pairs(DIM, pairs)
}

fn vectors(seed: u64, n: usize) -> Vec<SparseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_vector(&mut rng)).collect()
}

fn model() -> TreeModel {
    let data: Vec<LabeledVector> = vectors(1, 400)
        .into_iter()
        .map(|v| LabeledVector {
            label: v.get(2) + v.get(9) > v.get(30) + 1.0,
            vector: v,
            problem: "x".into(),
        })
        .collect();
    train(&data, &TreeParams::default()).unwrap()
}

fn serve(model: TreeModel, workers: usize, batch_size: usize, wait: f64) -> ServerHandle {
    let cfg = ServerConfig {
        addr: "127.0.0.1:0".into(),
        workers,
        batch_size,
        wait,
        ..ServerConfig::default()
    };
    start(&cfg, Arc::new(model)).unwrap()
}

fn raw(addr: &str) -> (BufReader<TcpStream>, TcpStream) {
    let s = TcpStream::connect(addr).unwrap();
    (BufReader::new(s.try_clone().unwrap()), s)
}

fn read_response(r: &mut BufReader<TcpStream>) -> EvalResponse {
    let mut line = String::new();
    r.read_line(&mut line).unwrap();
    serde_json::from_str(&line).unwrap()
}

#[test]
fn remote_scores_are_bit_exact() {
    let m = model();
    let h = serve(m.clone(), 4, 8, 0.001);
    let mut c = EvalClient::connect(&h.local_addr().to_string()).unwrap();
    let vs = vectors(2, 1000);
    let mut remote = Vec::new();
    for chunk in vs.chunks(100) {
        remote.extend(c.score(chunk, vec![1, 2, 3]).unwrap());
    }
    for (v, r) in vs.iter().zip(remote) {
        assert_eq!(m.score(v).to_bits(), r.to_bits());
    }
    h.shutdown();
}

#[test]
fn empty_query_is_a_ping() {
    let h = serve(model(), 1, 8, 0.001);
    let mut c = EvalClient::connect(&h.local_addr().to_string()).unwrap();
    assert_eq!(c.score(&[], vec![]).unwrap(), Vec::<f64>::new());
    h.shutdown();
}

#[test]
fn malformed_lines_keep_the_connection() {
    let h = serve(model(), 1, 8, 0.001);
    let (mut r, mut w) = raw(&h.local_addr().to_string());
    w.write_all(b"{not json\n").unwrap();
    let resp = read_response(&mut r);
    assert_eq!(resp.error.unwrap().code, BAD_REQUEST);
    w.write_all(b"{\"id\":\"q\",\"query\":[[[1,2.0]]]}\n").unwrap();
    let resp = read_response(&mut r);
    assert_eq!(resp.id, "q");
    assert_eq!(resp.scores.unwrap().len(), 1);
    w.write_all(b"{\"id\":\"big\",\"query\":[[[100000,1.0]]]}\n").unwrap();
    assert_eq!(read_response(&mut r).error.unwrap().code, "bad_vector");
    h.shutdown();
}

#[test]
fn pipelined_requests_come_back_in_order() {
    let h = serve(model(), 4, 3, 0.001);
    let (mut r, mut w) = raw(&h.local_addr().to_string());
    let vs = vectors(3, 50);
    let mut text = String::new();
    for (k, v) in vs.iter().enumerate() {
        let pairs: Vec<String> = v.entries().iter().map(|(i, x)| format!("[{i},{x:?}]")).collect();
        text.push_str(&format!("{{\"id\":\"{k}\",\"query\":[[{}]]}}\n", pairs.join(",")));
    }
    w.write_all(text.as_bytes()).unwrap();
    for k in 0..vs.len() {
        assert_eq!(read_response(&mut r).id, k.to_string());
    }
    h.shutdown();
}

#[test]
fn backlog_is_served_in_batches_of_b() {
    let h = serve(model(), 1, 8, 0.3);
    let addr = h.local_addr().to_string();
    let barrier = Arc::new(Barrier::new(20));
    let threads: Vec<_> = (0..20)
        .map(|k| {
            let (addr, barrier) = (addr.clone(), barrier.clone());
            std::thread::spawn(move || {
                let mut c = EvalClient::connect(&addr).unwrap();
                barrier.wait();
                c.score(&vectors(k, 1), vec![]).unwrap()
            })
        })
        .collect();
    for t in threads {
        assert_eq!(t.join().unwrap().len(), 1);
    }
    assert_eq!(h.stats().batch_sizes(), vec![8, 8, 4]);
    h.shutdown();
}

#[test]
fn stress_no_request_is_dropped() {
    let h = serve(model(), 8, 8, 0.001);
    let addr = h.local_addr().to_string();
    let threads: Vec<_> = (0..32)
        .map(|k| {
            let addr = addr.clone();
            std::thread::spawn(move || {
                let mut c = EvalClient::connect(&addr).unwrap();
                let vs = vectors(100 + k, 200);
                vs.chunks(1).filter(|v| c.score(v, vec![k]).is_ok()).count()
            })
        })
        .collect();
    let answered: usize = threads.into_iter().map(|t| t.join().unwrap()).sum();
    assert_eq!(answered, 32 * 200);
    assert_eq!(h.stats().requests.load(std::sync::atomic::Ordering::SeqCst), 32 * 200);
    h.shutdown();
}

/// Wall time for 1000 vectors sent one per request by a single client,
/// against 10 per request from 8 concurrent clients.
pub fn throughput(wait: f64) -> (Duration, Duration) {
    let h = serve(model(), 8, 8, wait);
    let addr = h.local_addr().to_string();
    let vs = vectors(7, 1000);

    let mut c = EvalClient::connect(&addr).unwrap();
    let t0 = Instant::now();
    for v in vs.chunks(1) {
        c.score(v, vec![]).unwrap();
    }
    let sequential = t0.elapsed();

    let t0 = Instant::now();
    let threads: Vec<_> = vs
        .chunks(125)
        .map(|part| {
            let (addr, part) = (addr.clone(), part.to_vec());
            std::thread::spawn(move || {
                let mut c = EvalClient::connect(&addr).unwrap();
                for q in part.chunks(10) {
                    c.score(q, vec![]).unwrap();
                }
            })
        })
        .collect();
    for t in threads {
        t.join().unwrap();
    }
    let batched = t0.elapsed();
    h.shutdown();
    (sequential, batched)
}

#[test]
fn batching_beats_sequential_requests() {
    let (seq, batched) = throughput(0.002);
    assert!(
        seq.as_secs_f64() >= 1.5 * batched.as_secs_f64(),
        "sequential {seq:?} vs batched {batched:?}"
    );
}

#[test]
fn shutdown_answers_in_flight_requests() {
    let h = serve(model(), 1, 8, 0.4);
    let addr = h.local_addr().to_string();
    let client = std::thread::spawn(move || {
        let mut c = EvalClient::connect(&addr).unwrap();
        c.score(&vectors(4, 2), vec![])
    });
    std::thread::sleep(Duration::from_millis(100));
    let addr = h.local_addr();
    h.shutdown();
    assert_eq!(client.join().unwrap().unwrap().len(), 2);
    assert!(TcpStream::connect(addr).is_err());
}

#[test]
fn refused_connection_is_a_transport_error() {
    let addr = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .to_string();
    assert!(EvalClient::connect(&addr).is_err());
}
