//! Independent reimplementations of the toy forward pass and of the
//! embedding file layout, checked against the library.

use approx::assert_abs_diff_eq;
use clauseprobe::conllu::{Sentence, Token, Treebank};
use clauseprobe::encoder::{
    read_embedding_file, toy_table, write_embedding_file, EmbeddingTable, SentenceRecord, ToyEncoderConfig,
    ToyEncoderParams,
};
use clauseprobe::taskdata::SubwordAlignment;
use clauseprobe::Error;

const D: usize = 4;

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x100000001b3);
    }
    h
}

/// Deterministic, non-symmetric test values.
fn fill(len: usize, salt: f64) -> Vec<f64> {
    (0..len).map(|i| ((i as f64 + 1.0) * 0.37 + salt).sin() * 0.5).collect()
}

fn matmul_row(x: &[f64], w: &[f64], cols: usize) -> Vec<f64> {
    (0..cols).map(|j| x.iter().enumerate().map(|(i, xi)| xi * w[i * cols + j]).sum()).collect()
}

#[test]
fn two_token_single_head_forward_matches_hand_computation() {
    let cfg = ToyEncoderConfig {
        vocab_hash_buckets: 7,
        dim: D,
        n_layers: 1,
        n_heads: 1,
    };
    let emb = fill(7 * D, 0.1);
    let (wq, wk, wv, wo) = (fill(D * D, 0.2), fill(D * D, 0.3), fill(D * D, 0.4), fill(D * D, 0.5));
    let (w1, b1, w2, b2) = (fill(D * 4 * D, 0.6), fill(4 * D, 0.7), fill(4 * D * D, 0.8), fill(D, 0.9));
    let tensors = vec![emb.clone(), wq.clone(), wk.clone(), wv.clone(), wo.clone(), w1.clone(), b1.clone(), w2.clone(), b2.clone()];
    let params = ToyEncoderParams::from_tensors(cfg, 0, &tensors).unwrap();

    let forms = ["cat", "sleeps"];
    // input = embedding row + sin/cos position code
    let x: Vec<Vec<f64>> = forms
        .iter()
        .enumerate()
        .map(|(pos, f)| {
            let b = (fnv1a(f) % 7) as usize;
            (0..D)
                .map(|j| {
                    let angle = pos as f64 / 10000f64.powf((2 * (j / 2)) as f64 / D as f64);
                    emb[b * D + j] + if j % 2 == 0 { angle.sin() } else { angle.cos() }
                })
                .collect()
        })
        .collect();
    let q: Vec<Vec<f64>> = x.iter().map(|r| matmul_row(r, &wq, D)).collect();
    let k: Vec<Vec<f64>> = x.iter().map(|r| matmul_row(r, &wk, D)).collect();
    let v: Vec<Vec<f64>> = x.iter().map(|r| matmul_row(r, &wv, D)).collect();
    let mut attn = [[0.0; 2]; 2];
    for i in 0..2 {
        let s: Vec<f64> = (0..2).map(|j| q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() / 2.0).collect();
        let z = (s[0].exp() + s[1].exp()).ln();
        attn[i] = [(s[0] - z).exp(), (s[1] - z).exp()];
    }
    let mut expected = Vec::new();
    for i in 0..2 {
        let ctx: Vec<f64> = (0..D).map(|c| attn[i][0] * v[0][c] + attn[i][1] * v[1][c]).collect();
        let proj = matmul_row(&ctx, &wo, D);
        let mid: Vec<f64> = (0..D).map(|c| x[i][c] + proj[c]).collect();
        let hidden: Vec<f64> = matmul_row(&mid, &w1, 4 * D).iter().zip(&b1).map(|(a, b)| (a + b).tanh()).collect();
        let ff = matmul_row(&hidden, &w2, D);
        expected.push((0..D).map(|c| mid[c] + ff[c] + b2[c]).collect::<Vec<f64>>());
    }

    let out = params.forward_forms(&forms).output().clone();
    for i in 0..2 {
        for c in 0..D {
            assert_abs_diff_eq!(out.vectors[[i, c]], expected[i][c], epsilon = 1e-12);
        }
        for (j, &a) in attn[i].iter().enumerate() {
            assert_abs_diff_eq!(out.attention[0][0][[i, j]], a, epsilon = 1e-12);
        }
    }
}

fn record(id: &str, first: Vec<usize>, n_subwords: usize, vectors: Vec<f32>, attention: Option<Vec<f32>>) -> SentenceRecord {
    SentenceRecord {
        alignment: SubwordAlignment {
            sent_id: id.to_owned(),
            token_to_first_subword: first,
            n_subwords,
        },
        vectors,
        attention,
    }
}

#[test]
fn file_layout_matches_hand_assembled_bytes() {
    let mut t = EmbeddingTable::new(2, 1, 1, true).unwrap();
    t.insert(record("a", vec![0, 2], 3, vec![1.0, -2.0, 0.5, 4.0], Some(vec![1.0 / 3.0; 9]))).unwrap();

    let mut want = b"CLPRB1\0\0".to_vec();
    for v in [1u32, 2, 1, 1, 1, 1] {
        want.extend(v.to_le_bytes());
    }
    want.push(b'a');
    for v in [2u32, 3, 0, 2] {
        want.extend(v.to_le_bytes());
    }
    for v in [1.0f32, -2.0, 0.5, 4.0] {
        want.extend(v.to_le_bytes());
    }
    for _ in 0..9 {
        want.extend((1.0f32 / 3.0).to_le_bytes());
    }
    assert_eq!(t.to_bytes(), want);
    assert_eq!(EmbeddingTable::from_bytes(&want).unwrap().to_bytes(), want);
}

fn offset_of(e: Error) -> u64 {
    match e {
        Error::EmbeddingFormat { offset, .. } => offset,
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn load_errors_carry_byte_offsets() {
    let mut t = EmbeddingTable::new(2, 1, 1, true).unwrap();
    t.insert(record("a", vec![0], 1, vec![1.0, 2.0], Some(vec![1.0]))).unwrap();
    t.insert(record("b", vec![0], 1, vec![3.0, 4.0], Some(vec![1.0]))).unwrap();
    let good = t.to_bytes();
    let second = 28 + (4 + 1 + 4 + 4 + 4 + 8 + 4);

    let mut bad = good.clone();
    bad[0] = b'X';
    assert_eq!(offset_of(EmbeddingTable::from_bytes(&bad).unwrap_err()), 0);

    let mut bad = good.clone();
    bad[8] = 2;
    assert_eq!(offset_of(EmbeddingTable::from_bytes(&bad).unwrap_err()), 8);

    let cut = &good[..good.len() - 2];
    assert_eq!(offset_of(EmbeddingTable::from_bytes(cut).unwrap_err()), good.len() as u64 - 4);

    // attention of the second record is no longer a distribution
    let mut bad = good.clone();
    let n = bad.len();
    bad[n - 4..].copy_from_slice(&0.5f32.to_le_bytes());
    let err = EmbeddingTable::from_bytes(&bad).unwrap_err();
    assert!(err.to_string().contains("not stochastic"), "{err}");
    assert_eq!(offset_of(err), second as u64);
}

#[test]
fn toy_table_survives_a_file_round_trip() {
    let sentences = (0..3)
        .map(|i| {
            Sentence::new(
                format!("s{i}"),
                vec![Token::new(1, "dogs", 2, "nsubj"), Token::new(2, "bark", 0, "root"), Token::new(3, ".", 2, "punct")],
            )
        })
        .collect();
    let tb = Treebank::new("t", "en", sentences).unwrap();
    let params = ToyEncoderParams::init(ToyEncoderConfig::default(), 3).unwrap();
    let table = toy_table(&tb, &params, true).unwrap();
    assert!(table.check_against(&tb).is_empty());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.clprb");
    write_embedding_file(&table, &path).unwrap();
    let back = read_embedding_file(&path).unwrap();
    assert_eq!(back.to_bytes(), table.to_bytes());
    let row = back.attention("s1", 1, 0).unwrap();
    assert_eq!(row.len(), 9);
    let enc = params.encode(&tb.sentences[1]);
    for (a, b) in back.vector("s1", 2).unwrap().iter().zip(enc.vectors.row(1)) {
        assert_eq!(*a, *b as f32);
    }
}
