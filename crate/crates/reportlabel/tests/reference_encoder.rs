//! The encoder against the Hugging Face BERT implementation: a randomly
//! initialized reference model is converted with `tools/convert_hf_bert.py`
//! and both produce final hidden states for the same token ids. Skipped
//! when python3 with torch and transformers is unavailable.

use std::path::PathBuf;
use std::process::Command;

use reportlabel::checkpoint::load_checkpoint;
use reportlabel_core::synthetic::vocab;

const SCRIPT: &str = r#"
import json, os, sys
sys.path.insert(0, sys.argv[1])
import torch
from transformers import BertConfig, BertModel
from convert_hf_bert import convert

work, sequences = sys.argv[2], json.loads(sys.argv[3])
hf = os.path.join(work, "hf")
with open(os.path.join(work, "vocab.txt")) as f:
    n_vocab = sum(1 for _ in f)
torch.manual_seed(0)
cfg = BertConfig(vocab_size=n_vocab, hidden_size=64, num_hidden_layers=2, num_attention_heads=4,
                 intermediate_size=128, max_position_embeddings=64, hidden_act="gelu")
model = BertModel(cfg, add_pooling_layer=False)
with torch.no_grad():
    for name, p in model.named_parameters():
        p.normal_(0.0, 0.1)
        if "LayerNorm.weight" in name:
            p.add_(1.0)
model.eval()
model.save_pretrained(hf)
os.replace(os.path.join(work, "vocab.txt"), os.path.join(hf, "vocab.txt"))
convert(hf, os.path.join(work, "ckpt"), name="reference")
out = []
with torch.no_grad():
    for ids in sequences:
        h = model(input_ids=torch.tensor([ids])).last_hidden_state[0]
        out.append(h.reshape(-1).tolist())
print(json.dumps(out))
"#;

fn reference_available() -> bool {
    Command::new("python3")
        .args(["-c", "import torch, transformers"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

#[test]
fn hidden_states_match_reference_bert() {
    if !reference_available() {
        eprintln!("SKIP: python3 with torch and transformers not found");
        return;
    }
    let work = tempfile::tempdir().unwrap();
    std::fs::write(work.path().join("vocab.txt"), vocab().to_text()).unwrap();
    let tok = reportlabel_core::model::WordPieceTokenizer::new(vocab(), true);
    let texts = [
        "edemapos",
        "nofindingpos atelectasisneg the chest",
        "pneumothoraxunc fracturepos supportdevicesneg lunglesionneg view frontal lateral seen again",
    ];
    let sequences: Vec<Vec<u32>> = texts.iter().map(|t| tok.tokenize_and_truncate(t, 64).ids).collect();
    let tools = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tools");
    let out = Command::new("python3")
        .args(["-c", SCRIPT])
        .arg(&tools)
        .arg(work.path())
        .arg(serde_json::to_string(&sequences).unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected: Vec<Vec<f32>> = serde_json::from_slice(&out.stdout).unwrap();

    let model = load_checkpoint(&work.path().join("ckpt")).unwrap();
    assert_eq!(model.encoder().config().num_layers, 2);
    let mut worst = 0.0f32;
    for (ids, want) in sequences.iter().zip(&expected) {
        let got = model.encoder().forward(ids);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    assert!(worst < 1e-4, "max abs difference {worst}");
}

const TOKENIZER_SCRIPT: &str = r#"
import json, sys
from transformers import BertTokenizer
tok = BertTokenizer(sys.argv[1], do_lower_case=True, strip_accents=False)
texts = json.loads(sys.stdin.read())
print(json.dumps([tok.convert_tokens_to_ids(tok.tokenize(t)) for t in texts]))
"#;

#[test]
fn wordpiece_matches_reference_tokenizer() {
    use rand::{Rng, SeedableRng};
    use std::io::Write;

    if !reference_available() {
        eprintln!("SKIP: python3 with torch and transformers not found");
        return;
    }
    let words = ["pleural", "effusion", "no", "right", "left", "lobe", "opacity", "rib", "fracture", "café"];
    let pieces = ["##s", "##al", "##ity", "##ed", "##é", "pneu", "##mo", "##thorax", "un", "##changed", "1", "##0"];
    let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"].iter().map(|s| s.to_string()).collect();
    tokens.extend(words.iter().chain(&pieces).map(|s| s.to_string()));
    tokens.extend([".", ",", ":", "(", ")", "-", "/"].iter().map(|s| s.to_string()));
    let vocab = reportlabel_core::model::Vocab::from_tokens(tokens).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let vocab_path = dir.path().join("vocab.txt");
    std::fs::write(&vocab_path, vocab.to_text()).unwrap();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let fragments = [
        "Pleural", "EFFUSIONS", "pneumothorax", "unchanged", "Café", "10", "100", "rib-fracture", "(left)", "x/y",
        "lobe.", "opacityal", "  ", "\t", "\n", ",", "zzz", "Right:", "é", "no",
    ];
    let texts: Vec<String> = (0..300)
        .map(|_| {
            let n = rng.gen_range(0..12);
            (0..n).map(|_| fragments[rng.gen_range(0..fragments.len())]).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let mut child = Command::new("python3")
        .args(["-c", TOKENIZER_SCRIPT])
        .arg(&vocab_path)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(serde_json::to_string(&texts).unwrap().as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let expected: Vec<Vec<u32>> = serde_json::from_slice(&out.stdout).unwrap();
    let tok = reportlabel_core::model::WordPieceTokenizer::new(vocab, true);
    for (text, want) in texts.iter().zip(&expected) {
        assert_eq!(&tok.encode(text), want, "{text:?}");
    }
}
