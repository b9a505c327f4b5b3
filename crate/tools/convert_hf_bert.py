#!/usr/bin/env python3
"""Convert a Hugging Face BERT model directory into a reportlabel checkpoint.

The heads are written as zeros, so the result is an encoder starting point
for `encoder.checkpoint` in a training config.

    python3 tools/convert_hf_bert.py path/to/hf-bert out/checkpoint
"""

import argparse
import json
import os
import struct

CONDITIONS = [
    "Atelectasis", "Cardiomegaly", "Consolidation", "Edema", "Enlarged Cardiomediastinum",
    "Fracture", "Lung Lesion", "Lung Opacity", "No Finding", "Pleural Effusion",
    "Pleural Other", "Pneumonia", "Pneumothorax", "Support Devices",
]


def encoder_tensors(state, num_layers):
    e = "embeddings."
    out = [
        ("embeddings.word", state[e + "word_embeddings.weight"]),
        ("embeddings.position", state[e + "position_embeddings.weight"]),
        ("embeddings.token_type", state[e + "token_type_embeddings.weight"]),
        ("embeddings.ln.gamma", state[e + "LayerNorm.weight"]),
        ("embeddings.ln.beta", state[e + "LayerNorm.bias"]),
    ]
    for i in range(num_layers):
        p = f"encoder.layer.{i}."
        linears = [
            ("attention.query", p + "attention.self.query"),
            ("attention.key", p + "attention.self.key"),
            ("attention.value", p + "attention.self.value"),
            ("attention.output", p + "attention.output.dense"),
            ("ffn.input", p + "intermediate.dense"),
            ("ffn.output", p + "output.dense"),
        ]
        for name, src in linears:
            out.append((f"layers.{i}.{name}.weight", state[src + ".weight"]))
            out.append((f"layers.{i}.{name}.bias", state[src + ".bias"]))
        for name, src in [("attention.ln", p + "attention.output.LayerNorm"), ("ffn.ln", p + "output.LayerNorm")]:
            out.append((f"layers.{i}.{name}.gamma", state[src + ".weight"]))
            out.append((f"layers.{i}.{name}.beta", state[src + ".bias"]))
    return out


def flat(t):
    return [float(x) for x in t.detach().float().reshape(-1).tolist()]


def write_bin(path, tensors):
    with open(path, "wb") as f:
        for _, values in tensors:
            f.write(struct.pack(f"<{len(values)}f", *values))


def convert(src, dst, name=None, lowercase=None):
    import torch  # noqa: F401
    from transformers import BertConfig, BertModel

    config = BertConfig.from_pretrained(src)
    model = BertModel.from_pretrained(src, add_pooling_layer=False)
    state = {k.removeprefix("bert."): v for k, v in model.state_dict().items()}
    with open(os.path.join(src, "vocab.txt"), encoding="utf-8") as f:
        vocab = [line.rstrip("\n") for line in f]
    if lowercase is None:
        tok_cfg = os.path.join(src, "tokenizer_config.json")
        lowercase = True
        if os.path.exists(tok_cfg):
            with open(tok_cfg, encoding="utf-8") as f:
                lowercase = json.load(f).get("do_lower_case", True)
    hidden = config.hidden_size
    enc = [("encoder." + n, flat(t)) for n, t in encoder_tensors(state, config.num_hidden_layers)]
    heads = []
    for i, c in enumerate(CONDITIONS):
        k = 2 if c == "No Finding" else 4
        heads.append((f"heads.{i}.weight", [0.0] * (k * hidden)))
        heads.append((f"heads.{i}.bias", [0.0] * k))
    manifest = {
        "schema_version": 1,
        "encoder": {
            "name": name or os.path.basename(os.path.normpath(src)),
            "vocab_size": len(vocab),
            "hidden_size": hidden,
            "num_layers": config.num_hidden_layers,
            "num_heads": config.num_attention_heads,
            "intermediate_size": config.intermediate_size,
            "max_tokens": config.max_position_embeddings,
            "type_vocab_size": config.type_vocab_size,
            "layer_norm_eps": config.layer_norm_eps,
        },
        "lowercase": bool(lowercase),
        "head_input_mode": "cls",
        "hidden_size": hidden,
        "conditions": CONDITIONS,
        "encoder_tensors": [{"name": n, "len": len(v)} for n, v in enc],
        "head_tensors": [{"name": n, "len": len(v)} for n, v in heads],
    }
    os.makedirs(dst, exist_ok=True)
    write_bin(os.path.join(dst, "encoder.bin"), enc)
    write_bin(os.path.join(dst, "heads.bin"), heads)
    with open(os.path.join(dst, "vocab.txt"), "w", encoding="utf-8") as f:
        f.write("".join(t + "\n" for t in vocab))
    with open(os.path.join(dst, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", help="Hugging Face model directory with config.json and vocab.txt")
    ap.add_argument("dst", help="checkpoint directory to create")
    ap.add_argument("--name", help="encoder name recorded in the manifest")
    ap.add_argument("--cased", action="store_true", help="do not lowercase input text")
    args = ap.parse_args()
    convert(args.src, args.dst, args.name, False if args.cased else None)


if __name__ == "__main__":
    main()
