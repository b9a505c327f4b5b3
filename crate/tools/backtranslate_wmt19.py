#!/usr/bin/env python3
"""English -> pivot -> English backtranslation client for `reportlabel augment`.

Reads {"texts": [...], "pivot": "de", "beam": 1} on stdin and prints
{"outputs": [...]}. Uses the WMT'19 FSMT models from Hugging Face.
"""

import json
import sys


def translate(texts, name, beam, batch_size=16):
    import torch
    from transformers import FSMTForConditionalGeneration, FSMTTokenizer

    tok = FSMTTokenizer.from_pretrained(name)
    model = FSMTForConditionalGeneration.from_pretrained(name)
    device = "cuda" if torch.cuda.is_available() else "cpu"
    model.to(device).eval()
    out = []
    for i in range(0, len(texts), batch_size):
        batch = tok(texts[i:i + batch_size], return_tensors="pt", padding=True, truncation=True).to(device)
        with torch.no_grad():
            ids = model.generate(**batch, num_beams=beam, max_new_tokens=512)
        out.extend(tok.batch_decode(ids, skip_special_tokens=True))
    return out


def main():
    req = json.load(sys.stdin)
    pivot, beam = req.get("pivot", "de"), req.get("beam", 1)
    forward = translate(req["texts"], f"facebook/wmt19-en-{pivot}", beam)
    back = translate(forward, f"facebook/wmt19-{pivot}-en", beam)
    json.dump({"outputs": back}, sys.stdout)


if __name__ == "__main__":
    main()
