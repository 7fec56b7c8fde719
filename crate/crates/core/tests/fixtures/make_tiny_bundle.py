"""Regenerates tests/fixtures/tiny_bundle: a randomly initialised two-layer
BERT masked LM over the reference vocabulary, exported to ONNX, plus a
self-test file whose expectations come from PyTorch and from the
`transformers` BertTokenizer.

    python3 make_tiny_bundle.py
"""

import json
import os
import random

import torch
from transformers import BertConfig, BertForMaskedLM, BertTokenizer

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "tiny_bundle")
TABLE = os.path.join(HERE, "..", "..", "data", "reference_vocab.tsv")
MAX_LEN = 128


class PlainMaskLM(torch.nn.Module):
    """Builds the additive attention mask directly, keeping the exported
    graph free of the library's mask-construction ops."""

    def __init__(self, model):
        super().__init__()
        self.model = model

    def forward(self, input_ids, attention_mask, token_type_ids):
        bert = self.model.bert
        hidden = bert.embeddings(input_ids=input_ids, token_type_ids=token_type_ids)
        additive = (1.0 - attention_mask[:, None, None, :].to(hidden.dtype)) * -10000.0
        for layer in bert.encoder.layer:
            out = layer(hidden, attention_mask=additive)
            hidden = out[0] if isinstance(out, tuple) else out
        return self.model.cls(hidden)


def main():
    os.makedirs(OUT, exist_ok=True)
    tokens = []
    with open(TABLE, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("# "):
                continue
            tokens.append(line.split("\t")[0])
    vocab_path = os.path.join(OUT, "vocab.txt")
    with open(vocab_path, "w", encoding="utf-8") as f:
        f.write("\n".join(tokens) + "\n")

    ids = {t: i for i, t in enumerate(tokens)}
    special = {
        "cls": ids["[CLS]"],
        "sep": ids["[SEP]"],
        "mask": ids["[MASK]"],
        "unk": ids["[UNK]"],
        "pad": ids["[PAD]"],
        "filler": ids["."],
    }
    with open(os.path.join(OUT, "tokenizer.json"), "w") as f:
        json.dump({"lowercase": True, "max_len": MAX_LEN, "special_ids": special}, f, indent=1)

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(tokens),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=MAX_LEN,
        pad_token_id=special["pad"],
    )
    config._attn_implementation = "eager"
    model = BertForMaskedLM(config).eval()
    # sharpen the output layer so top-1 choices are not near-ties
    with torch.no_grad():
        model.cls.predictions.decoder.weight.mul_(8.0)

    dummy = torch.tensor([[special["cls"], 20, special["mask"], special["sep"]]])
    torch.onnx.export(
        PlainMaskLM(model).eval(),
        (dummy, torch.ones_like(dummy), torch.zeros_like(dummy)),
        os.path.join(OUT, "model.onnx"),
        input_names=["input_ids", "attention_mask", "token_type_ids"],
        output_names=["logits"],
        dynamic_axes={
            "input_ids": {0: "batch", 1: "seq"},
            "attention_mask": {0: "batch", 1: "seq"},
            "token_type_ids": {0: "batch", 1: "seq"},
            "logits": {0: "batch", 1: "seq"},
        },
        opset_version=14,
        dynamo=False,
    )

    tokenizer = BertTokenizer(vocab_path, do_lower_case=True)
    with open(os.path.join(HERE, "news_pairs.jsonl"), encoding="utf-8") as f:
        pairs = [json.loads(line) for line in f]
    sentences = []
    for p in pairs:
        for s in p["document"].replace("? ", "?\n").replace(". ", ".\n").split("\n"):
            if s.strip():
                sentences.append(s.strip())
    sentences = sentences[:94] + [
        "Café owners in Zürich said “prices” rose — again!",
        "E-mail me at test@example.com (or call 555-0100).",
        "Naïve résumé writers; über-confident?",
        "ALL CAPS HEADLINE: STOCKS FALL 3.5%",
        "Tabs\tand\nnewlines   collapse",
        "Numbers like 1,234,567 and 0.001 split.",
    ]
    tokenization = [{"text": s, "ids": tokenizer.convert_tokens_to_ids(tokenizer.tokenize(s))} for s in sentences]

    rng = random.Random(0)
    cases = []
    total = 0
    for s in sentences[:30]:
        toks = tokenizer.convert_tokens_to_ids(tokenizer.tokenize(s))[: MAX_LEN - 2]
        input_ids = [special["cls"]] + toks + [special["sep"]]
        positions = sorted(rng.sample(range(1, len(input_ids) - 1), k=min(2, len(input_ids) - 2)))
        for p in positions:
            input_ids[p] = special["mask"]
        with torch.no_grad():
            logits = model(
                input_ids=torch.tensor([input_ids]),
                attention_mask=torch.ones(1, len(input_ids), dtype=torch.long),
                token_type_ids=torch.zeros(1, len(input_ids), dtype=torch.long),
            ).logits[0]
        cases.append(
            {
                "input_ids": input_ids,
                "masked_positions": positions,
                "expected_top_ids": [int(logits[p].argmax()) for p in positions],
            }
        )
        total += len(positions)
    with open(os.path.join(OUT, "selftest.json"), "w") as f:
        json.dump({"min_agreement": 0.98, "cases": cases, "tokenization": tokenization}, f)
    print(f"{len(tokens)} tokens, {len(tokenization)} tokenization cases, {total} masked positions")


if __name__ == "__main__":
    main()
