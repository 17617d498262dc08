#!/usr/bin/env python3
"""Convert a public GPT-2 checkpoint into the package's .npz weight archive.

Accepts a HuggingFace-layout state dict (pytorch_model.bin or
model.safetensors, optionally inside a model directory).  GPT-2 stores its
projections as Conv1D with (in, out) weight layout, so every projection is
transposed to the (out, in) Linear layout; the fused c_attn projection is
split into separate q/k/v arrays.

Example:
    python3 scripts/convert_gpt2_checkpoint.py --input /path/to/gpt2 \
        --output weights/gpt2.npz
"""

import argparse
from pathlib import Path

import numpy as np
import torch


def load_state_dict(path: Path) -> dict:
    if path.is_dir():
        for name in ("pytorch_model.bin", "model.safetensors"):
            candidate = path / name
            if candidate.exists():
                path = candidate
                break
        else:
            raise FileNotFoundError(
                f"{path} holds neither pytorch_model.bin nor model.safetensors"
            )
    if path.suffix == ".safetensors":
        from safetensors.torch import load_file

        return load_file(str(path))
    return torch.load(str(path), map_location="cpu", weights_only=True)


def strip_prefix(state: dict) -> dict:
    out = {}
    for key, value in state.items():
        if key.startswith("transformer."):
            key = key[len("transformer."):]
        out[key] = value
    return out


def convert(state: dict) -> dict:
    state = strip_prefix(state)
    arrays: dict[str, np.ndarray] = {}

    def put(name, tensor):
        arrays[name] = tensor.detach().cpu().numpy().astype(np.float32)

    put("token_embed.weight", state["wte.weight"])  # unused by the forecaster
    put("pos_table.weight", state["wpe.weight"])
    put("final_norm.weight", state["ln_f.weight"])
    put("final_norm.bias", state["ln_f.bias"])

    n_layers = 0
    while f"h.{n_layers}.ln_1.weight" in state:
        n_layers += 1
    if n_layers == 0:
        raise KeyError("no transformer blocks found (expected h.0.ln_1.weight)")

    for i in range(n_layers):
        p = f"h.{i}."
        b = f"blocks.{i}."
        put(b + "attn_norm.weight", state[p + "ln_1.weight"])
        put(b + "attn_norm.bias", state[p + "ln_1.bias"])
        put(b + "ffn_norm.weight", state[p + "ln_2.weight"])
        put(b + "ffn_norm.bias", state[p + "ln_2.bias"])

        # fused qkv: Conv1D weight is (hidden, 3*hidden); transpose then split
        w = state[p + "attn.c_attn.weight"].t()
        bias = state[p + "attn.c_attn.bias"]
        hidden = w.shape[1]
        for j, proj in enumerate(("q_proj", "k_proj", "v_proj")):
            put(b + f"attn.{proj}.weight", w[j * hidden:(j + 1) * hidden])
            put(b + f"attn.{proj}.bias", bias[j * hidden:(j + 1) * hidden])
        put(b + "attn.o_proj.weight", state[p + "attn.c_proj.weight"].t())
        put(b + "attn.o_proj.bias", state[p + "attn.c_proj.bias"])

        put(b + "ffn.fc_in.weight", state[p + "mlp.c_fc.weight"].t())
        put(b + "ffn.fc_in.bias", state[p + "mlp.c_fc.bias"])
        put(b + "ffn.fc_out.weight", state[p + "mlp.c_proj.weight"].t())
        put(b + "ffn.fc_out.bias", state[p + "mlp.c_proj.bias"])

    return arrays


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True,
                        help="checkpoint file or model directory")
    parser.add_argument("--output", required=True, help="target .npz path")
    args = parser.parse_args()

    state = load_state_dict(Path(args.input))
    arrays = convert(state)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez(out, **arrays)

    n_blocks = sum(1 for k in arrays if k.endswith(".attn_norm.weight"))
    hidden = arrays["pos_table.weight"].shape[1]
    print(f"wrote {out}: {len(arrays)} arrays, {n_blocks} blocks, hidden {hidden}")


if __name__ == "__main__":
    main()
