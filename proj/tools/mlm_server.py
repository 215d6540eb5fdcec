#!/usr/bin/env python3
"""Reference MLM server for the agbs HTTP backend protocol.

Serves a Hugging Face masked language model behind the two endpoints the
C++ client speaks:

    POST /top_k  {"text": ..., "mask_index": ..., "k": ...}
                 -> {"candidates": [{"token": ..., "p": ...}, ...]}
    POST /embed  {"text": ...} -> {"values": [...]}

The text arriving at /top_k already contains a [MASK] sentinel; the token
id lookup therefore goes through the model's own mask token. Embeddings
are mean-pooled final-layer hidden states. Wordpiece candidates (##...)
are returned as-is; the client skips what it cannot substitute.

Usage:
    python3 tools/mlm_server.py --model bert-large-uncased --port 8900
"""

import argparse
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer


class MlmService:
    def __init__(self, model_name: str, device: str):
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForMaskedLM.from_pretrained(model_name)
        self.model.to(device)
        self.model.eval()
        self.device = device
        if self.tokenizer.mask_token is None:
            raise SystemExit(f"{model_name} has no mask token; pick a masked LM")

    @torch.no_grad()
    def top_k(self, text: str, k: int):
        # The client's [MASK] sentinel matches the BERT-family mask token.
        if self.tokenizer.mask_token != "[MASK]":
            text = text.replace("[MASK]", self.tokenizer.mask_token)
        encoded = self.tokenizer(text, return_tensors="pt", truncation=True).to(self.device)
        mask_positions = (encoded.input_ids[0] == self.tokenizer.mask_token_id).nonzero()
        if mask_positions.numel() == 0:
            raise ValueError("no mask token in text")
        position = int(mask_positions[0])
        logits = self.model(**encoded).logits[0, position]
        probabilities = torch.softmax(logits, dim=-1)
        k = min(int(k), probabilities.shape[-1])
        top = torch.topk(probabilities, k)
        tokens = self.tokenizer.convert_ids_to_tokens(top.indices.tolist())
        return [
            {"token": token, "p": float(p)} for token, p in zip(tokens, top.values.tolist())
        ]

    @torch.no_grad()
    def embed(self, text: str):
        encoded = self.tokenizer(text, return_tensors="pt", truncation=True).to(self.device)
        output = self.model(**encoded, output_hidden_states=True)
        hidden = output.hidden_states[-1][0]          # (seq, dim)
        return hidden.mean(dim=0).tolist()            # mean pooling


def make_handler(service: MlmService):
    class Handler(BaseHTTPRequestHandler):
        def _reply(self, status: int, payload: dict):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):  # noqa: N802  (http.server API)
            length = int(self.headers.get("Content-Length", 0))
            try:
                request = json.loads(self.rfile.read(length))
                if self.path == "/top_k":
                    candidates = service.top_k(request["text"], request["k"])
                    self._reply(200, {"candidates": candidates})
                elif self.path == "/embed":
                    self._reply(200, {"values": service.embed(request["text"])})
                else:
                    self._reply(404, {"error": f"unknown path {self.path}"})
            except (KeyError, ValueError, json.JSONDecodeError) as ex:
                self._reply(400, {"error": str(ex)})
            except Exception as ex:  # pragma: no cover - surfaced to the client
                self._reply(500, {"error": str(ex)})

        def log_message(self, *args):
            pass

    return Handler


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", default="bert-large-uncased")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args()

    service = MlmService(args.model, args.device)
    server = ThreadingHTTPServer((args.host, args.port), make_handler(service))
    print(f"serving {args.model} on http://{args.host}:{args.port}")
    server.serve_forever()


if __name__ == "__main__":
    main()
