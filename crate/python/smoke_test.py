"""Smoke test for the chemner_py extension.

Build it first, e.g.:

    cargo build --release -p chemner-python --features extension-module
    cp target/release/libchemner_py.so python/chemner_py.so
    python3 python/smoke_test.py
"""

import itertools
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import chemner_py as c  # noqa: E402


def brute_log_z(emissions, transitions):
    m = len(emissions[0])
    start, stop = m, m + 1
    scores = []
    for path in itertools.product(range(m), repeat=len(emissions)):
        s = transitions[start][path[0]] + transitions[path[-1]][stop]
        s += sum(emissions[t][y] for t, y in enumerate(path))
        s += sum(transitions[a][b] for a, b in zip(path, path[1:]))
        scores.append((s, list(path)))
    top = max(s for s, _ in scores)
    log_z = top + math.log(sum(math.exp(s - top) for s, _ in scores))
    best = max(scores, key=lambda x: x[0])
    return log_z, best


def main():
    assert f"{c.f_score(91.31, 87.73):.2f}" == "89.48"
    assert f"{c.f_score(91.8, 89.9):.2f}" == "90.84"
    assert c.tokenize("PDMS was added, (film).") == ["PDMS", "was", "added", ",", "(film)", "."]

    emissions = [[0.5, -1.0, 0.2], [1.5, 0.3, -0.7]]
    transitions = [[0.1 * (i - j) for j in range(5)] for i in range(5)]
    log_z, (best_score, best_path) = brute_log_z(emissions, transitions)
    assert abs(c.crf_log_partition(emissions, transitions) - log_z) < 1e-9
    path, score = c.crf_viterbi(emissions, transitions)
    assert path == best_path and abs(score - best_score) < 1e-9

    try:
        c.crf_viterbi([[1.0, 2.0]], [[0.0] * 3] * 3)
    except c.ChemnerError as e:
        assert "dimension" in str(e)
    else:
        raise AssertionError("shape mismatch was accepted")

    corpus = c.toy_corpus()
    head = "\n\n".join(corpus.split("\n\n")[:5]) + "\n\n"
    config = {
        "embedding_dim": 16, "lstm_dim": 8, "num_heads": 3, "key_dim": 4, "val_dim": 4,
        "encoder_blocks": 1, "max_len": 64, "dropout": 0, "lr": 0.01, "epochs": 60,
        "patience": 0, "crf_constraints": True,
    }
    tagger = c.train(head, config=config)
    assert "enc_hidden_dim=16" in tagger.config
    tagged = tagger.tag_conll(head)
    p, r, f = c.evaluate_conll(head, tagged)
    assert f == 100.0, (p, r, f)

    tokens = ["Treatment", "with", "PDMS", "reduced", "glucose", "uptake", "."]
    tags = tagger.tag(tokens)
    assert len(tags) == len(tokens)
    assert (2, 3, "ABBREVIATION") in tagger.mentions(tokens), tagger.mentions(tokens)
    heads = tagger.attention(tokens)
    assert len(heads) == 3
    for w in heads:
        for row in w:
            assert abs(sum(row) - 1.0) < 1e-9

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.slck")
        tagger.save(path)
        again = c.Tagger.load(path)
        assert again.to_bytes() == tagger.to_bytes()
        assert again.tag(tokens) == tags

    same = c.train(head, config=config)
    assert same.to_bytes() == tagger.to_bytes()
    print("python smoke test passed")


if __name__ == "__main__":
    main()
