"""Regenerates toy.conll and toy_heldout.conll.

Each document introduces a chemical by its long form with the
abbreviation in parentheses, then keeps using the abbreviation.
"""

import random

ENTITIES = [
    ("polydimethylsiloxane", "SYSTEMATIC", "PDMS"),
    ("free fatty acid", "FAMILY", "FFA"),
    ("reactive oxygen species", "FAMILY", "ROS"),
    ("nitric oxide", "TRIVIAL", "NO"),
    ("dimethyl sulfoxide", "SYSTEMATIC", "DMSO"),
    ("ethylenediaminetetraacetic acid", "SYSTEMATIC", "EDTA"),
    ("polyethylene glycol", "FAMILY", "PEG"),
    ("5-fluorouracil", "TRIVIAL", "5-FU"),
    ("sodium dodecyl sulfate", "SYSTEMATIC", "SDS"),
    ("bisphenol A", "TRIVIAL", "BPA"),
    ("polychlorinated biphenyls", "FAMILY", "PCBs"),
    ("glutathione", "TRIVIAL", "GSH"),
    ("hydrogen peroxide", "TRIVIAL", "H2O2"),
    ("tetrahydrocannabinol", "TRIVIAL", "THC"),
    ("acetylsalicylic acid", "SYSTEMATIC", "ASA"),
]
ABBR_CLASS = {"H2O2": "FORMULA"}

OTHERS = [
    ("glucose", "TRIVIAL"),
    ("NaCl", "FORMULA"),
    ("Ca2+", "FORMULA"),
    ("cisplatin", "TRIVIAL"),
    ("insulin", None),
    ("cholesterol", "TRIVIAL"),
    ("ethanol", "TRIVIAL"),
    ("KCl", "FORMULA"),
]
TISSUES = ["liver", "serum", "plasma", "kidney", "brain", "cells"]

INTRO = [
    "Effects of {L} ( {A} ) on {T} function .",
    "We studied {L} ( {A} ) in {T} samples .",
    "The role of {L} ( {A} ) was examined in rat {T} .",
]
REUSE = [
    "{A} exposure increased {O} levels in {T} .",
    "Treatment with {A} reduced {O} uptake .",
    "The {A} treated group showed lower {O} concentrations .",
    "{A} and {O} were measured in the {T} .",
    "These results suggest that {A} modulates {O} transport .",
    "Removal of {A} restored normal {T} morphology .",
]


def tag_phrase(words, cls):
    if cls is None:
        return ["O"] * len(words)
    if len(words) == 1:
        return [f"B-{cls}"]
    return [f"B-{cls}"] + [f"I-{cls}"] * (len(words) - 2) + [f"E-{cls}"]


def render(template, fill):
    toks, tags = [], []
    for piece in template.split():
        if piece.startswith("{") and piece.endswith("}"):
            words, cls = fill[piece[1:-1]]
            toks += words
            tags += tag_phrase(words, cls)
        else:
            toks.append(piece)
            tags.append("O")
    return toks, tags


def document(rng, entity):
    long_form, cls, abbr = entity
    fill = {
        "L": (long_form.split(), cls),
        "A": ([abbr], ABBR_CLASS.get(abbr, "ABBREVIATION")),
    }
    sentences = []
    intro = rng.choice(INTRO)
    reuse = rng.sample(REUSE, 3)
    for template in [intro] + reuse:
        other, ocls = rng.choice(OTHERS)
        fill["O"] = ([other], ocls)
        fill["T"] = ([rng.choice(TISSUES)], None)
        sentences.append(render(template, fill))
    return sentences


def write(path, docs):
    with open(path, "w") as f:
        for doc_id, sentences in docs:
            f.write(f"-DOCSTART- {doc_id}\n\n")
            for toks, tags in sentences:
                for t, g in zip(toks, tags):
                    f.write(f"{t}\t{g}\n")
                f.write("\n")


def main():
    rng = random.Random(2024)
    train = [(f"toy{i:02d}", document(rng, e)) for i, e in enumerate(ENTITIES)]
    held = [(f"held{i:02d}", document(rng, e)) for i, e in enumerate(rng.sample(ENTITIES, 6))]
    write("toy.conll", train)
    write("toy_heldout.conll", held)


if __name__ == "__main__":
    main()
