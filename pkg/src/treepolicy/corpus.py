"""Built-in corpus of case-study policies.

Nine deployment/security/compliance scenarios over a hospital-style service
fleet.  Each scenario ships in two encodings: ``small`` renames the
endpoints onto a compact (3-4 symbol) alphabet so exhaustive differential
checks stay tractable, and ``full`` spells the policy over a fleet-scale
alphabet for header-size measurements.  Both parse to the same policy shape.
"""

from __future__ import annotations

from dataclasses import dataclass

from .policy import PolicyDocument, parse_policy

FULL_ALPHABET = (
    "Front, Appt, Test, Obf, Lab, Pay, Db, Log, Auth, Vault"
)


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    small: str  # compact-alphabet policy document
    full: str  # fleet-scale policy document


CORPUS: tuple[CorpusEntry, ...] = (
    CorpusEntry(
        "ab-testing",
        # Beta-labeled traffic must never reach the old service version.
        "alphabet Beta, DbV1, DbV2;\n"
        "start {Beta}: call-seq Beta (!DbV1)*;\n",
        f"alphabet {FULL_ALPHABET}, Beta, DbV1, DbV2;\n"
        "start {Beta}: call-seq Beta (!DbV1)*;\n",
    ),
    CorpusEntry(
        "factorial-testing",
        # The new frontend version must avoid every old downstream version.
        "alphabet TestV2, ObfV1, LabV1, ObfV2;\n"
        "start {TestV2}: call-seq (!{ObfV1, LabV1})*;\n",
        f"alphabet {FULL_ALPHABET}, TestV2, ObfV1, LabV1, ObfV2, LabV2;\n"
        "start {TestV2}: call-seq (!{ObfV1, LabV1})*;\n",
    ),
    CorpusEntry(
        "regional-access",
        # Requests labeled as EU-regional may never touch the main database.
        "alphabet FrontEU, Db, Cache;\n"
        "start {FrontEU}: call-seq FrontEU (!Db)*;\n",
        f"alphabet {FULL_ALPHABET}, FrontEU;\n"
        "start {FrontEU}: call-seq FrontEU (!Db)*;\n",
    ),
    CorpusEntry(
        "update-logging",
        # Every scheduling request must reach a database write somewhere.
        "alphabet Appt, Db, Log;\n"
        "start {Appt}: match (Appt) exists-child (match (star Db) all-path (star));\n",
        f"alphabet {FULL_ALPHABET};\n"
        "start {Appt}: match (Appt) exists-child (match (star Db) all-path (star));\n",
    ),
    CorpusEntry(
        "data-compliance",
        # De-identification must happen in a subtree before the lab export.
        "alphabet Test, Obf, Lab, Pay;\n"
        "start {Test}: match (Test) exists-child (match (Obf) all-path (eps))"
        " then (match (Lab) all-path (eps));\n",
        f"alphabet {FULL_ALPHABET};\n"
        "start {Test}: match (Test) exists-child (match (Obf) all-path (eps))"
        " then (match (Lab) all-path (eps));\n",
    ),
    CorpusEntry(
        "data-proxy",
        # The lab is reachable only through the authentication proxy.
        "alphabet Test, Auth, Lab, Db;\n"
        "start {Test}: match (Test) exists-child (match ((!Lab)* Auth) exists-child"
        " (match (star Lab) all-path (star)));\n",
        f"alphabet {FULL_ALPHABET};\n"
        "start {Test}: match (Test) exists-child (match ((!Lab)* Auth) exists-child"
        " (match (star Lab) all-path (star)));\n",
    ),
    CorpusEntry(
        "encryption",
        # Inside scheduling, a payment call must immediately delegate to the
        # encryption service before anything else happens on the path.
        "alphabet Front, Appt, Pay, Enc;\n"
        "start {Front}: match (Front Appt) all-path ((Pay Enc + !Pay) star);\n",
        f"alphabet {FULL_ALPHABET}, Enc;\n"
        "start {Front}: match (Front Appt) all-path ((Pay Enc + !Pay) star);\n",
    ),
    CorpusEntry(
        "data-vault",
        # The vault never invokes anyone: it may only appear as a leaf.
        "alphabet Vault, Pay, Db;\n"
        "start star: match (any) all-path ((!Vault)* (Vault + eps));\n",
        f"alphabet {FULL_ALPHABET};\n"
        "start star: match (any) all-path ((!Vault)* (Vault + eps));\n",
    ),
    CorpusEntry(
        "resource-pricing",
        # Every batch item spawned by the test service must be billed.
        "alphabet Test, Pay, Db;\n"
        "start {Test}: match (Test) all-children (match (star Pay) all-path (star));\n",
        f"alphabet {FULL_ALPHABET};\n"
        "start {Test}: match (Test) all-children (match (star Pay) all-path (star));\n",
    ),
)


def corpus_documents(variant: str = "small") -> dict[str, PolicyDocument]:
    """Parse every corpus entry; variant is ``small`` or ``full``."""
    docs = {}
    for entry in CORPUS:
        text = entry.small if variant == "small" else entry.full
        docs[entry.name] = parse_policy(text)
    return docs
