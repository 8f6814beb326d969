import json
import random
import subprocess

import pytest
from hypothesis import given, strategies as st

from photon.errors import DuplicateName, EmptyName, PathNotFound, Unreadable
from photon.model import (
    FileEntry,
    FileIndex,
    PeerIdentity,
    build_file_index,
    hash_file,
    indexed_sources,
    new_peer_identity,
)

# Digests computed beforehand with coreutils sha256sum (independent of hashlib
# call sites in the package).
SHA_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
SHA_1MIB_ZEROS = "30e14955ebf1352266dc2ff8067e68104607e750abb9d3b36582b8af909fcb58"


# --- PeerIdentity ---

def test_new_identity_has_fresh_hex_id():
    ident = new_peer_identity("desk", "linux")
    assert len(ident.peer_id) == 32
    assert all(c in "0123456789abcdef" for c in ident.peer_id)
    assert ident.display_name == "desk"
    assert ident.protocol_version == 1


def test_new_identity_rejects_blank_name():
    with pytest.raises(EmptyName):
        new_peer_identity("  ", "linux")


def test_two_identities_are_distinct():
    a = new_peer_identity("a", "linux")
    b = new_peer_identity("a", "linux")
    assert a.peer_id != b.peer_id


def test_identity_field_validation():
    with pytest.raises(ValueError):
        PeerIdentity(peer_id="XY" * 16, display_name="x")  # not lowercase hex
    with pytest.raises(ValueError):
        PeerIdentity(peer_id="ab" * 15, display_name="x")  # wrong length
    with pytest.raises(ValueError):
        PeerIdentity(peer_id="ab" * 16, display_name="x", platform="beos")
    with pytest.raises(ValueError):
        PeerIdentity(peer_id="ab" * 16, display_name="n" * 65)  # > 64 bytes


def test_identity_json_roundtrip_ignores_unknown_keys():
    ident = new_peer_identity("desk", "macos")
    obj = ident.to_json_dict()
    obj["future_field"] = 42
    assert PeerIdentity.from_json_dict(obj) == ident


# --- FileEntry / FileIndex ---

def test_entry_rejects_path_escapes():
    good = dict(index=0, size_bytes=1, sha256=SHA_EMPTY)
    for bad in ("a/b", "a\\b", "..", ".", ""):
        with pytest.raises(ValueError):
            FileEntry(name=bad, **good)
    FileEntry(name="plain.txt", **good)


def test_entry_rejects_bad_digest():
    with pytest.raises(ValueError):
        FileEntry(index=0, name="a", size_bytes=1, sha256="ZZ" * 32)


def test_index_requires_gapless_ordinals():
    e0 = FileEntry(index=0, name="a", size_bytes=0, sha256=SHA_EMPTY)
    e2 = FileEntry(index=2, name="b", size_bytes=0, sha256=SHA_EMPTY)
    with pytest.raises(ValueError):
        FileIndex(entries=(e0, e2))
    FileIndex(entries=(e0,))


def test_index_total_must_match():
    e0 = FileEntry(index=0, name="a", size_bytes=10, sha256=SHA_EMPTY)
    with pytest.raises(ValueError):
        FileIndex(entries=(e0,), total_bytes=11)
    assert FileIndex(entries=(e0,)).total_bytes == 10


def test_index_json_roundtrip_and_key_shape():
    e0 = FileEntry(index=0, name="a.bin", size_bytes=3, sha256=SHA_EMPTY, mime="text/plain")
    e1 = FileEntry(index=1, name="b.bin", size_bytes=4, sha256=SHA_EMPTY)
    index = FileIndex(entries=(e0, e1))
    obj = json.loads(index.to_json())
    assert obj["version"] == 1
    assert obj["total_bytes"] == 7
    assert obj["entries"][0]["mime"] == "text/plain"
    assert "mime" not in obj["entries"][1]  # omitted when unknown
    assert FileIndex.from_json(index.to_json()) == index


def test_index_from_json_ignores_unknown_keys():
    e0 = FileEntry(index=0, name="a", size_bytes=0, sha256=SHA_EMPTY)
    obj = json.loads(FileIndex(entries=(e0,)).to_json())
    obj["extra"] = {"nested": True}
    obj["entries"][0]["extra"] = 1
    assert FileIndex.from_json(json.dumps(obj)) == FileIndex(entries=(e0,))


_names = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), min_codepoint=48, max_codepoint=122),
    min_size=1, max_size=12,
)


@given(st.lists(st.tuples(_names, st.integers(0, 1 << 40)), min_size=0, max_size=8, unique_by=lambda t: t[0]))
def test_index_roundtrip_property(items):
    rng = random.Random(0)
    entries = tuple(
        FileEntry(index=i, name=name, size_bytes=size, sha256=f"{rng.getrandbits(256):064x}")
        for i, (name, size) in enumerate(items)
    )
    index = FileIndex(entries=entries)
    assert FileIndex.from_json(index.to_json()) == index


# --- build_file_index ---

def test_empty_index(tmp_path):
    index = build_file_index([])
    assert len(index) == 0 and index.total_bytes == 0


def test_index_digest_matches_independent_tool(tmp_path):
    f = tmp_path / "a.bin"
    f.write_bytes(b"\0" * 1048576)
    index = build_file_index([f])
    entry = index.entries[0]
    assert entry.size_bytes == 1048576
    assert entry.sha256 == SHA_1MIB_ZEROS
    # belt and braces: ask the external tool about this very file
    out = subprocess.run(["sha256sum", str(f)], capture_output=True, text=True, check=True)
    assert entry.sha256 == out.stdout.split()[0]
    assert index.total_bytes == 1048576


def test_directory_expansion_is_lexicographic(tmp_path):
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "y.txt").write_bytes(b"y")
    (tmp_path / "d" / "x.txt").write_bytes(b"x")
    (tmp_path / "d" / "sub").mkdir()
    (tmp_path / "d" / "sub" / "a.txt").write_bytes(b"a")
    index = build_file_index([tmp_path / "d"])
    assert [e.name for e in index.entries] == ["a.txt", "x.txt", "y.txt"]
    assert [e.index for e in index.entries] == [0, 1, 2]


def test_argument_order_is_preserved(tmp_path):
    b = tmp_path / "b.txt"
    a = tmp_path / "a.txt"
    b.write_bytes(b"b")
    a.write_bytes(b"a")
    index = build_file_index([b, a])
    assert [e.name for e in index.entries] == ["b.txt", "a.txt"]


def test_duplicate_relative_name_is_an_error(tmp_path):
    (tmp_path / "one").mkdir()
    (tmp_path / "two").mkdir()
    (tmp_path / "one" / "x.txt").write_bytes(b"1")
    (tmp_path / "two" / "x.txt").write_bytes(b"2")
    with pytest.raises(DuplicateName):
        build_file_index([tmp_path / "one", tmp_path / "two"])


def test_missing_path(tmp_path):
    with pytest.raises(PathNotFound):
        build_file_index([tmp_path / "nope.bin"])


def test_unreadable_path_maps_cleanly(tmp_path, monkeypatch):
    # Tests run as root, so a chmod 000 file still opens; force the failure.
    f = tmp_path / "locked.bin"
    f.write_bytes(b"x")

    def boom(path):
        raise PermissionError(13, "denied")

    monkeypatch.setattr("photon.model.hash_file", boom)
    with pytest.raises(Unreadable):
        build_file_index([f])


def test_index_is_deterministic(tmp_path):
    (tmp_path / "a.bin").write_bytes(b"aaa")
    (tmp_path / "b.bin").write_bytes(b"bbb")
    first = build_file_index([tmp_path]).to_json()
    second = build_file_index([tmp_path]).to_json()
    assert first == second


def test_indexed_sources_alignment(tmp_path):
    paths = [tmp_path / "a.bin", tmp_path / "b.bin"]
    for p in paths:
        p.write_bytes(p.name.encode())
    index, sources = indexed_sources(paths)
    assert list(sources) == paths
    assert [e.name for e in index.entries] == ["a.bin", "b.bin"]


def test_hash_file_streams(tmp_path):
    f = tmp_path / "f.bin"
    f.write_bytes(b"")
    assert hash_file(f) == SHA_EMPTY
