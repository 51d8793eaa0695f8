from wordshift.corpus import load_snapshot
from wordshift.textgen import (GeneratorConfig, generate_corpus,
                               read_stopword_file, write_stopword_file)


def test_token_budget_exact(tmp_path):
    path = tmp_path / "c.txt"
    generate_corpus(path, GeneratorConfig(tokens=5000, seed=3))
    snap = load_snapshot(path)
    assert snap.token_count == 5000


def test_deterministic(tmp_path):
    cfg = GeneratorConfig(tokens=3000, seed=11)
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    generate_corpus(p1, cfg)
    generate_corpus(p2, cfg)
    assert p1.read_bytes() == p2.read_bytes()


def test_seed_changes_output(tmp_path):
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    generate_corpus(p1, GeneratorConfig(tokens=3000, seed=1))
    generate_corpus(p2, GeneratorConfig(tokens=3000, seed=2))
    assert p1.read_bytes() != p2.read_bytes()


def test_function_words_cover_requested_mass(tmp_path):
    path = tmp_path / "c.txt"
    fw = generate_corpus(path, GeneratorConfig(tokens=50000, seed=5,
                                               function_mass=0.4))
    fw_set = set(fw)
    snap = load_snapshot(path)
    share = sum(1 for t in snap.tokens() if t in fw_set) / snap.token_count
    assert 0.37 <= share <= 0.43


def test_topical_cooccurrence(tmp_path):
    # every document draws from one topic, so union-find over co-occurring
    # content words must recover exactly the topic partition
    path = tmp_path / "c.txt"
    cfg = GeneratorConfig(tokens=30000, seed=7, topics=4, words_per_topic=50)
    fw = set(generate_corpus(path, cfg))
    snap = load_snapshot(path)

    parent = {}

    def find(w):
        parent.setdefault(w, w)
        while parent[w] != w:
            parent[w] = parent[parent[w]]
            w = parent[w]
        return w

    for doc in snap.documents():
        content = [t for t in doc if t not in fw]
        for a, b in zip(content, content[1:]):
            parent[find(a)] = find(b)

    components = {find(w) for w in parent}
    assert len(components) == cfg.topics


def test_stopword_file_round_trip(tmp_path):
    path = tmp_path / "stop.txt"
    write_stopword_file(path, ["alpha", "beta"])
    assert read_stopword_file(path) == {"alpha", "beta"}
