def cross_topic_pair(base_snapshot, function_words, vocab):
    """Pick a (donor, receptor) pair from two different generated topics.

    Generated documents are single-topic, so union-find over co-occurring
    content words recovers the topic partition exactly.
    """
    fw = set(function_words)
    parent = {}

    def find(w):
        parent.setdefault(w, w)
        while parent[w] != w:
            parent[w] = parent[parent[w]]
            w = parent[w]
        return w

    for doc in base_snapshot.documents():
        content = [t for t in doc if t not in fw]
        for a, b in zip(content, content[1:]):
            parent[find(a)] = find(b)
    groups = {}
    for w in vocab.words:
        if w not in fw:
            groups.setdefault(find(w), []).append(w)
    first, second = sorted(groups.values(), key=len, reverse=True)[:2]
    return first[2], second[2]
