"""Text and image feature extraction: tokenization, n-grams, vocabulary,
TF-IDF weighting, embedding tables, image scaling."""
import io

import numpy as np
import numpy.testing as npt
import pytest

from rmdl import features as ft

EXAMPLE = "In this paper we introduced this technique"


class TestTokenize:
    def test_lowercase_split(self):
        assert ft.tokenize("In this paper") == ["in", "this", "paper"]

    def test_empty(self):
        assert ft.tokenize("") == []
        assert ft.tokenize("   \t\n") == []

    def test_punctuation_splits(self):
        assert ft.tokenize("don't stop") == ["don", "t", "stop"]

    def test_digits_kept(self):
        assert ft.tokenize("top-10 results, 2x") == ["top", "10", "results", "2x"]


class TestNgramCounts:
    def test_unigram_example(self):
        counts = ft.ngram_counts(ft.tokenize(EXAMPLE), 1)
        assert counts == {"in": 1, "this": 2, "paper": 1, "we": 1,
                          "introduced": 1, "technique": 1}

    def test_bigram_example(self):
        counts = ft.ngram_counts(ft.tokenize(EXAMPLE), 2)
        expected_bigrams = {"in this": 1, "this paper": 1, "paper we": 1,
                            "we introduced": 1, "introduced this": 1,
                            "this technique": 1}
        for key, val in expected_bigrams.items():
            assert counts[key] == val
        assert counts["this"] == 2

    def test_single_term_has_no_bigrams(self):
        assert ft.ngram_counts(["alone"], 2) == {"alone": 1}

    def test_total_unigrams_equal_token_count(self):
        tokens = ft.tokenize("a b a c b a")
        counts = ft.ngram_counts(tokens, 1)
        assert sum(counts.values()) == len(tokens)

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            ft.ngram_counts(["a"], 0)


class TestVocabulary:
    def test_first_occurrence_order(self):
        vocab = ft.Vocabulary.fit([["b", "a"], ["a", "c"]])
        assert vocab.terms == ["b", "a", "c"]
        assert vocab.index == {"b": 1, "a": 2, "c": 3}

    def test_zero_index_reserved(self):
        vocab = ft.Vocabulary.fit([["x"]])
        assert vocab.index["x"] == 1
        assert vocab.size == 2

    def test_df_counts_documents_not_occurrences(self):
        vocab = ft.Vocabulary.fit([["a", "a", "a"], ["a", "b"]])
        assert vocab.df[vocab.index["a"] - 1] == 2
        assert vocab.df[vocab.index["b"] - 1] == 1

    def test_min_df_filters(self):
        vocab = ft.Vocabulary.fit([["a", "b"], ["a", "c"]], min_df=2)
        assert vocab.terms == ["a"]

    def test_max_size_keeps_most_frequent(self):
        docs = [["a", "b"], ["a", "c"], ["a", "b"]]
        vocab = ft.Vocabulary.fit(docs, max_size=2)
        assert vocab.terms == ["a", "b"]

    def test_fitting_twice_identical(self):
        docs = [["q", "w", "e"], ["w", "q"]]
        a = ft.Vocabulary.fit(docs)
        b = ft.Vocabulary.fit(docs)
        assert a.terms == b.terms and a.df == b.df

    def test_encode_pads_truncates_unknowns(self):
        vocab = ft.Vocabulary.fit([["a", "b"]])
        npt.assert_array_equal(vocab.encode(["a", "zzz", "b"], 5),
                               [1, 0, 2, 0, 0])
        npt.assert_array_equal(vocab.encode(["b", "a", "b"], 2), [2, 1])


class TestTfidf:
    def test_everywhere_term_has_idf_one(self):
        vocab = ft.tfidf_fit([["a"], ["a"], ["a"]])
        npt.assert_allclose(vocab.idf(), [1.0], rtol=1e-15)

    def test_frozen_two_doc_oracle(self):
        vocab = ft.tfidf_fit([["a", "b", "a"], ["b", "c"]])
        npt.assert_allclose(vocab.idf(),
                            [1.4054651081081644, 1.0, 1.4054651081081644],
                            rtol=1e-15)
        mat = ft.tfidf_transform([["a", "b", "a"], ["b", "c"]], vocab)
        npt.assert_allclose(mat[0], [0.9421556246632359, 0.33517574332792605, 0.0],
                            rtol=1e-14)
        npt.assert_allclose(mat[1], [0.0, 0.5797386715376657, 0.8148024746671689],
                            rtol=1e-14)

    def test_rows_unit_norm(self):
        docs = [["x", "y"], ["y", "z", "z"], ["x"]]
        vocab = ft.tfidf_fit(docs)
        mat = ft.tfidf_transform(docs, vocab)
        npt.assert_allclose(np.linalg.norm(mat, axis=1), np.ones(3), atol=1e-12)

    def test_unknown_terms_ignored_and_zero_rows_stay_zero(self):
        vocab = ft.tfidf_fit([["a"]])
        mat = ft.tfidf_transform([["nope"], []], vocab)
        npt.assert_array_equal(mat, np.zeros((2, 1)))

    def test_empty_vocab_transform_errors(self):
        with pytest.raises(ValueError):
            ft.tfidf_transform([["a"]], ft.Vocabulary())

    def test_bigram_features(self):
        docs = [["big", "cat"], ["big", "dog"]]
        vocab = ft.tfidf_fit(docs, n_max=2)
        assert "big cat" in vocab.index and "big dog" in vocab.index
        mat = ft.tfidf_transform(docs, vocab)
        assert mat[0, vocab.index["big cat"] - 1] > 0
        assert mat[0, vocab.index["big dog"] - 1] == 0


class TestGlove:
    def test_load_from_stream(self):
        table = ft.glove_load(io.StringIO("the 0.1 0.2\ncat 0.3 -0.4\n"))
        assert table.dim == 2
        npt.assert_allclose(table.lookup("the"), [0.1, 0.2])
        npt.assert_allclose(table.lookup("cat"), [0.3, -0.4])

    def test_unknown_term_is_zero_vector(self):
        table = ft.glove_load(io.StringIO("the 0.1 0.2\n"))
        npt.assert_array_equal(table.lookup("zebra"), [0.0, 0.0])

    def test_dimension_mismatch_names_line(self):
        with pytest.raises(ValueError, match="line 2"):
            ft.glove_load(io.StringIO("a 0.1 0.2\nb 0.1 0.2 0.3\n"))

    def test_empty_input_errors(self):
        with pytest.raises(ValueError):
            ft.glove_load(io.StringIO(""))

    def test_load_from_path(self, tmp_path):
        p = tmp_path / "vecs.txt"
        p.write_text("word 1.5 2.5\n")
        table = ft.glove_load(str(p))
        npt.assert_allclose(table.lookup("word"), [1.5, 2.5])


class TestEmbedDocument:
    def table(self):
        return ft.EmbeddingTable(2, {"a": np.array([1.0, 2.0]),
                                     "b": np.array([3.0, 4.0])})

    def test_rows_padding(self):
        out = ft.embed_document(["a", "b"], self.table(), 4)
        npt.assert_array_equal(out, [[1, 2], [3, 4], [0, 0], [0, 0]])

    def test_truncation(self):
        out = ft.embed_document(["a", "b", "a", "b", "a"], self.table(), 3)
        npt.assert_array_equal(out, [[1, 2], [3, 4], [1, 2]])

    def test_empty_doc_all_zero(self):
        npt.assert_array_equal(ft.embed_document([], self.table(), 2),
                               np.zeros((2, 2)))

    def test_unknown_token_zero_row(self):
        out = ft.embed_document(["mystery"], self.table(), 1)
        npt.assert_array_equal(out, np.zeros((1, 2)))


class TestImages:
    def test_normalize_bounds(self):
        x = np.array([[0, 51, 255]], dtype=np.uint8)
        npt.assert_allclose(ft.normalize_image(x), [[0.0, 0.2, 1.0]], rtol=1e-15)

    def test_normalize_dtype(self):
        out = ft.normalize_image(np.zeros((2, 2), dtype=np.uint8))
        assert out.dtype == np.float64


class TestEncodeDocuments:
    def test_matrix_shape_and_content(self):
        vocab = ft.Vocabulary.fit([["a", "b"], ["c"]])
        mat = ft.encode_documents([["a"], ["c", "b"]], vocab, 3)
        npt.assert_array_equal(mat, [[1, 0, 0], [3, 2, 0]])
        assert mat.dtype == np.int64

    def test_bad_max_len(self):
        with pytest.raises(ValueError):
            ft.encode_documents([["a"]], ft.Vocabulary.fit([["a"]]), 0)
