#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "re2gec/corpus.hpp"
#include "re2gec/segmentation.hpp"

namespace re2gec {

class Embedder;

class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Ranking { tfidf_cosine, bm25, embedding };
enum class IndexField { explanation, source };

std::string_view to_string(Ranking ranking);
std::optional<Ranking> parse_ranking(std::string_view name);
std::string_view to_string(IndexField field);
std::optional<IndexField> parse_index_field(std::string_view name);

struct IndexConfig {
  std::size_t ngram_min = 2;
  std::size_t ngram_max = 3;
  Ranking ranking = Ranking::tfidf_cosine;
  double bm25_k1 = 1.5;
  double bm25_b = 0.75;
  SegmenterConfig segmenter;
};

void validate(const IndexConfig& config);

// Every n-gram of the segmented text in order of occurrence, repeats kept.
// Character tokens are concatenated; other tokens are joined by a space.
std::vector<std::string> extract_ngrams(std::string_view text, const IndexConfig& config);

// An indexed record as it is shown to the model: id plus the sentence pair.
struct Example {
  std::string id;
  std::string source;
  std::string target;

  friend bool operator==(const Example&, const Example&) = default;
};

std::vector<Example> examples_from(const Corpus& corpus);

struct Hit {
  std::string id;
  double score = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

// Hits are ordered by score descending, then id ascending. When gate_open is
// false the hits are diagnostic only and must not reach a prompt.
struct RetrievalResult {
  std::vector<Hit> hits;
  bool gate_open = false;

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

struct SparseEntry {
  std::uint32_t column = 0;
  std::uint32_t count = 0;
  double weight = 0.0;  // tf * idf, L2-normalized over the document
};

using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// TF-IDF (and BM25) index over one text field of a corpus. Vocabulary columns
// are in lexicographic order; idf(g) = ln((1 + N) / (1 + df(g))) + 1.
// Immutable once built; queries may run concurrently.
class ExplanationIndex {
 public:
  const IndexConfig& config() const { return config_; }
  IndexField field() const { return field_; }
  std::size_t size() const { return doc_ids_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<double>& idf() const { return idf_; }
  const std::vector<std::vector<SparseEntry>>& doc_vectors() const { return doc_vectors_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<Example>& examples() const { return examples_; }
  const std::vector<std::size_t>& doc_lengths() const { return doc_lengths_; }
  double avg_doc_length() const { return avg_doc_length_; }
  bool has_embeddings() const { return !embeddings_.empty(); }

  std::optional<std::uint32_t> column(std::string_view ngram) const;
  const Example* example(std::string_view id) const;

  // Normalized tf-idf vector over in-vocabulary n-grams, sorted by column.
  // Zero vector (empty) when the text has no known n-gram.
  SparseVector vectorize(std::string_view text) const;

  // TF-IDF cosine similarity in [0, 1]; 0 if either side is the zero vector.
  double similarity(std::string_view a, std::string_view b) const;

  // Top-k over all documents not in `exclude`. Under bm25 the gate is open
  // whenever a hit exists. Embedding ranking needs `embedder`.
  RetrievalResult query(std::string_view text, std::size_t k, double theta,
                        const std::set<std::string>& exclude = {},
                        Embedder* embedder = nullptr) const;

  std::string serialize() const;
  static ExplanationIndex deserialize(std::string_view data);
  void save(const std::string& path) const;
  static ExplanationIndex load(const std::string& path);

 private:
  friend ExplanationIndex build_index(const Corpus&, IndexField, const IndexConfig&, Embedder*);

  void finalize();
  std::vector<double> score_all(std::string_view text, Embedder* embedder) const;

  IndexConfig config_;
  IndexField field_ = IndexField::explanation;
  std::vector<std::string> vocabulary_;
  std::vector<double> idf_;
  std::vector<std::vector<SparseEntry>> doc_vectors_;
  std::vector<std::string> doc_ids_;
  std::vector<Example> examples_;
  std::vector<std::vector<double>> embeddings_;  // unit length, embedding ranking only

  // derived
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;  // column -> (doc, weight)
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> count_postings_;
  std::vector<double> bm25_idf_;
  std::vector<std::size_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
};

ExplanationIndex build_index(const Corpus& corpus, IndexField field, const IndexConfig& config,
                             Embedder* embedder = nullptr);

}  // namespace re2gec
