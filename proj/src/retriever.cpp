#include "re2gec/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "re2gec/llm_backend.hpp"

namespace re2gec {

using json = nlohmann::json;

std::string_view to_string(Ranking ranking) {
  switch (ranking) {
    case Ranking::tfidf_cosine: return "tfidf_cosine";
    case Ranking::bm25: return "bm25";
    case Ranking::embedding: return "embedding";
  }
  return "tfidf_cosine";
}

std::optional<Ranking> parse_ranking(std::string_view name) {
  if (name == "tfidf_cosine" || name == "tfidf") return Ranking::tfidf_cosine;
  if (name == "bm25") return Ranking::bm25;
  if (name == "embedding") return Ranking::embedding;
  return std::nullopt;
}

std::string_view to_string(IndexField field) {
  return field == IndexField::explanation ? "explanation" : "source";
}

std::optional<IndexField> parse_index_field(std::string_view name) {
  if (name == "explanation") return IndexField::explanation;
  if (name == "source") return IndexField::source;
  return std::nullopt;
}

void validate(const IndexConfig& config) {
  if (config.ngram_min < 1 || config.ngram_min > config.ngram_max) {
    throw IndexError("n-gram range must satisfy 1 <= min <= max");
  }
  if (config.bm25_k1 < 0.0 || config.bm25_b < 0.0 || config.bm25_b > 1.0) {
    throw IndexError("bm25 parameters out of range");
  }
  validate(config.segmenter);
}

std::vector<std::string> extract_ngrams(std::string_view text, const IndexConfig& config) {
  const auto tokens = segment(text, config.segmenter).texts();
  const std::string_view joiner = config.segmenter.mode == SegmenterMode::character ? "" : " ";
  std::vector<std::string> out;
  for (std::size_t n = config.ngram_min; n <= config.ngram_max; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (std::size_t j = 1; j < n; ++j) {
        gram += joiner;
        gram += tokens[i + j];
      }
      out.push_back(std::move(gram));
    }
  }
  return out;
}

std::vector<Example> examples_from(const Corpus& corpus) {
  std::vector<Example> out;
  out.reserve(corpus.records.size());
  for (const auto& r : corpus.records) {
    out.push_back({r.id, r.source, r.targets.empty() ? r.source : r.targets.front()});
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IndexError("malformed number in index: " + s);
  return v;
}

std::size_t parse_size(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw IndexError("malformed count in index: " + s);
  }
  return std::stoull(s);
}

void normalize(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq <= 0.0) return;
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
}

std::map<std::string, std::uint32_t> count_grams(const std::vector<std::string>& grams) {
  std::map<std::string, std::uint32_t> counts;
  for (const auto& g : grams) ++counts[g];
  return counts;
}

}  // namespace

std::optional<std::uint32_t> ExplanationIndex::column(std::string_view ngram) const {
  const auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), ngram,
                                   [](const std::string& a, std::string_view b) { return a < b; });
  if (it == vocabulary_.end() || *it != ngram) return std::nullopt;
  return static_cast<std::uint32_t>(it - vocabulary_.begin());
}

const Example* ExplanationIndex::example(std::string_view id) const {
  for (const auto& e : examples_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

SparseVector ExplanationIndex::vectorize(std::string_view text) const {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& g : extract_ngrams(text, config_)) {
    if (auto col = column(g)) ++counts[*col];
  }
  SparseVector v;
  v.reserve(counts.size());
  double sq = 0.0;
  for (const auto& [col, count] : counts) {
    const double w = static_cast<double>(count) * idf_[col];
    sq += w * w;
    v.emplace_back(col, w);
  }
  if (sq > 0.0) {
    const double norm = std::sqrt(sq);
    for (auto& [col, w] : v) w /= norm;
  }
  return v;
}

double ExplanationIndex::similarity(std::string_view a, std::string_view b) const {
  const auto va = vectorize(a);
  const auto vb = vectorize(b);
  double dot = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < va.size() && j < vb.size()) {
    if (va[i].first < vb[j].first) ++i;
    else if (vb[j].first < va[i].first) ++j;
    else dot += va[i++].second * vb[j++].second;
  }
  return std::clamp(dot, 0.0, 1.0);
}

void ExplanationIndex::finalize() {
  const std::size_t vocab = vocabulary_.size();
  const std::size_t docs = doc_ids_.size();
  postings_.assign(vocab, {});
  count_postings_.assign(vocab, {});
  doc_lengths_.assign(docs, 0);
  for (std::size_t d = 0; d < docs; ++d) {
    for (const auto& e : doc_vectors_[d]) {
      if (e.column >= vocab) throw IndexError("document vector column out of range");
      postings_[e.column].emplace_back(static_cast<std::uint32_t>(d), e.weight);
      count_postings_[e.column].emplace_back(static_cast<std::uint32_t>(d), e.count);
      doc_lengths_[d] += e.count;
    }
  }
  double total = 0.0;
  for (auto len : doc_lengths_) total += static_cast<double>(len);
  avg_doc_length_ = docs == 0 ? 0.0 : total / static_cast<double>(docs);

  bm25_idf_.assign(vocab, 0.0);
  const double n = static_cast<double>(docs);
  for (std::size_t c = 0; c < vocab; ++c) {
    const double df = static_cast<double>(count_postings_[c].size());
    bm25_idf_[c] = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }
}

ExplanationIndex build_index(const Corpus& corpus, IndexField field, const IndexConfig& config,
                             Embedder* embedder) {
  validate(config);
  ExplanationIndex index;
  index.config_ = config;
  index.field_ = field;

  std::vector<std::string> texts;
  std::vector<std::map<std::string, std::uint32_t>> doc_counts;
  std::map<std::string, std::uint32_t> df;
  std::set<std::string> seen_ids;
  for (const auto& r : corpus.records) {
    std::string text;
    if (field == IndexField::explanation) {
      if (!r.explanation || r.explanation->empty()) {
        throw IndexError("record " + r.id + " has no explanation");
      }
      text = *r.explanation;
    } else {
      if (r.source.empty()) throw IndexError("record " + r.id + " has no source");
      text = r.source;
    }
    if (!seen_ids.insert(r.id).second) throw IndexError("duplicate document id " + r.id);
    auto counts = count_grams(extract_ngrams(text, config));
    for (const auto& [gram, count] : counts) ++df[gram];
    doc_counts.push_back(std::move(counts));
    texts.push_back(std::move(text));
    index.doc_ids_.push_back(r.id);
  }
  index.examples_ = examples_from(corpus);

  const double n = static_cast<double>(doc_counts.size());
  index.vocabulary_.reserve(df.size());
  index.idf_.reserve(df.size());
  for (const auto& [gram, count] : df) {
    index.vocabulary_.push_back(gram);
    index.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }

  for (const auto& counts : doc_counts) {
    std::vector<SparseEntry> entries;
    entries.reserve(counts.size());
    double sq = 0.0;
    for (const auto& [gram, count] : counts) {
      const auto col = *index.column(gram);
      const double w = static_cast<double>(count) * index.idf_[col];
      sq += w * w;
      entries.push_back({col, count, w});
    }
    if (sq > 0.0) {
      const double norm = std::sqrt(sq);
      for (auto& e : entries) e.weight /= norm;
    }
    index.doc_vectors_.push_back(std::move(entries));
  }

  if (config.ranking == Ranking::embedding) {
    if (!embedder) throw IndexError("embedding ranking requires an embedding endpoint");
    index.embeddings_ = embedder->embed(texts);
    if (index.embeddings_.size() != texts.size()) throw IndexError("embedder returned wrong count");
    for (auto& v : index.embeddings_) normalize(v);
  }

  index.finalize();
  return index;
}

std::vector<double> ExplanationIndex::score_all(std::string_view text, Embedder* embedder) const {
  std::vector<double> scores(size(), 0.0);
  switch (config_.ranking) {
    case Ranking::tfidf_cosine: {
      for (const auto& [col, w] : vectorize(text)) {
        for (const auto& [doc, dw] : postings_[col]) scores[doc] += w * dw;
      }
      for (double& s : scores) s = std::clamp(s, 0.0, 1.0);
      break;
    }
    case Ranking::bm25: {
      std::map<std::uint32_t, std::uint32_t> query_counts;
      for (const auto& g : extract_ngrams(text, config_)) {
        if (auto col = column(g)) ++query_counts[*col];
      }
      const double k1 = config_.bm25_k1;
      const double b = config_.bm25_b;
      for (const auto& [col, qtf] : query_counts) {
        for (const auto& [doc, tf] : count_postings_[col]) {
          const double length_ratio =
              avg_doc_length_ > 0.0 ? static_cast<double>(doc_lengths_[doc]) / avg_doc_length_ : 1.0;
          const double f = static_cast<double>(tf);
          scores[doc] += static_cast<double>(qtf) * bm25_idf_[col] * f * (k1 + 1.0) /
                         (f + k1 * (1.0 - b + b * length_ratio));
        }
      }
      break;
    }
    case Ranking::embedding: {
      if (!embedder) throw IndexError("embedding ranking requires an embedding endpoint");
      auto q = embedder->embed({std::string(text)});
      if (q.size() != 1) throw IndexError("embedder returned wrong count");
      normalize(q[0]);
      for (std::size_t d = 0; d < size(); ++d) {
        const auto& e = embeddings_[d];
        if (e.size() != q[0].size()) throw IndexError("embedding dimension mismatch");
        double dot = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) dot += e[i] * q[0][i];
        scores[d] = dot;
      }
      break;
    }
  }
  return scores;
}

RetrievalResult ExplanationIndex::query(std::string_view text, std::size_t k, double theta,
                                        const std::set<std::string>& exclude,
                                        Embedder* embedder) const {
  if (size() == 0) throw IndexError("query against an empty index");
  if (k < 1) throw IndexError("k must be >= 1");
  if (!(theta >= 0.0 && theta <= 1.0)) throw IndexError("theta must lie in [0, 1]");

  const auto scores = score_all(text, embedder);
  std::vector<std::uint32_t> candidates;
  candidates.reserve(size());
  for (std::uint32_t d = 0; d < size(); ++d) {
    if (!exclude.count(doc_ids_[d])) candidates.push_back(d);
  }
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return doc_ids_[a] < doc_ids_[b];
  };
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);

  RetrievalResult result;
  for (std::size_t i = 0; i < take; ++i) {
    result.hits.push_back({doc_ids_[candidates[i]], scores[candidates[i]]});
  }
  if (config_.ranking == Ranking::bm25) {
    result.gate_open = !result.hits.empty();
  } else {
    result.gate_open = !result.hits.empty() && result.hits.front().score >= theta;
  }
  return result;
}

std::string ExplanationIndex::serialize() const {
  std::string out;
  const auto line = [&](const std::string& s) {
    out += s;
    out.push_back('\n');
  };
  const auto quoted = [](const std::string& s) { return json(s).dump(); };

  line("RE2IDX 1");
  line("[config]");
  line("field " + std::string(to_string(field_)));
  line("ngram_min " + std::to_string(config_.ngram_min));
  line("ngram_max " + std::to_string(config_.ngram_max));
  line("ranking " + std::string(to_string(config_.ranking)));
  line("bm25_k1 " + format_double(config_.bm25_k1));
  line("bm25_b " + format_double(config_.bm25_b));
  line("segmenter " + std::string(to_string(config_.segmenter.mode)));
  line("segmenter_command " +
       (config_.segmenter.external_command ? quoted(*config_.segmenter.external_command) : "null"));
  line("segmenter_timeout_ms " + std::to_string(config_.segmenter.timeout.count()));

  line("[vocabulary] " + std::to_string(vocabulary_.size()));
  for (const auto& g : vocabulary_) line(quoted(g));

  line("[idf] " + std::to_string(idf_.size()));
  for (double v : idf_) line(format_double(v));

  // column:count:weight per entry
  line("[doc_vectors] " + std::to_string(doc_vectors_.size()));
  for (const auto& entries : doc_vectors_) {
    std::string row;
    for (const auto& e : entries) {
      if (!row.empty()) row.push_back(' ');
      row += std::to_string(e.column) + ":" + std::to_string(e.count) + ":" + format_double(e.weight);
    }
    line(row);
  }

  line("[doc_ids] " + std::to_string(doc_ids_.size()));
  for (const auto& id : doc_ids_) line(quoted(id));

  line("[examples] " + std::to_string(examples_.size()));
  for (const auto& e : examples_) line(json::array({e.id, e.source, e.target}).dump());

  const std::size_t dim = embeddings_.empty() ? 0 : embeddings_.front().size();
  line("[embeddings] " + std::to_string(embeddings_.size()) + " " + std::to_string(dim));
  for (const auto& v : embeddings_) {
    std::string row;
    for (double x : v) {
      if (!row.empty()) row.push_back(' ');
      row += format_double(x);
    }
    line(row);
  }
  line("[end]");
  return out;
}

ExplanationIndex ExplanationIndex::deserialize(std::string_view data) {
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos < data.size()) {
      auto nl = data.find('\n', pos);
      if (nl == std::string_view::npos) nl = data.size();
      lines.emplace_back(data.substr(pos, nl - pos));
      pos = nl + 1;
    }
  }
  std::size_t at = 0;
  const auto next = [&]() -> const std::string& {
    if (at >= lines.size()) throw IndexError("truncated index file");
    return lines[at++];
  };
  const auto expect_value = [&](const std::string& key) {
    const std::string& l = next();
    if (l.rfind(key + " ", 0) != 0) throw IndexError("expected " + key + " in index file");
    return l.substr(key.size() + 1);
  };
  const auto section = [&](const std::string& name) {
    const std::string& l = next();
    const std::string head = "[" + name + "] ";
    if (l.rfind(head, 0) != 0) throw IndexError("expected section " + name);
    return l.substr(head.size());
  };
  const auto unquote = [](const std::string& s) {
    try {
      const auto j = json::parse(s);
      if (!j.is_string()) throw IndexError("expected string in index file");
      return j.get<std::string>();
    } catch (const json::exception&) {
      throw IndexError("malformed string in index file");
    }
  };

  if (next() != "RE2IDX 1") throw IndexError("not an index file (missing RE2IDX 1 header)");
  if (next() != "[config]") throw IndexError("expected section config");

  ExplanationIndex index;
  const auto field = parse_index_field(expect_value("field"));
  if (!field) throw IndexError("unknown index field");
  index.field_ = *field;
  index.config_.ngram_min = parse_size(expect_value("ngram_min"));
  index.config_.ngram_max = parse_size(expect_value("ngram_max"));
  const auto ranking = parse_ranking(expect_value("ranking"));
  if (!ranking) throw IndexError("unknown ranking");
  index.config_.ranking = *ranking;
  index.config_.bm25_k1 = parse_double(expect_value("bm25_k1"));
  index.config_.bm25_b = parse_double(expect_value("bm25_b"));
  const auto mode = parse_segmenter_mode(expect_value("segmenter"));
  if (!mode) throw IndexError("unknown segmenter mode");
  index.config_.segmenter.mode = *mode;
  const std::string command = expect_value("segmenter_command");
  if (command != "null") index.config_.segmenter.external_command = unquote(command);
  index.config_.segmenter.timeout =
      std::chrono::milliseconds(parse_size(expect_value("segmenter_timeout_ms")));
  validate(index.config_);

  const std::size_t vocab = parse_size(section("vocabulary"));
  for (std::size_t i = 0; i < vocab; ++i) index.vocabulary_.push_back(unquote(next()));
  if (!std::is_sorted(index.vocabulary_.begin(), index.vocabulary_.end())) {
    throw IndexError("index vocabulary is not sorted");
  }
  if (parse_size(section("idf")) != vocab) throw IndexError("idf size mismatch");
  for (std::size_t i = 0; i < vocab; ++i) index.idf_.push_back(parse_double(next()));

  const std::size_t docs = parse_size(section("doc_vectors"));
  for (std::size_t d = 0; d < docs; ++d) {
    std::vector<SparseEntry> entries;
    std::istringstream row(next());
    std::string item;
    while (row >> item) {
      const auto a = item.find(':');
      const auto b = item.find(':', a + 1);
      if (a == std::string::npos || b == std::string::npos) throw IndexError("malformed doc vector");
      entries.push_back({static_cast<std::uint32_t>(parse_size(item.substr(0, a))),
                         static_cast<std::uint32_t>(parse_size(item.substr(a + 1, b - a - 1))),
                         parse_double(item.substr(b + 1))});
    }
    index.doc_vectors_.push_back(std::move(entries));
  }
  if (parse_size(section("doc_ids")) != docs) throw IndexError("doc_ids size mismatch");
  for (std::size_t d = 0; d < docs; ++d) index.doc_ids_.push_back(unquote(next()));

  if (parse_size(section("examples")) != docs) throw IndexError("examples size mismatch");
  for (std::size_t d = 0; d < docs; ++d) {
    try {
      const auto j = json::parse(next());
      index.examples_.push_back(
          {j.at(0).get<std::string>(), j.at(1).get<std::string>(), j.at(2).get<std::string>()});
    } catch (const json::exception&) {
      throw IndexError("malformed example row");
    }
  }

  std::istringstream head(section("embeddings"));
  std::size_t count = 0;
  std::size_t dim = 0;
  if (!(head >> count >> dim)) throw IndexError("malformed embeddings header");
  for (std::size_t d = 0; d < count; ++d) {
    std::vector<double> v;
    std::istringstream row(next());
    std::string item;
    while (row >> item) v.push_back(parse_double(item));
    if (v.size() != dim) throw IndexError("embedding dimension mismatch");
    index.embeddings_.push_back(std::move(v));
  }
  if (next() != "[end]") throw IndexError("missing [end] marker");
  if (index.config_.ranking == Ranking::embedding && index.embeddings_.size() != docs) {
    throw IndexError("embedding index lacks document embeddings");
  }
  index.finalize();
  return index;
}

void ExplanationIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IndexError("cannot write index " + path);
  out << serialize();
}

ExplanationIndex ExplanationIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexError("cannot open index " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace re2gec
