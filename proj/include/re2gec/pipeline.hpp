#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "re2gec/corpus.hpp"
#include "re2gec/llm_backend.hpp"
#include "re2gec/prompting.hpp"
#include "re2gec/retriever.hpp"
#include "re2gec/scorer.hpp"

namespace re2gec {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Re2Config {
  std::size_t k = 3;
  double theta = 0.6;
  IndexField retriever_field = IndexField::explanation;
  DecodingParams decoding;
  BackendConfig backend;
  BackendConfig explainer_backend;
  std::string templates = "zh";
  std::size_t jobs = 1;
};

void validate(const Re2Config& config);

enum class PromptMode { with_examples, without_examples };

std::string_view to_string(PromptMode mode);

struct CorrectionOutcome {
  std::string id;
  std::string input;
  std::string explanation;
  RetrievalResult hits;
  std::string prompt;
  std::string correction;
  PromptMode mode_used = PromptMode::without_examples;
};

nlohmann::ordered_json to_json(const CorrectionOutcome& outcome);

enum class BaselineMode { zero_shot, random_k, textsim };

std::string_view to_string(BaselineMode mode);
std::optional<BaselineMode> parse_baseline_mode(std::string_view name);

// k distinct positions in [0, n), in draw order. Depends only on the
// arguments (mt19937_64 plus rejection sampling), never on the platform.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::uint64_t seed);

// Seed for input `index` of a corpus-level run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct SftRecord {
  std::string prompt;
  std::string response;
  std::string id;
  PromptMode mode = PromptMode::without_examples;
  std::vector<std::string> example_ids;

  nlohmann::ordered_json to_json() const;
};

struct ThresholdRow {
  double theta = 0.0;
  EvalReport report;
  std::size_t with_examples = 0;

  nlohmann::ordered_json to_json() const;
};

struct RetrieverRow {
  Ranking ranking = Ranking::tfidf_cosine;
  EvalReport report;
  double mean_query_ms = 0.0;
  std::size_t with_examples = 0;

  nlohmann::ordered_json to_json(bool with_latency = true) const;
};

// Explain -> retrieve -> correct. Backends are borrowed and must outlive the
// pipeline. Corpus-level runs emit results in input order for any `jobs`.
class Pipeline {
 public:
  Pipeline(Re2Config config, TemplateSet templates, Backend& explainer, Backend& corrector,
           Embedder* embedder = nullptr);

  const Re2Config& config() const { return config_; }
  const TemplateSet& templates() const { return templates_; }

  std::string explain(const std::string& input) const;

  CorrectionOutcome run_re2(const std::string& input, const ExplanationIndex& index) const;

  // random_k draws from `pool`; textsim needs an index built over sources.
  CorrectionOutcome run_baseline(const std::string& input, BaselineMode mode,
                                 std::span<const Example> pool,
                                 const ExplanationIndex* source_index,
                                 std::uint64_t seed) const;

  std::vector<CorrectionOutcome> run_re2_corpus(const Corpus& inputs,
                                                const ExplanationIndex& index) const;
  // Input i of a random_k run uses seed mixed with i.
  std::vector<CorrectionOutcome> run_baseline_corpus(const Corpus& inputs, BaselineMode mode,
                                                     std::span<const Example> pool,
                                                     const ExplanationIndex* source_index,
                                                     std::uint64_t seed) const;

  // 2N records: per training record one prompt with its k nearest examples
  // by explanation (itself and same-source records excluded), one without.
  std::vector<SftRecord> build_sft_data(const Corpus& train, const ExplanationIndex& index) const;

  std::vector<ThresholdRow> sweep_threshold(const Corpus& dev, const ExplanationIndex& index,
                                            const std::vector<double>& thetas) const;

  std::vector<RetrieverRow> compare_retrievers(const Corpus& dev, const Corpus& examples,
                                               const IndexConfig& base,
                                               const std::vector<Ranking>& rankings) const;

 private:
  struct Retrieved {
    std::string explanation;
    RetrievalResult hits;
  };

  std::string correct(const std::string& prompt, const PromptTemplate& used) const;
  CorrectionOutcome finish(const std::string& input, std::string explanation,
                           RetrievalResult hits,
                           std::vector<std::pair<std::string, std::string>> examples) const;
  std::vector<std::pair<std::string, std::string>> example_pairs(
      const RetrievalResult& hits, const ExplanationIndex& index) const;

  Re2Config config_;
  TemplateSet templates_;
  Backend* explainer_;
  Backend* corrector_;
  Embedder* embedder_;
};

}  // namespace re2gec
