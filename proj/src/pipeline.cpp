#include "re2gec/pipeline.hpp"

#include <chrono>
#include <map>
#include <random>
#include <set>

#include "re2gec/parallel.hpp"
#include "re2gec/utf8.hpp"

namespace re2gec {

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(std::string(name) + " stage: " + e.what());
  }
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

bool gate_for(const RetrievalResult& hits, Ranking ranking, double theta) {
  if (hits.hits.empty()) return false;
  if (ranking == Ranking::bm25) return true;
  return hits.hits.front().score >= theta;
}

nlohmann::ordered_json hits_json(const RetrievalResult& r) {
  nlohmann::ordered_json j;
  j["gate_open"] = r.gate_open;
  auto items = nlohmann::ordered_json::array();
  for (const auto& h : r.hits) items.push_back({{"id", h.id}, {"score", h.score}});
  j["hits"] = std::move(items);
  return j;
}

}  // namespace

void validate(const Re2Config& config) {
  if (config.k < 1) throw PipelineError("k must be >= 1");
  if (!(config.theta >= 0.0 && config.theta <= 1.0)) {
    throw PipelineError("theta must lie in [0, 1]");
  }
  validate(config.decoding);
}

std::string_view to_string(PromptMode mode) {
  return mode == PromptMode::with_examples ? "with_examples" : "without_examples";
}

std::string_view to_string(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::zero_shot: return "zero_shot";
    case BaselineMode::random_k: return "random_k";
    case BaselineMode::textsim: return "textsim";
  }
  return "zero_shot";
}

std::optional<BaselineMode> parse_baseline_mode(std::string_view name) {
  if (name == "zero_shot") return BaselineMode::zero_shot;
  if (name == "random_k") return BaselineMode::random_k;
  if (name == "textsim") return BaselineMode::textsim;
  return std::nullopt;
}

nlohmann::ordered_json to_json(const CorrectionOutcome& o) {
  nlohmann::ordered_json j;
  j["id"] = o.id;
  j["input"] = o.input;
  j["explanation"] = o.explanation;
  j["hits"] = hits_json(o.hits);
  j["prompt"] = o.prompt;
  j["correction"] = o.correction;
  j["mode_used"] = std::string(to_string(o.mode_used));
  return j;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::uint64_t seed) {
  if (k > n) throw PipelineError("cannot draw " + std::to_string(k) + " of " + std::to_string(n));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> slots(n);
  for (std::size_t i = 0; i < n; ++i) slots[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(slots[i], slots[j]);
  }
  slots.resize(k);
  return slots;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

nlohmann::ordered_json SftRecord::to_json() const {
  nlohmann::ordered_json j;
  j["prompt"] = prompt;
  j["response"] = response;
  j["meta"] = {{"id", id}, {"mode", std::string(to_string(mode))}, {"example_ids", example_ids}};
  return j;
}

nlohmann::ordered_json ThresholdRow::to_json() const {
  nlohmann::ordered_json j;
  j["theta"] = theta;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f0.5"] = report.f_half;
  j["tp"] = report.tp;
  j["fp"] = report.fp;
  j["fn"] = report.fn;
  j["with_examples"] = with_examples;
  return j;
}

nlohmann::ordered_json RetrieverRow::to_json(bool with_latency) const {
  nlohmann::ordered_json j;
  j["ranking"] = std::string(to_string(ranking));
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f0.5"] = report.f_half;
  j["tp"] = report.tp;
  j["fp"] = report.fp;
  j["fn"] = report.fn;
  j["with_examples"] = with_examples;
  if (with_latency) j["mean_query_ms"] = mean_query_ms;
  return j;
}

Pipeline::Pipeline(Re2Config config, TemplateSet templates, Backend& explainer,
                   Backend& corrector, Embedder* embedder)
    : config_(std::move(config)),
      templates_(std::move(templates)),
      explainer_(&explainer),
      corrector_(&corrector),
      embedder_(embedder) {
  validate(config_);
}

std::string Pipeline::explain(const std::string& input) const {
  SentencePair pair;
  pair.source = input;
  const auto prompt = render_gee_prompt(pair, GeeVariant::input_only, templates_);
  return trim(explainer_->complete(prompt, config_.decoding));
}

std::string Pipeline::correct(const std::string& prompt, const PromptTemplate& used) const {
  return parse_correction(corrector_->complete(prompt, config_.decoding), used.answer_label());
}

std::vector<std::pair<std::string, std::string>> Pipeline::example_pairs(
    const RetrievalResult& hits, const ExplanationIndex& index) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& h : hits.hits) {
    const Example* e = index.example(h.id);
    if (!e) throw PipelineError("retrieved id " + h.id + " has no stored example");
    out.emplace_back(e->source, e->target);
  }
  return out;
}

CorrectionOutcome Pipeline::finish(const std::string& input, std::string explanation,
                                   RetrievalResult hits,
                                   std::vector<std::pair<std::string, std::string>> examples) const {
  CorrectionOutcome o;
  o.input = input;
  o.explanation = std::move(explanation);
  o.hits = std::move(hits);
  o.mode_used = examples.empty() ? PromptMode::without_examples : PromptMode::with_examples;
  o.prompt = stage("render", [&] { return render_gec_prompt(input, examples, templates_); });
  const PromptTemplate& used = examples.empty() ? templates_.gec_without_examples
                                                : templates_.gec_with_examples;
  o.correction = stage("correct", [&] { return correct(o.prompt, used); });
  return o;
}

CorrectionOutcome Pipeline::run_re2(const std::string& input, const ExplanationIndex& index) const {
  std::string explanation = stage("explain", [&] { return explain(input); });
  RetrievalResult hits = stage("retrieve", [&] {
    return index.query(explanation, config_.k, config_.theta, {}, embedder_);
  });
  auto examples = hits.gate_open ? stage("retrieve", [&] { return example_pairs(hits, index); })
                                 : std::vector<std::pair<std::string, std::string>>{};
  return finish(input, std::move(explanation), std::move(hits), std::move(examples));
}

CorrectionOutcome Pipeline::run_baseline(const std::string& input, BaselineMode mode,
                                         std::span<const Example> pool,
                                         const ExplanationIndex* source_index,
                                         std::uint64_t seed) const {
  switch (mode) {
    case BaselineMode::zero_shot:
      return finish(input, "", {}, {});
    case BaselineMode::random_k: {
      if (pool.size() < config_.k) {
        throw PipelineError("random_k needs at least " + std::to_string(config_.k) +
                            " examples, corpus has " + std::to_string(pool.size()));
      }
      RetrievalResult hits;
      std::vector<std::pair<std::string, std::string>> examples;
      for (auto i : sample_without_replacement(pool.size(), config_.k, seed)) {
        hits.hits.push_back({pool[i].id, 0.0});
        examples.emplace_back(pool[i].source, pool[i].target);
      }
      hits.gate_open = true;
      return finish(input, "", std::move(hits), std::move(examples));
    }
    case BaselineMode::textsim: {
      if (!source_index || source_index->field() != IndexField::source) {
        throw PipelineError("textsim baseline requires an index built over sources");
      }
      RetrievalResult hits = stage("retrieve", [&] {
        return source_index->query(input, config_.k, 0.0, {}, embedder_);
      });
      hits.gate_open = !hits.hits.empty();
      auto examples = stage("retrieve", [&] { return example_pairs(hits, *source_index); });
      return finish(input, "", std::move(hits), std::move(examples));
    }
  }
  throw PipelineError("unknown baseline mode");
}

std::vector<CorrectionOutcome> Pipeline::run_re2_corpus(const Corpus& inputs,
                                                        const ExplanationIndex& index) const {
  return map_bounded(inputs.records.size(), config_.jobs, [&](std::size_t i) {
    auto o = run_re2(inputs.records[i].source, index);
    o.id = inputs.records[i].id;
    return o;
  });
}

std::vector<CorrectionOutcome> Pipeline::run_baseline_corpus(const Corpus& inputs,
                                                             BaselineMode mode,
                                                             std::span<const Example> pool,
                                                             const ExplanationIndex* source_index,
                                                             std::uint64_t seed) const {
  return map_bounded(inputs.records.size(), config_.jobs, [&](std::size_t i) {
    auto o = run_baseline(inputs.records[i].source, mode, pool, source_index, derive_seed(seed, i));
    o.id = inputs.records[i].id;
    return o;
  });
}

std::vector<SftRecord> Pipeline::build_sft_data(const Corpus& train,
                                                const ExplanationIndex& index) const {
  for (const auto& r : train.records) {
    if (!r.explanation || r.explanation->empty()) {
      throw PipelineError("record " + r.id + " has no explanation");
    }
  }
  std::multimap<std::string, std::string> ids_by_source;
  for (const auto& e : index.examples()) ids_by_source.emplace(e.source, e.id);

  auto pairs = map_bounded(train.records.size(), config_.jobs, [&](std::size_t i) {
    const SentencePair& r = train.records[i];
    std::set<std::string> exclude{r.id};
    const auto [lo, hi] = ids_by_source.equal_range(r.source);
    for (auto it = lo; it != hi; ++it) exclude.insert(it->second);

    const RetrievalResult hits = stage("retrieve", [&] {
      return index.query(*r.explanation, config_.k, 0.0, exclude, embedder_);
    });
    if (hits.hits.empty()) throw PipelineError("no reference examples available for " + r.id);

    SftRecord with;
    with.id = r.id;
    with.mode = PromptMode::with_examples;
    for (const auto& h : hits.hits) with.example_ids.push_back(h.id);
    with.prompt = stage("render", [&] {
      return render_gec_prompt(r.source, example_pairs(hits, index), templates_);
    });
    with.response = r.targets.front();

    SftRecord without;
    without.id = r.id;
    without.mode = PromptMode::without_examples;
    without.prompt = stage("render", [&] { return render_gec_prompt(r.source, {}, templates_); });
    without.response = r.targets.front();
    return std::make_pair(std::move(with), std::move(without));
  });

  std::vector<SftRecord> out;
  out.reserve(pairs.size() * 2);
  for (auto& [with, without] : pairs) {
    out.push_back(std::move(with));
    out.push_back(std::move(without));
  }
  return out;
}

std::vector<ThresholdRow> Pipeline::sweep_threshold(const Corpus& dev,
                                                    const ExplanationIndex& index,
                                                    const std::vector<double>& thetas) const {
  for (double t : thetas) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw PipelineError("theta " + std::to_string(t) + " outside [0, 1]");
    }
  }
  const std::size_t n = dev.records.size();
  // Explanation and ranking do not depend on theta; only the gate does.
  const auto retrieved = map_bounded(n, config_.jobs, [&](std::size_t i) {
    Retrieved r;
    r.explanation = stage("explain", [&] { return explain(dev.records[i].source); });
    r.hits = stage("retrieve", [&] {
      return index.query(r.explanation, config_.k, 0.0, {}, embedder_);
    });
    return r;
  });

  struct Planned {
    std::string prompt;
    bool with_examples = false;
  };
  std::vector<std::vector<Planned>> plan(thetas.size(), std::vector<Planned>(n));
  std::map<std::string, bool> unique_prompts;  // prompt -> uses examples
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool open = gate_for(retrieved[i].hits, index.config().ranking, thetas[t]);
      const auto examples = open ? example_pairs(retrieved[i].hits, index)
                                 : std::vector<std::pair<std::string, std::string>>{};
      auto prompt = stage("render", [&] {
        return render_gec_prompt(dev.records[i].source, examples, templates_);
      });
      unique_prompts.emplace(prompt, open);
      plan[t][i] = {std::move(prompt), open};
    }
  }

  std::vector<std::pair<std::string, bool>> prompts(unique_prompts.begin(), unique_prompts.end());
  const auto answers = map_bounded(prompts.size(), config_.jobs, [&](std::size_t i) {
    const auto& used = prompts[i].second ? templates_.gec_with_examples
                                         : templates_.gec_without_examples;
    return stage("correct", [&] { return correct(prompts[i].first, used); });
  });
  std::map<std::string, std::string> corrections;
  for (std::size_t i = 0; i < prompts.size(); ++i) corrections[prompts[i].first] = answers[i];

  std::vector<ThresholdRow> rows;
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    std::vector<ScoringItem> items;
    ThresholdRow row;
    row.theta = thetas[t];
    for (std::size_t i = 0; i < n; ++i) {
      items.push_back({dev.records[i].source, corrections.at(plan[t][i].prompt),
                       dev.records[i].targets});
      row.with_examples += plan[t][i].with_examples;
    }
    row.report = score_corpus(items);
    rows.push_back(row);
  }
  return rows;
}

std::vector<RetrieverRow> Pipeline::compare_retrievers(const Corpus& dev, const Corpus& examples,
                                                       const IndexConfig& base,
                                                       const std::vector<Ranking>& rankings) const {
  for (auto r : rankings) {
    if (r == Ranking::embedding && !embedder_) {
      throw PipelineError("embedding ranking requires an embedding endpoint");
    }
  }
  const std::size_t n = dev.records.size();
  const auto explanations = map_bounded(n, config_.jobs, [&](std::size_t i) {
    return stage("explain", [&] { return explain(dev.records[i].source); });
  });

  std::vector<RetrieverRow> rows;
  for (auto ranking : rankings) {
    IndexConfig cfg = base;
    cfg.ranking = ranking;
    const auto index = stage("index", [&] {
      return build_index(examples, config_.retriever_field, cfg, embedder_);
    });

    std::vector<RetrievalResult> hits(n);
    double total_ms = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto start = std::chrono::steady_clock::now();
      hits[i] = stage("retrieve", [&] {
        return index.query(explanations[i], config_.k, config_.theta, {}, embedder_);
      });
      total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                      .count();
    }

    const auto outcomes = map_bounded(n, config_.jobs, [&](std::size_t i) {
      auto ex = hits[i].gate_open ? example_pairs(hits[i], index)
                                  : std::vector<std::pair<std::string, std::string>>{};
      return finish(dev.records[i].source, explanations[i], hits[i], std::move(ex));
    });

    RetrieverRow row;
    row.ranking = ranking;
    row.mean_query_ms = n == 0 ? 0.0 : total_ms / static_cast<double>(n);
    std::vector<ScoringItem> items;
    for (std::size_t i = 0; i < n; ++i) {
      items.push_back({dev.records[i].source, outcomes[i].correction, dev.records[i].targets});
      row.with_examples += outcomes[i].mode_used == PromptMode::with_examples;
    }
    row.report = score_corpus(items);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace re2gec
