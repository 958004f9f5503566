#include "re2gec/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "re2gec/corpus.hpp"
#include "re2gec/edit_extract.hpp"
#include "re2gec/llm_backend.hpp"
#include "re2gec/parallel.hpp"
#include "re2gec/pipeline.hpp"
#include "re2gec/prompting.hpp"
#include "re2gec/retriever.hpp"
#include "re2gec/scorer.hpp"
#include "re2gec/utf8.hpp"

namespace re2gec::cli {

namespace {

struct SegmenterFlags {
  std::string mode = "character";
  std::string command;
  long long timeout_ms = 10'000;

  void add(CLI::App* app) {
    app->add_option("--segmenter", mode, "Tokenizer: character, whitespace or external")
        ->check(CLI::IsMember({"character", "whitespace", "external"}))
        ->capture_default_str();
    app->add_option("--segmenter-cmd", command, "Command line of the external segmenter");
    app->add_option("--segmenter-timeout-ms", timeout_ms, "Per-sentence timeout")
        ->capture_default_str();
  }

  SegmenterConfig build() const {
    SegmenterConfig c;
    c.mode = *parse_segmenter_mode(mode);
    if (!command.empty()) c.external_command = command;
    c.timeout = std::chrono::milliseconds(timeout_ms);
    validate(c);
    return c;
  }
};

struct IndexFlags {
  std::string field = "explanation";
  std::size_t ngram_min = 2;
  std::size_t ngram_max = 3;
  std::string ranking = "tfidf_cosine";
  double bm25_k1 = 1.5;
  double bm25_b = 0.75;
  SegmenterFlags segmenter;

  void add(CLI::App* app, bool with_field = true, bool with_ranking = true) {
    if (with_field) {
      app->add_option("--field", field, "Indexed text: explanation or source")
          ->check(CLI::IsMember({"explanation", "source"}))
          ->capture_default_str();
    }
    app->add_option("--ngram-min", ngram_min)->capture_default_str();
    app->add_option("--ngram-max", ngram_max)->capture_default_str();
    if (with_ranking) {
      app->add_option("--ranking", ranking)
          ->check(CLI::IsMember({"tfidf_cosine", "bm25", "embedding"}))
          ->capture_default_str();
    }
    app->add_option("--bm25-k1", bm25_k1)->capture_default_str();
    app->add_option("--bm25-b", bm25_b)->capture_default_str();
    segmenter.add(app);
  }

  IndexConfig build() const {
    IndexConfig c;
    c.ngram_min = ngram_min;
    c.ngram_max = ngram_max;
    c.ranking = *parse_ranking(ranking);
    c.bm25_k1 = bm25_k1;
    c.bm25_b = bm25_b;
    c.segmenter = segmenter.build();
    validate(c);
    return c;
  }
};

struct BackendFlags {
  std::string prefix;
  std::string kind = "mock";
  std::string script;
  std::string endpoint;
  std::string model;
  long long timeout_ms = 60'000;
  int attempts = 3;
  bool optional = false;

  void add(CLI::App* app, const std::string& pre, bool is_optional) {
    prefix = pre;
    optional = is_optional;
    const std::string dash = pre.empty() ? "--" : "--" + pre + "-";
    app->add_option(dash + "backend", kind, "Backend kind: mock or http")
        ->check(CLI::IsMember({"mock", "http"}))
        ->capture_default_str();
    app->add_option(dash + "script", script, "Mock script (JSON map of prompt hash to reply)");
    app->add_option(dash + "endpoint", endpoint, "OpenAI-compatible base URL");
    app->add_option(dash + "model", model, "Model name for the http backend");
    if (pre.empty()) {
      app->add_option("--timeout-ms", timeout_ms)->capture_default_str();
      app->add_option("--attempts", attempts, "Maximum attempts per request")->capture_default_str();
    }
  }

  bool given() const { return !script.empty() || !endpoint.empty(); }

  BackendConfig build(const BackendFlags* fallback = nullptr) const {
    if (optional && !given() && fallback) return fallback->build();
    BackendConfig c;
    c.kind = *parse_backend_kind(kind);
    c.script_path = script;
    c.endpoint = endpoint;
    c.model = model;
    c.timeout = std::chrono::milliseconds(fallback ? fallback->timeout_ms : timeout_ms);
    c.retry.max_attempts = fallback ? fallback->attempts : attempts;
    validate(c);
    return c;
  }
};

struct EmbedFlags {
  std::string endpoint;
  std::string model;

  void add(CLI::App* app) {
    app->add_option("--embed-endpoint", endpoint, "OpenAI-compatible base URL for embeddings");
    app->add_option("--embed-model", model, "Embedding model name");
  }

  std::unique_ptr<Embedder> build() const {
    if (endpoint.empty()) return nullptr;
    BackendConfig c;
    c.kind = BackendKind::http;
    c.endpoint = endpoint;
    c.model = model;
    return std::make_unique<HttpEmbedder>(c);
  }
};

struct DecodingFlags {
  bool sample = false;
  double temperature = 1.0;
  int beam_size = 8;
  std::optional<int> top_k;
  std::optional<double> top_p;

  void add(CLI::App* app) {
    app->add_flag("--sample", sample, "Sample instead of beam search");
    app->add_option("--temperature", temperature)->capture_default_str();
    app->add_option("--beam-size", beam_size)->capture_default_str();
    app->add_option("--top-k", top_k);
    app->add_option("--top-p", top_p);
  }

  DecodingParams build() const {
    DecodingParams p{sample, temperature, beam_size, top_k, top_p};
    validate(p);
    return p;
  }
};

struct RunFlags {
  std::size_t k = 3;
  double theta = 0.6;
  std::string templates = "zh";
  std::size_t jobs = 1;

  void add(CLI::App* app, bool with_theta = true) {
    app->add_option("--k", k, "Number of reference examples")->capture_default_str();
    if (with_theta) {
      app->add_option("--theta", theta, "Similarity gate on the best hit")->capture_default_str();
    }
    app->add_option("--templates", templates, "Builtin template set (zh, en) or a directory")
        ->capture_default_str();
    app->add_option("--jobs", jobs, "Maximum requests in flight")->capture_default_str();
  }
};

void add_out(CLI::App* app, std::string& out) {
  app->add_option("--out", out, "Output file (default: standard output)");
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot write " + path);
    }
    stream_ = file_ ? file_.get() : &fallback;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

template <class Json>
void write_line(std::ostream& os, const Json& j) {
  os << j.dump() << '\n';
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Plain text (one hypothesis per line) or an outcome log (.jsonl).
std::vector<std::string> read_hypotheses(const std::string& path) {
  auto lines = read_lines(path);
  if (std::filesystem::path(path).extension() != ".jsonl") return lines;
  std::vector<std::string> out;
  for (const auto& l : lines) {
    if (l.empty()) continue;
    out.push_back(nlohmann::json::parse(l).at("correction").get<std::string>());
  }
  return out;
}

std::vector<ScoringItem> scoring_items(const Corpus& gold, const std::vector<std::string>& hyps) {
  if (hyps.size() != gold.records.size()) {
    throw std::runtime_error("hypothesis count " + std::to_string(hyps.size()) +
                             " does not match source count " + std::to_string(gold.records.size()));
  }
  std::vector<ScoringItem> items;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    items.push_back({gold.records[i].source, hyps[i], gold.records[i].targets});
  }
  return items;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explanation-based example retrieval for grammatical error correction", "re2gec"};
  app.require_subcommand(1);
  // Accepted after any subcommand; keys go under a [subcommand] table.
  app.set_config("--config", "", "TOML/INI experiment manifest; command-line flags win");
  app.fallthrough(true);

  std::function<void()> action;
  std::string out_path;
  bool strict = false;
  const auto load_options = [&] {
    LoadOptions o;
    o.strict = strict;
    o.on_warning = [&](const std::string& m) { err << "warning: " << m << '\n'; };
    return o;
  };
  const auto add_common = [&](CLI::App* sub) {
    add_out(sub, out_path);
    sub->add_flag("--strict", strict, "Reject unknown corpus fields");
  };

  // extract-edits
  std::string ee_src, ee_tgt, ee_in;
  SegmenterFlags ee_seg;
  auto* ee = app.add_subcommand("extract-edits", "Edit script between source and target");
  add_common(ee);
  ee->add_option("--src", ee_src, "Source sentence");
  ee->add_option("--tgt", ee_tgt, "Target sentence");
  ee->add_option("--in", ee_in, "Corpus whose edits are (re)derived for every target");
  ee_seg.add(ee);
  ee->callback([&] {
    action = [&] {
      const auto seg = ee_seg.build();
      Output o(out_path, out);
      if (!ee_in.empty()) {
        Corpus c = load_corpus(ee_in, CorpusKind::gec, load_options());
        for (auto& r : c.records) {
          std::vector<EditList> lists;
          for (const auto& t : r.targets) lists.push_back(extract_edits(r.source, t, seg));
          r.edits = std::move(lists);
        }
        *o << serialize_corpus(c);
      } else {
        write_line(*o, edits_to_json(extract_edits(ee_src, ee_tgt, seg)));
      }
    };
  });

  // build-index
  std::string bi_in;
  IndexFlags bi_index;
  EmbedFlags bi_embed;
  auto* bi = app.add_subcommand("build-index", "Index explanations (or sources) of a corpus");
  add_common(bi);
  bi->add_option("--in", bi_in, "Corpus (JSON lines)")->required();
  bi_index.add(bi);
  bi_embed.add(bi);
  bi->callback([&] {
    action = [&] {
      if (out_path.empty()) throw std::runtime_error("build-index requires --out");
      const Corpus c = load_corpus(bi_in, CorpusKind::gee, load_options());
      auto embedder = bi_embed.build();
      build_index(c, *parse_index_field(bi_index.field), bi_index.build(), embedder.get())
          .save(out_path);
    };
  });

  // query
  std::string q_index, q_text;
  std::size_t q_k = 3;
  double q_theta = 0.6;
  std::vector<std::string> q_exclude;
  EmbedFlags q_embed;
  auto* q = app.add_subcommand("query", "Top-k examples for a text");
  add_common(q);
  q->add_option("--index", q_index)->required();
  q->add_option("--text", q_text)->required();
  q->add_option("--k", q_k)->capture_default_str();
  q->add_option("--theta", q_theta)->capture_default_str();
  q->add_option("--exclude", q_exclude, "Document ids to skip");
  q_embed.add(q);
  q->callback([&] {
    action = [&] {
      const auto index = ExplanationIndex::load(q_index);
      auto embedder = q_embed.build();
      const auto r = index.query(q_text, q_k, q_theta, {q_exclude.begin(), q_exclude.end()},
                                 embedder.get());
      nlohmann::ordered_json j;
      j["gate_open"] = r.gate_open;
      j["hits"] = nlohmann::ordered_json::array();
      for (const auto& h : r.hits) j["hits"].push_back({{"id", h.id}, {"score", h.score}});
      Output o(out_path, out);
      write_line(*o, j);
    };
  });

  // explain
  std::string ex_in, ex_variant = "with_edits";
  BackendFlags ex_backend;
  DecodingFlags ex_decoding;
  RunFlags ex_run;
  SegmenterFlags ex_seg;
  auto* ex = app.add_subcommand("explain", "Generate grammatical error explanations");
  add_common(ex);
  ex->add_option("--in", ex_in)->required();
  ex->add_option("--variant", ex_variant)
      ->check(CLI::IsMember({"with_edits", "with_rough_explanation", "input_only"}))
      ->capture_default_str();
  ex_backend.add(ex, "", false);
  ex_decoding.add(ex);
  ex->add_option("--templates", ex_run.templates)->capture_default_str();
  ex->add_option("--jobs", ex_run.jobs)->capture_default_str();
  ex_seg.add(ex);
  ex->callback([&] {
    action = [&] {
      Corpus c = load_corpus(ex_in, CorpusKind::gee, load_options());
      const auto variant = *parse_gee_variant(ex_variant);
      const auto seg = ex_seg.build();
      const auto templates = TemplateSet::resolve(ex_run.templates);
      const auto params = ex_decoding.build();
      auto backend = make_backend(ex_backend.build());
      for (auto& r : c.records) {
        if (variant != GeeVariant::input_only && !r.edits) {
          std::vector<EditList> lists;
          for (const auto& t : r.targets) lists.push_back(extract_edits(r.source, t, seg));
          r.edits = std::move(lists);
        }
      }
      const auto rows = map_bounded(c.records.size(), ex_run.jobs, [&](std::size_t i) {
        const auto prompt = render_gee_prompt(c.records[i], variant, templates);
        nlohmann::ordered_json j;
        j["id"] = c.records[i].id;
        j["prompt"] = prompt;
        j["explanation"] = trim(backend->complete(prompt, params));
        return j;
      });
      Output o(out_path, out);
      for (const auto& j : rows) write_line(*o, j);
    };
  });

  // correct
  std::string co_in, co_index;
  BackendFlags co_backend, co_explainer;
  DecodingFlags co_decoding;
  RunFlags co_run;
  EmbedFlags co_embed;
  auto* co = app.add_subcommand("correct", "Explain, retrieve and correct each input sentence");
  add_common(co);
  co->add_option("--in", co_in, "Input corpus (JSON lines)")->required();
  co->add_option("--index", co_index, "Explanation index")->required();
  co_backend.add(co, "", false);
  co_explainer.add(co, "explainer", true);
  co_decoding.add(co);
  co_run.add(co);
  co_embed.add(co);
  co->callback([&] {
    action = [&] {
      const Corpus c = load_corpus(co_in, CorpusKind::gec, load_options());
      const auto index = ExplanationIndex::load(co_index);
      auto corrector = make_backend(co_backend.build());
      auto explainer = make_backend(co_explainer.build(&co_backend));
      auto embedder = co_embed.build();
      Re2Config cfg;
      cfg.k = co_run.k;
      cfg.theta = co_run.theta;
      cfg.decoding = co_decoding.build();
      cfg.jobs = co_run.jobs;
      cfg.templates = co_run.templates;
      Pipeline p(cfg, TemplateSet::resolve(co_run.templates), *explainer, *corrector, embedder.get());
      const auto outcomes = p.run_re2_corpus(c, index);
      Output o(out_path, out);
      for (const auto& oc : outcomes) write_line(*o, to_json(oc));
    };
  });

  // baseline
  std::string ba_in, ba_mode = "zero_shot", ba_examples, ba_index;
  std::uint64_t ba_seed = 0;
  BackendFlags ba_backend;
  DecodingFlags ba_decoding;
  RunFlags ba_run;
  auto* ba = app.add_subcommand("baseline", "Zero-shot, random few-shot or text-similarity runs");
  add_common(ba);
  ba->add_option("--in", ba_in)->required();
  ba->add_option("--mode", ba_mode)
      ->check(CLI::IsMember({"zero_shot", "random_k", "textsim"}))
      ->capture_default_str();
  ba->add_option("--examples", ba_examples, "Example pool corpus for random_k");
  ba->add_option("--index", ba_index, "Source-text index (textsim) or example pool");
  ba->add_option("--seed", ba_seed, "Random seed")->capture_default_str();
  ba_backend.add(ba, "", false);
  ba_decoding.add(ba);
  ba_run.add(ba, false);
  ba->callback([&] {
    action = [&] {
      const Corpus c = load_corpus(ba_in, CorpusKind::gec, load_options());
      const auto mode = *parse_baseline_mode(ba_mode);
      std::optional<ExplanationIndex> index;
      if (!ba_index.empty()) index = ExplanationIndex::load(ba_index);
      std::vector<Example> pool;
      if (!ba_examples.empty()) pool = examples_from(load_corpus(ba_examples, CorpusKind::gec, load_options()));
      else if (index) pool = index->examples();
      if (mode == BaselineMode::random_k && pool.empty()) {
        throw std::runtime_error("random_k requires --examples or --index");
      }
      if (mode == BaselineMode::textsim && !index) throw std::runtime_error("textsim requires --index");
      auto corrector = make_backend(ba_backend.build());
      Re2Config cfg;
      cfg.k = ba_run.k;
      cfg.decoding = ba_decoding.build();
      cfg.jobs = ba_run.jobs;
      cfg.templates = ba_run.templates;
      Pipeline p(cfg, TemplateSet::resolve(ba_run.templates), *corrector, *corrector);
      const auto outcomes =
          p.run_baseline_corpus(c, mode, pool, index ? &*index : nullptr, ba_seed);
      Output o(out_path, out);
      for (const auto& oc : outcomes) write_line(*o, to_json(oc));
    };
  });

  // score
  std::string sc_src, sc_hyp, sc_tsv;
  auto* sc = app.add_subcommand("score", "Character-level P/R/F0.5 against references");
  add_common(sc);
  sc->add_option("--src", sc_src, "Gold corpus (sources and references)")->required();
  sc->add_option("--hyp", sc_hyp, "Hypotheses: text lines or an outcome log (.jsonl)")->required();
  sc->add_option("--per-sentence", sc_tsv, "Write per-sentence tallies as TSV");
  sc->callback([&] {
    action = [&] {
      const Corpus gold = load_corpus(sc_src, CorpusKind::gec, load_options());
      std::vector<SentenceScore> per;
      const auto report = score_corpus(scoring_items(gold, read_hypotheses(sc_hyp)), &per);
      if (!sc_tsv.empty()) {
        std::ofstream tsv(sc_tsv, std::ios::binary);
        if (!tsv) throw std::runtime_error("cannot write " + sc_tsv);
        tsv << "id\ttp\tfp\tfn\treference\n";
        for (std::size_t i = 0; i < per.size(); ++i) {
          tsv << gold.records[i].id << '\t' << per[i].tp << '\t' << per[i].fp << '\t' << per[i].fn
              << '\t' << per[i].chosen_reference << '\n';
        }
      }
      Output o(out_path, out);
      write_line(*o, report.to_json());
    };
  });

  // rouge
  std::string ro_cand, ro_ref;
  auto* ro = app.add_subcommand("rouge", "Character-level ROUGE-L, averaged over lines");
  add_common(ro);
  ro->add_option("--cand", ro_cand, "Candidate explanations, one per line")->required();
  ro->add_option("--ref", ro_ref, "Reference explanations, one per line")->required();
  ro->callback([&] {
    action = [&] {
      const auto cand = read_lines(ro_cand);
      const auto ref = read_lines(ro_ref);
      if (cand.size() != ref.size()) throw std::runtime_error("candidate/reference line counts differ");
      double p = 0.0, r = 0.0, f = 0.0;
      for (std::size_t i = 0; i < cand.size(); ++i) {
        const auto s = rouge_l(cand[i], ref[i]);
        p += s.precision;
        r += s.recall;
        f += s.f1;
      }
      const double n = cand.empty() ? 1.0 : static_cast<double>(cand.size());
      nlohmann::ordered_json j;
      j["count"] = cand.size();
      j["precision"] = p / n;
      j["recall"] = r / n;
      j["f1"] = f / n;
      Output o(out_path, out);
      write_line(*o, j);
    };
  });

  // detect
  std::string de_src, de_hyp;
  auto* de = app.add_subcommand("detect", "Sentence- and position-level detection metrics");
  add_common(de);
  de->add_option("--src", de_src, "Gold corpus")->required();
  de->add_option("--hyp", de_hyp, "Hypotheses: text lines or an outcome log (.jsonl)")->required();
  de->callback([&] {
    action = [&] {
      const Corpus gold = load_corpus(de_src, CorpusKind::detection, load_options());
      const auto report = detection_metrics(scoring_items(gold, read_hypotheses(de_hyp)));
      Output o(out_path, out);
      write_line(*o, report.to_json());
    };
  });

  // make-sft-data
  std::string sf_in, sf_index;
  RunFlags sf_run;
  IndexFlags sf_index_flags;
  auto* sf = app.add_subcommand("make-sft-data", "Training prompts with and without examples");
  add_common(sf);
  sf->add_option("--in", sf_in, "Training corpus with explanations")->required();
  sf->add_option("--index", sf_index, "Explanation index (built from --in when omitted)");
  sf_run.add(sf, false);
  sf_index_flags.add(sf, false);
  sf->callback([&] {
    action = [&] {
      const Corpus train = load_corpus(sf_in, CorpusKind::gee, load_options());
      const auto index = sf_index.empty()
                             ? build_index(train, IndexField::explanation, sf_index_flags.build())
                             : ExplanationIndex::load(sf_index);
      MockBackend unused(MockScript{});
      Re2Config cfg;
      cfg.k = sf_run.k;
      cfg.jobs = sf_run.jobs;
      cfg.templates = sf_run.templates;
      Pipeline p(cfg, TemplateSet::resolve(sf_run.templates), unused, unused);
      const auto records = p.build_sft_data(train, index);
      Output o(out_path, out);
      for (const auto& r : records) write_line(*o, r.to_json());
    };
  });

  // sweep-theta
  std::string sw_in, sw_index, sw_thetas = "0.4,0.5,0.6,0.7,0.8";
  BackendFlags sw_backend, sw_explainer;
  DecodingFlags sw_decoding;
  RunFlags sw_run;
  EmbedFlags sw_embed;
  auto* sw = app.add_subcommand("sweep-theta", "Score a dev corpus across similarity gates");
  add_common(sw);
  sw->add_option("--in", sw_in)->required();
  sw->add_option("--index", sw_index)->required();
  sw->add_option("--thetas", sw_thetas, "Comma-separated gate values")->capture_default_str();
  sw_backend.add(sw, "", false);
  sw_explainer.add(sw, "explainer", true);
  sw_decoding.add(sw);
  sw_run.add(sw, false);
  sw_embed.add(sw);
  sw->callback([&] {
    action = [&] {
      std::vector<double> thetas;
      for (const auto& t : split_list(sw_thetas)) {
        std::size_t used = 0;
        thetas.push_back(std::stod(t, &used));
        if (used != t.size()) throw std::runtime_error("malformed theta " + t);
      }
      const Corpus dev = load_corpus(sw_in, CorpusKind::gec, load_options());
      const auto index = ExplanationIndex::load(sw_index);
      auto corrector = make_backend(sw_backend.build());
      auto explainer = make_backend(sw_explainer.build(&sw_backend));
      auto embedder = sw_embed.build();
      Re2Config cfg;
      cfg.k = sw_run.k;
      cfg.decoding = sw_decoding.build();
      cfg.jobs = sw_run.jobs;
      cfg.templates = sw_run.templates;
      Pipeline p(cfg, TemplateSet::resolve(sw_run.templates), *explainer, *corrector, embedder.get());
      const auto rows = p.sweep_threshold(dev, index, thetas);
      Output o(out_path, out);
      for (const auto& r : rows) write_line(*o, r.to_json());
    };
  });

  // compare-retrievers
  std::string cr_in, cr_examples, cr_rankings = "tfidf_cosine,bm25";
  bool cr_no_latency = false;
  BackendFlags cr_backend, cr_explainer;
  DecodingFlags cr_decoding;
  RunFlags cr_run;
  IndexFlags cr_index;
  EmbedFlags cr_embed;
  auto* cr = app.add_subcommand("compare-retrievers", "Score a dev corpus under several rankings");
  add_common(cr);
  cr->add_option("--in", cr_in, "Dev corpus")->required();
  cr->add_option("--examples", cr_examples, "Example corpus with explanations")->required();
  cr->add_option("--rankings", cr_rankings, "Comma-separated ranking kinds")->capture_default_str();
  cr->add_flag("--no-latency", cr_no_latency, "Omit timing columns (for reproducible output)");
  cr_backend.add(cr, "", false);
  cr_explainer.add(cr, "explainer", true);
  cr_decoding.add(cr);
  cr_run.add(cr);
  cr_index.add(cr, true, false);
  cr_embed.add(cr);
  cr->callback([&] {
    action = [&] {
      std::vector<Ranking> rankings;
      for (const auto& name : split_list(cr_rankings)) {
        const auto r = parse_ranking(name);
        if (!r) throw std::runtime_error("unknown ranking " + name);
        rankings.push_back(*r);
      }
      const Corpus dev = load_corpus(cr_in, CorpusKind::gec, load_options());
      const Corpus examples = load_corpus(cr_examples, CorpusKind::gee, load_options());
      auto corrector = make_backend(cr_backend.build());
      auto explainer = make_backend(cr_explainer.build(&cr_backend));
      auto embedder = cr_embed.build();
      Re2Config cfg;
      cfg.k = cr_run.k;
      cfg.theta = cr_run.theta;
      cfg.retriever_field = *parse_index_field(cr_index.field);
      cfg.decoding = cr_decoding.build();
      cfg.jobs = cr_run.jobs;
      cfg.templates = cr_run.templates;
      Pipeline p(cfg, TemplateSet::resolve(cr_run.templates), *explainer, *corrector, embedder.get());
      const auto rows = p.compare_retrievers(dev, examples, cr_index.build(), rankings);
      Output o(out_path, out);
      for (const auto& r : rows) write_line(*o, r.to_json(!cr_no_latency));
    };
  });

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("re2gec");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  }

  if (!action) {
    err << "usage error: no subcommand given\n";
    return kExitUsage;
  }
  try {
    action();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    err << "error: " << msg << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace re2gec::cli
