#include <doctest.h>

#include <sstream>

#include "re2gec/cli.hpp"
#include "re2gec/llm_backend.hpp"
#include "re2gec/prompting.hpp"
#include "support.hpp"

using namespace re2gec;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "re2gec");
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

// Explainer script answering every dev sentence with the fc-002 explanation.
std::string explainer_script(const testing::TempDir& dir) {
  const auto dev = load_corpus(testing::fixture("dev_sample.jsonl"), CorpusKind::gec);
  const auto train = load_corpus(testing::fixture("gee_sample.jsonl"), CorpusKind::gee);
  MockScript s;
  for (const auto& r : dev.records) {
    SentencePair p;
    p.source = r.source;
    s.add(render_gee_prompt(p, GeeVariant::input_only, TemplateSet::builtin()),
          *train.find("fc-002")->explanation);
  }
  const auto path = dir.file("explainer.json");
  testing::write_file(path, s.to_json().dump());
  return path;
}

// Corrector that echoes the last prompt line, i.e. the input sentence.
std::string echo_script(const testing::TempDir& dir) {
  const auto path = dir.file("echo.json");
  testing::write_file(path, "{}");
  return path;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    const auto help = run({"--help"});
    CHECK(help.code == cli::kExitOk);
    CHECK(help.out.find("build-index") != std::string::npos);
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    const auto missing = run({"query", "--text", "x"});
    CHECK(missing.code == cli::kExitUsage);
    CHECK(missing.err.find("usage error") != std::string::npos);
    CHECK(run({"baseline", "--in", "x", "--mode", "bogus"}).code == cli::kExitUsage);
  }

  TEST_CASE("runtime errors exit 1 with a message") {
    const auto r = run({"build-index", "--in", "/nonexistent.jsonl", "--out", "/tmp/x"});
    CHECK(r.code == cli::kExitRuntime);
    CHECK(r.err.rfind("error: ", 0) == 0);
    CHECK(run({"build-index", "--in", testing::fixture("gee_sample.jsonl")}).code == cli::kExitRuntime);
    CHECK(run({"correct", "--config", "/nonexistent.toml"}).code == cli::kExitRuntime);
  }

  TEST_CASE("extract-edits") {
    const auto r = run({"extract-edits", "--src", "我们要提高环境保护的意识的。", "--tgt", "我们要提高环境保护的意识。"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out) == json::parse(R"([[12,"的",""]])"));

    testing::TempDir dir;
    REQUIRE(run({"extract-edits", "--in", testing::fixture("dev_sample.jsonl"), "--out", dir.file("e.jsonl")}).code == 0);
    const auto c = load_corpus(dir.file("e.jsonl"), CorpusKind::gec);
    REQUIRE(c.records[0].edits);
    CHECK(c.records[0].edits->size() == 2);
    CHECK(c.records[1].edits->front().empty());
  }

  TEST_CASE("build-index is byte-deterministic and queryable") {
    testing::TempDir dir;
    const auto in = testing::fixture("gee_sample.jsonl");
    REQUIRE(run({"build-index", "--in", in, "--out", dir.file("a.idx")}).code == 0);
    REQUIRE(run({"build-index", "--in", in, "--out", dir.file("b.idx")}).code == 0);
    const auto a = testing::read_file(dir.file("a.idx"));
    CHECK(a == testing::read_file(dir.file("b.idx")));
    CHECK(a.rfind("RE2IDX 1\n", 0) == 0);

    const auto train = load_corpus(in, CorpusKind::gee);
    const auto q = run({"query", "--index", dir.file("a.idx"), "--text", *train.find("fc-005")->explanation});
    REQUIRE(q.code == 0);
    const auto j = json::parse(q.out);
    CHECK(j["gate_open"] == true);
    CHECK(j["hits"][0]["id"] == "fc-005");
    CHECK(j["hits"].size() == 3);
    const auto ex = run({"query", "--index", dir.file("a.idx"), "--text", *train.find("fc-005")->explanation,
                         "--exclude", "fc-005", "--k", "1"});
    CHECK(json::parse(ex.out)["hits"][0]["id"] != "fc-005");
  }

  TEST_CASE("correct is deterministic with scripted mocks") {
    testing::TempDir dir;
    REQUIRE(run({"build-index", "--in", testing::fixture("gee_sample.jsonl"), "--out", dir.file("i.idx")}).code == 0);
    const auto script = explainer_script(dir);
    const std::vector<std::string> args = {"correct", "--in", testing::fixture("dev_sample.jsonl"), "--index",
                                           dir.file("i.idx"), "--explainer-script", script, "--script", echo_script(dir)};
    auto a = args, b = args;
    a.insert(a.end(), {"--out", dir.file("a.jsonl")});
    b.insert(b.end(), {"--out", dir.file("b.jsonl"), "--jobs", "3"});
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    const auto text = testing::read_file(dir.file("a.jsonl"));
    CHECK(text == testing::read_file(dir.file("b.jsonl")));

    const auto rows = json_lines(text);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
      CHECK(r["mode_used"] == "with_examples");
      CHECK(r["hits"]["hits"][0]["id"] == "fc-002");
      CHECK(r["correction"] == r["input"]);
    }
    CHECK(rows[1]["id"] == "dev-2");

    // The outcome log scores directly; echoing inputs finds nothing.
    const auto s = run({"score", "--src", testing::fixture("dev_sample.jsonl"), "--hyp", dir.file("a.jsonl")});
    REQUIRE(s.code == 0);
    CHECK(json::parse(s.out)["tp"] == 0);
  }

  TEST_CASE("config manifests and flag precedence") {
    testing::TempDir dir;
    REQUIRE(run({"build-index", "--in", testing::fixture("gee_sample.jsonl"), "--out", dir.file("i.idx")}).code == 0);
    const auto script = explainer_script(dir);
    testing::write_file(dir.file("run.toml"), "[correct]\nk = 1\ntheta = 1.0\n");
    const std::vector<std::string> base = {"correct", "--in", testing::fixture("dev_sample.jsonl"), "--index",
                                           dir.file("i.idx"), "--explainer-script", script, "--script", echo_script(dir),
                                           "--config", dir.file("run.toml")};
    const auto r = run(base);
    REQUIRE(r.code == 0);
    for (const auto& row : json_lines(r.out)) CHECK(row["hits"]["hits"].size() == 1);

    auto flagged = base;
    flagged.insert(flagged.end(), {"--k", "2"});
    const auto f = run(flagged);
    REQUIRE(f.code == 0);
    for (const auto& row : json_lines(f.out)) CHECK(row["hits"]["hits"].size() == 2);
  }

  TEST_CASE("baselines") {
    testing::TempDir dir;
    const auto dev = testing::fixture("dev_sample.jsonl");
    const auto pool = testing::fixture("gee_sample.jsonl");
    const auto echo = echo_script(dir);
    const auto zero = run({"baseline", "--in", dev, "--script", echo});
    REQUIRE(zero.code == 0);
    for (const auto& row : json_lines(zero.out)) CHECK(row["mode_used"] == "without_examples");

    const std::vector<std::string> rk = {"baseline", "--in", dev, "--mode", "random_k", "--examples", pool, "--seed", "9", "--script", echo};
    CHECK(run(rk).out == run(rk).out);
    CHECK(run({"baseline", "--in", dev, "--mode", "random_k", "--script", echo}).code == cli::kExitRuntime);

    REQUIRE(run({"build-index", "--in", pool, "--field", "source", "--out", dir.file("s.idx")}).code == 0);
    const auto ts = run({"baseline", "--in", dev, "--mode", "textsim", "--index", dir.file("s.idx"), "--script", echo});
    REQUIRE(ts.code == 0);
    CHECK(json_lines(ts.out)[0]["hits"]["hits"][0]["id"] == "fc-002");
  }

  TEST_CASE("score, per-sentence tallies and detection") {
    testing::TempDir dir;
    const auto dev = testing::fixture("dev_sample.jsonl");
    testing::write_file(dir.file("hyp.txt"), "老师的讲解使我明白了这道题。\n今天的天气非常晴朗。\n有三十多名同学报名参加。\n");
    const auto r = run({"score", "--src", dev, "--hyp", dir.file("hyp.txt"), "--per-sentence", dir.file("t.tsv")});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["precision"] == 1.0);
    CHECK(j["recall"] == 1.0);
    CHECK(j["f0.5"] == 1.0);
    const auto tsv = testing::read_file(dir.file("t.tsv"));
    CHECK(tsv.rfind("id\ttp\tfp\tfn\treference\n", 0) == 0);
    CHECK(tsv.find("dev-1\t") != std::string::npos);

    testing::write_file(dir.file("short.txt"), "一句\n");
    const auto bad = run({"score", "--src", dev, "--hyp", dir.file("short.txt")});
    CHECK(bad.code == cli::kExitRuntime);
    CHECK(bad.err.find("hypothesis count 1 does not match source count 3") != std::string::npos);

    const auto d = run({"detect", "--src", dev, "--hyp", dir.file("hyp.txt")});
    REQUIRE(d.code == 0);
    CHECK(json::parse(d.out)["sentence_level"]["f1"] == 1.0);
  }

  TEST_CASE("rouge") {
    testing::TempDir dir;
    testing::write_file(dir.file("c.txt"), "ace\n语序不当\n");
    testing::write_file(dir.file("r.txt"), "abcde\n语序不当\n");
    const auto r = run({"rouge", "--cand", dir.file("c.txt"), "--ref", dir.file("r.txt")});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["count"] == 2);
    CHECK(j["precision"] == 1.0);
    CHECK(j["recall"] == doctest::Approx(0.8));
    CHECK(j["f1"] == doctest::Approx(0.875));
  }

  TEST_CASE("sft data, sweeps and retriever comparison") {
    testing::TempDir dir;
    const auto pool = testing::fixture("gee_sample.jsonl");
    const auto sft = run({"make-sft-data", "--in", pool});
    REQUIRE(sft.code == 0);
    const auto rows = json_lines(sft.out);
    CHECK(rows.size() == 16);

    REQUIRE(run({"build-index", "--in", pool, "--out", dir.file("i.idx")}).code == 0);
    const auto script = explainer_script(dir);
    const auto sw = run({"sweep-theta", "--in", testing::fixture("dev_sample.jsonl"), "--index", dir.file("i.idx"),
                         "--explainer-script", script, "--script", echo_script(dir), "--thetas", "0,0.99"});
    REQUIRE(sw.code == 0);
    const auto sweep = json_lines(sw.out);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0]["with_examples"] == 3);

    const auto cr = run({"compare-retrievers", "--in", testing::fixture("dev_sample.jsonl"), "--examples", pool,
                         "--explainer-script", script, "--script", echo_script(dir), "--no-latency"});
    REQUIRE(cr.code == 0);
    const auto cmp = json_lines(cr.out);
    REQUIRE(cmp.size() == 2);
    CHECK_FALSE(cmp[0].contains("mean_query_ms"));
    CHECK(cr.out == run({"compare-retrievers", "--in", testing::fixture("dev_sample.jsonl"), "--examples", pool,
                         "--explainer-script", script, "--script", echo_script(dir), "--no-latency"}).out);
  }
}
