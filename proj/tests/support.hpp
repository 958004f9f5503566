#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "re2gec/corpus.hpp"
#include "re2gec/utf8.hpp"

namespace testing {

inline std::string fixture(const std::string& name) {
  return std::string(RE2GEC_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("re2gec-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Mixes ASCII, CJK, punctuation and astral-plane characters.
inline const std::u32string& alphabet() {
  static const std::u32string a =
      U"abcxyz 的了是在我们他要提高意识通过活动使明白道理，。！é\U0001F600\U00020000";
  return a;
}

inline std::u32string random_u32(std::mt19937_64& rng, std::size_t max_len,
                                 const std::u32string& chars = alphabet()) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, chars.size() - 1);
  std::u32string s(len(rng), U' ');
  for (auto& c : s) c = chars[pick(rng)];
  return s;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len,
                               const std::u32string& chars = alphabet()) {
  return re2gec::encode_utf8(random_u32(rng, max_len, chars));
}

// Random insertions, deletions and substitutions; sometimes a whole rewrite.
inline std::string mutate(std::mt19937_64& rng, const std::string& text,
                          const std::u32string& chars = alphabet()) {
  std::u32string s = re2gec::decode_utf8(text);
  std::uniform_int_distribution<int> op(0, 9);
  std::uniform_int_distribution<std::size_t> pick(0, chars.size() - 1);
  if (op(rng) == 0) return random_text(rng, 12, chars);
  const int n = std::uniform_int_distribution<int>(0, 4)(rng);
  for (int i = 0; i < n; ++i) {
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, s.size())(rng);
    switch (op(rng) % 3) {
      case 0:
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(pos), chars[pick(rng)]);
        break;
      case 1:
        if (pos < s.size()) s.erase(pos, 1);
        break;
      default:
        if (pos < s.size()) s[pos] = chars[pick(rng)];
        break;
    }
  }
  return re2gec::encode_utf8(s);
}

// Explanation-like text assembled from a fixed phrase pool, so documents
// share n-grams the way real explanations do.
inline std::string synthetic_explanation(std::mt19937_64& rng) {
  static const std::vector<std::string> phrases = {
      "句子缺少主语", "“通过”与“使”连用", "应删去", "语序不当", "搭配不当", "成分赘余",
      "句式杂糅", "不合逻辑", "否定不当", "语义重复", "应改为", "关联词使用错误",
      "主谓搭配不当", "动宾搭配不当", "缺少宾语中心语", "前后矛盾", "一面对两面",
      "介词滥用", "应调换位置", "表意不明", "句末多了", "量词使用不当", "句子没有语法错误",
      "造成歧义", "偷换主语", "定语位置不当", "状语位置不当", "应补充", "重复啰嗦", "。"};
  std::uniform_int_distribution<std::size_t> count(2, 7);
  std::uniform_int_distribution<std::size_t> pick(0, phrases.size() - 1);
  std::string s;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) s += phrases[pick(rng)];
  return s;
}

// Brute-force TF-IDF over character n-grams, written without the library:
// raw counts, smoothed idf, L2 normalization, dense dot products.
class TfidfOracle {
 public:
  TfidfOracle(const std::vector<std::string>& docs, std::size_t nmin, std::size_t nmax)
      : nmin_(nmin), nmax_(nmax) {
    std::vector<std::map<std::string, double>> counts;
    std::map<std::string, std::size_t> df;
    for (const auto& d : docs) {
      counts.push_back(count(d));
      for (const auto& [g, c] : counts.back()) ++df[g];
    }
    const double n = static_cast<double>(docs.size());
    for (const auto& [g, f] : df) {
      idf[g] = std::log((1.0 + n) / (1.0 + static_cast<double>(f))) + 1.0;
    }
    for (const auto& c : counts) vectors.push_back(weigh(c));
  }

  std::map<std::string, double> count(const std::string& text) const {
    const auto u = re2gec::decode_utf8(text);
    std::map<std::string, double> c;
    for (std::size_t n = nmin_; n <= nmax_; ++n) {
      for (std::size_t i = 0; i + n <= u.size(); ++i) {
        c[re2gec::encode_utf8(u.substr(i, n))] += 1.0;
      }
    }
    return c;
  }

  // Out-of-vocabulary n-grams are dropped before normalizing.
  std::map<std::string, double> weigh(const std::map<std::string, double>& c) const {
    std::map<std::string, double> v;
    double sq = 0.0;
    for (const auto& [g, x] : c) {
      auto it = idf.find(g);
      if (it == idf.end()) continue;
      v[g] = x * it->second;
      sq += v[g] * v[g];
    }
    if (sq == 0.0) return {};
    const double norm = std::sqrt(sq);
    for (auto& [g, w] : v) w /= norm;
    return v;
  }

  std::map<std::string, double> vectorize(const std::string& text) const {
    return weigh(count(text));
  }

  static double dot(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    double s = 0.0;
    for (const auto& [g, w] : a) {
      auto it = b.find(g);
      if (it != b.end()) s += w * it->second;
    }
    return std::min(1.0, std::max(0.0, s));
  }

  std::map<std::string, double> idf;
  std::vector<std::map<std::string, double>> vectors;

 private:
  std::size_t nmin_;
  std::size_t nmax_;
};

struct Ranked {
  std::string id;
  double score = 0.0;
};

// Full scan: every document scored, sorted by score then id, first k kept.
inline std::vector<Ranked> oracle_top_k(const TfidfOracle& oracle, const std::vector<std::string>& ids,
                                        const std::string& query, std::size_t k) {
  const auto q = oracle.vectorize(query);
  std::vector<Ranked> all;
  for (std::size_t d = 0; d < ids.size(); ++d) {
    all.push_back({ids[d], TfidfOracle::dot(q, oracle.vectors[d])});
  }
  std::sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Records "<prefix>NNN" carrying the given explanations; sources and targets
// are derived from the index so every record is distinct.
inline re2gec::Corpus explanation_corpus(const std::vector<std::string>& explanations,
                                         const std::string& prefix = "doc-") {
  re2gec::Corpus c;
  c.kind = re2gec::CorpusKind::gee;
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%03zu", prefix.c_str(), i);
    re2gec::SentencePair r;
    r.id = id;
    r.source = "源句" + std::to_string(i) + "有错。";
    r.targets = {"源句" + std::to_string(i) + "无错。"};
    r.explanation = explanations[i];
    c.records.push_back(r);
  }
  return c;
}

}  // namespace testing
