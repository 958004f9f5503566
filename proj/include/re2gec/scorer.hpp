#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace re2gec {

// (1 + b^2) P R / (b^2 P + R); 0 when the denominator is 0.
double f_beta(double precision, double recall, double beta);

// Ratio with the "nothing to find" convention: 1.0 when denominator is 0.
double safe_ratio(std::size_t numerator, std::size_t denominator);

struct SentenceScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t chosen_reference = 0;  // 0-based

  double precision() const { return safe_ratio(tp, tp + fp); }
  double recall() const { return safe_ratio(tp, tp + fn); }
  double f_half() const { return f_beta(precision(), recall(), 0.5); }
};

struct EvalReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f_half = 1.0;

  static EvalReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
  nlohmann::ordered_json to_json() const;
};

struct ScoringItem {
  std::string source;
  std::string hypothesis;
  std::vector<std::string> references;
};

// Character-level edits of hypothesis and of each reference against the
// source; an edit matches only when offset, original and replacement agree.
// The reference giving the best sentence F0.5 is chosen (then higher tp,
// then lower index).
SentenceScore score_sentence(std::string_view source, std::string_view hypothesis,
                             const std::vector<std::string>& references);

// Micro average over per-sentence tallies.
EvalReport score_corpus(const std::vector<ScoringItem>& items,
                        std::vector<SentenceScore>* per_sentence = nullptr);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

std::size_t lcs_length(std::u32string_view a, std::u32string_view b);

// Character-level ROUGE-L.
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

struct PrfScore {
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;

  static PrfScore from_counts(std::size_t tp, std::size_t predicted, std::size_t gold);
  nlohmann::ordered_json to_json() const;
};

struct DetectionReport {
  PrfScore sentence_level;
  PrfScore position_level;

  nlohmann::ordered_json to_json() const;
};

// Offsets touched by char_level_edits(source, revised); an insertion
// contributes its single offset.
std::vector<std::size_t> edited_positions(std::string_view source, std::string_view revised);

DetectionReport detection_metrics(const std::vector<ScoringItem>& items);

}  // namespace re2gec
