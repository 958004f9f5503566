#include "re2gec/scorer.hpp"

#include <algorithm>
#include <set>

#include "re2gec/edit_extract.hpp"
#include "re2gec/utf8.hpp"

namespace re2gec {

double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

double safe_ratio(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0) return 1.0;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

EvalReport EvalReport::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = safe_ratio(tp, tp + fp);
  r.recall = safe_ratio(tp, tp + fn);
  r.f_half = f_beta(r.precision, r.recall, 0.5);
  return r;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f0.5"] = f_half;
  return j;
}

namespace {

std::size_t count_matches(const EditList& hyp, const EditList& ref) {
  std::size_t tp = 0;
  std::vector<bool> used(ref.size(), false);
  for (const auto& h : hyp) {
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (!used[i] && ref[i] == h) {
        used[i] = true;
        ++tp;
        break;
      }
    }
  }
  return tp;
}

}  // namespace

SentenceScore score_sentence(std::string_view source, std::string_view hypothesis,
                             const std::vector<std::string>& references) {
  const EditList hyp = char_level_edits(source, hypothesis);
  SentenceScore best;
  bool have_best = false;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const EditList ref = char_level_edits(source, references[i]);
    SentenceScore s;
    s.tp = count_matches(hyp, ref);
    s.fp = hyp.size() - s.tp;
    s.fn = ref.size() - s.tp;
    s.chosen_reference = i;
    const bool better = !have_best || s.f_half() > best.f_half() ||
                        (s.f_half() == best.f_half() && s.tp > best.tp);
    if (better) {
      best = s;
      have_best = true;
    }
  }
  if (!have_best) best.fp = hyp.size();
  return best;
}

EvalReport score_corpus(const std::vector<ScoringItem>& items,
                        std::vector<SentenceScore>* per_sentence) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  if (per_sentence) per_sentence->clear();
  for (const auto& item : items) {
    const auto s = score_sentence(item.source, item.hypothesis, item.references);
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
    if (per_sentence) per_sentence->push_back(s);
  }
  return EvalReport::from_counts(tp, fp, fn);
}

std::size_t lcs_length(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  const auto c = decode_utf8(candidate);
  const auto r = decode_utf8(reference);
  const double lcs = static_cast<double>(lcs_length(c, r));
  RougeScore s;
  s.precision = c.empty() ? 0.0 : lcs / static_cast<double>(c.size());
  s.recall = r.empty() ? 0.0 : lcs / static_cast<double>(r.size());
  // 2 * LCS / (m + n), the harmonic mean of P and R rounded once.
  s.f1 = lcs == 0.0 ? 0.0 : 2.0 * lcs / static_cast<double>(c.size() + r.size());
  return s;
}

PrfScore PrfScore::from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  PrfScore s;
  s.tp = tp;
  s.predicted = predicted;
  s.gold = gold;
  s.precision = safe_ratio(tp, predicted);
  s.recall = safe_ratio(tp, gold);
  s.f1 = f_beta(s.precision, s.recall, 1.0);
  return s;
}

nlohmann::ordered_json PrfScore::to_json() const {
  nlohmann::ordered_json j;
  j["tp"] = tp;
  j["predicted"] = predicted;
  j["gold"] = gold;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  return j;
}

nlohmann::ordered_json DetectionReport::to_json() const {
  nlohmann::ordered_json j;
  j["sentence_level"] = sentence_level.to_json();
  j["position_level"] = position_level.to_json();
  j["position_level_note"] = "offset-set approximation of the shared-task position metric";
  return j;
}

std::vector<std::size_t> edited_positions(std::string_view source, std::string_view revised) {
  std::set<std::size_t> positions;
  for (const auto& e : char_level_edits(source, revised)) {
    const std::size_t len = char_length(e.original);
    if (len == 0) positions.insert(e.offset);
    for (std::size_t k = 0; k < len; ++k) positions.insert(e.offset + k);
  }
  return {positions.begin(), positions.end()};
}

DetectionReport detection_metrics(const std::vector<ScoringItem>& items) {
  std::size_t sent_tp = 0;
  std::size_t sent_pred = 0;
  std::size_t sent_gold = 0;
  std::size_t pos_tp = 0;
  std::size_t pos_pred = 0;
  std::size_t pos_gold = 0;

  for (const auto& item : items) {
    const bool predicted = item.hypothesis != item.source;
    const bool gold = !item.references.empty() &&
                      std::all_of(item.references.begin(), item.references.end(),
                                  [&](const std::string& t) { return t != item.source; });
    sent_pred += predicted;
    sent_gold += gold;
    sent_tp += predicted && gold;

    const auto pred_pos = edited_positions(item.source, item.hypothesis);
    std::vector<std::size_t> best_gold;
    std::size_t best_overlap = 0;
    bool have = false;
    for (const auto& ref : item.references) {
      auto gold_pos = edited_positions(item.source, ref);
      std::vector<std::size_t> common;
      std::set_intersection(pred_pos.begin(), pred_pos.end(), gold_pos.begin(), gold_pos.end(),
                            std::back_inserter(common));
      if (!have || common.size() > best_overlap) {
        best_overlap = common.size();
        best_gold = std::move(gold_pos);
        have = true;
      }
    }
    pos_tp += best_overlap;
    pos_pred += pred_pos.size();
    pos_gold += best_gold.size();
  }

  DetectionReport report;
  report.sentence_level = PrfScore::from_counts(sent_tp, sent_pred, sent_gold);
  report.position_level = PrfScore::from_counts(pos_tp, pos_pred, pos_gold);
  return report;
}

}  // namespace re2gec
