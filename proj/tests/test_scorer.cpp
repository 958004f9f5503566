#include <doctest.h>

#include <cmath>

#include "re2gec/scorer.hpp"
#include "support.hpp"

using namespace re2gec;

TEST_SUITE("scorer") {
  TEST_CASE("f_beta matches known P/R/F0.5 triples") {
    // (P, R, reported F0.5) in percent.
    const double rows[][3] = {
        {64.49, 36.22, 55.78}, {48.19, 37.14, 45.48}, {66.33, 42.80, 59.76}, {45.59, 40.18, 44.39}};
    for (const auto& r : rows) {
      const double f = 100.0 * f_beta(r[0] / 100.0, r[1] / 100.0, 0.5);
      CHECK(std::abs(std::round(f * 100.0) / 100.0 - r[2]) <= 0.01 + 1e-9);
    }
    CHECK(f_beta(0.6449, 0.3622, 0.5) == doctest::Approx(0.5578).epsilon(0.0002));
    CHECK(f_beta(1.0, 1.0, 0.5) == 1.0);
    CHECK(f_beta(0.0, 0.0, 0.5) == 0.0);
  }

  TEST_CASE("f_beta properties") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
      const double p = u(rng), r = u(rng), beta = 0.1 + 3.0 * u(rng), d = 0.1 * u(rng);
      CHECK(f_beta(p, p, beta) == doctest::Approx(p));
      const double f = f_beta(p, r, beta);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      CHECK(f_beta(std::min(1.0, p + d), r, beta) >= f - 1e-12);
      CHECK(f_beta(p, std::min(1.0, r + d), beta) >= f - 1e-12);
    }
  }

  TEST_CASE("sentence scoring") {
    const auto none = score_sentence("没错。", "没错。", {"没错。"});
    CHECK(none.tp + none.fp + none.fn == 0);
    CHECK(none.f_half() == 1.0);

    const auto half = score_sentence("ABCD", "XBCD", {"XBCY"});
    CHECK(half.tp == 1);
    CHECK(half.fp == 0);
    CHECK(half.fn == 1);
    CHECK(half.precision() == 1.0);
    CHECK(half.recall() == 0.5);
    CHECK(half.f_half() == doctest::Approx(0.8333).epsilon(0.0001));

    const auto second = score_sentence("ABC", "AXC", {"ABY", "AXC"});
    CHECK(second.chosen_reference == 1);
    CHECK(second.fp == 0);
    CHECK(second.fn == 0);

    // Equal F0.5 everywhere: more true positives wins, then the earlier reference.
    const auto tie = score_sentence("ABCD", "ABCD", {"XBCD", "XBCY"});
    CHECK(tie.chosen_reference == 0);
    CHECK(score_sentence("ABC", "XBC", {"XBC", "XBC"}).chosen_reference == 0);
  }

  TEST_CASE("hypothesis equal to its only reference never errs") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 300; ++i) {
      const auto s = testing::random_text(rng, 12);
      const auto h = testing::mutate(rng, s);
      const auto r = score_sentence(s, h, {h});
      CHECK(r.fp == 0);
      CHECK(r.fn == 0);
    }
  }

  TEST_CASE("hand-tallied corpus") {
    const std::vector<ScoringItem> items = {
        {"ABCDE", "AXCDE", {"AXCDE"}},              // tp 1
        {"今天天气好", "今天天气很好", {"今天的天气好"}},  // fp 1, fn 1
        {"我们明白了道理", "我们明白了道理", {"我们明白道理"}},  // fn 1
    };
    std::vector<SentenceScore> per;
    const auto r = score_corpus(items, &per);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 2);
    CHECK(r.precision == 0.5);
    CHECK(r.recall == doctest::Approx(1.0 / 3.0));
    CHECK(r.f_half == doctest::Approx(1.25 * 0.5 / 3.0 / (0.125 + 1.0 / 3.0)));
    REQUIRE(per.size() == 3);
    CHECK(per[1].fp == 1);
    CHECK(per[2].fn == 1);
  }

  TEST_CASE("corpus conventions") {
    const std::vector<ScoringItem> perfect = {{"AB", "AXB", {"AXB"}}, {"CD", "C", {"C"}}};
    const auto p = score_corpus(perfect);
    CHECK(p.precision == 1.0);
    CHECK(p.recall == 1.0);
    CHECK(p.f_half == 1.0);

    const std::vector<ScoringItem> lazy = {{"AB", "AB", {"AXB"}}, {"CD", "CD", {"C"}}};
    const auto l = score_corpus(lazy);
    CHECK(l.tp == 0);
    CHECK(l.recall == 0.0);
    CHECK(l.f_half == 0.0);

    CHECK(score_corpus({}).f_half == 1.0);
  }

  TEST_CASE("micro average equals recomputation from tallies") {
    std::mt19937_64 rng(23);
    std::vector<ScoringItem> items;
    for (int i = 0; i < 100; ++i) {
      const auto s = testing::random_text(rng, 10);
      items.push_back({s, testing::mutate(rng, s), {testing::mutate(rng, s), testing::mutate(rng, s)}});
    }
    std::vector<SentenceScore> per;
    const auto r = score_corpus(items, &per);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& s : per) {
      tp += s.tp;
      fp += s.fp;
      fn += s.fn;
    }
    const auto again = EvalReport::from_counts(tp, fp, fn);
    CHECK(r.tp == tp);
    CHECK(r.f_half == again.f_half);
    const auto j = r.to_json();
    CHECK(j.contains("f0.5"));
    CHECK(j["tp"] == tp);
  }

  TEST_CASE("rouge-l") {
    const auto same = rouge_l("语序不当", "语序不当");
    CHECK(same.precision == 1.0);
    CHECK(same.recall == 1.0);
    CHECK(same.f1 == 1.0);

    const auto r = rouge_l("ace", "abcde");
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 0.6);
    CHECK(r.f1 == 0.75);

    const auto empty = rouge_l("", "x");
    CHECK(empty.precision == 0.0);
    CHECK(empty.recall == 0.0);
    CHECK(empty.f1 == 0.0);
  }

  TEST_CASE("rouge-l properties") {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 300; ++i) {
      const auto a = testing::random_text(rng, 15, U"甲乙丙丁ab");
      const auto b = testing::random_text(rng, 15, U"甲乙丙丁ab");
      const auto ab = rouge_l(a, b), ba = rouge_l(b, a);
      CHECK(ab.precision == ba.recall);
      CHECK(ab.recall == ba.precision);
      CHECK(ab.f1 == doctest::Approx(ba.f1));
      const auto ua = decode_utf8(a), ub = decode_utf8(b);
      CHECK(lcs_length(ua, ub) <= std::min(ua.size(), ub.size()));
    }
  }

  TEST_CASE("edited positions") {
    CHECK(edited_positions("ABCDE", "AXYDE") == std::vector<std::size_t>{1, 2});
    CHECK(edited_positions("AB", "AXB") == std::vector<std::size_t>{1});
    CHECK(edited_positions("AB", "AB").empty());
  }

  TEST_CASE("detection metrics") {
    const auto exact = detection_metrics({{"ABCDE", "AXCDE", {"AXCDE"}}});
    CHECK(exact.position_level.precision == 1.0);
    CHECK(exact.position_level.recall == 1.0);
    CHECK(exact.sentence_level.f1 == 1.0);

    const auto partial = detection_metrics({{"ABCDEF", "AXCDZF", {"AXYDEF"}}});
    CHECK(partial.position_level.tp == 1);
    CHECK(partial.position_level.precision == 0.5);
    CHECK(partial.position_level.recall == 0.5);

    const auto disjoint = detection_metrics({{"ABCDEF", "ABCDEZ", {"AXCDEF"}}});
    CHECK(disjoint.position_level.tp == 0);
    CHECK(disjoint.position_level.precision == 0.0);
    CHECK(disjoint.position_level.recall == 0.0);
    CHECK(disjoint.sentence_level.precision == 1.0);

    const auto clean = detection_metrics({{"AB", "AB", {"AB"}}});
    CHECK(clean.sentence_level.precision == 1.0);
    CHECK(clean.sentence_level.recall == 1.0);
    CHECK(clean.position_level.f1 == 1.0);
  }

  TEST_CASE("detection picks the gold target with most overlap") {
    const auto r = detection_metrics({{"ABCDEF", "ABCDEZ", {"AXCDEF", "ABCDEY"}}});
    CHECK(r.position_level.tp == 1);
    CHECK(r.position_level.gold == 1);

    const auto mixed = detection_metrics({
        {"ABCD", "AXCD", {"AXCD"}},  // flagged, erroneous
        {"ABCD", "ABCD", {"ABCD"}},  // clean
        {"ABCD", "ABCY", {"ABCD"}},  // false alarm
        {"ABCD", "ABCD", {"ABXD"}},  // missed
    });
    CHECK(mixed.sentence_level.tp == 1);
    CHECK(mixed.sentence_level.predicted == 2);
    CHECK(mixed.sentence_level.gold == 2);
    CHECK(mixed.sentence_level.f1 == 0.5);
    CHECK(mixed.to_json().contains("position_level_note"));
  }
}
