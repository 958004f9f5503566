#include <doctest.h>

#include "re2gec/edit_extract.hpp"
#include "re2gec/segmentation.hpp"
#include "re2gec/utf8.hpp"
#include "support.hpp"

using namespace re2gec;

namespace {

SegmenterConfig whitespace() {
  SegmenterConfig c;
  c.mode = SegmenterMode::whitespace;
  return c;
}

template <class Seq>
std::size_t lcs_oracle(const Seq& a, const Seq& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

}  // namespace

TEST_SUITE("edit_extract") {
  TEST_CASE("hand-aligned examples") {
    CHECK(extract_edits("abc", "abc", {}).empty());
    CHECK(extract_edits("the cat sat", "the dog sat", {}) == EditList{{4, "cat", "dog"}});
    CHECK(extract_edits("the cat sat", "the dog sat", whitespace()) == EditList{{4, "cat", "dog"}});
    CHECK(extract_edits("AXB", "AB", {}) == EditList{{1, "X", ""}});
    CHECK(char_level_edits("abcde", "abXde") == EditList{{2, "c", "X"}});
    CHECK(char_level_edits("aa", "a") == EditList{{1, "a", ""}});
    CHECK(extract_edits("我们要提高环境保护的意识的。", "我们要提高环境保护的意识。", {}) ==
          EditList{{12, "的", ""}});
  }

  TEST_CASE("swap resolves to delete-then-insert") {
    CHECK(char_level_edits("ab", "ba") == (EditList{{0, "a", ""}, {2, "", "a"}}));
  }

  TEST_CASE("whitespace edits leave unchanged separators outside") {
    CHECK(extract_edits("a b c", "a c", whitespace()) == EditList{{2, "b ", ""}});
    CHECK(extract_edits("a c", "a b c", whitespace()) == EditList{{2, "", "b "}});
    CHECK(extract_edits("a  b", "a b", whitespace()) == EditList{{2, " ", ""}});
  }

  TEST_CASE("apply_edits") {
    CHECK(apply_edits("abc", {}) == "abc");
    CHECK(apply_edits("AB", {{1, "", "X"}}) == "AXB");
    CHECK(apply_edits("AXB", {{1, "X", "Y"}}) == "AYB");
    CHECK(apply_edits("语法错误", {{2, "错误", "纠错"}}) == "语法纠错");
    CHECK_THROWS_WITH(apply_edits("abc", {{3, "d", ""}}), doctest::Contains("out of range"));
    CHECK_THROWS_WITH(apply_edits("abc", {{0, "ab", ""}, {1, "b", "x"}}),
                      doctest::Contains("overlapping"));
    CHECK_THROWS_AS(apply_edits("abc", {{1, "", ""}}), EditError);
  }

  TEST_CASE("alignment partitions both sequences") {
    std::mt19937_64 rng(21);
    const std::u32string small = U"abc ";
    for (int i = 0; i < 300; ++i) {
      const auto a = segment(testing::random_text(rng, 12, small), {}).texts();
      const auto b = segment(testing::random_text(rng, 12, small), {}).texts();
      const auto ops = align_tokens(a, b);
      std::size_t si = 0, ti = 0, matched = 0;
      for (const auto& op : ops) {
        CHECK(op.source_begin == si);
        CHECK(op.target_begin == ti);
        if (op.kind == AlignmentKind::equal) {
          REQUIRE(op.source_end - op.source_begin == op.target_end - op.target_begin);
          for (std::size_t k = 0; k < op.source_end - op.source_begin; ++k) {
            CHECK(a[op.source_begin + k] == b[op.target_begin + k]);
          }
          matched += op.source_end - op.source_begin;
        }
        si = op.source_end;
        ti = op.target_end;
      }
      CHECK(si == a.size());
      CHECK(ti == b.size());
      CHECK(matched == lcs_oracle(a, b));
    }
  }

  TEST_CASE("round trip and minimality on random pairs") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 1000; ++i) {
      const auto src = testing::random_text(rng, 20);
      const auto tgt = i % 10 == 0 ? src : testing::mutate(rng, src);
      CAPTURE(src);
      CAPTURE(tgt);
      const auto chars = extract_edits(src, tgt, {});
      CHECK(check_edits(decode_utf8(src), chars).empty());
      CHECK(apply_edits(src, chars) == tgt);
      CHECK(chars.empty() == (src == tgt));
      CHECK(extract_edits(src, tgt, {}) == chars);

      std::size_t touched = 0;
      for (const auto& e : chars) touched += char_length(e.original) + char_length(e.replacement);
      const auto a = decode_utf8(src), b = decode_utf8(tgt);
      CHECK(touched == a.size() + b.size() - 2 * lcs_oracle(a, b));

      const auto words = extract_edits(src, tgt, whitespace());
      CHECK(check_edits(a, words).empty());
      CHECK(apply_edits(src, words) == tgt);
      CHECK(words.empty() == (src == tgt));
    }
  }

  TEST_CASE("char_level_edits ignores segmenter settings") {
    CHECK(char_level_edits("the cat", "the bat") == EditList{{4, "c", "b"}});
    CHECK(extract_edits("the cat", "the bat", whitespace()) == EditList{{4, "cat", "bat"}});
  }
}
