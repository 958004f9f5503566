#include "re2gec/edit_extract.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

#include "re2gec/utf8.hpp"

namespace re2gec {

namespace {

enum class Step : std::uint8_t { match, drop, add };

std::vector<Step> lcs_walk(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::unordered_map<std::string_view, std::uint32_t> ids;
  const auto intern = [&](const std::vector<std::string>& xs) {
    std::vector<std::uint32_t> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
      out.push_back(ids.emplace(x, static_cast<std::uint32_t>(ids.size())).first->second);
    }
    return out;
  };
  const auto x = intern(a);
  const auto y = intern(b);
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  const std::size_t width = m + 1;

  // suffix[i][j] = LCS length of x[i..] and y[j..]
  std::vector<std::uint32_t> suffix((n + 1) * width, 0);
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      suffix[i * width + j] = x[i] == y[j]
                                  ? suffix[(i + 1) * width + j + 1] + 1
                                  : std::max(suffix[(i + 1) * width + j], suffix[i * width + j + 1]);
    }
  }

  std::vector<Step> steps;
  steps.reserve(n + m);
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n && j < m) {
    if (x[i] == y[j] && suffix[i * width + j] == suffix[(i + 1) * width + j + 1] + 1) {
      steps.push_back(Step::match);
      ++i;
      ++j;
    } else if (suffix[(i + 1) * width + j] >= suffix[i * width + j + 1]) {
      steps.push_back(Step::drop);
      ++i;
    } else {
      steps.push_back(Step::add);
      ++j;
    }
  }
  for (; i < n; ++i) steps.push_back(Step::drop);
  for (; j < m; ++j) steps.push_back(Step::add);
  return steps;
}

std::size_t common_prefix(std::u32string_view a, std::u32string_view b, std::size_t limit) {
  std::size_t k = 0;
  while (k < limit && k < a.size() && k < b.size() && a[k] == b[k]) ++k;
  return k;
}

std::size_t common_suffix(std::u32string_view a, std::u32string_view b, std::size_t limit) {
  std::size_t k = 0;
  while (k < limit && k < a.size() && k < b.size() && a[a.size() - 1 - k] == b[b.size() - 1 - k]) {
    ++k;
  }
  return k;
}

// Characters of gap [begin, end) that are separator text before the first
// (or after the last) changed token; only those may be trimmed away.
struct Gap {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t lead = 0;
  std::size_t trail = 0;
};

Gap make_gap(const Segmentation& seg, std::size_t char_begin, std::size_t char_end,
             std::size_t tok_begin, std::size_t tok_end) {
  Gap g{char_begin, char_end, char_end - char_begin, char_end - char_begin};
  if (tok_begin < tok_end) {
    g.lead = seg.tokens[tok_begin].start - char_begin;
    g.trail = char_end - seg.tokens[tok_end - 1].end;
  }
  return g;
}

void emit_gap(const std::u32string& src, const std::u32string& tgt, const Gap& gs, const Gap& gt,
              EditList& out) {
  std::u32string_view s = std::u32string_view(src).substr(gs.begin, gs.end - gs.begin);
  std::u32string_view t = std::u32string_view(tgt).substr(gt.begin, gt.end - gt.begin);
  if (s == t) return;
  const std::size_t pre = common_prefix(s, t, std::min(gs.lead, gt.lead));
  s.remove_prefix(pre);
  t.remove_prefix(pre);
  const std::size_t trail_s = std::min(gs.trail, s.size());
  const std::size_t trail_t = std::min(gt.trail, t.size());
  const std::size_t post = common_suffix(s, t, std::min(trail_s, trail_t));
  s.remove_suffix(post);
  t.remove_suffix(post);
  out.push_back({gs.begin + pre, encode_utf8(s), encode_utf8(t)});
}

}  // namespace

std::vector<AlignmentOp> align_tokens(const std::vector<std::string>& source,
                                      const std::vector<std::string>& target) {
  const auto steps = lcs_walk(source, target);
  std::vector<AlignmentOp> ops;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  while (k < steps.size()) {
    AlignmentOp op{AlignmentKind::equal, i, i, j, j};
    if (steps[k] == Step::match) {
      while (k < steps.size() && steps[k] == Step::match) {
        ++i;
        ++j;
        ++k;
      }
    } else {
      while (k < steps.size() && steps[k] != Step::match) {
        if (steps[k] == Step::drop) ++i;
        else ++j;
        ++k;
      }
      const bool removes = i > op.source_begin;
      const bool inserts = j > op.target_begin;
      op.kind = removes && inserts ? AlignmentKind::replace
                : removes          ? AlignmentKind::remove
                                   : AlignmentKind::insert;
    }
    op.source_end = i;
    op.target_end = j;
    ops.push_back(op);
  }
  return ops;
}

std::vector<std::string> check_edits(std::u32string_view source, const EditList& edits) {
  std::vector<std::string> problems;
  bool unsorted = false;
  bool overlapping = false;
  for (std::size_t i = 0; i < edits.size(); ++i) {
    const Edit& e = edits[i];
    const std::string at = " at offset " + std::to_string(e.offset);
    if (e.original.empty() && e.replacement.empty()) problems.push_back("empty edit" + at);
    if (!is_valid_utf8(e.original) || !is_valid_utf8(e.replacement)) {
      problems.push_back("invalid UTF-8 in edit" + at);
      continue;
    }
    const auto original = decode_utf8(e.original);
    if (e.offset > source.size() || original.size() > source.size() - e.offset) {
      problems.push_back("edit out of range" + at);
    } else if (source.substr(e.offset, original.size()) != original) {
      problems.push_back("original span mismatch" + at);
    }
    if (i > 0) {
      const Edit& prev = edits[i - 1];
      if (e.offset < prev.offset) {
        unsorted = true;
      } else if (e.offset == prev.offset || e.offset < prev.offset + char_length(prev.original)) {
        overlapping = true;
      }
    }
  }
  if (unsorted) problems.push_back("unsorted edits");
  if (overlapping) problems.push_back("overlapping edits");
  return problems;
}

std::string apply_edits(std::string_view source, const EditList& edits) {
  std::u32string text = decode_utf8(source);
  const auto problems = check_edits(text, edits);
  if (!problems.empty()) throw EditError("cannot apply edits: " + problems.front());
  for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
    text.replace(it->offset, char_length(it->original), decode_utf8(it->replacement));
  }
  return encode_utf8(text);
}

EditList extract_edits(std::string_view source, std::string_view target,
                       const SegmenterConfig& config) {
  const auto src = decode_utf8(source);
  const auto tgt = decode_utf8(target);
  const Segmentation ss = segment(source, config);
  const Segmentation st = segment(target, config);
  const auto ops = align_tokens(ss.texts(), st.texts());

  EditList edits;
  std::size_t s_char = 0;
  std::size_t t_char = 0;
  std::size_t s_tok = 0;
  std::size_t t_tok = 0;
  // Every equal token pair is an anchor; the text between consecutive
  // anchors on each side is one gap and yields at most one edit.
  const auto flush_until = [&](std::size_t s_next_tok, std::size_t t_next_tok) {
    const std::size_t s_stop = s_next_tok < ss.tokens.size() ? ss.tokens[s_next_tok].start : src.size();
    const std::size_t t_stop = t_next_tok < st.tokens.size() ? st.tokens[t_next_tok].start : tgt.size();
    emit_gap(src, tgt, make_gap(ss, s_char, s_stop, s_tok, s_next_tok),
             make_gap(st, t_char, t_stop, t_tok, t_next_tok), edits);
  };
  for (const auto& op : ops) {
    if (op.kind != AlignmentKind::equal) continue;
    for (std::size_t k = 0; k < op.source_end - op.source_begin; ++k) {
      const std::size_t si = op.source_begin + k;
      const std::size_t ti = op.target_begin + k;
      flush_until(si, ti);
      s_char = ss.tokens[si].end;
      t_char = st.tokens[ti].end;
      s_tok = si + 1;
      t_tok = ti + 1;
    }
  }
  flush_until(ss.tokens.size(), st.tokens.size());
  return edits;
}

EditList char_level_edits(std::string_view source, std::string_view target) {
  return extract_edits(source, target, SegmenterConfig{});
}

}  // namespace re2gec
