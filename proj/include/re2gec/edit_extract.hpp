#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "re2gec/corpus.hpp"
#include "re2gec/segmentation.hpp"

namespace re2gec {

class EditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AlignmentKind { equal, replace, remove, insert };

// Half-open token index ranges on each side.
struct AlignmentOp {
  AlignmentKind kind = AlignmentKind::equal;
  std::size_t source_begin = 0;
  std::size_t source_end = 0;
  std::size_t target_begin = 0;
  std::size_t target_end = 0;

  friend bool operator==(const AlignmentOp&, const AlignmentOp&) = default;
};

// LCS alignment over token texts. Among optimal alignments the walk matches
// as early as possible and, when it must skip, drops a source token before
// inserting a target token. Consecutive non-equal steps form one op.
std::vector<AlignmentOp> align_tokens(const std::vector<std::string>& source,
                                      const std::vector<std::string>& target);

// Problems with an edit list relative to `source`, empty when well formed.
std::vector<std::string> check_edits(std::u32string_view source, const EditList& edits);

EditList extract_edits(std::string_view source, std::string_view target,
                       const SegmenterConfig& config);

// Character segmentation regardless of any configured segmenter.
EditList char_level_edits(std::string_view source, std::string_view target);

std::string apply_edits(std::string_view source, const EditList& edits);

}  // namespace re2gec
