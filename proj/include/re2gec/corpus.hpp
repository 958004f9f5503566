#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace re2gec {

// The seven grammatical error categories used by FCGEC-style corpora.
enum class ErrorType { IWO, IWC, CM, CR, SC, ILL, AM };

inline constexpr ErrorType kAllErrorTypes[] = {
    ErrorType::IWO, ErrorType::IWC, ErrorType::CM, ErrorType::CR,
    ErrorType::SC,  ErrorType::ILL, ErrorType::AM};

std::string_view to_string(ErrorType type);
std::optional<ErrorType> parse_error_type(std::string_view code);
// Long English name, e.g. "Incorrect Word Collocation".
std::string_view describe(ErrorType type);

// A contiguous correction. `offset` counts characters (Unicode scalar
// values) from the start of the source sentence.
struct Edit {
  std::size_t offset = 0;
  std::string original;
  std::string replacement;

  friend bool operator==(const Edit&, const Edit&) = default;
};

using EditList = std::vector<Edit>;

struct SentencePair {
  std::string id;
  std::string source;
  std::vector<std::string> targets;
  std::vector<ErrorType> error_types;
  // One edit list per target, when present.
  std::optional<std::vector<EditList>> edits;
  std::optional<std::string> explanation;
  std::optional<std::string> rough_explanation;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

enum class CorpusKind { gec, gee, detection };

std::string_view to_string(CorpusKind kind);
std::optional<CorpusKind> parse_corpus_kind(std::string_view name);

struct Corpus {
  std::vector<SentencePair> records;
  CorpusKind kind = CorpusKind::gec;

  const SentencePair* find(std::string_view id) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadOptions {
  // Reject unknown fields instead of warning about them.
  bool strict = false;
  // Receives non-fatal diagnostics. Defaults to standard error.
  std::function<void(const std::string&)> on_warning;
};

// Every violated record invariant, in a fixed order. Empty means ok.
std::vector<std::string> validate_record(const SentencePair& record);

// Parses one JSON-lines record. Errors name the offending field.
SentencePair record_from_json(const nlohmann::json& j, const LoadOptions& options = {});
nlohmann::ordered_json record_to_json(const SentencePair& record);

Corpus parse_corpus(std::string_view text, CorpusKind kind, const LoadOptions& options = {});
Corpus load_corpus(const std::string& path, CorpusKind kind, const LoadOptions& options = {});

std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

nlohmann::ordered_json edits_to_json(const EditList& edits);

}  // namespace re2gec
