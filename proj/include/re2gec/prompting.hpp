#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "re2gec/corpus.hpp"

namespace re2gec {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Placeholder names understood by templates.
inline constexpr std::string_view kInput = "Input";
inline constexpr std::string_view kSourceN = "Source #i";
inline constexpr std::string_view kTargetN = "Target #i";
inline constexpr std::string_view kInputSentence = "input sentence";
inline constexpr std::string_view kOutputSentence = "output sentence";
inline constexpr std::string_view kEdits = "edits";
inline constexpr std::string_view kErrorType = "error type";
inline constexpr std::string_view kRoughExplanation = "rough explanation";

struct PromptValues {
  std::map<std::string, std::string, std::less<>> values;
  std::vector<std::pair<std::string, std::string>> examples;  // (source, target) in rank order
};

// A text template with {Placeholder} slots.
//
// File format: UTF-8; lines beginning with '#' are comments and never
// rendered. Two comment directives are recognized:
//   # required: Input, Source #i, Target #i
//   # answer_label: 纠正后：
// Body lines mentioning {Source #i} or {Target #i} form the example block,
// which is repeated once per example. A line holding an unbound optional
// placeholder is dropped entirely; an unbound required one is an error.
class PromptTemplate {
 public:
  static PromptTemplate parse(std::string name, std::string_view text);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& lines() const { return lines_; }
  const std::set<std::string, std::less<>>& required() const { return required_; }
  const std::optional<std::string>& answer_label() const { return answer_label_; }

  // Every known placeholder appearing in the body.
  std::set<std::string, std::less<>> placeholders() const;

  std::string render(const PromptValues& values) const;

 private:
  std::string name_;
  std::vector<std::string> lines_;
  std::set<std::string, std::less<>> required_;
  std::optional<std::string> answer_label_;
};

struct TemplateSet {
  std::string name;
  PromptTemplate gec_with_examples;
  PromptTemplate gec_without_examples;
  PromptTemplate gee_with_edits;
  PromptTemplate gee_with_rough_explanation;
  PromptTemplate gee_input_only;

  // Compiled-in copies of templates/<name>/ ("zh" or "en").
  static TemplateSet builtin(std::string_view name = "zh");
  static TemplateSet load_dir(const std::string& dir);
  // A builtin set name, or else a directory path.
  static TemplateSet resolve(const std::string& name_or_dir);
  static std::vector<std::string> builtin_names();
};

std::string render_gec_prompt(std::string_view input,
                              const std::vector<std::pair<std::string, std::string>>& examples,
                              const TemplateSet& templates);

enum class GeeVariant { with_edits, with_rough_explanation, input_only };

std::string_view to_string(GeeVariant variant);
std::optional<GeeVariant> parse_gee_variant(std::string_view name);

// `Edits:` payload: [offset, "original", "replacement"] per edit, comma separated.
std::string format_edits(const EditList& edits);

// Uses the first target and its edit list.
std::string render_gee_prompt(const SentencePair& pair, GeeVariant variant,
                              const TemplateSet& templates);

// Trims the response and strips `label` when it prefixes the answer.
std::string parse_correction(std::string_view response,
                             const std::optional<std::string>& label = std::nullopt);

}  // namespace re2gec
