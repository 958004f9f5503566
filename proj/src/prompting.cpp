#include "re2gec/prompting.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "re2gec/utf8.hpp"

namespace re2gec {

namespace {

struct BuiltinTemplate {
  std::string_view set;
  std::string_view name;
  std::string_view text;
};

#include "builtin_templates.inc"

constexpr std::array<std::string_view, 8> kKnownPlaceholders = {
    kInput, kSourceN, kTargetN, kInputSentence, kOutputSentence, kEdits, kErrorType,
    kRoughExplanation};

constexpr std::array<std::string_view, 5> kTemplateNames = {
    "gec_with_examples", "gec_without_examples", "gee_with_edits", "gee_with_rough_explanation",
    "gee_input_only"};

bool is_known(std::string_view name) {
  for (auto k : kKnownPlaceholders) {
    if (k == name) return true;
  }
  return false;
}

// Calls visit(begin, end, name) for each known placeholder in `line`.
template <class Visit>
void for_each_placeholder(std::string_view line, Visit&& visit) {
  std::size_t pos = 0;
  while ((pos = line.find('{', pos)) != std::string_view::npos) {
    const auto close = line.find('}', pos + 1);
    if (close == std::string_view::npos) return;
    const auto name = line.substr(pos + 1, close - pos - 1);
    if (is_known(name)) {
      visit(pos, close + 1, name);
      pos = close + 1;
    } else {
      ++pos;
    }
  }
}

bool is_example_line(std::string_view line) {
  bool found = false;
  for_each_placeholder(line, [&](std::size_t, std::size_t, std::string_view name) {
    if (name == kSourceN || name == kTargetN) found = true;
  });
  return found;
}

// nullopt means the line is elided.
std::optional<std::string> substitute(
    std::string_view line, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  std::size_t copied = 0;
  bool drop = false;
  for_each_placeholder(line, [&](std::size_t begin, std::size_t end, std::string_view name) {
    out.append(line.substr(copied, begin - copied));
    copied = end;
    const auto it = values.find(name);
    if (it == values.end()) drop = true;
    else out += it->second;
  });
  if (drop) return std::nullopt;
  out.append(line.substr(copied));
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == text.size()) break;
    pos = nl + 1;
  }
  return lines;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError("cannot open template " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void require_placeholder(const PromptTemplate& t, std::string_view name) {
  if (!t.placeholders().count(name)) {
    throw PromptError("template " + t.name() + " missing required placeholder {" +
                      std::string(name) + "}");
  }
}

// What each role must be able to show, whatever its wording.
TemplateSet checked(TemplateSet set) {
  for (auto name : {"Input", "Source #i", "Target #i"}) require_placeholder(set.gec_with_examples, name);
  require_placeholder(set.gec_without_examples, "Input");
  for (const auto* t : {&set.gee_with_edits, &set.gee_with_rough_explanation, &set.gee_input_only}) {
    require_placeholder(*t, "input sentence");
  }
  require_placeholder(set.gee_with_edits, "edits");
  require_placeholder(set.gee_with_rough_explanation, "rough explanation");
  return set;
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string_view text) {
  if (!is_valid_utf8(text)) throw PromptError("template " + name + " is not valid UTF-8");
  PromptTemplate t;
  t.name_ = std::move(name);
  for (auto& line : split_lines(text)) {
    if (!line.empty() && line[0] == '#') {
      const std::string_view body = std::string_view(line).substr(1);
      const auto colon = body.find(':');
      if (colon == std::string_view::npos) continue;
      const std::string key = trim(body.substr(0, colon));
      const std::string value = trim(body.substr(colon + 1));
      if (key == "required") {
        std::size_t pos = 0;
        while (pos <= value.size()) {
          auto comma = value.find(',', pos);
          if (comma == std::string::npos) comma = value.size();
          auto item = trim(std::string_view(value).substr(pos, comma - pos));
          if (!item.empty()) t.required_.insert(std::move(item));
          pos = comma + 1;
        }
      } else if (key == "answer_label" && !value.empty()) {
        t.answer_label_ = value;
      }
      continue;
    }
    t.lines_.push_back(std::move(line));
  }
  while (!t.lines_.empty() && trim(t.lines_.back()).empty()) t.lines_.pop_back();
  return t;
}

std::set<std::string, std::less<>> PromptTemplate::placeholders() const {
  std::set<std::string, std::less<>> out;
  for (const auto& line : lines_) {
    for_each_placeholder(line, [&](std::size_t, std::size_t, std::string_view name) {
      out.emplace(name);
    });
  }
  return out;
}

std::string PromptTemplate::render(const PromptValues& pv) const {
  for (const auto& req : required_) {
    if (req == kSourceN || req == kTargetN) {
      if (pv.examples.empty()) {
        throw PromptError("template " + name_ + " requires at least one example");
      }
    } else if (!pv.values.count(req)) {
      throw PromptError("template " + name_ + " missing required placeholder {" + req + "}");
    }
  }

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < lines_.size()) {
    if (!is_example_line(lines_[i])) {
      if (auto line = substitute(lines_[i], pv.values)) out.push_back(std::move(*line));
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < lines_.size() && is_example_line(lines_[j])) ++j;
    for (const auto& [source, target] : pv.examples) {
      auto values = pv.values;
      values[std::string(kSourceN)] = source;
      values[std::string(kTargetN)] = target;
      for (std::size_t l = i; l < j; ++l) {
        if (auto line = substitute(lines_[l], values)) out.push_back(std::move(*line));
      }
    }
    i = j;
  }

  std::string text;
  for (std::size_t l = 0; l < out.size(); ++l) {
    if (l) text.push_back('\n');
    text += out[l];
  }
  return text;
}

TemplateSet TemplateSet::builtin(std::string_view name) {
  std::map<std::string_view, std::string_view> found;
  for (const auto& b : kBuiltinTemplates) {
    if (b.set == name) found[b.name] = b.text;
  }
  for (auto n : kTemplateNames) {
    if (!found.count(n)) {
      throw PromptError("no builtin template set " + std::string(name));
    }
  }
  const auto make = [&](std::string_view n) {
    return PromptTemplate::parse(std::string(n), found.at(n));
  };
  return checked({std::string(name), make(kTemplateNames[0]), make(kTemplateNames[1]),
                  make(kTemplateNames[2]), make(kTemplateNames[3]), make(kTemplateNames[4])});
}

std::vector<std::string> TemplateSet::builtin_names() {
  std::set<std::string> names;
  for (const auto& b : kBuiltinTemplates) names.emplace(b.set);
  return {names.begin(), names.end()};
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
  const auto make = [&](std::string_view n) {
    const auto path = (std::filesystem::path(dir) / (std::string(n) + ".txt")).string();
    return PromptTemplate::parse(std::string(n), read_file(path));
  };
  return checked({dir, make(kTemplateNames[0]), make(kTemplateNames[1]), make(kTemplateNames[2]),
                  make(kTemplateNames[3]), make(kTemplateNames[4])});
}

TemplateSet TemplateSet::resolve(const std::string& name_or_dir) {
  for (const auto& n : builtin_names()) {
    if (n == name_or_dir) return builtin(n);
  }
  if (std::filesystem::is_directory(name_or_dir)) return load_dir(name_or_dir);
  throw PromptError("unknown template set " + name_or_dir);
}

std::string render_gec_prompt(std::string_view input,
                              const std::vector<std::pair<std::string, std::string>>& examples,
                              const TemplateSet& templates) {
  const PromptTemplate& t =
      examples.empty() ? templates.gec_without_examples : templates.gec_with_examples;
  require_placeholder(t, kInput);
  if (!examples.empty()) {
    require_placeholder(t, kSourceN);
    require_placeholder(t, kTargetN);
  }
  PromptValues pv;
  pv.values[std::string(kInput)] = std::string(input);
  pv.examples = examples;
  return t.render(pv);
}

std::string_view to_string(GeeVariant variant) {
  switch (variant) {
    case GeeVariant::with_edits: return "with_edits";
    case GeeVariant::with_rough_explanation: return "with_rough_explanation";
    case GeeVariant::input_only: return "input_only";
  }
  return "input_only";
}

std::optional<GeeVariant> parse_gee_variant(std::string_view name) {
  if (name == "with_edits") return GeeVariant::with_edits;
  if (name == "with_rough_explanation") return GeeVariant::with_rough_explanation;
  if (name == "input_only") return GeeVariant::input_only;
  return std::nullopt;
}

std::string format_edits(const EditList& edits) {
  std::string out;
  for (const auto& e : edits) {
    if (!out.empty()) out += ", ";
    out += "[" + std::to_string(e.offset) + ", " + nlohmann::json(e.original).dump() + ", " +
           nlohmann::json(e.replacement).dump() + "]";
  }
  return out;
}

std::string render_gee_prompt(const SentencePair& pair, GeeVariant variant,
                              const TemplateSet& templates) {
  PromptValues pv;
  pv.values[std::string(kInputSentence)] = pair.source;
  if (variant == GeeVariant::input_only) {
    return templates.gee_input_only.render(pv);
  }

  if (pair.targets.empty()) throw PromptError("missing targets");
  if (!pair.edits || pair.edits->empty()) throw PromptError("missing edits");
  // A no-error record has nothing to classify.
  if (pair.error_types.empty() && !pair.edits->front().empty()) {
    throw PromptError("missing error_types");
  }
  pv.values[std::string(kOutputSentence)] = pair.targets.front();
  pv.values[std::string(kEdits)] = format_edits(pair.edits->front());
  std::string types;
  for (auto t : pair.error_types) {
    if (!types.empty()) types += ", ";
    types += to_string(t);
  }
  pv.values[std::string(kErrorType)] = types;

  if (variant == GeeVariant::with_edits) return templates.gee_with_edits.render(pv);

  if (!pair.rough_explanation || pair.rough_explanation->empty()) {
    throw PromptError("missing rough_explanation");
  }
  pv.values[std::string(kRoughExplanation)] = *pair.rough_explanation;
  return templates.gee_with_rough_explanation.render(pv);
}

std::string parse_correction(std::string_view response, const std::optional<std::string>& label) {
  const std::string text = trim(response);
  if (text.empty()) throw PromptError("empty completion");
  if (label && !label->empty() && text.rfind(*label, 0) == 0) {
    std::string rest = trim(std::string_view(text).substr(label->size()));
    if (!rest.empty()) return rest;
  }
  return text;
}

}  // namespace re2gec
