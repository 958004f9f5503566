#include "re2gec/corpus.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "re2gec/edit_extract.hpp"
#include "re2gec/utf8.hpp"

namespace re2gec {

using json = nlohmann::json;

std::string_view to_string(ErrorType type) {
  switch (type) {
    case ErrorType::IWO: return "IWO";
    case ErrorType::IWC: return "IWC";
    case ErrorType::CM: return "CM";
    case ErrorType::CR: return "CR";
    case ErrorType::SC: return "SC";
    case ErrorType::ILL: return "ILL";
    case ErrorType::AM: return "AM";
  }
  return "";
}

std::string_view describe(ErrorType type) {
  switch (type) {
    case ErrorType::IWO: return "Incorrect Word Order";
    case ErrorType::IWC: return "Incorrect Word Collocation";
    case ErrorType::CM: return "Component Missing";
    case ErrorType::CR: return "Component Redundancy";
    case ErrorType::SC: return "Structure Confusion";
    case ErrorType::ILL: return "Illogical";
    case ErrorType::AM: return "Ambiguity";
  }
  return "";
}

std::optional<ErrorType> parse_error_type(std::string_view code) {
  for (ErrorType t : kAllErrorTypes) {
    if (to_string(t) == code) return t;
  }
  return std::nullopt;
}

std::string_view to_string(CorpusKind kind) {
  switch (kind) {
    case CorpusKind::gec: return "gec";
    case CorpusKind::gee: return "gee";
    case CorpusKind::detection: return "detection";
  }
  return "gec";
}

std::optional<CorpusKind> parse_corpus_kind(std::string_view name) {
  if (name == "gec") return CorpusKind::gec;
  if (name == "gee") return CorpusKind::gee;
  if (name == "detection") return CorpusKind::detection;
  return std::nullopt;
}

const SentencePair* Corpus::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<std::string> validate_record(const SentencePair& record) {
  std::vector<std::string> violations;
  if (record.id.empty()) violations.push_back("empty id");
  const bool source_ok = is_valid_utf8(record.source);
  if (!source_ok) violations.push_back("invalid UTF-8 in source");
  if (record.targets.empty()) violations.push_back("empty targets");
  for (const auto& t : record.targets) {
    if (!is_valid_utf8(t)) {
      violations.push_back("invalid UTF-8 in target");
      break;
    }
  }
  if (record.edits && source_ok) {
    const auto& edits = *record.edits;
    if (edits.size() != record.targets.size()) {
      violations.push_back("edit lists do not parallel targets");
    }
    const auto source = decode_utf8(record.source);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < edits.size(); ++i) {
      const auto problems = check_edits(source, edits[i]);
      for (const auto& p : problems) {
        // "empty edit at offset 3" -> "empty edit", one report per kind
        const auto kind = p.substr(0, p.find(" at offset"));
        if (seen.insert(kind).second) violations.push_back(kind);
      }
      if (problems.empty() && i < record.targets.size() &&
          apply_edits(record.source, edits[i]) != record.targets[i]) {
        if (seen.insert("edit/target mismatch").second) {
          violations.push_back("edit/target mismatch");
        }
      }
    }
  }
  return violations;
}

namespace {

const std::set<std::string>& known_fields() {
  static const std::set<std::string> fields = {
      "id", "source", "targets", "error_types", "edits", "explanation", "rough_explanation"};
  return fields;
}

std::string require_string(const json& j, const char* field) {
  if (!j.contains(field)) throw CorpusError(std::string("missing field ") + field);
  if (!j[field].is_string()) throw CorpusError(std::string("field ") + field + " must be a string");
  return j[field].get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* field) {
  if (!j.contains(field) || j[field].is_null()) return std::nullopt;
  if (!j[field].is_string()) throw CorpusError(std::string("field ") + field + " must be a string");
  return j[field].get<std::string>();
}

Edit edit_from_json(const json& triple) {
  if (!triple.is_array() || triple.size() != 3 || !triple[0].is_number_unsigned() ||
      !triple[1].is_string() || !triple[2].is_string()) {
    throw CorpusError("edit must be [offset, original, replacement]");
  }
  return {triple[0].get<std::size_t>(), triple[1].get<std::string>(), triple[2].get<std::string>()};
}

}  // namespace

SentencePair record_from_json(const json& j, const LoadOptions& options) {
  if (!j.is_object()) throw CorpusError("record must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (known_fields().count(key)) continue;
    if (options.strict) throw CorpusError("unknown field " + key);
    const std::string msg = "ignoring unknown field " + key;
    if (options.on_warning) options.on_warning(msg);
    else std::cerr << "warning: " << msg << '\n';
  }

  SentencePair r;
  r.id = require_string(j, "id");
  r.source = require_string(j, "source");
  if (!j.contains("targets") || !j["targets"].is_array()) {
    throw CorpusError("field targets must be an array of strings");
  }
  for (const auto& t : j["targets"]) {
    if (!t.is_string()) throw CorpusError("field targets must be an array of strings");
    r.targets.push_back(t.get<std::string>());
  }
  if (j.contains("error_types") && !j["error_types"].is_null()) {
    for (const auto& code : j["error_types"]) {
      const auto type = code.is_string() ? parse_error_type(code.get<std::string>()) : std::nullopt;
      if (!type) throw CorpusError("unknown error type " + code.dump());
      r.error_types.push_back(*type);
    }
  }
  if (j.contains("edits") && !j["edits"].is_null()) {
    if (!j["edits"].is_array()) throw CorpusError("field edits must be a list of edit lists");
    std::vector<EditList> lists;
    for (const auto& list : j["edits"]) {
      if (!list.is_array()) throw CorpusError("field edits must be a list of edit lists");
      EditList edits;
      for (const auto& triple : list) edits.push_back(edit_from_json(triple));
      lists.push_back(std::move(edits));
    }
    r.edits = std::move(lists);
  }
  r.explanation = optional_string(j, "explanation");
  r.rough_explanation = optional_string(j, "rough_explanation");
  return r;
}

nlohmann::ordered_json edits_to_json(const EditList& edits) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& e : edits) out.push_back({e.offset, e.original, e.replacement});
  return out;
}

nlohmann::ordered_json record_to_json(const SentencePair& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["source"] = r.source;
  j["targets"] = r.targets;
  if (!r.error_types.empty()) {
    auto types = nlohmann::ordered_json::array();
    for (auto t : r.error_types) types.push_back(std::string(to_string(t)));
    j["error_types"] = std::move(types);
  }
  if (r.edits) {
    auto lists = nlohmann::ordered_json::array();
    for (const auto& list : *r.edits) lists.push_back(edits_to_json(list));
    j["edits"] = std::move(lists);
  }
  if (r.explanation) j["explanation"] = *r.explanation;
  if (r.rough_explanation) j["rough_explanation"] = *r.rough_explanation;
  return j;
}

Corpus parse_corpus(std::string_view text, CorpusKind kind, const LoadOptions& options) {
  Corpus corpus;
  corpus.kind = kind;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = " at line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("malformed record" + where + ": " + e.what());
    }
    SentencePair record;
    try {
      LoadOptions local = options;
      if (!options.on_warning) {
        local.on_warning = [&](const std::string& msg) {
          std::cerr << "warning: " << msg << where << '\n';
        };
      } else {
        local.on_warning = [&](const std::string& msg) { options.on_warning(msg + where); };
      }
      record = record_from_json(j, local);
    } catch (const CorpusError& e) {
      const std::string msg = e.what();
      if (msg.rfind("unknown error type", 0) == 0) {
        throw CorpusError("unknown error type" + where + ": " + msg.substr(19));
      }
      throw CorpusError(msg + where);
    }
    const auto violations = validate_record(record);
    if (!violations.empty()) {
      throw CorpusError(violations.front() + " id=" + record.id + where);
    }
    if (!ids.insert(record.id).second) {
      throw CorpusError("duplicate id " + record.id + where);
    }
    corpus.records.push_back(std::move(record));
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, CorpusKind kind, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), kind, options);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records) {
    out += record_to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus " + path);
  out << serialize_corpus(corpus);
}

}  // namespace re2gec
