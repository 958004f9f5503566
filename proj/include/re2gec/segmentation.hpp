#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace re2gec {

enum class SegmenterMode { character, whitespace, external };

std::string_view to_string(SegmenterMode mode);
std::optional<SegmenterMode> parse_segmenter_mode(std::string_view name);

struct SegmenterConfig {
  SegmenterMode mode = SegmenterMode::character;
  // Shell command line; required iff mode == external.
  std::optional<std::string> external_command;
  std::chrono::milliseconds timeout{10'000};

  friend bool operator==(const SegmenterConfig&, const SegmenterConfig&) = default;
};

class SegmentationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate(const SegmenterConfig& config);

// `start` and `end` are character offsets, end exclusive.
struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

// Tokens plus the text between them. separators.size() == tokens.size() + 1:
// separators[0] precedes the first token, separators.back() trails the last.
// Character mode never produces separators (every character is a token).
struct Segmentation {
  std::vector<Token> tokens;
  std::vector<std::string> separators;

  std::string reconstruct() const;
  std::vector<std::string> texts() const;
};

Segmentation segment(std::string_view text, const SegmenterConfig& config);

// A long-lived child process speaking the line protocol: one sentence per
// input line, one line of space-separated tokens back. Calls are serialized.
class ExternalSegmenter {
 public:
  ExternalSegmenter(std::string command, std::chrono::milliseconds timeout);
  ~ExternalSegmenter();
  ExternalSegmenter(const ExternalSegmenter&) = delete;
  ExternalSegmenter& operator=(const ExternalSegmenter&) = delete;

  std::vector<std::string> tokenize(std::string_view line);

 private:
  void spawn();
  void shutdown();

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  int pid_ = -1;
  int fd_ = -1;
  std::string pending_;
};

// Shared instance per (command, timeout); created on first use.
ExternalSegmenter& external_segmenter(const std::string& command,
                                      std::chrono::milliseconds timeout);

}  // namespace re2gec
