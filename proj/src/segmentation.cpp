#include "re2gec/segmentation.hpp"

#include <map>
#include <utility>

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "re2gec/utf8.hpp"

namespace re2gec {

std::string_view to_string(SegmenterMode mode) {
  switch (mode) {
    case SegmenterMode::character: return "character";
    case SegmenterMode::whitespace: return "whitespace";
    case SegmenterMode::external: return "external";
  }
  return "character";
}

std::optional<SegmenterMode> parse_segmenter_mode(std::string_view name) {
  if (name == "character") return SegmenterMode::character;
  if (name == "whitespace") return SegmenterMode::whitespace;
  if (name == "external") return SegmenterMode::external;
  return std::nullopt;
}

void validate(const SegmenterConfig& config) {
  const bool external = config.mode == SegmenterMode::external;
  const bool has_command = config.external_command && !config.external_command->empty();
  if (external && !has_command) {
    throw SegmentationError("external segmenter requires a command");
  }
  if (!external && config.external_command) {
    throw SegmentationError("external command given for non-external segmenter");
  }
}

std::string Segmentation::reconstruct() const {
  std::string out = separators.empty() ? std::string() : separators[0];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out += tokens[i].text;
    out += separators[i + 1];
  }
  return out;
}

std::vector<std::string> Segmentation::texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

namespace {

Segmentation segment_characters(const std::u32string& chars) {
  Segmentation seg;
  seg.separators.assign(chars.size() + 1, std::string());
  seg.tokens.reserve(chars.size());
  for (std::size_t i = 0; i < chars.size(); ++i) {
    seg.tokens.push_back({encode_utf8(chars[i]), i, i + 1});
  }
  return seg;
}

Segmentation segment_whitespace(const std::u32string& chars) {
  Segmentation seg;
  std::size_t i = 0;
  std::u32string sep;
  while (i < chars.size()) {
    if (is_unicode_space(chars[i])) {
      sep.push_back(chars[i++]);
      continue;
    }
    seg.separators.push_back(encode_utf8(sep));
    sep.clear();
    const std::size_t start = i;
    while (i < chars.size() && !is_unicode_space(chars[i])) ++i;
    seg.tokens.push_back(
        {encode_utf8(std::u32string_view(chars).substr(start, i - start)), start, i});
  }
  seg.separators.push_back(encode_utf8(sep));
  return seg;
}

// Aligns tokens returned by an external tool back onto the input. Input
// whitespace the tool dropped becomes separator text.
Segmentation align_external(std::string_view text, const std::u32string& chars,
                            const std::vector<std::string>& pieces) {
  Segmentation seg;
  std::size_t pos = 0;
  std::u32string sep;
  for (const auto& piece : pieces) {
    const auto token = decode_utf8(piece);
    while (pos < chars.size() && is_unicode_space(chars[pos]) &&
           chars.compare(pos, token.size(), token) != 0) {
      sep.push_back(chars[pos++]);
    }
    if (chars.compare(pos, token.size(), token) != 0) {
      throw SegmentationError("external segmenter output does not re-concatenate to input: " +
                              std::string(text));
    }
    seg.separators.push_back(encode_utf8(sep));
    sep.clear();
    seg.tokens.push_back({piece, pos, pos + token.size()});
    pos += token.size();
  }
  while (pos < chars.size() && is_unicode_space(chars[pos])) sep.push_back(chars[pos++]);
  if (pos != chars.size()) {
    throw SegmentationError("external segmenter output does not re-concatenate to input: " +
                            std::string(text));
  }
  seg.separators.push_back(encode_utf8(sep));
  return seg;
}

}  // namespace

Segmentation segment(std::string_view text, const SegmenterConfig& config) {
  validate(config);
  const auto chars = decode_utf8(text);
  switch (config.mode) {
    case SegmenterMode::character:
      return segment_characters(chars);
    case SegmenterMode::whitespace:
      return segment_whitespace(chars);
    case SegmenterMode::external: {
      if (text.find('\n') != std::string_view::npos || text.find('\r') != std::string_view::npos) {
        throw SegmentationError("line breaks cannot be sent to an external segmenter: " +
                                std::string(text));
      }
      auto& seg = external_segmenter(*config.external_command, config.timeout);
      return align_external(text, chars, seg.tokenize(text));
    }
  }
  return segment_characters(chars);
}

ExternalSegmenter::ExternalSegmenter(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {}

ExternalSegmenter::~ExternalSegmenter() { shutdown(); }

void ExternalSegmenter::spawn() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw SegmentationError("cannot create segmenter channel");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw SegmentationError("cannot fork segmenter: " + command_);
  }
  if (pid == 0) {
    ::close(fds[0]);
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  pid_ = pid;
  fd_ = fds[0];
  pending_.clear();
}

void ExternalSegmenter::shutdown() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
  pending_.clear();
}

std::vector<std::string> ExternalSegmenter::tokenize(std::string_view line) {
  std::lock_guard lock(mutex_);
  if (fd_ < 0) spawn();

  const auto fail = [&](const std::string& why) {
    shutdown();
    throw SegmentationError("external segmenter (" + command_ + ") " + why +
                            " on line: " + std::string(line));
  };

  std::string request(line);
  request.push_back('\n');
  std::size_t written = 0;
  while (written < request.size()) {
    const auto n = ::send(fd_, request.data() + written, request.size() - written, MSG_NOSIGNAL);
    if (n <= 0) fail("rejected input");
    written += static_cast<std::size_t>(n);
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  std::size_t newline = pending_.find('\n');
  while (newline == std::string::npos) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) fail("timed out");
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready == 0) fail("timed out");
    if (ready < 0) fail("poll failed");
    char buf[4096];
    const auto n = ::recv(fd_, buf, sizeof buf, 0);
    if (n <= 0) fail("exited");
    pending_.append(buf, static_cast<std::size_t>(n));
    newline = pending_.find('\n');
  }
  std::string reply = pending_.substr(0, newline);
  pending_.erase(0, newline + 1);
  if (!reply.empty() && reply.back() == '\r') reply.pop_back();
  if (!is_valid_utf8(reply)) fail("returned invalid UTF-8");

  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    const auto space = reply.find(' ', pos);
    const auto end = space == std::string::npos ? reply.size() : space;
    if (end > pos) tokens.push_back(reply.substr(pos, end - pos));
    if (space == std::string::npos) break;
    pos = space + 1;
  }
  return tokens;
}

ExternalSegmenter& external_segmenter(const std::string& command,
                                      std::chrono::milliseconds timeout) {
  static std::mutex registry_mutex;
  static std::map<std::pair<std::string, long long>, std::unique_ptr<ExternalSegmenter>> registry;
  std::lock_guard lock(registry_mutex);
  auto& slot = registry[{command, static_cast<long long>(timeout.count())}];
  if (!slot) slot = std::make_unique<ExternalSegmenter>(command, timeout);
  return *slot;
}

}  // namespace re2gec
