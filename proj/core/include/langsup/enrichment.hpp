#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "langsup/corpus.hpp"
#include "langsup/error.hpp"

namespace langsup {

inline constexpr std::string_view kClassSlot = "{CLS}";
inline constexpr std::string_view kSynonymSlot = "{SYN}";

/// A sentence pattern with exactly one `{CLS}` slot and at most one
/// `{SYN}` slot, e.g. "The point cloud of a {CLS}.".
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string pattern);

  const std::string& pattern() const noexcept { return pattern_; }
  bool has_synonym_slot() const noexcept;
  std::string render(std::string_view category, std::string_view synonym = {}) const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;

 private:
  std::string pattern_;
};

// The question perspectives of the Q&A instruction; `{}` is replaced by the
// target category.
std::vector<std::string> default_perspectives();

struct EnrichmentConfig {
  int target_count = 15;
  std::vector<PromptTemplate> templates;
  std::vector<std::string> perspectives = default_perspectives();
  std::string domain = "indoor scenes";
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";  // empty: send no auth header
  std::string auth_header = "Authorization";   // value is "Bearer <key>"
  double temperature = 0.7;
  int max_retries = 3;
  int backoff_ms = 500;  // doubled after every failed attempt
  int max_in_flight = 4;
  std::filesystem::path cache_dir = ".langsup_cache";

  // Throws a validation error when target_count < 1, max_retries < 0 or
  // max_in_flight < 1.
  void check() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
};

// Wire format: {"model", "messages": [{"role", "content"}], "temperature"}.
std::string chat_request_body(const ChatRequest& request);
// Extracts choices[0].message.content; throws a transport error otherwise.
std::string parse_chat_response(std::string_view body);

/// Thrown by transports. Non-retryable failures (missing credentials,
/// network disabled) skip the backoff loop.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retryable)
      : Error(ErrorKind::kTransport, message), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// One chat-completion round trip. Implementations must be safe to call
/// from several threads at once.
class LlmTransport {
 public:
  virtual ~LlmTransport() = default;
  // Returns the assistant message content.
  virtual std::string complete(const ChatRequest& request) = 0;
};

// POSTs to config.endpoint over HTTP(S). The API key is read from the
// environment on every call, so a cache hit never needs credentials.
std::unique_ptr<LlmTransport> make_http_transport(const EnrichmentConfig& config);

// Fails every request; used under --offline.
std::unique_ptr<LlmTransport> make_offline_transport();

// Serves `<dir>/<category>.txt` for the category named in the instruction's
// final request line. A stand-in for an LLM in tests and fixtures.
std::unique_ptr<LlmTransport> make_file_transport(std::filesystem::path dir);

/// Raw LLM responses keyed by sha256(model + prompt), one file per entry:
/// `<dir>/<hex>.txt`. Writes are atomic; entries are never rewritten.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string key(std::string_view model, std::string_view prompt);
  std::filesystem::path path_for(std::string_view model, std::string_view prompt) const;
  std::optional<std::string> get(std::string_view model, std::string_view prompt) const;
  void put(std::string_view model, std::string_view prompt, std::string_view response) const;

 private:
  std::filesystem::path dir_;
};

struct GenerationRecord {
  std::string category;
  std::string request_prompt;
  std::string raw_response;
  std::vector<std::string> parsed_descriptions;
  std::string timestamp;  // ISO-8601 UTC
  bool from_cache = false;
  int attempts = 0;       // transport calls made
};

// One description per (category, template), in category-major order,
// tagged `template`. Templates with a `{SYN}` slot belong to
// expand_synonyms.
Corpus expand_templates(const std::vector<std::string>& categories,
                        const std::vector<PromptTemplate>& templates);

// Fills `{CLS}` and `{SYN}` for every synonym of every category; tagged
// `synonym`. Every category needs at least one synonym.
Corpus expand_synonyms(const std::vector<std::string>& categories,
                       const std::vector<PromptTemplate>& templates,
                       const std::map<std::string, std::vector<std::string>>& synonyms);

// Synonym file: one `category: syn1, syn2` per line; `#` comments.
std::map<std::string, std::vector<std::string>> parse_synonym_file(std::string_view text);

// Renders the Q&A instruction asking for `n` descriptions of `target`.
std::string build_instruction(const std::vector<std::string>& categories, std::string_view target,
                              const std::vector<std::string>& perspectives, int n,
                              std::string_view domain = "indoor scenes");

// Keeps lines that start with `#k`, `k.`, `k)` or `-`, strips the marker,
// and drops results shorter than 8 characters. When no line carries a
// marker, every non-empty line is a candidate.
std::vector<std::string> parse_response(std::string_view raw);

GenerationRecord generate_descriptions(std::string_view category,
                                       const std::vector<std::string>& categories,
                                       const EnrichmentConfig& config, LlmTransport& transport);

// generate_descriptions for every category with at most
// config.max_in_flight requests outstanding. Records come back in input
// order.
std::vector<GenerationRecord> generate_all(const std::vector<std::string>& categories,
                                           const EnrichmentConfig& config,
                                           LlmTransport& transport);

Corpus records_to_corpus(const std::vector<GenerationRecord>& records);

// Concatenates descriptions category by category, dropping exact repeats
// (first occurrence and its tag win). All parts must name the same set of
// categories; the first part fixes the order.
Corpus assemble_corpus(const std::vector<Corpus>& parts);

// Trims every category to its first `target` descriptions.
Corpus truncate_corpus(const Corpus& corpus, std::size_t target);

}  // namespace langsup
