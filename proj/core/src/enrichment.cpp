#include "langsup/enrichment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <set>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "langsup/io.hpp"

namespace langsup {

using detail::json;

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size()))
    ++count;
  return count;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string pattern) : pattern_(std::move(pattern)) {
  if (count_occurrences(pattern_, kClassSlot) != 1)
    throw_validation("template must contain {CLS} exactly once: \"" + pattern_ + "\"");
  if (count_occurrences(pattern_, kSynonymSlot) > 1)
    throw_validation("template may contain {SYN} at most once: \"" + pattern_ + "\"");
}

bool PromptTemplate::has_synonym_slot() const noexcept {
  return pattern_.find(kSynonymSlot) != std::string::npos;
}

std::string PromptTemplate::render(std::string_view category, std::string_view synonym) const {
  std::string out = replace_all(pattern_, kClassSlot, category);
  if (has_synonym_slot()) out = replace_all(std::move(out), kSynonymSlot, synonym);
  return out;
}

std::vector<std::string> default_perspectives() {
  return {
      "Describe what a {} looks like.",
      "Visually describe a {}.",
      "How can you identify a {}?",
      "Provide a visual analysis of a {} and its key components.",
      "Can you provide a detailed description of the {}'s physical appearance?",
      "What are the distinguishing features of a {}?",
      "A caption of a photo of a {}.",
  };
}

void EnrichmentConfig::check() const {
  if (target_count < 1) throw_validation("target_count must be >= 1");
  if (max_retries < 0) throw_validation("max_retries must be >= 0");
  if (max_in_flight < 1) throw_validation("max_in_flight must be >= 1");
  if (backoff_ms < 0) throw_validation("backoff_ms must be >= 0");
}

std::string chat_request_body(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"model", request.model}, {"messages", messages}, {"temperature", request.temperature}}
      .dump();
}

std::string parse_chat_response(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body.begin(), body.end());
  } catch (const json::parse_error&) {
    throw TransportError("chat response is not JSON", false);
  }
  try {
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("chat response lacks choices[0].message.content", false);
  }
}

// ---------------------------------------------------------------------------

namespace {

class OfflineTransport final : public LlmTransport {
 public:
  std::string complete(const ChatRequest&) override {
    throw TransportError("network use is disabled (offline mode)", false);
  }
};

class FileTransport final : public LlmTransport {
 public:
  explicit FileTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::string complete(const ChatRequest& request) override {
    if (request.messages.empty()) throw TransportError("empty chat request", false);
    const std::string& prompt = request.messages.back().content;
    // The target is the quoted name on the instruction's last line.
    const auto close = prompt.rfind('"');
    const auto open = close == std::string::npos ? close : prompt.rfind('"', close - 1);
    if (open == std::string::npos)
      throw TransportError("file transport: no quoted target in prompt", false);
    const auto target = prompt.substr(open + 1, close - open - 1);
    const auto path = dir_ / (target + ".txt");
    if (!std::filesystem::exists(path))
      throw TransportError("file transport: no response for \"" + target + "\" in " + dir_.string(),
                           false);
    return read_text_file(path);
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace

std::unique_ptr<LlmTransport> make_offline_transport() { return std::make_unique<OfflineTransport>(); }

std::unique_ptr<LlmTransport> make_file_transport(std::filesystem::path dir) {
  return std::make_unique<FileTransport>(std::move(dir));
}

// ---------------------------------------------------------------------------

std::string ResponseCache::key(std::string_view model, std::string_view prompt) {
  std::string material(model);
  material.append(prompt);
  return sha256_hex(material);
}

std::filesystem::path ResponseCache::path_for(std::string_view model, std::string_view prompt) const {
  return dir_ / (key(model, prompt) + ".txt");
}

std::optional<std::string> ResponseCache::get(std::string_view model, std::string_view prompt) const {
  const auto path = path_for(model, prompt);
  if (!std::filesystem::exists(path)) return std::nullopt;
  return read_text_file(path);
}

void ResponseCache::put(std::string_view model, std::string_view prompt, std::string_view response) const {
  const auto path = path_for(model, prompt);
  if (std::filesystem::exists(path)) return;
  write_text_file_atomic(path, response);
}

// ---------------------------------------------------------------------------

Corpus expand_templates(const std::vector<std::string>& categories,
                        const std::vector<PromptTemplate>& templates) {
  std::set<std::string_view> patterns;
  for (const auto& t : templates) {
    if (t.has_synonym_slot())
      throw_validation("template \"" + t.pattern() + "\" has a {SYN} slot; use the synonym expansion");
    if (!patterns.insert(t.pattern()).second)
      throw_validation("duplicate template \"" + t.pattern() + "\"");
  }
  Corpus corpus;
  for (const auto& cls : categories) {
    CategoryEntry entry{cls, {}, {}};
    for (const auto& t : templates) {
      entry.descriptions.push_back(t.render(cls));
      entry.source_tags.push_back(SourceTag::kTemplate);
    }
    corpus.categories.push_back(std::move(entry));
  }
  check_corpus(corpus);
  return corpus;
}

Corpus expand_synonyms(const std::vector<std::string>& categories,
                       const std::vector<PromptTemplate>& templates,
                       const std::map<std::string, std::vector<std::string>>& synonyms) {
  Corpus corpus;
  for (const auto& cls : categories) {
    auto it = synonyms.find(cls);
    if (it == synonyms.end() || it->second.empty())
      throw_validation("no synonyms for category \"" + cls + "\"");
    CategoryEntry entry{cls, {}, {}};
    std::set<std::string> seen;
    for (const auto& syn : it->second) {
      for (const auto& t : templates) {
        std::string d = t.render(cls, syn);
        if (!seen.insert(d).second) continue;
        entry.descriptions.push_back(std::move(d));
        entry.source_tags.push_back(SourceTag::kSynonym);
      }
    }
    corpus.categories.push_back(std::move(entry));
  }
  check_corpus(corpus);
  return corpus;
}

std::map<std::string, std::vector<std::string>> parse_synonym_file(std::string_view text) {
  std::map<std::string, std::vector<std::string>> out;
  std::size_t lineno = 0;
  for (auto raw : split_lines(text)) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw_validation("synonym file line " + std::to_string(lineno) + ": expected 'category: syn, ...'");
    const std::string cls(trim(line.substr(0, colon)));
    auto rest = line.substr(colon + 1);
    auto& list = out[cls];
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      auto syn = trim(rest.substr(0, comma));
      if (!syn.empty()) list.emplace_back(syn);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  return out;
}

std::string build_instruction(const std::vector<std::string>& categories, std::string_view target,
                              const std::vector<std::string>& perspectives, int n,
                              std::string_view domain) {
  if (n < 1) throw_validation("description count must be >= 1");
  if (std::find(categories.begin(), categories.end(), target) == categories.end())
    throw_validation("target \"" + std::string(target) + "\" is not in the category list");

  std::ostringstream out;
  out << "There are " << categories.size() << " semantic "
      << (categories.size() == 1 ? "category" : "categories") << " in " << domain
      << " as follows:\n\"";
  for (std::size_t i = 0; i < categories.size(); ++i) out << (i ? ", " : "") << categories[i];
  out << ".\"\n\n";
  if (!perspectives.empty()) {
    out << "Do you know how to distinguish them? You can consider from the following perspectives:\n";
    for (const auto& p : perspectives) out << "- " << replace_all(p, "{}", target) << "\n";
  }
  out << "Please generate " << n << (n == 1 ? " description" : " descriptions") << " for the \""
      << target << "\".";
  return out.str();
}

std::vector<std::string> parse_response(std::string_view raw) {
  constexpr std::size_t kMinLength = 8;
  std::vector<std::string> marked, plain;
  bool any_marker = false;
  for (auto line : split_lines(raw)) {
    line = trim(line);
    if (line.empty()) continue;
    std::string_view body;
    bool has_marker = false;
    std::size_t pos = 0;
    if (line.front() == '#') pos = 1;
    std::size_t digits = pos;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (pos == 1 && digits > 1) {
      has_marker = true;
      body = line.substr(digits);
    } else if (pos == 0 && digits > 0 && digits < line.size() &&
               (line[digits] == '.' || line[digits] == ')')) {
      has_marker = true;
      body = line.substr(digits + 1);
    } else if (line.front() == '-') {
      has_marker = true;
      body = line.substr(1);
    }
    if (has_marker) {
      any_marker = true;
      body = trim(body);
      if (!body.empty() && (body.front() == ':' || body.front() == '.')) body = trim(body.substr(1));
      if (body.size() >= kMinLength) marked.emplace_back(body);
    } else if (line.size() >= kMinLength) {
      plain.emplace_back(line);
    }
  }
  // Any marked line means the unmarked ones are chatter around the list.
  return any_marker ? marked : plain;
}

GenerationRecord generate_descriptions(std::string_view category,
                                       const std::vector<std::string>& categories,
                                       const EnrichmentConfig& config, LlmTransport& transport) {
  config.check();
  GenerationRecord rec;
  rec.category = std::string(category);
  rec.request_prompt =
      build_instruction(categories, category, config.perspectives, config.target_count, config.domain);

  const ResponseCache cache(config.cache_dir);
  if (auto hit = cache.get(config.model_name, rec.request_prompt)) {
    rec.raw_response = std::move(*hit);
    rec.from_cache = true;
  } else {
    ChatRequest request{config.model_name, {{"user", rec.request_prompt}}, config.temperature};
    int delay_ms = config.backoff_ms;
    for (int attempt = 0;; ++attempt) {
      try {
        ++rec.attempts;
        rec.raw_response = transport.complete(request);
        break;
      } catch (const TransportError& e) {
        if (!e.retryable() || attempt >= config.max_retries)
          throw TransportError("generation for \"" + rec.category + "\" failed after " +
                                   std::to_string(rec.attempts) + " attempt(s): " + e.what(),
                               false);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
  }

  auto parsed = parse_response(rec.raw_response);
  if (parsed.empty())
    throw TransportError("unparseable or empty response for \"" + rec.category + "\"", false);
  // Only well-formed responses are cached, so a bad answer is re-requested.
  if (!rec.from_cache) cache.put(config.model_name, rec.request_prompt, rec.raw_response);

  std::set<std::string> seen;
  for (auto& d : parsed) {
    if (rec.parsed_descriptions.size() >= static_cast<std::size_t>(config.target_count)) break;
    if (seen.insert(d).second) rec.parsed_descriptions.push_back(std::move(d));
  }
  rec.timestamp = iso8601_now();
  return rec;
}

std::vector<GenerationRecord> generate_all(const std::vector<std::string>& categories,
                                           const EnrichmentConfig& config, LlmTransport& transport) {
  config.check();
  std::vector<GenerationRecord> records(categories.size());
  std::vector<std::exception_ptr> errors(categories.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < categories.size(); i = next++) {
      try {
        records[i] = generate_descriptions(categories[i], categories, config, transport);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(config.max_in_flight), categories.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  pool.clear();  // joins
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

Corpus records_to_corpus(const std::vector<GenerationRecord>& records) {
  Corpus corpus;
  for (const auto& r : records) {
    CategoryEntry entry{r.category, r.parsed_descriptions,
                        std::vector<SourceTag>(r.parsed_descriptions.size(), SourceTag::kGenerated)};
    corpus.categories.push_back(std::move(entry));
  }
  check_corpus(corpus);
  return corpus;
}

Corpus assemble_corpus(const std::vector<Corpus>& parts) {
  if (parts.empty()) return {};
  const auto names = parts.front().names();
  const std::set<std::string> reference(names.begin(), names.end());
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const auto other = parts[p].names();
    if (std::set<std::string>(other.begin(), other.end()) != reference)
      throw_validation("category set of part " + std::to_string(p) + " differs from part 0");
  }
  Corpus out;
  for (const auto& name : names) {
    CategoryEntry entry{name, {}, {}};
    std::set<std::string> seen;
    for (const auto& part : parts) {
      const CategoryEntry* src = part.find(name);
      for (std::size_t i = 0; i < src->descriptions.size(); ++i) {
        if (!seen.insert(src->descriptions[i]).second) continue;
        entry.descriptions.push_back(src->descriptions[i]);
        entry.source_tags.push_back(src->source_tags[i]);
      }
    }
    out.categories.push_back(std::move(entry));
  }
  check_corpus(out);
  return out;
}

Corpus truncate_corpus(const Corpus& corpus, std::size_t target) {
  if (target == 0) throw_validation("truncation target must be >= 1");
  Corpus out = corpus;
  for (auto& c : out.categories) {
    if (c.descriptions.size() > target) {
      c.descriptions.resize(target);
      c.source_tags.resize(target);
    }
  }
  return out;
}

}  // namespace langsup
