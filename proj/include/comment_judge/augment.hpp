#pragma once

// Generate labeled code-comment pairs through a chat-completion endpoint,
// validate and deduplicate them, and merge them into a seed corpus.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <mutex>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "comment_judge/chat_client.hpp"
#include "comment_judge/corpus.hpp"
#include "comment_judge/error.hpp"
#include "comment_judge/hash.hpp"
#include "comment_judge/random.hpp"
#include "comment_judge/text.hpp"

namespace comment_judge {

enum class RequestKind { GeneratePairs, LabelPair };

inline constexpr std::string_view to_string(RequestKind k) noexcept {
  return k == RequestKind::GeneratePairs ? "generate_pairs" : "label_pair";
}

enum class RejectReason {
  Unparseable,
  EmptyField,
  DuplicateOfSeed,
  DuplicateWithinBatch,
  InvalidLabel,
  Surplus,
};

inline constexpr std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::Unparseable: return "unparseable";
    case RejectReason::EmptyField: return "empty_field";
    case RejectReason::DuplicateOfSeed: return "duplicate_of_seed";
    case RejectReason::DuplicateWithinBatch: return "duplicate_within_batch";
    case RejectReason::InvalidLabel: return "invalid_label";
    case RejectReason::Surplus: return "surplus";
  }
  return "unparseable";
}

inline constexpr RejectReason kAllRejectReasons[] = {
    RejectReason::Unparseable,          RejectReason::EmptyField,   RejectReason::DuplicateOfSeed,
    RejectReason::DuplicateWithinBatch, RejectReason::InvalidLabel, RejectReason::Surplus};

struct RejectedCandidate {
  RejectReason reason;
  std::string detail;
  std::string comment_text;
  std::string code_context;
};

/// Outcome of one generation call. accepted + rejected always equals the
/// number of candidates parsed from the responses.
struct GeneratedBatch {
  std::vector<CodeCommentPair> accepted;
  std::vector<RejectedCandidate> rejected;
  std::size_t candidates = 0;
  std::size_t requests = 0;

  [[nodiscard]] std::size_t count(RejectReason r) const {
    std::size_t n = 0;
    for (const auto& x : rejected) n += x.reason == r ? 1 : 0;
    return n;
  }
};

/// Raised when a generation call yields no usable pair; carries the accounting.
class NoAcceptedPairs : public EndpointError {
 public:
  NoAcceptedPairs(const std::string& what, GeneratedBatch batch) : EndpointError(what), batch_(std::move(batch)) {}
  [[nodiscard]] const GeneratedBatch& batch() const noexcept { return batch_; }

 private:
  GeneratedBatch batch_;
};

/// A reply that is neither "Useful" nor "Not Useful", even after the stricter retry.
class InvalidLabel : public EndpointError {
 public:
  InvalidLabel(const std::string& what, std::string raw) : EndpointError(what), raw_(std::move(raw)) {}
  [[nodiscard]] const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// ---------------------------------------------------------------------------
// Prompts

inline constexpr std::string_view kGenerateSystemPrompt =
    "You write realistic code-comment pairs taken from C projects. Some comments explain intent, constraints or "
    "non-obvious behaviour; others merely restate the code. Produce a mix of both.";

inline constexpr std::string_view kLabelSystemPrompt =
    "You judge whether a source code comment is Useful or Not Useful to a developer reading the code it annotates. "
    "A Useful comment adds information the code does not already state. A Not Useful comment restates the code, "
    "is trivial, or is misleading.";

inline constexpr std::string_view kPairDelimiter = "---PAIR---";

inline constexpr std::string_view kStrictLabelInstruction =
    "Your previous reply could not be read. Reply with exactly one of the two words: Useful or Not Useful. "
    "No other text.";

inline std::string format_pair_block(std::string_view comment, std::string_view code) {
  std::string s;
  s += kPairDelimiter;
  s += "\nCOMMENT: ";
  s += comment;
  s += "\nCODE:\n";
  s += code;
  s += "\n";
  return s;
}

/// User prompt for one generation request. The batch index keeps every
/// request distinguishable and lets a canned endpoint answer by index.
inline std::string generation_prompt(std::size_t batch_index, std::size_t count,
                                     std::span<const CodeCommentPair* const> examples) {
  std::string s = "Batch: " + std::to_string(batch_index) + "\n";
  s += "Write " + std::to_string(count) +
       " new, distinct code-comment pairs in C. Start every pair with a line containing only " +
       std::string(kPairDelimiter) +
       ", then a line starting with COMMENT: followed by the comment text, then a line starting with CODE: "
       "followed by the code the comment annotates. Do not number the pairs or add any other text.\n";
  if (!examples.empty()) {
    s += "\nExamples of the format:\n";
    for (const auto* p : examples) s += format_pair_block(p->comment_text, p->code_context);
  }
  return s;
}

inline std::string label_prompt(const CodeCommentPair& pair, bool strict) {
  std::string s = "Comment:\n" + pair.comment_text + "\n\nCode:\n" + pair.code_context +
                  "\n\nIs this comment Useful or Not Useful? Answer on the first line with Useful or Not Useful.";
  if (strict) {
    s += "\n\n";
    s += kStrictLabelInstruction;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Response parsing

struct Candidate {
  std::optional<RejectReason> problem;
  std::string detail;
  std::string comment_text;
  std::string code_context;
};

/// True when `code` looks like C at all: it has a `;`, `{` or `(`.
inline bool plausible_c(std::string_view code) noexcept {
  return code.find_first_of(";{(") != std::string_view::npos;
}

namespace detail {

inline std::vector<std::string_view> reply_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t nl = s.find('\n', pos);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = s.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    pos = nl + 1;
  }
  return out;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && text::iequals(s.substr(0, prefix.size()), prefix);
}

// Joins lines, then strips surrounding blank lines and trailing whitespace.
inline std::string join_trimmed(const std::vector<std::string_view>& lines) {
  std::size_t b = 0, e = lines.size();
  while (b < e && text::trim(lines[b]).empty()) ++b;
  while (e > b && text::trim(lines[e - 1]).empty()) --e;
  std::string s;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) s += '\n';
    s += text::rtrim(lines[i]);
  }
  return s;
}

inline Candidate parse_block(const std::vector<std::string_view>& lines) {
  Candidate c;
  std::optional<std::size_t> comment_at, code_at;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto t = text::trim(lines[i]);
    if (!comment_at && starts_with_ci(t, "COMMENT:")) comment_at = i;
    else if (comment_at && !code_at && starts_with_ci(t, "CODE:")) code_at = i;
  }
  if (!comment_at || !code_at) {
    c.problem = RejectReason::Unparseable;
    c.detail = "block lacks COMMENT: and CODE: sections";
    c.comment_text = std::string(text::trim(join_trimmed(lines)));
    return c;
  }
  const auto after = [](std::string_view line, std::size_t tag) {
    return text::trim(text::trim(line).substr(tag));
  };
  std::vector<std::string_view> comment{after(lines[*comment_at], 8)};
  for (std::size_t i = *comment_at + 1; i < *code_at; ++i) comment.push_back(text::trim(lines[i]));
  std::vector<std::string_view> code{after(lines[*code_at], 5)};
  for (std::size_t i = *code_at + 1; i < lines.size(); ++i) code.push_back(lines[i]);
  c.comment_text = join_trimmed(comment);
  c.code_context = join_trimmed(code);
  if (c.comment_text.empty() || c.code_context.empty()) {
    c.problem = RejectReason::EmptyField;
    c.detail = c.comment_text.empty() ? "empty comment" : "empty code";
  } else if (!plausible_c(c.code_context)) {
    c.problem = RejectReason::Unparseable;
    c.detail = "code has none of ';', '{', '('";
  }
  return c;
}

}  // namespace detail

/// Splits a completion into `---PAIR---` blocks. A non-blank response with no
/// delimiter at all counts as one unparseable candidate; an empty response
/// yields none.
inline std::vector<Candidate> parse_candidates(std::string_view completion) {
  const auto lines = detail::reply_lines(completion);
  std::vector<std::vector<std::string_view>> blocks;
  bool seen_delimiter = false;
  for (const auto& line : lines) {
    if (text::trim(line) == kPairDelimiter) {
      seen_delimiter = true;
      blocks.emplace_back();
    } else if (seen_delimiter) {
      blocks.back().push_back(line);
    }
  }
  std::vector<Candidate> out;
  if (!seen_delimiter) {
    if (!text::trim(completion).empty()) {
      Candidate c;
      c.problem = RejectReason::Unparseable;
      c.detail = "no " + std::string(kPairDelimiter) + " delimiter";
      c.comment_text = std::string(text::trim(completion.substr(0, std::min<std::size_t>(completion.size(), 200))));
      out.push_back(std::move(c));
    }
    return out;
  }
  for (const auto& b : blocks) out.push_back(detail::parse_block(b));
  return out;
}

/// Reads "Useful" / "Not Useful" from the first non-blank line of a reply,
/// ignoring case, surrounding punctuation and extra spaces.
inline std::optional<Label> parse_label_reply(std::string_view reply) {
  for (const auto& raw : detail::reply_lines(reply)) {
    auto line = text::trim(raw);
    if (line.empty()) continue;
    const auto is_alnum = [](char c) {
      return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    };
    while (!line.empty() && !is_alnum(line.front())) line.remove_prefix(1);
    while (!line.empty() && !is_alnum(line.back())) line.remove_suffix(1);
    const auto norm = text::normalize(line);
    if (norm == "useful") return Label::Useful;
    if (norm == "not useful") return Label::NotUseful;
    return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Audit log

struct AuditEntry {
  std::string timestamp;
  RequestKind kind;
  std::size_t sequence;
  std::string request_digest;
  std::string response_digest;
  std::string outcome;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

/// Thread-safe collector; entries are emitted in request-sequence order.
class AuditLog {
 public:
  void record(AuditEntry e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
  }

  [[nodiscard]] std::vector<AuditEntry> entries() const {
    std::lock_guard lock(mu_);
    auto out = entries_;
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sequence < b.sequence; });
    return out;
  }

  /// One JSON object per line.
  [[nodiscard]] std::string to_jsonl() const {
    std::string s;
    for (const auto& e : entries()) {
      s += nlohmann::json{{"timestamp", e.timestamp},
                          {"sequence", e.sequence},
                          {"kind", std::string(to_string(e.kind))},
                          {"request_digest", e.request_digest},
                          {"response_digest", e.response_digest},
                          {"outcome", e.outcome}}
               .dump();
      s += '\n';
    }
    return s;
  }

 private:
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

// ---------------------------------------------------------------------------
// Request execution

/// Shared request accounting for one augmentation run.
struct RequestContext {
  const GenerativeEndpointConfig& config;
  ChatClient& client;
  AuditLog* audit = nullptr;
  std::optional<std::size_t> budget;  // remaining requests; unset = unlimited
  std::size_t next_sequence = 0;

  [[nodiscard]] std::size_t available(std::size_t wanted) const {
    return budget ? std::min(*budget, wanted) : wanted;
  }
  // Reserves `n` consecutive sequence numbers and budget slots.
  std::size_t reserve(std::size_t n) {
    if (budget) *budget -= std::min(*budget, n);
    const auto first = next_sequence;
    next_sequence += n;
    return first;
  }
};

namespace detail {

struct Call {
  RequestKind kind;
  ChatRequest request;
  std::string response;
  std::exception_ptr error;
};

/// Runs `calls` with at most max_in_flight concurrent requests. Results stay
/// in their slots, so the caller always sees them in index order.
inline void run_calls(RequestContext& ctx, std::vector<Call>& calls) {
  if (calls.empty()) return;
  const std::size_t first_seq = ctx.reserve(calls.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < calls.size(); i = next++) {
      auto& c = calls[i];
      const auto req_digest = digest_hex(request_body(ctx.config.model, c.request).dump());
      std::string outcome = "ok";
      try {
        c.response = ctx.client.complete(c.request);
      } catch (const std::exception& e) {
        c.error = std::current_exception();
        outcome = std::string("error: ") + e.what();
      }
      if (ctx.audit) {
        ctx.audit->record({utc_timestamp(), c.kind, first_seq + i, req_digest,
                           c.error ? std::string() : digest_hex(c.response), outcome});
      }
    }
  };
  const std::size_t workers = std::min(ctx.config.max_in_flight, calls.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
}

inline ChatRequest make_label_request(const GenerativeEndpointConfig& config, const CodeCommentPair& pair,
                                      bool strict) {
  return {{{"system", std::string(kLabelSystemPrompt)}, {"user", label_prompt(pair, strict)}},
          config.labeling_temperature};
}

// Labels `pairs` concurrently, with the semantic retry for unreadable replies.
// Transport errors propagate; unreadable labels come back as nullopt.
inline std::vector<std::optional<Label>> label_many(RequestContext& ctx, const std::vector<CodeCommentPair>& pairs) {
  std::vector<std::optional<Label>> labels(pairs.size());
  std::vector<Call> calls;
  for (const auto& p : pairs) calls.push_back({RequestKind::LabelPair, make_label_request(ctx.config, p, false), {}, {}});
  run_calls(ctx, calls);
  std::vector<std::size_t> retry;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    if (calls[i].error) std::rethrow_exception(calls[i].error);
    labels[i] = parse_label_reply(calls[i].response);
    if (!labels[i]) retry.push_back(i);
  }
  retry.resize(ctx.available(retry.size()));
  std::vector<Call> strict;
  for (std::size_t i : retry) {
    strict.push_back({RequestKind::LabelPair, make_label_request(ctx.config, pairs[i], true), {}, {}});
  }
  run_calls(ctx, strict);
  for (std::size_t k = 0; k < strict.size(); ++k) {
    if (strict[k].error) std::rethrow_exception(strict[k].error);
    labels[retry[k]] = parse_label_reply(strict[k].response);
  }
  return labels;
}

}  // namespace detail

/// Asks the endpoint for the label of one pair. Returns the label and the raw
/// reply it was read from; throws InvalidLabel after the stricter retry fails.
inline std::pair<Label, std::string> label_pair(RequestContext& ctx, const CodeCommentPair& pair) {
  if (text::trim(pair.comment_text).empty() || text::trim(pair.code_context).empty()) {
    throw UsageError("labeling needs both a comment and code");
  }
  std::string last;
  for (bool strict : {false, true}) {
    std::vector<detail::Call> call{{RequestKind::LabelPair, detail::make_label_request(ctx.config, pair, strict), {}, {}}};
    detail::run_calls(ctx, call);
    if (call[0].error) std::rethrow_exception(call[0].error);
    last = call[0].response;
    if (auto l = parse_label_reply(last)) return {*l, last};
  }
  throw InvalidLabel("invalid_label: endpoint reply is neither Useful nor Not Useful", last);
}

inline std::pair<Label, std::string> label_pair(const GenerativeEndpointConfig& config, ChatClient& client,
                                                const CodeCommentPair& pair) {
  RequestContext ctx{config, client};
  return label_pair(ctx, pair);
}

/// Keys that generated candidates must not collide with.
struct DedupState {
  std::unordered_set<std::uint64_t> seed;
  std::unordered_set<std::uint64_t> accepted;

  static DedupState from(std::span<const CodeCommentPair> seed_examples) {
    DedupState s;
    for (const auto& p : seed_examples) s.seed.insert(duplicate_key(p));
    return s;
  }
};

struct GenerationState {
  std::size_t next_batch = 0;  // index stamped into the next generation prompt
  std::size_t next_id = 1;     // numbering of generated pair ids
};

/// One generation round: ceil(n / pairs_per_request) generation requests,
/// then labeling of the validated, deduplicated candidates until n pairs are
/// accepted. Throws NoAcceptedPairs when nothing survives.
inline GeneratedBatch generate_pairs(RequestContext& ctx, std::size_t n, std::span<const CodeCommentPair> seed_examples,
                                     std::uint64_t rng_seed, DedupState& dedup, GenerationState& state) {
  if (n < 1) throw UsageError("generate_pairs needs n >= 1");
  const auto& cfg = ctx.config;
  GeneratedBatch batch;

  std::vector<const CodeCommentPair*> pool;
  for (const auto& p : seed_examples) {
    if (p.label) pool.push_back(&p);
  }

  const std::size_t wanted = (n + cfg.pairs_per_request - 1) / cfg.pairs_per_request;
  const std::size_t requests = ctx.available(wanted);
  std::vector<detail::Call> calls;
  for (std::size_t r = 0; r < requests; ++r) {
    const std::size_t batch_index = state.next_batch++;
    Rng rng(rng_seed ^ (0x9e3779b97f4a7c15ULL * (batch_index + 1)));
    std::vector<const CodeCommentPair*> shots;
    const std::size_t k = std::min(cfg.few_shot, pool.size());
    // Partial Fisher-Yates over the pool indices.
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
      shots.push_back(pool[idx[i]]);
    }
    const std::size_t count = std::min(cfg.pairs_per_request, n - std::min(n, r * cfg.pairs_per_request));
    calls.push_back({RequestKind::GeneratePairs,
                     {{{"system", std::string(kGenerateSystemPrompt)}, {"user", generation_prompt(batch_index, count, shots)}},
                      cfg.generation_temperature},
                     {},
                     {}});
  }
  detail::run_calls(ctx, calls);
  batch.requests += calls.size();

  // Validate and deduplicate in request order.
  std::vector<CodeCommentPair> pending;
  std::unordered_set<std::uint64_t> round_keys;
  for (auto& call : calls) {
    if (call.error) std::rethrow_exception(call.error);
    for (auto& c : parse_candidates(call.response)) {
      ++batch.candidates;
      if (c.problem) {
        batch.rejected.push_back({*c.problem, c.detail, std::move(c.comment_text), std::move(c.code_context)});
        continue;
      }
      const auto key = duplicate_key(c.comment_text, c.code_context);
      if (dedup.seed.contains(key)) {
        batch.rejected.push_back({RejectReason::DuplicateOfSeed, "matches a seed pair", std::move(c.comment_text),
                                  std::move(c.code_context)});
        continue;
      }
      if (dedup.accepted.contains(key) || !round_keys.insert(key).second) {
        batch.rejected.push_back({RejectReason::DuplicateWithinBatch, "repeats an earlier candidate",
                                  std::move(c.comment_text), std::move(c.code_context)});
        continue;
      }
      CodeCommentPair p;
      p.comment_text = std::move(c.comment_text);
      p.code_context = std::move(c.code_context);
      p.source = Source::Generated;
      pending.push_back(std::move(p));
    }
  }

  // Label in waves of exactly as many as are still needed.
  std::size_t cursor = 0;
  while (cursor < pending.size() && batch.accepted.size() < n) {
    const std::size_t take = ctx.available(std::min(n - batch.accepted.size(), pending.size() - cursor));
    if (take == 0) break;
    std::vector<CodeCommentPair> wave(pending.begin() + cursor, pending.begin() + cursor + take);
    const auto before = ctx.next_sequence;
    const auto labels = detail::label_many(ctx, wave);
    batch.requests += ctx.next_sequence - before;
    for (std::size_t i = 0; i < wave.size(); ++i) {
      if (!labels[i]) {
        batch.rejected.push_back({RejectReason::InvalidLabel, "label reply unreadable after retry",
                                  std::move(wave[i].comment_text), std::move(wave[i].code_context)});
        continue;
      }
      wave[i].label = labels[i];
      char id[32];
      std::snprintf(id, sizeof id, "gen-%06zu", state.next_id++);
      wave[i].id = id;
      dedup.accepted.insert(duplicate_key(wave[i]));
      batch.accepted.push_back(std::move(wave[i]));
    }
    cursor += take;
  }
  for (; cursor < pending.size(); ++cursor) {
    batch.rejected.push_back({RejectReason::Surplus, "not needed to reach the requested count",
                              std::move(pending[cursor].comment_text), std::move(pending[cursor].code_context)});
  }

  if (batch.accepted.empty()) {
    std::string why;
    for (auto r : kAllRejectReasons) {
      if (auto k = batch.count(r)) why += (why.empty() ? "" : ", ") + std::string(to_string(r)) + "=" + std::to_string(k);
    }
    throw NoAcceptedPairs("generation produced no acceptable pairs (" + std::to_string(batch.candidates) +
                              " candidates" + (why.empty() ? "" : ": " + why) + ")",
                          std::move(batch));
  }
  return batch;
}

/// Convenience overload for a single stand-alone call.
inline GeneratedBatch generate_pairs(const GenerativeEndpointConfig& config, ChatClient& client, std::size_t n,
                                     std::span<const CodeCommentPair> seed_examples, std::uint64_t rng_seed) {
  RequestContext ctx{config, client};
  auto dedup = DedupState::from(seed_examples);
  GenerationState state;
  return generate_pairs(ctx, n, seed_examples, rng_seed, dedup, state);
}

enum class AugmentationStatus { Complete, BudgetExhausted };

struct AugmentationResult {
  Dataset dataset;
  Dataset generated;
  AugmentationStatus status = AugmentationStatus::Complete;
  std::size_t requests = 0;
  std::size_t candidates = 0;
  std::vector<std::pair<RejectReason, std::size_t>> rejections;
  std::size_t rekeyed = 0;

  [[nodiscard]] std::size_t rejected(RejectReason r) const {
    for (const auto& [k, v] : rejections) {
      if (k == r) return v;
    }
    return 0;
  }
};

inline nlohmann::json summary_json(const AugmentationResult& r, std::size_t target_new) {
  nlohmann::json rej = nlohmann::json::object();
  for (auto reason : kAllRejectReasons) rej[std::string(to_string(reason))] = r.rejected(reason);
  return {{"target_new", target_new},
          {"accepted", r.generated.pairs.size()},
          {"status", r.status == AugmentationStatus::Complete ? "complete" : "budget_exhausted"},
          {"requests", r.requests},
          {"request_budget", 3 * target_new},
          {"candidates", r.candidates},
          {"rejected", rej},
          {"rekeyed_ids", r.rekeyed},
          {"integrated_pairs", r.dataset.pairs.size()}};
}

/// generate -> label -> validate -> deduplicate rounds until `target_new`
/// pairs are accepted or 3 x target_new requests have been spent, then merges
/// the accepted pairs into `seed`. Falling short is reported through
/// `status`, not thrown; transport and credential failures are thrown.
inline AugmentationResult augmentation_pipeline(const GenerativeEndpointConfig& config, ChatClient& client,
                                                const Dataset& seed, std::size_t target_new, std::uint64_t rng_seed,
                                                AuditLog* audit = nullptr) {
  for (const auto& p : seed.pairs) {
    if (!p.label) throw DataError("seed pair \"" + p.id + "\" is unlabeled; augmentation needs a labeled seed");
  }
  AugmentationResult result;
  if (target_new == 0) {
    result.dataset = seed;
    return result;
  }
  config.validate();

  RequestContext ctx{config, client, audit, 3 * target_new};
  auto dedup = DedupState::from(seed.pairs);
  GenerationState state;
  std::vector<std::size_t> rejected(std::size(kAllRejectReasons), 0);

  const auto absorb = [&](const GeneratedBatch& b) {
    result.candidates += b.candidates;
    for (std::size_t k = 0; k < std::size(kAllRejectReasons); ++k) rejected[k] += b.count(kAllRejectReasons[k]);
  };
  while (result.generated.pairs.size() < target_new && *ctx.budget > 0) {
    const std::size_t need = target_new - result.generated.pairs.size();
    try {
      auto b = generate_pairs(ctx, need, seed.pairs, rng_seed, dedup, state);
      absorb(b);
      for (auto& p : b.accepted) result.generated.pairs.push_back(std::move(p));
    } catch (const NoAcceptedPairs& e) {
      absorb(e.batch());
    }
  }
  result.requests = ctx.next_sequence;
  if (result.generated.pairs.size() < target_new) result.status = AugmentationStatus::BudgetExhausted;
  for (std::size_t k = 0; k < std::size(kAllRejectReasons); ++k) {
    result.rejections.emplace_back(kAllRejectReasons[k], rejected[k]);
  }

  auto merged = merge_datasets(seed, result.generated);
  result.rekeyed = merged.rekeyed;
  result.dataset = std::move(merged.dataset);
  // Merged pairs are appended after the seed; keep their final ids and splits.
  result.generated.pairs.assign(result.dataset.pairs.end() - static_cast<std::ptrdiff_t>(merged.added),
                                result.dataset.pairs.end());
  return result;
}

}  // namespace comment_judge
