#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "convgame/agents.hpp"
#include "convgame/config.hpp"
#include "convgame/core.hpp"

namespace convgame {

// ---------------------------------------------------------------------------
// Prompt protocol

struct PromptBundle {
  std::string system;
  std::string user;
  std::vector<NameId> order;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// Fixed user turn of every decision exchange.
inline constexpr std::string_view kDecisionUserPrompt =
    "Answer saying which action Player 1 should play.";

/// `{'round':1, 'Player 1': F, 'Player 2': J, 'payoff': -50}`
std::string render_history_line(const NamePool& pool, const InteractionRecord& record);

/// Renders the game description: rules with the presented action list, the
/// payoff rules, the history held in memory, the round/score line and the
/// answer format. Pure in its arguments.
PromptBundle build_prompt(const NamePool& pool, const PayoffRule& payoffs, int total_rounds,
                          const MemoryWindow& memory, std::span<const NameId> order,
                          std::uint64_t round_index, int score);

/// Extracts the name following the first `value` key. Accepts truncated
/// answers and quote variants; a bare in-pool token is accepted too.
/// Throws ParseError when nothing in the pool can be extracted.
NameId parse_response(std::string_view raw, const NamePool& pool);

/// A well-formed answer in the requested format.
std::string render_answer(std::string_view name, std::string_view reason);

// ---------------------------------------------------------------------------
// Transport contract

struct ChatRequest {
  std::string model;
  std::string system;
  std::string user;
  double temperature = 0.5;
  int top_k = 10;
  int max_tokens = 6;

  nlohmann::json to_json() const;
  /// SHA-256 of the canonical JSON body; keys replay transcripts.
  std::string digest() const;
};

ChatRequest make_request(const PromptBundle& bundle, const LlmParams& params);

/// One chat-completion exchange. Implementations throw
/// TransientTransportError for retryable failures.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string send(const ChatRequest& request) = 0;
};

/// OpenAI-compatible HTTP(S) endpoint. The bearer token is read from the
/// environment variable named in LlmParams::api_key_env.
class LiveTransport final : public Transport {
 public:
  explicit LiveTransport(LlmParams params);
  std::string send(const ChatRequest& request) override;

 private:
  void throttle();

  LlmParams params_;
  std::string api_key_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Plays back a JSONL transcript of {"request_hash", "response"} lines in
/// order, checking each request against its recorded hash.
class ReplayTransport final : public Transport {
 public:
  struct Entry {
    std::string request_hash;
    std::string response;
  };

  explicit ReplayTransport(std::vector<Entry> entries) : entries_(std::move(entries)) {}
  static ReplayTransport from_file(const std::filesystem::path& path);

  std::string send(const ChatRequest& request) override;
  std::size_t position() const { return position_; }

 private:
  std::vector<Entry> entries_;
  std::size_t position_ = 0;
};

/// Forwards to another transport and appends every exchange to a transcript
/// that ReplayTransport can read back.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(Transport& inner, std::ostream& out) : inner_(&inner), out_(&out) {}
  std::string send(const ChatRequest& request) override;

 private:
  Transport* inner_;
  std::ostream* out_;
};

/// Returns the scripted responses in order.
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}
  std::string send(const ChatRequest& request) override;
  std::size_t calls() const { return position_; }

 private:
  std::vector<std::string> responses_;
  std::size_t position_ = 0;
};

/// Offline stand-in for a model: reads the rendered prompt back (action
/// list and last history line) and answers like a keep/switch agent.
class HeuristicMockTransport final : public Transport {
 public:
  HeuristicMockTransport(std::uint64_t seed, SurrogateParameters params = {});
  std::string send(const ChatRequest& request) override;

 private:
  Rng rng_;
  SurrogateParameters params_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// One exchange with transient-failure retries and exponential backoff.
/// Throws TransportError (or QuotaError when the budget is spent on rate
/// limiting) once LlmParams::transport_retries is exhausted; AuthError and
/// QuotaError are never retried.
std::string complete(const PromptBundle& bundle, const LlmParams& params, Transport& transport,
                     const Sleeper& sleep = {});

// ---------------------------------------------------------------------------
// Sessions and the decision path

/// Everything an LLM-backed agent needs to decide: the game parameters the
/// prompt describes, decoding knobs, and the transport.
class LlmSession {
 public:
  LlmSession(Transport& transport, LlmParams params, NamePool pool, PayoffRule payoffs,
             Sleeper sleep = {});

  Transport& transport() { return *transport_; }
  const LlmParams& params() const { return params_; }
  const NamePool& pool() const { return pool_; }
  const PayoffRule& payoffs() const { return payoffs_; }
  const Sleeper& sleeper() const { return sleep_; }

  std::size_t decisions() const { return decisions_; }
  std::size_t fallbacks() const { return fallbacks_; }
  double fallback_rate() const {
    return decisions_ ? static_cast<double>(fallbacks_) / static_cast<double>(decisions_) : 0.0;
  }
  void count_decision(bool fallback) {
    ++decisions_;
    if (fallback) ++fallbacks_;
  }

 private:
  Transport* transport_;
  LlmParams params_;
  NamePool pool_;
  PayoffRule payoffs_;
  Sleeper sleep_;
  std::size_t decisions_ = 0;
  std::size_t fallbacks_ = 0;
};

/// Prompt, exchange and parse. A parse failure re-queries up to
/// parse_retries times with a fresh presentation shuffle; after that the
/// name is drawn uniformly from the pool and the decision is flagged.
Decision choose_llm(LlmSession& session, const MemoryWindow& memory,
                    std::span<const NameId> order, Rng& rng);

}  // namespace convgame
