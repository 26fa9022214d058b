#include "convgame/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "convgame/errors.hpp"
#include "convgame/hash.hpp"

namespace convgame {

namespace {

bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

std::string_view trim(std::string_view s, std::string_view chars = " \t\r\n") {
  const auto b = s.find_first_not_of(chars);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(chars);
  return s.substr(b, e - b + 1);
}

/// Position just past `value` when it is used as a key, i.e. followed by an
/// optional closing quote and then ':' or '='.
std::size_t find_value_key(std::string_view raw) {
  static constexpr std::string_view kKey = "value";
  for (std::size_t pos = raw.find(kKey); pos != std::string_view::npos;
       pos = raw.find(kKey, pos + 1)) {
    if (pos > 0 && is_token_char(raw[pos - 1])) continue;
    std::size_t i = pos + kKey.size();
    while (i < raw.size() && (raw[i] == '\'' || raw[i] == '"' || raw[i] == '`')) ++i;
    while (i < raw.size() && raw[i] == ' ') ++i;
    if (i < raw.size() && (raw[i] == ':' || raw[i] == '=')) return i + 1;
  }
  return std::string_view::npos;
}

std::string join_names(const NamePool& pool, std::span<const NameId> order) {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out += ", ";
    out += pool.token(order[i]);
  }
  return out;
}

}  // namespace

std::string render_history_line(const NamePool& pool, const InteractionRecord& r) {
  return "{'round':" + std::to_string(r.round_index) + ", 'Player 1': " + pool.token(r.own) +
         ", 'Player 2': " + pool.token(r.partner) + ", 'payoff': " + std::to_string(r.payoff) +
         "}";
}

PromptBundle build_prompt(const NamePool& pool, const PayoffRule& payoffs, int total_rounds,
                          const MemoryWindow& memory, std::span<const NameId> order,
                          std::uint64_t round_index, int score) {
  std::string system;
  system.reserve(1024);
  system += "Context: Player 1 is playing a multi-round partnership game with Player 2 for " +
            std::to_string(total_rounds) +
            " rounds. At each round, Player 1 and Player 2 simultaneously pick an action from the "
            "following values: [" +
            join_names(pool, order) + "].\n";
  system += "The payoff that both players get is determined by the following rule:\n";
  system += "1. If Players play the SAME action as each other, they will both be REWARDED with "
            "payoff " +
            std::to_string(payoffs.reward) + " points.\n";
  system += "2. If Players play DIFFERENT actions to each other, they will both be PUNISHED with "
            "payoff " +
            std::to_string(payoffs.penalty) + " points.\n";
  system += "The objective of each Player is to maximize their own accumulated point tally, "
            "conditional on the behavior of the other player.\n";
  system += "This is the history of choices in past rounds:\n";
  for (const auto& r : memory.records()) system += render_history_line(pool, r) + "\n";
  system += "It is now round " + std::to_string(round_index) + ". The current score of Player 1 is " +
            std::to_string(score) +
            ". Answer saying which value Player 1 should pick. Please think step by step before "
            "making a decision. Remember, examining history explicitly is important. Write your "
            "answer using the following format: {'value': <VALUE_OF_PLAYER_1>; 'reason': "
            "<YOUR_REASON>}.";
  return {std::move(system), std::string(kDecisionUserPrompt),
          std::vector<NameId>(order.begin(), order.end())};
}

NameId parse_response(std::string_view raw, const NamePool& pool) {
  if (const std::size_t start = find_value_key(raw); start != std::string_view::npos) {
    std::size_t i = start;
    while (i < raw.size() && !is_token_char(raw[i]) && raw[i] != '}' && raw[i] != ';') ++i;
    std::size_t j = i;
    while (j < raw.size() && is_token_char(raw[j])) ++j;
    const std::string_view token = raw.substr(i, j - i);
    if (token.empty()) throw ParseError("empty value in response: " + std::string(raw));
    if (auto id = pool.find(token)) return *id;
    throw ParseError("value '" + std::string(token) + "' is not in the pool");
  }
  const std::string_view bare = trim(raw, " \t\r\n'\"`{}[]().,;:");
  if (auto id = pool.find(bare)) return *id;
  throw ParseError("no value key in response: " + std::string(raw));
}

std::string render_answer(std::string_view name, std::string_view reason) {
  return "{'value': '" + std::string(name) + "'; 'reason': " + std::string(reason) + "}";
}

nlohmann::json ChatRequest::to_json() const {
  return {
      {"model", model},
      {"messages",
       nlohmann::json::array({{{"role", "system"}, {"content", system}},
                              {{"role", "user"}, {"content", user}}})},
      {"temperature", temperature},
      {"top_k", top_k},
      {"max_tokens", max_tokens},
  };
}

std::string ChatRequest::digest() const { return sha256_hex(to_json().dump()); }

ChatRequest make_request(const PromptBundle& bundle, const LlmParams& params) {
  return {params.model, bundle.system,     bundle.user,
          params.temperature, params.top_k, params.max_tokens};
}

// ---------------------------------------------------------------------------

LiveTransport::LiveTransport(LlmParams params) : params_(std::move(params)) {
  if (params_.endpoint.empty()) throw ConfigError("llm: live transport requires an endpoint");
  if (!params_.api_key_env.empty()) {
    const char* key = std::getenv(params_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError("missing credentials: environment variable " + params_.api_key_env +
                      " is not set");
    }
    api_key_ = key;
  }
}

void LiveTransport::throttle() {
  if (params_.requests_per_minute <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / params_.requests_per_minute));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string LiveTransport::send(const ChatRequest& request) {
  throttle();
  httplib::Client client(params_.endpoint);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(params_.path, headers, request.to_json().dump(), "application/json");
  if (!res) {
    throw TransientTransportError("request to " + params_.endpoint + " failed: " +
                                  httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 402) throw QuotaError("endpoint reports exhausted quota (HTTP 402)");
  if (status == 429) throw RateLimitError("rate limited (HTTP 429)");
  if (status >= 500) throw TransientTransportError("server error (HTTP " + std::to_string(status) + ")");
  if (status != 200) throw TransportError("unexpected HTTP status " + std::to_string(status));

  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw TransportError("response body is not JSON");
  try {
    const auto& choice = body.at("choices").at(0);
    if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected response shape: ") + e.what());
  }
}

ReplayTransport ReplayTransport::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TransportError("cannot open replay transcript " + path.string());
  std::vector<Entry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("response")) {
      throw TransportError("malformed transcript line " + std::to_string(lineno) + " in " +
                           path.string());
    }
    entries.push_back({j.value("request_hash", std::string{}), j.at("response").get<std::string>()});
  }
  return ReplayTransport(std::move(entries));
}

std::string ReplayTransport::send(const ChatRequest& request) {
  if (position_ >= entries_.size()) {
    throw TransportError("replay transcript exhausted at position " + std::to_string(position_) +
                         " (" + std::to_string(entries_.size()) + " entries recorded)");
  }
  const Entry& e = entries_[position_];
  if (!e.request_hash.empty() && e.request_hash != request.digest()) {
    throw TransportError("replay request mismatch at position " + std::to_string(position_));
  }
  ++position_;
  return e.response;
}

std::string RecordingTransport::send(const ChatRequest& request) {
  std::string response = inner_->send(request);
  nlohmann::json line = {{"request_hash", request.digest()}, {"response", response}};
  *out_ << line.dump() << '\n';
  return response;
}

std::string ScriptedTransport::send(const ChatRequest&) {
  if (position_ >= responses_.size()) {
    throw TransportError("scripted transport exhausted at position " + std::to_string(position_));
  }
  return responses_[position_++];
}

HeuristicMockTransport::HeuristicMockTransport(std::uint64_t seed, SurrogateParameters params)
    : rng_(seed), params_(std::move(params)) {}

std::string HeuristicMockTransport::send(const ChatRequest& request) {
  const std::string& text = request.system;
  const auto open = text.find("values: [");
  const auto close = open == std::string::npos ? open : text.find(']', open);
  if (open == std::string::npos || close == std::string::npos) return "I cannot tell.";

  std::vector<std::string> values;
  std::string_view list(text.data() + open + 9, close - open - 9);
  for (std::size_t p = 0; p <= list.size();) {
    auto comma = list.find(", ", p);
    if (comma == std::string_view::npos) comma = list.size();
    values.emplace_back(list.substr(p, comma - p));
    p = comma + 2;
  }

  const auto last = text.rfind("{'round':");
  if (last == std::string::npos || last < close) {
    return render_answer(values[uniform_index(rng_, values.size())], "no history yet");
  }
  auto field = [&](std::string_view key) {
    const auto k = text.find(key, last);
    const auto b = k + key.size();
    const auto e = text.find_first_of(",}", b);
    return std::string(text.substr(b, e - b));
  };
  const std::string own = field("'Player 1': ");
  const std::string partner = field("'Player 2': ");
  std::string pick;
  if (own == partner) {
    if (bernoulli(rng_, params_.p_keep_after_success) || values.size() < 2) {
      pick = own;
    } else {
      std::vector<std::string> others;
      for (const auto& v : values) {
        if (v != own) others.push_back(v);
      }
      pick = others[uniform_index(rng_, others.size())];
    }
  } else {
    pick = bernoulli(rng_, params_.p_switch_after_failure) ? partner : own;
  }
  return render_answer(pick, "the history shows");
}

std::string complete(const PromptBundle& bundle, const LlmParams& params, Transport& transport,
                     const Sleeper& sleep) {
  const ChatRequest request = make_request(bundle, params);
  for (int attempt = 0;; ++attempt) {
    try {
      return transport.send(request);
    } catch (const RateLimitError& e) {
      if (attempt >= params.transport_retries) {
        throw QuotaError(std::string("rate limit persisted after retries: ") + e.what());
      }
    } catch (const TransientTransportError& e) {
      if (attempt >= params.transport_retries) {
        throw TransportError("transport retry budget exhausted after " +
                             std::to_string(attempt + 1) + " attempts: " + e.what());
      }
    }
    const auto delay = params.backoff_base * (1LL << std::min(attempt, 20));
    if (sleep) {
      sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }
}

LlmSession::LlmSession(Transport& transport, LlmParams params, NamePool pool, PayoffRule payoffs,
                       Sleeper sleep)
    : transport_(&transport),
      params_(std::move(params)),
      pool_(std::move(pool)),
      payoffs_(payoffs),
      sleep_(std::move(sleep)) {
  params_.validate();
}

Decision choose_llm(LlmSession& session, const MemoryWindow& memory,
                    std::span<const NameId> order, Rng& rng) {
  const NamePool& pool = session.pool();
  Decision decision;
  std::vector<NameId> current(order.begin(), order.end());
  for (int attempt = 0; attempt <= session.params().parse_retries; ++attempt) {
    if (attempt > 0) current = presentation_order(pool, rng);
    const PromptBundle bundle =
        build_prompt(pool, session.payoffs(), session.params().prompt_total_rounds, memory, current,
                     memory.next_round_index(), memory.score());
    std::string raw = complete(bundle, session.params(), session.transport(), session.sleeper());
    decision.raw.push_back(raw);
    try {
      decision.name = parse_response(raw, pool);
      decision.retries = attempt;
      if (attempt > 0) decision.final_order = current;
      session.count_decision(false);
      return decision;
    } catch (const ParseError&) {
    }
  }
  decision.retries = session.params().parse_retries;
  decision.fallback = true;
  decision.name = name_at(uniform_index(rng, pool.size()));
  if (decision.retries > 0) decision.final_order = current;
  session.count_decision(true);
  return decision;
}

}  // namespace convgame
