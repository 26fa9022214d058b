#include "convgame/comprehension.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>
#include <set>

#include "convgame/errors.hpp"

namespace convgame {

namespace {

constexpr std::string_view kAnswerFormat =
    " Write your answer using the following format: {'answer': <ANSWER>}.";

std::string player(int x) { return "Player " + std::to_string(x); }

std::optional<long long> parse_int(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  bool negative = false;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) negative = s[i++] == '-';
  if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
  long long v = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) v = v * 10 + (s[i++] - '0');
  return negative ? -v : v;
}

std::set<std::string> tokens_of(std::string_view s) {
  std::set<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

/// Text after the `answer` key, with quotes and braces stripped.
std::optional<std::string> extract_answer(std::string_view raw) {
  const auto key = raw.find("answer");
  if (key == std::string_view::npos) return std::nullopt;
  const auto colon = raw.find_first_of(":=", key);
  if (colon == std::string_view::npos) return std::nullopt;
  std::string_view rest = raw.substr(colon + 1);
  if (const auto end = rest.find('}'); end != std::string_view::npos) {
    // Keep list brackets intact; only a closing brace of the wrapper ends it.
    rest = rest.substr(0, end);
  }
  const auto b = rest.find_first_not_of(" \t\r\n'\"`");
  if (b == std::string_view::npos) return std::string{};
  const auto e = rest.find_last_not_of(" \t\r\n'\".`");
  return std::string(rest.substr(b, e - b + 1));
}

std::string answer(std::string_view value) { return "{'answer': " + std::string(value) + "}"; }

}  // namespace

const char* to_string(QuestionType type) {
  switch (type) {
    case QuestionType::min_max: return "min_max";
    case QuestionType::actions: return "actions";
    case QuestionType::payoff: return "payoff";
    case QuestionType::round: return "round";
    case QuestionType::action_i: return "action_i";
    case QuestionType::points_i: return "points_i";
    case QuestionType::num_actions: return "#actions";
    case QuestionType::num_points: return "#points";
  }
  return "?";
}

const char* category_of(QuestionType type) {
  switch (type) {
    case QuestionType::min_max:
    case QuestionType::actions:
    case QuestionType::payoff:
      return "rules";
    case QuestionType::round:
    case QuestionType::action_i:
    case QuestionType::points_i:
      return "time";
    case QuestionType::num_actions:
    case QuestionType::num_points:
      return "state";
  }
  return "?";
}

bool needs_memory(QuestionType type) {
  return type == QuestionType::action_i || type == QuestionType::points_i ||
         type == QuestionType::num_actions;
}

std::vector<ComprehensionQuestion> render_questions(const NamePool& pool, const PayoffRule& payoffs,
                                                    const MemoryWindow& memory,
                                                    std::uint64_t round_index, Rng& rng) {
  std::vector<ComprehensionQuestion> qs;
  auto pick_player = [&] { return static_cast<int>(uniform_index(rng, 2)) + 1; };
  auto pick_name = [&] { return name_at(uniform_index(rng, pool.size())); };

  qs.push_back({QuestionType::min_max,
                "What is the lowest payoff " + player(1) + " can get in a single round?",
                std::to_string(payoffs.penalty)});
  qs.push_back({QuestionType::min_max,
                "What is the highest payoff " + player(1) + " can get in a single round?",
                std::to_string(payoffs.reward)});

  std::string all;
  for (const auto& t : pool.tokens()) all += (all.empty() ? "" : ", ") + t;
  qs.push_back({QuestionType::actions, "Which actions is " + player(1) + " allowed to play?",
                "[" + all + "]"});

  {
    const int x = pick_player();
    const int y = 3 - x;
    const NameId p = pick_name();
    const NameId q = pick_name();
    qs.push_back({QuestionType::payoff,
                  "Which is " + player(x) + "'s payoff in a single round if " + player(x) +
                      " plays " + pool.token(p) + " and " + player(y) + " plays " + pool.token(q) +
                      "?",
                  std::to_string(payoffs.payoff(p == q))});
  }

  qs.push_back({QuestionType::round, "Which is the current round of the game?",
                std::to_string(round_index)});

  if (!memory.empty()) {
    const auto& records = memory.records();
    {
      const auto& r = records[uniform_index(rng, records.size())];
      const int x = pick_player();
      qs.push_back({QuestionType::action_i,
                    "Which action did " + player(x) + " play in round " +
                        std::to_string(r.round_index) + "?",
                    pool.token(x == 1 ? r.own : r.partner)});
    }
    {
      const auto& r = records[uniform_index(rng, records.size())];
      const int x = pick_player();
      qs.push_back({QuestionType::points_i,
                    "How many points did " + player(x) + " collect in round " +
                        std::to_string(r.round_index) + "?",
                    std::to_string(r.payoff)});
    }
    {
      const int x = pick_player();
      const NameId p = pick_name();
      const auto count = std::count_if(records.begin(), records.end(), [&](const auto& r) {
        return (x == 1 ? r.own : r.partner) == p;
      });
      qs.push_back({QuestionType::num_actions,
                    "How many times did " + player(x) + " choose " + pool.token(p) + "?",
                    std::to_string(count)});
    }
  }

  {
    const int x = pick_player();
    qs.push_back({QuestionType::num_points, "What is " + player(x) + "'s current total payoff?",
                  std::to_string(memory.score())});
  }
  return qs;
}

std::string question_user_prompt(const ComprehensionQuestion& question) {
  return question.text + std::string(kAnswerFormat);
}

bool score_answer(const ComprehensionQuestion& question, std::string_view raw) {
  const auto given = extract_answer(raw);
  if (!given) return false;
  switch (question.type) {
    case QuestionType::actions:
      return tokens_of(*given) == tokens_of(question.truth);
    case QuestionType::action_i:
      return *given == question.truth;
    default: {
      const auto a = parse_int(*given);
      const auto b = parse_int(question.truth);
      return a && b && *a == *b;
    }
  }
}

double ComprehensionReport::accuracy(QuestionType type) const {
  auto it = tallies.find(type);
  return it == tallies.end() ? 0.0 : it->second.accuracy();
}

double ComprehensionReport::category_accuracy(std::string_view category) const {
  QuestionTally pooled;
  for (const auto& [type, tally] : tallies) {
    if (category == category_of(type)) {
      pooled.asked += tally.asked;
      pooled.correct += tally.correct;
    }
  }
  return pooled.accuracy();
}

ComprehensionReport run_comprehension_suite(const RunLog& log, std::size_t agent,
                                            std::size_t memory_length, Transport& transport,
                                            const LlmParams& params, std::uint64_t seed) {
  const TrialConfig& config = log.config;
  if (agent >= config.population_size) {
    throw ConfigError("agent " + std::to_string(agent) + " is not in the population");
  }
  if (config.mode != InteractionMode::simultaneous) {
    throw ConfigError("comprehension replay needs a simultaneous-mode log");
  }
  ComprehensionReport report;
  report.agent = agent;
  Rng rng = make_rng(seed, Stream::comprehension, config.trial_index, agent);

  MemoryWindow memory(memory_length);
  for (const auto& r : initial_memories(config)[agent].records()) memory.append(r);
  std::uint64_t round = memory.empty() ? 0 : memory.newest().round_index;

  for (const RunEvent& e : log.events) {
    int side = -1;
    if (e.agents[0] == agent) side = 0;
    if (e.agents[1] == agent) side = 1;
    if (side < 0) continue;

    std::vector<NameId> order =
        e.orders[side].empty() ? config.pool.ids() : e.orders[side];
    const PromptBundle decision = build_prompt(config.pool, config.payoffs,
                                               config.llm.prompt_total_rounds, memory, order,
                                               memory.next_round_index(), memory.score());
    for (const auto& q : render_questions(config.pool, config.payoffs, memory,
                                          memory.next_round_index(), rng)) {
      PromptBundle bundle = decision;
      bundle.user = question_user_prompt(q);
      const std::string raw = complete(bundle, params, transport);
      auto& tally = report.tallies[q.type];
      ++tally.asked;
      if (score_answer(q, raw)) ++tally.correct;
    }
    ++report.interactions;
    memory.append(InteractionRecord::make(++round, e.names[side], e.names[1 - side], config.payoffs));
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

struct ParsedPrompt {
  std::vector<std::string> values;
  long long reward = 0;
  long long penalty = 0;
  struct Line {
    long long round;
    std::string p1, p2;
    long long payoff;
  };
  std::vector<Line> history;
  long long round = 0;
  long long score = 0;
};

ParsedPrompt read_prompt(const std::string& system) {
  ParsedPrompt p;
  std::smatch m;
  if (std::regex_search(system, m, std::regex(R"(values: \[([^\]]*)\])"))) {
    for (const auto& t : tokens_of(m[1].str())) p.values.push_back(t);
  }
  if (std::regex_search(system, m, std::regex(R"(REWARDED with payoff (-?\d+) points)"))) {
    p.reward = std::stoll(m[1]);
  }
  if (std::regex_search(system, m, std::regex(R"(PUNISHED with payoff (-?\d+) points)"))) {
    p.penalty = std::stoll(m[1]);
  }
  const std::regex line(R"(\{'round':(\d+), 'Player 1': ([^,]+), 'Player 2': ([^,]+), 'payoff': (-?\d+)\})");
  for (auto it = std::sregex_iterator(system.begin(), system.end(), line); it != std::sregex_iterator();
       ++it) {
    p.history.push_back({std::stoll((*it)[1]), (*it)[2], (*it)[3], std::stoll((*it)[4])});
  }
  if (std::regex_search(system, m, std::regex(R"(It is now round (\d+))"))) p.round = std::stoll(m[1]);
  if (std::regex_search(system, m, std::regex(R"(current score of Player 1 is (-?\d+))"))) {
    p.score = std::stoll(m[1]);
  }
  return p;
}

}  // namespace

std::string ComprehensionOracleTransport::send(const ChatRequest& request) {
  const ParsedPrompt p = read_prompt(request.system);
  const std::string& q = request.user;
  std::smatch m;

  if (q.starts_with(kDecisionUserPrompt)) {
    if (p.history.empty()) return render_answer(p.values.empty() ? "?" : p.values.front(), "first");
    const auto& last = p.history.back();
    return render_answer(last.p1 == last.p2 ? last.p1 : last.p2, "follow the partner");
  }
  if (std::regex_search(q, m, std::regex(R"(What is the (lowest|highest) payoff)"))) {
    return answer(std::to_string(m[1] == "lowest" ? p.penalty : p.reward));
  }
  if (std::regex_search(q, m, std::regex(R"(Which actions is Player \d allowed to play)"))) {
    std::string all;
    for (const auto& v : p.values) all += (all.empty() ? "" : ", ") + v;
    return answer("[" + all + "]");
  }
  if (std::regex_search(q, m, std::regex(R"(if Player \d plays (\S+) and Player \d plays (\S+)\?)"))) {
    return answer(std::to_string(m[1] == m[2] ? p.reward : p.penalty));
  }
  if (std::regex_search(q, m, std::regex(R"(current round of the game)"))) {
    return answer(std::to_string(p.round));
  }
  if (std::regex_search(q, m, std::regex(R"(Which action did Player (\d) play in round (\d+)\?)"))) {
    const long long r = std::stoll(m[2]);
    for (const auto& h : p.history) {
      if (h.round == r) return answer(m[1] == "1" ? h.p1 : h.p2);
    }
    return answer("unknown");
  }
  if (std::regex_search(q, m, std::regex(R"(How many points did Player \d collect in round (\d+)\?)"))) {
    const long long r = std::stoll(m[1]);
    for (const auto& h : p.history) {
      if (h.round == r) return answer(std::to_string(h.payoff));
    }
    return answer("unknown");
  }
  if (std::regex_search(q, m, std::regex(R"(How many times did Player (\d) choose ([^?\s]+)\?)"))) {
    long long count = 0;
    for (const auto& h : p.history) count += (m[1] == "1" ? h.p1 : h.p2) == m[2].str();
    return answer(std::to_string(count));
  }
  if (std::regex_search(q, m, std::regex(R"(What is Player (\d)'s current total payoff\?)"))) {
    if (m[1] == "1") return answer(std::to_string(p.score));
    long long total = 0;
    for (const auto& h : p.history) total += h.payoff;
    return answer(std::to_string(total));
  }
  return answer("unknown");
}

std::string ScrambledTransport::send(const ChatRequest& request) {
  const ParsedPrompt p = read_prompt(request.system);
  const std::string& q = request.user;
  auto random_value = [&] {
    return p.values.empty() ? std::string("?") : p.values[uniform_index(rng_, p.values.size())];
  };
  auto random_points = [&] {
    return std::to_string(50 * (static_cast<long long>(uniform_index(rng_, 16)) - 5));
  };

  if (q.starts_with(kDecisionUserPrompt)) return render_answer(random_value(), "random");
  if (q.find("How many times") != std::string::npos) {
    return answer(std::to_string(uniform_index(rng_, 6)));
  }
  if (q.find("current round") != std::string::npos) {
    return answer(std::to_string(1 + uniform_index(rng_, 100)));
  }
  if (q.find("Which actions") != std::string::npos) return answer("[" + random_value() + "]");
  if (q.find("Which action did") != std::string::npos) return answer(random_value());
  return answer(random_points());
}

}  // namespace convgame
