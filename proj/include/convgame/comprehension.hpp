#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "convgame/engine.hpp"
#include "convgame/llm.hpp"

namespace convgame {

/// Prompt-comprehension question templates, grouped as rules (min_max,
/// actions, payoff), time (round, action_i, points_i) and state
/// (#actions, #points).
enum class QuestionType { min_max, actions, payoff, round, action_i, points_i, num_actions, num_points };

inline constexpr std::array<QuestionType, 8> kQuestionTypes = {
    QuestionType::min_max,  QuestionType::actions,  QuestionType::payoff,
    QuestionType::round,    QuestionType::action_i, QuestionType::points_i,
    QuestionType::num_actions, QuestionType::num_points};

const char* to_string(QuestionType type);
const char* category_of(QuestionType type);
bool needs_memory(QuestionType type);

struct ComprehensionQuestion {
  QuestionType type;
  std::string text;
  std::string truth;
};

/// Every applicable question for one decision point, with ground truth
/// computed from the memory. Memory-dependent questions are skipped when
/// the memory is empty.
std::vector<ComprehensionQuestion> render_questions(const NamePool& pool, const PayoffRule& payoffs,
                                                    const MemoryWindow& memory,
                                                    std::uint64_t round_index, Rng& rng);

std::string question_user_prompt(const ComprehensionQuestion& question);

/// Reads the `answer` field from a response and compares it with the
/// ground truth (numbers numerically, action sets as sets).
bool score_answer(const ComprehensionQuestion& question, std::string_view raw);

struct QuestionTally {
  std::size_t asked = 0;
  std::size_t correct = 0;
  double accuracy() const {
    return asked ? static_cast<double>(correct) / static_cast<double>(asked) : 0.0;
  }
};

struct ComprehensionReport {
  std::size_t agent = 0;
  std::size_t interactions = 0;
  std::map<QuestionType, QuestionTally> tallies;

  double accuracy(QuestionType type) const;
  /// Pooled accuracy over a category ("rules", "time", "state").
  double category_accuracy(std::string_view category) const;
};

/// Replays each of the agent's interactions with the memory it held at the
/// time (truncated to memory_length), poses all applicable questions and
/// scores the answers.
ComprehensionReport run_comprehension_suite(const RunLog& log, std::size_t agent,
                                            std::size_t memory_length, Transport& transport,
                                            const LlmParams& params, std::uint64_t seed);

/// Answers comprehension questions by reading the rendered prompt, the way
/// an attentive model would. Decision prompts get a keep/switch answer.
class ComprehensionOracleTransport final : public Transport {
 public:
  std::string send(const ChatRequest& request) override;
};

/// Answers with plausible-looking random values.
class ScrambledTransport final : public Transport {
 public:
  explicit ScrambledTransport(std::uint64_t seed) : rng_(seed) {}
  std::string send(const ChatRequest& request) override;

 private:
  Rng rng_;
};

}  // namespace convgame
