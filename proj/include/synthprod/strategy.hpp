#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "synthprod/rng.hpp"

namespace synthprod {

enum class StrategyLabel { correct, incorrect, unknown };

inline constexpr std::array<StrategyLabel, 3> all_strategies{StrategyLabel::correct, StrategyLabel::incorrect,
                                                             StrategyLabel::unknown};

std::string_view to_string(StrategyLabel l);
std::optional<StrategyLabel> parse_strategy(std::string_view s);

struct StrategyProbabilities {
    double pi_correct = 0.5;
    double pi_incorrect = 0.25;
    double pi_unknown = 0.25;

    double of(StrategyLabel l) const;
};

// nullopt when valid, otherwise a message naming the violated constraint.
std::optional<std::string> validate_probabilities(const StrategyProbabilities& p);

// Parses "a,b,c"; throws Error(usage) on malformed input or invalid triple.
StrategyProbabilities parse_probabilities(std::string_view csv);

// One uniform draw against cumulative thresholds in the order
// correct, incorrect, unknown.
StrategyLabel sample_strategy(const StrategyProbabilities& p, Rng& rng);

} // namespace synthprod
