#include "synthprod/strategy.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "synthprod/error.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

std::string_view to_string(StrategyLabel l) {
    switch (l) {
    case StrategyLabel::correct: return "correct";
    case StrategyLabel::incorrect: return "incorrect";
    case StrategyLabel::unknown: return "unknown";
    }
    return "unknown";
}

std::optional<StrategyLabel> parse_strategy(std::string_view s) {
    for (auto l : all_strategies)
        if (to_string(l) == s) return l;
    return std::nullopt;
}

double StrategyProbabilities::of(StrategyLabel l) const {
    switch (l) {
    case StrategyLabel::correct: return pi_correct;
    case StrategyLabel::incorrect: return pi_incorrect;
    case StrategyLabel::unknown: return pi_unknown;
    }
    return 0.0;
}

std::optional<std::string> validate_probabilities(const StrategyProbabilities& p) {
    for (auto l : all_strategies) {
        double v = p.of(l);
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            std::ostringstream os;
            os << "pi_" << to_string(l) << " = " << v << " outside [0, 1]";
            return os.str();
        }
    }
    double sum = p.pi_correct + p.pi_incorrect + p.pi_unknown;
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "sum " << sum << " \xE2\x89\xA0 1";
        return os.str();
    }
    return std::nullopt;
}

StrategyProbabilities parse_probabilities(std::string_view csv) {
    auto parts = text::split(csv, ',');
    if (parts.size() != 3) throw Error(ErrorKind::usage, "--pi expects three comma-separated numbers");
    double v[3];
    for (int i = 0; i < 3; ++i) {
        auto s = text::trim(parts[i]);
        char* end = nullptr;
        v[i] = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size())
            throw Error(ErrorKind::usage, "--pi component '" + s + "' is not a number");
    }
    StrategyProbabilities p{v[0], v[1], v[2]};
    if (auto err = validate_probabilities(p)) throw Error(ErrorKind::usage, "invalid --pi: " + *err);
    return p;
}

StrategyLabel sample_strategy(const StrategyProbabilities& p, Rng& rng) {
    double u = rng.uniform01();
    if (u < p.pi_correct) return StrategyLabel::correct;
    if (u < p.pi_correct + p.pi_incorrect) return StrategyLabel::incorrect;
    // Guard against rounding leaving u above the last threshold.
    if (p.pi_unknown > 0.0) return StrategyLabel::unknown;
    return p.pi_incorrect > 0.0 ? StrategyLabel::incorrect : StrategyLabel::correct;
}

} // namespace synthprod
