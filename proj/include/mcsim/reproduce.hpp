#pragma once

#include <string>
#include <vector>

namespace mcsim {

struct FigureResult {
    bool pass = false;
    std::string report;  // human-readable diff / values
};

/// Canned figure ids accepted by reproduce_figure.
std::vector<std::string> figure_ids();

/// Runs the canned scenario behind `id` and diffs the measured values
/// (and, where one is committed, the full event trace) against the golden
/// files under <root>/data/golden. With `update` the goldens are
/// rewritten instead of compared. Unknown ids throw std::invalid_argument.
FigureResult reproduce_figure(const std::string& id, const std::string& root,
                              bool update = false);

}  // namespace mcsim
